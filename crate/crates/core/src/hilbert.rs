//! Dense complex linear algebra over small, labeled Hilbert spaces.
//!
//! Every vector and operator carries the ordered list of basis labels it is
//! expressed in, so that arm names ("L", "B", "D2", ...) survive all the way
//! into reports. Spaces here are tiny (dimension at most a few dozen), so
//! everything is stored densely.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Complex scalar used throughout the crate.
pub type C64 = Complex64;

/// Tolerance used when checking Hermiticity and unitarity.
pub const OPERATOR_TOL: f64 = 1e-10;

/// Absolute tolerance for grouping (near-)degenerate eigenvalues.
pub const DEGENERACY_TOL: f64 = 1e-9;

/// Tolerance for the "normalized" flag of a state.
pub const NORM_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HilbertError {
    #[error("space mismatch: {left} vs {right}")]
    SpaceMismatch { left: String, right: String },
    #[error("expected {expected} amplitudes/rows, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("zero state vector")]
    ZeroState,
    #[error("operator is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("unknown basis label `{0}`")]
    UnknownLabel(String),
    #[error("duplicate basis label `{0}`")]
    DuplicateLabel(String),
}

pub type Result<T> = std::result::Result<T, HilbertError>;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Name of one orthonormal basis vector.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BasisLabel(String);

impl BasisLabel {
    pub fn new(name: impl Into<String>) -> Self {
        BasisLabel(name.into())
    }

    /// Label of the product basis vector `a ⊗ b`, written `(a,b)`.
    pub fn pair(a: &BasisLabel, b: &BasisLabel) -> Self {
        BasisLabel(format!("({},{})", a.0, b.0))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for BasisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for BasisLabel {
    fn from(s: &str) -> Self {
        BasisLabel::new(s)
    }
}

impl From<String> for BasisLabel {
    fn from(s: String) -> Self {
        BasisLabel(s)
    }
}

/// An ordered orthonormal basis. Cheap to clone.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Space {
    labels: Arc<[BasisLabel]>,
}

impl Space {
    pub fn new<I, L>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = L>,
        L: Into<BasisLabel>,
    {
        let labels: Vec<BasisLabel> = labels.into_iter().map(Into::into).collect();
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(HilbertError::DuplicateLabel(l.to_string()));
            }
        }
        Ok(Space {
            labels: labels.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[BasisLabel] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l.as_str() == label)
            .ok_or_else(|| HilbertError::UnknownLabel(label.to_string()))
    }

    pub fn contains(&self, label: &str) -> bool {
        self.labels.iter().any(|l| l.as_str() == label)
    }

    /// Product basis, ordered with the right factor varying fastest.
    pub fn tensor(&self, other: &Space) -> Space {
        let labels: Vec<BasisLabel> = self
            .labels
            .iter()
            .flat_map(|a| other.labels.iter().map(move |b| BasisLabel::pair(a, b)))
            .collect();
        Space {
            labels: labels.into(),
        }
    }

    fn check_same(&self, other: &Space) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(HilbertError::SpaceMismatch {
                left: self.to_string(),
                right: other.to_string(),
            })
        }
    }
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, l) in self.labels.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{l}")?;
        }
        f.write_str("}")
    }
}

/// A (not necessarily normalized) pure state over a labeled basis.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    space: Space,
    amps: DVector<C64>,
}

impl StateVector {
    pub fn new(space: Space, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != space.dim() {
            return Err(HilbertError::DimensionMismatch {
                expected: space.dim(),
                got: amps.len(),
            });
        }
        Ok(StateVector {
            space,
            amps: DVector::from_vec(amps),
        })
    }

    pub fn zeros(space: &Space) -> Self {
        StateVector {
            amps: DVector::zeros(space.dim()),
            space: space.clone(),
        }
    }

    pub fn basis(space: &Space, label: &str) -> Result<Self> {
        let mut v = Self::zeros(space);
        v.amps[space.index_of(label)?] = C64::new(1.0, 0.0);
        Ok(v)
    }

    /// Builds `Σ c_k |label_k⟩`; repeated labels accumulate.
    pub fn from_terms<'a, I>(space: &Space, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, C64)>,
    {
        let mut v = Self::zeros(space);
        for (label, amp) in terms {
            v.amps[space.index_of(label)?] += amp;
        }
        Ok(v)
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        self.amps.as_slice()
    }

    pub fn amplitude(&self, label: &str) -> Result<C64> {
        Ok(self.amps[self.space.index_of(label)?])
    }

    pub fn norm_squared(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_squared() - 1.0).abs() <= NORM_TOL
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(HilbertError::ZeroState);
        }
        Ok(self.scale(C64::new(1.0 / n, 0.0)))
    }

    pub fn scale(&self, factor: C64) -> Self {
        StateVector {
            space: self.space.clone(),
            amps: &self.amps * factor,
        }
    }

    pub fn add(&self, other: &StateVector) -> Result<Self> {
        self.space.check_same(&other.space)?;
        Ok(StateVector {
            space: self.space.clone(),
            amps: &self.amps + &other.amps,
        })
    }

    pub fn sub(&self, other: &StateVector) -> Result<Self> {
        self.space.check_same(&other.space)?;
        Ok(StateVector {
            space: self.space.clone(),
            amps: &self.amps - &other.amps,
        })
    }

    /// Zeroes every amplitude whose label is not in `keep`.
    pub fn restrict_to(&self, keep: &[BasisLabel]) -> Self {
        let mut out = self.clone();
        for (i, l) in self.space.labels().iter().enumerate() {
            if !keep.contains(l) {
                out.amps[i] = C64::new(0.0, 0.0);
            }
        }
        out
    }

    /// Largest absolute amplitude difference; spaces must agree.
    pub fn max_abs_diff(&self, other: &StateVector) -> Result<f64> {
        self.space.check_same(&other.space)?;
        Ok(self
            .amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }
}

/// Square complex matrix acting on one labeled space.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    space: Space,
    matrix: DMatrix<C64>,
}

impl Operator {
    /// Row-major construction.
    pub fn from_rows(space: Space, rows: Vec<Vec<C64>>) -> Result<Self> {
        let n = space.dim();
        if rows.len() != n {
            return Err(HilbertError::DimensionMismatch {
                expected: n,
                got: rows.len(),
            });
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(HilbertError::DimensionMismatch {
                expected: n,
                got: bad.len(),
            });
        }
        let matrix = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Ok(Operator { space, matrix })
    }

    pub fn from_matrix(space: Space, matrix: DMatrix<C64>) -> Result<Self> {
        let n = space.dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(HilbertError::DimensionMismatch {
                expected: n,
                got: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(Operator { space, matrix })
    }

    pub fn identity(space: &Space) -> Self {
        Operator {
            matrix: DMatrix::identity(space.dim(), space.dim()),
            space: space.clone(),
        }
    }

    pub fn zeros(space: &Space) -> Self {
        Operator {
            matrix: DMatrix::zeros(space.dim(), space.dim()),
            space: space.clone(),
        }
    }

    /// `|ket⟩⟨bra|`.
    pub fn outer(ket: &StateVector, bra: &StateVector) -> Result<Self> {
        ket.space.check_same(&bra.space)?;
        Ok(Operator {
            space: ket.space.clone(),
            matrix: &ket.amps * bra.amps.adjoint(),
        })
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.matrix[(row, col)]
    }

    pub fn rows(&self) -> Vec<Vec<C64>> {
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.matrix[(i, j)]).collect())
            .collect()
    }

    pub fn adjoint(&self) -> Self {
        Operator {
            space: self.space.clone(),
            matrix: self.matrix.adjoint(),
        }
    }

    /// Operator product `self · rhs` (rhs acts first).
    pub fn compose(&self, rhs: &Operator) -> Result<Self> {
        self.space.check_same(&rhs.space)?;
        Ok(Operator {
            space: self.space.clone(),
            matrix: &self.matrix * &rhs.matrix,
        })
    }

    pub fn add(&self, rhs: &Operator) -> Result<Self> {
        self.space.check_same(&rhs.space)?;
        Ok(Operator {
            space: self.space.clone(),
            matrix: &self.matrix + &rhs.matrix,
        })
    }

    pub fn sub(&self, rhs: &Operator) -> Result<Self> {
        self.space.check_same(&rhs.space)?;
        Ok(Operator {
            space: self.space.clone(),
            matrix: &self.matrix - &rhs.matrix,
        })
    }

    pub fn scale(&self, factor: C64) -> Self {
        Operator {
            space: self.space.clone(),
            matrix: &self.matrix * factor,
        }
    }

    /// Largest entry of `|A − A†|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let d = &self.matrix - self.matrix.adjoint();
        d.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_defect() <= OPERATOR_TOL
    }

    /// Largest entry of `|A − B|`; spaces must agree.
    pub fn max_abs_diff(&self, other: &Operator) -> Result<f64> {
        self.space.check_same(&other.space)?;
        Ok((&self.matrix - &other.matrix)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max))
    }
}

/// ⟨a|b⟩, conjugate-linear in `a`.
pub fn inner(a: &StateVector, b: &StateVector) -> Result<C64> {
    a.space.check_same(&b.space)?;
    Ok(a.amps.dotc(&b.amps))
}

pub fn apply(op: &Operator, v: &StateVector) -> Result<StateVector> {
    op.space.check_same(&v.space)?;
    Ok(StateVector {
        space: v.space.clone(),
        amps: &op.matrix * &v.amps,
    })
}

/// Kronecker product of vectors or operators; labels become ordered pairs.
pub trait Tensor {
    fn tensor(&self, other: &Self) -> Self;
}

impl Tensor for StateVector {
    fn tensor(&self, other: &Self) -> Self {
        StateVector {
            space: self.space.tensor(&other.space),
            amps: self.amps.kronecker(&other.amps),
        }
    }
}

impl Tensor for Operator {
    fn tensor(&self, other: &Self) -> Self {
        Operator {
            space: self.space.tensor(&other.space),
            matrix: self.matrix.kronecker(&other.matrix),
        }
    }
}

pub fn tensor<T: Tensor>(a: &T, b: &T) -> T {
    a.tensor(b)
}

/// Rank-1 projector `|t⟩⟨t| / ⟨t|t⟩`; accepts unnormalized targets.
pub fn projector(target: &StateVector) -> Result<Operator> {
    let n2 = target.norm_squared();
    if n2 == 0.0 {
        return Err(HilbertError::ZeroState);
    }
    let mut op = Operator::outer(target, target)?;
    op.matrix /= C64::new(n2, 0.0);
    Ok(op)
}

/// Orthogonal projector onto the span of the given basis labels.
pub fn label_projector(space: &Space, labels: &[BasisLabel]) -> Result<Operator> {
    let mut op = Operator::zeros(space);
    for l in labels {
        let i = space.index_of(l.as_str())?;
        op.matrix[(i, i)] = C64::new(1.0, 0.0);
    }
    Ok(op)
}

/// `true` iff `op† op = 1` entrywise within [`OPERATOR_TOL`].
pub fn check_unitary(op: &Operator) -> bool {
    unitarity_defect(op) <= OPERATOR_TOL
}

pub fn unitarity_defect(op: &Operator) -> f64 {
    let n = op.dim();
    let prod = op.matrix.adjoint() * &op.matrix;
    (prod - DMatrix::<C64>::identity(n, n))
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// `S = Σ_k s_k Π_k` with distinct eigenvalues `s_k` in ascending order.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub projectors: Vec<Operator>,
}

impl SpectralDecomposition {
    pub fn reconstruct(&self) -> Operator {
        let space = self.projectors[0].space().clone();
        self.eigenvalues
            .iter()
            .zip(&self.projectors)
            .fold(Operator::zeros(&space), |acc, (s, p)| {
                acc.add(&p.scale(C64::new(*s, 0.0))).expect("same space")
            })
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

pub fn spectral_decompose(op: &Operator) -> Result<SpectralDecomposition> {
    let defect = op.hermiticity_defect();
    if defect > OPERATOR_TOL {
        return Err(HilbertError::NotHermitian(defect));
    }
    let n = op.dim();
    // Symmetrize so the eigensolver sees an exactly Hermitian input.
    let herm = (&op.matrix + op.matrix.adjoint()) * C64::new(0.5, 0.0);
    let eig = herm.symmetric_eigen();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut eigenvalues: Vec<f64> = Vec::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for idx in order {
        let lambda = eig.eigenvalues[idx];
        match groups.last_mut() {
            Some(g) if (lambda - eig.eigenvalues[g[0]]).abs() <= DEGENERACY_TOL => g.push(idx),
            _ => groups.push(vec![idx]),
        }
    }

    let mut projectors = Vec::with_capacity(groups.len());
    for g in &groups {
        let mean = g.iter().map(|&i| eig.eigenvalues[i]).sum::<f64>() / g.len() as f64;
        eigenvalues.push(snap(mean));
        let mut p = DMatrix::<C64>::zeros(n, n);
        for &i in g {
            let v = eig.eigenvectors.column(i);
            p += v * v.adjoint();
        }
        projectors.push(Operator {
            space: op.space.clone(),
            matrix: p,
        });
    }
    Ok(SpectralDecomposition {
        eigenvalues,
        projectors,
    })
}

// Eigenvalues of the projector-valued observables used here are integers;
// snapping removes 1e-16 noise from pointer shifts.
fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < 1e-13 {
        r
    } else {
        x
    }
}
