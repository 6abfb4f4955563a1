//! The pointer degree of freedom.
//!
//! The initial meter wavefunction is the real Gaussian
//!
//! ```text
//! m(q) = (2π Δ²)^(-1/4) · exp(−q² / (4Δ²)),   |m(q)|² ~ N(0, Δ²)
//! ```
//!
//! so `Δ` is the standard deviation of the pointer-position distribution.
//! A [`BranchMeterState`] is a finite superposition of translated copies of
//! `m` (and of its derivative `m'`, which is how the momentum `P_M = −i d/dq`
//! acts on it). All overlaps and first moments are Gaussian integrals and are
//! evaluated in closed form; [`GridMeterState`] is a pointwise rendering used
//! as an independent quadrature oracle and as the sampler for pointer readouts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hilbert::C64;

/// Default number of grid nodes for rendering.
pub const DEFAULT_GRID_POINTS: usize = 1 << 14;
/// Default half-width of the rendered window, in units of Δ.
pub const DEFAULT_GRID_HALF_WIDTH: f64 = 12.0;
/// Minimum margin (in Δ) the grid must leave around every branch.
pub const MIN_GRID_MARGIN: f64 = 8.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeterError {
    #[error("meter width must be positive and finite, got {0}")]
    BadWidth(f64),
    #[error("meter state has zero norm")]
    ZeroMeter,
    #[error("grid [{q_min}, {q_max}] does not cover branches in [{need_min}, {need_max}]")]
    RangeTooSmall {
        q_min: f64,
        q_max: f64,
        need_min: f64,
        need_max: f64,
    },
    #[error("grid needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("meter states with different widths ({0} vs {1})")]
    WidthMismatch(f64, f64),
    #[error("momentum action is only supported on Gaussian branches")]
    UnsupportedBranch,
}

pub type Result<T> = std::result::Result<T, MeterError>;

/// Width of the initial pointer Gaussian (standard deviation of `|m(q)|²`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    delta: f64,
}

impl GaussianSpec {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(MeterError::BadWidth(delta));
        }
        Ok(GaussianSpec { delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `m(q)` for the unshifted Gaussian.
    pub fn amplitude(&self, q: f64) -> f64 {
        let d2 = self.delta * self.delta;
        (2.0 * std::f64::consts::PI * d2).powf(-0.25) * (-q * q / (4.0 * d2)).exp()
    }
}

impl Default for GaussianSpec {
    fn default() -> Self {
        GaussianSpec { delta: 1.0 }
    }
}

/// Shape carried by one branch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BranchKind {
    /// `m(q − shift)`
    Gaussian,
    /// `m'(q − shift)`, a first-Hermite Gaussian.
    Derivative,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeterBranch {
    pub coefficient: C64,
    pub shift: f64,
    pub kind: BranchKind,
}

impl MeterBranch {
    pub fn gaussian(coefficient: C64, shift: f64) -> Self {
        MeterBranch {
            coefficient,
            shift,
            kind: BranchKind::Gaussian,
        }
    }
}

/// `φ(q) = Σ_k c_k · shape_k(q − shift_k)`. An empty branch list is the zero state.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchMeterState {
    spec: GaussianSpec,
    branches: Vec<MeterBranch>,
}

pub fn init_gaussian(spec: GaussianSpec) -> BranchMeterState {
    BranchMeterState {
        spec,
        branches: vec![MeterBranch::gaussian(C64::new(1.0, 0.0), 0.0)],
    }
}

impl BranchMeterState {
    pub fn from_branches(spec: GaussianSpec, branches: Vec<MeterBranch>) -> Self {
        BranchMeterState { spec, branches }
    }

    pub fn zero(spec: GaussianSpec) -> Self {
        BranchMeterState {
            spec,
            branches: Vec::new(),
        }
    }

    pub fn spec(&self) -> GaussianSpec {
        self.spec
    }

    pub fn branches(&self) -> &[MeterBranch] {
        &self.branches
    }

    pub fn is_zero(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn scale(&self, factor: C64) -> Self {
        BranchMeterState {
            spec: self.spec,
            branches: self
                .branches
                .iter()
                .map(|b| MeterBranch {
                    coefficient: b.coefficient * factor,
                    ..*b
                })
                .collect(),
        }
    }

    /// Superposition `self + other` (branch lists are concatenated).
    pub fn superpose(&self, other: &BranchMeterState) -> Result<Self> {
        check_spec(self.spec, other.spec)?;
        let mut branches = self.branches.clone();
        branches.extend_from_slice(&other.branches);
        Ok(BranchMeterState {
            spec: self.spec,
            branches,
        })
    }

    /// Action of the pointer momentum `P_M = −i d/dq`.
    pub fn momentum_action(&self) -> Result<Self> {
        let branches = self
            .branches
            .iter()
            .map(|b| match b.kind {
                BranchKind::Gaussian => Ok(MeterBranch {
                    coefficient: b.coefficient * C64::new(0.0, -1.0),
                    shift: b.shift,
                    kind: BranchKind::Derivative,
                }),
                BranchKind::Derivative => Err(MeterError::UnsupportedBranch),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BranchMeterState {
            spec: self.spec,
            branches,
        })
    }

    /// `φ(q)` at one point.
    pub fn evaluate(&self, q: f64) -> C64 {
        let d2 = self.spec.delta * self.spec.delta;
        self.branches
            .iter()
            .map(|b| {
                let u = q - b.shift;
                let envelope = match b.kind {
                    BranchKind::Gaussian => 1.0,
                    BranchKind::Derivative => -u / (2.0 * d2),
                };
                b.coefficient * (envelope * self.spec.amplitude(u))
            })
            .sum()
    }

    /// Smallest and largest branch shift, or `(0, 0)` for the zero state.
    pub fn shift_range(&self) -> (f64, f64) {
        if self.branches.is_empty() {
            return (0.0, 0.0);
        }
        self.branches
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), b| {
                (lo.min(b.shift), hi.max(b.shift))
            })
    }
}

fn check_spec(a: GaussianSpec, b: GaussianSpec) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(MeterError::WidthMismatch(a.delta, b.delta))
    }
}

/// Translates every branch by `amount`; coefficients are untouched.
pub fn shift_branches(m: &BranchMeterState, amount: f64) -> BranchMeterState {
    BranchMeterState {
        spec: m.spec,
        branches: m
            .branches
            .iter()
            .map(|b| MeterBranch {
                shift: b.shift + amount,
                ..*b
            })
            .collect(),
    }
}

// Polynomials in the centred variable u = q − (a+b)/2, low-order first.
type Poly = [f64; 5];

fn poly_mul(a: &Poly, b: &Poly) -> Poly {
    let mut out = [0.0; 5];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            if y == 0.0 {
                continue;
            }
            assert!(i + j < 5, "moment degree exceeds 4");
            out[i + j] += x * y;
        }
    }
    out
}

/// Envelope of a branch as a polynomial in u, given offset = centre − shift.
fn envelope(kind: BranchKind, offset: f64, d2: f64) -> Poly {
    match kind {
        BranchKind::Gaussian => [1.0, 0.0, 0.0, 0.0, 0.0],
        // −(q − shift)/(2Δ²) = −(u + offset)/(2Δ²)
        BranchKind::Derivative => {
            let k = -1.0 / (2.0 * d2);
            [k * offset, k, 0.0, 0.0, 0.0]
        }
    }
}

/// `∫ shape_a(q−a) shape_b(q−b) qⁿ dq` for n ∈ {0, 1}.
///
/// With `c = (a+b)/2` the product of the two Gaussians is
/// `exp(−(a−b)²/(8Δ²))` times the N(c, Δ²) density, so every integral
/// reduces to low-order moments of a centred normal: E[u²] = Δ², E[u⁴] = 3Δ⁴.
fn pair_integral(spec: GaussianSpec, a: &MeterBranch, b: &MeterBranch, power: u8) -> f64 {
    let d2 = spec.delta * spec.delta;
    let centre = 0.5 * (a.shift + b.shift);
    let sep = a.shift - b.shift;
    let overlap = (-sep * sep / (8.0 * d2)).exp();
    let mut p = poly_mul(
        &envelope(a.kind, centre - a.shift, d2),
        &envelope(b.kind, centre - b.shift, d2),
    );
    if power == 1 {
        p = poly_mul(&p, &[centre, 1.0, 0.0, 0.0, 0.0]);
    }
    let moments = [1.0, 0.0, d2, 0.0, 3.0 * d2 * d2];
    overlap * p.iter().zip(moments).map(|(c, m)| c * m).sum::<f64>()
}

/// ⟨a|b⟩ for meter states of the same width.
pub fn meter_inner(a: &BranchMeterState, b: &BranchMeterState) -> Result<C64> {
    check_spec(a.spec, b.spec)?;
    let mut acc = C64::new(0.0, 0.0);
    for x in &a.branches {
        for y in &b.branches {
            acc += x.coefficient.conj() * y.coefficient * pair_integral(a.spec, x, y, 0);
        }
    }
    Ok(acc)
}

/// ⟨φ|φ⟩.
pub fn norm_squared(m: &BranchMeterState) -> f64 {
    let mut acc = 0.0;
    for (i, x) in m.branches.iter().enumerate() {
        acc += x.coefficient.norm_sqr() * pair_integral(m.spec, x, x, 0);
        for y in &m.branches[i + 1..] {
            acc += 2.0 * (x.coefficient.conj() * y.coefficient).re * pair_integral(m.spec, x, y, 0);
        }
    }
    acc.max(0.0)
}

/// ⟨φ|Q_M|φ⟩ / ⟨φ|φ⟩ in closed form.
pub fn q_mean(m: &BranchMeterState) -> Result<f64> {
    let n2 = norm_squared(m);
    if !(n2 > 0.0) {
        return Err(MeterError::ZeroMeter);
    }
    let mut first = 0.0;
    for (i, x) in m.branches.iter().enumerate() {
        first += x.coefficient.norm_sqr() * pair_integral(m.spec, x, x, 1);
        for y in &m.branches[i + 1..] {
            first +=
                2.0 * (x.coefficient.conj() * y.coefficient).re * pair_integral(m.spec, x, y, 1);
        }
    }
    Ok(first / n2)
}

/// Pointwise samples of `φ(q)` on a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridMeterState {
    q_min: f64,
    q_max: f64,
    samples: Vec<C64>,
}

impl GridMeterState {
    pub fn q_min(&self) -> f64 {
        self.q_min
    }

    pub fn q_max(&self) -> f64 {
        self.q_max
    }

    pub fn n_points(&self) -> usize {
        self.samples.len()
    }

    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    pub fn spacing(&self) -> f64 {
        (self.q_max - self.q_min) / (self.samples.len() - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        self.q_min + i as f64 * self.spacing()
    }

    pub fn density(&self) -> Vec<f64> {
        self.samples.iter().map(|z| z.norm_sqr()).collect()
    }

    fn trapezoid(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        let n = self.samples.len();
        let h = self.spacing();
        let mut acc = 0.0;
        for (i, z) in self.samples.iter().enumerate() {
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            acc += w * f(self.node(i), z.norm_sqr());
        }
        acc * h
    }

    pub fn norm_squared(&self) -> f64 {
        self.trapezoid(|_, p| p)
    }

    pub fn q_mean(&self) -> Result<f64> {
        let n2 = self.norm_squared();
        if !(n2 > 0.0) {
            return Err(MeterError::ZeroMeter);
        }
        Ok(self.trapezoid(|q, p| q * p) / n2)
    }

    pub fn q_variance(&self) -> Result<f64> {
        let n2 = self.norm_squared();
        if !(n2 > 0.0) {
            return Err(MeterError::ZeroMeter);
        }
        let mean = self.trapezoid(|q, p| q * p) / n2;
        Ok(self.trapezoid(|q, p| (q - mean) * (q - mean) * p) / n2)
    }
}

pub fn render_grid(
    m: &BranchMeterState,
    q_min: f64,
    q_max: f64,
    n_points: usize,
) -> Result<GridMeterState> {
    if n_points < 2 {
        return Err(MeterError::TooFewPoints(n_points));
    }
    let (lo, hi) = m.shift_range();
    let margin = MIN_GRID_MARGIN * m.spec.delta;
    let (need_min, need_max) = (lo - margin, hi + margin);
    if q_min > need_min || q_max < need_max {
        return Err(MeterError::RangeTooSmall {
            q_min,
            q_max,
            need_min,
            need_max,
        });
    }
    let h = (q_max - q_min) / (n_points - 1) as f64;
    let samples = (0..n_points)
        .map(|i| m.evaluate(q_min + i as f64 * h))
        .collect();
    Ok(GridMeterState {
        q_min,
        q_max,
        samples,
    })
}

/// Renders on `[min shift − 12Δ, max shift + 12Δ]` with 2¹⁴ nodes.
pub fn render_default(m: &BranchMeterState) -> GridMeterState {
    let (lo, hi) = m.shift_range();
    let w = DEFAULT_GRID_HALF_WIDTH * m.spec.delta;
    render_grid(m, lo - w, hi + w, DEFAULT_GRID_POINTS).expect("default window covers branches")
}

/// Inverse-CDF sampler for the normalized `|φ(q)|²`.
///
/// The density is taken piecewise linear between grid nodes (the same model
/// the trapezoid rule integrates), and each draw inverts that CDF exactly.
#[derive(Clone, Debug)]
pub struct GridSampler {
    q_min: f64,
    h: f64,
    density: Vec<f64>,
    cdf: Vec<f64>,
}

impl GridSampler {
    pub fn new(grid: &GridMeterState) -> Result<Self> {
        let density = grid.density();
        let h = grid.spacing();
        let mut cdf = Vec::with_capacity(density.len());
        cdf.push(0.0);
        for w in density.windows(2) {
            let last = *cdf.last().unwrap();
            cdf.push(last + 0.5 * h * (w[0] + w[1]));
        }
        let total = *cdf.last().unwrap();
        if !(total > 0.0) {
            return Err(MeterError::ZeroMeter);
        }
        let density = density.into_iter().map(|p| p / total).collect();
        for c in &mut cdf {
            *c /= total;
        }
        Ok(GridSampler {
            q_min: grid.q_min,
            h,
            density,
            cdf,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        // First cell whose upper CDF bound exceeds u.
        let cell = self.cdf[1..]
            .partition_point(|&c| c <= u)
            .min(self.cdf.len() - 2);
        let r = (u - self.cdf[cell]) / self.h;
        let (p0, p1) = (self.density[cell], self.density[cell + 1]);
        // Solve p0 t + (p1 − p0) t²/2 = r for t ∈ [0, 1].
        let disc = (p0 * p0 + 2.0 * (p1 - p0) * r).max(0.0);
        let denom = p0 + disc.sqrt();
        let t = if denom > 0.0 { 2.0 * r / denom } else { 0.5 };
        self.q_min + (cell as f64 + t.clamp(0.0, 1.0)) * self.h
    }
}

/// `n` i.i.d. pointer readouts; deterministic for a fixed seed.
pub fn sample_q(m: &GridMeterState, n: usize, seed: u64) -> Result<Vec<f64>> {
    let sampler = GridSampler::new(m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| sampler.sample(&mut rng)).collect())
}
