//! The operational weak-measurement pipeline.
//!
//! 1. couple system and meter with `exp(−i g S ⊗ P_M)`,
//! 2. evolve the system through the scenario's stages,
//! 3. postselect on `|f⟩`,
//! 4. read the pointer mean `f⟨Q_M⟩`,
//! 5. extract `lim_{g→0} f⟨Q_M⟩ / g` by extrapolation.
//!
//! The coupling is applied exactly: with `S = Σ_k s_k Π_k` every eigenbranch
//! `Π_k|in⟩` drags a copy of the meter translated by `g·s_k`. Since the
//! postselected pointer mean divided by `g` depends on `g` only through `g²`
//! (and on `Δ` only through `g/Δ`), both limits are taken by polynomial
//! extrapolation in `g²` or `1/Δ²`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::extrapolate::extrapolate_to_zero;
use crate::hilbert::{
    apply, check_unitary, inner, spectral_decompose, unitarity_defect, Operator, StateVector, C64,
};
use crate::meter::{
    init_gaussian, meter_inner, norm_squared, q_mean, render_default, shift_branches,
    BranchMeterState, GaussianSpec, GridSampler, DEFAULT_GRID_HALF_WIDTH, DEFAULT_GRID_POINTS,
};
use crate::scenarios::{Scenario, OVERLAP_TOL};

/// Postselection probabilities below this are rejected.
pub const MIN_POSTSELECTION_PROBABILITY: f64 = 1e-30;

/// Elimination columns used by the limit extrapolation.
pub const EXTRAPOLATION_LEVELS: usize = 3;

/// Branches whose system vector is shorter than this are dropped after coupling.
const BRANCH_CUTOFF: f64 = 1e-14;

/// One term `|ψ⟩ ⊗ |φ⟩` of a joint system–meter state.
#[derive(Clone, Debug, PartialEq)]
pub struct JointBranch {
    pub system: StateVector,
    pub meter: BranchMeterState,
}

/// `Σ_k |ψ_k⟩ ⊗ |φ_k⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct JointState {
    branches: Vec<JointBranch>,
}

impl JointState {
    pub fn product(system: StateVector, meter: BranchMeterState) -> Self {
        JointState {
            branches: vec![JointBranch { system, meter }],
        }
    }

    pub fn from_branches(branches: Vec<JointBranch>) -> Self {
        JointState { branches }
    }

    pub fn branches(&self) -> &[JointBranch] {
        &self.branches
    }

    /// `Σ_jk ⟨ψ_j|ψ_k⟩⟨φ_j|φ_k⟩`, in closed form.
    pub fn norm_squared(&self) -> Result<f64> {
        let mut acc = C64::new(0.0, 0.0);
        for a in &self.branches {
            for b in &self.branches {
                acc += inner(&a.system, &b.system)? * meter_inner(&a.meter, &b.meter)?;
            }
        }
        Ok(acc.re)
    }

    /// `‖self − other‖`, integrated on a pointer grid.
    ///
    /// The grid route keeps full relative precision for tiny differences,
    /// where expanding the norm into overlaps would cancel catastrophically.
    pub fn distance(&self, other: &JointState) -> Result<f64> {
        let all: Vec<(&JointBranch, f64)> = self
            .branches
            .iter()
            .map(|b| (b, 1.0))
            .chain(other.branches.iter().map(|b| (b, -1.0)))
            .collect();
        let Some((first, _)) = all.first() else {
            return Ok(0.0);
        };
        let dim = first.system.dim();
        let delta = first.meter.spec().delta();
        let (lo, hi) = all
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (b, _)| {
                let (l, h) = b.meter.shift_range();
                (lo.min(l), hi.max(h))
            });
        let w = DEFAULT_GRID_HALF_WIDTH * delta;
        let (q_min, q_max) = (lo - w, hi + w);
        let n = DEFAULT_GRID_POINTS;
        let h = (q_max - q_min) / (n - 1) as f64;

        let mut total = 0.0;
        let mut point = vec![C64::new(0.0, 0.0); dim];
        for i in 0..n {
            let q = q_min + i as f64 * h;
            point.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
            for (b, sign) in &all {
                let phi = b.meter.evaluate(q) * *sign;
                for (z, amp) in point.iter_mut().zip(b.system.amplitudes()) {
                    *z += amp * phi;
                }
            }
            let weight = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            total += weight * point.iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        Ok((total * h).sqrt())
    }

    /// Merges branches that carry identical meter states.
    fn merged(self) -> Result<Self> {
        let mut out: Vec<JointBranch> = Vec::with_capacity(self.branches.len());
        for b in self.branches {
            if let Some(existing) = out.iter_mut().find(|e| e.meter == b.meter) {
                existing.system = existing.system.add(&b.system)?;
            } else {
                out.push(b);
            }
        }
        Ok(JointState { branches: out })
    }
}

/// Observable and strength of the von Neumann coupling.
#[derive(Clone, Debug)]
pub struct CouplingSpec {
    observable: Operator,
    g: f64,
}

impl CouplingSpec {
    pub fn new(observable: Operator, g: f64) -> Result<Self> {
        let defect = observable.hermiticity_defect();
        if !observable.is_hermitian() {
            return Err(Error::NotHermitian(defect));
        }
        if !g.is_finite() {
            return Err(Error::BadArgument(format!(
                "coupling strength must be finite, got {g}"
            )));
        }
        Ok(CouplingSpec { observable, g })
    }

    pub fn observable(&self) -> &Operator {
        &self.observable
    }

    pub fn g(&self) -> f64 {
        self.g
    }
}

/// Exact coupling: `Σ_k (Π_k|in⟩) ⊗ shift(meter, g·s_k)`.
pub fn couple_exact(
    input: &StateVector,
    meter: &BranchMeterState,
    coupling: &CouplingSpec,
) -> Result<JointState> {
    let decomposition = spectral_decompose(&coupling.observable)?;
    let mut branches = Vec::with_capacity(decomposition.len());
    for (s, p) in decomposition
        .eigenvalues
        .iter()
        .zip(&decomposition.projectors)
    {
        let part = apply(p, input)?;
        if part.norm() < BRANCH_CUTOFF {
            continue;
        }
        branches.push(JointBranch {
            system: part,
            meter: shift_branches(meter, coupling.g * s),
        });
    }
    JointState { branches }.merged()
}

/// First-order coupling `|in⟩⊗|m⟩ − i g S|in⟩ ⊗ P_M|m⟩`.
///
/// `P_M|m⟩ = −i m'` is carried as a derivative branch, so no finite
/// differences enter the comparison with [`couple_exact`].
pub fn couple_linearized(
    input: &StateVector,
    meter: &BranchMeterState,
    coupling: &CouplingSpec,
) -> Result<JointState> {
    let mut branches = vec![JointBranch {
        system: input.clone(),
        meter: meter.clone(),
    }];
    let source = apply(&coupling.observable, input)?;
    if coupling.g != 0.0 && source.norm() > 0.0 {
        branches.push(JointBranch {
            system: source.scale(C64::new(0.0, -coupling.g)),
            meter: meter.momentum_action()?,
        });
    }
    Ok(JointState { branches })
}

/// Applies a system unitary to every branch; meters are untouched.
pub fn evolve(joint: &JointState, u: &Operator) -> Result<JointState> {
    if !check_unitary(u) {
        return Err(Error::NotUnitary(unitarity_defect(u)));
    }
    let branches = joint
        .branches
        .iter()
        .map(|b| {
            Ok(JointBranch {
                system: apply(u, &b.system)?,
                meter: b.meter.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(JointState { branches })
}

/// Projects the system on `|f⟩`: returns `Σ_k ⟨f|ψ_k⟩ φ_k` and its squared norm.
pub fn postselect(joint: &JointState, f: &StateVector) -> Result<(BranchMeterState, f64)> {
    let spec = joint
        .branches
        .first()
        .map(|b| b.meter.spec())
        .unwrap_or_default();
    let mut meter = BranchMeterState::zero(spec);
    for b in &joint.branches {
        let amp = inner(f, &b.system)?;
        if amp.norm() == 0.0 {
            continue;
        }
        meter = meter.superpose(&b.meter.scale(amp))?;
    }
    let probability = norm_squared(&meter).clamp(0.0, 1.0);
    Ok((meter, probability))
}

/// Runs couple → stages → postselect for any real `g` and returns the
/// (unnormalized) postselected meter and its probability.
pub fn postselected_meter(s: &Scenario, g: f64) -> Result<(BranchMeterState, f64)> {
    let coupling = CouplingSpec::new(s.observable.operator.clone(), g)?;
    let mut joint = couple_exact(&s.preselected, &init_gaussian(s.meter), &coupling)?;
    for stage in &s.stages {
        joint = evolve(&joint, &stage.operator)?;
    }
    postselect(&joint, &s.postselected)
}

/// Exact `f⟨Q_M⟩` and postselection probability at coupling `g ≥ 0`.
pub fn pointer_mean_postselected(s: &Scenario, g: f64) -> Result<(f64, f64)> {
    if !(g >= 0.0) {
        return Err(Error::BadArgument(format!("g must be ≥ 0, got {g}")));
    }
    let (meter, probability) = postselected_meter(s, g)?;
    if probability < MIN_POSTSELECTION_PROBABILITY {
        return Err(Error::ZeroPostselection { g, probability });
    }
    Ok((q_mean(&meter)?, probability))
}

/// Geometric coupling schedule `g_i = g_max · ratio^i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GSchedule {
    pub g_max: f64,
    pub ratio: f64,
    pub count: usize,
}

impl GSchedule {
    pub fn new(g_max: f64, ratio: f64, count: usize) -> Result<Self> {
        if !(g_max > 0.0 && g_max.is_finite()) {
            return Err(Error::BadArgument(format!(
                "g_max must be positive, got {g_max}"
            )));
        }
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::BadArgument(format!(
                "ratio must lie in (0, 1), got {ratio}"
            )));
        }
        if count < 3 {
            return Err(Error::BadArgument(format!(
                "count must be ≥ 3, got {count}"
            )));
        }
        Ok(GSchedule {
            g_max,
            ratio,
            count,
        })
    }

    /// `g_max = 0.1Δ`, ratio 0.5, 8 points.
    pub fn default_for(meter: GaussianSpec) -> Self {
        GSchedule {
            g_max: 0.1 * meter.delta(),
            ratio: 0.5,
            count: 8,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count)
            .map(|i| self.g_max * self.ratio.powi(i as i32))
            .collect()
    }
}

/// Default meter widths for the Δ → ∞ route (relative to the scenario's Δ).
pub const DEFAULT_DELTA_FACTORS: [f64; 8] = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0];

/// Which weak limit a sweep approaches.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitRoute {
    /// g → 0 at fixed Δ, extrapolated in g².
    CouplingToZero,
    /// Δ → ∞ at fixed g, extrapolated in 1/Δ².
    WidthToInfinity,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub g: f64,
    pub delta: f64,
    pub pointer_mean: f64,
    pub pointer_mean_over_g: f64,
    pub postselection_probability: f64,
}

/// Operational estimate of `Re S_w` with the data it was extracted from.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeakValueEstimate {
    pub value: f64,
    pub residual: f64,
    pub route: LimitRoute,
    pub levels: usize,
    pub points: Vec<SweepPoint>,
}

impl WeakValueEstimate {
    /// `(g, f⟨Q_M⟩, f⟨Q_M⟩/g)` per schedule point.
    pub fn per_g_table(&self) -> Vec<(f64, f64, f64)> {
        self.points
            .iter()
            .map(|p| (p.g, p.pointer_mean, p.pointer_mean_over_g))
            .collect()
    }

    pub fn postselection_probabilities(&self) -> Vec<f64> {
        self.points
            .iter()
            .map(|p| p.postselection_probability)
            .collect()
    }
}

fn require_defined(s: &Scenario) -> Result<()> {
    let overlap = s.postselection_overlap()?.norm();
    if overlap < OVERLAP_TOL {
        return Err(Error::UndefinedWeakValue { overlap });
    }
    Ok(())
}

fn sweep_point(s: &Scenario, g: f64) -> Result<SweepPoint> {
    let (mean, probability) = pointer_mean_postselected(s, g)?;
    Ok(SweepPoint {
        g,
        delta: s.meter.delta(),
        pointer_mean: mean,
        pointer_mean_over_g: mean / g,
        postselection_probability: probability,
    })
}

/// `lim_{g→0} f⟨Q_M⟩/g` by Richardson extrapolation in `g²`.
pub fn operational_weak_value(s: &Scenario, schedule: &GSchedule) -> Result<WeakValueEstimate> {
    require_defined(s)?;
    let points = schedule
        .values()
        .into_iter()
        .map(|g| sweep_point(s, g))
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = points.iter().map(|p| p.g * p.g).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.pointer_mean_over_g).collect();
    let e = extrapolate_to_zero(&xs, &ys, EXTRAPOLATION_LEVELS)?;
    Ok(WeakValueEstimate {
        value: e.value,
        residual: e.residual,
        route: LimitRoute::CouplingToZero,
        levels: e.levels,
        points,
    })
}

/// `lim_{Δ→∞} f⟨Q_M⟩/g` at fixed `g`, extrapolated in `1/Δ²`.
pub fn delta_sweep_weak_value(s: &Scenario, g: f64, deltas: &[f64]) -> Result<WeakValueEstimate> {
    if !(g > 0.0 && g.is_finite()) {
        return Err(Error::BadArgument(format!("g must be positive, got {g}")));
    }
    if deltas.windows(2).any(|w| !(w[1] > w[0])) || deltas.first().is_some_and(|d| !(*d > 0.0)) {
        return Err(Error::BadArgument(
            "deltas must be positive and strictly increasing".into(),
        ));
    }
    require_defined(s)?;
    let points = deltas
        .iter()
        .map(|&d| sweep_point(&s.with_meter(GaussianSpec::new(d)?), g))
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = points.iter().map(|p| 1.0 / (p.delta * p.delta)).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.pointer_mean_over_g).collect();
    let e = extrapolate_to_zero(&xs, &ys, EXTRAPOLATION_LEVELS)?;
    Ok(WeakValueEstimate {
        value: e.value,
        residual: e.residual,
        route: LimitRoute::WidthToInfinity,
        levels: e.levels,
        points,
    })
}

/// Default Δ list for a scenario: its own width times [`DEFAULT_DELTA_FACTORS`].
pub fn default_deltas(meter: GaussianSpec) -> Vec<f64> {
    DEFAULT_DELTA_FACTORS
        .iter()
        .map(|f| f * meter.delta())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonteCarloEstimate {
    /// Sample mean of accepted readouts divided by `g`.
    pub estimate: f64,
    pub stderr: f64,
    pub accepted: usize,
    pub n_runs: usize,
    pub seed: u64,
    pub g: f64,
    /// Exact `f⟨Q_M⟩/g` at the same `g`, for comparison.
    pub exact_mean_over_g: f64,
    pub postselection_probability: f64,
}

/// Simulates `n_runs` trials: postselection succeeds with the exact
/// probability, and each success reads one pointer value from the
/// postselected meter distribution.
pub fn monte_carlo_weak_value(
    s: &Scenario,
    g: f64,
    n_runs: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    if !(g > 0.0 && g.is_finite()) {
        return Err(Error::BadArgument(format!("g must be positive, got {g}")));
    }
    if n_runs == 0 {
        return Err(Error::BadArgument("n_runs must be ≥ 1".into()));
    }
    let (meter, probability) = postselected_meter(s, g)?;
    if probability < MIN_POSTSELECTION_PROBABILITY {
        return Err(Error::ZeroPostselection { g, probability });
    }
    let exact = q_mean(&meter)?;
    let sampler = GridSampler::new(&render_default(&meter))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut accepted = 0usize;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    let mut shift = None;
    for _ in 0..n_runs {
        if rng.random::<f64>() >= probability {
            continue;
        }
        let q = sampler.sample(&mut rng);
        // Shifted accumulation keeps the variance numerically stable.
        let k = *shift.get_or_insert(q);
        accepted += 1;
        sum += q - k;
        sum_sq += (q - k) * (q - k);
    }
    if accepted < 2 {
        return Err(Error::ZeroPostselection {
            g,
            probability: accepted as f64 / n_runs as f64,
        });
    }
    let n = accepted as f64;
    let k = shift.unwrap_or(0.0);
    let mean = k + sum / n;
    let var = ((sum_sq - sum * sum / n) / (n - 1.0)).max(0.0);
    Ok(MonteCarloEstimate {
        estimate: mean / g,
        stderr: var.sqrt() / (g * n.sqrt()),
        accepted,
        n_runs,
        seed,
        g,
        exact_mean_over_g: exact / g,
        postselection_probability: probability,
    })
}

/// Least-squares slope of `log ‖exact − linearized‖` against `log g`.
///
/// Returns `None` when every difference vanishes identically (the
/// `S|in⟩ = 0` case, where the two couplings coincide).
pub fn linearization_slope(s: &Scenario, gs: &[f64]) -> Result<(Option<f64>, Vec<f64>)> {
    let meter = init_gaussian(s.meter);
    let mut diffs = Vec::with_capacity(gs.len());
    for &g in gs {
        let coupling = CouplingSpec::new(s.observable.operator.clone(), g)?;
        let exact = couple_exact(&s.preselected, &meter, &coupling)?;
        let linear = couple_linearized(&s.preselected, &meter, &coupling)?;
        diffs.push(exact.distance(&linear)?);
    }
    let source = apply(&s.observable.operator, &s.preselected)?.norm();
    if source < OVERLAP_TOL {
        return Ok((None, diffs));
    }
    let xs: Vec<f64> = gs.iter().map(|g| g.ln()).collect();
    let ys: Vec<f64> = diffs.iter().map(|d| d.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok((Some(sxy / sxx), diffs))
}
