//! Analytic weak values and the continuity diagnostics.
//!
//! A weak value `⟨f|U S|in⟩ / ⟨f|U|in⟩` is only representative of the
//! undisturbed system if the source state `S|in⟩` keeps a component along the
//! undisturbed state, both at the coupling and throughout the subsequent
//! evolution. [`classify`] turns that into a decision tree:
//!
//! | check (in order)                                  | class                      |
//! |---------------------------------------------------|----------------------------|
//! | `|⟨f|U|in⟩| < tol`                                | `UndefinedPostselection`   |
//! | `‖S|in⟩‖ < tol`                                   | `NullProjection`           |
//! | `|⟨in|S|in⟩| < tol`                               | `DerailedAtInsertion`      |
//! | stages exist and the final live overlap `< tol`   | `DerailedUnderEvolution`   |
//! | otherwise                                         | `WellBehaved`              |

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{apply, inner, projector, Operator, StateVector, C64};
use crate::scenarios::{Scenario, OVERLAP_TOL};

/// Default absolute tolerance for the classifier's vanishing tests.
pub const CLASSIFY_TOL: f64 = 1e-10;

/// Printed alongside every `NullProjection` result.
pub const NULL_PROJECTION_CAVEAT: &str = "S|in> = 0, so the weak value is exactly zero. \
Whether this is a departure from the undisturbed ray or a representative zero is a matter \
of judgment; no representativeness claim is made either way.";

/// Printed alongside every `DerailedUnderEvolution` result.
pub const FINAL_STAGE_NOTE: &str = "classification uses the live overlap at the final stage \
only; inspect the trace for transient zeros that later revive.";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BehaviorClass {
    WellBehaved,
    DerailedAtInsertion,
    NullProjection,
    DerailedUnderEvolution,
    UndefinedPostselection,
}

impl fmt::Display for BehaviorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BehaviorClass::WellBehaved => "WellBehaved",
            BehaviorClass::DerailedAtInsertion => "DerailedAtInsertion",
            BehaviorClass::NullProjection => "NullProjection",
            BehaviorClass::DerailedUnderEvolution => "DerailedUnderEvolution",
            BehaviorClass::UndefinedPostselection => "UndefinedPostselection",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TracePoint {
    /// `"insertion"` for the point right after the coupling, else the label
    /// of the stage just applied.
    pub stage: String,
    /// `⟨ψ_und|ψ_S⟩` with `ψ_und = U|in⟩`, `ψ_S = U S|in⟩`.
    #[serde(serialize_with = "crate::report::ser_complex")]
    pub full_overlap: C64,
    /// The same overlap after restricting both vectors to the live arms.
    #[serde(serialize_with = "crate::report::ser_complex")]
    pub live_overlap: C64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DerailmentTrace {
    pub points: Vec<TracePoint>,
}

impl DerailmentTrace {
    pub fn last(&self) -> &TracePoint {
        self.points.last().expect("trace has the insertion point")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub behavior: BehaviorClass,
    #[serde(serialize_with = "crate::report::ser_complex")]
    pub s_expectation: C64,
    /// `‖S|in⟩‖`.
    pub source_norm: f64,
    #[serde(serialize_with = "crate::report::ser_complex")]
    pub postselection_overlap: C64,
    pub trace: DerailmentTrace,
    /// `None` when the postselection overlap vanishes.
    #[serde(serialize_with = "crate::report::ser_opt_complex")]
    pub analytic_weak_value: Option<C64>,
    pub notes: Vec<String>,
}

/// Weak value of an arbitrary operator between the scenario's pre- and postselection.
pub fn weak_value_of(s: &Scenario, op: &Operator) -> Result<C64> {
    let u = s.system_evolution();
    let denominator = inner(&s.postselected, &apply(&u, &s.preselected)?)?;
    if denominator.norm() < OVERLAP_TOL {
        return Err(Error::UndefinedWeakValue {
            overlap: denominator.norm(),
        });
    }
    let source = apply(op, &s.preselected)?;
    let numerator = inner(&s.postselected, &apply(&u, &source)?)?;
    Ok(numerator / denominator)
}

/// `⟨f|U_sys S|in⟩ / ⟨f|U_sys|in⟩`.
pub fn analytic_weak_value(s: &Scenario) -> Result<C64> {
    weak_value_of(s, &s.observable.operator)
}

/// `⟨in|S|in⟩`.
pub fn s_expectation(s: &Scenario) -> Result<C64> {
    Ok(inner(
        &s.preselected,
        &apply(&s.observable.operator, &s.preselected)?,
    )?)
}

pub fn derailment_trace(s: &Scenario) -> Result<DerailmentTrace> {
    let mut undisturbed = s.preselected.clone();
    let mut source = apply(&s.observable.operator, &s.preselected)?;
    let point = |label: &str, und: &StateVector, src: &StateVector| -> Result<TracePoint> {
        Ok(TracePoint {
            stage: label.to_string(),
            full_overlap: inner(und, src)?,
            live_overlap: inner(
                &und.restrict_to(&s.live_labels),
                &src.restrict_to(&s.live_labels),
            )?,
        })
    };
    let mut points = vec![point("insertion", &undisturbed, &source)?];
    for stage in &s.stages {
        undisturbed = apply(&stage.operator, &undisturbed)?;
        source = apply(&stage.operator, &source)?;
        points.push(point(&stage.label, &undisturbed, &source)?);
    }
    Ok(DerailmentTrace { points })
}

pub fn classify(s: &Scenario, tol: f64) -> Result<DiagnosticsReport> {
    let postselection_overlap = s.postselection_overlap()?;
    let source_norm = apply(&s.observable.operator, &s.preselected)?.norm();
    let s_exp = s_expectation(s)?;
    let trace = derailment_trace(s)?;

    let behavior = if postselection_overlap.norm() < tol {
        BehaviorClass::UndefinedPostselection
    } else if source_norm < tol {
        BehaviorClass::NullProjection
    } else if s_exp.norm() < tol {
        BehaviorClass::DerailedAtInsertion
    } else if !s.stages.is_empty() && trace.last().live_overlap.norm() < tol {
        BehaviorClass::DerailedUnderEvolution
    } else {
        BehaviorClass::WellBehaved
    };

    let analytic_weak_value = match analytic_weak_value(s) {
        Ok(w) => Some(w),
        Err(Error::UndefinedWeakValue { .. }) => None,
        Err(e) => return Err(e),
    };
    let mut notes = Vec::new();
    match behavior {
        BehaviorClass::NullProjection => notes.push(NULL_PROJECTION_CAVEAT.to_string()),
        BehaviorClass::DerailedUnderEvolution => notes.push(FINAL_STAGE_NOTE.to_string()),
        _ => {}
    }
    if behavior == BehaviorClass::WellBehaved
        && trace.points.iter().any(|p| p.live_overlap.norm() < tol)
    {
        notes.push(format!(
            "transient zero live overlap in the trace; {FINAL_STAGE_NOTE}"
        ));
    }

    Ok(DiagnosticsReport {
        behavior,
        s_expectation: s_exp,
        source_norm,
        postselection_overlap,
        trace,
        analytic_weak_value,
        notes,
    })
}

/// Weak values of the projectors onto mutually orthogonal channel states.
pub fn channel_weak_values(s: &Scenario, channels: &[StateVector]) -> Result<Vec<C64>> {
    for (i, a) in channels.iter().enumerate() {
        for b in &channels[i + 1..] {
            let overlap = inner(a, b)?.norm() / (a.norm() * b.norm());
            if overlap > CLASSIFY_TOL {
                return Err(Error::ChannelsNotOrthogonal(overlap));
            }
        }
    }
    channels
        .iter()
        .map(|ch| weak_value_of(s, &projector(ch)?))
        .collect()
}
