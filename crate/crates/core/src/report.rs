//! Machine-readable reports written by the command-line front end.
//!
//! Every report carries the tool version, the scenario hash and convention
//! string, and the command that produced it. Reports contain no timestamps,
//! so re-running the embedded command reproduces them byte for byte.

use serde::{Serialize, Serializer};

use crate::analysis::DiagnosticsReport;
use crate::hilbert::C64;
use crate::protocol::{MonteCarloEstimate, WeakValueEstimate};
use crate::scenarios::Scenario;

#[derive(Serialize)]
struct ComplexJson {
    re: f64,
    im: f64,
}

pub(crate) fn ser_complex<S: Serializer>(z: &C64, s: S) -> Result<S::Ok, S::Error> {
    ComplexJson { re: z.re, im: z.im }.serialize(s)
}

pub(crate) fn ser_opt_complex<S: Serializer>(z: &Option<C64>, s: S) -> Result<S::Ok, S::Error> {
    z.map(|z| ComplexJson { re: z.re, im: z.im }).serialize(s)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

impl ToolInfo {
    pub fn current() -> Self {
        ToolInfo {
            name: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioInfo {
    pub name: String,
    pub observable: String,
    /// SHA-256 of the canonical scenario document.
    pub hash: String,
    pub convention: String,
    pub meter_delta: f64,
}

impl ScenarioInfo {
    pub fn of(s: &Scenario) -> Self {
        ScenarioInfo {
            name: s.name.clone(),
            observable: s.observable.name.clone(),
            hash: s.hash(),
            convention: s.convention.clone(),
            meter_delta: s.meter.delta(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub tool: ToolInfo,
    pub command: Vec<String>,
    pub scenario: ScenarioInfo,
    #[serde(serialize_with = "ser_opt_complex")]
    pub analytic_weak_value: Option<C64>,
    pub operational: WeakValueEstimate,
    pub postselection_probabilities: Vec<f64>,
    pub diagnostics: DiagnosticsReport,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepReport {
    pub tool: ToolInfo,
    pub command: Vec<String>,
    pub scenario: ScenarioInfo,
    pub estimate: WeakValueEstimate,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnoseReport {
    pub tool: ToolInfo,
    pub command: Vec<String>,
    pub scenario: ScenarioInfo,
    pub diagnostics: DiagnosticsReport,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleReport {
    pub tool: ToolInfo,
    pub command: Vec<String>,
    pub scenario: ScenarioInfo,
    pub seed: u64,
    pub monte_carlo: MonteCarloEstimate,
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(report: &T) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("reports serialize");
    s.push('\n');
    s
}
