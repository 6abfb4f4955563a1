//! Experiment descriptions: pre/postselection, the weakly measured
//! observable, the unitary stages in between, and the meter width.
//!
//! The built-in constructions are the simple Mach–Zehnder interferometer,
//! the polarized "Cheshire cat" interferometer, the nested interferometer and
//! a three-level null-projection example. The same scenarios ship as JSON
//! files under `scenarios/` and load to bit-identical matrices.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::hilbert::{
    apply, c, check_unitary, inner, projector, BasisLabel, HilbertError, Operator, Space,
    StateVector, Tensor, C64, NORM_TOL,
};
use crate::meter::{GaussianSpec, MeterError};

/// Phase convention used by every beamsplitter and by σ_z.
pub const CONVENTION: &str = "BS(in1,in2->out1,out2): in1->(out1+i*out2)/sqrt2, \
in2->(out2+i*out1)/sqrt2; sigma_z=-i(|V><H|-|H><V|)";

/// Postselection overlaps below this are treated as vanishing.
pub const OVERLAP_TOL: f64 = 1e-12;

/// States loaded from files are renormalized (with a warning) past this.
pub const NORMALIZATION_WARN_TOL: f64 = 1e-6;

pub const BUILTIN_NAMES: [&str; 4] = ["simple-mzi", "cheshire", "nested-mzi", "appendix-a"];

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("validation error: {}", .0.join("; "))]
    Validation(Vec<String>),
    #[error("unknown builtin scenario `{0}` (expected one of simple-mzi, cheshire, nested-mzi, appendix-a)")]
    UnknownBuiltin(String),
    #[error("unknown observable `{name}` (available: {available})")]
    UnknownObservable { name: String, available: String },
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
    #[error(transparent)]
    Meter(#[from] MeterError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ScenarioError>;

/// A balanced 50/50 splitter between two input and two output arms.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeamsplitterSpec {
    pub inputs: [String; 2],
    pub outputs: [String; 2],
}

impl BeamsplitterSpec {
    pub fn new(inputs: [&str; 2], outputs: [&str; 2]) -> Self {
        BeamsplitterSpec {
            inputs: inputs.map(String::from),
            outputs: outputs.map(String::from),
        }
    }
}

/// Unitary of a balanced splitter under the fixed phase convention:
/// `in1 → (out1 + i·out2)/√2`, `in2 → (out2 + i·out1)/√2`, identity elsewhere.
///
/// When the output arms are distinct from the input arms, the output arms
/// are mapped back onto the inputs by the adjoint 2×2 block so the whole
/// operator is unitary. Those columns only matter if an output arm is already
/// populated when the splitter acts.
pub fn beamsplitter_unitary(spec: &BeamsplitterSpec, space: &Space) -> Result<Operator> {
    let idx = |l: &String| space.index_of(l).map_err(ScenarioError::from);
    let [i1, i2] = [idx(&spec.inputs[0])?, idx(&spec.inputs[1])?];
    let [o1, o2] = [idx(&spec.outputs[0])?, idx(&spec.outputs[1])?];
    if i1 == i2 || o1 == o2 {
        return Err(ScenarioError::Validation(vec![format!(
            "beamsplitter {:?} -> {:?} repeats an arm",
            spec.inputs, spec.outputs
        )]));
    }
    let same_arms = (o1 == i1 && o2 == i2) || (o1 == i2 && o2 == i1);
    let disjoint = ![o1, o2].contains(&i1) && ![o1, o2].contains(&i2);
    if !same_arms && !disjoint {
        return Err(ScenarioError::Validation(vec![format!(
            "beamsplitter {:?} -> {:?} partially overlaps its inputs and outputs",
            spec.inputs, spec.outputs
        )]));
    }

    let h = FRAC_1_SQRT_2;
    let n = space.dim();
    let mut rows = vec![vec![c(0.0, 0.0); n]; n];
    for (k, row) in rows.iter_mut().enumerate() {
        row[k] = c(1.0, 0.0);
    }
    for &k in &[i1, i2, o1, o2] {
        rows[k][k] = c(0.0, 0.0);
    }
    // Column i1: (out1 + i out2)/√2; column i2: (out2 + i out1)/√2.
    rows[o1][i1] = c(h, 0.0);
    rows[o2][i1] = c(0.0, h);
    rows[o2][i2] = c(h, 0.0);
    rows[o1][i2] = c(0.0, h);
    if disjoint {
        rows[i1][o1] = c(h, 0.0);
        rows[i2][o1] = c(0.0, -h);
        rows[i1][o2] = c(0.0, -h);
        rows[i2][o2] = c(h, 0.0);
    }
    Ok(Operator::from_rows(space.clone(), rows)?)
}

#[derive(Clone, Debug, PartialEq)]
pub enum StageSource {
    Matrix,
    Beamsplitter(BeamsplitterSpec),
}

/// One factor of the intermediate evolution `U_sys`.
#[derive(Clone, Debug, PartialEq)]
pub struct Stage {
    pub label: String,
    pub operator: Operator,
    pub source: StageSource,
}

impl Stage {
    pub fn beamsplitter(label: &str, spec: BeamsplitterSpec, space: &Space) -> Result<Self> {
        Ok(Stage {
            label: label.to_string(),
            operator: beamsplitter_unitary(&spec, space)?,
            source: StageSource::Beamsplitter(spec),
        })
    }

    pub fn matrix(label: &str, operator: Operator) -> Self {
        Stage {
            label: label.to_string(),
            operator,
            source: StageSource::Matrix,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ObservableSource {
    Matrix,
    Projector(StateVector),
}

/// A named Hermitian observable on the system space.
#[derive(Clone, Debug, PartialEq)]
pub struct Observable {
    pub name: String,
    pub operator: Operator,
    pub source: ObservableSource,
}

impl Observable {
    pub fn projector_onto(name: &str, target: StateVector) -> Result<Self> {
        Ok(Observable {
            name: name.to_string(),
            operator: projector(&target)?,
            source: ObservableSource::Projector(target),
        })
    }

    pub fn matrix(name: &str, operator: Operator) -> Self {
        Observable {
            name: name.to_string(),
            operator,
            source: ObservableSource::Matrix,
        }
    }
}

/// Full description of one weak-measurement experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub convention: String,
    pub space: Space,
    /// `|in⟩`, the state immediately before the meter coupling.
    pub preselected: StateVector,
    /// The observable `S` coupled to the meter.
    pub observable: Observable,
    /// Other observables that may be swapped in by name.
    pub alternatives: Vec<Observable>,
    /// Factors of `U_sys` in time order.
    pub stages: Vec<Stage>,
    /// `|f⟩`.
    pub postselected: StateVector,
    /// Non-detector arms used when checking for derailment.
    pub live_labels: Vec<BasisLabel>,
    pub meter: GaussianSpec,
}

impl Scenario {
    /// `U_sys = U_n ⋯ U_1` (identity when there are no stages).
    pub fn system_evolution(&self) -> Operator {
        self.stages
            .iter()
            .fold(Operator::identity(&self.space), |acc, st| {
                st.operator.compose(&acc).expect("stage on scenario space")
            })
    }

    /// `⟨f|U_sys|in⟩`.
    pub fn postselection_overlap(&self) -> Result<C64> {
        let evolved = apply(&self.system_evolution(), &self.preselected)?;
        Ok(inner(&self.postselected, &evolved)?)
    }

    pub fn observable_names(&self) -> Vec<&str> {
        std::iter::once(self.observable.name.as_str())
            .chain(self.alternatives.iter().map(|o| o.name.as_str()))
            .collect()
    }

    /// Makes the named observable (current or alternative) the coupled one.
    pub fn with_observable(&self, name: &str) -> Result<Scenario> {
        if self.observable.name == name {
            return Ok(self.clone());
        }
        let pos = self
            .alternatives
            .iter()
            .position(|o| o.name == name)
            .ok_or_else(|| ScenarioError::UnknownObservable {
                name: name.to_string(),
                available: self.observable_names().join(", "),
            })?;
        let mut out = self.clone();
        let chosen = out.alternatives.remove(pos);
        let previous = std::mem::replace(&mut out.observable, chosen);
        out.alternatives.insert(pos, previous);
        Ok(out)
    }

    /// Replaces the coupled observable, keeping the previous one as an alternative.
    pub fn with_custom_observable(&self, observable: Observable) -> Scenario {
        let mut out = self.clone();
        out.alternatives.retain(|o| o.name != observable.name);
        let previous = std::mem::replace(&mut out.observable, observable);
        if previous.name != out.observable.name {
            out.alternatives.push(previous);
        }
        out
    }

    pub fn with_postselected(&self, f: StateVector) -> Scenario {
        Scenario {
            postselected: f,
            ..self.clone()
        }
    }

    pub fn with_meter(&self, meter: GaussianSpec) -> Scenario {
        Scenario {
            meter,
            ..self.clone()
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let doc = scenario_to_json(self);
        hex::encode(Sha256::digest(doc.as_bytes()))
    }
}

/// One violated scenario invariant.
#[derive(Clone, Debug, PartialEq)]
pub enum Finding {
    PreselectedNotNormalized(f64),
    PostselectedNotNormalized(f64),
    ObservableNotHermitian(String),
    StageNotUnitary(String),
    SpaceMismatch(String),
    UnknownLiveLabel(String),
    VanishingPostselectionOverlap,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finding::PreselectedNotNormalized(n) => {
                write!(f, "preselected state not normalized (norm² = {n})")
            }
            Finding::PostselectedNotNormalized(n) => {
                write!(f, "postselected state not normalized (norm² = {n})")
            }
            Finding::ObservableNotHermitian(name) => {
                write!(f, "observable not Hermitian: {name}")
            }
            Finding::StageNotUnitary(label) => write!(f, "stage not unitary: {label}"),
            Finding::SpaceMismatch(what) => write!(f, "space mismatch: {what}"),
            Finding::UnknownLiveLabel(l) => write!(f, "unknown live label: {l}"),
            Finding::VanishingPostselectionOverlap => {
                f.write_str("vanishing postselection overlap")
            }
        }
    }
}

/// Re-checks every scenario invariant; an empty list means the scenario is clean.
pub fn validate_scenario(s: &Scenario) -> Vec<Finding> {
    let mut findings = Vec::new();
    let spaces_ok = |sp: &Space| sp == &s.space;
    if !spaces_ok(s.preselected.space()) {
        findings.push(Finding::SpaceMismatch("preselected".into()));
    }
    if !spaces_ok(s.postselected.space()) {
        findings.push(Finding::SpaceMismatch("postselected".into()));
    }
    if !spaces_ok(s.observable.operator.space()) {
        findings.push(Finding::SpaceMismatch(format!(
            "observable {}",
            s.observable.name
        )));
    }
    for st in &s.stages {
        if !spaces_ok(st.operator.space()) {
            findings.push(Finding::SpaceMismatch(format!("stage {}", st.label)));
        }
    }
    if !findings.is_empty() {
        return findings;
    }

    if !s.preselected.is_normalized() {
        findings.push(Finding::PreselectedNotNormalized(
            s.preselected.norm_squared(),
        ));
    }
    if !s.postselected.is_normalized() {
        findings.push(Finding::PostselectedNotNormalized(
            s.postselected.norm_squared(),
        ));
    }
    for o in std::iter::once(&s.observable).chain(&s.alternatives) {
        if !o.operator.is_hermitian() {
            findings.push(Finding::ObservableNotHermitian(o.name.clone()));
        }
    }
    for st in &s.stages {
        if !check_unitary(&st.operator) {
            findings.push(Finding::StageNotUnitary(st.label.clone()));
        }
    }
    for l in &s.live_labels {
        if !s.space.contains(l.as_str()) {
            findings.push(Finding::UnknownLiveLabel(l.to_string()));
        }
    }
    match s.postselection_overlap() {
        Ok(z) if z.norm() >= OVERLAP_TOL => {}
        _ => findings.push(Finding::VanishingPostselectionOverlap),
    }
    findings
}

fn labels(space: &Space) -> Vec<BasisLabel> {
    space.labels().to_vec()
}

fn basis(space: &Space, label: &str) -> StateVector {
    StateVector::basis(space, label).expect("builtin label")
}

/// A balanced Mach–Zehnder interferometer probed in arm L.
///
/// `|in⟩ = (|L⟩ + i|R⟩)/√2`, `S = Π_L`, one stage BS2 onto the primed arms,
/// postselection on the bright port `|R′⟩`.
pub fn build_simple_mzi() -> Scenario {
    let space = Space::new(["L", "R", "L'", "R'"]).expect("distinct labels");
    let h = FRAC_1_SQRT_2;
    let preselected =
        StateVector::from_terms(&space, [("L", c(h, 0.0)), ("R", c(0.0, h))]).expect("labels");
    let bs2 = Stage::beamsplitter(
        "BS2",
        BeamsplitterSpec::new(["L", "R"], ["L'", "R'"]),
        &space,
    )
    .expect("labels");
    Scenario {
        name: "simple-mzi".into(),
        convention: CONVENTION.into(),
        observable: Observable::projector_onto("Pi_L", basis(&space, "L")).expect("nonzero"),
        alternatives: vec![Observable::projector_onto("Pi_R", basis(&space, "R")).expect("nonzero")],
        stages: vec![bs2],
        postselected: basis(&space, "R'"),
        live_labels: labels(&space),
        meter: GaussianSpec::default(),
        preselected,
        space,
    }
}

/// σ_z on {H, V} with `|±⟩ = (|V⟩ ± i|H⟩)/√2` as its ±1 eigenvectors.
pub fn sigma_z(polarization: &Space) -> Result<Operator> {
    let h = polarization.index_of("H")?;
    let v = polarization.index_of("V")?;
    let n = polarization.dim();
    let mut rows = vec![vec![c(0.0, 0.0); n]; n];
    // −i(|V⟩⟨H| − |H⟩⟨V|)
    rows[v][h] = c(0.0, -1.0);
    rows[h][v] = c(0.0, 1.0);
    Ok(Operator::from_rows(polarization.clone(), rows)?)
}

/// The polarized interferometer of the "Cheshire cat" argument.
///
/// Path `{L, R, L′, R′}` ⊗ polarization `{H, V}`, `|in⟩ = (|R⟩|V⟩ + |L⟩|H⟩)/√2`,
/// a polarization-insensitive BS2, postselection on `|L′⟩|H⟩`. Observables:
/// `Pi_L`, `Pi_R`, `sigma_z_L`, `sigma_z_R` (coupled: `Pi_L`).
pub fn build_cheshire() -> Scenario {
    let path = Space::new(["L", "R", "L'", "R'"]).expect("distinct labels");
    let pol = Space::new(["H", "V"]).expect("distinct labels");
    let space = path.tensor(&pol);
    let h = FRAC_1_SQRT_2;

    let ket = |p: &str, q: &str| basis(&path, p).tensor(&basis(&pol, q));
    let preselected = ket("R", "V")
        .scale(c(h, 0.0))
        .add(&ket("L", "H").scale(c(h, 0.0)))
        .expect("same space");

    let bs2_path = beamsplitter_unitary(&BeamsplitterSpec::new(["L", "R"], ["L'", "R'"]), &path)
        .expect("labels");
    let bs2 = Stage::matrix("BS2", bs2_path.tensor(&Operator::identity(&pol)));

    let pi = |arm: &str| projector(&basis(&path, arm)).expect("nonzero");
    let sz = sigma_z(&pol).expect("H,V present");
    let id_pol = Operator::identity(&pol);
    let observables = vec![
        Observable::matrix("Pi_L", pi("L").tensor(&id_pol)),
        Observable::matrix("Pi_R", pi("R").tensor(&id_pol)),
        Observable::matrix("sigma_z_L", pi("L").tensor(&sz)),
        Observable::matrix("sigma_z_R", pi("R").tensor(&sz)),
    ];
    let mut observables = observables.into_iter();
    Scenario {
        name: "cheshire".into(),
        convention: CONVENTION.into(),
        observable: observables.next().expect("four observables"),
        alternatives: observables.collect(),
        stages: vec![bs2],
        postselected: ket("L'", "H"),
        live_labels: labels(&space),
        meter: GaussianSpec::default(),
        preselected,
        space,
    }
}

/// Nested interferometers with the probe in arm B.
///
/// `|in⟩ = (i√2|A⟩ + i|B⟩ + |C⟩)/2`, `S = Π_B`, stages BS3 (B, C → D3, E)
/// then BS4 (A, E → D2, D1), postselection on `|D2⟩`. The D3 detector arm is
/// excluded from the live subspace.
pub fn build_nested_mzi() -> Scenario {
    let space = Space::new(["A", "B", "C", "E", "D1", "D2", "D3"]).expect("distinct labels");
    let preselected = StateVector::from_terms(
        &space,
        [
            ("A", c(0.0, FRAC_1_SQRT_2)),
            ("B", c(0.0, 0.5)),
            ("C", c(0.5, 0.0)),
        ],
    )
    .expect("labels");
    let bs3 = Stage::beamsplitter(
        "BS3",
        BeamsplitterSpec::new(["B", "C"], ["D3", "E"]),
        &space,
    )
    .expect("labels");
    let bs4 = Stage::beamsplitter(
        "BS4",
        BeamsplitterSpec::new(["A", "E"], ["D2", "D1"]),
        &space,
    )
    .expect("labels");
    let pi = |arm: &str| {
        Observable::projector_onto(&format!("Pi_{arm}"), basis(&space, arm)).expect("nonzero")
    };
    Scenario {
        name: "nested-mzi".into(),
        convention: CONVENTION.into(),
        observable: pi("B"),
        alternatives: vec![pi("A"), pi("C"), pi("E")],
        stages: vec![bs3, bs4],
        postselected: basis(&space, "D2"),
        live_labels: space
            .labels()
            .iter()
            .filter(|l| l.as_str() != "D3")
            .cloned()
            .collect(),
        meter: GaussianSpec::default(),
        preselected,
        space,
    }
}

/// Null projection: `|in⟩ = (|a⟩ + |b⟩)/√2`, `S = Π_d` with `|d⟩ ⊥ |a⟩, |b⟩`,
/// no stages, postselection on `|a⟩`.
pub fn build_appendix_a() -> Scenario {
    let space = Space::new(["a", "b", "d"]).expect("distinct labels");
    let h = FRAC_1_SQRT_2;
    let preselected =
        StateVector::from_terms(&space, [("a", c(h, 0.0)), ("b", c(h, 0.0))]).expect("labels");
    Scenario {
        name: "appendix-a".into(),
        convention: CONVENTION.into(),
        observable: Observable::projector_onto("Pi_d", basis(&space, "d")).expect("nonzero"),
        alternatives: vec![Observable::projector_onto("Pi_a", basis(&space, "a")).expect("nonzero")],
        stages: Vec::new(),
        postselected: basis(&space, "a"),
        live_labels: labels(&space),
        meter: GaussianSpec::default(),
        preselected,
        space,
    }
}

pub fn builtin(name: &str) -> Result<Scenario> {
    match name {
        "simple-mzi" => Ok(build_simple_mzi()),
        "cheshire" => Ok(build_cheshire()),
        "nested-mzi" => Ok(build_nested_mzi()),
        "appendix-a" => Ok(build_appendix_a()),
        other => Err(ScenarioError::UnknownBuiltin(other.to_string())),
    }
}

pub fn all_builtins() -> Vec<Scenario> {
    BUILTIN_NAMES
        .iter()
        .map(|n| builtin(n).expect("builtin"))
        .collect()
}

// ---------------------------------------------------------------------------
// File format

type Amplitudes = BTreeMap<String, [f64; 2]>;
type Rows = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    convention: Option<String>,
    basis: Vec<String>,
    preselected: Amplitudes,
    observable: ObservableDoc,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    observables: BTreeMap<String, ObservableDoc>,
    #[serde(default)]
    stages: Vec<StageDoc>,
    postselected: Amplitudes,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    live_labels: Option<Vec<String>>,
    meter: MeterDoc,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObservableDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    projector_onto: Option<Amplitudes>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    matrix: Option<Rows>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StageDoc {
    label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    matrix: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beamsplitter: Option<BeamsplitterSpec>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeterDoc {
    delta: f64,
}

fn state_to_doc(v: &StateVector) -> Amplitudes {
    v.space()
        .labels()
        .iter()
        .zip(v.amplitudes())
        .filter(|(_, z)| z.re != 0.0 || z.im != 0.0)
        .map(|(l, z)| (l.to_string(), [z.re, z.im]))
        .collect()
}

fn rows_to_doc(op: &Operator) -> Rows {
    op.rows()
        .into_iter()
        .map(|r| r.into_iter().map(|z| [z.re, z.im]).collect())
        .collect()
}

fn observable_to_doc(o: &Observable, with_name: bool) -> ObservableDoc {
    let name = with_name.then(|| o.name.clone());
    match &o.source {
        ObservableSource::Projector(t) => ObservableDoc {
            name,
            projector_onto: Some(state_to_doc(t)),
            matrix: None,
        },
        ObservableSource::Matrix => ObservableDoc {
            name,
            projector_onto: None,
            matrix: Some(rows_to_doc(&o.operator)),
        },
    }
}

/// Pretty-printed JSON document for a scenario.
pub fn scenario_to_json(s: &Scenario) -> String {
    let all_live = s.live_labels.as_slice() == s.space.labels();
    let doc = ScenarioDoc {
        name: Some(s.name.clone()),
        convention: Some(s.convention.clone()),
        basis: s.space.labels().iter().map(|l| l.to_string()).collect(),
        preselected: state_to_doc(&s.preselected),
        observable: observable_to_doc(&s.observable, true),
        observables: s
            .alternatives
            .iter()
            .map(|o| (o.name.clone(), observable_to_doc(o, false)))
            .collect(),
        stages: s
            .stages
            .iter()
            .map(|st| match &st.source {
                StageSource::Beamsplitter(bs) => StageDoc {
                    label: st.label.clone(),
                    matrix: None,
                    beamsplitter: Some(bs.clone()),
                },
                StageSource::Matrix => StageDoc {
                    label: st.label.clone(),
                    matrix: Some(rows_to_doc(&st.operator)),
                    beamsplitter: None,
                },
            })
            .collect(),
        postselected: state_to_doc(&s.postselected),
        live_labels: (!all_live).then(|| s.live_labels.iter().map(|l| l.to_string()).collect()),
        meter: MeterDoc {
            delta: s.meter.delta(),
        },
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("serializable");
    out.push('\n');
    out
}

fn state_from_doc(
    what: &str,
    doc: &Amplitudes,
    space: &Space,
    warnings: &mut Vec<String>,
) -> Result<StateVector> {
    let mut v = StateVector::zeros(space);
    for (label, [re, im]) in doc {
        if !space.contains(label) {
            return Err(ScenarioError::Validation(vec![format!(
                "{what}: unknown label `{label}`"
            )]));
        }
        v = v.add(&StateVector::basis(space, label)?.scale(c(*re, *im)))?;
    }
    let n2 = v.norm_squared();
    if n2 == 0.0 {
        return Err(ScenarioError::Validation(vec![format!(
            "{what}: zero state"
        )]));
    }
    if (n2.sqrt() - 1.0).abs() > NORMALIZATION_WARN_TOL {
        warnings.push(format!("{what}: norm {} renormalized to 1", n2.sqrt()));
    }
    if (n2 - 1.0).abs() > NORM_TOL {
        v = v.normalized()?;
    }
    Ok(v)
}

fn operator_from_rows(what: &str, rows: &Rows, space: &Space) -> Result<Operator> {
    let rows = rows
        .iter()
        .map(|r| r.iter().map(|[re, im]| c(*re, *im)).collect())
        .collect();
    Operator::from_rows(space.clone(), rows)
        .map_err(|e| ScenarioError::Validation(vec![format!("{what}: {e}")]))
}

fn observable_from_doc(name: &str, doc: &ObservableDoc, space: &Space) -> Result<Observable> {
    let obs = match (&doc.projector_onto, &doc.matrix) {
        // Projector targets need not be normalized; the raw vector is kept.
        (Some(target), None) => {
            let mut raw = StateVector::zeros(space);
            for (label, [re, im]) in target {
                if !space.contains(label) {
                    return Err(ScenarioError::Validation(vec![format!(
                        "observable {name}: unknown label `{label}`"
                    )]));
                }
                raw = raw.add(&StateVector::basis(space, label)?.scale(c(*re, *im)))?;
            }
            Observable::projector_onto(name, raw).map_err(|_| {
                ScenarioError::Validation(vec![format!("observable {name}: zero projector target")])
            })?
        }
        (None, Some(rows)) => Observable::matrix(
            name,
            operator_from_rows(&format!("observable {name}"), rows, space)?,
        ),
        _ => {
            return Err(ScenarioError::Schema(format!(
                "observable {name}: exactly one of `projector_onto` or `matrix` is required"
            )))
        }
    };
    if !obs.operator.is_hermitian() {
        return Err(ScenarioError::Validation(vec![format!(
            "observable not Hermitian: {name}"
        )]));
    }
    Ok(obs)
}

/// Parses and validates a scenario document, returning any normalization warnings.
pub fn load_scenario_with_warnings(document: &str) -> Result<(Scenario, Vec<String>)> {
    let doc: ScenarioDoc =
        serde_json::from_str(document).map_err(|e| ScenarioError::Schema(e.to_string()))?;
    let mut warnings = Vec::new();
    let space = Space::new(doc.basis.iter().map(String::as_str))
        .map_err(|e| ScenarioError::Validation(vec![e.to_string()]))?;
    let meter = GaussianSpec::new(doc.meter.delta)
        .map_err(|e| ScenarioError::Validation(vec![e.to_string()]))?;

    let preselected = state_from_doc("preselected", &doc.preselected, &space, &mut warnings)?;
    let postselected = state_from_doc("postselected", &doc.postselected, &space, &mut warnings)?;

    let primary_name = doc
        .observable
        .name
        .clone()
        .unwrap_or_else(|| "S".to_string());
    let observable = observable_from_doc(&primary_name, &doc.observable, &space)?;
    let alternatives = doc
        .observables
        .iter()
        .filter(|(n, _)| **n != primary_name)
        .map(|(n, o)| observable_from_doc(n, o, &space))
        .collect::<Result<Vec<_>>>()?;

    let mut stages = Vec::with_capacity(doc.stages.len());
    for st in &doc.stages {
        let stage = match (&st.matrix, &st.beamsplitter) {
            (Some(rows), None) => Stage::matrix(
                &st.label,
                operator_from_rows(&format!("stage {}", st.label), rows, &space)?,
            ),
            (None, Some(bs)) => Stage::beamsplitter(&st.label, bs.clone(), &space)
                .map_err(|e| ScenarioError::Validation(vec![format!("stage {}: {e}", st.label)]))?,
            _ => {
                return Err(ScenarioError::Schema(format!(
                    "stage {}: exactly one of `matrix` or `beamsplitter` is required",
                    st.label
                )))
            }
        };
        if !check_unitary(&stage.operator) {
            return Err(ScenarioError::Validation(vec![format!(
                "stage not unitary: {}",
                st.label
            )]));
        }
        stages.push(stage);
    }

    let live_labels = match &doc.live_labels {
        None => labels(&space),
        Some(ls) => {
            let unknown: Vec<String> = ls
                .iter()
                .filter(|l| !space.contains(l))
                .map(|l| format!("unknown live label: {l}"))
                .collect();
            if !unknown.is_empty() {
                return Err(ScenarioError::Validation(unknown));
            }
            ls.iter().map(|l| BasisLabel::new(l.as_str())).collect()
        }
    };

    let scenario = Scenario {
        name: doc.name.unwrap_or_else(|| "custom".to_string()),
        convention: doc.convention.unwrap_or_else(|| CONVENTION.to_string()),
        space,
        preselected,
        observable,
        alternatives,
        stages,
        postselected,
        live_labels,
        meter,
    };
    Ok((scenario, warnings))
}

pub fn load_scenario(document: &str) -> Result<Scenario> {
    load_scenario_with_warnings(document).map(|(s, _)| s)
}

pub fn load_scenario_file(path: &std::path::Path) -> Result<(Scenario, Vec<String>)> {
    load_scenario_with_warnings(&std::fs::read_to_string(path)?)
}
