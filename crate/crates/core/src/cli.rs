//! Batch command-line front end.
//!
//! Human-readable summaries go to standard output; JSON reports and CSV
//! tables go to `--out` when given. Exit codes: 0 success, 1 usage,
//! 2 scenario invalid, 3 undefined weak value or zero postselection.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::{classify, BehaviorClass, DiagnosticsReport, CLASSIFY_TOL};
use crate::error::Error;
use crate::hilbert::C64;
use crate::protocol::{
    delta_sweep_weak_value, monte_carlo_weak_value, operational_weak_value, GSchedule, LimitRoute,
    WeakValueEstimate,
};
use crate::report::{
    to_json, DiagnoseReport, RunReport, SampleReport, ScenarioInfo, SweepReport, ToolInfo,
};
use crate::scenarios::{
    builtin, load_scenario_file, scenario_to_json, validate_scenario, Finding, Scenario,
    ScenarioError,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_UNDEFINED: i32 = 3;

/// Coupling used by the Δ-sweep when `--g` is not given.
pub const DEFAULT_SWEEP_G: f64 = 0.05;

#[derive(Debug, Parser)]
#[command(
    name = "weakval",
    version,
    about = "Weak-measurement simulator for finite-dimensional systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Analytic and operational weak value with diagnostics.
    Run(RunArgs),
    /// Pointer-mean table over a g schedule or a list of meter widths.
    Sweep(SweepArgs),
    /// Continuity diagnostics and the derailment trace.
    Diagnose(DiagnoseArgs),
    /// Monte Carlo estimate from simulated pointer readouts.
    Sample(SampleArgs),
    /// Write a scenario as a JSON document.
    Export(ExportArgs),
}

#[derive(Debug, Args)]
#[group(id = "source", required = true, multiple = false)]
struct SourceArgs {
    /// Built-in scenario: simple-mzi, cheshire, nested-mzi, appendix-a.
    #[arg(long, value_name = "NAME", group = "source")]
    builtin: Option<String>,
    /// Path to a JSON scenario document.
    #[arg(long, value_name = "PATH", group = "source")]
    scenario: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Select one of the scenario's named observables.
    #[arg(long, value_name = "NAME")]
    observable: Option<String>,
}

#[derive(Debug, Args)]
struct ScheduleArgs {
    /// Largest coupling of the schedule [default: 0.1 Δ].
    #[arg(long, value_name = "F")]
    g_max: Option<f64>,
    /// Geometric ratio between successive couplings.
    #[arg(long, value_name = "F", default_value_t = 0.5)]
    ratio: f64,
    /// Number of schedule points.
    #[arg(long, value_name = "N", default_value_t = 8)]
    count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Write the report or table here.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Data format for --out, or for standard output when --out is absent.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    schedule: ScheduleArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    schedule: ScheduleArgs,
    /// Sweep the meter width instead of g (comma separated, increasing).
    #[arg(long, value_name = "F,F,...", value_delimiter = ',', num_args = 1..)]
    delta_list: Option<Vec<f64>>,
    /// Fixed coupling for a width sweep.
    #[arg(long, value_name = "F")]
    g: Option<f64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct DiagnoseArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Coupling strength (> 0).
    #[arg(long, value_name = "F")]
    g: f64,
    /// Number of simulated trials.
    #[arg(long, value_name = "N", default_value_t = 100_000)]
    runs: usize,
    #[arg(long, value_name = "N", default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct ExportArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn invalid(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INVALID,
            message: message.into(),
        }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::UnknownBuiltin(_) | ScenarioError::UnknownObservable { .. } => {
                Failure::usage(e.to_string())
            }
            ScenarioError::Validation(findings) => Failure::invalid(format!(
                "scenario invalid:\n{}",
                findings
                    .iter()
                    .map(|f| format!("  - {f}"))
                    .collect::<Vec<_>>()
                    .join("\n")
            )),
            other => Failure::invalid(other.to_string()),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::UndefinedWeakValue { .. } | Error::ZeroPostselection { .. } => EXIT_UNDEFINED,
            Error::BadArgument(_) | Error::Extrapolation(_) => EXIT_USAGE,
            Error::Scenario(_) => {
                return match e {
                    Error::Scenario(inner) => inner.into(),
                    _ => unreachable!(),
                }
            }
            _ => EXIT_INVALID,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Runs the command line `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<String>,
{
    let args: Vec<String> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(stdout, "{text}");
                EXIT_OK
            };
        }
    };
    let mut command = vec![env!("CARGO_PKG_NAME").to_string()];
    command.extend(args.into_iter().skip(1));

    let mut ctx = Context {
        command,
        stdout,
        stderr,
    };
    let result = match cli.command {
        Command::Run(a) => ctx.run(a),
        Command::Sweep(a) => ctx.sweep(a),
        Command::Diagnose(a) => ctx.diagnose(a),
        Command::Sample(a) => ctx.sample(a),
        Command::Export(a) => ctx.export(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(ctx.stderr, "error: {}", f.message);
            f.code
        }
    }
}

struct Context<'a> {
    command: Vec<String>,
    stdout: &'a mut dyn Write,
    stderr: &'a mut dyn Write,
}

impl Context<'_> {
    fn load(&mut self, args: &ScenarioArgs) -> CliResult<Scenario> {
        let mut scenario = match (&args.source.builtin, &args.source.scenario) {
            (Some(name), None) => builtin(name)?,
            (None, Some(path)) => {
                let (s, warnings) = load_scenario_file(path)?;
                for w in warnings {
                    let _ = writeln!(self.stderr, "warning: {w}");
                }
                s
            }
            _ => {
                return Err(Failure::usage(
                    "exactly one of --builtin or --scenario is required",
                ))
            }
        };
        if let Some(name) = &args.observable {
            scenario = scenario.with_observable(name)?;
        }
        let findings: Vec<String> = validate_scenario(&scenario)
            .into_iter()
            .filter(|f| *f != Finding::VanishingPostselectionOverlap)
            .map(|f| f.to_string())
            .collect();
        if !findings.is_empty() {
            return Err(ScenarioError::Validation(findings).into());
        }
        Ok(scenario)
    }

    fn say(&mut self, line: impl AsRef<str>) -> CliResult<()> {
        writeln!(self.stdout, "{}", line.as_ref()).map_err(|e| Failure::usage(e.to_string()))
    }

    /// Writes `data` to `--out` if given, otherwise to standard output.
    fn emit(&mut self, out: &Option<PathBuf>, data: &str) -> CliResult<()> {
        match out {
            Some(path) => std::fs::write(path, data)
                .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display()))),
            None => self
                .stdout
                .write_all(data.as_bytes())
                .map_err(|e| Failure::usage(e.to_string())),
        }
    }

    fn schedule(s: &Scenario, a: &ScheduleArgs) -> CliResult<GSchedule> {
        let default = GSchedule::default_for(s.meter);
        Ok(GSchedule::new(
            a.g_max.unwrap_or(default.g_max),
            a.ratio,
            a.count,
        )?)
    }

    fn run(&mut self, a: RunArgs) -> CliResult<()> {
        let s = self.load(&a.scenario)?;
        let diagnostics = classify(&s, CLASSIFY_TOL)?;
        let schedule = Self::schedule(&s, &a.schedule)?;
        let operational = operational_weak_value(&s, &schedule)?;

        let report = RunReport {
            tool: ToolInfo::current(),
            command: self.command.clone(),
            scenario: ScenarioInfo::of(&s),
            analytic_weak_value: diagnostics.analytic_weak_value,
            postselection_probabilities: operational.postselection_probabilities(),
            operational,
            diagnostics,
        };
        let data = match a.output.format {
            Some(Format::Csv) => sweep_csv(&report.operational),
            _ => to_json(&report),
        };
        if a.output.out.is_none() && a.output.format.is_some() {
            return self.emit(&None, &data);
        }
        self.say(format!(
            "scenario {}, observable {}",
            s.name, s.observable.name
        ))?;
        self.say(run_summary(&report))?;
        for note in &report.diagnostics.notes {
            self.say(format!("note: {note}"))?;
        }
        if a.output.out.is_some() {
            self.emit(&a.output.out, &data)?;
        }
        Ok(())
    }

    fn sweep(&mut self, a: SweepArgs) -> CliResult<()> {
        let s = self.load(&a.scenario)?;
        let estimate = match &a.delta_list {
            Some(deltas) => delta_sweep_weak_value(&s, a.g.unwrap_or(DEFAULT_SWEEP_G), deltas)?,
            None => {
                if a.g.is_some() {
                    return Err(Failure::usage(
                        "--g only applies together with --delta-list",
                    ));
                }
                operational_weak_value(&s, &Self::schedule(&s, &a.schedule)?)?
            }
        };
        let data = match a.output.format {
            Some(Format::Json) => to_json(&SweepReport {
                tool: ToolInfo::current(),
                command: self.command.clone(),
                scenario: ScenarioInfo::of(&s),
                estimate: estimate.clone(),
            }),
            _ => sweep_csv(&estimate),
        };
        self.emit(&a.output.out, &data)?;
        if a.output.out.is_some() {
            self.say(format!(
                "extrapolated {} ± {:.1e} from {} points",
                fmt_real(estimate.value, 9),
                estimate.residual,
                estimate.points.len()
            ))?;
        }
        Ok(())
    }

    fn diagnose(&mut self, a: DiagnoseArgs) -> CliResult<()> {
        let s = self.load(&a.scenario)?;
        let diagnostics = classify(&s, CLASSIFY_TOL)?;
        let report = DiagnoseReport {
            tool: ToolInfo::current(),
            command: self.command.clone(),
            scenario: ScenarioInfo::of(&s),
            diagnostics,
        };
        if a.output.format == Some(Format::Csv) {
            return Err(Failure::usage("diagnose supports --format json only"));
        }
        if a.output.out.is_none() && a.output.format.is_some() {
            return self.emit(&None, &to_json(&report));
        }
        self.say(format!(
            "scenario {}, observable {}",
            s.name, s.observable.name
        ))?;
        for line in diagnose_text(&report.diagnostics) {
            self.say(line)?;
        }
        if a.output.out.is_some() {
            self.emit(&a.output.out, &to_json(&report))?;
        }
        Ok(())
    }

    fn sample(&mut self, a: SampleArgs) -> CliResult<()> {
        let s = self.load(&a.scenario)?;
        if a.runs == 0 {
            return Err(Failure::usage("--runs must be at least 1"));
        }
        if a.output.format == Some(Format::Csv) {
            return Err(Failure::usage("sample supports --format json only"));
        }
        let mc = monte_carlo_weak_value(&s, a.g, a.runs, a.seed)?;
        let report = SampleReport {
            tool: ToolInfo::current(),
            command: self.command.clone(),
            scenario: ScenarioInfo::of(&s),
            seed: a.seed,
            monte_carlo: mc,
        };
        if a.output.out.is_none() && a.output.format.is_some() {
            return self.emit(&None, &to_json(&report));
        }
        let mc = &report.monte_carlo;
        self.say(format!(
            "scenario {}, observable {}",
            s.name, s.observable.name
        ))?;
        self.say(format!(
            "estimate {} ± {}, accepted {} of {}, exact {} at g = {}, seed {}",
            fmt_real(mc.estimate, 6),
            fmt_real(mc.stderr, 6),
            mc.accepted,
            mc.n_runs,
            fmt_real(mc.exact_mean_over_g, 9),
            mc.g,
            mc.seed
        ))?;
        if a.output.out.is_some() {
            self.emit(&a.output.out, &to_json(&report))?;
        }
        Ok(())
    }

    fn export(&mut self, a: ExportArgs) -> CliResult<()> {
        let s = self.load(&a.scenario)?;
        self.emit(&a.out, &scenario_to_json(&s))
    }
}

/// `x` rounded to `decimals` places, without trailing zeros or a negative zero.
pub fn fmt_real(x: f64, decimals: usize) -> String {
    let s = format!("{x:.decimals$}");
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    };
    if s == "-0" {
        "0".to_string()
    } else {
        s
    }
}

/// Complex number in `a+bi` form, dropping a vanishing part.
pub fn fmt_complex(z: C64, decimals: usize) -> String {
    let re = fmt_real(z.re, decimals);
    let im = fmt_real(z.im, decimals);
    match (re.as_str(), im.as_str()) {
        (_, "0") => re,
        ("0", _) => format!("{im}i"),
        _ if im.starts_with('-') => format!("{re}{im}i"),
        _ => format!("{re}+{im}i"),
    }
}

/// `analytic W, operational V ± R, Class`.
pub fn run_summary(report: &RunReport) -> String {
    let analytic = report
        .analytic_weak_value
        .map(|w| fmt_complex(w, 12))
        .unwrap_or_else(|| "undefined".to_string());
    format!(
        "analytic {}, operational {} ± {:.1e}, {}",
        analytic,
        fmt_real(report.operational.value, 9),
        report.operational.residual,
        report.diagnostics.behavior
    )
}

/// One CSV row per sweep point, then the extrapolant as a `#` comment.
pub fn sweep_csv(estimate: &WeakValueEstimate) -> String {
    let (key, limit) = match estimate.route {
        LimitRoute::CouplingToZero => ("g", "g -> 0"),
        LimitRoute::WidthToInfinity => ("delta", "delta -> inf"),
    };
    let mut out = format!("{key},pointer_mean,pointer_mean_over_g,postselection_probability\n");
    for p in &estimate.points {
        let x = match estimate.route {
            LimitRoute::CouplingToZero => p.g,
            LimitRoute::WidthToInfinity => p.delta,
        };
        out.push_str(&format!(
            "{x:?},{:?},{:?},{:?}\n",
            p.pointer_mean, p.pointer_mean_over_g, p.postselection_probability
        ));
    }
    out.push_str(&format!(
        "# extrapolated {limit}: {:?} residual {:?} levels {}\n",
        estimate.value, estimate.residual, estimate.levels
    ));
    out
}

fn diagnose_text(d: &DiagnosticsReport) -> Vec<String> {
    let mut lines = vec![
        format!("<in|S|in>    = {}", fmt_complex(d.s_expectation, 12)),
        format!("||S|in>||    = {}", fmt_real(d.source_norm, 12)),
        format!(
            "<f|U_sys|in> = {}",
            fmt_complex(d.postselection_overlap, 12)
        ),
        format!(
            "weak value   = {}",
            d.analytic_weak_value
                .map(|w| fmt_complex(w, 12))
                .unwrap_or_else(|| "undefined".to_string())
        ),
        "trace:".to_string(),
        format!("  {:<16} {:<24} {}", "stage", "full", "live"),
    ];
    for (i, p) in d.trace.points.iter().enumerate() {
        let stage = if i == 0 {
            p.stage.clone()
        } else {
            format!("after {}", p.stage)
        };
        lines.push(format!(
            "  {:<16} {:<24} {}",
            stage,
            fmt_complex(p.full_overlap, 12),
            fmt_complex(p.live_overlap, 12)
        ));
    }
    lines.push(format!("class {}", d.behavior));
    if d.behavior == BehaviorClass::NullProjection || !d.notes.is_empty() {
        lines.extend(d.notes.iter().map(|n| format!("note: {n}")));
    }
    lines
}
