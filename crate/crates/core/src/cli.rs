//! Command-line front end. [`run`] parses arguments, dispatches, and returns
//! the exit code together with what should be printed; the binary only
//! forwards that to the process.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails, 2 on input
//! errors (unknown command, unreadable or malformed files, bad flags,
//! dimension mismatches).

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use nalgebra::Complex;
use serde_json::{Map, Value};

use crate::biext_metric::PeriodModel;
use crate::error::Error;
use crate::heightjump::{jump_is_effective, lear_divisor, pullback_orders, TestCurve};
use crate::io::{FileError, InstanceFile};
use crate::normlike::NormlikeInstance;
use crate::random::{default_seed, parse_seed, random_file, GenOptions};
use crate::report::{digest, number, Check, Report};
use crate::suite::{instance_checks, metric_checks, random_instances, random_models, SuiteConfig};

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_FINE_TOL: f64 = 1e-10;
pub const DEFAULT_SLOPE_TOL: f64 = 0.2;

#[derive(Debug, Parser)]
#[command(
    name = "normlike",
    version,
    about = "Normlike functions, recession functions and height jumps"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct Common {
    /// Print the report as JSON on stdout (human text goes to stderr).
    #[arg(long, global = true)]
    json: bool,
    /// Property tolerance (default 1e-9).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Slope-fit tolerance (default 0.2).
    #[arg(long, global = true)]
    slope_tol: Option<f64>,
    /// Hexadecimal seed; overrides NORMLIKE_SEED.
    #[arg(long, global = true)]
    seed: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check that P(x, lambda) is positive definite on the probe domain.
    Validate {
        #[arg(long)]
        instance: PathBuf,
    },
    /// phi, phi0 and f at a point.
    Eval {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        x: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        lambda: usize,
    },
    /// Recession function, its extension, and the axis slopes mu.
    Recession {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        x: Vec<f64>,
    },
    /// Height jump of a test curve with multiplicities m.
    Jump {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        m: Vec<u64>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        nu: Vec<f64>,
    },
    /// Lear divisor coefficients a_i = mu_i + nu_i.
    Lear {
        #[arg(long)]
        instance: Option<PathBuf>,
        /// Slopes mu, when no instance is given.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        mu: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        nu: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        labels: Vec<String>,
    },
    /// -log||s|| of a period model at |q_j| = exp(-x_j).
    Metric {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        x: Vec<f64>,
        /// Non-degenerating coordinates t (real).
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        t: Vec<f64>,
    },
    /// Invariant suite over an instance, or over random instances.
    CheckSuite {
        #[arg(long)]
        instance: Option<PathBuf>,
        /// Number of random instances (and period models) without --instance.
        #[arg(long, default_value_t = 50)]
        samples: usize,
        #[arg(long, default_value_t = 1e6)]
        t_max: f64,
        /// Random probes per instance and check.
        #[arg(long, default_value_t = 50)]
        probes: usize,
    },
    /// Write a random instance file.
    Gen {
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        g: Option<usize>,
        /// Number of parameter samples.
        #[arg(long)]
        samples: Option<usize>,
        /// Position in the random stream of the seed.
        #[arg(long, default_value_t = 0)]
        index: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// What a run produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
    pub report: Option<Report>,
}

enum Failure {
    Input(String),
    /// A numerical failure inside a command, reported as a failed check.
    Numerical(Error),
}

impl From<FileError> for Failure {
    fn from(e: FileError) -> Self {
        match e {
            FileError::Model(e) => e.into(),
            e => Failure::Input(e.to_string()),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::PositivityViolation { .. }
            | Error::NumericallySingular { .. }
            | Error::SingularTrailingBlock
            | Error::SingularSchurComplement
            | Error::InconsistentSystem { .. }
            | Error::DivergenceRisk { .. }
            | Error::DegenerateImaginaryPart { .. }
            | Error::FlagConditionViolated { .. } => Failure::Numerical(e),
            e => Failure::Input(e.to_string()),
        }
    }
}

type Res<T> = std::result::Result<T, Failure>;

struct Loaded {
    file: InstanceFile,
    digest: String,
}

fn load(path: &Path) -> Res<Loaded> {
    let (file, bytes) = InstanceFile::read(path)?;
    Ok(Loaded {
        file,
        digest: digest(&bytes),
    })
}

struct Settings {
    tol: f64,
    slope_tol: f64,
}

fn settings(common: &Common, file: Option<&InstanceFile>) -> Settings {
    let from_file = file.and_then(InstanceFile::tolerances);
    Settings {
        tol: common.tol.or(from_file.and_then(|t| t.tol)).unwrap_or(DEFAULT_TOL),
        slope_tol: common
            .slope_tol
            .or(from_file.and_then(|t| t.slope_tol))
            .unwrap_or(DEFAULT_SLOPE_TOL),
    }
}

fn seed(common: &Common) -> Res<u64> {
    match &common.seed {
        Some(s) => parse_seed(s).ok_or_else(|| Failure::Input(format!("--seed: {s:?} is not a hexadecimal number"))),
        None => Ok(default_seed()),
    }
}

/// Runs the command line `args` (program name first).
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let echo = args
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join(" ");
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            let code = if e.use_stderr() { 2 } else { 0 };
            let (stdout, stderr) = if code == 0 {
                (text, String::new())
            } else {
                (String::new(), text)
            };
            return Outcome {
                code,
                stdout,
                stderr,
                report: None,
            };
        }
    };
    let common = cli.common;
    let start = Instant::now();
    let mut report = Report::new(echo);
    let result = dispatch(cli.command, &common, &mut report);
    report.wall_clock_ms = start.elapsed().as_secs_f64() * 1e3;
    match result {
        Ok(Some(raw)) => Outcome {
            code: 0,
            stdout: raw,
            stderr: String::new(),
            report: None,
        },
        Ok(None) => finish(report, &common),
        Err(Failure::Numerical(e)) => {
            report.check(Check::new("evaluation", false, f64::NAN, 0.0).with_note(e.to_string()));
            finish(report, &common)
        }
        Err(Failure::Input(msg)) => Outcome {
            code: 2,
            stdout: String::new(),
            stderr: format!("error: {msg}\n"),
            report: None,
        },
    }
}

fn finish(report: Report, common: &Common) -> Outcome {
    let code = if report.passed() { 0 } else { 1 };
    let (stdout, stderr) = if common.json {
        (report.to_json() + "\n", report.to_text())
    } else {
        (report.to_text(), String::new())
    };
    Outcome {
        code,
        stdout,
        stderr,
        report: Some(report),
    }
}

fn dispatch(command: Command, common: &Common, report: &mut Report) -> Res<Option<String>> {
    match command {
        Command::Validate { instance } => validate(&instance, common, report),
        Command::Eval { instance, x, lambda } => eval(&instance, &x, lambda, report),
        Command::Recession { instance, x } => recession(&instance, &x, report),
        Command::Jump { instance, m, nu } => jump(&instance, m, &nu, common, report),
        Command::Lear {
            instance,
            mu,
            nu,
            labels,
        } => lear(instance.as_deref(), mu, nu, &labels, report),
        Command::Metric { instance, x, t } => metric(&instance, &x, &t, common, report),
        Command::CheckSuite {
            instance,
            samples,
            t_max,
            probes,
        } => check_suite(instance.as_deref(), samples, t_max, probes, common, report),
        Command::Gen {
            k,
            g,
            samples,
            index,
            out,
        } => return gen(GenOptions { g, k, samples }, index, out.as_deref(), common, report),
    }
    .map(|()| None)
}

fn instance_of(path: &Path, report: &mut Report) -> Res<(Loaded, NormlikeInstance)> {
    let loaded = load(path)?;
    report.instance_digest = Some(loaded.digest.clone());
    let inst = loaded.file.to_instance()?;
    Ok((loaded, inst))
}

fn validate(path: &Path, _common: &Common, report: &mut Report) -> Res<()> {
    let (loaded, inst) = instance_of(path, report)?;
    let kind = match loaded.file {
        InstanceFile::Normlike(_) => "normlike",
        InstanceFile::PeriodModel(_) => "period_model",
    };
    report.value("kind", kind);
    report.value("g", inst.g());
    report.value("k", inst.k());
    report.value("samples", inst.samples().len());
    report.number("kappa", inst.kappa());
    report.value("recession_rank", inst.recession().rank());
    report.numbers("mu", inst.recession().mu());
    let d = inst.validate()?;
    report.value("probes", d.probes);
    match d.least_eigenvalue {
        Some(l) => {
            report.number("least_eigenvalue", l);
            report.numbers("witness_x", &d.witness_x);
            report.value("witness_lambda", d.witness_lambda);
            report.check(Check::new("normlike.positivity", l > 0.0, l, 0.0));
        }
        None => report.check(Check::new("normlike.positivity", true, 0.0, 0.0).with_note("g = 0")),
    }
    Ok(())
}

fn eval(path: &Path, x: &[f64], lambda: usize, report: &mut Report) -> Res<()> {
    let (_, inst) = instance_of(path, report)?;
    inst.sample(lambda)?;
    report.numbers("x", x);
    report.value("lambda", lambda);
    let phi = inst.eval_phi(x, lambda)?;
    report.number("phi", phi);
    if x.iter().all(|&v| v > 0.0) {
        report.number("phi0", inst.phi0(x, lambda)?);
        report.number("f", inst.recession().eval(x)?);
    } else {
        report.number("f_bar", inst.recession().eval_extended(x)?);
    }
    report.check(Check::new(
        "normlike.phi_nonnegative",
        phi >= -1e-12 * phi.abs().max(1.0),
        phi,
        0.0,
    ));
    Ok(())
}

fn recession(path: &Path, x: &[f64], report: &mut Report) -> Res<()> {
    let (_, inst) = instance_of(path, report)?;
    let f = inst.recession();
    report.value("rank", f.rank());
    report.numbers("mu", f.mu());
    if !x.is_empty() {
        report.numbers("x", x);
        if x.iter().all(|&v| v > 0.0) {
            report.number("f", f.eval(x)?);
        }
        report.number("f_bar", f.eval_extended(x)?);
    }
    Ok(())
}

fn jump(path: &Path, m: Vec<u64>, nu: &[f64], common: &Common, report: &mut Report) -> Res<()> {
    let (loaded, inst) = instance_of(path, report)?;
    let tol = settings(common, Some(&loaded.file)).tol;
    let curve = TestCurve::new(m)?;
    let v = jump_is_effective(&inst, &curve, tol)?;
    report.value(
        "m",
        Value::Array(curve.multiplicities().iter().map(|&v| Value::from(v)).collect()),
    );
    report.number("jump", v.jump);
    report.value("effective", v.effective);
    report.number("f_bar", v.recession_value);
    report.number("linear_part", v.linear_part);
    if !nu.is_empty() {
        let o = pullback_orders(&inst, &curve, nu)?;
        report.numbers("nu", nu);
        report.number("pullback_of_lear", o.pullback_of_lear);
        report.number("lear_of_pullback", o.lear_of_pullback);
    }
    report.check(Check::at_least_neg("heightjump.effective", v.jump, tol));
    Ok(())
}

fn lear(path: Option<&Path>, mu: Vec<f64>, nu: Vec<f64>, labels: &[String], report: &mut Report) -> Res<()> {
    let mu = match path {
        Some(p) => {
            if !mu.is_empty() {
                return Err(Failure::Input("give either --instance or --mu, not both".into()));
            }
            let (_, inst) = instance_of(p, report)?;
            inst.recession().mu().to_vec()
        }
        None if mu.is_empty() => return Err(Failure::Input("lear needs --instance or --mu".into())),
        None => mu,
    };
    let nu = if nu.is_empty() { vec![0.0; mu.len()] } else { nu };
    let d = lear_divisor(&mu, &nu, labels, Vec::new())?;
    report.numbers("mu", &d.mu);
    report.numbers("nu", &d.nu);
    report.numbers("coefficients", &d.coefficients());
    let divisor: Map<String, Value> = d.components.iter().map(|(l, a)| (l.clone(), number(*a))).collect();
    report.value("divisor", Value::Object(divisor));
    Ok(())
}

fn model_of(path: &Path, report: &mut Report) -> Res<PeriodModel> {
    let loaded = load(path)?;
    report.instance_digest = Some(loaded.digest);
    match loaded.file {
        InstanceFile::PeriodModel(f) => Ok(f.to_model()?),
        InstanceFile::Normlike(_) => Err(Failure::Input(format!(
            "{}: metric needs a period_model file",
            path.display()
        ))),
    }
}

fn metric(path: &Path, x: &[f64], t: &[f64], common: &Common, report: &mut Report) -> Res<()> {
    let model = model_of(path, report)?;
    let tol = common.tol.unwrap_or(DEFAULT_FINE_TOL);
    let x = if x.is_empty() {
        vec![2.0 * model.kappa(); model.k()]
    } else {
        x.to_vec()
    };
    if x.len() != model.k() {
        return Err(Error::DimensionMismatch {
            what: "--x",
            expected: model.k(),
            found: x.len(),
        }
        .into());
    }
    let t = if t.is_empty() {
        vec![0.0; model.n() - model.k()]
    } else {
        t.to_vec()
    };
    let q: Vec<Complex<f64>> = x
        .iter()
        .map(|&xj| Complex::new((-xj).exp(), 0.0))
        .chain(t.iter().map(|&tj| Complex::new(tj, 0.0)))
        .collect();
    let value = model.log_norm_section(&q)?;
    let linear: f64 = model.h_orders().iter().zip(&x).map(|(&o, xj)| o as f64 * xj).sum();
    let inst = model.to_normlike(std::slice::from_ref(&q))?;
    let phi = inst.eval_phi(&x, 0)?;
    report.numbers("x", &x);
    if !t.is_empty() {
        report.numbers("t", &t);
    }
    report.number("log_norm_section", value);
    report.number("norm", (-value).exp());
    report.number("h_part", linear);
    report.number("phi", phi);
    report.numbers("mu", inst.recession().mu());
    let diff = (value - linear - phi).abs() / value.abs().max(1.0);
    report.check(Check::at_most("metric.bridge", diff, tol));
    Ok(())
}

fn check_suite(
    path: Option<&Path>,
    samples: usize,
    t_max: f64,
    probes: usize,
    common: &Common,
    report: &mut Report,
) -> Res<()> {
    let loaded = path.map(load).transpose()?;
    let s = settings(common, loaded.as_ref().map(|l| &l.file));
    let cfg = SuiteConfig {
        seed: seed(common)?,
        tol: s.tol,
        fine_tol: DEFAULT_FINE_TOL.min(s.tol),
        slope_tol: s.slope_tol,
        t_max,
        probes,
    };
    let (instances, models) = match &loaded {
        Some(l) => {
            report.instance_digest = Some(l.digest.clone());
            let inst = l.file.to_instance()?;
            let models = match &l.file {
                InstanceFile::PeriodModel(f) => vec![f.to_model()?],
                InstanceFile::Normlike(_) => Vec::new(),
            };
            (vec![inst], models)
        }
        None => (random_instances(cfg.seed, samples), random_models(cfg.seed, samples)),
    };
    report.value("seed", format!("{:#x}", cfg.seed));
    report.value("instances", instances.len());
    report.value("models", models.len());
    report.value("probes", probes);
    for c in instance_checks(&instances, &cfg) {
        report.check(c);
    }
    for c in metric_checks(&models, &cfg) {
        report.check(c);
    }
    Ok(())
}

fn gen(opts: GenOptions, index: u64, out: Option<&Path>, common: &Common, report: &mut Report) -> Res<Option<String>> {
    if opts.g == Some(0) || opts.k == Some(0) || opts.samples == Some(0) {
        return Err(Failure::Input("--g, --k and --samples must be positive".into()));
    }
    let seed = seed(common)?;
    let text = InstanceFile::Normlike(random_file(seed, index, &opts)).to_json();
    let Some(out) = out else {
        return Ok(Some(text));
    };
    std::fs::write(out, &text).map_err(|e| Failure::Input(format!("cannot write {}: {e}", out.display())))?;
    report.instance_digest = Some(digest(text.as_bytes()));
    report.value("out", out.display().to_string());
    report.value("seed", format!("{seed:#x}"));
    report.value("index", index);
    Ok(None)
}
