//! `urnn` command-line tool: generate teacher systems and datasets, build and
//! verify orthogonal embeddings, train students, run sweeps and the converse
//! witnesses.
//!
//! Exit codes: 0 success, 1 a check ran and failed, 2 usage, 3 I/O,
//! 4 numerical failure.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use urnn_core::equivalence::{
    converse_relu_witness, default_x_grid, dof_count, one_state_urnn_search, params_digest,
    sample_scalar_unitary_sigmoid, sigmoid_mismatch_witness, unitary_embedding, verify_equivalence, DofKind, GapSearch,
    MismatchReport,
};
use urnn_core::experiment::{run_experiment, write_experiment, ExperimentConfig, Mode, ModeGrid};
use urnn_core::io::{load_dataset, load_model, save_dataset, save_model, write_json};
use urnn_core::linalg::svd;
use urnn_core::rnn::Activation;
use urnn_core::synth::{generate_dataset, generate_system, SystemSpec};
use urnn_core::train::{evaluate, init_student, train, Constraint, TrainConfig};
use urnn_core::Error;

pub const REPORT_FORMAT_VERSION: u32 = 1;

/// Environment variable capping the worker pool.
pub const THREADS_ENV: &str = "URNN_EQUIV_THREADS";

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILED: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_NUMERICAL: u8 = 4;

/// Error carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure { code: EXIT_USAGE, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io(_) | Error::File { .. } | Error::Format(_) | Error::Json(_) => EXIT_IO,
            Error::NonDifferentiable(_) | Error::UndefinedR2 { .. } => EXIT_NUMERICAL,
            e if e.is_numerical() => EXIT_NUMERICAL,
            _ => EXIT_USAGE,
        };
        Failure { code, message: e.to_string() }
    }
}

type CmdResult = Result<u8, Failure>;

#[derive(Debug, Parser)]
#[command(name = "urnn", version, about = "Orthogonal-RNN equivalence experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a slowly varying contractive ReLU teacher system.
    GenSystem(GenSystemArgs),
    /// Simulate a model on random inputs and write a noisy dataset.
    GenData(GenDataArgs),
    /// Build the 2n-state orthogonal network matching a contractive ReLU model.
    Embed(EmbedArgs),
    /// Compare two models on bounded random inputs.
    Verify(VerifyArgs),
    /// Train a student network on a dataset.
    Train(TrainArgs),
    /// Test R² of a model on a dataset.
    Eval(EvalArgs),
    /// Sweep hidden units, constraint modes and seeds.
    Experiment(ExperimentArgs),
    /// Witnesses that fewer states or sigmoid activations do not suffice.
    #[command(subcommand)]
    Converse(ConverseCommand),
    /// Parameter counts of a general network and its orthogonal embedding.
    Dof(DofArgs),
}

#[derive(Debug, Args)]
pub struct GenSystemArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub p: usize,
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.6)]
    pub activation_target: f64,
    #[arg(long, default_value_t = 0.05)]
    pub activation_tol: f64,
    #[arg(long, default_value_t = 1.0)]
    pub input_std: f64,
    /// Probability that an input entry is nonzero.
    #[arg(long, default_value_t = 1.0)]
    pub sparsity: f64,
    #[arg(long, default_value = "model.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 700)]
    pub n_train: usize,
    #[arg(long, default_value_t = 300)]
    pub n_test: usize,
    #[arg(long, default_value_t = 1000)]
    pub t_len: usize,
    #[arg(long, default_value_t = 20.0, conflicts_with = "clean")]
    pub snr_db: f64,
    /// Noiseless targets.
    #[arg(long)]
    pub clean: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Overrides the input sparsity recorded with the model.
    #[arg(long)]
    pub sparsity: Option<f64>,
    /// Overrides the input standard deviation recorded with the model.
    #[arg(long)]
    pub input_std: Option<f64>,
    #[arg(long, default_value = "data")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Bound M on the input norm; required, there is no default.
    #[arg(long)]
    pub bound_m: f64,
    #[arg(long, default_value = "urnn.json")]
    pub out: PathBuf,
    /// Also write the certificate as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub model_a: PathBuf,
    #[arg(long)]
    pub model_b: PathBuf,
    #[arg(long, default_value_t = 10.0)]
    pub bound_m: f64,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, default_value_t = 200)]
    pub t_len: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "report.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub hidden: usize,
    /// rnn, contractive or unitary.
    #[arg(long, default_value = "rnn", value_parser = parse_mode)]
    pub mode: Mode,
    #[arg(long, default_value = "relu", value_parser = parse_activation)]
    pub activation: Activation,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.01)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 10)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 200)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 10)]
    pub patience: usize,
    #[arg(long, default_value_t = 0.15)]
    pub validation_fraction: f64,
    /// Spectral-norm cap for contractive mode.
    #[arg(long, default_value_t = Constraint::DEFAULT_CAP)]
    pub cap: f64,
    /// Record wall time (makes reports differ between runs).
    #[arg(long)]
    pub record_timing: bool,
    #[arg(long, default_value = "trained.json")]
    pub out_model: PathBuf,
    #[arg(long, default_value = "train_report.json")]
    pub out_report: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// desk or full.
    #[arg(long, default_value = "desk")]
    pub preset: String,
    /// Replaces the preset's seed list.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Restricts the sweep to these modes.
    #[arg(long, value_delimiter = ',', value_parser = parse_mode)]
    pub modes: Option<Vec<Mode>>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    /// Record wall time per cell (makes reports differ between runs).
    #[arg(long)]
    pub record_timing: bool,
    #[arg(long, default_value = "experiment")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum ConverseCommand {
    /// Best one-state ReLU network against the scalar witness.
    Relu(ConverseReluArgs),
    /// Local mismatch between a scalar sigmoid system and orthogonal candidates.
    Sigmoid(ConverseSigmoidArgs),
}

#[derive(Debug, Args)]
pub struct ConverseReluArgs {
    #[arg(long, default_value_t = 0.9)]
    pub wc: f64,
    /// Grid points per axis.
    #[arg(long, default_value_t = 61)]
    pub grid: usize,
    #[arg(long, default_value_t = 3.0)]
    pub grid_bound: f64,
    #[arg(long, default_value_t = 50)]
    pub t_len: usize,
    #[arg(long, default_value_t = 10.0)]
    pub bound_m: f64,
    #[arg(long, default_value_t = 2024)]
    pub probe_seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConverseSigmoidArgs {
    #[arg(long, default_value_t = 0.9)]
    pub wc: f64,
    #[arg(long, default_value_t = 100)]
    pub candidates: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Constant operating inputs; defaults to 13 points on [-3, 3].
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub x_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DofArgs {
    #[arg(long)]
    pub n: u64,
    #[arg(long)]
    pub m: u64,
    #[arg(long)]
    pub p: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_activation(s: &str) -> Result<Activation, String> {
    match s {
        "relu" => Ok(Activation::Relu),
        "sigmoid" => Ok(Activation::Sigmoid),
        "identity" => Ok(Activation::Identity),
        other => Err(format!("unknown activation {other:?}")),
    }
}

/// Caps the global worker pool from the value of [`THREADS_ENV`].
pub fn configure_threads(value: Option<&str>) -> Result<(), Failure> {
    let Some(v) = value else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::usage(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::usage(format!("cannot size the worker pool: {e}")))
}

#[derive(Serialize)]
struct Report<'a, C: Serialize, R: Serialize> {
    format_version: u32,
    command: &'a str,
    config: C,
    result: R,
}

fn write_report<C: Serialize, R: Serialize>(path: &Path, command: &str, config: C, result: R) -> Result<(), Failure> {
    let report = Report { format_version: REPORT_FORMAT_VERSION, command, config, result };
    Ok(write_json(path, &report)?)
}

fn emit(out: &mut dyn Write, text: std::fmt::Arguments) -> Result<(), Failure> {
    writeln!(out, "{text}").map_err(|e| Failure { code: EXIT_IO, message: format!("stdout: {e}") })
}

macro_rules! say {
    ($out:expr, $($arg:tt)*) => { emit($out, format_args!($($arg)*))? };
}

/// Runs a parsed command, writing human-readable output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> CmdResult {
    match cli.command {
        Command::GenSystem(a) => gen_system(a, out),
        Command::GenData(a) => gen_data(a, out),
        Command::Embed(a) => embed(a, out),
        Command::Verify(a) => verify(a, out),
        Command::Train(a) => train_cmd(a, out),
        Command::Eval(a) => eval(a, out),
        Command::Experiment(a) => experiment(a, out),
        Command::Converse(ConverseCommand::Relu(a)) => converse_relu(a, out),
        Command::Converse(ConverseCommand::Sigmoid(a)) => converse_sigmoid(a, out),
        Command::Dof(a) => dof(a, out),
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Help and version requests exit 0; parse errors exit 2.
pub fn run_from<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    match run(cli, out) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn gen_system(a: GenSystemArgs, out: &mut dyn Write) -> CmdResult {
    let spec = SystemSpec {
        activation_target: a.activation_target,
        activation_tol: a.activation_tol,
        input_std: a.input_std,
        input_sparsity: a.sparsity,
        ..SystemSpec::new(a.n, a.m, a.p, a.epsilon, a.seed)
    };
    let sys = generate_system(&spec)?;
    let sv = svd(&sys.params.w)?.s;
    let metadata = json!({
        "generator": {
            "spec": spec,
            "singular_values": sv,
            "activity_fractions": sys.activity_fractions,
            "calibration_iterations": sys.calibration_iterations,
        }
    });
    save_model(&a.out, &sys.params, metadata)?;
    let (lo, hi) = (sv[sv.len() - 1], sv[0]);
    say!(out, "wrote {}", a.out.display());
    say!(out, "states {}, inputs {}, outputs {}, seed {}", a.n, a.m, a.p, a.seed);
    say!(out, "singular values of W in [{lo:.12}, {hi:.12}]");
    say!(out, "activity fractions {:?} after {} iterations", sys.activity_fractions, sys.calibration_iterations);
    Ok(EXIT_OK)
}

fn gen_data(a: GenDataArgs, out: &mut dyn Write) -> CmdResult {
    let (params, metadata) = load_model(&a.model)?;
    let recorded = metadata.get("generator").and_then(|g| g.get("spec")).cloned();
    let mut spec = match recorded {
        Some(v) => serde_json::from_value::<SystemSpec>(v)
            .map_err(|e| Failure { code: EXIT_IO, message: format!("{}: bad generator spec: {e}", a.model.display()) })?,
        None => SystemSpec::new(params.n(), params.m(), params.p(), 0.5, a.seed),
    };
    if (spec.n, spec.m, spec.p) != (params.n(), params.m(), params.p()) {
        return Err(Failure { code: EXIT_IO, message: format!("{}: spec disagrees with weights", a.model.display()) });
    }
    if let Some(s) = a.sparsity {
        spec.input_sparsity = s;
    }
    if let Some(s) = a.input_std {
        spec.input_std = s;
    }
    let snr = if a.clean { f64::INFINITY } else { a.snr_db };
    let data = generate_dataset(&params, &spec, a.n_train, a.n_test, a.t_len, snr, a.seed)?;
    save_dataset(&a.out, &data)?;
    let m = &data.meta;
    say!(out, "wrote {} ({} train / {} test sequences, T={})", a.out.display(), m.n_train, m.n_test, m.t_len);
    match m.empirical_snr_db {
        Some(s) => say!(out, "target SNR {snr} dB, empirical {s:.4} dB"),
        None => say!(out, "noiseless targets"),
    }
    say!(out, "nonzero input fraction {:.4}", m.nonzero_input_fraction);
    Ok(EXIT_OK)
}

fn embed(a: EmbedArgs, out: &mut dyn Write) -> CmdResult {
    let (source, _) = load_model(&a.model)?;
    let record = unitary_embedding(&source, a.bound_m)?;
    let cert = record.certificate();
    save_model(&a.out, &record.urnn, json!({ "embedding": cert }))?;
    if let Some(path) = &a.report {
        write_report(path, "embed", json!({ "model": a.model, "bound_m": a.bound_m, "out": a.out }), &cert)?;
    }
    say!(out, "wrote {} ({} states from {})", a.out.display(), cert.urnn_states, cert.source_states);
    say!(out, "rho {:.17e}", cert.rho);
    say!(out, "state bound M_h {:.17e}", cert.state_bound_mh);
    say!(out, "orthogonality residual {:.3e}", cert.orthogonality_residual);
    Ok(EXIT_OK)
}

fn verify(a: VerifyArgs, out: &mut dyn Write) -> CmdResult {
    let (pa, _) = load_model(&a.model_a)?;
    let (pb, _) = load_model(&a.model_b)?;
    let report = verify_equivalence(&pa, &pb, a.bound_m, a.trials, a.t_len, a.tol, a.seed)?;
    let config = json!({
        "model_a": params_digest(&pa),
        "model_b": params_digest(&pb),
        "bound_m": a.bound_m,
        "trials": a.trials,
        "t_len": a.t_len,
        "tol": a.tol,
        "seed": a.seed,
    });
    write_report(&a.out, "verify", config, &report)?;
    say!(out, "max deviation {:.3e} (tolerance {:.1e})", report.max_abs_deviation, report.tolerance);
    say!(out, "{}", if report.passed { "PASS" } else { "FAIL" });
    Ok(if report.passed { EXIT_OK } else { EXIT_FAILED })
}

fn constraint_for(mode: Mode, cap: f64) -> Constraint {
    match mode {
        Mode::Rnn => Constraint::None,
        Mode::Contractive => Constraint::Contractive { cap },
        Mode::Unitary => Constraint::Unitary,
    }
}

fn train_cmd(a: TrainArgs, out: &mut dyn Write) -> CmdResult {
    let data = load_dataset(&a.data)?;
    let mut cfg = TrainConfig::new(a.hidden, constraint_for(a.mode, a.cap), a.seed);
    cfg.learning_rate = a.learning_rate;
    cfg.batch_size = a.batch_size;
    cfg.max_epochs = a.max_epochs;
    cfg.early_stop.patience = a.patience;
    cfg.early_stop.validation_fraction = a.validation_fraction;
    cfg.record_timing = a.record_timing;
    cfg.validate()?;
    let (m, p) = (data.meta.spec.m, data.meta.spec.p);
    let init = init_student(a.hidden, m, p, a.activation, &cfg.constraint, a.seed)?;
    let (best, report) = train(&init, &data, &cfg)?;
    let config = json!({
        "train": cfg,
        "activation": a.activation,
        "data_seed": data.meta.seed,
        "system_seed": data.meta.spec.seed,
    });
    save_model(&a.out_model, &best, json!({ "training": config }))?;
    write_report(&a.out_report, "train", &config, &report)?;
    say!(out, "wrote {} and {}", a.out_model.display(), a.out_report.display());
    say!(out, "epochs {} ({:?}), best epoch {}", report.epochs_run, report.stopping_reason, report.best_epoch);
    say!(out, "test R² {:.6}", report.test_r2.last().copied().unwrap_or(f64::NAN));
    say!(out, "constraint residual {:.3e}", report.final_constraint_residual);
    Ok(EXIT_OK)
}

fn eval(a: EvalArgs, out: &mut dyn Write) -> CmdResult {
    let (params, _) = load_model(&a.model)?;
    let data = load_dataset(&a.data)?;
    let ev = evaluate(&params, &data)?;
    if let Some(path) = &a.out {
        let config = json!({ "model": params_digest(&params), "data_seed": data.meta.seed });
        write_report(path, "eval", config, json!({ "r2": ev.r2, "optimal_r2": ev.optimal_r2 }))?;
    }
    say!(out, "test R² {:.6}", ev.r2);
    say!(out, "optimal R² {:.6}", ev.optimal_r2);
    Ok(EXIT_OK)
}

fn experiment(a: ExperimentArgs, out: &mut dyn Write) -> CmdResult {
    let mut cfg = match a.preset.as_str() {
        "desk" => ExperimentConfig::desk(),
        "full" => ExperimentConfig::full(),
        other => return Err(Failure::usage(format!("unknown preset {other:?} (expected desk or full)"))),
    };
    if let Some(seeds) = a.seeds {
        cfg.seeds = seeds;
    }
    if let Some(modes) = a.modes {
        cfg.grids.retain(|g: &ModeGrid| modes.contains(&g.mode));
    }
    if let Some(e) = a.max_epochs {
        cfg.max_epochs = e;
    }
    cfg.record_timing = a.record_timing;
    cfg.validate()?;
    if !a.out.is_dir() {
        std::fs::create_dir(&a.out).map_err(|e| Failure {
            code: EXIT_IO,
            message: format!("{}: {e}", a.out.display()),
        })?;
    }
    let report = run_experiment(&cfg)?;
    write_experiment(&a.out, &report)?;
    say!(out, "wrote {} rows to {}", report.rows.len(), a.out.join("results.csv").display());
    say!(out, "{:<12} {:>6} {:>8} {:>12} {:>12}", "mode", "units", "adjusted", "median R²", "optimal R²");
    for s in &report.summary {
        let f = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
        say!(
            out,
            "{:<12} {:>6} {:>8} {:>12} {:>12}",
            s.mode.name(),
            s.hidden_units,
            s.adjusted_units,
            f(s.median_test_r2),
            f(s.median_optimal_r2)
        );
    }
    if report.any_failed {
        let failed = report.rows.iter().filter(|r| r.status != "ok").count();
        say!(out, "{failed} cell(s) failed; see the status column");
        return Ok(EXIT_NUMERICAL);
    }
    Ok(EXIT_OK)
}

fn converse_relu(a: ConverseReluArgs, out: &mut dyn Write) -> CmdResult {
    let witness = converse_relu_witness(1, a.wc)?;
    let search = GapSearch {
        grid_resolution: a.grid,
        grid_bound: a.grid_bound,
        t_len: a.t_len,
        input_bound: a.bound_m,
        probe_seed: a.probe_seed,
        ..GapSearch::default()
    };
    let report = one_state_urnn_search(&witness, &search)?;
    if let Some(path) = &a.out {
        write_report(path, "converse relu", json!({ "wc": a.wc }), &report)?;
    }
    let separated = report.gap > report.embedding_deviation;
    say!(out, "best one-state orthogonal network deviation (gap) {:.6e}", report.gap);
    say!(out, "best candidate w={} f={} b={} c={}", report.best.w, report.best.f, report.best.b, report.best.c);
    say!(out, "two-state embedding deviation {:.3e}", report.embedding_deviation);
    say!(out, "{} candidates on {} probes", report.candidates_evaluated, report.probe_count);
    Ok(if separated { EXIT_OK } else { EXIT_FAILED })
}

#[derive(Serialize)]
struct SigmoidSummary {
    candidates: usize,
    min_max_gap: Option<f64>,
    without_admissible_probe: usize,
    reports: Vec<MismatchReport>,
}

fn converse_sigmoid(a: ConverseSigmoidArgs, out: &mut dyn Write) -> CmdResult {
    if a.candidates == 0 {
        return Err(Failure::usage("need at least one candidate"));
    }
    let grid = a.x_grid.clone().unwrap_or_else(default_x_grid);
    let reports = sample_scalar_unitary_sigmoid(a.seed, a.candidates)
        .iter()
        .map(|c| sigmoid_mismatch_witness(a.wc, c, &grid))
        .collect::<Result<Vec<_>, _>>()?;
    let gaps: Vec<f64> = reports.iter().filter_map(|r| r.max_gap).collect();
    let summary = SigmoidSummary {
        candidates: reports.len(),
        min_max_gap: gaps.iter().copied().reduce(f64::min),
        without_admissible_probe: reports.len() - gaps.len(),
        reports,
    };
    if let Some(path) = &a.out {
        write_report(path, "converse sigmoid", json!({ "wc": a.wc, "seed": a.seed, "x_grid": grid }), &summary)?;
    }
    say!(out, "{} candidates, {} without a controllable/observable probe", summary.candidates, summary.without_admissible_probe);
    match summary.min_max_gap {
        Some(g) => say!(out, "smallest max_gap over candidates {g:.6e}"),
        None => say!(out, "no admissible probes"),
    }
    let all_separated = summary.without_admissible_probe == 0 && summary.min_max_gap.is_some_and(|g| g > 0.0);
    Ok(if all_separated { EXIT_OK } else { EXIT_FAILED })
}

fn dof(a: DofArgs, out: &mut dyn Write) -> CmdResult {
    if a.n == 0 || a.m == 0 || a.p == 0 {
        return Err(Failure::usage("n, m and p must be positive"));
    }
    let rnn = dof_count(a.n, a.m, a.p, DofKind::Rnn);
    let urnn = dof_count(a.n, a.m, a.p, DofKind::UrnnDouble);
    let ratio = urnn as f64 / rnn as f64;
    if let Some(path) = &a.out {
        let result = json!({ "rnn": rnn, "urnn_double": urnn, "ratio": ratio });
        write_report(path, "dof", json!({ "n": a.n, "m": a.m, "p": a.p }), result)?;
    }
    say!(out, "rnn {rnn}");
    say!(out, "urnn (2n states) {urnn}");
    say!(out, "ratio {ratio:.6}");
    Ok(EXIT_OK)
}
