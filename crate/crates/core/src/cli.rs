//! The `brnn` command: `generate | train | eval | gradcheck | stability`.
//!
//! Exit codes: 0 success, 1 gradient check failed, 2 usage or configuration
//! error, 3 numerical explosion/divergence, 4 I/O or parse error.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;

use crate::checkpoint;
use crate::config::{resolve, ConfigFile};
use crate::error::{BrnnError, Result};
use crate::loss::{total_cost, CostBreakdown, LossWeights, StateLossKind};
use crate::model::{forward, Dims, Nonlinearity, Sequence};
use crate::stability::{make_stable_a, StabilityReport, StableScheme};
use crate::tasks::{gen_task, read_csv, write_csv, TaskKind, TaskSpec};
use crate::trainer::{init_params, train, Aggregation, EpochMetrics, TrainConfig};
use crate::verify::{GradCheckInstance, DEFAULT_EPS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Default sine frequency for the `sine` task (radians per step).
pub const DEFAULT_OMEGA: f64 = 0.2;

#[derive(Parser, Debug)]
#[command(
    name = "brnn",
    version,
    about = "Basic recurrent neural network toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic dataset as CSV.
    Generate(GenerateArgs),
    /// Train on a dataset or generated task; writes metrics CSV and a checkpoint.
    Train(TrainArgs),
    /// Print the cost breakdown of a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Compare co-state gradients with central finite differences.
    Gradcheck(GradcheckArgs),
    /// Print the BIBO/Liapunov report for a checkpoint or a constructed A.
    Stability(StabilityArgs),
}

#[derive(Args, Debug, Default)]
struct TaskArgs {
    /// sine | bandpass | lag
    #[arg(long)]
    task: Option<String>,
    /// Horizon N (the sequence has N+1 samples).
    #[arg(long = "N")]
    horizon: Option<usize>,
    /// Input dimension.
    #[arg(long)]
    m: Option<usize>,
    /// Output dimension.
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    phase: Option<f64>,
    /// Uniform noise amplitude.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    lag: Option<usize>,
    /// Pole radius of the bandpass resonator.
    #[arg(long = "pole-radius")]
    pole_radius: Option<f64>,
    /// Pole angle (radians) of the bandpass resonator.
    #[arg(long = "pole-angle")]
    pole_angle: Option<f64>,
    /// Seed for dataset noise (defaults to --seed).
    #[arg(long = "data-seed")]
    data_seed: Option<u64>,
}

#[derive(Args, Debug, Default)]
struct LossArgs {
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    beta0: Option<f64>,
    #[arg(long)]
    gamma1: Option<f64>,
    #[arg(long)]
    gamma2: Option<f64>,
    /// l1 | tanh_approx | none
    #[arg(long = "state-loss")]
    state_loss: Option<StateLossKind>,
    #[arg(long = "alpha-ent")]
    alpha_ent: Option<f64>,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    task: TaskArgs,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset CSV; when absent a task is generated.
    #[arg(long)]
    data: Option<PathBuf>,
    #[command(flatten)]
    task: TaskArgs,
    #[command(flatten)]
    loss: LossArgs,
    /// State dimension.
    #[arg(long)]
    n: Option<usize>,
    /// tanh | logistic | relu | identity
    #[arg(long)]
    sigma: Option<Nonlinearity>,
    #[arg(long = "alphaA", alias = "alpha-a")]
    alpha_a: Option<f64>,
    #[arg(long = "init-scale")]
    init_scale: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// sum | mean | median | min_abs
    #[arg(long)]
    agg: Option<Aggregation>,
    #[arg(long = "stop-tol")]
    stop_tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    metrics: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[command(flatten)]
    task: TaskArgs,
    #[command(flatten)]
    loss: LossArgs,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long = "N")]
    horizon: Option<usize>,
    #[arg(long)]
    sigma: Option<Nonlinearity>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of random instances (seeds seed, seed+1, ...).
    #[arg(long)]
    instances: Option<usize>,
    #[command(flatten)]
    loss: LossArgs,
}

#[derive(Args, Debug)]
struct StabilityArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Analyze the A of this checkpoint instead of constructing one.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long = "alphaA", alias = "alpha-a")]
    alpha_a: Option<f64>,
    /// scaled_identity | random_diagonal | random_orthogonal_scaled
    #[arg(long)]
    scheme: Option<StableScheme>,
    #[arg(long)]
    seed: Option<u64>,
    /// Bound on ‖U h + W s + b‖; derived from the checkpoint when omitted there.
    #[arg(long = "Msup", alias = "m-sup")]
    m_sup: Option<f64>,
    /// Bound on ‖s_k‖ used to derive M_sup from a checkpoint.
    #[arg(long = "ssup", alias = "s-sup")]
    s_sup: Option<f64>,
    /// Also write the CSV header and row to this file.
    #[arg(long)]
    csv: Option<PathBuf>,
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{rendered}")
            } else {
                write!(out, "{rendered}")
            };
            return code;
        }
    };

    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a, out),
        Command::Train(a) => cmd_train(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Gradcheck(a) => cmd_gradcheck(a, out),
        Command::Stability(a) => cmd_stability(a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &BrnnError) -> i32 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else if e.is_io() {
        EXIT_IO
    } else {
        EXIT_USAGE
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<Option<ConfigFile>> {
    path.as_ref().map(ConfigFile::load).transpose()
}

fn task_spec(t: &TaskArgs, file: Option<&ConfigFile>, seed: u64) -> Result<TaskSpec> {
    let kind_name: String = resolve(t.task.clone(), file, "task", "sine".to_string())?;
    let horizon = resolve(t.horizon, file, "N", 50)?;
    let m = resolve(t.m, file, "m", 1)?;
    let r = resolve(t.r, file, "r", 1)?;
    let data_seed = resolve(t.data_seed, file, "data_seed", seed)?;
    let (kind, default_noise) = match kind_name.as_str() {
        "sine" | "sine_track" => (
            TaskKind::SineTrack {
                omega: resolve(t.omega, file, "omega", DEFAULT_OMEGA)?,
                phase: resolve(t.phase, file, "phase", 0.0)?,
            },
            0.0,
        ),
        "bandpass" | "bandpass_filter" => (
            TaskKind::resonator(
                resolve(t.pole_radius, file, "pole_radius", 0.9)?,
                resolve(
                    t.pole_angle,
                    file,
                    "pole_angle",
                    std::f64::consts::FRAC_PI_4,
                )?,
            ),
            // unit-variance uniform noise
            3f64.sqrt(),
        ),
        "lag" | "lag_copy" => (
            TaskKind::LagCopy {
                lag: resolve(t.lag, file, "lag", 3)?,
            },
            1.0,
        ),
        other => return Err(BrnnError::Config(format!("unknown task '{other}'"))),
    };
    Ok(TaskSpec {
        kind,
        horizon,
        m,
        r,
        noise: resolve(t.noise, file, "noise", default_noise)?,
        seed: data_seed,
    })
}

fn load_sequence(
    data: &Option<PathBuf>,
    t: &TaskArgs,
    file: Option<&ConfigFile>,
    seed: u64,
) -> Result<Sequence> {
    let data: Option<PathBuf> = match data {
        Some(p) => Some(p.clone()),
        None => file
            .map(|f| f.get::<PathBuf>("data"))
            .transpose()?
            .flatten(),
    };
    match data {
        Some(path) => read_csv(path),
        None => gen_task(&task_spec(t, file, seed)?),
    }
}

fn loss_weights(
    l: &LossArgs,
    file: Option<&ConfigFile>,
    defaults: LossWeights,
) -> Result<LossWeights> {
    let w = LossWeights {
        beta: resolve(l.beta, file, "beta", defaults.beta)?,
        beta0: resolve(l.beta0, file, "beta0", defaults.beta0)?,
        gamma1: resolve(l.gamma1, file, "gamma1", defaults.gamma1)?,
        gamma2: resolve(l.gamma2, file, "gamma2", defaults.gamma2)?,
        state_loss_kind: resolve(l.state_loss, file, "state_loss", defaults.state_loss_kind)?,
        alpha_ent: resolve(l.alpha_ent, file, "alpha_ent", defaults.alpha_ent)?,
    };
    w.validate()?;
    Ok(w)
}

fn path_or(
    flag: &Option<PathBuf>,
    file: Option<&ConfigFile>,
    key: &str,
    default: &str,
) -> Result<PathBuf> {
    resolve(flag.clone(), file, key, PathBuf::from(default))
}

fn cmd_generate(a: GenerateArgs, out: &mut dyn Write) -> Result<i32> {
    let file = load_config(&a.config)?;
    let file = file.as_ref();
    let seed = resolve(a.seed, file, "seed", 1)?;
    let spec = task_spec(&a.task, file, seed)?;
    let seq = gen_task(&spec)?;
    let path = path_or(&a.out, file, "out", "data.csv")?;
    write_csv(&seq, &path)?;
    writeln!(
        out,
        "wrote {} task with N={} (m={}, r={}) to {}",
        spec.kind.name(),
        spec.horizon,
        spec.m,
        spec.r,
        path.display()
    )?;
    Ok(EXIT_OK)
}

/// Writes the per-epoch metrics table
/// `epoch,total,phi_N,output_sum,state_sum,reg,grad_norm,lambda_max`, where
/// `state_sum` holds the state and hidden penalties and `reg` both regularizers.
pub fn write_metrics_csv<W: Write>(metrics: &[EpochMetrics], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let io = |e: csv::Error| BrnnError::Io(e.into());
    wtr.write_record([
        "epoch",
        "total",
        "phi_N",
        "output_sum",
        "state_sum",
        "reg",
        "grad_norm",
        "lambda_max",
    ])
    .map_err(io)?;
    for m in metrics {
        let c = &m.cost;
        wtr.write_record([
            m.epoch.to_string(),
            c.total.to_string(),
            c.phi_n.to_string(),
            c.output_sum.to_string(),
            (c.state_sum + c.hidden_sum).to_string(),
            (c.reg_theta + c.reg_nu).to_string(),
            m.grad_norm.to_string(),
            m.lambda_max.to_string(),
        ])
        .map_err(io)?;
    }
    wtr.flush()?;
    Ok(())
}

const TRAIN_KEYS: &[&str] = &[
    "data",
    "task",
    "N",
    "m",
    "r",
    "omega",
    "phase",
    "noise",
    "lag",
    "pole_radius",
    "pole_angle",
    "data_seed",
    "beta",
    "beta0",
    "gamma1",
    "gamma2",
    "state_loss",
    "alpha_ent",
    "n",
    "sigma",
    "alphaA",
    "init_scale",
    "eta",
    "epochs",
    "agg",
    "stop_tol",
    "seed",
    "metrics",
    "checkpoint",
];

fn cmd_train(a: TrainArgs, out: &mut dyn Write) -> Result<i32> {
    let file = load_config(&a.config)?;
    let file = file.as_ref();
    if let Some(f) = file {
        let unknown = f.unknown_keys(TRAIN_KEYS);
        if !unknown.is_empty() {
            return Err(BrnnError::Config(format!(
                "unknown config keys: {}",
                unknown.join(", ")
            )));
        }
    }
    let seed = resolve(a.seed, file, "seed", 1)?;
    let seq = load_sequence(&a.data, &a.task, file, seed)?;
    let weights = loss_weights(&a.loss, file, LossWeights::default())?;
    let defaults = TrainConfig::default();
    let config = TrainConfig {
        eta: resolve(a.eta, file, "eta", defaults.eta)?,
        epochs: resolve(a.epochs, file, "epochs", defaults.epochs)?,
        aggregation: resolve(a.agg, file, "agg", defaults.aggregation)?,
        stop_tol: resolve(a.stop_tol, file, "stop_tol", defaults.stop_tol)?,
        seed,
        init_scale: resolve(a.init_scale, file, "init_scale", defaults.init_scale)?,
        alpha_a: resolve(a.alpha_a, file, "alphaA", defaults.alpha_a)?,
    };
    config.validate()?;
    let n = resolve(a.n, file, "n", 8)?;
    let sigma = resolve(a.sigma, file, "sigma", Nonlinearity::Tanh)?;
    let dims = Dims::new(n, seq.m(), seq.r(), seq.horizon())?;
    let metrics_path = path_or(&a.metrics, file, "metrics", "metrics.csv")?;
    let ckpt_path = path_or(&a.checkpoint, file, "checkpoint", "brnn.ckpt")?;

    let params0 = init_params(&dims, sigma, config.init_scale, config.alpha_a, config.seed);
    let x0 = DVector::zeros(n);
    let (params, history) = train(&config, &seq, &params0, &x0, &weights)?;

    write_metrics_csv(&history, BufWriter::new(File::create(&metrics_path)?))?;
    checkpoint::save(&params, &ckpt_path)?;

    let final_cost = evaluate(&params, &seq, &weights)?;
    if let Some(first) = history.first() {
        writeln!(out, "epochs run      : {}", history.len())?;
        writeln!(out, "first-epoch cost: {}", first.cost.total)?;
    }
    writeln!(out, "final cost      : {}", final_cost.total)?;
    writeln!(out, "metrics         : {}", metrics_path.display())?;
    writeln!(out, "checkpoint      : {}", ckpt_path.display())?;
    Ok(EXIT_OK)
}

fn evaluate(
    params: &crate::model::BrnnParams,
    seq: &Sequence,
    w: &LossWeights,
) -> Result<CostBreakdown> {
    let traj = forward(params, seq, &DVector::zeros(params.n()))?;
    total_cost(&traj, seq, params, w)
}

fn write_breakdown(out: &mut dyn Write, c: &CostBreakdown) -> Result<()> {
    writeln!(out, "phi_N      {}", c.phi_n)?;
    writeln!(out, "output_sum {}", c.output_sum)?;
    writeln!(out, "state_sum  {}", c.state_sum)?;
    writeln!(out, "hidden_sum {}", c.hidden_sum)?;
    writeln!(out, "reg_theta  {}", c.reg_theta)?;
    writeln!(out, "reg_nu     {}", c.reg_nu)?;
    writeln!(out, "total      {}", c.total)?;
    Ok(())
}

fn cmd_eval(a: EvalArgs, out: &mut dyn Write) -> Result<i32> {
    let file = load_config(&a.config)?;
    let file = file.as_ref();
    let seed = resolve(a.seed, file, "seed", 1)?;
    let ckpt = path_or(&a.checkpoint, file, "checkpoint", "brnn.ckpt")?;
    let params = checkpoint::load(&ckpt)?;
    let seq = load_sequence(&a.data, &a.task, file, seed)?;
    let weights = loss_weights(&a.loss, file, LossWeights::default())?;
    let cost = evaluate(&params, &seq, &weights)?;
    write_breakdown(out, &cost)?;
    Ok(EXIT_OK)
}

fn cmd_gradcheck(a: GradcheckArgs, out: &mut dyn Write) -> Result<i32> {
    let file = load_config(&a.config)?;
    let file = file.as_ref();
    let dims = Dims::new(
        resolve(a.n, file, "n", 4)?,
        resolve(a.m, file, "m", 2)?,
        resolve(a.r, file, "r", 2)?,
        resolve(a.horizon, file, "N", 10)?,
    )?;
    let sigma = resolve(a.sigma, file, "sigma", Nonlinearity::Tanh)?;
    let tol = resolve(a.tol, file, "tol", 1e-5)?;
    let eps = resolve(a.eps, file, "eps", DEFAULT_EPS)?;
    let seed = resolve(a.seed, file, "seed", 1)?;
    let instances = resolve(a.instances, file, "instances", 1usize)?;
    let weights = loss_weights(
        &a.loss,
        file,
        LossWeights {
            beta: 0.1,
            gamma1: 0.01,
            gamma2: 0.01,
            state_loss_kind: StateLossKind::TanhApprox,
            ..LossWeights::default()
        },
    )?;

    let mut all_pass = true;
    for i in 0..instances {
        let inst = GradCheckInstance::random(&dims, sigma, weights, seed + i as u64);
        let report = inst.check(eps, tol)?;
        writeln!(out, "instance {} (seed {})", i, seed + i as u64)?;
        writeln!(out, "{report}")?;
        all_pass &= report.pass;
    }
    Ok(if all_pass { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn cmd_stability(a: StabilityArgs, out: &mut dyn Write) -> Result<i32> {
    let file = load_config(&a.config)?;
    let file = file.as_ref();
    let ckpt: Option<PathBuf> = match &a.checkpoint {
        Some(p) => Some(p.clone()),
        None => file
            .map(|f| f.get::<PathBuf>("checkpoint"))
            .transpose()?
            .flatten(),
    };
    let m_sup: Option<f64> = match a.m_sup {
        Some(v) => Some(v),
        None => file.map(|f| f.get::<f64>("Msup")).transpose()?.flatten(),
    };
    let report = match ckpt {
        Some(path) => {
            let params = checkpoint::load(&path)?;
            match m_sup {
                Some(m) => StabilityReport::new(&params.a, m)?,
                None => {
                    let s_sup = resolve(a.s_sup, file, "ssup", 1.0)?;
                    StabilityReport::for_params(&params, s_sup, None)?
                }
            }
        }
        None => {
            let n = resolve(a.n, file, "n", 1)?;
            let alpha = resolve(a.alpha_a, file, "alphaA", 0.5)?;
            let scheme = resolve(a.scheme, file, "scheme", StableScheme::ScaledIdentity)?;
            let seed = resolve(a.seed, file, "seed", 1)?;
            let a_mat = make_stable_a(n, scheme, alpha, seed)?;
            StabilityReport::new(&a_mat, m_sup.unwrap_or(1.0))?
        }
    };
    write!(out, "{report}")?;
    writeln!(out, "{}", StabilityReport::CSV_HEADER)?;
    writeln!(out, "{}", report.csv_row())?;
    if let Some(path) = &a.csv {
        write_report_csv(&report, path)?;
    }
    Ok(EXIT_OK)
}

fn write_report_csv(report: &StabilityReport, path: &Path) -> Result<()> {
    let mut f = File::create(path)?;
    writeln!(f, "{}", StabilityReport::CSV_HEADER)?;
    writeln!(f, "{}", report.csv_row())?;
    Ok(())
}
