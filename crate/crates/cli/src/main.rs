use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use ldpc_bounds::bounds::{
    bec_de, bec_threshold, bhattacharyya_threshold, bisect_threshold, ms_upper_bound, sp_lower_bound,
    weight_enumerator, ConvergenceCheck, CONVERGENCE_LEVEL, TRAJECTORY_CSV_HEADER,
};
use ldpc_bounds::density_evolution::{run_de, DensityEvolution};
use ldpc_bounds::simulator::{monte_carlo, DecoderKind, SimulationConfig, SIMULATION_CSV_HEADER};
use ldpc_bounds::tree_oracle::{build_tree_code_with, exact_root_errors, Perspective};
use ldpc_bounds::{ChannelModel, Ensemble, Error, QuantizationParams};

/// Bounds, density evolution and simulation for LDPC ensembles.
#[derive(Debug, Parser)]
#[command(name = "ldpc-bounds", version)]
struct Cli {
    /// Worker threads for simulation and oracle enumeration (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write the result here instead of stdout; the manifest goes to PATH.manifest.json.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Re-run the command recorded in a manifest.
    #[arg(long)]
    from_manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
enum Command {
    /// Union upper bound, sum-product lower bound and (on the BEC) exact DE trajectories.
    ///
    /// Values are error probabilities of variable-to-check messages (edge
    /// perspective), not of the final bit decision.
    Bounds(BoundsArgs),
    /// Threshold by bisection.
    Threshold(ThresholdArgs),
    /// Quantized density evolution.
    ///
    /// edge_error_prob is the variable-to-check message error; node_error_prob
    /// is the bit decision using all d_v incoming messages.
    De(DeArgs),
    /// Finite-length Monte Carlo decoding.
    Simulate(SimulateArgs),
    /// Exact root-bit errors on a small regular tree code.
    TreeOracle(TreeOracleArgs),
    /// Weight enumerator of the reduced tree codebook.
    Enumerate(EnumerateArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct BoundsArgs {
    #[arg(long)]
    ensemble: PathBuf,
    #[arg(long)]
    channel: String,
    #[arg(long, default_value_t = 50)]
    iters: usize,
    /// Count the root bit in the union bound.
    #[arg(long)]
    root_inclusive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum ThresholdMode {
    Bhattacharyya,
    Bec,
    DeChannel,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct ThresholdArgs {
    #[arg(long)]
    ensemble: PathBuf,
    #[arg(long, value_enum, default_value = "bhattacharyya")]
    mode: ThresholdMode,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    /// Channel family for de-channel mode; the parameter value is ignored.
    #[arg(long)]
    channel: Option<String>,
    /// Iteration budget per density evolution run (de-channel mode).
    #[arg(long, default_value_t = 200)]
    iters: usize,
    #[arg(long, default_value_t = 0.02)]
    delta: f64,
    #[arg(long, default_value_t = 40.0)]
    mmax: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct DeArgs {
    #[arg(long)]
    ensemble: PathBuf,
    #[arg(long)]
    channel: String,
    #[arg(long, default_value_t = 50)]
    iters: usize,
    #[arg(long, default_value_t = 0.02)]
    delta: f64,
    #[arg(long, default_value_t = 40.0)]
    mmax: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct SimulateArgs {
    #[arg(long)]
    ensemble: PathBuf,
    #[arg(long)]
    channel: String,
    #[arg(long, default_value_t = 20_000)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 20)]
    iters: usize,
    /// Master seed; drawn from the clock and recorded in the manifest when omitted.
    #[arg(long)]
    seed: Option<u64>,
    /// Decoders to run, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "sp")]
    decoder: Vec<String>,
    /// Stop once this many bit errors are seen at the last iteration.
    #[arg(long)]
    target_errors: Option<u64>,
    /// Freeze decoding once all checks are satisfied.
    #[arg(long)]
    early_termination: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum TreePerspective {
    Message,
    Node,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct TreeOracleArgs {
    #[arg(long)]
    dv: usize,
    #[arg(long)]
    dc: usize,
    #[arg(long)]
    levels: usize,
    #[arg(long)]
    channel: String,
    #[arg(long, value_enum, default_value = "message")]
    perspective: TreePerspective,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct EnumerateArgs {
    #[arg(long)]
    ensemble: PathBuf,
    #[arg(long, default_value_t = 1)]
    level: usize,
    #[arg(long, default_value_t = 64)]
    max_weight: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct RunManifest {
    params: Command,
    /// Ensemble as loaded, so a replay does not depend on the original file.
    ensemble: Option<serde_json::Value>,
    version: String,
    master_seed: Option<u64>,
    timestamp_unix: u64,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_usage() {
            Self::Usage(e.to_string())
        } else {
            Self::Runtime(e.to_string())
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn load_ensemble(path: &Path) -> CliResult<Ensemble> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    Ensemble::from_json(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn parse_channel(spec: &str) -> CliResult<ChannelModel> {
    Ok(spec.parse::<ChannelModel>()?)
}

fn quantization(delta: f64, mmax: f64) -> CliResult<QuantizationParams> {
    Ok(QuantizationParams::new(delta, mmax)?)
}

impl Command {
    fn ensemble_path(&self) -> Option<&Path> {
        match self {
            Self::Bounds(a) => Some(&a.ensemble),
            Self::Threshold(a) => Some(&a.ensemble),
            Self::De(a) => Some(&a.ensemble),
            Self::Simulate(a) => Some(&a.ensemble),
            Self::Enumerate(a) => Some(&a.ensemble),
            Self::TreeOracle(_) => None,
        }
    }
}

fn cmd_bounds(a: &BoundsArgs, ens: &Ensemble) -> CliResult<String> {
    let ch = parse_channel(&a.channel)?;
    let mut out = format!("{TRAJECTORY_CSV_HEADER}\n");
    ms_upper_bound(ens, ch.bhattacharyya(), a.iters, a.root_inclusive)?.write_csv_rows(&mut out);
    sp_lower_bound(ens, ch.uncoded_error_prob(), a.iters)?.write_csv_rows(&mut out);
    if let ChannelModel::Bec { eps } = ch {
        bec_de(ens, eps, a.iters)?.write_csv_rows(&mut out);
    }
    Ok(out)
}

/// Iterations without a new best error before a run is declared stuck.
const STALL_WINDOW: usize = 15;

/// Whether quantized DE drives the edge error below the convergence level
/// within `budget` iterations.
fn de_converges(ens: &Ensemble, ch: &ChannelModel, q: QuantizationParams, budget: usize) -> ldpc_bounds::Result<ConvergenceCheck> {
    let mut de = DensityEvolution::new(ens, ch, q)?;
    // a fully saturated density still leaves e^{-m_max} on the negative edge
    let level = CONVERGENCE_LEVEL.max(10.0 * (-q.m_max).exp());
    let mut best = de.var_to_check().error_prob();
    let mut best_at = 0;
    for l in 1..=budget {
        de.step()?;
        let e = de.var_to_check().error_prob();
        if e < level {
            return Ok(ConvergenceCheck { converged: true, iterations: l });
        }
        if e < best * (1.0 - 1e-9) {
            best = e;
            best_at = l;
        } else if l - best_at >= STALL_WINDOW {
            return Ok(ConvergenceCheck { converged: false, iterations: l });
        }
    }
    Ok(ConvergenceCheck { converged: false, iterations: budget })
}

fn cmd_threshold(a: &ThresholdArgs, ens: &Ensemble) -> CliResult<String> {
    if !(a.tol > 0.0) {
        return Err(CliError::Usage(format!("--tol must be positive, got {}", a.tol)));
    }
    let (result, family) = match a.mode {
        ThresholdMode::Bhattacharyya => (bhattacharyya_threshold(ens, a.tol)?, None),
        ThresholdMode::Bec => (bec_threshold(ens, a.tol)?, None),
        ThresholdMode::DeChannel => {
            let spec = a
                .channel
                .as_deref()
                .ok_or_else(|| CliError::Usage("de-channel mode needs --channel".into()))?;
            let ch = parse_channel(spec)?;
            let q = quantization(a.delta, a.mmax)?;
            // the error probability grows with the parameter on every family
            let (lo, hi) = match ch {
                ChannelModel::Bec { .. } => (0.0, 1.0),
                ChannelModel::Bsc { .. } => (0.0, 0.5),
                ChannelModel::BiAwgn { .. } => (0.1, 3.0),
            };
            let name = spec.split(':').next().unwrap_or(spec).to_string();
            let r = bisect_threshold(lo, hi, a.tol, |x| de_converges(ens, &ch.with_parameter(x)?, q, a.iters))?;
            (r, Some(name))
        }
    };
    if !result.converged_anywhere {
        log::warn!("no tested parameter converged; the threshold lies below {}", result.hi);
    }
    let mode = serde_json::to_value(a.mode).unwrap();
    let mut record = json!({
        "mode": mode,
        "ensemble": ens.id(),
        "tol": a.tol,
        "value": result.value,
        "lo": result.lo,
        "hi": result.hi,
        "bisection_steps": result.bisection_steps,
        "max_iterations": result.max_iterations,
        "converged_anywhere": result.converged_anywhere,
    });
    if let Some(family) = family {
        record["channel_family"] = json!(family);
    }
    Ok(format!("{}\n", serde_json::to_string_pretty(&record).unwrap()))
}

fn cmd_de(a: &DeArgs, ens: &Ensemble) -> CliResult<String> {
    let ch = parse_channel(&a.channel)?;
    let run = run_de(ens, &ch, a.iters, quantization(a.delta, a.mmax)?)?;
    let mut out = String::from("iteration,edge_error_prob,node_error_prob\n");
    for (l, (e, n)) in run.edge.values.iter().zip(&run.node.values).enumerate() {
        out.push_str(&format!("{l},{e},{n}\n"));
    }
    Ok(out)
}

fn cmd_simulate(a: &SimulateArgs, ens: &Ensemble, seed: u64) -> CliResult<String> {
    let ch = parse_channel(&a.channel)?;
    let decoders = a
        .decoder
        .iter()
        .map(|d| d.parse::<DecoderKind>())
        .collect::<ldpc_bounds::Result<Vec<_>>>()?;
    let cfg = SimulationConfig {
        master_seed: seed,
        trials: a.trials,
        max_iter: a.iters,
        target_error_events: a.target_errors,
        channel: ch,
        ensemble: ens.clone(),
        n: a.n,
        early_termination: a.early_termination,
    };
    let mut out = format!("{SIMULATION_CSV_HEADER}\n");
    for decoder in decoders {
        let result = monte_carlo(&cfg, decoder)?;
        log::info!("{decoder}: {} trials in {:.2} s", result.trials, result.wall_time_secs);
        result.write_csv_rows(&ch, seed, &mut out);
    }
    Ok(out)
}

fn cmd_tree_oracle(a: &TreeOracleArgs) -> CliResult<String> {
    let ch = parse_channel(&a.channel)?;
    let perspective = match a.perspective {
        TreePerspective::Message => Perspective::Message,
        TreePerspective::Node => Perspective::Node,
    };
    let tree = build_tree_code_with(a.dv, a.dc, a.levels, perspective)?;
    let errors = exact_root_errors(&tree, &ch)?;
    let profile = tree.weight_profile();
    let record = json!({
        "d_v": a.dv,
        "d_c": a.dc,
        "levels": a.levels,
        "channel": ch.to_string(),
        "p_ms": errors.ms,
        "p_sp": errors.sp,
        "union_bound": tree.union_bound(ch.bhattacharyya()),
        "|C_r|": profile.values().sum::<usize>(),
        "weight_profile": profile.iter().map(|(w, c)| (w.to_string(), json!(c))).collect::<serde_json::Map<_, _>>(),
    });
    Ok(format!("{}\n", serde_json::to_string_pretty(&record).unwrap()))
}

fn cmd_enumerate(a: &EnumerateArgs, ens: &Ensemble) -> CliResult<String> {
    let excluded = weight_enumerator(ens, a.level, a.max_weight, false)?;
    let rooted = weight_enumerator(ens, a.level, a.max_weight, true)?;
    if excluded.truncated || rooted.truncated {
        log::warn!("weights above {} were dropped; raise --max-weight", a.max_weight);
    }
    let mut out = String::from("weight,root_excluded,root_inclusive\n");
    for (w, (p, r)) in excluded.coeffs.iter().zip(&rooted.coeffs).enumerate() {
        if *p != 0.0 || *r != 0.0 {
            out.push_str(&format!("{w},{p},{r}\n"));
        }
    }
    Ok(out)
}

fn execute(cmd: &Command, ens: Option<&Ensemble>, seed: Option<u64>) -> CliResult<String> {
    let ens = || ens.ok_or_else(|| CliError::Usage("missing ensemble".into()));
    match cmd {
        Command::Bounds(a) => cmd_bounds(a, ens()?),
        Command::Threshold(a) => cmd_threshold(a, ens()?),
        Command::De(a) => cmd_de(a, ens()?),
        Command::Simulate(a) => cmd_simulate(a, ens()?, seed.unwrap_or_default()),
        Command::TreeOracle(a) => cmd_tree_oracle(a),
        Command::Enumerate(a) => cmd_enumerate(a, ens()?),
    }
}

fn clock_seed() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_nanos() as u64)
        .unwrap_or(0)
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }

    let (command, ensemble, seed) = match (&cli.from_manifest, cli.command) {
        (Some(path), _) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
            let m: RunManifest = serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            let ens = match m.ensemble {
                Some(v) => Some(Ensemble::from_json(&v.to_string())?),
                None => None,
            };
            (m.params, ens, m.master_seed)
        }
        (None, Some(cmd)) => {
            let ens = cmd.ensemble_path().map(load_ensemble).transpose()?;
            let seed = match &cmd {
                Command::Simulate(a) => Some(a.seed.unwrap_or_else(clock_seed)),
                _ => None,
            };
            (cmd, ens, seed)
        }
        (None, None) => return Err(CliError::Usage("no subcommand given (see --help)".into())),
    };

    let output = execute(&command, ensemble.as_ref(), seed)?;
    let manifest = RunManifest {
        params: command,
        ensemble: ensemble.map(|e| serde_json::from_str(&e.to_json()).unwrap()),
        version: env!("CARGO_PKG_VERSION").to_string(),
        master_seed: seed,
        timestamp_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    let manifest = serde_json::to_string_pretty(&manifest).unwrap();

    let io_err = |p: &Path, e: std::io::Error| CliError::Runtime(format!("cannot write {}: {e}", p.display()));
    match &cli.out {
        Some(path) => {
            fs::write(path, &output).map_err(|e| io_err(path, e))?;
            let mut mpath = path.clone().into_os_string();
            mpath.push(".manifest.json");
            let mpath = PathBuf::from(mpath);
            fs::write(&mpath, manifest + "\n").map_err(|e| io_err(&mpath, e))?;
        }
        None => {
            std::io::stdout()
                .write_all(output.as_bytes())
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            eprintln!("{manifest}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
