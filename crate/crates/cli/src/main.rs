use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tracing::warn;
use uavnet::scenario::ModeConfig;
use uavnet::trace::TOOL_VERSION;
use uavnet::{alternating_optimize, run_sweep, Dims, Error, RunStatus, ScenarioConfig, SimulationTrace, SweepSpec, TraceFile};

const EXIT_INFEASIBLE: u8 = 1;
const EXIT_SCHEMA: u8 = 2;
const EXIT_OTHER: u8 = 3;

#[derive(Parser)]
#[command(name = "uavnet", version, about = "UAV relay chain simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write its trace.
    Run(Common),
    /// Run one simulation per value of a scenario field.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// FIELD=v1,v2,... (aliases: i_max_dbm, p_max_dbm, r_th_bps, ue_altitude_m, tau, dims, dt, relays; or a dotted path).
        #[arg(long)]
        sweep: String,
    },
    /// Check a scenario file without running it.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    /// Trace path; sweeps insert the field and value before the extension.
    #[arg(long, default_value = "trace.csv")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long, value_enum)]
    dims: Option<DimsArg>,
    #[arg(long, value_enum)]
    topology: Option<TopologyArg>,
    /// Outer iteration cap.
    #[arg(long)]
    iters: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    RecklessCoop,
    RecklessNoncoop,
    Smart,
}

#[derive(Clone, Copy, ValueEnum)]
enum DimsArg {
    Xy,
    Xz,
    Yz,
    Xyz,
}

#[derive(Clone, Copy, ValueEnum)]
enum TopologyArg {
    Line,
    Mesh,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Schema { .. } | Error::Range { .. } => EXIT_SCHEMA,
        Error::Infeasible { .. } | Error::InfeasibleExpansion { .. } => EXIT_INFEASIBLE,
        _ => EXIT_OTHER,
    }
}

fn load(common: &Common) -> Result<ScenarioConfig, Error> {
    let mut cfg = uavnet::scenario::load_config(&common.scenario)?;
    if let Some(seed) = common.seed {
        cfg.seed = Some(seed);
    }
    match common.mode {
        Some(Mode::RecklessCoop) => {
            cfg.mode = ModeConfig::Reckless;
            cfg.constraints.cooperative = true;
        }
        Some(Mode::RecklessNoncoop) => {
            cfg.mode = ModeConfig::Reckless;
            cfg.constraints.cooperative = false;
        }
        Some(Mode::Smart) => cfg.mode = ModeConfig::Smart,
        None => {}
    }
    if let Some(d) = common.dims {
        cfg.motion.dims = match d {
            DimsArg::Xy => Dims::Xy,
            DimsArg::Xz => Dims::Xz,
            DimsArg::Yz => Dims::Yz,
            DimsArg::Xyz => Dims::Xyz,
        };
    }
    if let Some(t) = common.topology {
        cfg.topology = match t {
            TopologyArg::Line => uavnet::flow::Topology::Line,
            TopologyArg::Mesh => uavnet::flow::Topology::Mesh,
        };
    }
    if let Some(n) = common.iters {
        cfg.solver.max_iters = n;
    }
    cfg.validate()?;
    if cfg.mode == ModeConfig::Smart {
        warn!("smart mode: interference caps and primary QoS floors are ignored, relays transmit at full power");
    }
    Ok(cfg)
}

fn status_code(trace: &SimulationTrace) -> u8 {
    match &trace.status {
        RunStatus::Failed { infeasible: true, .. } => EXIT_INFEASIBLE,
        RunStatus::Failed { infeasible: false, .. } => EXIT_OTHER,
        _ => 0,
    }
}

fn summary(trace: &SimulationTrace) -> String {
    let flow = trace.final_flow().map_or_else(|| "nan".to_string(), |f| format!("{f:.3}"));
    let mut s = format!(
        "final_flow_bps={flow} iterations={} converged={}",
        trace.iterations(),
        trace.converged()
    );
    if let RunStatus::Failed { message, .. } = &trace.status {
        s.push_str(&format!(" error=\"{message}\""));
    }
    s
}

fn write(cfg: &ScenarioConfig, trace: SimulationTrace, path: &Path) -> Result<SimulationTrace, Error> {
    let file = TraceFile {
        scenario_hash: cfg.hash(),
        seed: cfg.seed.unwrap_or_default(),
        tool_version: TOOL_VERSION.to_string(),
        trace,
    };
    uavnet::export_trace(&file, path)?;
    Ok(file.trace)
}

fn suffixed(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("trace");
    let name = match out.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}_{suffix}.{ext}"),
        None => format!("{stem}_{suffix}"),
    };
    out.with_file_name(name)
}

fn run(common: &Common) -> Result<u8, Error> {
    let cfg = load(common)?;
    let scenario = cfg.resolve()?;
    let trace = write(&cfg, alternating_optimize(&scenario), &common.out)?;
    println!("{}", summary(&trace));
    if let RunStatus::Failed { message, .. } = &trace.status {
        eprintln!("run failed: {message}");
    }
    Ok(status_code(&trace))
}

fn sweep(common: &Common, spec: &str) -> Result<u8, Error> {
    let base = load(common)?;
    let spec: SweepSpec = spec.parse()?;
    let mut code = 0;
    let mut runnable = Vec::new();
    for (k, cfg) in spec.expand(&base).into_iter().enumerate() {
        match cfg.and_then(|c| c.resolve().map(|s| (c, s))) {
            Ok((c, s)) => runnable.push((k, c, s)),
            Err(e) => {
                eprintln!("{}={}: {e}", spec.field, spec.values[k]);
                println!("{}={} skipped", spec.field, spec.values[k]);
                code = code.max(exit_code(&e));
            }
        }
    }
    let scenarios: Vec<_> = runnable.iter().map(|(_, _, s)| s.clone()).collect();
    for ((k, cfg, _), trace) in runnable.iter().zip(run_sweep(&scenarios)) {
        let path = suffixed(&common.out, &spec.suffix(*k));
        let trace = write(cfg, trace, &path)?;
        println!("{}={} {} trace={}", spec.field, spec.values[*k], summary(&trace), path.display());
        code = code.max(status_code(&trace));
    }
    Ok(code)
}

fn validate(common: &Common) -> Result<u8, Error> {
    let cfg = load(common)?;
    if cfg.seed.is_some() {
        cfg.resolve()?;
    }
    println!("ok scenario_sha256={}", cfg.hash());
    Ok(0)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(c) => run(c),
        Command::Sweep { common, sweep: s } => sweep(common, s),
        Command::Validate(c) => validate(c),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
