//! Command-line front end for the experiment drivers.
//!
//! Data goes to `--out` (`-` for standard output, the default); progress
//! and logging go to standard error. Any `--config` file is read first and
//! individual flags override it, so a run is fully described by one
//! key=value document.

use clap::{Args, Parser, Subcommand};
use randerg::error::{Error, Result};
use randerg::experiments::{self, ExperimentConfig, ExperimentKind, SystemKind};
use randerg::selector::SelectorPath;
use randerg::weights::WeightNet;
use std::io::Write;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "randerg", about = "Random modulated ergodic averaging laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Selection exponent; sigma_n = n^{-alpha}.
    #[arg(long)]
    alpha: Option<f64>,
    /// Constant of lacunarity for the N-schedule.
    #[arg(long)]
    rho: Option<f64>,
    /// Path horizon.
    #[arg(long)]
    nmax: Option<u64>,
    /// Drop schedule points below this from the output.
    #[arg(long)]
    nmin: Option<u64>,
    /// Master seed; trial t derives its own stream from (seed, t).
    #[arg(long)]
    seed: Option<u64>,
    /// Number of trials / sampled paths.
    #[arg(long)]
    trials: Option<u64>,
    /// Worker threads (0 = default pool).
    #[arg(long)]
    threads: Option<u32>,
    /// Output path, `-` for stdout (also settable as `out` in --config).
    #[arg(long)]
    out: Option<String>,
    /// key=value configuration document; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Net interval margin delta.
    #[arg(long)]
    delta: Option<f64>,
    /// Largest integer part M of the exponent intervals.
    #[arg(long, value_name = "M")]
    m_max: Option<u32>,
    /// Net error exponent kappa.
    #[arg(long)]
    kappa: Option<f64>,
    /// Points per interval in experiment nets.
    #[arg(long)]
    net_points: Option<u32>,
    /// System kind: rotation, doubling or cyclic.
    #[arg(long)]
    system: Option<String>,
    /// Rotation angle.
    #[arg(long)]
    theta: Option<f64>,
    /// Modulus of the cyclic system.
    #[arg(long)]
    cyclic_m: Option<u32>,
    /// Character frequency of the observable.
    #[arg(long)]
    k: Option<i64>,
    /// Use the raw character instead of its coboundary.
    #[arg(long)]
    no_coboundary: bool,
    /// Number of sample states.
    #[arg(long)]
    states: Option<u32>,
}

#[derive(Subcommand)]
enum Command {
    /// Growth exponent of the counting function.
    Growth(Common),
    /// Certify a weight net against exact scan errors.
    NetCheck {
        #[command(flatten)]
        common: Common,
        /// Verify a previously exported net instead of building one.
        #[arg(long)]
        net_file: Option<PathBuf>,
        /// Also write the net serialization here.
        #[arg(long)]
        emit_net: Option<PathBuf>,
    },
    /// Kernel sup-norm scan at b = b' = 1.
    KernelScan(Common),
    /// Technical-lemma supremum statistic along the schedule.
    LemmaTech(Common),
    /// Scaled diagonal term along the schedule.
    SimpleTerm(Common),
    /// Decay of the maximal averages and the S_N/W_N diagnostic.
    Converge(Common),
    /// Sigma-part decay against its summation-by-parts majorant.
    SigmaPart(Common),
    /// Martingale tail probabilities against the closed-form bound.
    Freedman(Common),
    /// Operator-norm probes and Hardy-Littlewood domination constants.
    Opnorm(Common),
    /// Sample one selector path and export it for replay.
    Path {
        #[command(flatten)]
        common: Common,
        /// Also write the (N, S_N, W_N, a_N) series as CSV here.
        #[arg(long)]
        series_out: Option<PathBuf>,
    },
}

fn build_config(kind: ExperimentKind, common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => experiments::validate_config(&std::fs::read_to_string(path)?)?,
        None => ExperimentConfig::default(),
    };
    cfg.experiment = kind;
    if let Some(v) = common.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = common.rho {
        cfg.rho = v;
    }
    if let Some(v) = common.nmax {
        cfg.n_max = v;
    }
    if let Some(v) = common.nmin {
        cfg.n_min = v;
    }
    if let Some(v) = common.seed {
        cfg.master_seed = v;
    }
    if let Some(v) = common.trials {
        cfg.trials = v;
    }
    if let Some(v) = common.threads {
        cfg.threads = v;
    }
    if let Some(v) = common.delta {
        cfg.delta = v;
    }
    if let Some(v) = common.m_max {
        cfg.m_max = v;
    }
    if let Some(v) = common.kappa {
        cfg.kappa = v;
    }
    if let Some(v) = common.net_points {
        cfg.net_points = v;
    }
    if let Some(sys) = &common.system {
        cfg.system = match sys.as_str() {
            "rotation" => SystemKind::Rotation,
            "doubling" => SystemKind::Doubling,
            "cyclic" => SystemKind::Cyclic,
            other => return Err(Error::Config(format!("unknown system `{other}`"))),
        };
    }
    if let Some(v) = common.theta {
        cfg.theta = v;
    }
    if let Some(v) = common.cyclic_m {
        cfg.cyclic_m = v;
    }
    if let Some(v) = common.k {
        cfg.observable_k = v;
    }
    if common.no_coboundary {
        cfg.coboundary = false;
    }
    if let Some(v) = common.states {
        cfg.states = v;
    }
    if let Some(v) = &common.out {
        cfg.out = v.clone();
    }
    // Re-validate after overrides.
    experiments::validate_config(&format!(
        "alpha={}\nrho={}\ndelta={}\nkappa={}",
        cfg.alpha, cfg.rho, cfg.delta, cfg.kappa
    ))?;
    Ok(cfg)
}

fn emit(out_spec: &str, data: &str) -> Result<()> {
    if out_spec == "-" {
        std::io::stdout().write_all(data.as_bytes())?;
    } else {
        std::fs::write(out_spec, data)?;
    }
    Ok(())
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Growth(c) => simple_run(ExperimentKind::Growth, &c),
        Command::KernelScan(c) => simple_run(ExperimentKind::KernelScan, &c),
        Command::LemmaTech(c) => simple_run(ExperimentKind::LemmaTech, &c),
        Command::SimpleTerm(c) => simple_run(ExperimentKind::SimpleTerm, &c),
        Command::Converge(c) => simple_run(ExperimentKind::Converge, &c),
        Command::SigmaPart(c) => simple_run(ExperimentKind::SigmaPart, &c),
        Command::Freedman(c) => simple_run(ExperimentKind::Freedman, &c),
        Command::Opnorm(c) => simple_run(ExperimentKind::Opnorm, &c),
        Command::NetCheck {
            common,
            net_file,
            emit_net,
        } => {
            let cfg = build_config(ExperimentKind::NetCheck, &common)?;
            eprintln!("net-check: {}", cfg.echo());
            let outcome = match net_file {
                Some(path) => {
                    let net = WeightNet::from_csv(&std::fs::read_to_string(&path)?)?;
                    experiments::run_net_check_on(&cfg, net)
                }
                None => experiments::run_net_check(&cfg),
            }?;
            if let Some(path) = emit_net {
                let net = WeightNet::build(cfg.delta, cfg.m_max, cfg.n_max, cfg.kappa)?;
                std::fs::write(&path, net.to_csv())?;
                eprintln!("net written to {}", path.display());
            }
            emit(&cfg.out, &outcome.output.to_csv())
        }
        Command::Path { common, series_out } => {
            let cfg = build_config(ExperimentKind::Growth, &common)?;
            eprintln!(
                "path: alpha={} n_max={} seed={}",
                cfg.alpha, cfg.n_max, cfg.master_seed
            );
            let path = SelectorPath::sample(cfg.alpha, cfg.n_max, cfg.master_seed)?;
            if let Some(series) = series_out {
                let sched: Vec<u64> =
                    randerg::averages::LacunarySchedule::new(cfg.rho, cfg.n_max)?
                        .values()
                        .to_vec();
                std::fs::write(&series, path.series_csv(&sched)?)?;
                eprintln!("series written to {}", series.display());
            }
            emit(&cfg.out, &path.export())
        }
    }
}

fn simple_run(kind: ExperimentKind, common: &Common) -> Result<()> {
    let cfg = build_config(kind, common)?;
    eprintln!("{}: {}", kind.name(), cfg.echo());
    let started = std::time::Instant::now();
    let output = experiments::run(&cfg)?;
    eprintln!(
        "{}: done in {:.1}s",
        kind.name(),
        started.elapsed().as_secs_f64()
    );
    emit(&cfg.out, &output.to_csv())
}

fn main() {
    if let Err(err) = run() {
        eprintln!("error: {err}");
        std::process::exit(1);
    }
}
