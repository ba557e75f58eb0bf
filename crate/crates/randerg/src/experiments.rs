//! Reproducible experiment drivers.
//!
//! Every experiment is a pure function of its configuration: trial `t`
//! draws its path from `trial_seed(master_seed, t)`, trials run on a work
//! queue of independent units, and results are canonicalized by trial
//! index before writing, so the emitted bytes never depend on the thread
//! count. Tabular results go to CSV with a commented header echoing the
//! configuration; tail estimates go to JSON lines.

use crate::averages::{
    average_series, lemma_final_bound, AverageRow, LacunarySchedule,
};
use crate::concentration::{
    borel_cantelli_sum, martingale_variance_cap, mc_tail, StatisticId, TailEstimate,
};
use crate::dynamics::{orbit_eval, DynSystem, Observable, State, GOLDEN_THETA};
use crate::error::{Error, Result};
use crate::kernels::{
    hl_maximal_on_window, kernel_scan_positive, lemma_tech_statistic, linearize,
    maximal_opnorm_probe, simple_term, tt_star_apply, HGridPolicy, ZSignal,
};
use crate::rng::{seeded_rng, trial_seed};
use crate::selector::{path_stream, SelectorPath};
use crate::stats::{log_log_slope, median, ols_slope};
use crate::weights::{Weight, WeightNet};
use rayon::prelude::*;
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Growth,
    NetCheck,
    KernelScan,
    LemmaTech,
    SimpleTerm,
    Converge,
    SigmaPart,
    Freedman,
    Opnorm,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Growth => "growth",
            Self::NetCheck => "net-check",
            Self::KernelScan => "kernel-scan",
            Self::LemmaTech => "lemma-tech",
            Self::SimpleTerm => "simple-term",
            Self::Converge => "converge",
            Self::SigmaPart => "sigma-part",
            Self::Freedman => "freedman",
            Self::Opnorm => "opnorm",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "growth" => Ok(Self::Growth),
            "net-check" => Ok(Self::NetCheck),
            "kernel-scan" => Ok(Self::KernelScan),
            "lemma-tech" => Ok(Self::LemmaTech),
            "simple-term" => Ok(Self::SimpleTerm),
            "converge" => Ok(Self::Converge),
            "sigma-part" => Ok(Self::SigmaPart),
            "freedman" => Ok(Self::Freedman),
            "opnorm" => Ok(Self::Opnorm),
            other => Err(Error::Config(format!("unknown experiment `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemKind {
    Rotation,
    Doubling,
    Cyclic,
}

/// Everything an experiment run depends on.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub alpha: f64,
    pub rho: f64,
    pub n_max: u64,
    /// Schedule points below this are dropped from the emitted rows.
    pub n_min: u64,
    pub master_seed: u64,
    pub trials: u64,
    pub delta: f64,
    pub m_max: u32,
    pub kappa: f64,
    /// Points per covered interval in experiment nets.
    pub net_points: u32,
    pub system: SystemKind,
    pub theta: f64,
    pub cyclic_m: u32,
    pub observable_k: i64,
    pub coboundary: bool,
    /// Number of sample states the diagnostics average over.
    pub states: u32,
    pub threads: u32,
    /// Output destination; `-` is standard output.
    pub out: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::Growth,
            alpha: 0.3,
            rho: 2.0,
            n_max: 1 << 16,
            n_min: 1,
            master_seed: 1,
            trials: 20,
            delta: 0.25,
            m_max: 2,
            kappa: 0.5,
            net_points: 16,
            system: SystemKind::Rotation,
            theta: GOLDEN_THETA,
            cyclic_m: 64,
            observable_k: 1,
            coboundary: true,
            states: 64,
            threads: 0,
            out: "-".into(),
        }
    }
}

impl ExperimentConfig {
    pub fn dyn_system(&self) -> DynSystem {
        match self.system {
            SystemKind::Rotation => DynSystem::Rotation { theta: self.theta },
            SystemKind::Doubling => DynSystem::Doubling,
            SystemKind::Cyclic => DynSystem::Cyclic { m: self.cyclic_m },
        }
    }

    pub fn observable(&self) -> Observable {
        let base = Observable::Character {
            k: self.observable_k,
        };
        if self.coboundary {
            Observable::coboundary(base)
        } else {
            base
        }
    }

    /// The states the diagnostics sample.
    pub fn sample_states(&self) -> Vec<State> {
        match self.system {
            SystemKind::Cyclic => (0..self.states.min(self.cyclic_m))
                .map(|i| State::Residue(i % self.cyclic_m))
                .collect(),
            _ => (0..self.states)
                .map(|i| State::Circle((i as f64 + 0.5) / self.states as f64))
                .collect(),
        }
    }

    /// Canonical one-line echo of the configuration.
    pub fn echo(&self) -> String {
        let sys = match self.system {
            SystemKind::Rotation => format!("rotation theta={}", self.theta),
            SystemKind::Doubling => "doubling".to_string(),
            SystemKind::Cyclic => format!("cyclic m={}", self.cyclic_m),
        };
        format!(
            "experiment={} alpha={} rho={} n_max={} n_min={} master_seed={} trials={} delta={} m_max={} kappa={} net_points={} system={} k={} coboundary={} states={} threads={}",
            self.experiment.name(),
            self.alpha,
            self.rho,
            self.n_max,
            self.n_min,
            self.master_seed,
            self.trials,
            self.delta,
            self.m_max,
            self.kappa,
            self.net_points,
            sys,
            self.observable_k,
            self.coboundary,
            self.states,
            self.threads
        )
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(Error::Config(format!(
                "alpha = {} must lie in (0, 1/2)",
                self.alpha
            )));
        }
        if !(self.rho > 1.0) {
            return Err(Error::Config(format!(
                "rho = {} must exceed 1 (constant of lacunarity)",
                self.rho
            )));
        }
        if self.trials < 1 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.n_max < 1 {
            return Err(Error::Config("n_max must be at least 1".into()));
        }
        if self.states < 1 {
            return Err(Error::Config("states must be at least 1".into()));
        }
        if !(self.delta > 0.0 && self.delta <= 0.5) {
            return Err(Error::Config(format!(
                "delta = {} must lie in (0, 1/2]",
                self.delta
            )));
        }
        if self.kappa <= 0.0 {
            return Err(Error::Config("kappa must be positive".into()));
        }
        Ok(())
    }
}

/// Parse a plain-text key=value configuration document. Unknown keys are
/// rejected by name; missing keys take defaults.
pub fn validate_config(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected key=value, got `{line}`", lineno + 1))
        })?;
        let key = key.trim();
        let value = value.trim();
        let parse_err =
            |e: &dyn std::fmt::Display| Error::Config(format!("line {}: bad {key}: {e}", lineno + 1));
        match key {
            "experiment" => cfg.experiment = ExperimentKind::parse(value)?,
            "alpha" => cfg.alpha = value.parse().map_err(|e| parse_err(&e))?,
            "rho" => cfg.rho = value.parse().map_err(|e| parse_err(&e))?,
            "n_max" | "nmax" => cfg.n_max = value.parse().map_err(|e| parse_err(&e))?,
            "n_min" | "nmin" => cfg.n_min = value.parse().map_err(|e| parse_err(&e))?,
            "master_seed" | "seed" => {
                cfg.master_seed = value.parse().map_err(|e| parse_err(&e))?
            }
            "trials" => cfg.trials = value.parse().map_err(|e| parse_err(&e))?,
            "delta" => cfg.delta = value.parse().map_err(|e| parse_err(&e))?,
            "m_max" | "m" => cfg.m_max = value.parse().map_err(|e| parse_err(&e))?,
            "kappa" => cfg.kappa = value.parse().map_err(|e| parse_err(&e))?,
            "net_points" => cfg.net_points = value.parse().map_err(|e| parse_err(&e))?,
            "system" => {
                cfg.system = match value {
                    "rotation" => SystemKind::Rotation,
                    "doubling" => SystemKind::Doubling,
                    "cyclic" => SystemKind::Cyclic,
                    other => {
                        return Err(Error::Config(format!(
                            "line {}: unknown system `{other}`",
                            lineno + 1
                        )))
                    }
                }
            }
            "theta" => cfg.theta = value.parse().map_err(|e| parse_err(&e))?,
            "cyclic_m" => cfg.cyclic_m = value.parse().map_err(|e| parse_err(&e))?,
            "k" | "observable_k" => {
                cfg.observable_k = value.parse().map_err(|e| parse_err(&e))?
            }
            "coboundary" => {
                cfg.coboundary = match value {
                    "true" | "1" | "yes" => true,
                    "false" | "0" | "no" => false,
                    other => {
                        return Err(Error::Config(format!(
                            "line {}: bad coboundary flag `{other}`",
                            lineno + 1
                        )))
                    }
                }
            }
            "states" => cfg.states = value.parse().map_err(|e| parse_err(&e))?,
            "threads" => cfg.threads = value.parse().map_err(|e| parse_err(&e))?,
            "out" => cfg.out = value.to_string(),
            other => {
                return Err(Error::Config(format!(
                    "line {}: unknown config key `{other}`",
                    lineno + 1
                )))
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Tabular experiment result, ready for CSV.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub experiment: ExperimentKind,
    pub config_echo: String,
    pub headers: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub summary: Vec<(String, String)>,
    /// JSON-lines payload (tail experiments).
    pub jsonl: Vec<String>,
}

impl ExperimentOutput {
    /// Render the CSV document (schema comment, header, rows, summary).
    /// `wall_ms`, when present, is always the final column so rerun
    /// comparisons can strip it.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# randerg {} schema=1", self.experiment.name());
        let _ = writeln!(out, "# config: {}", self.config_echo);
        if !self.jsonl.is_empty() {
            for line in &self.jsonl {
                let _ = writeln!(out, "{line}");
            }
        } else {
            let _ = writeln!(out, "{}", self.headers.join(","));
            for row in &self.rows {
                let _ = writeln!(out, "{}", row.join(","));
            }
        }
        for (k, v) in &self.summary {
            let _ = writeln!(out, "# summary {k}={v}");
        }
        out
    }
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

/// Run trials in parallel, canonicalize by trial index.
fn per_trial<T: Send>(
    cfg: &ExperimentConfig,
    job: impl Fn(u64, u64) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let run = || -> Result<Vec<T>> {
        (0..cfg.trials)
            .into_par_iter()
            .map(|t| job(t, trial_seed(cfg.master_seed, t)))
            .collect()
    };
    if cfg.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads as usize)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(run)
    } else {
        run()
    }
}

fn schedule_points(cfg: &ExperimentConfig) -> Result<Vec<u64>> {
    Ok(LacunarySchedule::new(cfg.rho, cfg.n_max)?
        .values()
        .iter()
        .copied()
        .filter(|&n| n >= cfg.n_min)
        .collect())
}

// ---------------------------------------------------------------------------
// growth
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct GrowthOutcome {
    pub slopes: Vec<f64>,
    pub median_slope: f64,
    pub expected_exponent: f64,
    pub output: ExperimentOutput,
}

/// Least-squares growth exponent of the counting function per seed.
pub fn run_growth(cfg: &ExperimentConfig) -> Result<GrowthOutcome> {
    cfg.validate()?;
    let results = per_trial(cfg, |t, seed| {
        let path = SelectorPath::sample(cfg.alpha, cfg.n_max, seed)?;
        let table = path.counting_table();
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for n in 100..=table.len() as u64 {
            xs.push((n as f64).ln());
            ys.push((table.a(n) as f64).ln());
        }
        let slope = ols_slope(&xs, &ys).ok_or(Error::EmptyDomain(
            "fewer than two selected integers past n = 100",
        ))?;
        Ok((t, seed, table.len() as u64, slope))
    })?;
    let slopes: Vec<f64> = results.iter().map(|r| r.3).collect();
    let median_slope = median(&slopes);
    let expected = 1.0 / (1.0 - cfg.alpha);
    let rows = results
        .iter()
        .map(|&(t, seed, count, slope)| {
            vec![t.to_string(), seed.to_string(), count.to_string(), fmt(slope)]
        })
        .collect();
    let output = ExperimentOutput {
        experiment: cfg.experiment,
        config_echo: cfg.echo(),
        headers: vec!["trial", "seed", "selected", "slope"],
        rows,
        summary: vec![
            ("median_slope".into(), fmt(median_slope)),
            ("expected_exponent".into(), fmt(expected)),
        ],
        jsonl: Vec::new(),
    };
    Ok(GrowthOutcome {
        slopes,
        median_slope,
        expected_exponent: expected,
        output,
    })
}

// ---------------------------------------------------------------------------
// net-check
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct NetCheckOutcome {
    pub net_points: u128,
    pub c_delta: f64,
    pub guaranteed_error: f64,
    pub max_measured_error: f64,
    pub within_recorded_budget: bool,
    pub within_unit_budget: bool,
    pub output: ExperimentOutput,
}

/// Certify a net: random exponents against the exact scan error.
pub fn run_net_check(cfg: &ExperimentConfig) -> Result<NetCheckOutcome> {
    net_check_inner(cfg, None)
}

/// Same, but against a net loaded from CSV.
pub fn run_net_check_on(cfg: &ExperimentConfig, net: WeightNet) -> Result<NetCheckOutcome> {
    net_check_inner(cfg, Some(net))
}

fn net_check_inner(cfg: &ExperimentConfig, net: Option<WeightNet>) -> Result<NetCheckOutcome> {
    cfg.validate()?;
    let net = match net {
        Some(n) => n,
        None => WeightNet::build(cfg.delta, cfg.m_max, cfg.n_max, cfg.kappa)?,
    };
    let mut rng = seeded_rng(trial_seed(cfg.master_seed, 0));
    use rand::Rng;
    let mut rows = Vec::new();
    let mut max_err = 0.0f64;
    let lo_frac = net.delta();
    let hi_frac = 1.0 - net.delta();
    for t in 0..cfg.trials {
        let m = rng.gen_range(1..=net.m_max());
        let c = m as f64 + rng.gen_range(lo_frac..=hi_frac);
        let (c0, err) = net.approx_error(c)?;
        max_err = max_err.max(err);
        rows.push(vec![
            t.to_string(),
            fmt(c),
            fmt(c0),
            fmt(err),
            fmt(net.guaranteed_error()),
        ]);
    }
    let within_recorded = net.within_budget(net.c_delta() * (1.0 + 1e-12));
    let within_unit = net.within_budget(1.0);
    let output = ExperimentOutput {
        experiment: cfg.experiment,
        config_echo: cfg.echo(),
        headers: vec!["trial", "c", "c0", "measured_err", "guaranteed_err"],
        rows,
        summary: vec![
            ("points".into(), net.len().to_string()),
            ("c_delta".into(), fmt(net.c_delta())),
            ("guaranteed_error".into(), fmt(net.guaranteed_error())),
            ("max_measured_error".into(), fmt(max_err)),
            ("within_recorded_budget".into(), within_recorded.to_string()),
            ("within_unit_budget".into(), within_unit.to_string()),
        ],
        jsonl: Vec::new(),
    };
    Ok(NetCheckOutcome {
        net_points: net.len(),
        c_delta: net.c_delta(),
        guaranteed_error: net.guaranteed_error(),
        max_measured_error: max_err,
        within_recorded_budget: within_recorded,
        within_unit_budget: within_unit,
        output,
    })
}

// ---------------------------------------------------------------------------
// kernel-scan / lemma-tech / simple-term
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct KernelScanOutcome {
    pub schedule: Vec<u64>,
    /// `sups[i][j]` = sup over the shift grid at schedule point `j`, trial `i`.
    pub sups: Vec<Vec<f64>>,
    pub median_sups: Vec<f64>,
    pub fitted_exponent: f64,
    /// Exceedance frequency of `N^{1-2alpha-2eps}` per schedule point.
    pub exceedance: Vec<f64>,
    pub epsilon: f64,
    pub output: ExperimentOutput,
}

/// Kernel sup-norm scan at `b = b' = 1` along the schedule.
pub fn run_kernel_scan(cfg: &ExperimentConfig) -> Result<KernelScanOutcome> {
    run_kernel_scan_policy(cfg, HGridPolicy::default())
}

/// Scan with an explicit shift-grid policy.
pub fn run_kernel_scan_policy(
    cfg: &ExperimentConfig,
    policy: HGridPolicy,
) -> Result<KernelScanOutcome> {
    cfg.validate()?;
    let sched = schedule_points(cfg)?;
    let eps = (1.0 - 2.0 * cfg.alpha) / 12.0;
    let results = per_trial(cfg, |t, seed| {
        let path = SelectorPath::sample(cfg.alpha, cfg.n_max, seed)?;
        let mut sups = Vec::with_capacity(sched.len());
        for &n in &sched {
            let scan = kernel_scan_positive(&path, Weight::One, Weight::One, n)?;
            let sup = policy
                .h_values(n)
                .iter()
                .map(|&h| scan[(h - 1) as usize].norm())
                .fold(0.0, f64::max);
            sups.push(sup);
        }
        Ok((t, seed, sups))
    })?;
    let sups: Vec<Vec<f64>> = results.iter().map(|r| r.2.clone()).collect();
    let median_sups: Vec<f64> = (0..sched.len())
        .map(|j| median(&sups.iter().map(|s| s[j]).collect::<Vec<_>>()))
        .collect();
    let xs: Vec<f64> = sched.iter().map(|&n| n as f64).collect();
    let fitted = log_log_slope(&xs, &median_sups).unwrap_or(f64::NAN);
    let exceedance: Vec<f64> = (0..sched.len())
        .map(|j| {
            let thr = (sched[j] as f64).powf(1.0 - 2.0 * cfg.alpha - 2.0 * eps);
            sups.iter().filter(|s| s[j] >= thr).count() as f64 / sups.len() as f64
        })
        .collect();
    let mut rows = Vec::new();
    for &(t, seed, ref s) in results.iter() {
        for (j, &n) in sched.iter().enumerate() {
            rows.push(vec![
                t.to_string(),
                seed.to_string(),
                fmt(cfg.alpha),
                n.to_string(),
                "0".into(),
                "0".into(),
                fmt(s[j]),
                fmt((n as f64).powf(1.0 - 2.0 * cfg.alpha)),
                fmt(fitted),
            ]);
        }
    }
    let mut summary = vec![
        ("fitted_exponent".into(), fmt(fitted)),
        ("epsilon".into(), fmt(eps)),
    ];
    for (j, &n) in sched.iter().enumerate() {
        summary.push((format!("median_sup_{n}"), fmt(median_sups[j])));
        summary.push((format!("exceedance_{n}"), fmt(exceedance[j])));
    }
    let output = ExperimentOutput {
        experiment: cfg.experiment,
        config_echo: cfg.echo(),
        headers: vec![
            "trial", "seed", "alpha", "N", "b_index", "bp_index", "sup_abs_K", "ref_scale",
            "exponent_fit",
        ],
        rows,
        summary,
        jsonl: Vec::new(),
    };
    Ok(KernelScanOutcome {
        schedule: sched,
        sups,
        median_sups,
        fitted_exponent: fitted,
        exceedance,
        epsilon: eps,
        output,
    })
}

#[derive(Debug, Clone)]
pub struct LemmaTechOutcome {
    pub schedule: Vec<u64>,
    /// Exceedance frequency of `N^{1-2alpha}` per schedule point.
    pub exceedance: Vec<f64>,
    pub output: ExperimentOutput,
}

pub fn run_lemma_tech(cfg: &ExperimentConfig) -> Result<LemmaTechOutcome> {
    cfg.validate()?;
    let sched = schedule_points(cfg)?;
    let results = per_trial(cfg, |t, seed| {
        let path = SelectorPath::sample(cfg.alpha, cfg.n_max, seed)?;
        let mut stats = Vec::with_capacity(sched.len());
        for &n in &sched {
            stats.push(lemma_tech_statistic(&path, n)?);
        }
        Ok((t, seed, stats))
    })?;
    let mut rows = Vec::new();
    let mut exceed = vec![0u64; sched.len()];
    for &(t, seed, ref stats) in &results {
        for (j, &n) in sched.iter().enumerate() {
            let thr = (n as f64).powf(1.0 - 2.0 * cfg.alpha);
            let hit = stats[j] >= thr;
            if hit {
                exceed[j] += 1;
            }
            rows.push(vec![
                t.to_string(),
                seed.to_string(),
                n.to_string(),
                fmt(stats[j]),
                fmt(thr),
                (hit as u8).to_string(),
            ]);
        }
    }
    let exceedance: Vec<f64> = exceed
        .iter()
        .map(|&e| e as f64 / results.len() as f64)
        .collect();
    let mut summary = Vec::new();
    for (j, &n) in sched.iter().enumerate() {
        summary.push((format!("exceedance_{n}"), fmt(exceedance[j])));
    }
    let output = ExperimentOutput {
        experiment: cfg.experiment,
        config_echo: cfg.echo(),
        headers: vec!["trial", "seed", "N", "statistic", "threshold", "exceeded"],
        rows,
        summary,
        jsonl: Vec::new(),
    };
    Ok(LemmaTechOutcome {
        schedule: sched,
        exceedance,
        output,
    })
}

#[derive(Debug, Clone)]
pub struct SimpleTermOutcome {
    pub schedule: Vec<u64>,
    /// `simple_term(N) * N^{1-alpha}` per trial and schedule point.
    pub scaled: Vec<Vec<f64>>,
    pub min_scaled: f64,
    pub max_scaled: f64,
    pub output: ExperimentOutput,
}

pub fn run_simple_term(cfg: &ExperimentConfig) -> Result<SimpleTermOutcome> {
    cfg.validate()?;
    let sched = schedule_points(cfg)?;
    let results = per_trial(cfg, |t, seed| {
        let path = SelectorPath::sample(cfg.alpha, cfg.n_max, seed)?;
        let mut vals = Vec::with_capacity(sched.len());
        for &n in &sched {
            let st = simple_term(&path, n)?;
            vals.push(st * (n as f64).powf(1.0 - cfg.alpha));
        }
        Ok((t, seed, vals))
    })?;
    let scaled: Vec<Vec<f64>> = results.iter().map(|r| r.2.clone()).collect();
    let mut rows = Vec::new();
    for &(t, seed, ref vals) in &results {
        for (j, &n) in sched.iter().enumerate() {
            rows.push(vec![
                t.to_string(),
                seed.to_string(),
                n.to_string(),
                fmt(vals[j]),
            ]);
        }
    }
    let min_scaled = scaled
        .iter()
        .flatten()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let max_scaled = scaled.iter().flatten().copied().fold(0.0, f64::max);
    let output = ExperimentOutput {
        experiment: cfg.experiment,
        config_echo: cfg.echo(),
        headers: vec!["trial", "seed", "N", "scaled_simple_term"],
        rows,
        summary: vec![
            ("min_scaled".into(), fmt(min_scaled)),
            ("max_scaled".into(), fmt(max_scaled)),
        ],
        jsonl: Vec::new(),
    };
    Ok(SimpleTermOutcome {
        schedule: sched,
        scaled,
        min_scaled,
        max_scaled,
        output,
    })
}

// ---------------------------------------------------------------------------
// converge / sigma-part
// ---------------------------------------------------------------------------

/// Moduli of the averages are independent of the sample state exactly when
/// the observable is built from characters on a rotation: the state enters
/// through a unimodular factor.
fn state_invariant_modulus(sys: &DynSystem, f: &Observable) -> bool {
    fn character_based(f: &Observable) -> bool {
        match f {
            Observable::Character { .. } => true,
            Observable::Coboundary(h) => character_based(h),
            Observable::Table(_) => false,
        }
    }
    matches!(sys, DynSystem::Rotation { .. }) && character_based(f)
}

fn experiment_net(cfg: &ExperimentConfig) -> Result<Vec<Weight>> {
    let net = WeightNet::subsampled(cfg.delta, cfg.m_max, cfg.n_max, cfg.net_points)?;
    net.weights()
}

#[derive(Debug, Clone)]
pub struct ConvergeOutcome {
    pub schedule: Vec<u64>,
    /// Median over (trial, state) of the maximal selector-form average
    /// (`N^{1-alpha}` normalizer) per schedule point.
    pub median_max_selector: Vec<f64>,
    /// Same with the `S_N` normalizer.
    pub median_max_selector_count: Vec<f64>,
    /// Fraction of trials with `S_{n_max}/W_{n_max}` inside `[0.9, 1.1]`.
    pub sllr_within_band: f64,
    /// Sequence-form maximal averages keyed by number of selected terms.
    pub seq_terms: Vec<u64>,
    pub median_seq_maximal: Vec<f64>,
    pub output: ExperimentOutput,
}

/// Decay of the maximal averages in both index conventions, plus the
/// `S_N/W_N` normalization diagnostic.
pub fn run_converge(cfg: &ExperimentConfig) -> Result<ConvergeOutcome> {
    cfg.validate()?;
    let sched = schedule_points(cfg)?;
    let weights = experiment_net(cfg)?;
    let sys = cfg.dyn_system();
    let f = cfg.observable();
    let states = if state_invariant_modulus(&sys, &f) {
        vec![cfg.sample_states()[0]]
    } else {
        cfg.sample_states()
    };
    // Sequence-form checkpoints: the same lacunary values, read as numbers
    // of selected terms.
    let seq_terms: Vec<u64> = sched.clone();
    let results = per_trial(cfg, |t, seed| {
        let path = SelectorPath::sample(cfg.alpha, cfg.n_max, seed)?;
        let mut per_state_rows: Vec<Vec<AverageRow>> = Vec::with_capacity(states.len());
        for &x in &states {
            per_state_rows.push(average_series(&path, &weights, &sys, &f, x, &sched)?);
        }
        let ratio = path.s(cfg.n_max) as f64 / path.w(cfg.n_max);
        // Sequence form through K selected terms: stream far enough to see
        // the K-th selected integer, then average over the selected orbit.
        let k_top = *seq_terms.last().unwrap();
        let mut positions = Vec::with_capacity(k_top as usize);
        let cap = ((1.0 - cfg.alpha) * k_top as f64)
            .powf(1.0 / (1.0 - cfg.alpha))
            .max(cfg.n_max as f64) as u64
            * 64;
        for step in path_stream(cfg.alpha, cap, seed)? {
            if step.x {
                positions.push(step.n);
                if positions.len() as u64 >= k_top {
                    break;
                }
            }
        }
        let mut seq_max = vec![f64::NAN; seq_terms.len()];
        if positions.len() as u64 >= k_top {
            let mut per_weight = vec![num_complex::Complex64::new(0.0, 0.0); weights.len()];
            let x0 = states[0];
            let mut next = 0usize;
            for (i, &pos) in positions.iter().enumerate() {
                let k = (i + 1) as u64;
                let fv = orbit_eval(&sys, &f, x0, pos)?;
                for (w, acc) in weights.iter().zip(per_weight.iter_mut()) {
                    *acc += w.value(k) * fv;
                }
                while next < seq_terms.len() && seq_terms[next] == k {
                    seq_max[next] = per_weight.iter().map(|z| z.norm()).fold(0.0, f64::max)
                        / k as f64;
                    next += 1;
                }
            }
        }
        Ok((t, seed, per_state_rows, ratio, seq_max))
    })?;
    let mut rows = Vec::new();
    let mut med_sel = Vec::new();
    let mut med_sel_count = Vec::new();
    for (j, &n) in sched.iter().enumerate() {
        let mut vals = Vec::new();
        let mut vals_count = Vec::new();
        for &(_, _, ref prs, _, _) in &results {
            for rs in prs {
                let r = &rs[j];
                vals.push(r.max_selector);
                // S_N-normalized maximal: rescale by N^{1-alpha}/S_N.
                vals_count
                    .push(r.max_selector * (n as f64).powf(1.0 - cfg.alpha) / r.s_n as f64);
            }
        }
        med_sel.push(median(&vals));
        med_sel_count.push(median(&vals_count));
    }
    let mut med_seq = Vec::new();
    for j in 0..seq_terms.len() {
        let vals: Vec<f64> = results
            .iter()
            .map(|r| r.4[j])
            .filter(|v| v.is_finite())
            .collect();
        med_seq.push(if vals.is_empty() {
            f64::NAN
        } else {
            median(&vals)
        });
    }
    let within = results
        .iter()
        .filter(|r| r.3 >= 0.9 && r.3 <= 1.1)
        .count() as f64
        / results.len() as f64;
    for &(t, seed, ref prs, ratio, ref seq) in &results {
        for (si, rs) in prs.iter().enumerate() {
            for r in rs {
                rows.push(vec![
                    t.to_string(),
                    seed.to_string(),
                    si.to_string(),
                    r.n.to_string(),
                    r.s_n.to_string(),
                    fmt(r.w_n),
                    fmt(r.max_selector),
                    fmt(r.max_y),
                    fmt(r.max_sigma),
                    fmt(ratio),
                ]);
            }
        }
        for (j, &k) in seq_terms.iter().enumerate() {
            rows.push(vec![
                t.to_string(),
                seed.to_string(),
                "seq".into(),
                k.to_string(),
                String::new(),
                String::new(),
                fmt(seq[j]),
                String::new(),
                String::new(),
                fmt(ratio),
            ]);
        }
    }
    let mut summary = vec![("sllr_within_band".into(), fmt(within))];
    for (j, &n) in sched.iter().enumerate() {
        summary.push((format!("median_max_selector_{n}"), fmt(med_sel[j])));
    }
    for (j, &k) in seq_terms.iter().enumerate() {
        summary.push((format!("median_seq_maximal_{k}"), fmt(med_seq[j])));
    }
    let output = ExperimentOutput {
        experiment: cfg.experiment,
        config_echo: cfg.echo(),
        headers: vec![
            "trial",
            "seed",
            "state",
            "N",
            "S_N",
            "W_N",
            "max_selector",
            "max_y",
            "max_sigma",
            "sllr_ratio",
        ],
        rows,
        summary,
        jsonl: Vec::new(),
    };
    Ok(ConvergeOutcome {
        schedule: sched,
        median_max_selector: med_sel,
        median_max_selector_count: med_sel_count,
        sllr_within_band: within,
        seq_terms,
        median_seq_maximal: med_seq,
        output,
    })
}

#[derive(Debug, Clone)]
pub struct SigmaPartOutcome {
    pub schedule: Vec<u64>,
    pub median_max_sigma: Vec<f64>,
    pub median_bound: Vec<f64>,
    /// Fitted log-log slope of the median sigma-part maximal itself.
    pub sigma_slope: f64,
    /// Fitted log-log slope of the median majorant.
    pub bound_slope: f64,
    /// `max over trials and N >= 2` of `sigma-part maximal / majorant`.
    pub recorded_c: f64,
    pub output: ExperimentOutput,
}

/// Sigma-part decay against the summation-by-parts majorant.
pub fn run_sigma_part(cfg: &ExperimentConfig) -> Result<SigmaPartOutcome> {
    cfg.validate()?;
    let sched = schedule_points(cfg)?;
    let weights = experiment_net(cfg)?;
    let sys = cfg.dyn_system();
    let f = cfg.observable();
    let h_bound = match &f {
        Observable::Coboundary(h) => h.bound(),
        other => other.bound(),
    };
    let states = if state_invariant_modulus(&sys, &f) {
        vec![cfg.sample_states()[0]]
    } else {
        cfg.sample_states()
    };
    let results = per_trial(cfg, |t, seed| {
        let path = SelectorPath::sample(cfg.alpha, cfg.n_max, seed)?;
        let mut max_sigma = vec![0.0f64; sched.len()];
        for &x in &states {
            let rows = average_series(&path, &weights, &sys, &f, x, &sched)?;
            for (j, r) in rows.iter().enumerate() {
                max_sigma[j] = max_sigma[j].max(r.max_sigma);
            }
        }
        let mut bounds = Vec::with_capacity(sched.len());
        for &n in &sched {
            bounds.push(lemma_final_bound(&path, h_bound, n)?.total());
        }
        Ok((t, seed, max_sigma, bounds))
    })?;
    let mut med_sigma = Vec::new();
    let mut med_bound = Vec::new();
    for j in 0..sched.len() {
        med_sigma.push(median(
            &results.iter().map(|r| r.2[j]).collect::<Vec<_>>(),
        ));
        med_bound.push(median(
            &results.iter().map(|r| r.3[j]).collect::<Vec<_>>(),
        ));
    }
    let xs: Vec<f64> = sched.iter().map(|&n| n as f64).collect();
    let sigma_slope = log_log_slope(&xs, &med_sigma).unwrap_or(f64::NAN);
    let bound_slope = log_log_slope(&xs, &med_bound).unwrap_or(f64::NAN);
    let mut recorded_c = 0.0f64;
    for r in &results {
        for (j, &n) in sched.iter().enumerate() {
            if n >= 2 && r.3[j] > 0.0 {
                recorded_c = recorded_c.max(r.2[j] / r.3[j]);
            }
        }
    }
    let mut rows = Vec::new();
    for &(t, seed, ref ms, ref bs) in &results {
        for (j, &n) in sched.iter().enumerate() {
            rows.push(vec![
                t.to_string(),
                seed.to_string(),
                n.to_string(),
                fmt(ms[j]),
                fmt(bs[j]),
            ]);
        }
    }
    let output = ExperimentOutput {
        experiment: cfg.experiment,
        config_echo: cfg.echo(),
        headers: vec!["trial", "seed", "N", "max_sigma_part", "majorant"],
        rows,
        summary: vec![
            ("sigma_slope".into(), fmt(sigma_slope)),
            ("bound_slope".into(), fmt(bound_slope)),
            ("recorded_c".into(), fmt(recorded_c)),
        ],
        jsonl: Vec::new(),
    };
    Ok(SigmaPartOutcome {
        schedule: sched,
        median_max_sigma: med_sigma,
        median_bound: med_bound,
        sigma_slope,
        bound_slope,
        recorded_c,
        output,
    })
}

// ---------------------------------------------------------------------------
// freedman
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct FreedmanOutcome {
    pub estimates: Vec<TailEstimate>,
    /// Whether every upper CI respected its bound (where the bound < 1).
    pub all_within_bound: bool,
    pub borel_cantelli: f64,
    pub output: ExperimentOutput,
}

/// Tail probabilities of the centered selector sum at thresholds
/// `{2, 3, 4} sqrt(b)` against the martingale bound.
pub fn run_freedman(cfg: &ExperimentConfig) -> Result<FreedmanOutcome> {
    cfg.validate()?;
    let b = martingale_variance_cap(cfg.alpha, cfg.n_max);
    let mut estimates = Vec::new();
    for mult in [2.0, 3.0, 4.0] {
        let a = mult * b.sqrt();
        estimates.push(mc_tail(
            StatisticId::MartingaleSum,
            cfg.alpha,
            cfg.n_max,
            a,
            cfg.trials,
            cfg.master_seed,
        )?);
    }
    let all_within = estimates
        .iter()
        .all(|e| e.bound >= 1.0 || e.ci_high <= e.bound);
    let bc = borel_cantelli_sum(&estimates)?;
    let jsonl: Vec<String> = estimates
        .iter()
        .map(|e| serde_json::to_string(e).expect("serializable"))
        .collect();
    let output = ExperimentOutput {
        experiment: cfg.experiment,
        config_echo: cfg.echo(),
        headers: vec![],
        rows: vec![],
        summary: vec![
            ("all_within_bound".into(), all_within.to_string()),
            ("borel_cantelli_sum".into(), fmt(bc)),
            ("variance_cap".into(), fmt(b)),
        ],
        jsonl,
    };
    Ok(FreedmanOutcome {
        estimates,
        all_within_bound: all_within,
        borel_cantelli: bc,
        output,
    })
}

// ---------------------------------------------------------------------------
// opnorm
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct OpnormOutcome {
    pub schedule: Vec<u64>,
    pub median_estimates: Vec<f64>,
    pub fitted_slope: f64,
    /// Domination constants `C(N)` per trial (same order as schedule).
    pub domination_c: Vec<Vec<f64>>,
    /// max over trials of (max_N C) / (min_N C).
    pub worst_c_spread: f64,
    pub output: ExperimentOutput,
}

/// Operator-norm probes along the schedule plus the pointwise
/// Hardy–Littlewood domination constants of `T T*`.
pub fn run_opnorm(cfg: &ExperimentConfig) -> Result<OpnormOutcome> {
    cfg.validate()?;
    let sched = schedule_points(cfg)?;
    // Singleton-plus-net collection: the constant weight next to a small
    // subsample of the exponent intervals.
    let mut weights = vec![Weight::One];
    weights.extend(experiment_net(cfg)?);
    let eps = (1.0 - 2.0 * cfg.alpha) / 12.0;
    let probe_trials = 4u32;
    let results = per_trial(cfg, |t, seed| {
        let path = SelectorPath::sample(cfg.alpha, cfg.n_max, seed)?;
        let mut ests = Vec::with_capacity(sched.len());
        let mut doms = Vec::with_capacity(sched.len());
        for &n in &sched {
            let est = maximal_opnorm_probe(&path, &weights, n, probe_trials, seed)?;
            ests.push(est);
            // Domination check on a short random signal.
            let mut rng = seeded_rng(trial_seed(seed ^ 0xD0F1, n));
            let f = ZSignal::random_unit(0, 256, &mut rng);
            let part = linearize(&path, &weights, n, &f)?;
            let out = tt_star_apply(&path, &weights, &part, n, &f)?;
            let st = simple_term(&path, n)?;
            let (plo, phi) = part.window();
            let hl = hl_maximal_on_window(&f, plo, phi);
            let scale = (n as f64).powf(-2.0 * eps);
            let mut c = 0.0f64;
            for (x, v) in out.iter() {
                let excess = v.norm() - st * f.value(x).norm();
                let denom = scale * hl.value(x).re;
                if excess > 0.0 && denom > 0.0 {
                    c = c.max(excess / denom);
                }
            }
            doms.push(c);
        }
        Ok((t, seed, ests, doms))
    })?;
    let med: Vec<f64> = (0..sched.len())
        .map(|j| median(&results.iter().map(|r| r.2[j]).collect::<Vec<_>>()))
        .collect();
    let xs: Vec<f64> = sched.iter().map(|&n| n as f64).collect();
    let slope = log_log_slope(&xs, &med).unwrap_or(f64::NAN);
    let mut worst_spread = 0.0f64;
    for r in &results {
        let mx = r.3.iter().copied().fold(0.0f64, f64::max);
        let mn = r.3.iter().copied().fold(f64::INFINITY, f64::min);
        if mn > 0.0 {
            worst_spread = worst_spread.max(mx / mn);
        }
    }
    let mut rows = Vec::new();
    for &(t, seed, ref ests, ref doms) in &results {
        for (j, &n) in sched.iter().enumerate() {
            rows.push(vec![
                t.to_string(),
                seed.to_string(),
                n.to_string(),
                fmt(ests[j]),
                fmt(doms[j]),
            ]);
        }
    }
    let output = ExperimentOutput {
        experiment: cfg.experiment,
        config_echo: cfg.echo(),
        headers: vec!["trial", "seed", "N", "opnorm_estimate", "domination_c"],
        rows,
        summary: vec![
            ("fitted_slope".into(), fmt(slope)),
            ("worst_c_spread".into(), fmt(worst_spread)),
        ],
        jsonl: Vec::new(),
    };
    Ok(OpnormOutcome {
        schedule: sched,
        median_estimates: med,
        fitted_slope: slope,
        domination_c: results.iter().map(|r| r.3.clone()).collect(),
        worst_c_spread: worst_spread,
        output,
    })
}

/// Dispatch by configured experiment kind.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    Ok(match cfg.experiment {
        ExperimentKind::Growth => run_growth(cfg)?.output,
        ExperimentKind::NetCheck => run_net_check(cfg)?.output,
        ExperimentKind::KernelScan => run_kernel_scan(cfg)?.output,
        ExperimentKind::LemmaTech => run_lemma_tech(cfg)?.output,
        ExperimentKind::SimpleTerm => run_simple_term(cfg)?.output,
        ExperimentKind::Converge => run_converge(cfg)?.output,
        ExperimentKind::SigmaPart => run_sigma_part(cfg)?.output,
        ExperimentKind::Freedman => run_freedman(cfg)?.output,
        ExperimentKind::Opnorm => run_opnorm(cfg)?.output,
    })
}
