//! Closed-form large-deviation bounds and seeded Monte Carlo tail
//! estimation.
//!
//! The martingale tail bound in play is `2 exp(-a^2 / (2(a+b)))` for the
//! event `{ |sum Z_i| >= a, T_n <= b }`. Tail probabilities of the path
//! statistics are estimated over independent trials with exact
//! Clopper–Pearson intervals (the tails are tiny; a normal approximation
//! would be meaningless), and summed along lacunary schedules as the
//! desk-scale Borel–Cantelli surrogate.

use crate::error::{Error, Result};
use crate::kernels::{
    conditional_variance_all, kernel_scan_positive, lemma_tech_statistic, HGridPolicy,
};
use crate::rng::trial_seed;
use crate::selector::{sigma, SelectorPath};
use crate::stats::quantile;
use crate::weights::Weight;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

/// `2 exp(-a^2 / (2(a+b)))`.
pub fn freedman_bound(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::ParamDomain {
            name: "a",
            value: a,
            constraint: "(0, inf)",
        });
    }
    if !(b > 0.0) {
        return Err(Error::ParamDomain {
            name: "b",
            value: b,
            constraint: "(0, inf)",
        });
    }
    Ok(2.0 * (-a * a / (2.0 * (a + b))).exp())
}

/// Exact (Clopper–Pearson) two-sided binomial interval.
pub fn clopper_pearson(hits: u64, trials: u64, confidence: f64) -> (f64, f64) {
    assert!(trials > 0 && hits <= trials);
    assert!((0.0..1.0).contains(&(1.0 - confidence)));
    let alpha = 1.0 - confidence;
    let lo = if hits == 0 {
        0.0
    } else {
        Beta::new(hits as f64, (trials - hits + 1) as f64)
            .unwrap()
            .inverse_cdf(alpha / 2.0)
    };
    let hi = if hits == trials {
        1.0
    } else {
        Beta::new((hits + 1) as f64, (trials - hits) as f64)
            .unwrap()
            .inverse_cdf(1.0 - alpha / 2.0)
    };
    (lo, hi)
}

/// Which path statistic a tail experiment samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticId {
    /// `|sum_{n <= N} Y_n|`.
    MartingaleSum,
    /// `sup_h |K_N(h; 1, 1)|` over the default shift grid.
    KernelSup,
    /// The technical-lemma supremum statistic.
    LemmaTech,
    /// `|sum_{n <= N} (Y_n^2 - E Y_n^2)|` — the fluctuation of the
    /// simple-term numerator around its mean.
    SimpleTermExcess,
}

impl StatisticId {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "martingale_sum" => Ok(Self::MartingaleSum),
            "kernel_sup" => Ok(Self::KernelSup),
            "lemma_tech" => Ok(Self::LemmaTech),
            "simple_term_excess" => Ok(Self::SimpleTermExcess),
            other => Err(Error::Config(format!("unknown statistic id `{other}`"))),
        }
    }
}

/// Result of one tail experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailEstimate {
    pub statistic: StatisticId,
    pub threshold: f64,
    /// Variance cap `b` used in the attached bound.
    pub variance_cap: f64,
    pub n: u64,
    pub alpha: f64,
    pub trials: u64,
    pub hits: u64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Matching theoretical bound, capped at 1.
    pub bound: f64,
}

fn statistic_value(id: StatisticId, path: &SelectorPath, n: u64) -> Result<f64> {
    Ok(match id {
        StatisticId::MartingaleSum => {
            (path.s(n) as f64 - path.w(n)).abs() // sum Y_n = S_N - W_N exactly
        }
        StatisticId::KernelSup => {
            let scan = kernel_scan_positive(path, Weight::One, Weight::One, n)?;
            let grid = HGridPolicy::default().h_values(n);
            grid.iter()
                .map(|&h| scan[(h - 1) as usize].norm())
                .fold(0.0, f64::max)
        }
        StatisticId::LemmaTech => lemma_tech_statistic(path, n)?,
        StatisticId::SimpleTermExcess => {
            let mut acc = 0.0;
            for m in 1..=n {
                let s = path.sigma(m);
                acc += path.y(m) * path.y(m) - s * (1.0 - s);
            }
            acc.abs()
        }
    })
}

/// Deterministic variance envelope `sum sigma_n (1 - sigma_n)` — the
/// conditional-variance cap of the centered selector sum.
pub fn martingale_variance_cap(alpha: f64, n: u64) -> f64 {
    (1..=n)
        .map(|m| {
            let s = sigma(alpha, m);
            s * (1.0 - s)
        })
        .sum()
}

/// Estimate `P(statistic >= threshold)` over independent trials.
///
/// Trial `t` samples the path with seed `trial_seed(master_seed, t)`, so
/// runs are reproducible in any execution order and trial counts extend
/// prefix-compatibly. The attached bound is the martingale inequality with
/// `a = threshold` and a statistic-appropriate variance cap (deterministic
/// envelopes where available, the 95th percentile of the measured
/// conditional variances for the kernel statistic), with the crude union
/// factor over shifts for the supremum statistics.
pub fn mc_tail(
    statistic: StatisticId,
    alpha: f64,
    n: u64,
    threshold: f64,
    trials: u64,
    master_seed: u64,
) -> Result<TailEstimate> {
    if trials < 100 {
        return Err(Error::ParamDomain {
            name: "trials",
            value: trials as f64,
            constraint: "[100, inf)",
        });
    }
    let results: Vec<(f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<(f64, f64)> {
            let path = SelectorPath::sample(alpha, n, trial_seed(master_seed, t))?;
            let value = statistic_value(statistic, &path, n)?;
            let t_cap = if statistic == StatisticId::KernelSup {
                conditional_variance_all(&path, n)?
                    .into_iter()
                    .fold(0.0, f64::max)
            } else {
                0.0
            };
            Ok((value, t_cap))
        })
        .collect::<Result<Vec<_>>>()?;
    let hits = results.iter().filter(|(v, _)| *v >= threshold).count() as u64;
    let estimate = hits as f64 / trials as f64;
    let (ci_low, ci_high) = clopper_pearson(hits, trials, 0.99);
    let (variance_cap, union_factor) = match statistic {
        StatisticId::MartingaleSum => (martingale_variance_cap(alpha, n), 1.0),
        StatisticId::SimpleTermExcess => (
            (1..=n)
                .map(|m| {
                    let s = sigma(alpha, m);
                    (1.0 - 2.0 * s).powi(2) * s * (1.0 - s)
                })
                .sum(),
            1.0,
        ),
        StatisticId::KernelSup => {
            let caps: Vec<f64> = results.iter().map(|&(_, c)| c).collect();
            (quantile(&caps, 0.95), n as f64)
        }
        StatisticId::LemmaTech => (
            (1..=n)
                .map(|m| {
                    let s = sigma(alpha, m);
                    s * s
                })
                .sum(),
            n as f64,
        ),
    };
    let bound = (union_factor * freedman_bound(threshold, variance_cap)?).min(1.0);
    Ok(TailEstimate {
        statistic,
        threshold,
        variance_cap,
        n,
        alpha,
        trials,
        hits,
        estimate,
        ci_low,
        ci_high,
        bound,
    })
}

/// Sum of upper-CI tail estimates along a schedule — finite sums are the
/// desk-scale stand-in for the Borel–Cantelli argument.
pub fn borel_cantelli_sum(estimates: &[TailEstimate]) -> Result<f64> {
    if let Some(first) = estimates.first() {
        if estimates.iter().any(|e| e.statistic != first.statistic) {
            return Err(Error::Config(
                "borel-cantelli sum requires a single statistic id".into(),
            ));
        }
    }
    Ok(estimates.iter().map(|e| e.ci_high).sum())
}
