//! Browser bindings for three interactive views of the laboratory:
//! the growth of the counting function, the kernel sup-norm decay, and
//! the decay of the maximal modulated averages. Each entry point samples
//! one seeded path and returns a JSON document for the page to plot.

use randerg::averages::{average_series, lemma_final_bound, LacunarySchedule};
use randerg::dynamics::{DynSystem, Observable, State, GOLDEN_THETA};
use randerg::kernels::{kernel_scan_positive, HGridPolicy};
use randerg::selector::SelectorPath;
use randerg::stats::{log_log_slope, ols_slope};
use randerg::weights::{Weight, WeightNet};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct GrowthCurve {
    n: Vec<u64>,
    a: Vec<u64>,
    slope: f64,
    expected: f64,
    ratio_n: Vec<u64>,
    ratio: Vec<f64>,
}

fn growth_curve_impl(alpha: f64, n_max: u32, seed: u32) -> Result<String, String> {
    let path =
        SelectorPath::sample(alpha, n_max as u64, seed as u64).map_err(|e| e.to_string())?;
    let table = path.counting_table();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for n in 100..=table.len() as u64 {
        xs.push((n as f64).ln());
        ys.push((table.a(n) as f64).ln());
    }
    let slope = ols_slope(&xs, &ys).unwrap_or(f64::NAN);
    // Subsample the table geometrically for plotting.
    let mut n_pts = Vec::new();
    let mut a_pts = Vec::new();
    let mut n = 1u64;
    while n <= table.len() as u64 {
        n_pts.push(n);
        a_pts.push(table.a(n));
        n = (n as f64 * 1.25).ceil() as u64;
    }
    let sched = LacunarySchedule::new(1.5, n_max as u64).map_err(|e| e.to_string())?;
    let series = path
        .sllr_ratio_series(sched.values())
        .map_err(|e| e.to_string())?;
    let doc = GrowthCurve {
        n: n_pts,
        a: a_pts,
        slope,
        expected: 1.0 / (1.0 - alpha),
        ratio_n: series.iter().map(|&(n, _)| n).collect(),
        ratio: series.iter().map(|&(_, r)| r).collect(),
    };
    serde_json::to_string(&doc).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct KernelDecay {
    n: Vec<u64>,
    sup: Vec<f64>,
    threshold: Vec<f64>,
    ref_scale_sqrt: Vec<f64>,
    exponent: f64,
}

fn kernel_decay_impl(alpha: f64, n_exp_max: u32, seed: u32) -> Result<String, String> {
    let n_exp_max = n_exp_max.clamp(8, 17);
    let n_max = 1u64 << n_exp_max;
    let path = SelectorPath::sample(alpha, n_max, seed as u64).map_err(|e| e.to_string())?;
    let policy = HGridPolicy::default();
    let eps = (1.0 - 2.0 * alpha) / 12.0;
    let mut ns = Vec::new();
    let mut sups = Vec::new();
    let mut thr = Vec::new();
    let mut refs = Vec::new();
    for e in 8..=n_exp_max {
        let n = 1u64 << e;
        let scan =
            kernel_scan_positive(&path, Weight::One, Weight::One, n).map_err(|e| e.to_string())?;
        let sup = policy
            .h_values(n)
            .iter()
            .map(|&h| scan[(h - 1) as usize].norm())
            .fold(0.0, f64::max);
        ns.push(n);
        sups.push(sup);
        thr.push((n as f64).powf(1.0 - 2.0 * alpha - 2.0 * eps));
        refs.push((n as f64).powf((1.0 - 2.0 * alpha) / 2.0));
    }
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let exponent = log_log_slope(&xs, &sups).unwrap_or(f64::NAN);
    serde_json::to_string(&KernelDecay {
        n: ns,
        sup: sups,
        threshold: thr,
        ref_scale_sqrt: refs,
        exponent,
    })
    .map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct AverageDecay {
    n: Vec<u64>,
    max_selector: Vec<f64>,
    max_y: Vec<f64>,
    max_sigma: Vec<f64>,
    majorant: Vec<f64>,
    selector_slope: f64,
    sigma_slope: f64,
}

fn average_decay_impl(
    alpha: f64,
    n_exp_max: u32,
    seed: u32,
    net_points: u32,
) -> Result<String, String> {
    let n_exp_max = n_exp_max.clamp(6, 17);
    let n_max = 1u64 << n_exp_max;
    let path = SelectorPath::sample(alpha, n_max, seed as u64).map_err(|e| e.to_string())?;
    let net = WeightNet::subsampled(0.25, 2, n_max, net_points.clamp(1, 128))
        .map_err(|e| e.to_string())?;
    let weights = net.weights().map_err(|e| e.to_string())?;
    let sys = DynSystem::Rotation {
        theta: GOLDEN_THETA,
    };
    let f = Observable::coboundary(Observable::Character { k: 1 });
    let sched: Vec<u64> = (0..=n_exp_max).map(|e| 1u64 << e).collect();
    let rows = average_series(&path, &weights, &sys, &f, State::Circle(0.0), &sched)
        .map_err(|e| e.to_string())?;
    let mut majorant = Vec::with_capacity(rows.len());
    for row in &rows {
        majorant.push(lemma_final_bound(&path, 1.0, row.n).map_err(|e| e.to_string())?.total());
    }
    let ns: Vec<u64> = rows.iter().map(|r| r.n).collect();
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let sel: Vec<f64> = rows.iter().map(|r| r.max_selector).collect();
    let sig: Vec<f64> = rows.iter().map(|r| r.max_sigma).collect();
    serde_json::to_string(&AverageDecay {
        selector_slope: log_log_slope(&xs, &sel).unwrap_or(f64::NAN),
        sigma_slope: log_log_slope(&xs, &sig).unwrap_or(f64::NAN),
        n: ns,
        max_selector: sel,
        max_y: rows.iter().map(|r| r.max_y).collect(),
        max_sigma: sig,
        majorant,
    })
    .map_err(|e| e.to_string())
}

/// Counting-function growth and the `S_N/W_N` ratio for one seeded path.
#[wasm_bindgen]
pub fn growth_curve(alpha: f64, n_max: u32, seed: u32) -> Result<String, JsValue> {
    growth_curve_impl(alpha, n_max, seed).map_err(|e| JsValue::from_str(&e))
}

/// Kernel sup-norm decay along the dyadic schedule for one seeded path.
#[wasm_bindgen]
pub fn kernel_decay(alpha: f64, n_exp_max: u32, seed: u32) -> Result<String, JsValue> {
    kernel_decay_impl(alpha, n_exp_max, seed).map_err(|e| JsValue::from_str(&e))
}

/// Maximal modulated averages (selector, centered, deterministic parts)
/// over a weight net, with the sigma-part majorant.
#[wasm_bindgen]
pub fn average_decay(
    alpha: f64,
    n_exp_max: u32,
    seed: u32,
    net_points: u32,
) -> Result<String, JsValue> {
    average_decay_impl(alpha, n_exp_max, seed, net_points).map_err(|e| JsValue::from_str(&e))
}
