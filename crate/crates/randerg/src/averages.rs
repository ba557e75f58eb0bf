//! Modulated random ergodic averages.
//!
//! Two index conventions for the same object:
//!
//! * sequence form `(1/N) sum_{k <= N} b(k) f(T^{a_k} x)` over the selected
//!   integers `a_k`;
//! * selector form `(1/norm) sum_{n <= N} X_n b(S_{n-1} + 1) f(T^n x)`,
//!   with normalizer `S_N`, `W_N` or `N^{1-alpha}`.
//!
//! Since `X_n b(S_n) = X_n b(S_{n-1} + 1)`, the sequence form at `S_N`
//! terms equals the `S_N`-normalized selector form term for term. The
//! selector form splits exactly into its centered part (`Y_n` in place of
//! `X_n`) and its deterministic part (`sigma_n`), each normalized by
//! `N^{1-alpha}`. All three normalizations are first-class so each step of
//! the reduction chain can be tested on its own.

use crate::dynamics::{orbit_eval, DynSystem, Observable, State};
use crate::error::{Error, Result};
use crate::selector::{CountingTable, SelectorPath};
use crate::weights::{Weight, WeightNet};
use num_complex::Complex64;

/// Averaging times `floor(rho^k)`, deduplicated, capped at `n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct LacunarySchedule {
    rho: f64,
    values: Vec<u64>,
}

impl LacunarySchedule {
    pub fn new(rho: f64, n_max: u64) -> Result<Self> {
        if !(rho > 1.0) {
            return Err(Error::ParamDomain {
                name: "rho",
                value: rho,
                constraint: "(1, inf)",
            });
        }
        let mut values = Vec::new();
        let mut k = 0i32;
        loop {
            let v = rho.powi(k).floor();
            if !v.is_finite() || v > n_max as f64 {
                break;
            }
            let v = v as u64;
            if values.last() != Some(&v) {
                values.push(v);
            }
            k += 1;
        }
        Ok(Self { rho, values })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }
}

/// Normalizer of the selector-form average.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    /// Divide by `S_N`.
    SelectorCount,
    /// Divide by `W_N`.
    WeightSum,
    /// Divide by `N^{1-alpha}`.
    PowerLaw,
}

/// Which numerator the maximal average takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AverageForm {
    /// `X_n` weights, `N^{1-alpha}` normalizer.
    Selector,
    /// `Y_n` weights.
    YPart,
    /// `sigma_n` weights.
    SigmaPart,
}

fn check_horizon(path: &SelectorPath, n: u64) -> Result<()> {
    if n == 0 || n > path.n_max() {
        return Err(Error::Range {
            what: "N",
            got: n,
            limit_name: "n_max",
            limit: path.n_max(),
        });
    }
    Ok(())
}

/// `(1/N) sum_{k <= N} b(k) f(T^{a_k} x)` — the average along the selected
/// integers.
pub fn average_sequence_form(
    path: &SelectorPath,
    table: &CountingTable,
    weight: Weight,
    sys: &DynSystem,
    f: &Observable,
    x: State,
    n_terms: u64,
) -> Result<Complex64> {
    if n_terms == 0 || n_terms > table.len() as u64 {
        return Err(Error::Range {
            what: "N (selected terms)",
            got: n_terms,
            limit_name: "available counting table length",
            limit: table.len() as u64,
        });
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 1..=n_terms {
        let a_k = table.a(k);
        debug_assert!(a_k <= path.n_max());
        acc += weight.value(k) * orbit_eval(sys, f, x, a_k)?;
    }
    Ok(acc / n_terms as f64)
}

fn selector_numerator(
    path: &SelectorPath,
    weight: Weight,
    sys: &DynSystem,
    f: &Observable,
    x: State,
    n: u64,
    form: AverageForm,
) -> Result<Complex64> {
    let mut acc = Complex64::new(0.0, 0.0);
    for m in 1..=n {
        let coef = match form {
            AverageForm::Selector => {
                if !path.x(m) {
                    continue;
                }
                1.0
            }
            AverageForm::YPart => path.y(m),
            AverageForm::SigmaPart => path.sigma(m),
        };
        acc += coef * weight.value(path.s(m - 1) + 1) * orbit_eval(sys, f, x, m)?;
    }
    Ok(acc)
}

fn normalizer(path: &SelectorPath, n: u64, norm: Norm) -> f64 {
    match norm {
        Norm::SelectorCount => path.s(n) as f64,
        Norm::WeightSum => path.w(n),
        Norm::PowerLaw => (n as f64).powf(1.0 - path.alpha()),
    }
}

/// `(1/norm) sum_{n <= N} X_n b(S_{n-1}+1) f(T^n x)`.
pub fn average_selector_form(
    path: &SelectorPath,
    weight: Weight,
    sys: &DynSystem,
    f: &Observable,
    x: State,
    n: u64,
    norm: Norm,
) -> Result<Complex64> {
    check_horizon(path, n)?;
    let num = selector_numerator(path, weight, sys, f, x, n, AverageForm::Selector)?;
    Ok(num / normalizer(path, n, norm))
}

/// `(1/N^{1-alpha}) sum_{n <= N} Y_n b(S_{n-1}+1) f(T^n x)`.
pub fn y_part_average(
    path: &SelectorPath,
    weight: Weight,
    sys: &DynSystem,
    f: &Observable,
    x: State,
    n: u64,
) -> Result<Complex64> {
    check_horizon(path, n)?;
    let num = selector_numerator(path, weight, sys, f, x, n, AverageForm::YPart)?;
    Ok(num / normalizer(path, n, Norm::PowerLaw))
}

/// `(1/N^{1-alpha}) sum_{n <= N} sigma_n b(S_{n-1}+1) f(T^n x)`.
pub fn sigma_part_average(
    path: &SelectorPath,
    weight: Weight,
    sys: &DynSystem,
    f: &Observable,
    x: State,
    n: u64,
) -> Result<Complex64> {
    check_horizon(path, n)?;
    let num = selector_numerator(path, weight, sys, f, x, n, AverageForm::SigmaPart)?;
    Ok(num / normalizer(path, n, Norm::PowerLaw))
}

/// Maximum modulus of the requested form over an explicit weight list,
/// `N^{1-alpha}` normalizer.
pub fn maximal_average_over(
    path: &SelectorPath,
    weights: &[Weight],
    sys: &DynSystem,
    f: &Observable,
    x: State,
    n: u64,
    form: AverageForm,
) -> Result<f64> {
    if weights.is_empty() {
        return Err(Error::EmptyNet);
    }
    check_horizon(path, n)?;
    let norm = normalizer(path, n, Norm::PowerLaw);
    let mut best = 0.0f64;
    for &w in weights {
        let num = selector_numerator(path, w, sys, f, x, n, form)?;
        best = best.max(num.norm() / norm);
    }
    Ok(best)
}

/// `sup_{b in net} | (1/N^{1-alpha}) sum X_n b(S_{n-1}+1) f(T^n x) |`
/// (or the Y/sigma variant).
pub fn maximal_average(
    path: &SelectorPath,
    net: &WeightNet,
    sys: &DynSystem,
    f: &Observable,
    x: State,
    n: u64,
    form: AverageForm,
) -> Result<f64> {
    if net.horizon() < n {
        return Err(Error::Horizon {
            horizon: net.horizon(),
            n,
        });
    }
    maximal_average_over(path, &net.weights()?, sys, f, x, n, form)
}

/// The explicit majorant of the sigma-part maximal average obtained by
/// summation by parts for `f = h - Th`:
/// `||h|| [ N^{a-1} + N^{a-1} sum (m-1)^{-a-1} + N^{a-1} sum (m-1)^{-a} X_{m-1} ]`.
#[derive(Debug, Clone, Copy)]
pub struct LemmaFinalBound {
    /// Boundary term `||h|| N^{alpha-1}`.
    pub boundary: f64,
    /// Smooth-variation term.
    pub smooth: f64,
    /// Selector-jump term (the path-dependent one).
    pub jump: f64,
}

impl LemmaFinalBound {
    pub fn total(&self) -> f64 {
        self.boundary + self.smooth + self.jump
    }
}

/// Evaluate the majorant at horizon `n >= 2`.
pub fn lemma_final_bound(path: &SelectorPath, h_bound: f64, n: u64) -> Result<LemmaFinalBound> {
    check_horizon(path, n)?;
    let alpha = path.alpha();
    let scale = (n as f64).powf(alpha - 1.0) * h_bound;
    let mut smooth = 0.0;
    let mut jump = 0.0;
    for m in 2..=n {
        let base = (m - 1) as f64;
        smooth += base.powf(-alpha - 1.0);
        if path.x(m - 1) {
            jump += base.powf(-alpha);
        }
    }
    Ok(LemmaFinalBound {
        boundary: scale,
        smooth: scale * smooth,
        jump: scale * jump,
    })
}

/// Block sums `sum_{K/2 < m <= K} (m-1)^{-alpha} X_{m-1}` for dyadic `K`,
/// the quantity the strong law bounds by a multiple of `K^{1-2alpha}`.
pub fn dyadic_jump_blocks(path: &SelectorPath, n: u64) -> Vec<(u64, f64)> {
    let mut out = Vec::new();
    let mut k = 2u64;
    while k <= n {
        let mut s = 0.0;
        for m in (k / 2 + 1).max(2)..=k {
            if path.x(m - 1) {
                s += ((m - 1) as f64).powf(-path.alpha());
            }
        }
        out.push((k, s));
        k *= 2;
    }
    out
}

/// Empirical maximal function
/// `sup_{N in schedule} (1/W_N) sum_{n <= N} X_n |f|(T^n x)`.
pub fn mlv_maximal(
    path: &SelectorPath,
    sys: &DynSystem,
    f: &Observable,
    x: State,
    schedule: &[u64],
) -> Result<f64> {
    let mut best = 0.0f64;
    let mut acc = 0.0f64;
    let mut upto = 0u64;
    let mut sched: Vec<u64> = schedule.to_vec();
    sched.sort_unstable();
    for &n in &sched {
        check_horizon(path, n)?;
        for m in upto + 1..=n {
            if path.x(m) {
                acc += orbit_eval(sys, f, x, m)?.norm();
            }
        }
        upto = n;
        best = best.max(acc / path.w(n));
    }
    Ok(best)
}

/// Per-time snapshot of the averages at a fixed state, for one reference
/// weight and the maximal values over a weight list.
#[derive(Debug, Clone, Copy)]
pub struct AverageRow {
    pub n: u64,
    pub s_n: u64,
    pub w_n: f64,
    /// Sequence-form average through `S_N` selected terms (equals the
    /// `S_N`-normalized selector form by re-indexing).
    pub seq_form: Complex64,
    /// `N^{1-alpha}`-normalized selector form for the reference weight.
    pub selector: Complex64,
    pub y_part: Complex64,
    pub sigma_part: Complex64,
    pub max_selector: f64,
    pub max_y: f64,
    pub max_sigma: f64,
}

/// Averages along a schedule, computed in one pass per weight
/// (`O(n_max * |weights|)` total instead of a fresh sum per schedule point).
/// The first weight of `weights` is the reference for the scalar columns.
pub fn average_series(
    path: &SelectorPath,
    weights: &[Weight],
    sys: &DynSystem,
    f: &Observable,
    x: State,
    schedule: &[u64],
) -> Result<Vec<AverageRow>> {
    if weights.is_empty() {
        return Err(Error::EmptyNet);
    }
    let mut sched: Vec<u64> = schedule.to_vec();
    sched.sort_unstable();
    sched.dedup();
    for &n in &sched {
        check_horizon(path, n)?;
    }
    let n_top = *sched.last().unwrap();
    // Orbit values are shared across weights; evaluate once per n.
    let mut orbit = Vec::with_capacity(n_top as usize);
    for n in 1..=n_top {
        orbit.push(orbit_eval(sys, f, x, n)?);
    }
    let k = weights.len();
    let mut sel = vec![Complex64::new(0.0, 0.0); k];
    let mut yp = vec![Complex64::new(0.0, 0.0); k];
    let mut sp = vec![Complex64::new(0.0, 0.0); k];
    let mut rows = Vec::with_capacity(sched.len());
    let mut next = 0usize;
    for n in 1..=n_top {
        let fv = orbit[(n - 1) as usize];
        let x_n = path.x(n);
        let y_n = path.y(n);
        let sig_n = path.sigma(n);
        let arg = path.s(n - 1) + 1;
        for (i, w) in weights.iter().enumerate() {
            let bv = w.value(arg) * fv;
            if x_n {
                sel[i] += bv;
            }
            yp[i] += y_n * bv;
            sp[i] += sig_n * bv;
        }
        while next < sched.len() && sched[next] == n {
            let norm = normalizer(path, n, Norm::PowerLaw);
            let s_n = path.s(n);
            let max_selector = sel.iter().map(|z| z.norm()).fold(0.0, f64::max) / norm;
            let max_y = yp.iter().map(|z| z.norm()).fold(0.0, f64::max) / norm;
            let max_sigma = sp.iter().map(|z| z.norm()).fold(0.0, f64::max) / norm;
            rows.push(AverageRow {
                n,
                s_n,
                w_n: path.w(n),
                seq_form: sel[0] / s_n as f64,
                selector: sel[0] / norm,
                y_part: yp[0] / norm,
                sigma_part: sp[0] / norm,
                max_selector,
                max_y,
                max_sigma,
            });
            next += 1;
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::GOLDEN_THETA;

    fn rotation() -> (DynSystem, Observable, State) {
        (
            DynSystem::Rotation {
                theta: GOLDEN_THETA,
            },
            Observable::coboundary(Observable::Character { k: 1 }),
            State::Circle(0.2),
        )
    }

    #[test]
    fn lacunary_examples() {
        assert_eq!(LacunarySchedule::new(2.0, 10).unwrap().values(), &[1, 2, 4, 8]);
        assert_eq!(LacunarySchedule::new(1.1, 3).unwrap().values(), &[1, 2, 3]);
        assert_eq!(
            LacunarySchedule::new(1.5, 100).unwrap().values(),
            &[1, 2, 3, 5, 7, 11, 17, 25, 38, 57, 86]
        );
        assert!(LacunarySchedule::new(1.0, 10).is_err());
    }

    #[test]
    fn constant_weight_constant_observable() {
        let path = SelectorPath::sample(0.3, 4096, 5).unwrap();
        let table = path.counting_table();
        let sys = DynSystem::Cyclic { m: 3 };
        let one = Observable::Character { k: 0 };
        let x = State::Residue(0);
        let v = average_sequence_form(&path, &table, Weight::One, &sys, &one, x, 100).unwrap();
        assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        let v = average_selector_form(
            &path,
            Weight::One,
            &sys,
            &one,
            x,
            4096,
            Norm::SelectorCount,
        )
        .unwrap();
        assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn zero_observable_gives_zero() {
        let path = SelectorPath::sample(0.3, 256, 5).unwrap();
        let table = path.counting_table();
        let sys = DynSystem::Cyclic { m : 2 };
        let zero = Observable::Table(vec![Complex64::new(0.0, 0.0); 2]);
        let x = State::Residue(1);
        let v = average_sequence_form(
            &path,
            &table,
            Weight::Power { c: 1.5 },
            &sys,
            &zero,
            x,
            10,
        )
        .unwrap();
        assert_eq!(v, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn reindexing_identity_sequence_vs_selector() {
        // X_n b(S_n) = X_n b(S_{n-1}+1): sequence form through S_N terms
        // equals the S_N-normalized selector form, addition order included.
        let path = SelectorPath::sample(0.3, 2000, 12).unwrap();
        let table = path.counting_table();
        let (sys, f, x) = rotation();
        let w = Weight::Power { c: 1.5 };
        for &n in &[7u64, 100, 2000] {
            let s_n = path.s(n);
            let seq = average_sequence_form(&path, &table, w, &sys, &f, x, s_n).unwrap();
            let sel =
                average_selector_form(&path, w, &sys, &f, x, n, Norm::SelectorCount).unwrap();
            // The selector sum may continue past a_{S_N} with X_m = 0 terms
            // only, which add nothing.
            assert!((seq - sel).norm() < 1e-14, "N={n}");
        }
    }

    #[test]
    fn normalizer_swap_is_exact_algebra() {
        let path = SelectorPath::sample(0.3, 512, 3).unwrap();
        let (sys, f, x) = rotation();
        let w = Weight::Power { c: 2.5 };
        let n = 512;
        let by_s = average_selector_form(&path, w, &sys, &f, x, n, Norm::SelectorCount).unwrap();
        let by_w = average_selector_form(&path, w, &sys, &f, x, n, Norm::WeightSum).unwrap();
        let ratio = by_s / by_w;
        let expect = path.w(n) / path.s(n) as f64;
        assert!((ratio.re - expect).abs() < 1e-12 && ratio.im.abs() < 1e-12);
    }

    #[test]
    fn split_identity_x_equals_y_plus_sigma() {
        let path = SelectorPath::sample(0.35, 777, 9).unwrap();
        let (sys, f, x) = rotation();
        let w = Weight::Power { c: 1.3 };
        for &n in &[1u64, 50, 777] {
            let sel = average_selector_form(&path, w, &sys, &f, x, n, Norm::PowerLaw).unwrap();
            let y = y_part_average(&path, w, &sys, &f, x, n).unwrap();
            let s = sigma_part_average(&path, w, &sys, &f, x, n).unwrap();
            let err = (sel - (y + s)).norm();
            assert!(err <= 1e-12 * sel.norm().max(1.0), "N={n}: {err}");
        }
    }

    #[test]
    fn sigma_part_of_trivial_data_recovers_w_over_power() {
        let path = SelectorPath::sample(0.3, 1024, 4).unwrap();
        let sys = DynSystem::Cyclic { m: 2 };
        let one = Observable::Character { k: 0 };
        let x = State::Residue(0);
        let n = 1024u64;
        let v = sigma_part_average(&path, Weight::One, &sys, &one, x, n).unwrap();
        let expect = path.w(n) / (n as f64).powf(0.7);
        assert!((v.re - expect).abs() < 1e-12 && v.im.abs() < 1e-14);
    }

    #[test]
    fn maximal_average_monotone_and_singleton() {
        let path = SelectorPath::sample(0.3, 512, 8).unwrap();
        let (sys, f, x) = rotation();
        let w0 = Weight::Power { c: 1.4 };
        let single =
            maximal_average_over(&path, &[w0], &sys, &f, x, 512, AverageForm::Selector).unwrap();
        let direct = average_selector_form(&path, w0, &sys, &f, x, 512, Norm::PowerLaw)
            .unwrap()
            .norm();
        assert!((single - direct).abs() < 1e-15);
        let more = maximal_average_over(
            &path,
            &[w0, Weight::Power { c: 1.6 }, Weight::One],
            &sys,
            &f,
            x,
            512,
            AverageForm::Selector,
        )
        .unwrap();
        assert!(more >= single);
    }

    #[test]
    fn maximal_average_checks_net_horizon() {
        let path = SelectorPath::sample(0.3, 512, 8).unwrap();
        let (sys, f, x) = rotation();
        let net = WeightNet::subsampled(0.25, 1, 256, 4).unwrap();
        let err = maximal_average(&path, &net, &sys, &f, x, 512, AverageForm::Selector);
        assert!(matches!(err, Err(Error::Horizon { .. })));
    }

    #[test]
    fn lemma_final_bound_on_sparse_test_path() {
        // Path with a single 1 at the start: the jump term only collects
        // the m = 2 contribution X_1 = 1.
        let mut bits = vec![false; 64];
        bits[0] = true;
        let path = SelectorPath::from_bits(0.3, &bits, 0).unwrap();
        let n = 64u64;
        let b = lemma_final_bound(&path, 1.0, n).unwrap();
        let scale = (n as f64).powf(-0.7);
        assert!((b.boundary - scale).abs() < 1e-15);
        assert!((b.jump - scale).abs() < 1e-15, "only (m-1)=1 contributes");
    }

    #[test]
    fn sigma_part_maximal_dominated_by_majorant() {
        let path = SelectorPath::sample(0.3, 4096, 21).unwrap();
        let (sys, f, x) = rotation();
        let net = WeightNet::subsampled(0.25, 2, 4096, 8).unwrap();
        for &n in &[16u64, 256, 4096] {
            let sup = maximal_average(&path, &net, &sys, &f, x, n, AverageForm::SigmaPart).unwrap();
            let bound = lemma_final_bound(&path, 1.0, n).unwrap().total();
            assert!(sup <= 2.0 * bound, "N={n}: sup {sup} vs bound {bound}");
        }
    }

    #[test]
    fn majorant_first_terms_vanish_at_their_rates() {
        // Boundary term scales exactly like N^{alpha-1}; the smooth term
        // is N^{alpha-1} times a convergent sum, so their product with
        // N^{1-alpha} stays bounded while both terms tend to zero.
        let path = SelectorPath::sample(0.3, 1 << 16, 2).unwrap();
        let mut prev_boundary = f64::INFINITY;
        let mut prev_smooth = f64::INFINITY;
        for e in [4u32, 8, 12, 16] {
            let n = 1u64 << e;
            let b = lemma_final_bound(&path, 1.0, n).unwrap();
            let rate = (n as f64).powf(0.3 - 1.0);
            assert!((b.boundary - rate).abs() < 1e-15);
            // Direct summation: smooth / rate = sum_{2<=m<=N} (m-1)^{-1.3},
            // increasing but bounded by its infinite tail.
            let direct: f64 = (2..=n).map(|m| ((m - 1) as f64).powf(-1.3)).sum();
            assert!((b.smooth - rate * direct).abs() < 1e-12);
            assert!(direct < 4.0);
            assert!(b.boundary < prev_boundary && b.smooth < prev_smooth);
            prev_boundary = b.boundary;
            prev_smooth = b.smooth;
        }
    }

    #[test]
    fn dyadic_jump_blocks_scale() {
        let path = SelectorPath::sample(0.3, 1 << 14, 33).unwrap();
        for (k, s) in dyadic_jump_blocks(&path, 1 << 14) {
            let cap = (k as f64).powf(1.0 - 2.0 * 0.3);
            assert!(s <= 3.0 * cap, "K={k}: block {s} vs K^{{1-2a}} {cap}");
        }
    }

    #[test]
    fn mlv_of_constant_observable_is_ratio_sup() {
        let path = SelectorPath::sample(0.3, 4096, 2).unwrap();
        let sys = DynSystem::Cyclic { m: 5 };
        let one = Observable::Character { k: 0 };
        let x = State::Residue(3);
        let sched: Vec<u64> = (0..=12).map(|k| 1u64 << k).collect();
        let mlv = mlv_maximal(&path, &sys, &one, x, &sched).unwrap();
        let sup = path
            .sllr_ratio_series(&sched)
            .unwrap()
            .into_iter()
            .map(|(_, r)| r)
            .fold(0.0f64, f64::max);
        assert!((mlv - sup).abs() < 1e-12);
    }

    #[test]
    fn mlv_dominates_first_term() {
        let path = SelectorPath::sample(0.3, 64, 5).unwrap();
        let (sys, _, x) = rotation();
        let f = Observable::Character { k: 1 };
        let mlv = mlv_maximal(&path, &sys, &f, x, &[1]).unwrap();
        let first = orbit_eval(&sys, &f, x, 1).unwrap().norm();
        assert!(mlv >= first - 1e-15, "X_1 = 1 so N=1 term is |f|(Tx)");
    }

    #[test]
    fn net_truncation_controlled_by_mlv() {
        // Replacing b by its net approximant moves the W_N-normalized
        // selector average by at most sup_t |b - b0| * M_LV f.
        let path = SelectorPath::sample(0.3, 256, 14).unwrap();
        let (sys, f, x) = rotation();
        let net = WeightNet::build(0.25, 1, 256, 0.5).unwrap();
        let sched: Vec<u64> = (0..=8).map(|k| 1u64 << k).collect();
        let mlv = mlv_maximal(&path, &sys, &f, x, &sched).unwrap();
        let mut rng = crate::rng::seeded_rng(77);
        use rand::Rng;
        for _ in 0..10 {
            let c: f64 = rng.gen_range(1.25..=1.75);
            let (c0, err) = net.approx_error(c).unwrap();
            let a = average_selector_form(
                &path,
                Weight::Power { c },
                &sys,
                &f,
                x,
                256,
                Norm::WeightSum,
            )
            .unwrap();
            let b = average_selector_form(
                &path,
                Weight::Power { c: c0 },
                &sys,
                &f,
                x,
                256,
                Norm::WeightSum,
            )
            .unwrap();
            assert!(
                (a - b).norm() <= err * mlv + 1e-12,
                "c={c}: {} vs {}",
                (a - b).norm(),
                err * mlv
            );
            assert!(err <= net.guaranteed_error() + 1e-12);
        }
    }

    #[test]
    fn series_matches_direct_ops() {
        let path = SelectorPath::sample(0.3, 1024, 6).unwrap();
        let (sys, f, x) = rotation();
        let ws = [Weight::Power { c: 1.5 }, Weight::Power { c: 2.3 }];
        let sched = [1u64, 32, 1024];
        let rows = average_series(&path, &ws, &sys, &f, x, &sched).unwrap();
        for row in rows {
            let sel =
                average_selector_form(&path, ws[0], &sys, &f, x, row.n, Norm::PowerLaw).unwrap();
            assert!((row.selector - sel).norm() < 1e-12);
            let y = y_part_average(&path, ws[0], &sys, &f, x, row.n).unwrap();
            assert!((row.y_part - y).norm() < 1e-12);
            let s = sigma_part_average(&path, ws[0], &sys, &f, x, row.n).unwrap();
            assert!((row.sigma_part - s).norm() < 1e-12);
            let m =
                maximal_average_over(&path, &ws, &sys, &f, x, row.n, AverageForm::Selector)
                    .unwrap();
            assert!((row.max_selector - m).abs() < 1e-12);
            assert!((row.selector - (row.y_part + row.sigma_part)).norm() < 1e-12);
        }
    }
}
