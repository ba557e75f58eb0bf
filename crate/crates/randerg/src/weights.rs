//! Modulating weights `b(t) = e(t^c)` and finite nets over exponent
//! intervals.
//!
//! The weight family of interest is
//! `{ e(t^c) : c in [m + delta, m + 1 - delta], 1 <= m <= M }` with
//! `e(t) = exp(2 pi i t)`. A net with horizon `N` is a finite set of
//! exponents such that every covered `c` has a net point `c0` with
//! `sup_{t <= N} |e(t^c) - e(t^{c0})| <= guaranteed_error`.
//!
//! Certified nets use the derivative bound `|d/dc e(t^c)| = 2 pi t^c ln t`,
//! which forces very fine spacing; nets are therefore stored as lazy
//! uniform grids (interval start, spacing, count) so that nearest-point
//! lookup is O(1) arithmetic and the point count may exceed anything
//! worth materializing. Small nets for experiment suprema come from
//! [`WeightNet::subsampled`], which records its (much weaker) honest
//! error bound.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::TAU;

/// A single modulating weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weight {
    /// The constant weight `b == 1`, used as a kernel baseline.
    One,
    /// `b(t) = e(t^c)`.
    Power { c: f64 },
}

impl Weight {
    /// Evaluate at integer `t >= 1` (also defined at `t = 0`, where
    /// `0^c = 0` gives `b(0) = 1`; the kernel formulas touch `S_0 = 0`).
    pub fn value(&self, t: u64) -> Complex64 {
        match *self {
            Weight::One => Complex64::new(1.0, 0.0),
            Weight::Power { c } => {
                if t == 0 {
                    return Complex64::new(1.0, 0.0);
                }
                let phase = (t as f64).powf(c).rem_euclid(1.0);
                Complex64::from_polar(1.0, TAU * phase)
            }
        }
    }
}

/// `e(t^c)` as a free function.
pub fn weight_value(c: f64, t: u64) -> Complex64 {
    Weight::Power { c }.value(t)
}

/// A uniform grid of exponents on one interval `[m + delta, m + 1 - delta]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalGrid {
    /// Integer part label `m`.
    pub m: u32,
    /// Left endpoint `m + delta`.
    pub lo: f64,
    /// Right endpoint `m + 1 - delta`.
    pub hi: f64,
    /// Grid spacing; points are `lo + j * spacing`, `0 <= j < count`.
    pub spacing: f64,
    /// Number of grid points.
    pub count: u128,
}

impl IntervalGrid {
    fn point(&self, j: u128) -> f64 {
        debug_assert!(j < self.count);
        if self.count == 1 {
            self.lo
        } else {
            self.lo + j as f64 * self.spacing
        }
    }

    /// Index of the nearest grid point, ties toward the smaller exponent.
    fn nearest_index(&self, c: f64) -> u128 {
        if self.count == 1 || self.spacing == 0.0 {
            return 0;
        }
        let u = (c - self.lo) / self.spacing;
        if u <= 0.0 {
            return 0;
        }
        let base = u.floor();
        let frac = u - base;
        let j = if frac > 0.5 { base + 1.0 } else { base };
        (j as u128).min(self.count - 1)
    }
}

/// A finite net of exponents covering `[m + delta, m + 1 - delta]` for
/// `1 <= m <= m_max`, valid up to a horizon `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightNet {
    delta: f64,
    m_max: u32,
    horizon: u64,
    kappa: f64,
    /// Constant in the size budget `|net| <= c_delta * exp(N^delta)`,
    /// recorded so the budget certification is a checkable statement.
    c_delta: f64,
    /// Constant in the error guarantee `<= c_kappa * N^{-kappa}`.
    c_kappa: f64,
    guaranteed_error: f64,
    grids: Vec<IntervalGrid>,
}

/// Default cap on the (virtual) number of net points.
pub const DEFAULT_SIZE_CAP: u128 = 1 << 62;

/// Cap on nets that are materialized or iterated.
pub const ITERATION_CAP: u128 = 1 << 24;

fn validate_net_params(delta: f64, m_max: u32, horizon: u64, kappa: f64) -> Result<()> {
    if !(delta > 0.0 && delta <= 0.5) {
        return Err(Error::ParamDomain {
            name: "delta",
            value: delta,
            constraint: "(0, 1/2]",
        });
    }
    if m_max < 1 {
        return Err(Error::ParamDomain {
            name: "m_max",
            value: m_max as f64,
            constraint: "[1, inf)",
        });
    }
    if horizon < 2 {
        return Err(Error::ParamDomain {
            name: "N",
            value: horizon as f64,
            constraint: "[2, inf)",
        });
    }
    if kappa <= 0.0 {
        return Err(Error::ParamDomain {
            name: "kappa",
            value: kappa,
            constraint: "(0, inf)",
        });
    }
    Ok(())
}

impl WeightNet {
    /// Build the certified net for horizon `N`.
    ///
    /// Spacing on `[m + delta, m + 1 - delta]` comes from the derivative
    /// bound `|d/dc e(t^c)| <= 2 pi N^{m+1-delta} ln N`:
    /// `spacing = N^{-(m+1-delta)-kappa} / (2 pi ln N)`, so any covered
    /// `c` sits within one spacing of a net point and the uniform error
    /// is at most `N^{-kappa}`.
    pub fn build(delta: f64, m_max: u32, horizon: u64, kappa: f64) -> Result<Self> {
        Self::build_with_cap(delta, m_max, horizon, kappa, DEFAULT_SIZE_CAP)
    }

    /// [`WeightNet::build`] with an explicit size cap.
    pub fn build_with_cap(
        delta: f64,
        m_max: u32,
        horizon: u64,
        kappa: f64,
        cap: u128,
    ) -> Result<Self> {
        validate_net_params(delta, m_max, horizon, kappa)?;
        let n = horizon as f64;
        let len = 1.0 - 2.0 * delta;
        let mut grids = Vec::with_capacity(m_max as usize);
        let mut total: u128 = 0;
        for m in 1..=m_max {
            let exponent = (m as f64 + 1.0 - delta) + kappa;
            let spacing = n.powf(-exponent) / (TAU * n.ln());
            let count = if len == 0.0 {
                1
            } else {
                let c = (len / spacing).floor();
                if !c.is_finite() || c >= cap as f64 {
                    return Err(Error::NetTooLarge {
                        required: if c.is_finite() { c as u128 + 1 } else { u128::MAX },
                        cap,
                    });
                }
                c as u128 + 1
            };
            total = total.saturating_add(count);
            grids.push(IntervalGrid {
                m,
                lo: m as f64 + delta,
                hi: m as f64 + 1.0 - delta,
                spacing,
                count,
            });
        }
        if total > cap {
            return Err(Error::NetTooLarge {
                required: total,
                cap,
            });
        }
        let guaranteed_error = n.powf(-kappa);
        // Record the actual constant needed for |net| <= c_delta e^{N^delta}.
        let ln_count = (total as f64).ln();
        let ln_budget = n.powf(delta);
        let c_delta = if ln_count <= ln_budget {
            1.0
        } else {
            (ln_count - ln_budget).exp()
        };
        Ok(Self {
            delta,
            m_max,
            horizon,
            kappa,
            c_delta,
            c_kappa: 1.0,
            guaranteed_error,
            grids,
        })
    }

    /// Small experiment net: `points_per_interval` evenly spaced exponents
    /// on each interval. The recorded error bound is the honest derivative
    /// bound for that spacing, clipped at the trivial bound 2.
    pub fn subsampled(
        delta: f64,
        m_max: u32,
        horizon: u64,
        points_per_interval: u32,
    ) -> Result<Self> {
        validate_net_params(delta, m_max, horizon, 1.0)?;
        if points_per_interval == 0 {
            return Err(Error::EmptyNet);
        }
        let n = horizon as f64;
        let len = 1.0 - 2.0 * delta;
        let mut grids = Vec::new();
        let mut worst = 0.0f64;
        for m in 1..=m_max {
            let (count, spacing) = if points_per_interval == 1 || len == 0.0 {
                (1u128, 0.0)
            } else {
                (
                    points_per_interval as u128,
                    len / (points_per_interval - 1) as f64,
                )
            };
            let deriv = TAU * n.powf(m as f64 + 1.0 - delta) * n.ln();
            worst = worst.max((deriv * spacing).min(2.0));
            if count == 1 && len > 0.0 {
                // Single point: nearest distance can be the half-length.
                worst = worst.max((deriv * len / 2.0).min(2.0));
            }
            grids.push(IntervalGrid {
                m,
                lo: m as f64 + delta,
                hi: m as f64 + 1.0 - delta,
                spacing,
                count,
            });
        }
        let total: u128 = grids.iter().map(|g| g.count).sum();
        let ln_budget = n.powf(delta);
        let c_delta = if (total as f64).ln() <= ln_budget {
            1.0
        } else {
            ((total as f64).ln() - ln_budget).exp()
        };
        Ok(Self {
            delta,
            m_max,
            horizon,
            kappa: 0.0,
            c_delta,
            c_kappa: 1.0,
            guaranteed_error: worst.min(2.0),
            grids,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn m_max(&self) -> u32 {
        self.m_max
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn c_delta(&self) -> f64 {
        self.c_delta
    }

    pub fn c_kappa(&self) -> f64 {
        self.c_kappa
    }

    /// Certified uniform approximation error over `t <= horizon`.
    pub fn guaranteed_error(&self) -> f64 {
        self.guaranteed_error
    }

    pub fn grids(&self) -> &[IntervalGrid] {
        &self.grids
    }

    /// Total number of net points (possibly astronomically large; the net
    /// is stored lazily).
    pub fn len(&self) -> u128 {
        self.grids.iter().map(|g| g.count).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Whether `|net| <= c * exp(horizon^delta)` for a given constant.
    pub fn within_budget(&self, c: f64) -> bool {
        let ln_len = (self.len() as f64).ln();
        ln_len <= c.ln() + (self.horizon as f64).powf(self.delta)
    }

    /// Net point by global index (grids concatenated in order of `m`).
    pub fn point(&self, mut idx: u128) -> f64 {
        for g in &self.grids {
            if idx < g.count {
                return g.point(idx);
            }
            idx -= g.count;
        }
        panic!("index out of range");
    }

    /// Iterate the points. Errors when the net is too large to iterate.
    pub fn points(&self) -> Result<Vec<f64>> {
        let n = self.len();
        if n > ITERATION_CAP {
            return Err(Error::NetTooLarge {
                required: n,
                cap: ITERATION_CAP,
            });
        }
        let mut out = Vec::with_capacity(n as usize);
        for g in &self.grids {
            for j in 0..g.count {
                out.push(g.point(j));
            }
        }
        Ok(out)
    }

    /// Weights of the net, for suprema in the averaging operators.
    pub fn weights(&self) -> Result<Vec<Weight>> {
        Ok(self.points()?.into_iter().map(|c| Weight::Power { c }).collect())
    }

    /// Nearest net point to `c` (ties toward the smaller exponent).
    /// `c` must lie in a covered interval.
    pub fn nearest(&self, c: f64) -> Result<f64> {
        for g in &self.grids {
            if c >= g.lo && c <= g.hi {
                return Ok(g.point(g.nearest_index(c)));
            }
        }
        Err(Error::OutsideNet { c })
    }

    /// Nearest net point and the exact `sup_{1 <= t <= horizon}
    /// |e(t^c) - e(t^{c0})|` by full scan.
    pub fn approx_error(&self, c: f64) -> Result<(f64, f64)> {
        let c0 = self.nearest(c)?;
        let mut sup = 0.0f64;
        for t in 1..=self.horizon {
            let d = (weight_value(c, t) - weight_value(c0, t)).norm();
            sup = sup.max(d);
        }
        Ok((c0, sup))
    }

    /// CSV serialization: commented header with the net parameters and one
    /// `grid` line per interval (spacing stored exactly as hex bits).
    /// Point values are listed only for nets small enough to materialize.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("# randerg weight net v1\n");
        out.push_str(&format!(
            "# delta={} m_max={} horizon={} kappa={} c_delta={} c_kappa={} guaranteed_error={} points={}\n",
            self.delta,
            self.m_max,
            self.horizon,
            self.kappa,
            self.c_delta,
            self.c_kappa,
            self.guaranteed_error,
            self.len()
        ));
        for g in &self.grids {
            out.push_str(&format!(
                "# grid m={} lo_bits={:016x} spacing_bits={:016x} count={}\n",
                g.m,
                g.lo.to_bits(),
                g.spacing.to_bits(),
                g.count
            ));
        }
        out.push_str("c\n");
        if self.len() <= 100_000 {
            for g in &self.grids {
                for j in 0..g.count {
                    out.push_str(&format!("{:.17e}\n", g.point(j)));
                }
            }
        }
        out
    }

    /// Rebuild a net from [`WeightNet::to_csv`] output (header lines only;
    /// any listed point values are redundant with the grid descriptors).
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut delta = None;
        let mut m_max = None;
        let mut horizon = None;
        let mut kappa = None;
        let mut c_delta = None;
        let mut c_kappa = None;
        let mut guaranteed_error = None;
        let mut grids = Vec::new();
        let bad = |what: &str| Error::Config(format!("weight net csv: {what}"));
        for line in text.lines() {
            let line = line.trim();
            if let Some(rest) = line.strip_prefix("# grid ") {
                let mut m = None;
                let mut lo = None;
                let mut spacing = None;
                let mut count = None;
                for field in rest.split_whitespace() {
                    let (k, v) = field.split_once('=').ok_or_else(|| bad("bad grid field"))?;
                    match k {
                        "m" => m = v.parse::<u32>().ok(),
                        "lo_bits" => {
                            lo = u64::from_str_radix(v, 16).ok().map(f64::from_bits)
                        }
                        "spacing_bits" => {
                            spacing = u64::from_str_radix(v, 16).ok().map(f64::from_bits)
                        }
                        "count" => count = v.parse::<u128>().ok(),
                        _ => {}
                    }
                }
                let m = m.ok_or_else(|| bad("grid missing m"))?;
                let lo = lo.ok_or_else(|| bad("grid missing lo"))?;
                grids.push(IntervalGrid {
                    m,
                    lo,
                    hi: lo + (1.0 - 2.0 * (lo - m as f64)),
                    spacing: spacing.ok_or_else(|| bad("grid missing spacing"))?,
                    count: count.ok_or_else(|| bad("grid missing count"))?,
                });
            } else if let Some(rest) = line.strip_prefix("# ") {
                for field in rest.split_whitespace() {
                    if let Some((k, v)) = field.split_once('=') {
                        match k {
                            "delta" => delta = v.parse().ok(),
                            "m_max" => m_max = v.parse().ok(),
                            "horizon" => horizon = v.parse().ok(),
                            "kappa" => kappa = v.parse().ok(),
                            "c_delta" => c_delta = v.parse().ok(),
                            "c_kappa" => c_kappa = v.parse().ok(),
                            "guaranteed_error" => guaranteed_error = v.parse().ok(),
                            _ => {}
                        }
                    }
                }
            }
        }
        Ok(Self {
            delta: delta.ok_or_else(|| bad("missing delta"))?,
            m_max: m_max.ok_or_else(|| bad("missing m_max"))?,
            horizon: horizon.ok_or_else(|| bad("missing horizon"))?,
            kappa: kappa.ok_or_else(|| bad("missing kappa"))?,
            c_delta: c_delta.ok_or_else(|| bad("missing c_delta"))?,
            c_kappa: c_kappa.ok_or_else(|| bad("missing c_kappa"))?,
            guaranteed_error: guaranteed_error.ok_or_else(|| bad("missing guaranteed_error"))?,
            grids,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_is_one_at_t1_and_integer_exponent() {
        for &c in &[0.5, 1.3, 2.75, 7.0] {
            let v = weight_value(c, 1);
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-15, "t=1, c={c}");
        }
        for t in 1..50u64 {
            let v = weight_value(1.0, t);
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-12, "c=1, t={t}");
        }
    }

    #[test]
    fn weight_matches_extended_precision_oracle() {
        // e(2 sqrt 2), reference digits from a 40-digit evaluation.
        let v = weight_value(1.5, 2);
        assert!((v.re - 0.47307004268786912).abs() < 1e-12);
        assert!((v.im - (-0.88102482071238929)).abs() < 1e-12);
    }

    #[test]
    fn unit_modulus_everywhere() {
        let mut rng = crate::rng::seeded_rng(9);
        use rand::Rng;
        for _ in 0..10_000 {
            let c: f64 = rng.gen_range(0.1..3.0);
            let t: u64 = rng.gen_range(1..100_000);
            let v = weight_value(c, t);
            assert!((v.norm() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn degenerate_interval_is_single_point() {
        let net = WeightNet::build(0.5, 1, 2, 1e-6).unwrap();
        assert_eq!(net.len(), 1);
        assert_eq!(net.point(0), 1.5);
        assert_eq!(net.nearest(1.5).unwrap(), 1.5);
    }

    #[test]
    fn certified_net_budget_constant_recorded() {
        // At (0.25, 1, 1024, 0.5) the derivative-bound spacing forces about
        // 1.3e8 points, far above e^{1024^{0.25}} ~ 287: certification with
        // c_delta = 1 must fail and the recorded constant must exceed 1.
        let net = WeightNet::build(0.25, 1, 1024, 0.5).unwrap();
        let expected = {
            let n = 1024f64;
            let spacing = n.powf(-(1.0 + 1.0 - 0.25) - 0.5) / (TAU * n.ln());
            (0.5 / spacing).floor() as u128 + 1
        };
        assert_eq!(net.len(), expected);
        assert!(net.len() > 287);
        assert!(!net.within_budget(1.0));
        assert!(net.c_delta() > 1.0);
        assert!(net.within_budget(net.c_delta() * (1.0 + 1e-12)));
    }

    #[test]
    fn size_cap_produces_resource_error() {
        let err = WeightNet::build_with_cap(0.25, 2, 4096, 0.5, 1 << 20).unwrap_err();
        match err {
            Error::NetTooLarge { required, cap } => {
                assert!(required > cap);
            }
            other => panic!("expected NetTooLarge, got {other}"),
        }
    }

    #[test]
    fn nearest_point_error_zero() {
        let net = WeightNet::build(0.25, 1, 64, 0.5).unwrap();
        let c0 = net.point(17);
        let (back, err) = net.approx_error(c0).unwrap();
        assert_eq!(back, c0);
        assert_eq!(err, 0.0);
    }

    #[test]
    fn midpoint_error_within_guarantee() {
        let net = WeightNet::build(0.25, 1, 64, 0.5).unwrap();
        let mid = 0.5 * (net.point(5) + net.point(6));
        let (c0, err) = net.approx_error(mid).unwrap();
        // Tie broken toward the smaller exponent.
        assert_eq!(c0, net.point(5));
        assert!(err <= net.guaranteed_error());
    }

    #[test]
    fn certified_coverage_spot_checks() {
        // 100 random exponents against the certified 4096-horizon net;
        // the lazy grids keep nearest lookup O(1) even at ~1e13 points.
        let net = WeightNet::build(0.25, 2, 4096, 0.5).unwrap();
        assert!(net.len() > 1_000_000_000_000u128);
        let mut rng = crate::rng::seeded_rng(1234);
        use rand::Rng;
        for _ in 0..100 {
            let m = if rng.gen::<bool>() { 1.0 } else { 2.0 };
            let c: f64 = m + rng.gen_range(0.25..=0.75);
            let (_, err) = net.approx_error(c).unwrap();
            assert!(
                err <= net.guaranteed_error() + 1e-9,
                "c={c}: err {err} vs {}",
                net.guaranteed_error()
            );
        }
    }

    #[test]
    fn outside_interval_rejected() {
        let net = WeightNet::build(0.25, 1, 64, 0.5).unwrap();
        assert!(matches!(net.nearest(1.1), Err(Error::OutsideNet { .. })));
        assert!(matches!(net.nearest(2.5), Err(Error::OutsideNet { .. })));
    }

    #[test]
    fn union_equals_concatenation_of_interval_nets() {
        let both = WeightNet::build(0.3, 2, 128, 0.5).unwrap();
        let first = WeightNet::build(0.3, 1, 128, 0.5).unwrap();
        assert_eq!(both.grids()[0], first.grids()[0]);
        assert_eq!(both.grids().len(), 2);
        let lens: u128 = both.grids().iter().map(|g| g.count).sum();
        assert_eq!(both.len(), lens);
    }

    #[test]
    fn mean_value_bound_on_adjacent_points() {
        // |e(t^{c1}) - e(t^{c2})| <= 2 pi t^{c2} ln t (c2 - c1).
        let net = WeightNet::subsampled(0.25, 1, 256, 40).unwrap();
        let pts = net.points().unwrap();
        for w in pts.windows(2) {
            let (c1, c2) = (w[0], w[1]);
            for &t in &[2u64, 3, 17, 128, 256] {
                let lhs = (weight_value(c1, t) - weight_value(c2, t)).norm();
                let rhs = TAU * (t as f64).powf(c2) * (t as f64).ln() * (c2 - c1);
                assert!(lhs <= rhs + 1e-9, "t={t} c1={c1} c2={c2}");
            }
        }
    }

    #[test]
    fn csv_round_trip() {
        let net = WeightNet::build(0.25, 2, 4096, 0.5).unwrap();
        let back = WeightNet::from_csv(&net.to_csv()).unwrap();
        assert_eq!(net, back);
        let small = WeightNet::subsampled(0.25, 2, 64, 8).unwrap();
        let back = WeightNet::from_csv(&small.to_csv()).unwrap();
        assert_eq!(small, back);
    }

    #[test]
    fn subsampled_net_records_honest_error() {
        let net = WeightNet::subsampled(0.25, 2, 4096, 32).unwrap();
        assert_eq!(net.len(), 64);
        // The derivative bound at this spacing is far beyond the trivial
        // bound, so the recorded guarantee must be the clip at 2.
        assert_eq!(net.guaranteed_error(), 2.0);
    }

    #[test]
    fn param_domain_errors() {
        assert!(WeightNet::build(0.0, 1, 64, 0.5).is_err());
        assert!(WeightNet::build(0.6, 1, 64, 0.5).is_err());
        assert!(WeightNet::build(0.25, 0, 64, 0.5).is_err());
        assert!(WeightNet::build(0.25, 1, 1, 0.5).is_err());
        assert!(WeightNet::build(0.25, 1, 64, 0.0).is_err());
    }
}
