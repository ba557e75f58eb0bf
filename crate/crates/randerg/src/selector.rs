//! The random selector process.
//!
//! `X_n` are independent {0,1} variables with success probability
//! `sigma_n = n^{-alpha}`, `0 < alpha < 1/2`. A realized trajectory carries
//! its centered version `Y_n = X_n - sigma_n`, the prefix sums
//! `S_N = sum X_n` and `W_N = sum sigma_n`, and the counting function
//! `a_n` (position of the n-th selected integer).
//!
//! `sigma_1 = 1`, so `X_1 = 1` on every sampled path and `S_N >= 1` always.
//! Arbitrary bit patterns can still be injected through [`SelectorPath::from_bits`]
//! for tests and replay.

use crate::error::{Error, Result};
use crate::rng::seeded_rng;
use crate::stats::KahanSum;
use rand::Rng;

/// Success probability `sigma_n = n^{-alpha}`.
pub fn sigma(alpha: f64, n: u64) -> f64 {
    (n as f64).powf(-alpha)
}

/// Leading-order size of `W_N`: `c_alpha N^{1-alpha}` with `c_alpha = 1/(1-alpha)`.
///
/// The gap `|W_N - w_asymptotic(alpha, N)|` stays bounded in `N` (the next
/// terms of the Euler–Maclaurin expansion are `zeta(alpha) + O(N^{-alpha})`).
pub fn w_asymptotic(alpha: f64, n: u64) -> Result<f64> {
    validate_alpha(alpha)?;
    Ok((n as f64).powf(1.0 - alpha) / (1.0 - alpha))
}

pub(crate) fn validate_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::ParamDomain {
            name: "alpha",
            value: alpha,
            constraint: "(0, 1/2)",
        });
    }
    Ok(())
}

/// One step of a selector trajectory, as produced by [`path_stream`].
#[derive(Debug, Clone, Copy)]
pub struct PathStep {
    /// 1-based index.
    pub n: u64,
    /// Selector value `X_n`.
    pub x: bool,
    /// Prefix count `S_n`.
    pub s: u64,
    /// Prefix weight `W_n` (compensated accumulation).
    pub w: f64,
}

/// Stream the trajectory for `(alpha, n_max, seed)` without materializing it.
///
/// One uniform `f64` draw per index, in index order; `x_n = (u < sigma_n)`.
/// [`SelectorPath::sample`] consumes exactly this stream, so streamed and
/// materialized trajectories agree bit for bit.
pub fn path_stream(
    alpha: f64,
    n_max: u64,
    seed: u64,
) -> Result<impl Iterator<Item = PathStep>> {
    validate_alpha(alpha)?;
    if n_max == 0 {
        return Err(Error::EmptyDomain("n_max must be at least 1"));
    }
    let mut rng = seeded_rng(seed);
    let mut s = 0u64;
    let mut w = KahanSum::new();
    Ok((1..=n_max).map(move |n| {
        let sig = sigma(alpha, n);
        let u: f64 = rng.gen();
        let x = u < sig;
        if x {
            s += 1;
        }
        w.add(sig);
        PathStep {
            n,
            x,
            s,
            w: w.value(),
        }
    }))
}

/// A realized selector trajectory with cached prefix data.
///
/// Immutable after construction; safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectorPath {
    alpha: f64,
    seed: u64,
    n_max: u64,
    /// Bit-packed selector values, bit (n-1) of word (n-1)/64 is `X_n`.
    bits: Vec<u64>,
    /// `s[n-1] = S_n`.
    s: Vec<u32>,
    /// `w[n-1] = W_n`.
    w: Vec<f64>,
}

impl SelectorPath {
    /// Draw a trajectory. Identical `(alpha, n_max, seed)` yields a
    /// bit-identical path.
    pub fn sample(alpha: f64, n_max: u64, seed: u64) -> Result<Self> {
        let mut path = Self::empty(alpha, n_max, seed)?;
        for step in path_stream(alpha, n_max, seed)? {
            path.push_step(&step);
        }
        Ok(path)
    }

    /// Degenerate trajectory with every `X_n = 1` — what `sigma == 1`
    /// forces almost surely. Used as the `alpha -> 0` test hook.
    pub fn saturated(alpha: f64, n_max: u64) -> Result<Self> {
        Self::from_bits(alpha, &vec![true; n_max as usize], 0)
    }

    /// Build a path from an explicit bit pattern (tests, replay).
    ///
    /// Any pattern is accepted, including ones a sampled path could never
    /// produce (such as `X_1 = 0`).
    pub fn from_bits(alpha: f64, x: &[bool], seed: u64) -> Result<Self> {
        validate_alpha(alpha)?;
        if x.is_empty() {
            return Err(Error::EmptyDomain("bit pattern must be nonempty"));
        }
        let mut path = Self::empty(alpha, x.len() as u64, seed)?;
        let mut s = 0u64;
        let mut w = KahanSum::new();
        for (i, &xb) in x.iter().enumerate() {
            let n = (i + 1) as u64;
            if xb {
                s += 1;
            }
            w.add(sigma(alpha, n));
            path.push_step(&PathStep {
                n,
                x: xb,
                s,
                w: w.value(),
            });
        }
        Ok(path)
    }

    fn empty(alpha: f64, n_max: u64, seed: u64) -> Result<Self> {
        validate_alpha(alpha)?;
        if n_max == 0 {
            return Err(Error::EmptyDomain("n_max must be at least 1"));
        }
        if n_max > u32::MAX as u64 {
            return Err(Error::Range {
                what: "n_max",
                got: n_max,
                limit_name: "maximum materialized length",
                limit: u32::MAX as u64,
            });
        }
        Ok(Self {
            alpha,
            seed,
            n_max,
            bits: Vec::with_capacity((n_max as usize + 63) / 64),
            s: Vec::with_capacity(n_max as usize),
            w: Vec::with_capacity(n_max as usize),
        })
    }

    fn push_step(&mut self, step: &PathStep) {
        let idx = (step.n - 1) as usize;
        if idx % 64 == 0 {
            self.bits.push(0);
        }
        if step.x {
            *self.bits.last_mut().unwrap() |= 1u64 << (idx % 64);
        }
        self.s.push(step.s as u32);
        self.w.push(step.w);
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_max(&self) -> u64 {
        self.n_max
    }

    /// `X_n`, 1-indexed.
    pub fn x(&self, n: u64) -> bool {
        debug_assert!(n >= 1 && n <= self.n_max);
        let idx = (n - 1) as usize;
        self.bits[idx / 64] >> (idx % 64) & 1 == 1
    }

    /// `sigma_n = n^{-alpha}`.
    pub fn sigma(&self, n: u64) -> f64 {
        sigma(self.alpha, n)
    }

    /// Centered value `Y_n = X_n - sigma_n`.
    pub fn y(&self, n: u64) -> f64 {
        (self.x(n) as u8 as f64) - self.sigma(n)
    }

    /// Prefix count `S_n`; `S_0 = 0`.
    pub fn s(&self, n: u64) -> u64 {
        if n == 0 {
            0
        } else {
            self.s[(n - 1) as usize] as u64
        }
    }

    /// Prefix weight `W_n`; `W_0 = 0`.
    pub fn w(&self, n: u64) -> f64 {
        if n == 0 {
            0.0
        } else {
            self.w[(n - 1) as usize]
        }
    }

    /// Counting table `a_n` = smallest index with `S_{a_n} = n`.
    pub fn counting_table(&self) -> CountingTable {
        let mut a = Vec::with_capacity(self.s(self.n_max) as usize);
        for n in 1..=self.n_max {
            if self.x(n) {
                a.push(n);
            }
        }
        CountingTable { a }
    }

    /// `(N, S_N / W_N)` along a schedule, for convergence diagnostics.
    ///
    /// Schedule values must not exceed `n_max`.
    pub fn sllr_ratio_series(&self, schedule: &[u64]) -> Result<Vec<(u64, f64)>> {
        let mut out = Vec::with_capacity(schedule.len());
        for &n in schedule {
            if n == 0 || n > self.n_max {
                return Err(Error::Range {
                    what: "schedule point",
                    got: n,
                    limit_name: "n_max",
                    limit: self.n_max,
                });
            }
            out.push((n, self.s(n) as f64 / self.w(n)));
        }
        Ok(out)
    }

    /// Compact text export: header plus run lengths of the bit sequence.
    /// Together with `(alpha, n_max, seed)` this replays the path in any
    /// language.
    pub fn export(&self) -> String {
        let mut runs = Vec::new();
        let first = self.x(1);
        let mut current = first;
        let mut len = 0u64;
        for n in 1..=self.n_max {
            if self.x(n) == current {
                len += 1;
            } else {
                runs.push(len);
                current = !current;
                len = 1;
            }
        }
        runs.push(len);
        let mut out = String::from("# randerg selector path v1\n");
        out.push_str(&format!(
            "alpha={} alpha_bits={:016x} n_max={} seed={} first={}\n",
            self.alpha,
            self.alpha.to_bits(),
            self.n_max,
            self.seed,
            first as u8
        ));
        out.push_str("runs=");
        for (i, r) in runs.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(&r.to_string());
        }
        out.push('\n');
        out
    }

    /// Parse a path previously written by [`SelectorPath::export`].
    pub fn import(text: &str) -> Result<Self> {
        let mut alpha_bits: Option<u64> = None;
        let mut n_max: Option<u64> = None;
        let mut seed: Option<u64> = None;
        let mut first: Option<bool> = None;
        let mut runs: Vec<u64> = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("runs=") {
                for tok in rest.split_whitespace() {
                    runs.push(
                        tok.parse::<u64>()
                            .map_err(|e| Error::Config(format!("bad run length `{tok}`: {e}")))?,
                    );
                }
            } else {
                for field in line.split_whitespace() {
                    let (key, value) = field
                        .split_once('=')
                        .ok_or_else(|| Error::Config(format!("bad header field `{field}`")))?;
                    match key {
                        "alpha" => {}
                        "alpha_bits" => {
                            alpha_bits = Some(u64::from_str_radix(value, 16).map_err(|e| {
                                Error::Config(format!("bad alpha_bits `{value}`: {e}"))
                            })?)
                        }
                        "n_max" => n_max = value.parse().ok(),
                        "seed" => seed = value.parse().ok(),
                        "first" => first = Some(value == "1"),
                        _ => return Err(Error::Config(format!("unknown header key `{key}`"))),
                    }
                }
            }
        }
        let alpha = f64::from_bits(
            alpha_bits.ok_or_else(|| Error::Config("missing alpha_bits".into()))?,
        );
        let n_max = n_max.ok_or_else(|| Error::Config("missing n_max".into()))?;
        let seed = seed.ok_or_else(|| Error::Config("missing seed".into()))?;
        let first = first.ok_or_else(|| Error::Config("missing first".into()))?;
        let total: u64 = runs.iter().sum();
        if total != n_max {
            return Err(Error::Config(format!(
                "run lengths sum to {total}, expected n_max = {n_max}"
            )));
        }
        let mut bits = Vec::with_capacity(n_max as usize);
        let mut value = first;
        for r in runs {
            for _ in 0..r {
                bits.push(value);
            }
            value = !value;
        }
        let mut path = Self::from_bits(alpha, &bits, seed)?;
        path.seed = seed;
        Ok(path)
    }

    /// CSV of `(N, S_N, W_N, a_N)` along a schedule; `a_N` is blank once
    /// `N` exceeds the number of selected integers.
    pub fn series_csv(&self, schedule: &[u64]) -> Result<String> {
        let table = self.counting_table();
        let mut out = String::from("N,S_N,W_N,a_N\n");
        for &n in schedule {
            if n == 0 || n > self.n_max {
                return Err(Error::Range {
                    what: "schedule point",
                    got: n,
                    limit_name: "n_max",
                    limit: self.n_max,
                });
            }
            let a = if n <= table.len() as u64 {
                table.a(n).to_string()
            } else {
                String::new()
            };
            out.push_str(&format!("{},{},{},{}\n", n, self.s(n), self.w(n), a));
        }
        Ok(out)
    }
}

/// Positions of the selected integers: `a(n)` is the smallest index with
/// `X_1 + ... + X_{a(n)} = n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountingTable {
    a: Vec<u64>,
}

impl CountingTable {
    /// `a_n`, 1-indexed. Panics if `n` exceeds the number of selected
    /// integers.
    pub fn a(&self, n: u64) -> u64 {
        self.a[(n - 1) as usize]
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn values(&self) -> &[u64] {
        &self.a
    }
}
