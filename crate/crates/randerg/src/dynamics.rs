//! Concrete measure-preserving systems and observables.
//!
//! Three point-transformation models: an irrational rotation of the circle
//! (closed-form orbits, no iteration), the doubling map (orbits through a
//! 64-bit fixed-point fraction, since plain doubles lose the orbit after
//! ~52 doublings), and a cyclic shift on `Z/mZ`. Observables are characters,
//! coboundaries `h - h o T`, and value tables. Orthogonality to the
//! invariant factor is realized as "zero mean on an ergodic system".

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::TAU;

/// Golden-ratio conjugate, the default rotation angle: the slowest
/// equidistributing (worst-case Diophantine) choice.
pub const GOLDEN_THETA: f64 = 0.618033988749894848;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DynSystem {
    /// `x -> x + theta mod 1` on the circle.
    Rotation { theta: f64 },
    /// `x -> 2x mod 1` on the circle.
    Doubling,
    /// `j -> j + 1 mod m` on `Z/mZ`.
    Cyclic { m: u32 },
}

/// A point of the state space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum State {
    /// Point of the circle `[0, 1)`.
    Circle(f64),
    /// Residue class mod `m`.
    Residue(u32),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Observable {
    /// `f(x) = e(kx)` on the circle, `f(j) = e(kj/m)` on `Z/mZ`.
    Character { k: i64 },
    /// `f = h - h o T`.
    Coboundary(Box<Observable>),
    /// Piecewise-constant values: cell `j` of `Z/mZ`, or the arc
    /// `[j/m, (j+1)/m)` on the circle.
    Table(Vec<Complex64>),
}

impl Observable {
    pub fn coboundary(h: Observable) -> Self {
        Observable::Coboundary(Box::new(h))
    }

    /// Sup-norm bound (for coboundaries, the bound `2 ||h||`).
    pub fn bound(&self) -> f64 {
        match self {
            Observable::Character { .. } => 1.0,
            Observable::Coboundary(h) => 2.0 * h.bound(),
            Observable::Table(v) => v.iter().map(|z| z.norm()).fold(0.0, f64::max),
        }
    }
}

fn frac(x: f64) -> f64 {
    x.rem_euclid(1.0)
}

fn circle_char(k: i64, x: f64) -> Complex64 {
    Complex64::from_polar(1.0, TAU * frac(k as f64 * x))
}

const FIXED_SCALE: f64 = 18_446_744_073_709_551_616.0; // 2^64

/// `2^n x mod 1` with `x` read as a 64-bit fixed-point fraction.
/// Exact for the represented dyadic rational; the orbit reaches 0 once
/// the mantissa is exhausted.
fn doubling_orbit(x: f64, n: u64) -> f64 {
    let fixed = (frac(x) * FIXED_SCALE) as u64;
    let shifted = if n >= 64 { 0 } else { fixed << n };
    shifted as f64 / FIXED_SCALE
}

impl DynSystem {
    /// Advance a state by `n` steps of the transformation.
    pub fn advance(&self, x: State, n: u64) -> Result<State> {
        match (*self, x) {
            (DynSystem::Rotation { theta }, State::Circle(x)) => {
                Ok(State::Circle(frac(x + n as f64 * theta)))
            }
            (DynSystem::Doubling, State::Circle(x)) => Ok(State::Circle(doubling_orbit(x, n))),
            (DynSystem::Cyclic { m }, State::Residue(j)) => {
                Ok(State::Residue(((j as u64 + n) % m as u64) as u32))
            }
            _ => Err(Error::WindowMismatch("state kind does not match the system")),
        }
    }
}

/// `f(T^n x)`.
///
/// Rotation orbits are evaluated in closed form `x + n theta mod 1`;
/// doubling orbits through the fixed-point fraction. A `Table` observable
/// on the doubling map needs the orbit position itself, which is out of
/// precision past 52 doublings.
pub fn orbit_eval(sys: &DynSystem, f: &Observable, x: State, n: u64) -> Result<Complex64> {
    match f {
        Observable::Coboundary(h) => coboundary_eval(sys, h, x, n),
        Observable::Character { k } => match (sys, x) {
            (DynSystem::Rotation { theta }, State::Circle(x)) => {
                Ok(circle_char(*k, frac(x + n as f64 * theta)))
            }
            (DynSystem::Doubling, State::Circle(x)) => Ok(circle_char(*k, doubling_orbit(x, n))),
            (DynSystem::Cyclic { m }, State::Residue(j)) => {
                let m = *m as i128;
                let pos = (j as u64 + n) % m as u64;
                let num = (*k as i128 * pos as i128).rem_euclid(m);
                Ok(Complex64::from_polar(1.0, TAU * num as f64 / m as f64))
            }
            _ => Err(Error::WindowMismatch("state kind does not match the system")),
        },
        Observable::Table(v) => match (sys, x) {
            (DynSystem::Cyclic { m }, State::Residue(j)) => {
                if v.len() != *m as usize {
                    return Err(Error::WindowMismatch("table length must equal m"));
                }
                let pos = ((j as u64 + n) % *m as u64) as usize;
                Ok(v[pos])
            }
            (DynSystem::Rotation { .. }, State::Circle(_)) => {
                let State::Circle(pos) = sys.advance(x, n)? else {
                    unreachable!()
                };
                Ok(v[(frac(pos) * v.len() as f64) as usize % v.len()])
            }
            (DynSystem::Doubling, State::Circle(_)) => {
                if n > 52 {
                    return Err(Error::Precision(
                        "doubling orbit past 52 steps cannot index a table",
                    ));
                }
                let State::Circle(pos) = sys.advance(x, n)? else {
                    unreachable!()
                };
                Ok(v[(frac(pos) * v.len() as f64) as usize % v.len()])
            }
            _ => Err(Error::WindowMismatch("state kind does not match the system")),
        },
    }
}

/// `h(T^n x) - h(T^{n+1} x)`, the n-th orbit value of the coboundary of `h`.
pub fn coboundary_eval(sys: &DynSystem, h: &Observable, x: State, n: u64) -> Result<Complex64> {
    Ok(orbit_eval(sys, h, x, n)? - orbit_eval(sys, h, x, n + 1)?)
}

/// Average of `f` over the state space: exact for cyclic systems and for
/// circle characters, midpoint quadrature with `grid_size` cells otherwise.
pub fn mean_estimate(sys: &DynSystem, f: &Observable, grid_size: u32) -> Result<Complex64> {
    if grid_size == 0 {
        return Err(Error::EmptyDomain("grid_size must be at least 1"));
    }
    match (sys, f) {
        (DynSystem::Rotation { .. } | DynSystem::Doubling, Observable::Character { k }) => {
            Ok(if *k == 0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            })
        }
        (DynSystem::Cyclic { m }, Observable::Character { k }) => {
            Ok(if k.rem_euclid(*m as i64) == 0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            })
        }
        (DynSystem::Cyclic { m }, Observable::Table(v)) => {
            if v.len() != *m as usize {
                return Err(Error::WindowMismatch("table length must equal m"));
            }
            Ok(v.iter().sum::<Complex64>() / *m as f64)
        }
        (DynSystem::Rotation { .. } | DynSystem::Doubling, Observable::Table(v)) => {
            Ok(v.iter().sum::<Complex64>() / v.len() as f64)
        }
        (_, Observable::Coboundary(h)) => {
            // mean(h) - mean(h o T); evaluate both by quadrature on the
            // same grid so the cancellation is exact for exactly-averaged
            // observables.
            let states: Vec<State> = match sys {
                DynSystem::Cyclic { m } => (0..*m).map(State::Residue).collect(),
                _ => (0..grid_size)
                    .map(|i| State::Circle((i as f64 + 0.5) / grid_size as f64))
                    .collect(),
            };
            let mut acc = Complex64::new(0.0, 0.0);
            for &x in &states {
                acc += orbit_eval(sys, h, x, 0)? - orbit_eval(sys, h, x, 1)?;
            }
            Ok(acc / states.len() as f64)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn rotation_character_closed_form() {
        let sys = DynSystem::Rotation {
            theta: GOLDEN_THETA,
        };
        let f = Observable::Character { k: 1 };
        for n in [0u64, 1, 7, 1000] {
            let v = orbit_eval(&sys, &f, State::Circle(0.25), n).unwrap();
            let expect = circle_char(1, frac(0.25 + n as f64 * GOLDEN_THETA));
            assert!(close(v, expect, 1e-12));
        }
    }

    #[test]
    fn n_zero_is_identity() {
        let sys = DynSystem::Cyclic { m: 4 };
        let t = Observable::Table(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, -1.0),
        ]);
        let v = orbit_eval(&sys, &t, State::Residue(2), 0).unwrap();
        assert!(close(v, Complex64::new(-1.0, 0.0), 0.0));
    }

    #[test]
    fn cyclic_table_lookup() {
        let sys = DynSystem::Cyclic { m: 4 };
        let t = Observable::Table(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, -1.0),
        ]);
        let v = orbit_eval(&sys, &t, State::Residue(0), 3).unwrap();
        assert!(close(v, Complex64::new(0.0, -1.0), 0.0), "f(3) = -i");
    }

    #[test]
    fn rotation_coboundary_algebra() {
        // f(T^n x) = e(x + n theta) (1 - e(theta)) for f = h - Th, h = e(x).
        let theta = GOLDEN_THETA;
        let sys = DynSystem::Rotation { theta };
        let h = Observable::Character { k: 1 };
        let fac = Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, TAU * theta);
        for n in [0u64, 3, 64] {
            let v = coboundary_eval(&sys, &h, State::Circle(0.1), n).unwrap();
            let expect = circle_char(1, frac(0.1 + n as f64 * theta)) * fac;
            assert!(close(v, expect, 1e-10));
        }
    }

    #[test]
    fn coboundary_telescopes() {
        let sys = DynSystem::Rotation {
            theta: GOLDEN_THETA,
        };
        let h = Observable::Character { k: 2 };
        let x = State::Circle(0.33);
        let n_terms = 200u64;
        let mut acc = Complex64::new(0.0, 0.0);
        for n in 1..=n_terms {
            acc += coboundary_eval(&sys, &h, x, n).unwrap();
        }
        let expect =
            orbit_eval(&sys, &h, x, 1).unwrap() - orbit_eval(&sys, &h, x, n_terms + 1).unwrap();
        assert!(close(acc, expect, 1e-9));
        assert!(acc.norm() <= 2.0 * h.bound() + 1e-9);
    }

    #[test]
    fn cyclic_coboundary_full_period_vanishes() {
        let sys = DynSystem::Cyclic { m: 6 };
        let h = Observable::Table(
            (0..6)
                .map(|j| Complex64::new(j as f64, (j * j) as f64))
                .collect(),
        );
        let x = State::Residue(2);
        let mut acc = Complex64::new(0.0, 0.0);
        for n in 0..6 {
            acc += coboundary_eval(&sys, &h, x, n).unwrap();
        }
        assert!(close(acc, Complex64::new(0.0, 0.0), 1e-12));
    }

    #[test]
    fn doubling_character_uses_fixed_point() {
        let sys = DynSystem::Doubling;
        let f = Observable::Character { k: 1 };
        let x = 0.3125; // 5/16: orbit 5/16 -> 5/8 -> 1/4 -> 1/2 -> 0
        let expected = [0.3125, 0.625, 0.25, 0.5, 0.0];
        for (n, &e) in expected.iter().enumerate() {
            let v = orbit_eval(&sys, &f, State::Circle(x), n as u64).unwrap();
            assert!(close(v, circle_char(1, e), 1e-12), "n={n}");
        }
    }

    #[test]
    fn doubling_table_past_precision_errors() {
        let sys = DynSystem::Doubling;
        let t = Observable::Table(vec![Complex64::new(1.0, 0.0); 4]);
        assert!(orbit_eval(&sys, &t, State::Circle(0.3), 53).is_err());
        assert!(orbit_eval(&sys, &t, State::Circle(0.3), 10).is_ok());
    }

    #[test]
    fn semigroup_law() {
        let systems = [
            DynSystem::Rotation {
                theta: GOLDEN_THETA,
            },
            DynSystem::Doubling,
            DynSystem::Cyclic { m: 12 },
        ];
        for sys in systems {
            let x = match sys {
                DynSystem::Cyclic { .. } => State::Residue(5),
                _ => State::Circle(0.137),
            };
            let f = Observable::Character { k: 3 };
            for (n, m) in [(3u64, 4u64), (10, 7), (0, 5)] {
                let lhs = orbit_eval(&sys, &f, x, n + m).unwrap();
                let mid = sys.advance(x, m).unwrap();
                let rhs = orbit_eval(&sys, &f, mid, n).unwrap();
                assert!(close(lhs, rhs, 1e-9), "{sys:?} n={n} m={m}");
            }
        }
    }

    #[test]
    fn cyclic_transform_is_bijection() {
        let m = 17u32;
        let sys = DynSystem::Cyclic { m };
        let mut seen = vec![false; m as usize];
        for j in 0..m {
            let State::Residue(t) = sys.advance(State::Residue(j), 1).unwrap() else {
                panic!()
            };
            assert!(!seen[t as usize]);
            seen[t as usize] = true;
        }
        assert!(seen.iter().all(|&b| b));
    }

    #[test]
    fn means_exact() {
        let circle = DynSystem::Rotation {
            theta: GOLDEN_THETA,
        };
        assert!(close(
            mean_estimate(&circle, &Observable::Character { k: 0 }, 1).unwrap(),
            Complex64::new(1.0, 0.0),
            0.0
        ));
        assert!(close(
            mean_estimate(&circle, &Observable::Character { k: 5 }, 1).unwrap(),
            Complex64::new(0.0, 0.0),
            0.0
        ));
        let cyc = DynSystem::Cyclic { m: 6 };
        let table = Observable::Table(
            (0..6)
                .map(|j| Complex64::new((j as f64) - 2.5, 0.0))
                .collect(),
        );
        assert!(close(
            mean_estimate(&cyc, &table, 1).unwrap(),
            Complex64::new(0.0, 0.0),
            1e-15
        ));
    }

    #[test]
    fn coboundary_mean_vanishes() {
        let systems = [
            DynSystem::Rotation {
                theta: GOLDEN_THETA,
            },
            DynSystem::Cyclic { m: 9 },
        ];
        for sys in systems {
            let f = Observable::coboundary(Observable::Character { k: 1 });
            let m = mean_estimate(&sys, &f, 128).unwrap();
            assert!(m.norm() <= 1e-10, "{sys:?}: {m}");
        }
    }

    #[test]
    fn nonzero_character_has_zero_mean() {
        // Orthogonality to the invariant factor for the ergodic models.
        for k in [1i64, -3, 7] {
            let v = mean_estimate(&DynSystem::Doubling, &Observable::Character { k }, 1).unwrap();
            assert_eq!(v, Complex64::new(0.0, 0.0));
        }
    }
}
