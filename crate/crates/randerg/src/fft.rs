//! FFT-backed linear convolution and cross-correlation.

use num_complex::Complex64;
use rustfft::FftPlanner;

fn fft_size(min_len: usize) -> usize {
    min_len.next_power_of_two()
}

/// Linear convolution: `out[k] = sum_j a[j] b[k-j]`, length `a + b - 1`.
pub fn convolve(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    let size = fft_size(out_len);
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let mut fa = vec![Complex64::new(0.0, 0.0); size];
    fa[..a.len()].copy_from_slice(a);
    let mut fb = vec![Complex64::new(0.0, 0.0); size];
    fb[..b.len()].copy_from_slice(b);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    let scale = 1.0 / size as f64;
    fa.truncate(out_len);
    for x in &mut fa {
        *x *= scale;
    }
    fa
}

/// Cross-correlation `corr(h) = sum_m u[m+h] conj(v[m])` for
/// `h = -(v.len()-1) ..= u.len()-1`, returned with `out[i]` holding the
/// value at `h = i - (v.len() - 1)`.
pub fn cross_correlate(u: &[Complex64], v: &[Complex64]) -> Vec<Complex64> {
    if u.is_empty() || v.is_empty() {
        return Vec::new();
    }
    // corr(h) = conv(u, reverse(conj(v)))(h + v.len() - 1).
    let vr: Vec<Complex64> = v.iter().rev().map(|z| z.conj()).collect();
    convolve(u, &vr)
}

/// Index into [`cross_correlate`] output for shift `h`.
pub fn corr_index(v_len: usize, h: i64) -> usize {
    (h + v_len as i64 - 1) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct_corr(u: &[Complex64], v: &[Complex64], h: i64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for m in 0..v.len() as i64 {
            let idx = m + h;
            if idx >= 0 && (idx as usize) < u.len() {
                acc += u[idx as usize] * v[m as usize].conj();
            }
        }
        acc
    }

    #[test]
    fn correlation_matches_direct_sum() {
        let mut rng = crate::rng::seeded_rng(3);
        use rand::Rng;
        let u: Vec<Complex64> = (0..37)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        let v: Vec<Complex64> = (0..23)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        let c = cross_correlate(&u, &v);
        assert_eq!(c.len(), u.len() + v.len() - 1);
        for h in -(v.len() as i64 - 1)..=(u.len() as i64 - 1) {
            let got = c[corr_index(v.len(), h)];
            let want = direct_corr(&u, &v, h);
            assert!((got - want).norm() < 1e-10, "h={h}");
        }
    }

    #[test]
    fn convolution_identity() {
        let a = vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(2.0, -1.0),
            Complex64::new(0.0, 3.0),
        ];
        let delta = vec![Complex64::new(1.0, 0.0)];
        let c = convolve(&a, &delta);
        for (x, y) in a.iter().zip(&c) {
            assert!((x - y).norm() < 1e-12);
        }
    }
}
