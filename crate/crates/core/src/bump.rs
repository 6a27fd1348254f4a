//! The smooth cutoffs φ, φ_M, ψ and ψ_T.
//!
//! φ is radial, equal to 1 on |x| ≤ 1 and 0 on |x| ≥ 2, joined by the C^∞
//! step `s(y) = e^{-1/y} / (e^{-1/y} + e^{-1/(1-y)})`, `y = |x| - 1`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftDirection;

use crate::fft::plan;

/// C^∞ step: 0 for y ≤ 0, 1 for y ≥ 1.
pub fn smooth_step(y: f64) -> f64 {
    if y <= 0.0 {
        0.0
    } else if y >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / y).exp();
        let b = (-1.0 / (1.0 - y)).exp();
        a / (a + b)
    }
}

/// φ(x) as a function of the radius |x|.
pub fn phi(radius: f64) -> f64 {
    1.0 - smooth_step(radius.abs() - 1.0)
}

/// φ_M(v) = φ(|v|/M) - φ(2|v|/M), supported in M/2 ≤ |v| ≤ 2M.
pub fn phi_dyadic(radius: f64, m: f64) -> f64 {
    phi(radius / m) - phi(2.0 * radius / m)
}

/// ψ(t) = φ(|t|): 1 on [-1, 1], 0 outside (-2, 2).
pub fn psi(t: f64) -> f64 {
    phi(t)
}

/// ψ_T(t) = ψ(t/T).
pub fn psi_scaled(t: f64, scale: f64) -> f64 {
    psi(t / scale)
}

/// Japanese bracket ⟨z⟩ = (1 + z²)^{1/2}.
#[inline]
pub fn bracket(z: f64) -> f64 {
    (1.0 + z * z).sqrt()
}

/// Sobolev norm `(∫ ⟨τ⟩^{2b} |ĝ(τ)|² dτ/2π)^{1/2}` of a function on the line,
/// by a DFT of `samples` points over the periodic window `[-half_width, half_width)`.
/// `homogeneous` swaps ⟨τ⟩ for |τ|.
pub fn hb_norm_1d(g: impl Fn(f64) -> f64, b: f64, half_width: f64, samples: usize, homogeneous: bool) -> f64 {
    let h = 2.0 * half_width / samples as f64;
    let mut data: Vec<Complex64> = (0..samples)
        .map(|j| Complex64::new(g(-half_width + j as f64 * h), 0.0))
        .collect();
    plan(samples, FftDirection::Forward).process(&mut data);
    let period = samples as f64 * h;
    let mut acc = 0.0;
    for (k, c) in data.iter().enumerate() {
        let kk = if k < samples.div_ceil(2) { k as i64 } else { k as i64 - samples as i64 };
        let tau = 2.0 * PI * kk as f64 / period;
        let w = if homogeneous { tau.abs().powf(2.0 * b) } else { bracket(tau).powf(2.0 * b) };
        acc += w * (c * h).norm_sqr();
    }
    (acc / period).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateaus_and_support() {
        for &x in &[0.0, 0.5, 1.0, -1.0] {
            assert_eq!(phi(x), 1.0);
        }
        for &x in &[2.0, 2.5, -3.0] {
            assert_eq!(phi(x), 0.0);
        }
        assert!((phi(1.5) - 0.5).abs() < 1e-15);
        let mut prev = 1.0;
        for i in 0..=100 {
            let v = phi(1.0 + i as f64 / 100.0);
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn dyadic_support() {
        for &m in &[1.0, 2.0, 8.0] {
            assert_eq!(phi_dyadic(2.0 * m, m), 0.0);
            assert_eq!(phi_dyadic(m / 4.0, m), 0.0);
            assert_eq!(phi_dyadic(m / 2.0, m), 0.0);
            assert!(phi_dyadic(m, m) > 0.0);
        }
    }

    #[test]
    fn l2_norm_of_psi_matches_direct_quadrature() {
        let direct: f64 = {
            let n = 200_000;
            let h = 4.0 / n as f64;
            (0..n).map(|j| psi(-2.0 + (j as f64 + 0.5) * h).powi(2) * h).sum::<f64>().sqrt()
        };
        let via_dft = hb_norm_1d(psi, 0.0, 8.0, 4096, false);
        assert!((direct - via_dft).abs() < 1e-9, "{direct} vs {via_dft}");
    }
}
