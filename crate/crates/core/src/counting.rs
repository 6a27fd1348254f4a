//! Measures of lattice-slab level sets
//! `{(n, v) : C₀ ≤ (v - a)·(n - b) ≤ C₀ + K}` under counting measure in
//! `n ∈ Z^d ∩ [-N, N]^d` times Lebesgue measure in `v ∈ [-M, M]^d`.

use rand::Rng;

use crate::error::{invalid, Result};
use crate::rng::stream;

#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetQuery {
    pub d: usize,
    pub n: f64,
    pub m: f64,
    pub k: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c0: f64,
}

impl LevelSetQuery {
    pub fn new(d: usize, n: f64, m: f64, k: f64, a: Vec<f64>, b: Vec<f64>, c0: f64) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(invalid("d", format!("{d} not in 1..=3")));
        }
        if a.len() != d || b.len() != d {
            return Err(invalid("a, b", format!("need {d} components")));
        }
        if !(n >= 1.0 && m > 0.0 && k >= 1.0 && c0 >= 0.0) {
            return Err(invalid("query", format!("need N ≥ 1, M > 0, K ≥ 1, C₀ ≥ 0; got N={n} M={m} K={k} C₀={c0}")));
        }
        Ok(Self { d, n, m, k, a, b, c0 })
    }

    /// Lattice points per axis, `2⌊N⌋ + 1`.
    fn side(&self) -> i64 {
        2 * self.n.floor() as i64 + 1
    }
}

/// Length of `{v ∈ [-M, M] : lo ≤ (v - a)c + r ≤ hi}`.
fn slab_length(m: f64, a: f64, c: f64, r: f64, lo: f64, hi: f64) -> f64 {
    if c == 0.0 {
        return if lo <= r && r <= hi { 2.0 * m } else { 0.0 };
    }
    let (mut x0, mut x1) = (a + (lo - r) / c, a + (hi - r) / c);
    if x0 > x1 {
        std::mem::swap(&mut x0, &mut x1);
    }
    (x1.min(m) - x0.max(-m)).max(0.0)
}

/// Monte Carlo estimate of the level-set measure with its standard error.
///
/// n is drawn uniformly from the lattice box and v uniformly from the
/// velocity box, except along the axis where |n_i - b_i| is largest: there the
/// slab is intersected with `[-M, M]` exactly.
pub fn measure_level_set(q: &LevelSetQuery, mc_samples: usize, seed: u64) -> Result<(f64, f64)> {
    let per = level_set_samples(q, mc_samples, seed, &[(q.c0, q.c0 + q.k)])?;
    let values = &per[0];
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
    Ok((mean, (var / values.len() as f64).sqrt()))
}

/// Per-sample unbiased estimates for several level windows, all sharing the
/// same random draws.
pub fn level_set_samples(q: &LevelSetQuery, mc_samples: usize, seed: u64, windows: &[(f64, f64)]) -> Result<Vec<Vec<f64>>> {
    if mc_samples < 10_000 {
        return Err(invalid("mc_samples", format!("{mc_samples} < 10^4")));
    }
    let d = q.d;
    let side = q.side();
    let half = side / 2;
    let scale = (side as f64).powi(d as i32) * (2.0 * q.m).powi(d as i32 - 1);
    let mut rng = stream(seed, &[]);
    let mut out = vec![Vec::with_capacity(mc_samples); windows.len()];
    let mut c = [0.0f64; 3];
    let mut v = [0.0f64; 3];
    for _ in 0..mc_samples {
        let mut pivot = 0;
        for i in 0..d {
            let n = rng.gen_range(0..side) - half;
            c[i] = n as f64 - q.b[i];
            if c[i].abs() > c[pivot].abs() {
                pivot = i;
            }
        }
        for i in 0..d {
            v[i] = rng.gen_range(-q.m..q.m);
        }
        let r: f64 = (0..d).filter(|&i| i != pivot).map(|i| (v[i] - q.a[i]) * c[i]).sum();
        for (w, &(lo, hi)) in windows.iter().enumerate() {
            out[w].push(scale * slab_length(q.m, q.a[pivot], c[pivot], r, lo, hi));
        }
    }
    Ok(out)
}

/// Exact d = 1 measure with `a = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exact1d {
    /// Σ over n ≠ b¹ of the exact interval lengths.
    pub exact: f64,
    /// Length contributed by n = b¹ when that lattice point exists.
    pub degenerate: f64,
    /// The closed form `2 Σ_{n ≠ b¹} K/|n - b¹|` with the extra factor 2.
    pub closed_form: f64,
}

/// `Σ_{n=-⌊N⌋}^{⌊N⌋}` of the length of `{v ∈ [-M, M] : C₀ ≤ v(n - b¹) ≤ C₀ + K}`.
/// `m = None` removes the velocity box, giving lengths `K/|n - b¹|`.
pub fn measure_level_set_exact_1d(n: f64, b1: f64, c0: f64, k: f64, m: Option<f64>) -> Result<Exact1d> {
    if !(0.0..1.0).contains(&b1) {
        return Err(invalid("b1", format!("{b1} not in [0, 1)")));
    }
    let top = n.floor() as i64;
    let mut exact = 0.0;
    let mut closed = 0.0;
    let mut degenerate = 0.0;
    for j in -top..=top {
        let c = j as f64 - b1;
        if c == 0.0 {
            if let Some(m) = m {
                degenerate = if c0 <= 0.0 && 0.0 <= c0 + k { 2.0 * m } else { 0.0 };
            }
            continue;
        }
        closed += 2.0 * k / c.abs();
        exact += match m {
            Some(m) => slab_length(m, 0.0, c, 0.0, c0, c0 + k),
            None => k / c.abs(),
        };
    }
    Ok(Exact1d {
        exact,
        degenerate,
        closed_form: closed,
    })
}

/// `K · max{M^d, (MN)^{d-1} log(1 + N)}`.
pub fn bound_rhs(q: &LevelSetQuery) -> f64 {
    let d = q.d as i32;
    q.k * q.m.powi(d).max((q.m * q.n).powi(d - 1) * (1.0 + q.n).ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn query(d: usize, n: f64, m: f64, k: f64, c0: f64) -> LevelSetQuery {
        LevelSetQuery::new(d, n, m, k, vec![0.0; d], vec![0.0; d], c0).unwrap()
    }

    #[test]
    fn harmonic_sum_without_box() {
        let e = measure_level_set_exact_1d(4.0, 0.0, 0.0, 1.0, None).unwrap();
        assert!((e.exact - 25.0 / 6.0).abs() < 1e-14);
        assert!((e.closed_form - 25.0 / 3.0).abs() < 1e-14);
        let doubled = measure_level_set_exact_1d(4.0, 0.0, 0.0, 2.0, None).unwrap();
        assert!((doubled.exact - 2.0 * e.exact).abs() < 1e-14);
    }

    #[test]
    fn single_interval() {
        assert_eq!(slab_length(100.0, 0.0, 1.0, 0.0, 0.0, 1.0), 1.0);
        assert_eq!(slab_length(1.0, 0.0, 0.0, 0.5, 0.0, 1.0), 2.0);
        assert_eq!(slab_length(1.0, 0.0, -2.0, 0.0, 0.0, 1.0), 0.5);
    }

    #[test]
    fn bound_examples() {
        assert_eq!(bound_rhs(&query(2, 1.0, 1.0, 1.0, 0.0)), 1.0);
        let q = query(2, 16.0, 4.0, 2.0, 0.0);
        assert!((bound_rhs(&q) - 2.0 * (64.0 * 17f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn far_level_is_empty() {
        let q = query(2, 4.0, 2.0, 1.0, 4.0 * 2.0 * 2.0 * 4.0 + 2.0);
        assert_eq!(measure_level_set(&q, 10_000, 1).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn rejects_small_sample_counts() {
        assert!(measure_level_set(&query(2, 1.0, 1.0, 1.0, 0.0), 100, 1).is_err());
    }
}
