#![allow(dead_code)]

use kfl_core::rng::{complex_gaussian, stream};
use kfl_core::{GridSpec, PhaseField};
use num_complex::Complex64;

pub fn random_field(grid: &GridSpec, seed: u64) -> PhaseField {
    let mut rng = stream(seed, &[0xf1e1d]);
    let data = (0..grid.len()).map(|_| complex_gaussian(&mut rng)).collect();
    PhaseField::from_data(grid, data).unwrap()
}

/// Random field of a real f(x, v): conjugate-symmetric in n, Nyquist modes real.
pub fn random_real_field(grid: &GridSpec, seed: u64) -> PhaseField {
    let f = random_field(grid, seed);
    let mut out = f.clone();
    for m in 0..grid.mode_count() {
        let c = f.conjugate_mode(m);
        for (j, z) in out.mode_slice_mut(m).iter_mut().enumerate() {
            *z = 0.5 * (f.mode_slice(m)[j] + f.mode_slice(c)[j].conj());
        }
    }
    out
}

pub fn maxwellian(grid: &GridSpec) -> PhaseField {
    let d = grid.dim();
    PhaseField::from_physical(grid, |_, v| Complex64::new((-(v[..d].iter().map(|x| x * x).sum::<f64>())).exp(), 0.0))
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
