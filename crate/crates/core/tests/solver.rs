mod common;

use common::maxwellian;
use kfl_core::solver::*;
use kfl_core::{make_grid, sphere_quadrature, GridSpec, KflError, PhaseField};
use num_complex::Complex64;

fn grid() -> GridSpec {
    make_grid(2, 4, 4.5, 24).unwrap()
}

fn config(g: &GridSpec, collisions: bool) -> SolverConfig {
    let q = sphere_quadrature(2, 8).unwrap();
    let q = if collisions { q } else { q.scaled(0.0) };
    SolverConfig::new(g, 0.125, 0.125 / 8.0, q, 20, 1e-12).unwrap()
}

fn perturbed(g: &GridSpec, amplitude: f64) -> PhaseField {
    PhaseField::from_physical(g, |x, v| Complex64::new((-(v[0] * v[0] + v[1] * v[1])).exp() * (1.0 + amplitude * x[0].cos()), 0.0))
}

#[test]
fn collisionless_fixed_point_is_free_evolution() {
    let g = grid();
    let f0 = perturbed(&g, 0.1);
    let cfg = config(&g, false);
    let (traj, rep) = duhamel_picard(&f0, &cfg).unwrap();
    assert!(rep.converged);
    assert_eq!(rep.iterations, 1);
    assert_eq!(rep.diffs_l2[0], 0.0);
    for j in 0..traj.len() {
        let expected = kfl_core::free_evolve(&f0, traj.time(j));
        assert!(traj.sample(j).sub(&expected).unwrap().norm_l2() <= 1e-14 * f0.norm_l2());
    }
    let rk = integrate_interaction_picture(&f0, &cfg).unwrap();
    assert!(rk.sup_l2_distance(&traj).unwrap() <= 1e-12 * f0.norm_l2());
}

#[test]
fn zero_data_stays_zero() {
    let g = grid();
    let cfg = config(&g, true);
    let zero = PhaseField::zeros(&g);
    let rk = integrate_interaction_picture(&zero, &cfg).unwrap();
    assert_eq!(rk.sup_l2(), 0.0);
    let (traj, _) = duhamel_picard(&zero, &cfg).unwrap();
    let pos = positivity_check(&traj, 1e-6);
    assert_eq!(pos.min, 0.0);
    assert!(pos.passed);
}

#[test]
fn picard_contracts_conserves_and_matches_rk() {
    let g = grid();
    let cfg = config(&g, true);
    let f0 = perturbed(&g, 0.1);
    let (traj, rep) = duhamel_picard(&f0, &cfg).unwrap();
    assert!(rep.converged, "{rep:?}");
    assert_eq!(rep.halvings, 0);
    assert!(rep.best_ratio_within(8).unwrap() <= 0.5);
    assert_eq!(rep.diffs_l2.len(), rep.iterations);
    assert_eq!(rep.diffs_xsb.len(), rep.iterations);
    let cons = conservation(&traj);
    assert!(cons.mass <= 1e-10, "{cons:?}");
    assert!(cons.reality <= 1e-10);
    let rk = integrate_interaction_picture(&f0, &cfg).unwrap();
    assert!(rk.sup_l2_distance(&traj).unwrap() <= 1e-4);
    let json = rep.to_json();
    assert!(json.contains("\"diffs_xsb\"") && json.contains("\"ratios\""));
}

#[test]
fn negative_lobe_is_reported() {
    let g = grid();
    let cfg = config(&g, true);
    let f0 = perturbed(&g, 1.5);
    let (traj, _) = duhamel_picard(&f0, &cfg).unwrap();
    let pos = positivity_check(&traj, 1e-6);
    assert!(!pos.passed);
    assert!(pos.min < -0.1);
}

#[test]
fn solutions_are_translation_equivariant() {
    let g = grid();
    let cfg = config(&g, true);
    // the x-Nyquist mode cannot carry a phase shift, so keep the noise below it
    let mut noise = common::random_real_field(&g, 3).scaled(1e-3);
    for m in 0..g.mode_count() {
        if g.mode(m)[..2].iter().any(|&k| k.abs() == g.nyquist()) {
            noise.mode_slice_mut(m).fill(Complex64::new(0.0, 0.0));
        }
    }
    let f0 = perturbed(&g, 0.2).add(&noise).unwrap();
    let a = [0.7, -1.3];
    let shift = |f: &PhaseField| {
        let mut out = f.clone();
        for m in 0..g.mode_count() {
            let n = g.mode(m);
            let phase = Complex64::from_polar(1.0, n[0] as f64 * a[0] + n[1] as f64 * a[1]);
            out.mode_slice_mut(m).iter_mut().for_each(|c| *c *= phase);
        }
        out
    };
    let (base, _) = duhamel_picard(&f0, &cfg).unwrap();
    let (moved, _) = duhamel_picard(&shift(&f0), &cfg).unwrap();
    for j in 0..base.len() {
        let d = moved.sample(j).sub(&shift(base.sample(j))).unwrap().norm_l2();
        assert!(d <= 1e-12 * f0.norm_l2(), "sample {j}: {d}");
    }
}

#[test]
fn perturbation_with_zero_delta_is_zero() {
    let g = grid();
    let cfg = SolverConfig { tol: 1e-10, ..config(&g, true) };
    let f0 = perturbed(&g, 0.1);
    let dir = PhaseField::from_physical(&g, |x, v| Complex64::new((-(v[0] - 0.5).powi(2) - v[1] * v[1]).exp() * (0.5 + (x[0] + 0.3).sin()), 0.0));
    let report = perturbation_experiment(&f0, &dir, &[0.0, 1e-3], &cfg).unwrap();
    assert_eq!(report.rows[0].lhs, 0.0);
    assert!(report.rows[1].ratio > 0.0);
}

#[test]
fn snapshots_round_trip() {
    let g = grid();
    let cfg = config(&g, false);
    let (traj, _) = duhamel_picard(&maxwellian(&g), &cfg).unwrap();
    let dir = std::env::temp_dir().join(format!("kfl-snap-{}", std::process::id()));
    let paths = write_snapshots(&traj, &dir, 4).unwrap();
    assert_eq!(paths.len(), 5);
    for (k, p) in paths.iter().enumerate() {
        let back = PhaseField::read_snapshot(std::fs::File::open(p).unwrap()).unwrap();
        assert_eq!(&back, traj.sample(4 * k));
    }
    assert!(write_snapshots(&traj, &dir, 0).is_err());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn mismatched_grid_is_rejected() {
    let g = grid();
    let other = make_grid(2, 4, 4.5, 12).unwrap();
    let cfg = config(&g, true);
    assert!(matches!(duhamel_picard(&PhaseField::zeros(&other), &cfg), Err(KflError::GridMismatch)));
}
