mod common;

use common::random_field;
use kfl_core::bump::{phi, phi_dyadic};
use kfl_core::lp::{in_shell, project_modulation, project_v_dyadic, project_x_block, project_x_shell, velocity_multiplier, DyadicIndex};
use kfl_core::{make_grid, KflError, PhaseField, Trajectory};
use num_complex::Complex64;

fn inner(a: &PhaseField, b: &PhaseField) -> Complex64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x.conj() * y).sum()
}

#[test]
fn shells_partition_and_are_orthogonal() {
    let g = make_grid(2, 16, 3.0, 4).unwrap();
    let f = random_field(&g, 11);
    let shells: Vec<PhaseField> = [1, 2, 4, 8].iter().map(|&n| project_x_shell(&f, n).unwrap()).collect();
    let mut sum = PhaseField::zeros(&g);
    for s in &shells {
        sum = sum.add(s).unwrap();
    }
    // (-8, 8]^2 is the whole 16-mode grid
    assert!(sum.sub(&f).unwrap().max_abs() == 0.0);
    let bessel: f64 = shells.iter().map(|s| s.norm_l2().powi(2)).sum();
    assert!((bessel - f.norm_l2().powi(2)).abs() <= 1e-12 * f.norm_l2().powi(2));
    for (i, a) in [1, 2, 4, 8].iter().enumerate() {
        for (j, b) in [1, 2, 4, 8].iter().enumerate() {
            let ab = project_x_shell(&shells[i], *b).unwrap();
            if a == b {
                assert_eq!(ab, shells[i], "idempotent");
            } else {
                assert_eq!(ab.max_abs(), 0.0);
                assert_eq!(inner(&shells[i], &shells[j]).norm(), 0.0);
            }
        }
    }
    let h = random_field(&g, 12);
    let lhs = inner(&project_x_shell(&f, 4).unwrap(), &h);
    let rhs = inner(&f, &project_x_shell(&h, 4).unwrap());
    assert!((lhs - rhs).norm() <= 1e-12 * lhs.norm());
}

#[test]
fn mode_three_lives_in_shell_four() {
    for n in [1u32, 2, 4, 8, 16] {
        assert_eq!(in_shell(&[3, 0, 0], n, 2), n == 4, "N = {n}");
    }
    assert!(in_shell(&[0, 0, 0], 1, 2));
    assert!(in_shell(&[1, 0, 0], 1, 2));
    assert!(!in_shell(&[-1, 0, 0], 1, 2));
}

#[test]
fn shifted_blocks_tile_the_lattice() {
    let g = make_grid(2, 16, 3.0, 4).unwrap();
    let f = random_field(&g, 13);
    let cube = project_x_block(&f, &[0, 0], 4).unwrap();
    assert_eq!(project_x_shell(&cube, 4).unwrap(), project_x_shell(&f, 4).unwrap());
    let mut sum = PhaseField::zeros(&g);
    for a0 in [-8i64, 0, 8] {
        for a1 in [-8i64, 0, 8] {
            sum = sum.add(&project_x_block(&f, &[a0, a1], 4).unwrap()).unwrap();
        }
    }
    assert_eq!(sum.sub(&f).unwrap().max_abs(), 0.0);

    let a = [3i64, -2];
    let single = |n0: [i64; 2]| {
        PhaseField::from_fn(&g, move |n, _| if n[0] == a[0] + n0[0] && n[1] == a[1] + n0[1] { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) })
    };
    for (n0, inside) in [([0, 0], true), ([2, -1], true), ([-2, 0], false), ([1, 3], false)] {
        let out = project_x_block(&single(n0), &a, 2).unwrap();
        assert_eq!(out.max_abs() == 1.0, inside, "{n0:?}");
    }
}

#[test]
fn velocity_cutoffs_telescope_and_have_dyadic_support() {
    for i in 0..400 {
        let r = i as f64 * 0.05;
        let sum: f64 = (0..=3).map(|k| phi_dyadic(r, 2f64.powi(k))).sum();
        assert!((sum - (phi(r / 8.0) - phi(2.0 * r))).abs() < 1e-12);
        for m in [1.0, 2.0, 4.0] {
            if r >= 2.0 * m || r <= m / 4.0 {
                assert_eq!(phi_dyadic(r, m), 0.0);
            }
        }
    }
    let g = make_grid(2, 2, 8.0, 16).unwrap();
    let w = velocity_multiplier(&g, 2.0);
    assert!(w.iter().all(|&x| (0.0..=1.0).contains(&x)));
}

#[test]
fn velocity_projector_is_not_idempotent() {
    let g = make_grid(2, 4, 6.0, 16).unwrap();
    let f = random_field(&g, 14);
    let once = project_v_dyadic(&f, 2).unwrap();
    let twice = project_v_dyadic(&once, 2).unwrap();
    assert!(twice.sub(&once).unwrap().norm_l2() > 1e-3 * once.norm_l2());
}

#[test]
fn invalid_dyadic_scales_are_rejected() {
    let g = make_grid(2, 4, 4.0, 8).unwrap();
    let f = PhaseField::zeros(&g);
    assert!(project_x_shell(&f, 3).is_err());
    assert!(project_v_dyadic(&f, 0).is_err());
    assert!(DyadicIndex::new(4, 6).is_err());
    assert!(DyadicIndex::new(4, 8).is_ok());
}

#[test]
fn modulation_shells_partition_and_are_orthogonal() {
    let g = make_grid(2, 4, 3.0, 6).unwrap();
    // interaction-frame tones on the DFT grid, |σ| ≤ 4·2π/(S dt) < 8
    let base = 2.0 * std::f64::consts::PI * 16.0 / 65.0;
    let tones: Vec<PhaseField> = (0..5).map(|k| random_field(&g, 100 + k)).collect();
    let traj = Trajectory::from_fn(&g, 2.0, 65, |t| {
        let mut g_t = PhaseField::zeros(&g);
        for (k, tone) in tones.iter().enumerate() {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let mut term = tone.clone();
            term.scale_complex(Complex64::from_polar(1.0, sign * base * k as f64 * t));
            g_t = g_t.add(&term).unwrap();
        }
        kfl_core::free_evolve(&g_t, t)
    })
    .unwrap();
    let ks = [1u32, 2, 4, 8];
    let parts: Vec<Trajectory> = ks.iter().map(|&k| project_modulation(&traj, k).unwrap()).collect();
    let mut total = 0.0;
    for j in 0..traj.len() {
        let mut sum = PhaseField::zeros(&g);
        for p in &parts {
            sum = sum.add(p.sample(j)).unwrap();
        }
        total += sum.sub(traj.sample(j)).unwrap().norm_l2();
    }
    assert!(total <= 1e-12 * traj.sup_l2() * traj.len() as f64);
    let again = project_modulation(&parts[2], 4).unwrap();
    assert!(again.sup_l2_distance(&parts[2]).unwrap() <= 1e-12 * parts[2].sup_l2());
    let cross = project_modulation(&parts[2], 8).unwrap();
    assert!(cross.sup_l2() <= 1e-12 * traj.sup_l2());
}

#[test]
fn free_evolution_sits_in_lowest_modulation_shell() {
    let g = make_grid(2, 4, 3.0, 6).unwrap();
    let phi0 = random_field(&g, 15);
    let traj = Trajectory::free(&phi0, 16.0, 257).unwrap();
    let q1 = project_modulation(&traj, 1).unwrap();
    let kept: f64 = q1.samples().iter().map(|s| s.norm_l2().powi(2)).sum();
    let all: f64 = traj.samples().iter().map(|s| s.norm_l2().powi(2)).sum();
    assert!(kept >= 0.9 * all);
}

#[test]
fn unresolvable_modulation_is_a_nyquist_error() {
    let g = make_grid(2, 4, 3.0, 6).unwrap();
    let traj = Trajectory::free(&random_field(&g, 16), 1.0, 5).unwrap();
    assert!(matches!(project_modulation(&traj, 16), Err(KflError::Nyquist { parameter: "K", .. })));
}
