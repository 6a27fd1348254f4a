//! Acceptance gate: runs every criterion at full size and prints one line
//! per criterion. Exits nonzero if any criterion fails.

mod common;

use std::time::Instant;

use common::{random_field, rel};
use kfl_core::lab::*;
use kfl_core::lp::{project_v_dyadic, project_x_block, project_x_shell};
use kfl_core::solver::*;
use kfl_core::{free_evolve, make_grid, sphere_quadrature, v_to_xi, x_analyze, x_synthesize, xi_to_v, ExperimentReport, GridSpec, PhaseField, Result};
use num_complex::Complex64;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { passed, detail })
}

fn note(r: &ExperimentReport, key: &str) -> f64 {
    r.summary.get(key).copied().unwrap_or(f64::NAN)
}

fn finite(r: &ExperimentReport) -> bool {
    !r.rows.is_empty() && r.rows.iter().all(|row| row.ratio.is_finite() && row.lhs.is_finite() && row.rhs.is_finite())
}

fn transforms_and_propagator() -> Result<Outcome> {
    let grids = [make_grid(2, 8, 4.0, 8)?, make_grid(2, 16, 6.0, 16)?, make_grid(3, 4, 3.0, 8)?];
    let mut worst = 0.0f64;
    for trial in 0..100u64 {
        let g = &grids[trial as usize % grids.len()];
        let f = random_field(g, trial);
        let h = random_field(g, 1_000 + trial);
        let norm = f.norm_l2();
        let err = |x: &PhaseField, y: &PhaseField| x.sub(y).map(|d| d.norm_l2() / norm);
        let t = -5.0 + 0.1 * trial as f64;
        let s = 0.37 * (trial % 7) as f64 - 1.1;
        let e = [
            err(&x_analyze(&x_synthesize(&f))?, &f)?,
            err(&xi_to_v(&v_to_xi(&f)), &f)?,
            rel(v_to_xi(&h).norm_l2(), h.norm_l2()),
            rel(free_evolve(&f, t).norm_l2(), norm),
            err(&free_evolve(&free_evolve(&f, t), s), &free_evolve(&f, t + s))?,
            err(&free_evolve(&project_x_shell(&f, 2)?, t), &project_x_shell(&free_evolve(&f, t), 2)?)?,
            err(&free_evolve(&project_x_block(&f, &[1, -1, 0], 2)?, t), &project_x_block(&free_evolve(&f, t), &[1, -1, 0], 2)?)?,
            err(&free_evolve(&project_v_dyadic(&f, 1)?, t), &project_v_dyadic(&free_evolve(&f, t), 1)?)?,
        ];
        worst = e.iter().copied().fold(worst, f64::max);
    }
    outcome(worst <= 1e-12, format!("worst relative error {worst:.2e} over 100 trials (≤ 1e-12)"))
}

fn collision() -> Result<Outcome> {
    let r = collision_ladder(&CollisionLadder::default())?;
    outcome(
        r.passed,
        format!(
            "oracle {:.2e} (≤ 5e-2), Maxwellian residual {:.2e} (≤ 1e-2), mass {:.1e} (≤ 1e-12), momentum {:.1e}, energy {:.1e} (≤ 1e-3); all decreasing: {}",
            note(&r, "oracle_final"),
            note(&r, "maxwellian_final"),
            note(&r, "mass_max"),
            note(&r, "momentum_final"),
            note(&r, "energy_final"),
            r.passed
        ),
    )
}

fn counting() -> Result<Outcome> {
    let cfg = CountingCheck::default();
    let sweep = counting_check(&cfg)?;
    let exact = counting_exact_1d_check(&cfg)?;
    let ok = sweep.passed && finite(&sweep) && exact.passed;
    outcome(
        ok,
        format!(
            "{} rows, max ratio {:.3}, slope in N {:.3} (≤ 0.1); 1D |mc - exact| / 3σ max {:.3} (≤ 1)",
            sweep.rows.len(),
            sweep.max_ratio(),
            note(&sweep, "max_slope"),
            exact.max_ratio()
        ),
    )
}

fn strichartz() -> Result<Outcome> {
    let cfg = StrichartzScan::default();
    let scan = strichartz_scan(&cfg)?;
    let gauge = strichartz_gauge_check(&cfg, 8, 2, &[5, -3], 1e-8)?;
    outcome(
        scan.passed && finite(&scan) && gauge.passed,
        format!(
            "{} rows, max ratio {:.3}, max slope {:.3} (≤ 0.05), gauge difference {:.1e} (≤ 1e-8)",
            scan.rows.len(),
            scan.max_ratio(),
            note(&scan, "max_slope"),
            note(&gauge, "max_relative_difference")
        ),
    )
}

fn bilinear() -> Result<Outcome> {
    let r = bilinear_modulation_check(&BilinearCheck::default())?;
    outcome(
        r.passed && finite(&r),
        format!(
            "{} rows, max ratio {:.3}, max slope in K {:.3} (≤ 0.1), swap asymmetry {:.1e}",
            r.rows.len(),
            r.max_ratio(),
            note(&r, "max_slope"),
            note(&r, "swap_asymmetry")
        ),
    )
}

fn nonlinear() -> Result<Outcome> {
    let loss = loss_estimate_check(&NonlinearCheck::new(CollisionPart::Loss))?;
    let gain = gain_estimate_check(&NonlinearCheck::new(CollisionPart::Gain))?;
    let holder = holder_gain_check(&HolderCheck::default())?;
    let ok = loss.passed && gain.passed && holder.passed && finite(&loss) && finite(&gain) && finite(&holder);
    outcome(
        ok,
        format!(
            "loss: slope N {:.2}, slope T {:.2}, zero rows exact {}; gain: slope N {:.2}, slope T {:.2}, zero rows exact {}; Hölder slope {:.2}",
            note(&loss, "max_slope_in_N"),
            note(&loss, "min_slope_in_T"),
            note(&loss, "zero_input_exact") == 1.0,
            note(&gain, "max_slope_in_N"),
            note(&gain, "min_slope_in_T"),
            note(&gain, "zero_input_exact") == 1.0,
            note(&holder, "max_slope")
        ),
    )
}

fn linear() -> Result<Outcome> {
    let r = linear_xsb_checks(&LinearCheck::default())?;
    let deltas: Vec<f64> = (1..=6).map(|k| 0.5f64.powi(k)).collect();
    let b = LinearCheck::default().params.b;
    let s = psi_delta_scaling(b, &deltas, 0.05)?;
    outcome(
        r.passed && s.passed,
        format!(
            "(b2) relative gap to ‖ψ‖_H^b {:.1e} (≤ 1e-6); exponents {:.4} (1/2) and {:.4} ({}) ± 0.05",
            note(&r, "b2_relative_error"),
            note(&s, "exponent_l2"),
            note(&s, "exponent_hb"),
            0.5 - b
        ),
    )
}

fn solver_grid() -> Result<GridSpec> {
    make_grid(2, 4, 4.5, 24)
}

fn maxwellian_perturbation(g: &GridSpec) -> PhaseField {
    PhaseField::from_physical(g, |x, v| Complex64::new((-(v[0] * v[0] + v[1] * v[1])).exp() * (1.0 + 0.1 * x[0].cos()), 0.0))
}

fn solver() -> Result<Outcome> {
    let g = solver_grid()?;
    let quad = sphere_quadrature(2, 16)?;
    let t = 0.125;
    let cfg = SolverConfig::new(&g, t, t / 64.0, quad.clone(), 30, 1e-12)?;
    let f0 = maxwellian_perturbation(&g);
    let (traj, rep) = duhamel_picard(&f0, &cfg)?;
    let best = rep.best_ratio_within(8).unwrap_or(f64::INFINITY);
    let rk = integrate_interaction_picture(&f0, &cfg)?;
    let gap = rk.sup_l2_distance(&traj)?;
    let cons = conservation(&traj);
    let pos = positivity_check(&traj, 1e-6);

    let coarse = SolverConfig::new(&g, t, t / 16.0, quad, 30, 1e-10)?;
    let direction = PhaseField::from_physical(&g, |x, v| Complex64::new((-(v[0] - 0.5).powi(2) - v[1] * v[1]).exp() * (0.5 + (x[0] + 0.3).sin()), 0.0));
    let pert = perturbation_experiment(&f0, &direction, &[0.0, 1e-2, 1e-3, 1e-4], &coarse)?;

    let ok = rep.converged && best <= 0.5 && gap <= 1e-4 && cons.mass <= 1e-10 && pos.passed && pert.passed && pert.rows[0].lhs == 0.0;
    outcome(
        ok,
        format!(
            "Picard: {} iterations, {} halvings, best ratio in 8 {:.3} (≤ 0.5); Picard vs RK4 {:.1e} (≤ 1e-4); mass drift {:.1e} (≤ 1e-10), momentum {:.1e}, energy {:.1e}, reality {:.1e}; positivity min {:.1e} (≥ -1e-6); perturbation spread {:.4} (≤ 2)",
            rep.iterations,
            rep.halvings,
            best,
            gap,
            cons.mass,
            cons.momentum,
            cons.energy,
            cons.reality,
            pos.min,
            note(&pert, "ratio_spread")
        ),
    )
}

fn determinism() -> Result<Outcome> {
    let runs: Vec<Box<dyn Fn() -> Result<ExperimentReport>>> = vec![
        Box::new(|| {
            counting_check(&CountingCheck {
                ns: vec![4, 8],
                ms: vec![1, 2],
                queries: 10,
                seed: 3,
                ..Default::default()
            })
        }),
        Box::new(|| {
            strichartz_scan(&StrichartzScan {
                ns: vec![2, 4],
                ms: vec![1, 2],
                trials: 3,
                seed: 3,
                ..Default::default()
            })
        }),
        Box::new(|| {
            bilinear_modulation_check(&BilinearCheck {
                cells: vec![(4, 1)],
                ks: vec![1, 2],
                seed: 3,
                ..Default::default()
            })
        }),
        Box::new(|| {
            loss_estimate_check(&NonlinearCheck {
                ns: vec![1, 2],
                ms: vec![1],
                ts: vec![0.25],
                trials: 1,
                seed: 3,
                ..NonlinearCheck::new(CollisionPart::Loss)
            })
        }),
        Box::new(|| {
            holder_gain_check(&HolderCheck {
                ms: vec![1, 2],
                trials: 1,
                v_points: 16,
                seed: 3,
                ..Default::default()
            })
        }),
    ];
    let mut identical = 0;
    let mut names = Vec::new();
    for run in &runs {
        let (a, b) = (run()?, run()?);
        if a.to_csv() == b.to_csv() && a.to_json() == b.to_json() {
            identical += 1;
        } else {
            names.push(a.experiment.clone());
        }
    }
    let g = solver_grid()?;
    let cfg = SolverConfig::new(&g, 0.125, 0.125 / 8.0, sphere_quadrature(2, 8)?, 30, 1e-10)?;
    let f0 = maxwellian_perturbation(&g);
    let (ta, ra) = duhamel_picard(&f0, &cfg)?;
    let (tb, rb) = duhamel_picard(&f0, &cfg)?;
    let solver_same = ra.to_json() == rb.to_json() && ta.samples().iter().zip(tb.samples()).all(|(x, y)| x == y);
    if !solver_same {
        names.push("solver".into());
    }
    outcome(
        names.is_empty(),
        format!("{identical}/{} reports byte-identical across reruns, solver identical: {solver_same} {names:?}", runs.len()),
    )
}

fn main() {
    let criteria: [(&str, f64, fn() -> Result<Outcome>); 9] = [
        ("transforms and propagator", 10.0, transforms_and_propagator),
        ("collision operator", 300.0, collision),
        ("counting lemma", 600.0, counting),
        ("Strichartz scan", 900.0, strichartz),
        ("bilinear modulation", 600.0, bilinear),
        ("nonlinear estimates", 900.0, nonlinear),
        ("linear X^{s,r,b} identities", 120.0, linear),
        ("solver", 1200.0, solver),
        ("determinism", f64::INFINITY, determinism),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = run();
        let secs = start.elapsed().as_secs_f64();
        let (passed, detail) = match result {
            Ok(o) => (o.passed && secs < *limit, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let budget = if limit.is_finite() { format!(" (limit {limit:.0}s)") } else { String::new() };
        println!("criterion {}: {} {name} [{secs:.1}s{budget}] {detail}", i + 1, if passed { "PASS" } else { "FAIL" });
        failed += usize::from(!passed);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
