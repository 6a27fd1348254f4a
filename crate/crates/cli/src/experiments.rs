//! Builds library configurations from the merged settings and runs them.

use std::path::Path;

use anyhow::{bail, Result};
use num_complex::Complex64;

use kfl_core::lab::{self, BilinearCheck, CollisionLadder, CollisionPart, CountingCheck, HolderCheck, LinearCheck, NonlinearCheck, StrichartzScan};
use kfl_core::solver::{conservation, duhamel_picard, integrate_interaction_picture, perturbation_experiment, positivity_check, write_snapshots, SolverConfig};
use kfl_core::{make_grid, sphere_quadrature, ExperimentReport, GridSpec, NormParams, PhaseField};

use crate::config::Config;

pub fn run(experiment: &str, cfg: &Config, dir: &Path) -> Result<Vec<ExperimentReport>> {
    let seed: u64 = cfg.get("run", "seed")?;
    match experiment {
        "simulate" => simulate(cfg, seed, dir),
        "perturbation-check" => perturbation(cfg, seed),
        "strichartz-scan" => strichartz(cfg, seed),
        "bilinear-check" => bilinear(cfg, seed),
        "loss-check" => nonlinear(cfg, seed, CollisionPart::Loss),
        "gain-check" => nonlinear(cfg, seed, CollisionPart::Gain),
        "holder-check" => holder(cfg, seed),
        "linear-check" => linear(cfg, seed),
        "counting-check" => counting(cfg, seed),
        "conservation-check" => ladder(cfg, seed),
        other => bail!("unknown experiment `{other}`"),
    }
}

/// Sobolev and modulation exponents; `auto` picks the solver defaults for d.
fn norm_params(cfg: &Config, section: &str, d: usize) -> Result<NormParams> {
    let auto = NormParams::solver_default(d);
    let pick = |key: &str, fallback: f64| -> Result<f64> {
        match cfg.raw(section, key)? {
            "auto" => Ok(fallback),
            _ => cfg.get(section, key),
        }
    };
    Ok(NormParams::new(pick("s", auto.s)?, pick("r", auto.r)?, pick("b", auto.b)?)?)
}

fn solver_grid(cfg: &Config, section: &str) -> Result<GridSpec> {
    Ok(make_grid(cfg.get(section, "d")?, cfg.get(section, "n_modes")?, cfg.get(section, "V")?, cfg.get(section, "v_points")?)?)
}

fn solver_config(cfg: &Config, section: &str, grid: &GridSpec) -> Result<SolverConfig> {
    let t: f64 = cfg.get(section, "T")?;
    let steps: usize = cfg.get(section, "steps")?;
    if steps == 0 {
        bail!("[{section}] steps must be at least 1");
    }
    let quad = sphere_quadrature(grid.dim(), cfg.get(section, "sphere_nodes")?)?;
    let mut sc = SolverConfig::new(grid, t, t / steps as f64, quad, cfg.get(section, "max_picard")?, cfg.get(section, "tol")?)?;
    sc.params = norm_params(cfg, section, grid.dim())?;
    sc.max_halvings = cfg.get(section, "max_halvings")?;
    Ok(sc)
}

/// `e^{-|v|²} (1 + ε cos(m x₁))`.
fn initial_data(cfg: &Config, section: &str, grid: &GridSpec) -> Result<PhaseField> {
    let eps: f64 = cfg.get(section, "epsilon")?;
    let mode: i64 = cfg.get(section, "mode")?;
    if mode.abs() >= grid.nyquist() {
        bail!("[{section}] mode {mode} is not resolved by n_modes = {}", grid.n_modes());
    }
    let (mode, d) = (mode as f64, grid.dim());
    let f0 = PhaseField::from_physical(grid, |x, v| {
        let v2: f64 = v[..d].iter().map(|c| c * c).sum();
        Complex64::new((-v2).exp() * (1.0 + eps * (mode * x[0]).cos()), 0.0)
    });
    Ok(f0)
}

fn simulate(cfg: &Config, seed: u64, dir: &Path) -> Result<Vec<ExperimentReport>> {
    let s = "simulate";
    let grid = solver_grid(cfg, s)?;
    let sc = solver_config(cfg, s, &grid)?;
    let f0 = initial_data(cfg, s, &grid)?;
    let (traj, iters) = duhamel_picard(&f0, &sc)?;
    write_snapshots(&traj, &dir.join("snapshots"), cfg.get(s, "snapshot_stride")?)?;
    std::fs::write(dir.join("iteration_report.json"), iters.to_json() + "\n")?;

    let mut report = ExperimentReport::new(s, seed, &grid.describe(), &["iteration"]);
    report.caveat = "contraction of successive Picard differences on one deterministic initial datum".into();
    for (k, pair) in iters.diffs_l2.windows(2).enumerate() {
        report.push(&[(k + 1) as f64], pair[1], pair[0])?;
    }
    let cons = conservation(&traj);
    let pos = positivity_check(&traj, cfg.get(s, "positivity_threshold")?);
    report.note("iterations", iters.iterations as f64);
    report.note("halvings", iters.halvings as f64);
    report.note("half_width", iters.half_width);
    report.note("mass_drift", cons.mass);
    report.note("momentum_drift", cons.momentum);
    report.note("energy_drift", cons.energy);
    report.note("reality_defect", cons.reality);
    report.note("positivity_min", pos.min);
    report.passed = iters.converged && pos.passed;
    if cfg.get::<bool>(s, "cross_check")? {
        let mut rk_cfg = sc.clone();
        rk_cfg.half_width = iters.half_width;
        let rk = integrate_interaction_picture(&f0, &rk_cfg)?;
        let gap = rk.sup_l2_distance(&traj)?;
        report.note("rk4_gap", gap);
        report.passed &= gap <= 1e-4;
    }
    Ok(vec![report])
}

fn perturbation(cfg: &Config, seed: u64) -> Result<Vec<ExperimentReport>> {
    let s = "perturbation-check";
    let grid = solver_grid(cfg, s)?;
    let sc = solver_config(cfg, s, &grid)?;
    let f0 = initial_data(cfg, s, &grid)?;
    let d = grid.dim();
    let direction = PhaseField::from_physical(&grid, |x, v| {
        let v2: f64 = (v[0] - 0.5).powi(2) + v[1..d].iter().map(|c| c * c).sum::<f64>();
        Complex64::new((-v2).exp() * (0.5 + (x[0] + 0.3).sin()), 0.0)
    });
    let mut report = perturbation_experiment(&f0, &direction, &cfg.list::<f64>(s, "deltas")?, &sc)?;
    report.experiment = s.into();
    report.seed = seed;
    Ok(vec![report])
}

fn strichartz(cfg: &Config, seed: u64) -> Result<Vec<ExperimentReport>> {
    let s = "strichartz-scan";
    let scan = StrichartzScan {
        dim: cfg.get(s, "d")?,
        ns: cfg.list(s, "N")?,
        ms: cfg.list(s, "M")?,
        trials: cfg.get(s, "trials")?,
        half_width: cfg.get(s, "T")?,
        time_samples: cfg.get(s, "time_samples")?,
        v_points: cfg.get(s, "v_points")?,
        seed,
        max_slope: cfg.get(s, "max_slope")?,
    };
    let main = lab::strichartz_scan(&scan)?;
    let gauge = lab::strichartz_gauge_check(&scan, cfg.get(s, "gauge_N")?, cfg.get(s, "gauge_M")?, &cfg.list::<i64>(s, "gauge_shift")?, cfg.get(s, "gauge_tolerance")?)?;
    Ok(vec![main, gauge])
}

fn bilinear(cfg: &Config, seed: u64) -> Result<Vec<ExperimentReport>> {
    let s = "bilinear-check";
    let check = BilinearCheck {
        dim: cfg.get(s, "d")?,
        cells: cfg.pairs(s, "cells")?,
        ks: cfg.list(s, "K")?,
        trials: cfg.get(s, "trials")?,
        half_width: cfg.get(s, "T")?,
        time_samples: cfg.get(s, "time_samples")?,
        v_points: cfg.get(s, "v_points")?,
        seed,
        max_slope: cfg.get(s, "max_slope")?,
    };
    Ok(vec![lab::bilinear_modulation_check(&check)?])
}

fn nonlinear(cfg: &Config, seed: u64, part: CollisionPart) -> Result<Vec<ExperimentReport>> {
    let s = match part {
        CollisionPart::Loss => "loss-check",
        CollisionPart::Gain => "gain-check",
    };
    let dim: usize = cfg.get(s, "d")?;
    let check = NonlinearCheck {
        part,
        dim,
        n_modes: cfg.get(s, "n_modes")?,
        v_points: cfg.get(s, "v_points")?,
        v_extent: cfg.get(s, "V")?,
        sphere_nodes: cfg.get(s, "sphere_nodes")?,
        ns: cfg.list(s, "N")?,
        ms: cfg.list(s, "M")?,
        ts: cfg.list(s, "T")?,
        trials: cfg.get(s, "trials")?,
        params: norm_params(cfg, s, dim)?,
        steps_per_t: cfg.get(s, "steps_per_T")?,
        window: cfg.get(s, "window")?,
        seed,
        max_slope: cfg.get(s, "max_slope")?,
    };
    let report = match part {
        CollisionPart::Loss => lab::loss_estimate_check(&check)?,
        CollisionPart::Gain => lab::gain_estimate_check(&check)?,
    };
    Ok(vec![report])
}

fn holder(cfg: &Config, seed: u64) -> Result<Vec<ExperimentReport>> {
    let s = "holder-check";
    let check = HolderCheck {
        p: cfg.get(s, "p")?,
        q: cfg.get(s, "q")?,
        ms: cfg.list(s, "M")?,
        trials: cfg.get(s, "trials")?,
        v_points: cfg.get(s, "v_points")?,
        v_extent: cfg.get(s, "V")?,
        sphere_nodes: cfg.get(s, "sphere_nodes")?,
        seed,
        max_slope: cfg.get(s, "max_slope")?,
    };
    Ok(vec![lab::holder_gain_check(&check)?])
}

fn linear(cfg: &Config, seed: u64) -> Result<Vec<ExperimentReport>> {
    let s = "linear-check";
    let dim: usize = cfg.get(s, "d")?;
    let params = norm_params(cfg, s, dim)?;
    let check = LinearCheck {
        dim,
        n_modes: cfg.get(s, "n_modes")?,
        v_points: cfg.get(s, "v_points")?,
        v_extent: cfg.get(s, "V")?,
        params,
        trials: cfg.get(s, "trials")?,
        half_width: cfg.get(s, "T")?,
        time_samples: cfg.get(s, "time_samples")?,
        seed,
        tolerance: cfg.get(s, "tolerance")?,
    };
    let main = lab::linear_xsb_checks(&check)?;
    let mut scaling = lab::psi_delta_scaling(params.b, &cfg.list::<f64>(s, "deltas")?, cfg.get(s, "scaling_tolerance")?)?;
    scaling.seed = seed;
    Ok(vec![main, scaling])
}

/// The main report keeps the worst query of each (N, M, K) cell; every query
/// row goes to `counting-check-queries`.
fn counting(cfg: &Config, seed: u64) -> Result<Vec<ExperimentReport>> {
    let s = "counting-check";
    let check = CountingCheck {
        dim: cfg.get(s, "d")?,
        ns: cfg.list(s, "N")?,
        ms: cfg.list(s, "M")?,
        ks: cfg.list(s, "K")?,
        queries: cfg.get(s, "queries")?,
        mc_samples: cfg.get(s, "mc_samples")?,
        seed,
        max_slope: cfg.get(s, "max_slope")?,
    };
    let mut queries = lab::counting_check(&check)?;
    let mut cells = ExperimentReport::new(s, seed, &queries.grid, &["N", "M", "K", "query", "stderr"]);
    cells.caveat = format!("{}; each row is the worst of {} queries", queries.caveat, check.queries);
    for r in &queries.rows {
        let key = &r.params[..3];
        match cells.rows.iter_mut().find(|c| c.params[..3] == *key) {
            Some(c) if c.ratio >= r.ratio => {}
            Some(c) => *c = r.clone(),
            None => cells.rows.push(r.clone()),
        }
    }
    cells.summary = queries.summary.clone();
    cells.passed = queries.passed;
    queries.experiment = "counting-check-queries".into();
    let mut out = vec![cells, queries];
    if cfg.get::<bool>(s, "exact_1d")? {
        out.push(lab::counting_exact_1d_check(&check)?);
    }
    Ok(out)
}

fn ladder(cfg: &Config, seed: u64) -> Result<Vec<ExperimentReport>> {
    let s = "conservation-check";
    let check = CollisionLadder {
        n_modes: cfg.get(s, "n_modes")?,
        v_extent: cfg.get(s, "V")?,
        levels: cfg.pairs(s, "levels")?,
        seed,
    };
    Ok(vec![lab::collision_ladder(&check)?])
}
