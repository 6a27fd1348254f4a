//! Local-in-time solutions by Picard iteration of the Duhamel map
//!
//! ```text
//! Γf(t) = ψ(t) S(t) f0 + ψ(t) ∫_0^t S(t - t') ψ_T(t') Q(f(t'), f(t')) dt'
//! ```
//!
//! on a window `[-T, T]`, together with a classical RK4 integrator in the
//! interaction frame used as an independent cross-check.
//!
//! Everything runs in the interaction frame `G(t) = S(-t) f(t)`, where Γ
//! becomes `ψ(t) (f0 + ∫_0^t S(-t') ψ_T(t') Q(S(t')G, S(t')G) dt')` and the
//! time integral is a cumulative trapezoid outward from t = 0.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::bump::{psi, psi_scaled};
use crate::collision::{collide, moments, SphereQuadrature};
use crate::error::{invalid, KflError, Result};
use crate::grid::{x_synthesize, GridSpec, PhaseField};
use crate::norms::{sobolev_norm, NormParams, Trajectory};
use crate::propagator::evolve_in_place;
use crate::report::ExperimentReport;

/// Ratios Δ_{k+1}/Δ_k are only formed when Δ_k exceeds this.
const RATIO_FLOOR: f64 = 10.0 * f64::EPSILON;

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub grid: GridSpec,
    /// Window half-width T.
    pub half_width: f64,
    /// Sample spacing; T/dt must be an integer so that t = 0 is a node.
    pub dt: f64,
    pub quad: SphereQuadrature,
    pub max_picard: usize,
    /// Stop once Δ_k ≤ tol · sup_t ‖f^{(k+1)}(t)‖.
    pub tol: f64,
    pub params: NormParams,
    /// Restarts with T/2 allowed when the iteration contracts too slowly.
    pub max_halvings: usize,
}

impl SolverConfig {
    pub fn new(grid: &GridSpec, half_width: f64, dt: f64, quad: SphereQuadrature, max_picard: usize, tol: f64) -> Result<Self> {
        let cfg = Self {
            grid: grid.clone(),
            half_width,
            dt,
            quad,
            max_picard,
            tol,
            params: NormParams::solver_default(grid.dim()),
            max_halvings: 4,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.half_width > 0.0 && self.half_width.is_finite()) {
            return Err(invalid("T", format!("{} must be positive", self.half_width)));
        }
        if !(self.dt > 0.0 && self.dt <= self.half_width) {
            return Err(invalid("dt", format!("{} must lie in (0, T]", self.dt)));
        }
        let steps = self.half_width / self.dt;
        if (steps - steps.round()).abs() > 1e-9 * steps {
            return Err(invalid("dt", format!("T/dt = {steps} is not an integer")));
        }
        if !(self.tol > 0.0) {
            return Err(invalid("tol", "must be positive"));
        }
        if self.max_picard == 0 {
            return Err(invalid("max_picard", "must be at least 1"));
        }
        if self.quad.d != self.grid.dim() {
            return Err(invalid("quad", "dimension differs from the grid"));
        }
        Ok(())
    }

    /// Steps from t = 0 to t = T.
    pub fn half_steps(&self) -> usize {
        (self.half_width / self.dt).round() as usize
    }

    pub fn sample_count(&self) -> usize {
        2 * self.half_steps() + 1
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IterationReport {
    /// Δ_k in L^∞_T(ℓ²L²).
    pub diffs_l2: Vec<f64>,
    /// Δ_k in the discrete X^{s,r,b} norm on the window.
    pub diffs_xsb: Vec<f64>,
    /// Δ_{k+1}/Δ_k of the L^∞_T(ℓ²L²) differences.
    pub ratios: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Window half-width actually used after any halvings.
    pub half_width: f64,
    pub halvings: usize,
}

impl IterationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Smallest contraction ratio among the first `k` recorded.
    pub fn best_ratio_within(&self, k: usize) -> Option<f64> {
        self.ratios.iter().take(k).copied().reduce(f64::min)
    }
}

fn frame_to_trajectory(grid: &GridSpec, half_width: f64, frame: Vec<PhaseField>) -> Result<Trajectory> {
    let count = frame.len();
    let dt = 2.0 * half_width / (count - 1) as f64;
    let samples = frame
        .into_par_iter()
        .enumerate()
        .map(|(j, mut g)| {
            evolve_in_place(&mut g, -half_width + j as f64 * dt);
            g
        })
        .collect();
    Trajectory::new(grid, half_width, samples)
}

/// `∫_0^{t_j} F` on uniform nodes by the trapezoid rule, outward from `center`.
pub(crate) fn cumulative_trapezoid(forcing: &[PhaseField], center: usize, dt: f64) -> Result<Vec<PhaseField>> {
    let mut out = vec![PhaseField::zeros(forcing[center].grid()); forcing.len()];
    for j in center + 1..forcing.len() {
        let mut next = out[j - 1].clone();
        next.axpy(0.5 * dt, &forcing[j - 1])?;
        next.axpy(0.5 * dt, &forcing[j])?;
        out[j] = next;
    }
    for j in (0..center).rev() {
        let mut next = out[j + 1].clone();
        next.axpy(-0.5 * dt, &forcing[j + 1])?;
        next.axpy(-0.5 * dt, &forcing[j])?;
        out[j] = next;
    }
    Ok(out)
}

/// Duhamel term `∫_0^t S(t - t') F(t') dt'` of a forcing trajectory, by the
/// trapezoid rule on its own samples. The window must have an odd sample
/// count so that t = 0 is a node.
pub fn duhamel_term(forcing: &Trajectory) -> Result<Trajectory> {
    if forcing.len() % 2 == 0 {
        return Err(invalid("samples", "Duhamel integral needs an odd sample count"));
    }
    let t0 = forcing.half_width();
    let frame: Vec<PhaseField> = forcing
        .samples()
        .par_iter()
        .enumerate()
        .map(|(j, f)| {
            let mut g = f.clone();
            evolve_in_place(&mut g, -forcing.time(j));
            g
        })
        .collect();
    let integral = cumulative_trapezoid(&frame, forcing.len() / 2, forcing.dt())?;
    frame_to_trajectory(forcing.grid(), t0, integral)
}

fn free_trajectory(f0: &PhaseField, half_width: f64, count: usize) -> Result<Trajectory> {
    Trajectory::from_fn(f0.grid(), half_width, count, |t| {
        let mut s = f0.scaled(psi(t));
        evolve_in_place(&mut s, t);
        s
    })
}

/// One application of Γ.
fn gamma(f0: &PhaseField, current: &Trajectory, quad: &SphereQuadrature) -> Result<Trajectory> {
    let t_inner = current.half_width();
    let forcing: Vec<PhaseField> = current
        .samples()
        .par_iter()
        .enumerate()
        .map(|(j, f)| {
            let t = current.time(j);
            let mut q = collide(f, quad)?;
            q = q.scaled(psi_scaled(t, t_inner));
            evolve_in_place(&mut q, -t);
            Ok(q)
        })
        .collect::<Result<_>>()?;
    let mut integral = cumulative_trapezoid(&forcing, current.len() / 2, current.dt())?;
    for (j, g) in integral.iter_mut().enumerate() {
        g.axpy(1.0, f0)?;
        *g = g.scaled(psi(current.time(j)));
    }
    frame_to_trajectory(current.grid(), t_inner, integral)
}

fn difference(a: &Trajectory, b: &Trajectory) -> Result<Trajectory> {
    let samples = a.samples().iter().zip(b.samples()).map(|(x, y)| x.sub(y)).collect::<Result<_>>()?;
    Trajectory::new(a.grid(), a.half_width(), samples)
}

fn picard_on_window(f0: &PhaseField, config: &SolverConfig, half_width: f64, count: usize, report: &mut IterationReport) -> Result<Trajectory> {
    let mut current = free_trajectory(f0, half_width, count)?;
    report.diffs_l2.clear();
    report.diffs_xsb.clear();
    report.ratios.clear();
    report.converged = false;
    report.iterations = 0;
    report.half_width = half_width;
    for _ in 0..config.max_picard {
        let next = gamma(f0, &current, &config.quad)?;
        let diff = difference(&next, &current)?;
        let dl2 = diff.sup_l2();
        let dx = diff.modulation_spectrum().weighted_energy(&config.params).sqrt();
        if !(dl2.is_finite() && dx.is_finite()) {
            return Err(KflError::NonFinite {
                experiment: "picard".into(),
                detail: format!("iteration {} at T = {half_width}", report.iterations + 1),
            });
        }
        if let Some(&prev) = report.diffs_l2.last() {
            if prev > RATIO_FLOOR {
                report.ratios.push(dl2 / prev);
            }
        }
        report.diffs_l2.push(dl2);
        report.diffs_xsb.push(dx);
        report.iterations += 1;
        let scale = next.sup_l2();
        current = next;
        if dl2 <= config.tol * scale {
            report.converged = true;
            break;
        }
        // slow contraction at iteration 3 means T is not yet small enough
        if report.iterations == 3 && report.ratios.last().is_some_and(|&r| r > 0.9) {
            break;
        }
    }
    Ok(current)
}

/// Picard iteration of Γ from `ψ S(t) f0`. Halves T and restarts (up to
/// `max_halvings` times) if the contraction ratio exceeds 0.9 at iteration
/// 3. Hitting the iteration cap is reported through `converged = false`.
pub fn duhamel_picard(f0: &PhaseField, config: &SolverConfig) -> Result<(Trajectory, IterationReport)> {
    config.validate()?;
    f0.grid().same_as(&config.grid)?;
    let count = config.sample_count();
    let mut half_width = config.half_width;
    let mut report = IterationReport::default();
    loop {
        let traj = picard_on_window(f0, config, half_width, count, &mut report)?;
        let slow = !report.converged && report.iterations == 3 && report.ratios.last().is_some_and(|&r| r > 0.9);
        if slow && report.halvings < config.max_halvings {
            report.halvings += 1;
            half_width *= 0.5;
            continue;
        }
        return Ok((traj, report));
    }
}

fn rk_rhs(g: &PhaseField, t: f64, quad: &SphereQuadrature) -> Result<PhaseField> {
    let mut f = g.clone();
    evolve_in_place(&mut f, t);
    let mut q = collide(&f, quad)?;
    evolve_in_place(&mut q, -t);
    Ok(q)
}

fn rk4_step(g: &PhaseField, t: f64, h: f64, quad: &SphereQuadrature) -> Result<PhaseField> {
    let k1 = rk_rhs(g, t, quad)?;
    let mut y = g.clone();
    y.axpy(0.5 * h, &k1)?;
    let k2 = rk_rhs(&y, t + 0.5 * h, quad)?;
    let mut y = g.clone();
    y.axpy(0.5 * h, &k2)?;
    let k3 = rk_rhs(&y, t + 0.5 * h, quad)?;
    let mut y = g.clone();
    y.axpy(h, &k3)?;
    let k4 = rk_rhs(&y, t + h, quad)?;
    let mut out = g.clone();
    out.axpy(h / 6.0, &k1)?;
    out.axpy(h / 3.0, &k2)?;
    out.axpy(h / 3.0, &k3)?;
    out.axpy(h / 6.0, &k4)?;
    let (before, after) = (g.norm_l2(), out.norm_l2());
    if !after.is_finite() || (before > 0.0 && after > 2.0 * before) {
        return Err(KflError::StepRejected { t, from: before, to: after });
    }
    Ok(out)
}

/// RK4 for `g' = S(-t) Q(S(t)g, S(t)g)`, `g = S(-t)f`, from t = 0 outward in
/// both directions with step `config.dt`; returns f on the window samples.
pub fn integrate_interaction_picture(f0: &PhaseField, config: &SolverConfig) -> Result<Trajectory> {
    config.validate()?;
    f0.grid().same_as(&config.grid)?;
    let steps = config.half_steps();
    let h = config.dt;
    let mut frame = vec![PhaseField::zeros(&config.grid); 2 * steps + 1];
    frame[steps] = f0.clone();
    for sign in [1.0, -1.0] {
        let mut g = f0.clone();
        for k in 0..steps {
            g = rk4_step(&g, sign * k as f64 * h, sign * h, &config.quad)?;
            let idx = if sign > 0.0 { steps + k + 1 } else { steps - k - 1 };
            frame[idx] = g.clone();
        }
    }
    frame_to_trajectory(&config.grid, steps as f64 * h, frame)
}

/// Drift of conserved quantities along a trajectory, relative to t = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Conservation {
    /// `max_t |M(t) - M(0)| / |M(0)|`.
    pub mass: f64,
    /// `max_t |P(t) - P(0)|` over `∫|f0||v|`.
    pub momentum: f64,
    /// `max_t |E(t) - E(0)| / |E(0)|`.
    pub energy: f64,
    /// Largest conjugate-symmetry defect of any sample.
    pub reality: f64,
}

fn zero_mode_moments(f: &PhaseField) -> (f64, [f64; 3], f64, f64) {
    let grid = f.grid();
    let d = grid.dim();
    let zero = grid.mode_index(&[0, 0, 0][..d]).expect("zero mode is on every grid");
    let dv = grid.dv_volume();
    let (mut m, mut p, mut e, mut abs_v) = (0.0, [0.0; 3], 0.0, 0.0);
    for (j, c) in f.mode_slice(zero).iter().enumerate() {
        let v = grid.velocity(j);
        let v2: f64 = v[..d].iter().map(|x| x * x).sum();
        m += c.re * dv;
        for a in 0..d {
            p[a] += c.re * v[a] * dv;
        }
        e += c.re * v2 * dv;
        abs_v += c.norm() * v2.sqrt() * dv;
    }
    (m, p, e, abs_v)
}

pub fn conservation(traj: &Trajectory) -> Conservation {
    let mid = traj.sample(traj.len() / 2);
    let (m0, p0, e0, scale) = zero_mode_moments(mid);
    let mut out = Conservation {
        mass: 0.0,
        momentum: 0.0,
        energy: 0.0,
        reality: 0.0,
    };
    let rel = |x: f64, r: f64| if r == 0.0 { x.abs() } else { x.abs() / r.abs() };
    for s in traj.samples() {
        let (m, p, e, _) = zero_mode_moments(s);
        out.mass = out.mass.max(rel(m - m0, m0));
        let dp = (0..3).map(|a| (p[a] - p0[a]).abs()).fold(0.0, f64::max);
        out.momentum = out.momentum.max(rel(dp, scale));
        out.energy = out.energy.max(rel(e - e0, e0));
        out.reality = out.reality.max(s.reality_defect());
    }
    out
}

/// Conservation of the collision output alone, `∫Q` and its moments.
pub fn collision_moments(f: &PhaseField, quad: &SphereQuadrature) -> Result<(f64, f64, f64)> {
    Ok(moments(&collide(f, quad)?).max_abs())
}

/// Minimum of the synthesized f over all samples, nodes and velocities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Positivity {
    pub min: f64,
    pub threshold: f64,
    /// Sample index where the minimum occurs.
    pub at: usize,
    pub passed: bool,
}

pub fn positivity_check(traj: &Trajectory, threshold: f64) -> Positivity {
    let (min, at) = traj
        .samples()
        .par_iter()
        .enumerate()
        .map(|(j, s)| {
            let phys = x_synthesize(s);
            (phys.data.iter().map(|c| c.re).fold(f64::INFINITY, f64::min), j)
        })
        .reduce(|| (f64::INFINITY, 0), |a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a });
    let min = if min.is_finite() { min } else { 0.0 };
    Positivity {
        min,
        threshold,
        at,
        passed: min >= -threshold,
    }
}

/// `sup_t ‖f_δ(t) - f(t)‖_{H^{s,r}} / δ` with `f_δ` solving from
/// `f0 + δ·direction`, for each δ. Rows with a non-converged solve mark the
/// report as failed.
pub fn perturbation_experiment(f0: &PhaseField, direction: &PhaseField, deltas: &[f64], config: &SolverConfig) -> Result<ExperimentReport> {
    let (base, base_report) = duhamel_picard(f0, config)?;
    let mut report = ExperimentReport::new("perturbation", 0, &config.grid.describe(), &["delta"]);
    report.caveat = "Lipschitz ratio of the data-to-solution map along one fixed direction".into();
    report.passed = base_report.converged;
    let unit = direction.scaled(1.0 / direction.norm_l2().max(f64::MIN_POSITIVE));
    for &delta in deltas {
        let mut data = f0.clone();
        data.axpy(delta, &unit)?;
        let (moved, moved_report) = if delta == 0.0 { (base.clone(), base_report.clone()) } else { duhamel_picard(&data, config)? };
        report.passed &= moved_report.converged && moved_report.half_width == base_report.half_width;
        let mut worst = 0.0f64;
        for (a, b) in moved.samples().iter().zip(base.samples()) {
            worst = worst.max(sobolev_norm(&a.sub(b)?, config.params.s, config.params.r));
        }
        report.push(&[delta], worst, delta)?;
    }
    let ratios: Vec<f64> = report.rows.iter().filter(|r| r.rhs > 0.0).map(|r| r.ratio).collect();
    if let (Some(lo), Some(hi)) = (ratios.iter().copied().reduce(f64::min), ratios.iter().copied().reduce(f64::max)) {
        report.note("ratio_spread", if lo > 0.0 { hi / lo } else { f64::INFINITY });
        report.passed &= lo > 0.0 && hi / lo <= 2.0;
    }
    report.note("half_width", base_report.half_width);
    Ok(report)
}

/// Write every `stride`-th sample as `snapshot_<index>.kfl` under `dir`.
pub fn write_snapshots(traj: &Trajectory, dir: &Path, stride: usize) -> Result<Vec<PathBuf>> {
    if stride == 0 {
        return Err(invalid("stride", "must be at least 1"));
    }
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for j in (0..traj.len()).step_by(stride) {
        let path = dir.join(format!("snapshot_{j:05}.kfl"));
        let file = std::io::BufWriter::new(std::fs::File::create(&path)?);
        traj.sample(j).write_snapshot(file)?;
        paths.push(path);
    }
    Ok(paths)
}
