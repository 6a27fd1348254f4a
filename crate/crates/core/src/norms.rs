//! Trajectories and discrete function-space norms: H^{s,r}, space-time
//! Lebesgue norms and the restriction norm X^{s,r,b}.
//!
//! The time transform is a DFT over the uniform samples of a window,
//! `ĝ(σ_k) = dt Σ_j g(t_j) e^{-i(t_j - t_0)σ_k}`, with `σ_k = 2πk/(S·dt)` and
//! measure `dσ/2π`. The modulation `τ + n·v` of f is read off as the time
//! frequency σ of its interaction-frame form `S(-t)f(t)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftDirection;

use crate::bump::{bracket, psi, psi_scaled};
use crate::error::{invalid, KflError, Result};
use crate::fft::{fft_axes, fft_axis};
use crate::grid::{GridSpec, PhaseField};
use crate::index::unravel;
use crate::propagator::evolve_in_place;

/// Which time cutoff a trajectory carries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CutoffKind {
    None,
    /// ψ(t).
    Psi,
    /// ψ(t/T).
    PsiT(f64),
}

/// Regularity exponents of H^{s,r} and X^{s,r,b}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormParams {
    pub s: f64,
    pub r: f64,
    pub b: f64,
}

impl NormParams {
    pub fn new(s: f64, r: f64, b: f64) -> Result<Self> {
        if !(s.is_finite() && r.is_finite() && b.is_finite()) {
            return Err(invalid("params", "exponents must be finite"));
        }
        Ok(Self { s, r, b })
    }

    /// s = d/2 - 1/4 + 0.05, r = d/2 + 0.05, b = 0.55.
    pub fn solver_default(d: usize) -> Self {
        let h = d as f64 / 2.0;
        Self {
            s: h - 0.25 + 0.05,
            r: h + 0.05,
            b: 0.55,
        }
    }
}

/// Uniform samples of a field on the window `[-T, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    grid: GridSpec,
    half_width: f64,
    samples: Vec<PhaseField>,
    cutoff: CutoffKind,
}

impl Trajectory {
    pub fn new(grid: &GridSpec, half_width: f64, samples: Vec<PhaseField>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(invalid("samples", "a trajectory needs at least two samples"));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(invalid("T", format!("{half_width} must be positive")));
        }
        if samples.iter().any(|s| s.grid() != grid) {
            return Err(KflError::GridMismatch);
        }
        Ok(Self {
            grid: grid.clone(),
            half_width,
            samples,
            cutoff: CutoffKind::None,
        })
    }

    pub fn from_fn(grid: &GridSpec, half_width: f64, count: usize, f: impl Fn(f64) -> PhaseField + Sync) -> Result<Self> {
        if count < 2 {
            return Err(invalid("samples", "a trajectory needs at least two samples"));
        }
        let dt = 2.0 * half_width / (count - 1) as f64;
        let samples = (0..count).into_par_iter().map(|j| f(-half_width + j as f64 * dt)).collect();
        Self::new(grid, half_width, samples)
    }

    /// Samples of `S(t)φ`.
    pub fn free(phi: &PhaseField, half_width: f64, count: usize) -> Result<Self> {
        Self::from_fn(phi.grid(), half_width, count, |t| {
            let mut s = phi.clone();
            evolve_in_place(&mut s, t);
            s
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dt(&self) -> f64 {
        2.0 * self.half_width / (self.samples.len() - 1) as f64
    }

    pub fn time(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.dt()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.time(j)).collect()
    }

    pub fn samples(&self) -> &[PhaseField] {
        &self.samples
    }

    pub fn sample(&self, j: usize) -> &PhaseField {
        &self.samples[j]
    }

    pub fn into_samples(self) -> Vec<PhaseField> {
        self.samples
    }

    pub fn cutoff(&self) -> CutoffKind {
        self.cutoff
    }

    /// Same window and cutoff record, new samples.
    pub fn with_samples(&self, samples: Vec<PhaseField>) -> Trajectory {
        assert_eq!(samples.len(), self.samples.len(), "sample count must not change");
        Trajectory {
            grid: self.grid.clone(),
            half_width: self.half_width,
            samples,
            cutoff: self.cutoff,
        }
    }

    pub(crate) fn set_cutoff(&mut self, kind: CutoffKind) {
        self.cutoff = kind;
    }

    /// Trapezoid weights of the time samples.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let dt = self.dt();
        let last = self.len() - 1;
        (0..self.len())
            .map(|j| if j == 0 || j == last { 0.5 * dt } else { dt })
            .collect()
    }

    /// `sup_t ‖f(t)‖` in ℓ²_n L²_v.
    pub fn sup_l2(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_l2()).fold(0.0, f64::max)
    }

    /// `sup_j ‖f(t_j) - g(t_j)‖` in ℓ²_n L²_v.
    pub fn sup_l2_distance(&self, other: &Trajectory) -> Result<f64> {
        if self.len() != other.len() {
            return Err(KflError::ShapeMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        let mut worst = 0.0f64;
        for (a, b) in self.samples.iter().zip(&other.samples) {
            worst = worst.max(a.sub(b)?.norm_l2());
        }
        Ok(worst)
    }

    /// Time DFT of the interaction-frame samples `S(-t_j) f(t_j)`.
    pub fn modulation_spectrum(&self) -> ModulationSpectrum {
        let len = self.grid.len();
        let count = self.len();
        let mut data = Vec::with_capacity(count * len);
        for (j, s) in self.samples.iter().enumerate() {
            let mut g = s.clone();
            evolve_in_place(&mut g, -self.time(j));
            data.extend_from_slice(g.data());
        }
        fft_axis(&mut data, &[count, len], 0, FftDirection::Forward);
        let dt = self.dt();
        data.iter_mut().for_each(|c| *c *= dt);
        ModulationSpectrum {
            grid: self.grid.clone(),
            half_width: self.half_width,
            count,
            data,
        }
    }
}

/// Interaction-frame time spectrum `Ĝ(σ_k, n, v)` of a trajectory.
#[derive(Debug, Clone)]
pub struct ModulationSpectrum {
    grid: GridSpec,
    half_width: f64,
    count: usize,
    data: Vec<Complex64>,
}

impl ModulationSpectrum {
    /// Spectrum with given rows (FFT order, one `grid.len()` block per σ).
    pub fn from_rows(grid: &GridSpec, half_width: f64, count: usize, data: Vec<Complex64>) -> Result<Self> {
        if count < 2 || data.len() != count * grid.len() {
            return Err(KflError::ShapeMismatch {
                expected: count * grid.len(),
                got: data.len(),
            });
        }
        Ok(Self {
            grid: grid.clone(),
            half_width,
            count,
            data,
        })
    }

    pub fn dt(&self) -> f64 {
        2.0 * self.half_width / (self.count - 1) as f64
    }

    /// σ_k for each row, in FFT order.
    pub fn frequencies(&self) -> Vec<f64> {
        time_frequencies(self.count, self.dt())
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, Complex64> {
        self.data.chunks_exact(self.grid.len())
    }

    pub fn rows_mut(&mut self) -> std::slice::ChunksExactMut<'_, Complex64> {
        let len = self.grid.len();
        self.data.chunks_exact_mut(len)
    }

    /// `Σ_k (1/(S dt)) Σ_{n,v} Δv^d w(σ_k, n, v) |Ĝ|²` for a product weight.
    pub fn weighted_energy(&self, params: &NormParams) -> f64 {
        let vc = self.grid.v_count();
        let (nw, vw) = sobolev_weights(&self.grid, params.s, params.r);
        let scale = self.grid.dv_volume() / (self.count as f64 * self.dt());
        self.frequencies()
            .iter()
            .zip(self.rows())
            .map(|(sigma, row)| {
                let mw = bracket(*sigma).powf(2.0 * params.b);
                let mut acc = 0.0;
                for (m, block) in row.chunks_exact(vc).enumerate() {
                    let inner: f64 = block.iter().zip(&vw).map(|(c, w)| c.norm_sqr() * w).sum();
                    acc += nw[m] * inner;
                }
                mw * acc
            })
            .sum::<f64>()
            * scale
    }

    /// Back to f-side samples `S(t_j) G(t_j)`.
    pub fn into_frame_samples(self) -> Vec<PhaseField> {
        let len = self.grid.len();
        let count = self.count;
        let dt = self.dt();
        let mut data = self.data;
        fft_axis(&mut data, &[count, len], 0, FftDirection::Inverse);
        let scale = 1.0 / (count as f64 * dt);
        data.par_chunks_mut(len)
            .enumerate()
            .map(|(j, block)| {
                block.iter_mut().for_each(|c| *c *= scale);
                let mut f = PhaseField::from_data(&self.grid, block.to_vec()).expect("block has grid length");
                evolve_in_place(&mut f, -self.half_width + j as f64 * dt);
                f
            })
            .collect()
    }
}

pub(crate) fn time_frequencies(count: usize, dt: f64) -> Vec<f64> {
    let period = count as f64 * dt;
    (0..count)
        .map(|k| {
            let kk = if k < count.div_ceil(2) { k as i64 } else { k as i64 - count as i64 };
            2.0 * PI * kk as f64 / period
        })
        .collect()
}

/// Squared weights `⟨n⟩^{2s}` per mode and `⟨v⟩^{2r}` per velocity node.
pub(crate) fn sobolev_weights(grid: &GridSpec, s: f64, r: f64) -> (Vec<f64>, Vec<f64>) {
    let d = grid.dim();
    let nw = (0..grid.mode_count())
        .map(|m| {
            let n = grid.mode(m);
            (1.0 + (0..d).map(|a| (n[a] * n[a]) as f64).sum::<f64>()).powf(s)
        })
        .collect();
    let vw = (0..grid.v_count())
        .map(|j| {
            let v = grid.velocity(j);
            (1.0 + (0..d).map(|a| v[a] * v[a]).sum::<f64>()).powf(r)
        })
        .collect();
    (nw, vw)
}

/// `(Σ_n Δv^d Σ_v ⟨n⟩^{2s} ⟨v⟩^{2r} |f̂(n, v)|²)^{1/2}`.
pub fn sobolev_norm(field: &PhaseField, s: f64, r: f64) -> f64 {
    let grid = field.grid();
    let (nw, vw) = sobolev_weights(grid, s, r);
    let sum: f64 = (0..grid.mode_count())
        .map(|m| nw[m] * field.mode_slice(m).iter().zip(&vw).map(|(c, w)| c.norm_sqr() * w).sum::<f64>())
        .sum();
    (grid.dv_volume() * sum).sqrt()
}

/// Space-time exponent accepted by [`lp_spacetime_norm`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpExponent {
    Two,
    Four,
    Infinity,
}

impl LpExponent {
    pub fn from_f64(p: f64) -> Result<Self> {
        match p {
            p if p == 2.0 => Ok(Self::Two),
            p if p == 4.0 => Ok(Self::Four),
            p if p.is_infinite() && p > 0.0 => Ok(Self::Infinity),
            _ => Err(invalid("p", format!("{p} not in {{2, 4, ∞}}"))),
        }
    }
}

/// Values `f̃(x, ξ)` of one slice on an oversampled grid: `2·n_modes` x-nodes
/// and `2·v_points` ξ-nodes over one ξ-period per axis, modes placed
/// literally. Returns `(values, x_nodes, xi_nodes)`; only moduli are
/// meaningful since the ξ-origin is not tracked.
fn oversampled_values(field: &PhaseField) -> (Vec<Complex64>, usize, usize) {
    let grid = field.grid();
    let d = grid.dim();
    let lx = 2 * grid.n_modes();
    let lv = 2 * grid.v_points();
    let xn = lx.pow(d as u32);
    let vn = lv.pow(d as u32);
    let dvd = grid.dv_volume();
    let active = field.active_modes();
    let mut data = vec![Complex64::new(0.0, 0.0); xn * vn];
    let mut xpos = Vec::with_capacity(active.len());
    let mut row = vec![Complex64::new(0.0, 0.0); vn];
    let vshape = vec![lv; d];
    for &m in &active {
        let n = grid.mode(m);
        let mut idx = [0usize; 3];
        for a in 0..d {
            idx[a] = n[a].rem_euclid(lx as i64) as usize;
        }
        xpos.push(idx);
        row.fill(Complex64::new(0.0, 0.0));
        for (j, c) in field.mode_slice(m).iter().enumerate() {
            let jj = unravel(j, grid.v_points(), d);
            let mut vf = 0;
            for a in 0..d {
                vf = vf * lv + jj[a];
            }
            row[vf] = c * dvd;
        }
        fft_axes(&mut row, &vshape, 0..d, FftDirection::Inverse);
        let xf = crate::index::ravel(&idx, lx, d);
        data[xf * vn..(xf + 1) * vn].copy_from_slice(&row);
    }
    // x-axes innermost first, transforming only slabs whose leading
    // x-indices carry data
    for axis in (0..d).rev() {
        let mut prefixes: Vec<usize> = xpos
            .iter()
            .map(|idx| idx[..axis].iter().fold(0, |acc, &i| acc * lx + i))
            .collect();
        prefixes.sort_unstable();
        prefixes.dedup();
        let slab = lx.pow((d - axis) as u32) * vn;
        for p in prefixes {
            fft_axis(&mut data[p * slab..(p + 1) * slab], &[lx, slab / lx], 0, FftDirection::Inverse);
        }
    }
    (data, xn, vn)
}

/// `∫∫ |f̃(x, ξ)|⁴ dx/(2π)^d dξ/(2π)^d` over the torus and one ξ-period.
/// Exact for the discrete field: the oversampled grid resolves |f̃|⁴.
pub fn l4_slice(field: &PhaseField) -> f64 {
    let grid = field.grid();
    let (vals, xn, _) = oversampled_values(field);
    // 2P cells of width π/(2V) per ξ-axis, measure dξ/2π
    let xi_cell = (0.25 / grid.v_extent()).powi(grid.dim() as i32);
    vals.iter().map(|c| c.norm_sqr().powi(2)).sum::<f64>() * xi_cell / xn as f64
}

/// `‖f̃‖_{L^p(t, x, ξ)}`, trapezoid in t; measures dx/(2π)^d, dξ/(2π)^d.
pub fn lp_spacetime_norm(traj: &Trajectory, p: f64) -> Result<f64> {
    let p = LpExponent::from_f64(p)?;
    let w = traj.trapezoid_weights();
    Ok(match p {
        LpExponent::Two => {
            let grid = traj.grid();
            let per: Vec<f64> = traj
                .samples()
                .par_iter()
                .map(|s| {
                    let x = crate::grid::v_to_xi(s);
                    x.data.iter().map(|c| c.norm_sqr()).sum::<f64>() * grid.dxi_measure()
                })
                .collect();
            per.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>().sqrt()
        }
        LpExponent::Four => {
            let per: Vec<f64> = traj.samples().par_iter().map(l4_slice).collect();
            per.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>().powf(0.25)
        }
        LpExponent::Infinity => traj
            .samples()
            .par_iter()
            .map(|s| {
                let (vals, _, _) = oversampled_values(s);
                vals.iter().map(|c| c.norm()).fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max),
    })
}

/// `‖f̃(x, ·)‖_{L^p_ξ}` over one ξ-period at each node of the oversampled
/// x-grid (`2·n_modes` nodes per axis), by the rectangle rule on `2·v_points`
/// ξ-nodes per axis.
pub fn xi_lp_norms(field: &PhaseField, p: f64) -> Result<Vec<f64>> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(invalid("p", format!("{p} not in [1, ∞)")));
    }
    let grid = field.grid();
    let (vals, xn, vn) = oversampled_values(field);
    let xi_cell = (0.25 / grid.v_extent()).powi(grid.dim() as i32);
    Ok((0..xn)
        .map(|x| (vals[x * vn..(x + 1) * vn].iter().map(|c| c.norm().powf(p)).sum::<f64>() * xi_cell).powf(1.0 / p))
        .collect())
}

/// `dt Σ_j ‖f(t_j)‖²` in ℓ²_n L²_v, the rectangle rule matching the
/// periodic time DFT.
pub fn l2_rectangle_sq(traj: &Trajectory) -> f64 {
    traj.dt() * traj.samples().iter().map(|s| s.norm_l2().powi(2)).sum::<f64>()
}

/// `‖u₁u₂‖_{L²(t, x, ξ)}` by the rectangle rule in t; exact in (x, ξ).
pub fn product_l2(u1: &Trajectory, u2: &Trajectory) -> Result<f64> {
    if u1.len() != u2.len() || u1.half_width() != u2.half_width() {
        return Err(KflError::ShapeMismatch {
            expected: u1.len(),
            got: u2.len(),
        });
    }
    u1.grid().same_as(u2.grid())?;
    let grid = u1.grid();
    let xi_cell = (0.25 / grid.v_extent()).powi(grid.dim() as i32);
    let per: Vec<f64> = u1
        .samples()
        .par_iter()
        .zip(u2.samples())
        .map(|(a, b)| {
            if a.active_modes().is_empty() || b.active_modes().is_empty() {
                return 0.0;
            }
            let (va, xn, _) = oversampled_values(a);
            let (vb, _, _) = oversampled_values(b);
            va.iter().zip(&vb).map(|(x, y)| (x * y).norm_sqr()).sum::<f64>() * xi_cell / xn as f64
        })
        .collect();
    Ok((u1.dt() * per.iter().sum::<f64>()).sqrt())
}

/// Multiply every slice by ψ(t) or ψ(t/T).
pub fn apply_time_cutoff(traj: &Trajectory, kind: CutoffKind) -> Result<Trajectory> {
    if traj.cutoff() != CutoffKind::None {
        return Err(KflError::CutoffAlreadyApplied);
    }
    let factor: Box<dyn Fn(f64) -> f64> = match kind {
        CutoffKind::None => return Err(invalid("kind", "no cutoff to apply")),
        CutoffKind::Psi => Box::new(psi),
        CutoffKind::PsiT(t) if t > 0.0 => Box::new(move |s| psi_scaled(s, t)),
        CutoffKind::PsiT(t) => return Err(invalid("T_inner", format!("{t} must be positive"))),
    };
    let samples = traj
        .samples()
        .iter()
        .enumerate()
        .map(|(j, s)| s.scaled(factor(traj.time(j))))
        .collect();
    let mut out = traj.with_samples(samples);
    out.set_cutoff(kind);
    Ok(out)
}

/// Fraction of weighted spectral energy above this share of the resolvable band
/// that triggers a Nyquist error in [`xsb_norm`].
pub const BAND_EDGE: f64 = 0.75;
pub const BAND_EDGE_TOLERANCE: f64 = 1e-4;

/// Discrete X^{s,r,b} norm (also Y^{s,r,b}): weights ⟨τ+n·v⟩^b ⟨n⟩^s ⟨v⟩^r on
/// the time-frequency side. Requires a time cutoff so the samples decay
/// within the window.
pub fn xsb_norm(traj: &Trajectory, params: &NormParams) -> Result<f64> {
    if traj.cutoff() == CutoffKind::None {
        return Err(KflError::CutoffRequired);
    }
    xsb_norm_unchecked(traj, params)
}

/// [`xsb_norm`] without the cutoff precondition, for trajectories whose decay
/// is guaranteed by construction.
pub fn xsb_norm_unchecked(traj: &Trajectory, params: &NormParams) -> Result<f64> {
    let spec = traj.modulation_spectrum();
    xsb_from_spectrum(&spec, params)
}

pub(crate) fn xsb_from_spectrum(spec: &ModulationSpectrum, params: &NormParams) -> Result<f64> {
    let total = spec.weighted_energy(params);
    if total == 0.0 {
        return Ok(0.0);
    }
    let limit = PI / spec.dt();
    let mut edge = spec.clone();
    let freqs = edge.frequencies();
    for (s, row) in freqs.iter().zip(edge.rows_mut()) {
        if s.abs() <= BAND_EDGE * limit {
            row.fill(Complex64::new(0.0, 0.0));
        }
    }
    let tail = edge.weighted_energy(params);
    if tail > BAND_EDGE_TOLERANCE * total {
        return Err(KflError::Nyquist {
            parameter: "dt",
            value: spec.dt(),
            limit: spec.dt() * (BAND_EDGE_TOLERANCE * total / tail),
        });
    }
    Ok(total.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn exponent_parsing() {
        assert!(LpExponent::from_f64(2.0).is_ok());
        assert!(LpExponent::from_f64(f64::INFINITY).is_ok());
        assert!(LpExponent::from_f64(3.0).is_err());
    }

    #[test]
    fn constant_trajectory_l2() {
        let g = make_grid(2, 4, 3.0, 8).unwrap();
        let f = PhaseField::from_fn(&g, |n, v| Complex64::new((-v[0] * v[0] - v[1] * v[1]).exp() / (1 + n[0].abs()) as f64, 0.0));
        let traj = Trajectory::from_fn(&g, 0.7, 9, |_| f.clone()).unwrap();
        let l2 = lp_spacetime_norm(&traj, 2.0).unwrap();
        assert!((l2 - (1.4f64).sqrt() * f.norm_l2()).abs() < 1e-12 * l2);
    }

    #[test]
    fn single_mode_l4_matches_closed_form() {
        // f̂ = δ_{n0} h(v): |f̃|⁴ integrates to ∫|h̃|⁴ dξ/(2π)^d over the ξ-period,
        // and for h supported on one node, |h̃| ≡ Δv^d |h|
        let g = make_grid(2, 4, 2.0, 4).unwrap();
        let f = PhaseField::from_fn(&g, |n, v| {
            if n[0] == 1 && n[1] == 0 && v[0] == 0.0 && v[1] == 1.0 {
                Complex64::new(3.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let dv2 = g.dv_volume();
        let period = (1.0 / g.dv()).powi(2);
        let expect = (3.0 * dv2).powi(4) * period;
        assert!((l4_slice(&f) - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn cutoff_cannot_be_applied_twice() {
        let g = make_grid(2, 2, 1.0, 2).unwrap();
        let traj = Trajectory::from_fn(&g, 3.0, 7, |_| PhaseField::zeros(&g)).unwrap();
        let once = apply_time_cutoff(&traj, CutoffKind::Psi).unwrap();
        assert!(matches!(apply_time_cutoff(&once, CutoffKind::Psi), Err(KflError::CutoffAlreadyApplied)));
        assert!(matches!(xsb_norm(&traj, &NormParams::new(0.0, 0.0, 0.5).unwrap()), Err(KflError::CutoffRequired)));
    }
}
