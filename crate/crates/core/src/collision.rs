//! The constant-kernel collision operator.
//!
//! Production path: Fourier-side gain `Q̃⁺(ξ) = ∫ f̃(ξ⁺) g̃(ξ⁻) dω` with
//! `ξ± = ½(ξ ± |ξ|ω)` and loss `Q̃⁻(ξ) = |S^{d-1}| f̃(ξ) g̃(0)`, formed per
//! spatial point on a zero-padded x-grid. Oracle path: velocity-space
//! quadrature over pre-collision pairs with multilinear interpolation.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, KflError, Result};
use crate::grid::{analyze_rows, is_nyquist_mode, is_xi_nyquist_axis, synthesize_rows, xi_to_v_rows, GridSpec, PhaseField, PointPhases};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Nodes and weights for integration over the unit sphere S^{d-1}.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereQuadrature {
    pub d: usize,
    pub nodes: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    /// Highest polynomial degree integrated exactly.
    pub exact_degree: usize,
    /// Per-node kernel factor b(cos θ) for non-constant kernels. Extension
    /// hook only; `None` is the constant kernel.
    pub kernel_weights: Option<Vec<f64>>,
    antipode: Option<Vec<usize>>,
}

/// Surface measure of S^{d-1}.
pub fn sphere_area(d: usize) -> f64 {
    match d {
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => unreachable!("dimension checked by the grid"),
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * p - pm) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// d = 2: `n_nodes` equally spaced angles with weight 2π/n_nodes.
/// d = 3: Gauss–Legendre in cos θ times an even number of uniform azimuths,
/// about `n_nodes` nodes in total.
pub fn sphere_quadrature(d: usize, n_nodes: usize) -> Result<SphereQuadrature> {
    if n_nodes < 4 {
        return Err(invalid("n_nodes", format!("{n_nodes} < 4")));
    }
    match d {
        2 => {
            let h = 2.0 * PI / n_nodes as f64;
            let nodes = (0..n_nodes)
                .map(|j| {
                    let a = j as f64 * h;
                    [a.cos(), a.sin(), 0.0]
                })
                .collect();
            let antipode = (n_nodes % 2 == 0).then(|| (0..n_nodes).map(|j| (j + n_nodes / 2) % n_nodes).collect());
            Ok(SphereQuadrature {
                d,
                nodes,
                weights: vec![h; n_nodes],
                exact_degree: n_nodes - 1,
                kernel_weights: None,
                antipode,
            })
        }
        3 => {
            let n_polar = ((n_nodes as f64 / 2.0).sqrt().round() as usize).max(2);
            let mut n_az = (n_nodes as f64 / n_polar as f64).round() as usize;
            n_az = (n_az + n_az % 2).max(2);
            let (x, w) = gauss_legendre(n_polar);
            let h = 2.0 * PI / n_az as f64;
            let mut nodes = Vec::with_capacity(n_polar * n_az);
            let mut weights = Vec::with_capacity(n_polar * n_az);
            let mut antipode = Vec::with_capacity(n_polar * n_az);
            for i in 0..n_polar {
                let s = (1.0 - x[i] * x[i]).max(0.0).sqrt();
                for k in 0..n_az {
                    let a = k as f64 * h;
                    nodes.push([s * a.cos(), s * a.sin(), x[i]]);
                    weights.push(w[i] * h);
                    antipode.push((n_polar - 1 - i) * n_az + (k + n_az / 2) % n_az);
                }
            }
            Ok(SphereQuadrature {
                d,
                nodes,
                weights,
                exact_degree: (2 * n_polar - 1).min(n_az - 1),
                kernel_weights: None,
                antipode: Some(antipode),
            })
        }
        _ => Err(invalid("d", format!("{d} not in {{2, 3}}"))),
    }
}

impl SphereQuadrature {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Index of the node at -ω_j, when the rule is symmetric.
    pub fn antipode(&self, j: usize) -> Option<usize> {
        self.antipode.as_ref().map(|a| a[j])
    }

    /// Weight of node j including any kernel factor.
    pub fn effective_weight(&self, j: usize) -> f64 {
        self.weights[j] * self.kernel_weights.as_ref().map_or(1.0, |k| k[j])
    }

    pub fn total_weight(&self) -> f64 {
        (0..self.len()).map(|j| self.effective_weight(j)).sum()
    }

    /// Same nodes with all weights multiplied by `s`; `s = 0` switches
    /// collisions off.
    pub fn scaled(&self, s: f64) -> Self {
        let mut q = self.clone();
        q.weights.iter_mut().for_each(|w| *w *= s);
        q
    }

    pub fn integrate(&self, f: impl Fn(&[f64; 3]) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(w, c)| c * f(w)).sum()
    }
}

fn check_operands(f: &PhaseField, g: &PhaseField, quad: Option<&SphereQuadrature>) -> Result<()> {
    if f.grid() != g.grid() {
        return Err(KflError::GridMismatch);
    }
    if let Some(q) = quad {
        if q.d != f.grid().dim() {
            return Err(invalid("quad", format!("dimension {} on a d = {} grid", q.d, f.grid().dim())));
        }
    }
    Ok(())
}

fn x_points(grid: &GridSpec, dealias: bool) -> usize {
    if dealias {
        grid.dealiased_points()
    } else {
        grid.n_modes()
    }
}

fn zero_nyquist(grid: &GridSpec, data: &mut [Complex64], row: usize) {
    for m in 0..grid.mode_count() {
        if is_nyquist_mode(grid, m) {
            data[m * row..(m + 1) * row].fill(ZERO);
        }
    }
}

/// Off-grid values of the active modes at a list of ξ-points, mode-major
/// with `points.len()` entries per mode.
fn sample_active(field: &PhaseField, active: &[usize], points: &[[f64; 3]]) -> Vec<Complex64> {
    let grid = field.grid();
    let np = points.len();
    let dvd = grid.dv_volume();
    let columns: Vec<Vec<Complex64>> = points
        .par_iter()
        .map_init(
            || PointPhases::new(grid),
            |phases, xi| {
                phases.set(grid, xi);
                active.iter().map(|&m| phases.contract(field.mode_slice(m)) * dvd).collect()
            },
        )
        .collect();
    let mut out = vec![ZERO; grid.mode_count() * np];
    for (p, col) in columns.iter().enumerate() {
        for (a, &m) in active.iter().enumerate() {
            out[m * np + p] = col[a];
        }
    }
    out
}

/// Spectral gain `Q⁺(f, g)` with the dealiased x-product.
pub fn gain_bobylev(f: &PhaseField, g: &PhaseField, quad: &SphereQuadrature) -> Result<PhaseField> {
    gain_bobylev_with(f, g, quad, true)
}

/// Spectral gain; `dealias = false` forms the x-product on the native grid.
pub fn gain_bobylev_with(f: &PhaseField, g: &PhaseField, quad: &SphereQuadrature, dealias: bool) -> Result<PhaseField> {
    check_operands(f, g, Some(quad))?;
    let grid = f.grid();
    let active_f = f.active_modes();
    let active_g = g.active_modes();
    if active_f.is_empty() || active_g.is_empty() || quad.is_empty() {
        return Ok(PhaseField::zeros(grid));
    }
    let same = std::ptr::eq(f, g) || f == g;
    let d = grid.dim();
    let nq = quad.len();
    let vc = grid.v_count();
    let points = x_points(grid, dealias);
    let nodes = points.pow(d as u32);
    let weights: Vec<f64> = (0..nq).map(|j| quad.effective_weight(j)).collect();
    let partner: Vec<usize> = (0..nq).map(|j| quad.antipode(j).unwrap_or(j)).collect();

    // A band-edge ξ-node stands for both of its periodic images ±ξ_N; the
    // gain there is the average over the images, which keeps real data real.
    let mut targets: Vec<(usize, f64, [f64; 3])> = Vec::with_capacity(vc);
    for k in 0..vc {
        let xi = grid.xi(k);
        let edge: Vec<usize> = (0..d).filter(|&a| is_xi_nyquist_axis(grid, k, a)).collect();
        let count = 1usize << edge.len();
        for mask in 0..count {
            let mut p = xi;
            for (bit, &a) in edge.iter().enumerate() {
                if (mask >> bit) & 1 == 1 {
                    p[a] = -p[a];
                }
            }
            targets.push((k, 1.0 / count as f64, p));
        }
    }

    // target chunks keep the padded work arrays near a million entries
    let chunk = ((1 << 20) / (nodes * nq).max(1)).clamp(1, targets.len());
    let mut product = vec![ZERO; nodes * vc];
    for block in targets.chunks(chunk) {
        let half = |sign: f64| -> Vec<[f64; 3]> {
            block
                .iter()
                .flat_map(|(_, _, xi)| {
                    let r = xi[..d].iter().map(|z| z * z).sum::<f64>().sqrt();
                    quad.nodes.iter().map(move |w| {
                        let mut p = [0.0; 3];
                        for a in 0..d {
                            p[a] = 0.5 * (xi[a] + sign * r * w[a]);
                        }
                        p
                    })
                })
                .collect()
        };
        let plus = half(1.0);
        let row = plus.len();
        let fp = synthesize_rows(grid, &sample_active(f, &active_f, &plus), row, points);
        let gm = match quad.antipode.as_ref() {
            Some(_) if same => None,
            Some(_) => Some(synthesize_rows(grid, &sample_active(g, &active_g, &plus), row, points)),
            None => Some(synthesize_rows(grid, &sample_active(g, &active_g, &half(-1.0)), row, points)),
        };
        // with an antipodal rule g(ξ⁻_j) is g(ξ⁺) at the partner node
        let pair: Vec<usize> = if quad.antipode.is_some() { partner.clone() } else { (0..nq).collect() };
        let gsrc = gm.as_deref().unwrap_or(&fp);
        product.par_chunks_mut(vc).enumerate().for_each(|(x, out)| {
            let fr = &fp[x * row..(x + 1) * row];
            let gr = &gsrc[x * row..(x + 1) * row];
            for (i, &(k, share, _)) in block.iter().enumerate() {
                let base = i * nq;
                let mut acc = ZERO;
                for j in 0..nq {
                    acc += fr[base + j] * gr[base + pair[j]] * weights[j];
                }
                out[k] += acc * share;
            }
        });
    }
    let mut modes = analyze_rows(grid, product, vc, points);
    zero_nyquist(grid, &mut modes, vc);
    xi_to_v_rows(grid, &mut modes);
    PhaseField::from_data(grid, modes)
}

/// Per-mode discrete v-integral `Δv^d Σ_v ĝ(n, v)`.
pub(crate) fn mode_mass(g: &PhaseField) -> Vec<Complex64> {
    let dvd = g.grid().dv_volume();
    (0..g.grid().mode_count())
        .map(|m| g.mode_slice(m).iter().sum::<Complex64>() * dvd)
        .collect()
}

/// Loss `|S^{d-1}| f(x, v) ∫ g(x, u) du`.
pub fn loss_bobylev(f: &PhaseField, g: &PhaseField) -> Result<PhaseField> {
    loss_scaled(f, g, sphere_area(f.grid().dim()), true)
}

/// Loss term with an explicit constant in front.
pub fn loss_scaled(f: &PhaseField, g: &PhaseField, constant: f64, dealias: bool) -> Result<PhaseField> {
    check_operands(f, g, None)?;
    let grid = f.grid();
    let vc = grid.v_count();
    let points = x_points(grid, dealias);
    let fx = synthesize_rows(grid, f.data(), vc, points);
    let rho = synthesize_rows(grid, &mode_mass(g), 1, points);
    let mut prod = fx;
    for (x, r) in rho.iter().enumerate() {
        let s = r * constant;
        prod[x * vc..(x + 1) * vc].iter_mut().for_each(|c| *c *= s);
    }
    let mut modes = analyze_rows(grid, prod, vc, points);
    zero_nyquist(grid, &mut modes, vc);
    PhaseField::from_data(grid, modes)
}

/// `Q(f, f) = Q⁺(f, f) - Q⁻(f, f)`. The loss constant is the total weight of
/// the quadrature, so gain and loss cancel exactly at ξ = 0.
pub fn collide(f: &PhaseField, quad: &SphereQuadrature) -> Result<PhaseField> {
    collide_pair(f, f, quad)
}

/// Bilinear `Q(f, g)`.
pub fn collide_pair(f: &PhaseField, g: &PhaseField, quad: &SphereQuadrature) -> Result<PhaseField> {
    let mut out = gain_bobylev(f, g, quad)?;
    let loss = loss_scaled(f, g, quad.total_weight(), true)?;
    out.axpy(-1.0, &loss)?;
    Ok(out)
}

/// Multilinear interpolation stencil with zero extension beyond the velocity box.
struct Stencil {
    idx: [usize; 8],
    w: [f64; 8],
    len: usize,
}

impl Stencil {
    fn new(grid: &GridSpec, p: &[f64; 3]) -> Stencil {
        let d = grid.dim();
        let np = grid.v_points();
        let inv = 1.0 / grid.dv();
        let v0 = grid.v_extent();
        let mut lo = [0i64; 3];
        let mut fr = [0.0; 3];
        for a in 0..d {
            let s = (p[a] + v0) * inv;
            let i = s.floor();
            lo[a] = i as i64;
            fr[a] = s - i;
        }
        let mut st = Stencil {
            idx: [0; 8],
            w: [0.0; 8],
            len: 0,
        };
        'corner: for c in 0..(1usize << d) {
            let mut flat = 0usize;
            let mut w = 1.0;
            for a in 0..d {
                let bit = (c >> (d - 1 - a)) & 1;
                let i = lo[a] + bit as i64;
                if i < 0 || i >= np as i64 {
                    continue 'corner;
                }
                w *= if bit == 1 { fr[a] } else { 1.0 - fr[a] };
                flat = flat * np + i as usize;
            }
            if w != 0.0 {
                st.idx[st.len] = flat;
                st.w[st.len] = w;
                st.len += 1;
            }
        }
        st
    }

    #[inline]
    fn eval(&self, row: &[Complex64]) -> Complex64 {
        let mut acc = ZERO;
        for i in 0..self.len {
            acc += row[self.idx[i]] * self.w[i];
        }
        acc
    }
}

/// Reference gain by direct quadrature:
/// `Q⁺(v) = Δv^d Σ_u Σ_j w_j f(v*) g(u*)`, `v* = v - (ω·(v-u))ω`,
/// `u* = u + (ω·(v-u))ω`. The x-product is formed exactly, one pair of
/// active x-modes at a time; the output drops Nyquist modes like the
/// spectral path does.
pub fn gain_direct_oracle(f: &PhaseField, g: &PhaseField, quad: &SphereQuadrature) -> Result<PhaseField> {
    check_operands(f, g, Some(quad))?;
    let grid = f.grid();
    let d = grid.dim();
    let vc = grid.v_count();
    let active_f = f.active_modes();
    let active_g = g.active_modes();
    let mut out = PhaseField::zeros(grid);
    let mut pairs = Vec::new();
    for (a, &m1) in active_f.iter().enumerate() {
        for (b, &m2) in active_g.iter().enumerate() {
            let (n1, n2) = (grid.mode(m1), grid.mode(m2));
            let mut n = [0i64; 3];
            for k in 0..d {
                n[k] = n1[k] + n2[k];
            }
            if let Some(m) = grid.mode_index(&n) {
                if !is_nyquist_mode(grid, m) {
                    pairs.push((a, b, m));
                }
            }
        }
    }
    if pairs.is_empty() {
        return Ok(out);
    }
    // (v - u)·ω is odd in ω, so ω and -ω give the same post-collision pair
    let mut nodes: Vec<([f64; 3], f64)> = Vec::new();
    for j in 0..quad.len() {
        match quad.antipode(j) {
            Some(k) if k < j => {}
            Some(k) if k > j => nodes.push((quad.nodes[j], quad.effective_weight(j) + quad.effective_weight(k))),
            _ => nodes.push((quad.nodes[j], quad.effective_weight(j))),
        }
    }
    let velocities: Vec<[f64; 3]> = (0..vc).map(|j| grid.velocity(j)).collect();
    let frows: Vec<&[Complex64]> = active_f.iter().map(|&m| f.mode_slice(m)).collect();
    let grows: Vec<&[Complex64]> = active_g.iter().map(|&m| g.mode_slice(m)).collect();
    let dvd = grid.dv_volume();
    let columns: Vec<Vec<Complex64>> = velocities
        .par_iter()
        .map(|v| {
            let mut acc = vec![ZERO; pairs.len()];
            let mut fv = vec![ZERO; frows.len()];
            let mut gv = vec![ZERO; grows.len()];
            for u in &velocities {
                for (w, weight) in &nodes {
                    let s: f64 = (0..d).map(|a| w[a] * (v[a] - u[a])).sum();
                    let mut vs = [0.0; 3];
                    let mut us = [0.0; 3];
                    for a in 0..d {
                        vs[a] = v[a] - s * w[a];
                        us[a] = u[a] + s * w[a];
                    }
                    let sv = Stencil::new(grid, &vs);
                    if sv.len == 0 {
                        continue;
                    }
                    let su = Stencil::new(grid, &us);
                    if su.len == 0 {
                        continue;
                    }
                    for (slot, row) in fv.iter_mut().zip(&frows) {
                        *slot = sv.eval(row);
                    }
                    for (slot, row) in gv.iter_mut().zip(&grows) {
                        *slot = su.eval(row);
                    }
                    for (c, &(a, b, _)) in acc.iter_mut().zip(&pairs) {
                        *c += fv[a] * gv[b] * *weight;
                    }
                }
            }
            acc
        })
        .collect();
    for (j, acc) in columns.iter().enumerate() {
        for (c, &(_, _, m)) in acc.iter().zip(&pairs) {
            out.mode_slice_mut(m)[j] += c * dvd;
        }
    }
    Ok(out)
}

/// Velocity moments per x-node of the native grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub mass: Vec<Complex64>,
    pub momentum: Vec<[Complex64; 3]>,
    pub energy: Vec<Complex64>,
}

impl Moments {
    /// Largest modulus over x-nodes of mass, momentum components and energy.
    pub fn max_abs(&self) -> (f64, f64, f64) {
        let mass = self.mass.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let mom = self
            .momentum
            .iter()
            .flat_map(|m| m.iter().map(|c| c.norm()))
            .fold(0.0, f64::max);
        let energy = self.energy.iter().map(|c| c.norm()).fold(0.0, f64::max);
        (mass, mom, energy)
    }
}

/// Discrete v-integrals of f·{1, v, |v|²} at each x-node.
pub fn moments(field: &PhaseField) -> Moments {
    let grid = field.grid();
    let d = grid.dim();
    let dvd = grid.dv_volume();
    let velocities: Vec<[f64; 3]> = (0..grid.v_count()).map(|j| grid.velocity(j)).collect();
    let mut packed = Vec::with_capacity(grid.mode_count() * 5);
    for m in 0..grid.mode_count() {
        let mut acc = [ZERO; 5];
        for (c, v) in field.mode_slice(m).iter().zip(&velocities) {
            acc[0] += c;
            for a in 0..d {
                acc[1 + a] += c * v[a];
            }
            acc[4] += c * (0..d).map(|a| v[a] * v[a]).sum::<f64>();
        }
        packed.extend(acc.iter().map(|c| c * dvd));
    }
    let x = synthesize_rows(grid, &packed, 5, grid.n_modes());
    let nodes = x.len() / 5;
    Moments {
        mass: (0..nodes).map(|i| x[i * 5]).collect(),
        momentum: (0..nodes).map(|i| [x[i * 5 + 1], x[i * 5 + 2], x[i * 5 + 3]]).collect(),
        energy: (0..nodes).map(|i| x[i * 5 + 4]).collect(),
    }
}
