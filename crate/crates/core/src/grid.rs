//! Discretization of T^d × R^d and the transforms between the (x, v), (n, v)
//! and (n, ξ) representations.
//!
//! Constants sheet (version [`CONSTANTS_VERSION`]):
//!
//! * x-coefficients are torus averages: `f̂(n) = (2π)^{-d} ∫ f(x) e^{-in·x} dx`,
//!   so `f(x) = Σ_n f̂(n) e^{in·x}` with no prefactor.
//! * v → ξ is unnormalized: `f̃(ξ) = ∫ f(v) e^{iv·ξ} dv`; the inverse carries
//!   the whole `(2π)^{-d}`.
//! * Measures: `dx/(2π)^d` on the torus, `dv` on velocities, `dξ/(2π)^d` on
//!   the ξ-period. With these choices every Plancherel identity holds with
//!   constant 1.
//! * The velocity box is `[-V, V)^d` with `v_j = -V + jΔv`, `Δv = 2V/P`; the
//!   ξ-grid is `ξ_k = (k - P/2)·π/V`, one full period of the discrete
//!   transform.

use std::f64::consts::PI;
use std::io::{Read, Write};

use num_complex::Complex64;
use rustfft::FftDirection;

use crate::error::{KflError, Result};
use crate::fft::fft_axes;
use crate::index::{ravel, unravel, Multi};

pub const CONSTANTS_VERSION: &str = "kfl-constants-1";

const SNAPSHOT_MAGIC: &[u8; 4] = b"KFL1";

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    d: usize,
    n_modes: usize,
    v_extent: f64,
    v_points: usize,
}

impl GridSpec {
    pub fn new(d: usize, n_modes: usize, v_extent: f64, v_points: usize) -> Result<Self> {
        if !(2..=3).contains(&d) {
            return Err(KflError::InvalidGrid(format!("dimension {d} not in {{2, 3}}")));
        }
        if n_modes < 2 || n_modes % 2 != 0 {
            return Err(KflError::InvalidGrid(format!("n_modes = {n_modes} must be even and >= 2")));
        }
        if v_points < 2 || v_points % 2 != 0 {
            return Err(KflError::InvalidGrid(format!("v_points = {v_points} must be even and >= 2")));
        }
        if !(v_extent > 0.0) || !v_extent.is_finite() {
            return Err(KflError::InvalidGrid(format!("velocity extent {v_extent} must be positive")));
        }
        Ok(Self {
            d,
            n_modes,
            v_extent,
            v_points,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn v_extent(&self) -> f64 {
        self.v_extent
    }

    pub fn v_points(&self) -> usize {
        self.v_points
    }

    pub fn dv(&self) -> f64 {
        2.0 * self.v_extent / self.v_points as f64
    }

    /// Spacing of the dual ξ-grid, π/V.
    pub fn dxi(&self) -> f64 {
        PI / self.v_extent
    }

    /// Volume element Δv^d of the velocity quadrature.
    pub fn dv_volume(&self) -> f64 {
        self.dv().powi(self.d as i32)
    }

    /// Measure of one ξ-grid cell under dξ/(2π)^d.
    pub fn dxi_measure(&self) -> f64 {
        (self.dxi() / (2.0 * PI)).powi(self.d as i32)
    }

    pub fn mode_count(&self) -> usize {
        self.n_modes.pow(self.d as u32)
    }

    pub fn v_count(&self) -> usize {
        self.v_points.pow(self.d as u32)
    }

    pub fn len(&self) -> usize {
        self.mode_count() * self.v_count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Largest wavenumber per axis (the Nyquist mode).
    pub fn nyquist(&self) -> i64 {
        (self.n_modes / 2) as i64
    }

    /// Per-axis wavenumber of axis index `k`: modes run over `-N/2+1 ..= N/2`.
    #[inline]
    pub fn wavenumber(&self, k: usize) -> i64 {
        k as i64 - self.nyquist() + 1
    }

    /// Axis index of wavenumber `n`, if it lies in the mode range.
    #[inline]
    pub fn axis_index(&self, n: i64) -> Option<usize> {
        let k = n + self.nyquist() - 1;
        (k >= 0 && (k as usize) < self.n_modes).then_some(k as usize)
    }

    pub fn mode(&self, flat: usize) -> [i64; 3] {
        let idx = unravel(flat, self.n_modes, self.d);
        let mut n = [0i64; 3];
        for a in 0..self.d {
            n[a] = self.wavenumber(idx[a]);
        }
        n
    }

    pub fn mode_index(&self, n: &[i64]) -> Option<usize> {
        let mut idx: Multi = [0; 3];
        for a in 0..self.d {
            idx[a] = self.axis_index(n[a])?;
        }
        Some(ravel(&idx, self.n_modes, self.d))
    }

    #[inline]
    pub fn velocity_1d(&self, j: usize) -> f64 {
        -self.v_extent + j as f64 * self.dv()
    }

    pub fn velocity(&self, flat: usize) -> [f64; 3] {
        let idx = unravel(flat, self.v_points, self.d);
        let mut v = [0.0; 3];
        for a in 0..self.d {
            v[a] = self.velocity_1d(idx[a]);
        }
        v
    }

    #[inline]
    pub fn xi_1d(&self, k: usize) -> f64 {
        (k as f64 - (self.v_points / 2) as f64) * self.dxi()
    }

    pub fn xi(&self, flat: usize) -> [f64; 3] {
        let idx = unravel(flat, self.v_points, self.d);
        let mut xi = [0.0; 3];
        for a in 0..self.d {
            xi[a] = self.xi_1d(idx[a]);
        }
        xi
    }

    /// Padded x-grid size used for dealiased quadratic products (3/2 rule).
    pub fn dealiased_points(&self) -> usize {
        let l = (3 * self.n_modes).div_ceil(2);
        l + l % 2
    }

    pub(crate) fn same_as(&self, other: &GridSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(KflError::GridMismatch)
        }
    }

    pub fn describe(&self) -> String {
        format!(
            "d={} n_modes={} v_points={} V={}",
            self.d, self.n_modes, self.v_points, self.v_extent
        )
    }
}

pub fn make_grid(d: usize, n_modes: usize, v_extent: f64, v_points: usize) -> Result<GridSpec> {
    GridSpec::new(d, n_modes, v_extent, v_points)
}

#[inline]
pub(crate) fn dot_iv(n: &[i64; 3], v: &[f64; 3], d: usize) -> f64 {
    (0..d).map(|i| n[i] as f64 * v[i]).sum()
}

/// One time slice in mixed representation: x-Fourier coefficients `f̂(n, v)`
/// at physical velocities. Layout is row-major, modes outermost.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseField {
    grid: GridSpec,
    data: Vec<Complex64>,
}

impl PhaseField {
    pub fn zeros(grid: &GridSpec) -> Self {
        Self {
            grid: grid.clone(),
            data: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_data(grid: &GridSpec, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(KflError::ShapeMismatch {
                expected: grid.len(),
                got: data.len(),
            });
        }
        Ok(Self {
            grid: grid.clone(),
            data,
        })
    }

    /// Fill coefficients from a function of `(n, v)`.
    pub fn from_fn(grid: &GridSpec, mut f: impl FnMut(&[i64; 3], &[f64; 3]) -> Complex64) -> Self {
        let vc = grid.v_count();
        let mut data = Vec::with_capacity(grid.len());
        for m in 0..grid.mode_count() {
            let n = grid.mode(m);
            for j in 0..vc {
                data.push(f(&n, &grid.velocity(j)));
            }
        }
        Self {
            grid: grid.clone(),
            data,
        }
    }

    /// Sample a physical-space function `f(x, v)` on the x-grid and analyze it.
    pub fn from_physical(grid: &GridSpec, mut f: impl FnMut(&[f64; 3], &[f64; 3]) -> Complex64) -> Self {
        let l = grid.n_modes();
        let d = grid.dim();
        let vc = grid.v_count();
        let h = 2.0 * PI / l as f64;
        let mut data = Vec::with_capacity(grid.len());
        for xf in 0..l.pow(d as u32) {
            let xi = unravel(xf, l, d);
            let mut x = [0.0; 3];
            for a in 0..d {
                x[a] = xi[a] as f64 * h;
            }
            for j in 0..vc {
                data.push(f(&x, &grid.velocity(j)));
            }
        }
        x_analyze(&PhysicalField {
            grid: grid.clone(),
            points: l,
            data,
        })
        .expect("shape is consistent by construction")
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn mode_slice(&self, m: usize) -> &[Complex64] {
        let vc = self.grid.v_count();
        &self.data[m * vc..(m + 1) * vc]
    }

    pub fn mode_slice_mut(&mut self, m: usize) -> &mut [Complex64] {
        let vc = self.grid.v_count();
        &mut self.data[m * vc..(m + 1) * vc]
    }

    pub fn get(&self, n: &[i64], v_flat: usize) -> Option<Complex64> {
        let m = self.grid.mode_index(n)?;
        Some(self.data[m * self.grid.v_count() + v_flat])
    }

    /// Modes carrying any nonzero coefficient.
    pub fn active_modes(&self) -> Vec<usize> {
        (0..self.grid.mode_count())
            .filter(|&m| self.mode_slice(m).iter().any(|c| c.re != 0.0 || c.im != 0.0))
            .collect()
    }

    /// The ℓ²_n L²_v norm, `(Σ_n Δv^d Σ_v |f̂|²)^{1/2}`.
    pub fn norm_l2(&self) -> f64 {
        (self.grid.dv_volume() * self.data.iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            data: self.data.iter().map(|c| c * s).collect(),
        }
    }

    pub fn scale_complex(&mut self, s: Complex64) {
        self.data.iter_mut().for_each(|c| *c *= s);
    }

    /// `self += a·other`.
    pub fn axpy(&mut self, a: f64, other: &PhaseField) -> Result<()> {
        self.grid.same_as(&other.grid)?;
        for (y, x) in self.data.iter_mut().zip(&other.data) {
            *y += x * a;
        }
        Ok(())
    }

    pub fn sub(&self, other: &PhaseField) -> Result<PhaseField> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }

    pub fn add(&self, other: &PhaseField) -> Result<PhaseField> {
        let mut out = self.clone();
        out.axpy(1.0, other)?;
        Ok(out)
    }

    /// Index of the mode `-n`, folding the unpaired Nyquist wavenumber onto itself.
    pub fn conjugate_mode(&self, m: usize) -> usize {
        let g = &self.grid;
        let n = g.mode(m);
        let mut neg = [0i64; 3];
        for a in 0..g.dim() {
            neg[a] = if n[a] == g.nyquist() { n[a] } else { -n[a] };
        }
        g.mode_index(&neg).expect("negated mode is in range")
    }

    /// Max over entries of `|f̂(-n, v) - conj f̂(n, v)|`, zero for real f(x, v).
    pub fn reality_defect(&self) -> f64 {
        let vc = self.grid.v_count();
        let mut worst = 0.0f64;
        for m in 0..self.grid.mode_count() {
            let c = self.conjugate_mode(m);
            for j in 0..vc {
                let diff = self.data[c * vc + j] - self.data[m * vc + j].conj();
                worst = worst.max(diff.norm());
            }
        }
        worst
    }

    /// Write the little-endian `KFL1` snapshot.
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(SNAPSHOT_MAGIC)?;
        w.write_all(&(self.grid.d as u32).to_le_bytes())?;
        w.write_all(&(self.grid.n_modes as u32).to_le_bytes())?;
        w.write_all(&(self.grid.v_points as u32).to_le_bytes())?;
        w.write_all(&self.grid.v_extent.to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.data.len() * 16);
        for c in &self.data {
            buf.extend_from_slice(&c.re.to_le_bytes());
            buf.extend_from_slice(&c.im.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_snapshot<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != SNAPSHOT_MAGIC {
            return Err(KflError::Format(format!("bad magic {magic:?}")));
        }
        let mut word = [0u8; 4];
        let mut read_u32 = |r: &mut R| -> Result<usize> {
            r.read_exact(&mut word)?;
            Ok(u32::from_le_bytes(word) as usize)
        };
        let d = read_u32(&mut r)?;
        let n_modes = read_u32(&mut r)?;
        let v_points = read_u32(&mut r)?;
        let mut dword = [0u8; 8];
        r.read_exact(&mut dword)?;
        let v_extent = f64::from_le_bytes(dword);
        let grid = GridSpec::new(d, n_modes, v_extent, v_points)?;
        let mut bytes = vec![0u8; grid.len() * 16];
        r.read_exact(&mut bytes)?;
        let data = bytes
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().unwrap());
                let im = f64::from_le_bytes(c[8..].try_into().unwrap());
                Complex64::new(re, im)
            })
            .collect();
        Ok(Self { grid, data })
    }
}

/// Values `f(x, v)` on a uniform x-grid of `points^d` nodes `x_j = 2πj/points`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalField {
    pub grid: GridSpec,
    pub points: usize,
    pub data: Vec<Complex64>,
}

impl PhysicalField {
    pub fn node_count(&self) -> usize {
        self.points.pow(self.grid.dim() as u32)
    }

    pub fn node_slice(&self, x: usize) -> &[Complex64] {
        let vc = self.grid.v_count();
        &self.data[x * vc..(x + 1) * vc]
    }

    pub fn node_position(&self, x: usize) -> [f64; 3] {
        let d = self.grid.dim();
        let idx = unravel(x, self.points, d);
        let h = 2.0 * PI / self.points as f64;
        let mut pos = [0.0; 3];
        for a in 0..d {
            pos[a] = idx[a] as f64 * h;
        }
        pos
    }
}

/// Per-axis placement of a wavenumber on an x-grid of `points` nodes. On a
/// padded grid the Nyquist mode is split evenly between `±N/2`.
pub(crate) fn axis_targets(grid: &GridSpec, n: i64, points: usize) -> ([(usize, f64); 2], usize) {
    let l = points as i64;
    if n == grid.nyquist() && points > grid.n_modes() {
        ([(n as usize, 0.5), ((l - n) as usize, 0.5)], 2)
    } else {
        ([(n.rem_euclid(l) as usize, 1.0), (0, 0.0)], 1)
    }
}

/// All x-grid slots (flat index, weight) that carry mode `m`.
pub(crate) fn mode_targets(grid: &GridSpec, m: usize, points: usize) -> Vec<(usize, f64)> {
    let d = grid.dim();
    let n = grid.mode(m);
    let per_axis: Vec<_> = (0..d).map(|a| axis_targets(grid, n[a], points)).collect();
    let mut out = vec![([0usize; 3], 1.0f64)];
    for (a, (targets, count)) in per_axis.iter().enumerate() {
        let mut next = Vec::with_capacity(out.len() * count);
        for (idx, w) in &out {
            for &(slot, f) in targets.iter().take(*count) {
                let mut i = *idx;
                i[a] = slot;
                next.push((i, w * f));
            }
        }
        out = next;
    }
    out.into_iter().map(|(i, w)| (ravel(&i, points, d), w)).collect()
}

/// Inverse x-DFT on the native grid of `n_modes^d` nodes.
pub fn x_synthesize(field: &PhaseField) -> PhysicalField {
    x_synthesize_on(field, field.grid.n_modes())
}

/// Inverse x-DFT onto a grid of `points ≥ n_modes` nodes per axis.
pub fn x_synthesize_on(field: &PhaseField, points: usize) -> PhysicalField {
    let g = &field.grid;
    assert!(points >= g.n_modes(), "synthesis grid smaller than mode range");
    PhysicalField {
        grid: g.clone(),
        points,
        data: synthesize_rows(g, &field.data, g.v_count(), points),
    }
}

/// Forward x-DFT back to the mode range of the grid; inverse of [`x_synthesize_on`].
pub fn x_analyze(values: &PhysicalField) -> Result<PhaseField> {
    let g = &values.grid;
    let vc = g.v_count();
    let nodes = values.points.pow(g.dim() as u32);
    if values.data.len() != nodes * vc {
        return Err(KflError::ShapeMismatch {
            expected: nodes * vc,
            got: values.data.len(),
        });
    }
    if values.points < g.n_modes() {
        return Err(KflError::InvalidGrid("analysis grid smaller than mode range".into()));
    }
    let data = analyze_rows(g, values.data.clone(), vc, values.points);
    Ok(PhaseField { grid: g.clone(), data })
}

/// Synthesis of mode-major rows of arbitrary length onto `points^d` x-nodes.
pub(crate) fn synthesize_rows(g: &GridSpec, modes: &[Complex64], row: usize, points: usize) -> Vec<Complex64> {
    let d = g.dim();
    let mut data = vec![Complex64::new(0.0, 0.0); points.pow(d as u32) * row];
    for m in 0..g.mode_count() {
        let src = &modes[m * row..(m + 1) * row];
        if src.iter().all(|c| c.re == 0.0 && c.im == 0.0) {
            continue;
        }
        for (slot, w) in mode_targets(g, m, points) {
            let dst = &mut data[slot * row..(slot + 1) * row];
            for (y, x) in dst.iter_mut().zip(src) {
                *y += x * w;
            }
        }
    }
    let mut shape = vec![points; d];
    shape.push(row);
    fft_axes(&mut data, &shape, 0..d, FftDirection::Inverse);
    data
}

/// Analysis of node-major rows back onto the mode range.
pub(crate) fn analyze_rows(g: &GridSpec, mut work: Vec<Complex64>, row: usize, points: usize) -> Vec<Complex64> {
    let d = g.dim();
    let mut shape = vec![points; d];
    shape.push(row);
    fft_axes(&mut work, &shape, 0..d, FftDirection::Forward);
    let scale = 1.0 / points.pow(d as u32) as f64;
    let mut out = vec![Complex64::new(0.0, 0.0); g.mode_count() * row];
    for m in 0..g.mode_count() {
        let dst = &mut out[m * row..(m + 1) * row];
        for (slot, w) in mode_targets(g, m, points) {
            // images of a split Nyquist mode add back with unit weight
            let f = if w < 1.0 { 1.0 } else { w } * scale;
            let src = &work[slot * row..(slot + 1) * row];
            for (y, x) in dst.iter_mut().zip(src) {
                *y += x * f;
            }
        }
    }
    out
}

/// Whether any axis of mode `m` sits at the Nyquist wavenumber.
pub(crate) fn is_nyquist_mode(g: &GridSpec, m: usize) -> bool {
    let n = g.mode(m);
    n[..g.dim()].iter().any(|&k| k == g.nyquist())
}

/// Whether ξ-node `k` sits on the band edge `-ξ_N` along `axis`.
pub(crate) fn is_xi_nyquist_axis(g: &GridSpec, k: usize, axis: usize) -> bool {
    unravel(k, g.v_points(), g.dim())[axis] == 0
}

/// Field in (n, ξ) representation on the ξ-grid.
#[derive(Debug, Clone, PartialEq)]
pub struct XiField {
    pub grid: GridSpec,
    pub data: Vec<Complex64>,
}

impl XiField {
    pub fn mode_slice(&self, m: usize) -> &[Complex64] {
        let vc = self.grid.v_count();
        &self.data[m * vc..(m + 1) * vc]
    }

    /// ℓ²_n L²_ξ norm under the measure dξ/(2π)^d.
    pub fn norm_l2(&self) -> f64 {
        (self.grid.dxi_measure() * self.data.iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt()
    }
}

fn sign_pattern(grid: &GridSpec, flat: usize, shift: usize) -> f64 {
    let idx = unravel(flat, grid.v_points(), grid.dim());
    let parity: usize = idx.iter().take(grid.dim()).map(|&i| i + shift).sum();
    if parity % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Transform every row (length `P^d`) between v and ξ in place.
pub(crate) fn v_to_xi_rows(grid: &GridSpec, data: &mut [Complex64]) {
    let d = grid.dim();
    let p = grid.v_points();
    let vc = grid.v_count();
    let rows = data.len() / vc;
    let in_sign: Vec<f64> = (0..vc).map(|j| sign_pattern(grid, j, 0)).collect();
    let out_sign: Vec<f64> = (0..vc)
        .map(|k| sign_pattern(grid, k, p / 2) * grid.dv_volume())
        .collect();
    for (c, s) in data.iter_mut().zip(in_sign.iter().cycle()) {
        *c *= *s;
    }
    let mut shape = vec![rows];
    shape.extend(std::iter::repeat(p).take(d));
    fft_axes(data, &shape, 1..d + 1, FftDirection::Inverse);
    for (c, s) in data.iter_mut().zip(out_sign.iter().cycle()) {
        *c *= *s;
    }
}

pub(crate) fn xi_to_v_rows(grid: &GridSpec, data: &mut [Complex64]) {
    let d = grid.dim();
    let p = grid.v_points();
    let vc = grid.v_count();
    let rows = data.len() / vc;
    let norm = (1.0 / (p as f64 * grid.dv())).powi(d as i32);
    let in_sign: Vec<f64> = (0..vc).map(|k| sign_pattern(grid, k, p / 2)).collect();
    let out_sign: Vec<f64> = (0..vc).map(|j| sign_pattern(grid, j, 0) * norm).collect();
    for (c, s) in data.iter_mut().zip(in_sign.iter().cycle()) {
        *c *= *s;
    }
    let mut shape = vec![rows];
    shape.extend(std::iter::repeat(p).take(d));
    fft_axes(data, &shape, 1..d + 1, FftDirection::Forward);
    for (c, s) in data.iter_mut().zip(out_sign.iter().cycle()) {
        *c *= *s;
    }
}

/// `f̃(n, ξ_k) = Δv^d Σ_v f̂(n, v) e^{iv·ξ_k}` on the ξ-grid.
pub fn v_to_xi(field: &PhaseField) -> XiField {
    let mut data = field.data.clone();
    v_to_xi_rows(&field.grid, &mut data);
    XiField {
        grid: field.grid.clone(),
        data,
    }
}

/// Inverse of [`v_to_xi`].
pub fn xi_to_v(field: &XiField) -> PhaseField {
    let mut data = field.data.clone();
    xi_to_v_rows(&field.grid, &mut data);
    PhaseField {
        grid: field.grid.clone(),
        data,
    }
}

/// Separable table of `e^{i ξ*_a v_j}` for one off-grid point.
pub(crate) struct PointPhases {
    d: usize,
    p: usize,
    table: [Vec<Complex64>; 3],
}

impl PointPhases {
    pub(crate) fn new(grid: &GridSpec) -> Self {
        let p = grid.v_points();
        Self {
            d: grid.dim(),
            p,
            table: [
                vec![Complex64::new(0.0, 0.0); p],
                vec![Complex64::new(0.0, 0.0); p],
                vec![Complex64::new(0.0, 0.0); p],
            ],
        }
    }

    pub(crate) fn set(&mut self, grid: &GridSpec, xi: &[f64; 3]) {
        let dv = grid.dv();
        let v0 = -grid.v_extent();
        for a in 0..self.d {
            let start = Complex64::from_polar(1.0, xi[a] * v0);
            let step = Complex64::from_polar(1.0, xi[a] * dv);
            let row = &mut self.table[a];
            let mut cur = start;
            for (j, slot) in row.iter_mut().enumerate() {
                // re-anchor periodically to bound recurrence drift
                if j % 16 == 0 {
                    cur = Complex64::from_polar(1.0, xi[a] * (v0 + j as f64 * dv));
                }
                *slot = cur;
                cur *= step;
            }
        }
    }

    /// `Σ_v row(v) e^{iξ*·v}` without the Δv^d factor.
    pub(crate) fn contract(&self, row: &[Complex64]) -> Complex64 {
        let p = self.p;
        match self.d {
            2 => {
                let (e0, e1) = (&self.table[0], &self.table[1]);
                let mut acc = Complex64::new(0.0, 0.0);
                for (j0, chunk) in row.chunks_exact(p).enumerate() {
                    let mut inner = Complex64::new(0.0, 0.0);
                    for (c, e) in chunk.iter().zip(e1) {
                        inner += c * e;
                    }
                    acc += inner * e0[j0];
                }
                acc
            }
            _ => {
                let (e0, e1, e2) = (&self.table[0], &self.table[1], &self.table[2]);
                let mut acc = Complex64::new(0.0, 0.0);
                for (j0, plane) in row.chunks_exact(p * p).enumerate() {
                    let mut mid = Complex64::new(0.0, 0.0);
                    for (j1, line) in plane.chunks_exact(p).enumerate() {
                        let mut inner = Complex64::new(0.0, 0.0);
                        for (c, e) in line.iter().zip(e2) {
                            inner += c * e;
                        }
                        mid += inner * e1[j1];
                    }
                    acc += mid * e0[j0];
                }
                acc
            }
        }
    }
}

/// Exact trigonometric evaluation `Σ_v f̂(n, v) e^{iξ*·v} Δv^d` at any ξ*.
pub fn eval_xi_offgrid(field: &PhaseField, n: &[i64], xi: &[f64]) -> Result<Complex64> {
    let g = &field.grid;
    let m = g
        .mode_index(n)
        .ok_or_else(|| crate::error::invalid("n", format!("{n:?} outside the mode range")))?;
    let mut point = [0.0; 3];
    point[..g.dim()].copy_from_slice(&xi[..g.dim()]);
    let mut phases = PointPhases::new(g);
    phases.set(g, &point);
    Ok(phases.contract(field.mode_slice(m)) * g.dv_volume())
}
