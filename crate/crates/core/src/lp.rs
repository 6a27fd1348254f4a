//! Littlewood–Paley calculus: sharp dyadic shells and shifted blocks in n,
//! the smooth velocity cutoffs φ_M, and modulation shells Q_K on trajectories.

use num_complex::Complex64;

use crate::bump::phi_dyadic;
use crate::error::{invalid, Result};
use crate::grid::{GridSpec, PhaseField};
use crate::norms::Trajectory;

/// Dyadic pair (N, M) of x- and velocity scales.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DyadicIndex {
    pub n: u32,
    pub m: u32,
}

impl DyadicIndex {
    pub fn new(n: u32, m: u32) -> Result<Self> {
        check_dyadic("N", n)?;
        check_dyadic("M", m)?;
        Ok(Self { n, m })
    }
}

pub(crate) fn check_dyadic(name: &'static str, k: u32) -> Result<()> {
    if k == 0 || !k.is_power_of_two() {
        Err(invalid(name, format!("{k} is not a power of two")))
    } else {
        Ok(())
    }
}

/// `n ∈ (-N, N]^d`, shifted by `a`.
pub fn in_block(n: &[i64], a: &[i64], big_n: i64, d: usize) -> bool {
    (0..d).all(|i| {
        let k = n[i] - a[i];
        k > -big_n && k <= big_n
    })
}

/// Membership in the dyadic shell `(-N, N]^d \ (-N/2, N/2]^d`. For N = 1
/// nothing is removed and the shell is the cube `{0, 1}^d`, so that the
/// shells up to N partition `(-N, N]^d`.
pub fn in_shell(n: &[i64], big_n: u32, d: usize) -> bool {
    let outer = in_block(n, &[0; 3], big_n as i64, d);
    let inner = (0..d).all(|i| 2 * n[i] > -(big_n as i64) && 2 * n[i] <= big_n as i64);
    outer && !(inner && big_n > 1)
}

fn mask_modes(field: &PhaseField, keep: impl Fn(&[i64; 3]) -> bool) -> PhaseField {
    let grid = field.grid();
    let mut out = field.clone();
    for m in 0..grid.mode_count() {
        if !keep(&grid.mode(m)) {
            out.mode_slice_mut(m).fill(Complex64::new(0.0, 0.0));
        }
    }
    out
}

/// Sharp projector P_N^x onto the dyadic x-shell.
pub fn project_x_shell(field: &PhaseField, big_n: u32) -> Result<PhaseField> {
    check_dyadic("N", big_n)?;
    let d = field.grid().dim();
    Ok(mask_modes(field, |n| in_shell(n, big_n, d)))
}

/// Sharp projector onto the shifted cube `a + (-N, N]^d`.
pub fn project_x_block(field: &PhaseField, a: &[i64], big_n: u32) -> Result<PhaseField> {
    if big_n == 0 {
        return Err(invalid("N", "must be positive"));
    }
    let d = field.grid().dim();
    if a.len() < d {
        return Err(invalid("a", format!("needs {d} components")));
    }
    Ok(mask_modes(field, |n| in_block(n, a, big_n as i64, d)))
}

/// Multiplier φ_M(v) on the velocity grid.
pub fn velocity_multiplier(grid: &GridSpec, big_m: f64) -> Vec<f64> {
    let d = grid.dim();
    (0..grid.v_count())
        .map(|j| {
            let v = grid.velocity(j);
            phi_dyadic((0..d).map(|a| v[a] * v[a]).sum::<f64>().sqrt(), big_m)
        })
        .collect()
}

/// Smooth projector P_M^ξ: multiplication by φ_M(v).
pub fn project_v_dyadic(field: &PhaseField, big_m: u32) -> Result<PhaseField> {
    check_dyadic("M", big_m)?;
    let grid = field.grid();
    let mult = velocity_multiplier(grid, big_m as f64);
    let mut out = field.clone();
    for row in out.data_mut().chunks_exact_mut(grid.v_count()) {
        for (c, w) in row.iter_mut().zip(&mult) {
            *c *= *w;
        }
    }
    Ok(out)
}

/// Whether ⟨σ⟩ falls in the dyadic modulation shell of K:
/// `K/2 < ⟨σ⟩ ≤ K`, or `⟨σ⟩ ≤ 1` for K = 1.
pub fn in_modulation_shell(bracket_sigma: f64, big_k: u32) -> bool {
    let k = big_k as f64;
    if big_k == 1 {
        bracket_sigma <= 1.0
    } else {
        bracket_sigma > 0.5 * k && bracket_sigma <= k
    }
}

/// Modulation projector Q_K.
///
/// Works in the interaction frame: with `G(t) = S(-t)f(t)` the modulation
/// `τ + n·v` of f is the plain time frequency σ of G, so Q_K is a sharp
/// multiplier on the time DFT of G. Errors if K is beyond the resolvable
/// band `π/dt`.
pub fn project_modulation(traj: &Trajectory, big_k: u32) -> Result<Trajectory> {
    check_dyadic("K", big_k)?;
    let limit = std::f64::consts::PI / traj.dt();
    // ⟨σ⟩ ≤ K must fit in |σ| ≤ π/dt
    if ((big_k as f64).powi(2) - 1.0).max(0.0).sqrt() > limit {
        return Err(crate::error::KflError::Nyquist {
            parameter: "K",
            value: big_k as f64,
            limit,
        });
    }
    let mut spec = traj.modulation_spectrum();
    let sig = spec.frequencies();
    for (s, row) in sig.iter().zip(spec.rows_mut()) {
        if !in_modulation_shell(crate::bump::bracket(*s), big_k) {
            row.fill(Complex64::new(0.0, 0.0));
        }
    }
    Ok(traj.with_samples(spec.into_frame_samples()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn shell_membership() {
        assert!(in_shell(&[0, 0, 0], 1, 2));
        assert!(in_shell(&[1, 1, 0], 1, 2));
        assert!(!in_shell(&[1, 0, 0], 2, 2));
        assert!(!in_shell(&[-1, 0, 0], 1, 2));
        assert!(in_shell(&[-1, 1, 0], 2, 2));
        assert!(in_shell(&[2, 0, 0], 2, 2));
        assert!(!in_shell(&[-2, 0, 0], 2, 2));
        assert!(in_shell(&[3, 0, 0], 4, 2));
        for big_n in [1u32, 2, 8, 16] {
            assert_eq!(in_shell(&[3, 0, 0], big_n, 2), big_n == 4);
        }
    }

    #[test]
    fn dyadic_index_validation() {
        assert!(DyadicIndex::new(4, 2).is_ok());
        assert!(DyadicIndex::new(3, 2).is_err());
        assert!(DyadicIndex::new(4, 0).is_err());
    }

    #[test]
    fn translated_mode_survives_iff_inside() {
        let g = make_grid(2, 16, 4.0, 4).unwrap();
        let a = [3i64, -2, 0];
        for n0 in [[1i64, 1, 0], [2, -1, 0], [-2, 0, 0], [0, 3, 0]] {
            let target = [a[0] + n0[0], a[1] + n0[1], 0];
            let f = PhaseField::from_fn(&g, |n, _| {
                if n[..2] == target[..2] {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            });
            let kept = project_x_block(&f, &a, 2).unwrap().max_abs() > 0.0;
            assert_eq!(kept, in_block(&n0, &[0; 3], 2, 2), "n0 = {n0:?}");
        }
    }
}
