//! Free transport S(t) = e^{it∇_ξ·∇_x}, the multiplier e^{-itv·n} on f̂(n, v).

use num_complex::Complex64;
use rayon::prelude::*;

use crate::grid::{dot_iv, PhaseField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Apply S(t).
    Forward,
    /// Apply S(-t), pulling a field back to the interaction frame.
    Backward,
}

/// `S(t)f`. Each phase is evaluated from the exact product `t·(v·n)`.
pub fn free_evolve(field: &PhaseField, t: f64) -> PhaseField {
    let mut out = field.clone();
    evolve_in_place(&mut out, t);
    out
}

pub fn interaction_frame(field: &PhaseField, t: f64, direction: Direction) -> PhaseField {
    match direction {
        Direction::Forward => free_evolve(field, t),
        Direction::Backward => free_evolve(field, -t),
    }
}

pub(crate) fn evolve_in_place(field: &mut PhaseField, t: f64) {
    if t == 0.0 {
        return;
    }
    let grid = field.grid().clone();
    let d = grid.dim();
    let vc = grid.v_count();
    let velocities: Vec<[f64; 3]> = (0..vc).map(|j| grid.velocity(j)).collect();
    field
        .data_mut()
        .par_chunks_mut(vc)
        .enumerate()
        .for_each(|(m, row)| {
            let n = grid.mode(m);
            if n[..d].iter().all(|&k| k == 0) {
                return;
            }
            for (c, v) in row.iter_mut().zip(&velocities) {
                *c *= Complex64::from_polar(1.0, -t * dot_iv(&n, v, d));
            }
        });
}
