//! Axis-wise FFTs over flattened row-major tensors.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn plan(len: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft(len, direction))
}

/// Unnormalized FFT along `axis` of a row-major tensor with the given shape.
/// `Forward` uses e^{-2πi jk/L}, `Inverse` uses e^{+2πi jk/L}.
pub(crate) fn fft_axis(data: &mut [Complex64], shape: &[usize], axis: usize, direction: FftDirection) {
    let len = shape[axis];
    if len <= 1 {
        return;
    }
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let fft = plan(len, direction);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    if inner == 1 {
        fft.process_with_scratch(&mut data[..outer * len], &mut scratch);
        return;
    }
    // strided lines are gathered a block of columns at a time, transformed as
    // contiguous rows, and scattered back
    const BLOCK: usize = 64;
    let mut buf = vec![Complex64::new(0.0, 0.0); BLOCK * len];
    for o in 0..outer {
        let slab = &mut data[o * len * inner..(o + 1) * len * inner];
        for i0 in (0..inner).step_by(BLOCK) {
            let w = BLOCK.min(inner - i0);
            for k in 0..len {
                let src = &slab[k * inner + i0..k * inner + i0 + w];
                for (c, value) in src.iter().enumerate() {
                    buf[c * len + k] = *value;
                }
            }
            fft.process_with_scratch(&mut buf[..w * len], &mut scratch);
            for k in 0..len {
                let dst = &mut slab[k * inner + i0..k * inner + i0 + w];
                for (c, value) in dst.iter_mut().enumerate() {
                    *value = buf[c * len + k];
                }
            }
        }
    }
}

pub(crate) fn fft_axes(data: &mut [Complex64], shape: &[usize], axes: std::ops::Range<usize>, direction: FftDirection) {
    for axis in axes {
        fft_axis(data, shape, axis, direction);
    }
}
