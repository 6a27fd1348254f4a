//! Row-major multi-index helpers for d ∈ {2, 3} tensors.

pub(crate) type Multi = [usize; 3];

#[inline]
pub(crate) fn unravel(mut flat: usize, extent: usize, d: usize) -> Multi {
    let mut idx = [0usize; 3];
    for axis in (0..d).rev() {
        idx[axis] = flat % extent;
        flat /= extent;
    }
    idx
}

#[inline]
pub(crate) fn ravel(idx: &Multi, extent: usize, d: usize) -> usize {
    let mut flat = 0;
    for &i in idx.iter().take(d) {
        flat = flat * extent + i;
    }
    flat
}
