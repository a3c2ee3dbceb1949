//! In-place N-dimensional complex FFT on row-major `M^N` arrays.
//!
//! Lines along the last axis are contiguous and transformed directly. Other
//! axes are gathered into a contiguous scratch copy, transformed, and
//! scattered back. All parallel work is split over disjoint output chunks, so
//! results do not depend on the thread count.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::Fft;

use super::grid::Grid;

const LINES_PER_TASK: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Direction {
    Forward,
    Inverse,
}

/// Unnormalized transform of one component block of length `M^N`.
pub(crate) fn fft_nd(grid: &Grid, data: &mut [Complex64], dir: Direction) {
    let res = grid.res();
    let dim = grid.dim();
    debug_assert_eq!(data.len(), grid.npoints());
    let plan = match dir {
        Direction::Forward => grid.forward_plan(),
        Direction::Inverse => grid.inverse_plan(),
    };

    transform_lines(plan, data, res);

    if dim == 1 {
        return;
    }
    let mut scratch = vec![Complex64::new(0.0, 0.0); data.len()];
    for axis in 0..dim - 1 {
        let stride = res.pow((dim - 1 - axis) as u32);
        let block = res * stride;

        scratch
            .par_chunks_mut(res)
            .enumerate()
            .for_each(|(line, out)| {
                let outer = line / stride;
                let inner = line % stride;
                let base = outer * block + inner;
                for (i, o) in out.iter_mut().enumerate() {
                    *o = data[base + i * stride];
                }
            });

        transform_lines(plan, &mut scratch, res);

        data.par_chunks_mut(res)
            .enumerate()
            .for_each(|(chunk, out)| {
                let start = chunk * res;
                for (r, o) in out.iter_mut().enumerate() {
                    let idx = start + r;
                    let outer = idx / block;
                    let rem = idx % block;
                    let i = rem / stride;
                    let inner = rem % stride;
                    *o = scratch[(outer * stride + inner) * res + i];
                }
            });
    }
}

fn transform_lines(plan: &Arc<dyn Fft<f64>>, data: &mut [Complex64], res: usize) {
    data.par_chunks_mut(res * LINES_PER_TASK)
        .for_each(|chunk| plan.process(chunk));
}
