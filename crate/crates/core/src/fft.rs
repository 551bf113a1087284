//! Axis-by-axis multidimensional FFT on cubic row-major arrays.
//!
//! Transforms are unnormalized in both directions. The pruned variants are
//! used by the Hartree convolution, where the input occupies only the low
//! corner of a doubled grid and only the low corner of the output is needed.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Clone)]
pub(crate) struct FftNd {
    dim: usize,
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for FftNd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FftNd")
            .field("dim", &self.dim)
            .field("n", &self.n)
            .finish()
    }
}

impl FftNd {
    pub(crate) fn new(dim: usize, n: usize) -> Self {
        let mut planner = FftPlanner::new();
        FftNd {
            dim,
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub(crate) fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.forward, self.n, Direction::LastAxisFirst);
    }

    pub(crate) fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inverse, self.n, Direction::FirstAxisFirst);
    }

    /// Forward transform of an array that is zero outside the corner
    /// `[0, restrict)^dim`. Lines that are identically zero are skipped.
    pub(crate) fn forward_pruned(&self, data: &mut [Complex64], restrict: usize) {
        self.run(data, &self.forward, restrict, Direction::LastAxisFirst);
    }

    /// Inverse transform that is only guaranteed correct on the corner
    /// `[0, restrict)^dim`; everything else is left partially transformed.
    pub(crate) fn inverse_pruned(&self, data: &mut [Complex64], restrict: usize) {
        self.run(data, &self.inverse, restrict, Direction::FirstAxisFirst);
    }

    fn run(
        &self,
        data: &mut [Complex64],
        fft: &Arc<dyn Fft<f64>>,
        restrict: usize,
        dir: Direction,
    ) {
        debug_assert_eq!(data.len(), self.len());
        let mut scratch = vec![ZERO; fft.get_inplace_scratch_len()];
        let mut lines = Vec::new();
        let axes: Vec<usize> = match dir {
            Direction::LastAxisFirst => (0..self.dim).rev().collect(),
            Direction::FirstAxisFirst => (0..self.dim).collect(),
        };
        for axis in axes {
            self.axis_pass(data, fft, axis, restrict, &mut lines, &mut scratch);
        }
    }

    /// Transforms every line along `axis` whose coordinates on the axes
    /// preceding `axis` all lie below `restrict`.
    fn axis_pass(
        &self,
        data: &mut [Complex64],
        fft: &Arc<dyn Fft<f64>>,
        axis: usize,
        restrict: usize,
        lines: &mut Vec<Complex64>,
        scratch: &mut [Complex64],
    ) {
        let n = self.n;
        let stride = n.pow((self.dim - 1 - axis) as u32);
        let block = n * stride;
        let outer_blocks = restrict.pow(axis as u32);

        for outer in 0..outer_blocks {
            // Map the restricted outer multi-index to its flat block index.
            let mut rem = outer;
            let mut flat = 0;
            let mut place = 1;
            for _ in 0..axis {
                flat += (rem % restrict) * place;
                rem /= restrict;
                place *= n;
            }
            let chunk = &mut data[flat * block..(flat + 1) * block];
            if stride == 1 {
                fft.process_with_scratch(chunk, scratch);
                continue;
            }
            lines.resize(block, ZERO);
            for k in 0..n {
                let row = &chunk[k * stride..(k + 1) * stride];
                for (s, v) in row.iter().enumerate() {
                    lines[s * n + k] = *v;
                }
            }
            fft.process_with_scratch(lines, scratch);
            for k in 0..n {
                let row = &mut chunk[k * stride..(k + 1) * stride];
                for (s, v) in row.iter_mut().enumerate() {
                    *v = lines[s * n + k];
                }
            }
        }
    }
}

#[derive(Clone, Copy)]
enum Direction {
    LastAxisFirst,
    FirstAxisFirst,
}
