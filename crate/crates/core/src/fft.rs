//! Multi-axis FFT over row-major tensors whose axes all share one length.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

/// Forward and inverse plans for lines of length `n`.
///
/// Transforms are unnormalized in both directions; callers apply scaling.
#[derive(Clone)]
pub struct TensorFft {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for TensorFft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TensorFft").field("n", &self.n).finish()
    }
}

impl TensorFft {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        TensorFft {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn forward(&self, data: &mut [Complex64], axes: usize) {
        transform(&*self.forward, self.n, data, axes);
    }

    pub fn inverse(&self, data: &mut [Complex64], axes: usize) {
        transform(&*self.inverse, self.n, data, axes);
    }
}

fn transform(fft: &dyn Fft<f64>, n: usize, data: &mut [Complex64], axes: usize) {
    assert_eq!(
        Some(data.len()),
        n.checked_pow(axes as u32),
        "tensor length does not match n^axes"
    );
    let threads = rayon::current_num_threads();
    for axis in 0..axes {
        let stride = n.pow((axes - 1 - axis) as u32);
        let block_len = n * stride;
        let blocks = data.len() / block_len;
        if stride == 1 {
            // Contiguous lines: hand rustfft a batch of whole lines per task.
            let lines_per_task = (data.len() / n / threads.max(1)).max(1);
            data.par_chunks_mut(n * lines_per_task).for_each(|chunk| {
                let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
                fft.process_with_scratch(chunk, &mut scratch);
            });
        } else if blocks >= threads {
            data.par_chunks_mut(block_len).for_each(|block| {
                let mut buf = vec![Complex64::default(); block_len];
                let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
                strided_block(fft, n, stride, block, &mut buf, &mut scratch, false);
            });
        } else {
            let mut buf = vec![Complex64::default(); block_len];
            let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
            for block in data.chunks_mut(block_len) {
                strided_block(fft, n, stride, block, &mut buf, &mut scratch, true);
            }
        }
    }
}

/// Transforms the `stride` interleaved lines of one `n x stride` block by
/// transposing them into contiguous rows of `buf`.
fn strided_block(
    fft: &dyn Fft<f64>,
    n: usize,
    stride: usize,
    block: &mut [Complex64],
    buf: &mut [Complex64],
    scratch: &mut [Complex64],
    parallel: bool,
) {
    if parallel {
        {
            let src = &*block;
            buf.par_chunks_mut(n).enumerate().for_each(|(s, row)| {
                for (i, v) in row.iter_mut().enumerate() {
                    *v = src[i * stride + s];
                }
            });
        }
        buf.par_chunks_mut(n).for_each(|row| {
            let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
            fft.process_with_scratch(row, &mut scratch);
        });
        let src = &*buf;
        block
            .par_chunks_mut(stride)
            .enumerate()
            .for_each(|(i, row)| {
                for (s, v) in row.iter_mut().enumerate() {
                    *v = src[s * n + i];
                }
            });
    } else {
        for i in 0..n {
            for s in 0..stride {
                buf[s * n + i] = block[i * stride + s];
            }
        }
        fft.process_with_scratch(buf, scratch);
        for i in 0..n {
            for s in 0..stride {
                block[i * stride + s] = buf[s * n + i];
            }
        }
    }
}
