//! Thin wrapper over `rustfft` for 1-D and 2-D periodic grids.
//!
//! Forward transforms are normalized by `1/n^d` so that the output holds
//! the unit-cell Fourier coefficients `∫ u(x) e^{-2πi n·x} dx`.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Signed frequency of storage index `k` on an `n`-point axis. The Nyquist
/// index maps to `-n/2`.
#[inline]
pub fn frequency(k: usize, n: usize) -> i64 {
    if k < n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// Storage index of signed frequency `f` on an `n`-point axis.
#[inline]
pub fn storage_index(f: i64, n: usize) -> usize {
    f.rem_euclid(n as i64) as usize
}

pub struct Spectral {
    dim: usize,
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    transposed: Vec<Complex64>,
}

impl Spectral {
    pub fn new(dim: usize, n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let scratch_len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        Spectral {
            dim,
            n,
            fwd,
            inv,
            scratch: vec![Complex64::default(); scratch_len],
            transposed: vec![Complex64::default(); if dim == 2 { n * n } else { 0 }],
        }
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn forward(&mut self, data: &mut [Complex64]) {
        self.transform(data, true);
        let scale = 1.0 / self.len() as f64;
        for z in data.iter_mut() {
            *z *= scale;
        }
    }

    pub fn inverse(&mut self, data: &mut [Complex64]) {
        self.transform(data, false);
    }

    fn transform(&mut self, data: &mut [Complex64], forward: bool) {
        assert_eq!(data.len(), self.len(), "grid length mismatch");
        let fft = if forward { &self.fwd } else { &self.inv };
        fft.process_with_scratch(data, &mut self.scratch);
        if self.dim == 2 {
            let n = self.n;
            transpose(data, &mut self.transposed, n);
            fft.process_with_scratch(&mut self.transposed, &mut self.scratch);
            transpose(&self.transposed, data, n);
        }
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in 0..n {
            dst[j * n + i] = src[i * n + j];
        }
    }
}
