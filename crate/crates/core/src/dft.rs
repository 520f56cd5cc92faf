//! Unitary DFT of a fixed length, backed by `rustfft`.
//!
//! `forward` computes `F r` with `F[k, n] = exp(-2πi kn/N) / √N`; `inverse`
//! computes `F⁻¹ = Fᴴ`. Both preserve the Euclidean norm.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
pub struct UnitaryDft {
    n: usize,
    scale: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl UnitaryDft {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "DFT length must be positive");
        let mut planner = FftPlanner::new();
        Self {
            n,
            scale: 1.0 / (n as f64).sqrt(),
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

    pub fn forward_in_place(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.n);
        self.forward.process(buf);
        buf.iter_mut().for_each(|v| *v *= self.scale);
    }

    pub fn inverse_in_place(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.n);
        self.inverse.process(buf);
        buf.iter_mut().for_each(|v| *v *= self.scale);
    }
}

impl fmt::Debug for UnitaryDft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UnitaryDft").field("n", &self.n).finish()
    }
}
