//! Small spectral helpers shared across modules.

use std::f64::consts::PI;
use std::sync::Arc;

use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::num_complex::Complex;

/// Hann window. `periodic` gives the DFT-even variant used for overlap-add.
pub fn hann(n: usize, periodic: bool) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let denom = if periodic { n } else { n - 1 } as f64;
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / denom).cos())
        .collect()
}

/// Forward/inverse real FFT pair of a fixed length.
pub struct RealFft {
    len: usize,
    fwd: Arc<dyn RealToComplex<f64>>,
    inv: Arc<dyn ComplexToReal<f64>>,
}

impl RealFft {
    pub fn new(len: usize) -> Self {
        let mut planner = RealFftPlanner::<f64>::new();
        Self {
            len,
            fwd: planner.plan_fft_forward(len),
            inv: planner.plan_fft_inverse(len),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn bins(&self) -> usize {
        self.len / 2 + 1
    }

    /// Spectrum of `x` zero-padded (or truncated) to the transform length.
    pub fn forward(&self, x: &[f64]) -> Vec<Complex<f64>> {
        let mut input = vec![0.0; self.len];
        let n = x.len().min(self.len);
        input[..n].copy_from_slice(&x[..n]);
        let mut out = self.fwd.make_output_vec();
        self.fwd
            .process(&mut input, &mut out)
            .expect("buffer sizes come from the plan");
        out
    }

    /// Unnormalized inverse (multiply by `1/len` to undo [`forward`](Self::forward)).
    /// Imaginary parts of the DC and Nyquist bins are ignored.
    pub fn inverse(&self, spectrum: &[Complex<f64>]) -> Vec<f64> {
        let mut input = spectrum.to_vec();
        input[0].im = 0.0;
        if self.len.is_multiple_of(2) {
            input[self.len / 2].im = 0.0;
        }
        let mut out = self.inv.make_output_vec();
        self.inv
            .process(&mut input, &mut out)
            .expect("buffer sizes come from the plan");
        out
    }
}
