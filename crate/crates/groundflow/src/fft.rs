//! Small N-dimensional FFT layer over `rustfft`, specialized to cubical
//! grids (same point count along every axis, row-major layout).

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

pub(crate) struct NdFft {
    dimension: usize,
    points: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl NdFft {
    pub fn new(dimension: usize, points: usize) -> Self {
        let mut planner = FftPlanner::new();
        NdFft {
            dimension,
            points,
            forward: planner.plan_fft_forward(points),
            inverse: planner.plan_fft_inverse(points),
        }
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dimension as u32)
    }

    /// Forward transform of a real array. Coefficients are normalized by
    /// 1/M^N so they are true Fourier coefficients of the trig interpolant.
    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        assert_eq!(values.len(), self.len());
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        for axis in 0..self.dimension {
            self.transform_axis(&mut buf, axis, &self.forward);
        }
        let scale = 1.0 / self.len() as f64;
        for c in &mut buf {
            *c *= scale;
        }
        buf
    }

    /// Inverse transform; returns the real part (imaginary residue is
    /// roundoff for coefficient arrays coming from real data).
    pub fn inverse_real(&self, mut coeffs: Vec<Complex64>) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.len());
        for axis in 0..self.dimension {
            self.transform_axis(&mut coeffs, axis, &self.inverse);
        }
        coeffs.into_iter().map(|c| c.re).collect()
    }

    fn transform_axis(&self, buf: &mut [Complex64], axis: usize, fft: &Arc<dyn Fft<f64>>) {
        let m = self.points;
        let n = self.dimension;
        // stride between consecutive entries along `axis`, row-major
        let stride = m.pow((n - 1 - axis) as u32);
        let lines = buf.len() / m;
        let mut line = vec![Complex64::new(0.0, 0.0); m];
        for l in 0..lines {
            // decompose the line index into (outer, inner) blocks around the axis
            let outer = l / stride;
            let inner = l % stride;
            let base = outer * stride * m + inner;
            for k in 0..m {
                line[k] = buf[base + k * stride];
            }
            fft.process(&mut line);
            for k in 0..m {
                buf[base + k * stride] = line[k];
            }
        }
    }
}

/// Signed integer frequency for bin `k` of an M-point transform:
/// 0, 1, ..., M/2, -(M/2 - 1), ..., -1.
pub(crate) fn freq_index(k: usize, m: usize) -> i64 {
    if k <= m / 2 {
        k as i64
    } else {
        k as i64 - m as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_2d() {
        let fft = NdFft::new(2, 8);
        let values: Vec<f64> = (0..64).map(|i| (i as f64 * 0.37).sin()).collect();
        let back = fft.inverse_real(fft.forward(&values));
        for (a, b) in values.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_of_pure_mode_is_single_coefficient() {
        let m = 16;
        let fft = NdFft::new(1, m);
        let values: Vec<f64> = (0..m)
            .map(|k| (2.0 * std::f64::consts::PI * 3.0 * k as f64 / m as f64).cos())
            .collect();
        let coeffs = fft.forward(&values);
        for (k, c) in coeffs.iter().enumerate() {
            let expect = if k == 3 || k == m - 3 { 0.5 } else { 0.0 };
            assert!((c.re - expect).abs() < 1e-12 && c.im.abs() < 1e-12, "bin {k}");
        }
    }

    #[test]
    fn freq_index_wraps_negative() {
        assert_eq!(freq_index(0, 8), 0);
        assert_eq!(freq_index(4, 8), 4);
        assert_eq!(freq_index(5, 8), -3);
        assert_eq!(freq_index(7, 8), -1);
    }
}
