use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of one complex Gabor kernel.
///
/// The kernel's `x` axis runs down image rows and its `y` axis along image
/// columns, so with `theta = 0` the carrier oscillates horizontally. `lambda`
/// is an angular frequency in radians per pixel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaborParams {
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub theta: f64,
    pub lambda: f64,
}

impl GaborParams {
    pub fn new(sigma_x: f64, sigma_y: f64, theta: f64, lambda: f64) -> Result<Self> {
        let p = Self { sigma_x, sigma_y, theta, lambda };
        p.validate()?;
        Ok(p)
    }

    /// A `theta = 0` kernel, the only orientation the pipeline searches.
    pub fn horizontal(sigma_x: f64, sigma_y: f64, lambda: f64) -> Result<Self> {
        Self::new(sigma_x, sigma_y, 0.0, lambda)
    }

    pub fn validate(&self) -> Result<()> {
        let Self { sigma_x, sigma_y, theta, lambda } = *self;
        if !(sigma_x.is_finite() && sigma_x > 0.0 && sigma_y.is_finite() && sigma_y > 0.0) {
            return Err(Error::Param(format!(
                "sigmas must be finite and positive, got ({sigma_x}, {sigma_y})"
            )));
        }
        if !theta.is_finite() || !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::Param(format!("bad theta/lambda ({theta}, {lambda})")));
        }
        Ok(())
    }

    /// Evaluates the continuous kernel at a real offset.
    pub fn value_at(&self, x: f64, y: f64) -> Complex64 {
        let norm = 1.0 / ((2.0 * PI).sqrt() * self.sigma_x * self.sigma_y);
        let envelope = (-(x * x / (2.0 * self.sigma_x * self.sigma_x)
            + y * y / (2.0 * self.sigma_y * self.sigma_y)))
            .exp();
        let phase = self.lambda * (x * self.theta.sin() + y * self.theta.cos());
        Complex64::from_polar(norm * envelope, phase)
    }

    pub fn half_rows(&self) -> usize {
        (3.0 * self.sigma_x).ceil() as usize
    }

    pub fn half_cols(&self) -> usize {
        (3.0 * self.sigma_y).ceil() as usize
    }
}

/// A kernel sampled on the integer lattice `[-half_rows, half_rows] x [-half_cols, half_cols]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexKernel {
    half_rows: usize,
    half_cols: usize,
    values: Vec<Complex64>,
}

impl ComplexKernel {
    pub fn half_rows(&self) -> usize {
        self.half_rows
    }

    pub fn half_cols(&self) -> usize {
        self.half_cols
    }

    pub fn rows(&self) -> usize {
        2 * self.half_rows + 1
    }

    pub fn cols(&self) -> usize {
        2 * self.half_cols + 1
    }

    /// Sample at row offset `dx`, column offset `dy`.
    #[inline]
    pub fn at(&self, dx: isize, dy: isize) -> Complex64 {
        let r = (dx + self.half_rows as isize) as usize;
        let c = (dy + self.half_cols as isize) as usize;
        self.values[r * self.cols() + c]
    }

    /// Samples in row-major order, starting at offset `(-half_rows, -half_cols)`.
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
}

/// Samples the kernel, truncated at three standard deviations per axis.
///
/// With `dc_correct` the mean of the real part over the support is removed
/// from the real part, so the kernel sums to (numerically) zero.
pub fn make_kernel(p: &GaborParams, dc_correct: bool) -> Result<ComplexKernel> {
    p.validate()?;
    let (hr, hc) = (p.half_rows(), p.half_cols());
    let mut values = Vec::with_capacity((2 * hr + 1) * (2 * hc + 1));
    for dx in -(hr as isize)..=hr as isize {
        for dy in -(hc as isize)..=hc as isize {
            values.push(p.value_at(dx as f64, dy as f64));
        }
    }
    if dc_correct {
        let mean = values.iter().map(|v| v.re).sum::<f64>() / values.len() as f64;
        values.iter_mut().for_each(|v| v.re -= mean);
    }
    Ok(ComplexKernel { half_rows: hr, half_cols: hc, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_value_of_unit_kernel() {
        let p = GaborParams::new(1.0, 1.0, 0.0, 0.0).unwrap();
        let k = make_kernel(&p, false).unwrap();
        let v = k.at(0, 0);
        assert!((v.re - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert_eq!(v.im, 0.0);
    }

    #[test]
    fn uncorrected_kernel_is_conjugate_symmetric() {
        let p = GaborParams::new(1.7, 2.3, 0.4, 0.9).unwrap();
        let k = make_kernel(&p, false).unwrap();
        let (hr, hc) = (k.half_rows() as isize, k.half_cols() as isize);
        for dx in -hr..=hr {
            for dy in -hc..=hc {
                let d = k.at(dx, dy) - k.at(-dx, -dy).conj();
                assert!(d.norm() <= 1e-14, "({dx},{dy}) {d}");
            }
        }
    }

    #[test]
    fn lattice_sample_matches_independent_formula() {
        // Direct scalar evaluation, written out separately from value_at.
        let (sx, sy, lam) = (2.0f64, 3.0f64, 1.0f64);
        let amp = 1.0 / ((2.0 * PI).sqrt() * sx * sy) * (-(1.0 / (2.0 * sx * sx) + 1.0 / (2.0 * sy * sy))).exp();
        // theta = 0: phase = lambda * y with y = 1
        let expect = Complex64::new(amp * lam.cos(), amp * lam.sin());
        let p = GaborParams::horizontal(sx, sy, lam).unwrap();
        let k = make_kernel(&p, false).unwrap();
        assert!((k.at(1, 1) - expect).norm() < 1e-15);
        assert_eq!((k.half_rows(), k.half_cols()), (6, 9));
    }

    #[test]
    fn dc_correction_zeroes_the_real_sum() {
        let p = GaborParams::horizontal(3.0, 2.0, 0.3).unwrap();
        let k = make_kernel(&p, true).unwrap();
        let s: Complex64 = k.values().iter().sum();
        assert!(s.norm() < 1e-13, "{s}");
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(GaborParams::new(0.0, 1.0, 0.0, 0.0).is_err());
        assert!(GaborParams::new(1.0, f64::INFINITY, 0.0, 0.0).is_err());
        assert!(GaborParams::new(1.0, 1.0, f64::NAN, 0.0).is_err());
        assert!(GaborParams::new(1.0, 1.0, 0.0, -1.0).is_err());
    }
}
