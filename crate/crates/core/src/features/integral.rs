use crate::error::{Error, Result};
use crate::gabor::ResponseField;

/// Summed-area table of squared response magnitudes.
///
/// `at(r, c)` is the sum of `|u(r', c')|^2` over `r' <= r`, `c' <= c`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralImage {
    width: usize,
    height: usize,
    sums: Vec<f64>,
}

impl IntegralImage {
    /// Builds the table in one pass from a complex response field.
    pub fn from_field(field: &ResponseField) -> Self {
        let sq: Vec<f64> = field.values().iter().map(|v| v.norm_sqr()).collect();
        Self::from_squares(field.width(), field.height(), &sq)
    }

    /// Builds the table from magnitudes, squaring each one.
    pub fn from_magnitudes(width: usize, height: usize, mags: &[f64]) -> Result<Self> {
        if width == 0 || height == 0 || mags.len() != width * height {
            return Err(Error::Size(format!("{width}x{height} field with {} values", mags.len())));
        }
        let sq: Vec<f64> = mags.iter().map(|m| m * m).collect();
        Ok(Self::from_squares(width, height, &sq))
    }

    fn from_squares(width: usize, height: usize, sq: &[f64]) -> Self {
        let mut sums = vec![0.0; width * height];
        for r in 0..height {
            let mut running = 0.0;
            for c in 0..width {
                running += sq[r * width + c];
                let above = if r > 0 { sums[(r - 1) * width + c] } else { 0.0 };
                sums[r * width + c] = running + above;
            }
        }
        Self { width, height, sums }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.sums[row * self.width + col]
    }

    /// Squared-magnitude sum over rows `r0..=r1` and columns `c0..=c1`,
    /// by four-corner inclusion-exclusion. Empty ranges give 0.
    pub fn rect_sum(&self, r0: usize, c0: usize, r1: usize, c1: usize) -> f64 {
        if r0 > r1 || c0 > c1 {
            return 0.0;
        }
        let d = self.at(r1, c1);
        let b = if r0 > 0 { self.at(r0 - 1, c1) } else { 0.0 };
        let c = if c0 > 0 { self.at(r1, c0 - 1) } else { 0.0 };
        let a = if r0 > 0 && c0 > 0 { self.at(r0 - 1, c0 - 1) } else { 0.0 };
        // Cancellation can leave a tiny negative remainder.
        (a + d - b - c).max(0.0)
    }

    /// Sum over the whole field.
    pub fn total(&self) -> f64 {
        self.at(self.height - 1, self.width - 1)
    }
}

/// Free-function form of [`IntegralImage::from_field`].
pub fn integral_image(field: &ResponseField) -> IntegralImage {
    IntegralImage::from_field(field)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_summed_two_by_two() {
        let iu = IntegralImage::from_magnitudes(2, 2, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(iu.sums, vec![1.0, 5.0, 10.0, 30.0]);
        assert_eq!(iu.rect_sum(1, 1, 1, 1), 16.0);
        assert_eq!(iu.rect_sum(0, 1, 1, 1), 20.0);
    }

    #[test]
    fn zero_field_gives_zero_table() {
        let iu = IntegralImage::from_magnitudes(3, 4, &[0.0; 12]).unwrap();
        assert!(iu.sums.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn empty_rectangle_is_zero() {
        let iu = IntegralImage::from_magnitudes(2, 2, &[1.0; 4]).unwrap();
        assert_eq!(iu.rect_sum(1, 1, 0, 1), 0.0);
    }
}
