use std::f64::consts::PI;

use crate::error::{Error, Result};

const SIGMA_X_CANDIDATES: [f64; 7] = [2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0];
const SIGMA_Y_CANDIDATES: [f64; 9] = [2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0, 24.0, 32.0];
const WAVELENGTHS_PX: [f64; 7] = [4.0, 6.0, 8.0, 12.0, 16.0, 24.0, 32.0];

/// Search spaces for the two Gabor scales and the carrier frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrid {
    sigma_x: Vec<f64>,
    sigma_y: Vec<f64>,
    lambda: Vec<f64>,
}

fn check_axis(name: &str, v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::Param(format!("{name} grid is empty")));
    }
    if v.iter().any(|x| !x.is_finite() || *x <= 0.0) {
        return Err(Error::Param(format!("{name} grid values must be finite and positive")));
    }
    if v.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Param(format!("{name} grid must be strictly ascending")));
    }
    Ok(())
}

impl ParamGrid {
    pub fn new(sigma_x: Vec<f64>, sigma_y: Vec<f64>, lambda: Vec<f64>) -> Result<Self> {
        check_axis("sigma_x", &sigma_x)?;
        check_axis("sigma_y", &sigma_y)?;
        check_axis("lambda", &lambda)?;
        Ok(Self { sigma_x, sigma_y, lambda })
    }

    /// Builds the frequency axis from carrier wavelengths in pixels (`lambda = 2 pi / L`).
    pub fn from_wavelengths(sigma_x: Vec<f64>, sigma_y: Vec<f64>, wavelengths_px: &[f64]) -> Result<Self> {
        if wavelengths_px.iter().any(|l| !l.is_finite() || *l <= 0.0) {
            return Err(Error::Param("wavelengths must be finite and positive".into()));
        }
        let mut lambda: Vec<f64> = wavelengths_px.iter().map(|l| 2.0 * PI / l).collect();
        lambda.sort_by(f64::total_cmp);
        lambda.dedup();
        Self::new(sigma_x, sigma_y, lambda)
    }

    /// The default grid for a `width x height` image.
    ///
    /// Scales are capped at a quarter of the width and a third of the height.
    /// Candidates whose kernel would exceed three image extents along its own
    /// axis (rows for `sigma_x`, columns for `sigma_y`) are dropped too. If the
    /// caps remove every candidate, the smallest one is kept.
    pub fn default_for(width: usize, height: usize) -> Self {
        let fits = |s: f64, extent: usize| (2 * (3.0 * s).ceil() as usize) < 3 * extent;
        let cap = |cands: &[f64], limit: f64, extent: usize| {
            let v: Vec<f64> = cands.iter().copied().filter(|s| *s <= limit && fits(*s, extent)).collect();
            if v.is_empty() {
                vec![cands[0]]
            } else {
                v
            }
        };
        Self::from_wavelengths(
            cap(&SIGMA_X_CANDIDATES, width as f64 / 4.0, height),
            cap(&SIGMA_Y_CANDIDATES, height as f64 / 3.0, width),
            &WAVELENGTHS_PX,
        )
        .expect("built-in grid is valid")
    }

    pub fn sigma_x(&self) -> &[f64] {
        &self.sigma_x
    }

    pub fn sigma_y(&self) -> &[f64] {
        &self.sigma_y
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    /// Number of points in the full product grid.
    pub fn size(&self) -> usize {
        self.sigma_x.len() * self.sigma_y.len() * self.lambda.len()
    }

    /// Largest kernel half extents (rows, cols) any grid point produces.
    pub fn max_half_extents(&self) -> (usize, usize) {
        let sx = *self.sigma_x.last().unwrap();
        let sy = *self.sigma_y.last().unwrap();
        ((3.0 * sx).ceil() as usize, (3.0 * sy).ceil() as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_for_desk_images() {
        let g = ParamGrid::default_for(128, 64);
        assert_eq!(g.sigma_x(), &[2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0]);
        assert_eq!(g.sigma_y(), &[2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0]);
        assert_eq!(g.lambda().len(), 7);
        assert!((g.lambda()[0] - 2.0 * PI / 32.0).abs() < 1e-15);
        assert!((g.lambda()[6] - PI / 2.0).abs() < 1e-15);
        assert_eq!(g.max_half_extents(), (48, 48));
    }

    #[test]
    fn tiny_images_keep_one_candidate() {
        let g = ParamGrid::default_for(4, 4);
        assert_eq!(g.sigma_x(), &[2.0]);
        assert_eq!(g.sigma_y(), &[2.0]);
    }

    #[test]
    fn kernels_fit_short_wide_images() {
        let g = ParamGrid::default_for(64, 32);
        assert_eq!(g.sigma_x(), &[2.0, 3.0, 4.0, 6.0, 8.0, 12.0]);
        for (w, h) in [(64, 32), (200, 20), (20, 200), (5, 5)] {
            let g = ParamGrid::default_for(w, h);
            let (hr, hc) = g.max_half_extents();
            assert!(2 * hr < 3 * h && 2 * hc < 3 * w, "{w}x{h}");
        }
    }

    #[test]
    fn rejects_unsorted_or_empty_axes() {
        assert!(ParamGrid::new(vec![], vec![1.0], vec![1.0]).is_err());
        assert!(ParamGrid::new(vec![2.0, 1.0], vec![1.0], vec![1.0]).is_err());
        assert!(ParamGrid::new(vec![1.0], vec![1.0], vec![0.0]).is_err());
    }
}
