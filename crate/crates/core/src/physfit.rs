//! Skewed inverted Mexican-hat fits to column projections.
//!
//! Model: `m(x) = offset - amp * (1 - xi^2) * exp(-xi^2 / 2) * (1 + skew * xi)`
//! with `xi = (x - center) / width`.

use nalgebra::{Matrix5, Vector5};
use serde::{Deserialize, Serialize};

use crate::dataio::GrayImage;
use crate::error::{Error, Result};
use crate::gabor::reflect;

/// Background handling for [`project`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Background {
    /// Subtract a running median of the profile (window `width / 4`, odd).
    #[default]
    MedianColumns,
    None,
}

/// Column-wise projection of an image.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile1D {
    values: Vec<f64>,
}

impl Profile1D {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Param(format!("profile value {i} is not finite")));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn reversed(&self) -> Self {
        Self { values: self.values.iter().rev().copied().collect() }
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Running median with reflected borders; `window` is forced odd.
pub fn median_filter(values: &[f64], window: usize) -> Vec<f64> {
    let n = values.len();
    let half = (window.max(1) | 1) / 2;
    let mut buf = Vec::with_capacity(2 * half + 1);
    (0..n)
        .map(|i| {
            buf.clear();
            for d in -(half as isize)..=half as isize {
                buf.push(values[reflect(i as isize + d, n)]);
            }
            median(&mut buf)
        })
        .collect()
}

/// Mean over rows of each column, optionally minus its median envelope.
pub fn project(img: &GrayImage, background: Background) -> Profile1D {
    let (w, h) = (img.width(), img.height());
    let mut values = vec![0.0; w];
    for r in 0..h {
        for (acc, v) in values.iter_mut().zip(img.row(r)) {
            *acc += v;
        }
    }
    for v in &mut values {
        *v /= h as f64;
    }
    if background == Background::MedianColumns {
        let env = median_filter(&values, w / 4);
        for (v, e) in values.iter_mut().zip(env) {
            *v -= e;
        }
    }
    Profile1D { values }
}

/// Parameters of the fitted profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PfParams {
    pub amp: f64,
    pub center: f64,
    pub width: f64,
    pub skew: f64,
    pub offset: f64,
}

impl PfParams {
    pub const NAN: PfParams =
        PfParams { amp: f64::NAN, center: f64::NAN, width: f64::NAN, skew: f64::NAN, offset: f64::NAN };

    /// `[amp, center, width, skew, offset]`, the feature-table column order.
    pub fn as_array(&self) -> [f64; 5] {
        [self.amp, self.center, self.width, self.skew, self.offset]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self { amp: a[0], center: a[1], width: a[2], skew: a[3], offset: a[4] }
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }

    /// Model value at column `x`.
    pub fn eval(&self, x: f64) -> f64 {
        let xi = (x - self.center) / self.width;
        let e = (-0.5 * xi * xi).exp();
        self.offset - self.amp * (1.0 - xi * xi) * e * (1.0 + self.skew * xi)
    }

    /// Model sampled at `0..len`.
    pub fn sample(&self, len: usize) -> Vec<f64> {
        (0..len).map(|x| self.eval(x as f64)).collect()
    }

    // Partial derivatives in [amp, center, width, skew, offset] order.
    fn gradient(&self, x: f64) -> [f64; 5] {
        let w = self.width;
        let xi = (x - self.center) / w;
        let e = (-0.5 * xi * xi).exp();
        let hat = (1.0 - xi * xi) * e;
        let dhat = (xi * xi * xi - 3.0 * xi) * e;
        let g = hat * (1.0 + self.skew * xi);
        let dg = dhat * (1.0 + self.skew * xi) + hat * self.skew;
        [-g, self.amp * dg / w, self.amp * dg * xi / w, -self.amp * hat * xi, 1.0]
    }
}

/// Why a fit was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitFailure {
    WidthCollapse,
    Diverged,
    BelowNoiseFloor,
}

impl std::fmt::Display for FitFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FitFailure::WidthCollapse => "width collapsed below 0.5 px",
            FitFailure::Diverged => "fit diverged",
            FitFailure::BelowNoiseFloor => "amplitude below noise floor",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: PfParams,
    pub residual_norm: f64,
    pub iterations: usize,
    /// Residual norm after each accepted step, starting from the initial guess.
    pub history: Vec<f64>,
    pub failure: Option<FitFailure>,
}

impl FitResult {
    pub fn is_ok(&self) -> bool {
        self.failure.is_none()
    }

    /// Parameters, or all-NaN when the fit was rejected.
    pub fn features(&self) -> PfParams {
        if self.is_ok() {
            self.params
        } else {
            PfParams::NAN
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub min_width: f64,
    /// Multiple of the profile standard deviation below which the fitted dip is noise.
    pub noise_floor: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { max_iterations: 200, tolerance: 1e-10, min_width: 0.5, noise_floor: 3.0 }
    }
}

/// Derivative-free starting point read off the profile shape.
pub fn auto_init(p: &Profile1D) -> PfParams {
    let v = p.values();
    let n = v.len();
    let mut c = 0;
    for i in 1..n {
        if v[i] < v[c] {
            c = i;
        }
    }
    let offset = median(&mut v.to_vec());
    let mut left = c;
    while left > 0 && v[left - 1] >= v[left] {
        left -= 1;
    }
    let mut right = c;
    while right + 1 < n && v[right + 1] >= v[right] {
        right += 1;
    }
    let width = if left > 0 && right + 1 < n && right > left {
        0.5 * (right - left) as f64
    } else {
        n as f64 / 8.0
    };
    PfParams { amp: offset - v[c], center: c as f64, width, skew: 0.0, offset }
}

fn cost(p: &PfParams, v: &[f64]) -> f64 {
    v.iter().enumerate().map(|(x, y)| (p.eval(x as f64) - y).powi(2)).sum()
}

/// Levenberg-Marquardt least squares fit of the model to `p`.
pub fn fit_mexican_hat(p: &Profile1D, init: Option<PfParams>, cfg: &FitConfig) -> Result<FitResult> {
    let v = p.values();
    if v.len() < 8 {
        return Err(Error::Param(format!("profile length {} < 8", v.len())));
    }
    let mut params = init.unwrap_or_else(|| auto_init(p));
    if !params.is_finite() || params.width <= 0.0 {
        return Err(Error::Param("initial fit parameters must be finite with width > 0".into()));
    }
    let mut c = cost(&params, v);
    let mut history = vec![c.sqrt()];
    let mut mu = 1e-3;
    let mut iterations = 0;
    let mut failure = None;

    while iterations < cfg.max_iterations {
        iterations += 1;
        let mut jtj = Matrix5::<f64>::zeros();
        let mut jtr = Vector5::<f64>::zeros();
        for (x, y) in v.iter().enumerate() {
            let g = Vector5::from(params.gradient(x as f64));
            let r = params.eval(x as f64) - y;
            jtj += g * g.transpose();
            jtr += g * r;
        }
        let mut accepted = false;
        while mu < 1e16 {
            let mut a = jtj;
            for i in 0..5 {
                a[(i, i)] += mu * jtj[(i, i)].max(1e-12);
            }
            let Some(step) = a.lu().solve(&(-jtr)) else {
                mu *= 10.0;
                continue;
            };
            let mut trial = params;
            trial.amp += step[0];
            trial.center += step[1];
            trial.width += step[2];
            trial.skew += step[3];
            trial.offset += step[4];
            let tc = cost(&trial, v);
            if tc.is_finite() && tc <= c && trial.width > 0.0 {
                let rel = (c - tc) / c.max(f64::MIN_POSITIVE);
                params = trial;
                c = tc;
                history.push(c.sqrt());
                mu = (mu / 3.0).max(1e-15);
                accepted = true;
                if rel < cfg.tolerance {
                    iterations = cfg.max_iterations;
                }
                break;
            }
            mu *= 3.0;
        }
        if !accepted || c == 0.0 {
            break;
        }
    }

    if !params.is_finite() || !c.is_finite() {
        failure = Some(FitFailure::Diverged);
    } else if params.width.abs() < cfg.min_width {
        failure = Some(FitFailure::WidthCollapse);
    } else {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let std = (v.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n).sqrt();
        // Depth the sampled model actually reaches; a sub-pixel hat can carry a
        // large nominal amp while touching a single noise spike.
        let depth = (0..v.len()).map(|x| params.offset - params.eval(x as f64)).fold(0.0, f64::max);
        if depth < cfg.noise_floor * std {
            failure = Some(FitFailure::BelowNoiseFloor);
        }
    }
    Ok(FitResult { params, residual_norm: c.sqrt(), iterations, history, failure })
}

/// Projects and fits one image with default settings.
pub fn fit_image(img: &GrayImage, background: Background) -> Result<FitResult> {
    fit_mexican_hat(&project(img, background), None, &FitConfig::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn truth() -> PfParams {
        PfParams { amp: 0.6, center: 60.3, width: 4.2, skew: 0.25, offset: 0.5 }
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-12)
    }

    #[test]
    fn recovers_noiseless_parameters() {
        let t = truth();
        let p = Profile1D::new(t.sample(128)).unwrap();
        let fit = fit_mexican_hat(&p, None, &FitConfig::default()).unwrap();
        assert!(fit.is_ok(), "{:?}", fit.failure);
        for (a, b) in fit.params.as_array().iter().zip(t.as_array()) {
            assert!(rel(*a, b) < 1e-4, "{:?}", fit.params);
        }
    }

    #[test]
    fn symmetric_profile_gives_zero_skew() {
        let t = PfParams { skew: 0.0, ..truth() };
        let fit = fit_mexican_hat(&Profile1D::new(t.sample(128)).unwrap(), None, &FitConfig::default()).unwrap();
        assert!(fit.params.skew.abs() < 1e-4);
    }

    #[test]
    fn residual_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v: Vec<f64> = truth().sample(96).iter().map(|y| y + rng.random_range(-0.05..0.05)).collect();
        let fit = fit_mexican_hat(&Profile1D::new(v).unwrap(), None, &FitConfig::default()).unwrap();
        assert!(fit.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn translation_and_mirror() {
        let t = truth();
        let base = fit_mexican_hat(&Profile1D::new(t.sample(128)).unwrap(), None, &FitConfig::default()).unwrap();
        let shifted = PfParams { center: t.center + 7.0, ..t };
        let s = fit_mexican_hat(&Profile1D::new(shifted.sample(128)).unwrap(), None, &FitConfig::default()).unwrap();
        assert!((s.params.center - base.params.center - 7.0).abs() < 1e-3);
        let m = fit_mexican_hat(&Profile1D::new(t.sample(128)).unwrap().reversed(), None, &FitConfig::default())
            .unwrap();
        assert!((m.params.skew + base.params.skew).abs() < 1e-3);
    }

    #[test]
    fn pure_noise_is_flagged() {
        let mut flagged = 0;
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v: Vec<f64> = (0..128).map(|_| 0.5 + rng.random_range(-0.1..0.1)).collect();
            let fit = fit_mexican_hat(&Profile1D::new(v).unwrap(), None, &FitConfig::default()).unwrap();
            flagged += usize::from(!fit.is_ok());
        }
        assert!(flagged >= 19, "{flagged}");
    }

    #[test]
    fn short_profile_is_rejected() {
        assert!(fit_mexican_hat(&Profile1D::new(vec![0.0; 7]).unwrap(), None, &FitConfig::default()).is_err());
    }

    #[test]
    fn constant_image_projects_to_zero() {
        let img = GrayImage::from_fn(40, 10, |_, _| 0.7).unwrap();
        assert!(project(&img, Background::MedianColumns).values().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn dark_column_is_minimum() {
        let img = GrayImage::from_fn(20, 6, |_, c| if c == 13 { 0.1 } else { 0.9 }).unwrap();
        let p = project(&img, Background::None);
        let argmin = (0..20).min_by(|a, b| p.values()[*a].total_cmp(&p.values()[*b])).unwrap();
        assert_eq!(argmin, 13);
    }

    #[test]
    fn median_filter_window_is_odd() {
        assert_eq!(median_filter(&[1.0, 5.0, 2.0, 8.0], 2), vec![5.0, 2.0, 5.0, 2.0]);
    }
}
