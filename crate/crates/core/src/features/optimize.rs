//! Exhaustive and two-step searches for the kernel maximizing `||G * u||_2`.

use std::sync::atomic::{AtomicUsize, Ordering};

use super::ParamGrid;
use crate::dataio::GrayImage;
use crate::error::Result;
use crate::gabor::{convolve, make_kernel, Backend, GaborOptions, GaborParams, ResponseField, SpectralImage};
use crate::par::{self, Execution};

/// How the parameter space is searched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SearchMode {
    /// Every `(sigma_x, sigma_y, lambda)` triple.
    FullGrid,
    /// `(sigma_y, lambda)` at the largest `sigma_x`, then `sigma_x` alone.
    #[default]
    TwoStep,
}

/// Result of a parameter search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Optimum {
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub lambda: f64,
    /// Response norm at the optimum.
    pub norm: f64,
    /// Convolutions performed by the search.
    pub convolutions: usize,
}

impl Optimum {
    pub fn params(&self) -> GaborParams {
        GaborParams { sigma_x: self.sigma_x, sigma_y: self.sigma_y, theta: 0.0, lambda: self.lambda }
    }
}

/// Evaluates `theta = 0` kernels against one image, counting convolutions.
pub struct ResponseEvaluator<'a> {
    img: &'a GrayImage,
    spectral: Option<SpectralImage>,
    opts: GaborOptions,
    count: AtomicUsize,
}

impl<'a> ResponseEvaluator<'a> {
    /// Prepares `img` for every kernel in `grid`.
    pub fn new(img: &'a GrayImage, grid: &ParamGrid, opts: GaborOptions) -> Result<Self> {
        let spectral = match opts.backend {
            Backend::Fft => {
                let (hr, hc) = grid.max_half_extents();
                Some(SpectralImage::new(img, hr, hc)?)
            }
            Backend::Direct => None,
        };
        Ok(Self { img, spectral, opts, count: AtomicUsize::new(0) })
    }

    pub fn field(&self, sigma_x: f64, sigma_y: f64, lambda: f64) -> Result<ResponseField> {
        let k = make_kernel(&GaborParams::horizontal(sigma_x, sigma_y, lambda)?, self.opts.dc_correct)?;
        match &self.spectral {
            Some(s) => s.convolve(&k),
            None => convolve(self.img, &k, Backend::Direct),
        }
    }

    pub fn norm(&self, sigma_x: f64, sigma_y: f64, lambda: f64) -> Result<f64> {
        let f = self.field(sigma_x, sigma_y, lambda)?;
        self.count.fetch_add(1, Ordering::Relaxed);
        Ok(f.l2_norm())
    }

    pub fn convolutions(&self) -> usize {
        self.count.load(Ordering::Relaxed)
    }
}

/// First index of the maximum; later equal values never win.
fn first_argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn search(ev: &ResponseEvaluator<'_>, grid: &ParamGrid, mode: SearchMode, exec: Execution) -> Result<Optimum> {
    let (sx, sy, lam) = (grid.sigma_x(), grid.sigma_y(), grid.lambda());
    let start = ev.convolutions();
    let (best_sx, best_sy, best_lam, norm) = match mode {
        SearchMode::FullGrid => {
            let (ny, nl) = (sy.len(), lam.len());
            let norms = par::try_map_range(exec, grid.size(), |i| {
                ev.norm(sx[i / (ny * nl)], sy[(i / nl) % ny], lam[i % nl])
            })?;
            let i = first_argmax(&norms);
            (sx[i / (ny * nl)], sy[(i / nl) % ny], lam[i % nl], norms[i])
        }
        SearchMode::TwoStep => {
            let wide = *sx.last().unwrap();
            let nl = lam.len();
            let step_a = par::try_map_range(exec, sy.len() * nl, |i| ev.norm(wide, sy[i / nl], lam[i % nl]))?;
            let i = first_argmax(&step_a);
            let (best_sy, best_lam) = (sy[i / nl], lam[i % nl]);
            let step_b = par::try_map_range(exec, sx.len(), |j| ev.norm(sx[j], best_sy, best_lam))?;
            let j = first_argmax(&step_b);
            (sx[j], best_sy, best_lam, step_b[j])
        }
    };
    Ok(Optimum {
        sigma_x: best_sx,
        sigma_y: best_sy,
        lambda: best_lam,
        norm,
        convolutions: ev.convolutions() - start,
    })
}

/// Runs the requested search on one image.
pub fn optimize(img: &GrayImage, grid: &ParamGrid, mode: SearchMode, opts: GaborOptions, exec: Execution) -> Result<Optimum> {
    let ev = ResponseEvaluator::new(img, grid, opts)?;
    search(&ev, grid, mode, exec)
}

/// Exhaustive argmax of the response norm over the product grid, `theta = 0`.
/// Ties go to the earliest point in `(sigma_x, sigma_y, lambda)` order.
pub fn grid_optimize(img: &GrayImage, grid: &ParamGrid, opts: GaborOptions) -> Result<Optimum> {
    optimize(img, grid, SearchMode::FullGrid, opts, Execution::Sequential)
}

/// The two-step heuristic: `|sigma_y| * |lambda| + |sigma_x|` convolutions.
pub fn two_step_optimize(img: &GrayImage, grid: &ParamGrid, opts: GaborOptions) -> Result<Optimum> {
    optimize(img, grid, SearchMode::TwoStep, opts, Execution::Sequential)
}
