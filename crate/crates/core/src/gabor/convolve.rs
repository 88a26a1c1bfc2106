//! Same-size convolution with reflect padding, by direct summation or FFT.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::kernel::{make_kernel, ComplexKernel, GaborParams};
use crate::dataio::GrayImage;
use crate::error::{Error, Result};

/// Which convolution algorithm to run. Both give the same field up to rounding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    Direct,
    #[default]
    Fft,
}

/// Options shared by every kernel evaluation in the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GaborOptions {
    pub dc_correct: bool,
    pub backend: Backend,
}

impl Default for GaborOptions {
    fn default() -> Self {
        Self { dc_correct: true, backend: Backend::Fft }
    }
}

/// Complex filter response with the dimensions of the source image.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseField {
    width: usize,
    height: usize,
    values: Vec<Complex64>,
}

impl ResponseField {
    pub fn new(width: usize, height: usize, values: Vec<Complex64>) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width * height {
            return Err(Error::Size(format!(
                "response field {width}x{height} with {} values",
                values.len()
            )));
        }
        Ok(Self { width, height, values })
    }

    /// A purely real field, handy for feeding known magnitudes to the ROI code.
    pub fn from_magnitudes(width: usize, height: usize, mags: &[f64]) -> Result<Self> {
        Self::new(width, height, mags.iter().map(|&m| Complex64::new(m, 0.0)).collect())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.values[row * self.width + col]
    }

    pub fn magnitude(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    /// `sqrt(sum |v|^2)` over the whole field.
    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Maps any integer index onto `0..n` by mirroring about the edge pixels
/// (`d c b | a b c d | c b a`), repeating as often as needed.
#[inline]
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

fn check_extent(img: &GrayImage, k: &ComplexKernel) -> Result<()> {
    if k.rows() > 3 * img.height() || k.cols() > 3 * img.width() {
        return Err(Error::Size(format!(
            "kernel {}x{} exceeds three times the {}x{} image",
            k.cols(),
            k.rows(),
            img.width(),
            img.height()
        )));
    }
    Ok(())
}

/// Convolves an image with a kernel, returning a field of the same size.
pub fn convolve(img: &GrayImage, k: &ComplexKernel, backend: Backend) -> Result<ResponseField> {
    match backend {
        Backend::Direct => convolve_direct(img, k),
        Backend::Fft => SpectralImage::new(img, k.half_rows(), k.half_cols())?.convolve(k),
    }
}

fn convolve_direct(img: &GrayImage, k: &ComplexKernel) -> Result<ResponseField> {
    check_extent(img, k)?;
    let (w, h) = (img.width(), img.height());
    let (hr, hc) = (k.half_rows() as isize, k.half_cols() as isize);
    let col_idx: Vec<Vec<usize>> = (0..w as isize)
        .map(|c| (-hc..=hc).map(|dy| reflect(c - dy, w)).collect())
        .collect();
    let mut out = Vec::with_capacity(w * h);
    for r in 0..h as isize {
        for cols in &col_idx {
            let mut acc = Complex64::new(0.0, 0.0);
            for dx in -hr..=hr {
                let src = img.row(reflect(r - dx, h));
                let krow = (dx + hr) as usize * k.cols();
                for (j, &sc) in cols.iter().enumerate() {
                    acc += k.values()[krow + j] * src[sc];
                }
            }
            out.push(acc);
        }
    }
    ResponseField::new(w, h, out)
}

/// Any length made only of the factors 2, 3, 5 and 7.
fn next_fast_len(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5, 7] {
            while r.is_multiple_of(p) {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

struct Plan2 {
    rows: usize,
    cols: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Plan2 {
    fn new(rows: usize, cols: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            rows,
            cols,
            row_fwd: planner.plan_fft_forward(cols),
            row_inv: planner.plan_fft_inverse(cols),
            col_fwd: planner.plan_fft_forward(rows),
            col_inv: planner.plan_fft_inverse(rows),
        }
    }

    fn columns(&self, buf: &mut [Complex64], scratch: &mut Vec<Complex64>, inverse: bool) {
        let (r, c) = (self.rows, self.cols);
        scratch.clear();
        scratch.resize(r * c, Complex64::default());
        for i in 0..r {
            for j in 0..c {
                scratch[j * r + i] = buf[i * c + j];
            }
        }
        if inverse {
            self.col_inv.process(scratch);
        } else {
            self.col_fwd.process(scratch);
        }
        for j in 0..c {
            for i in 0..r {
                buf[i * c + j] = scratch[j * r + i];
            }
        }
    }
}

/// A reflect-padded image held in the frequency domain, ready to be
/// convolved with any kernel no larger than the padding it was built for.
///
/// Grid searches build one of these per image and reuse it for every kernel.
pub struct SpectralImage {
    width: usize,
    height: usize,
    pad_rows: usize,
    pad_cols: usize,
    plan: Plan2,
    spectrum: Vec<Complex64>,
}

impl SpectralImage {
    /// Prepares `img` for kernels with half extents up to `(max_half_rows, max_half_cols)`.
    pub fn new(img: &GrayImage, max_half_rows: usize, max_half_cols: usize) -> Result<Self> {
        let (w, h) = (img.width(), img.height());
        if 2 * max_half_rows + 1 > 3 * h || 2 * max_half_cols + 1 > 3 * w {
            return Err(Error::Size(format!(
                "kernel half extents ({max_half_cols}, {max_half_rows}) too large for {w}x{h} image"
            )));
        }
        let rows = next_fast_len(h + 2 * max_half_rows);
        let cols = next_fast_len(w + 2 * max_half_cols);
        let plan = Plan2::new(rows, cols);
        let mut spectrum = vec![Complex64::default(); rows * cols];
        for i in 0..h + 2 * max_half_rows {
            let src = img.row(reflect(i as isize - max_half_rows as isize, h));
            for j in 0..w + 2 * max_half_cols {
                spectrum[i * cols + j] = Complex64::new(src[reflect(j as isize - max_half_cols as isize, w)], 0.0);
            }
        }
        plan.row_fwd.process(&mut spectrum);
        plan.columns(&mut spectrum, &mut Vec::new(), false);
        Ok(Self { width: w, height: h, pad_rows: max_half_rows, pad_cols: max_half_cols, plan, spectrum })
    }

    /// Same-size convolution with `k`.
    pub fn convolve(&self, k: &ComplexKernel) -> Result<ResponseField> {
        if k.half_rows() > self.pad_rows || k.half_cols() > self.pad_cols {
            return Err(Error::Size(format!(
                "kernel half extents ({}, {}) exceed prepared padding ({}, {})",
                k.half_cols(),
                k.half_rows(),
                self.pad_cols,
                self.pad_rows
            )));
        }
        let (rows, cols) = (self.plan.rows, self.plan.cols);
        let mut buf = vec![Complex64::default(); rows * cols];
        let (hr, hc) = (k.half_rows() as isize, k.half_cols() as isize);
        for dx in -hr..=hr {
            let r = dx.rem_euclid(rows as isize) as usize;
            let line = &mut buf[r * cols..(r + 1) * cols];
            for dy in -hc..=hc {
                line[dy.rem_euclid(cols as isize) as usize] = k.at(dx, dy);
            }
            // Only the kernel's own rows are non-zero; transform just those.
            self.plan.row_fwd.process(line);
        }
        let mut scratch = Vec::new();
        self.plan.columns(&mut buf, &mut scratch, false);
        for (b, s) in buf.iter_mut().zip(&self.spectrum) {
            *b *= s;
        }
        self.plan.columns(&mut buf, &mut scratch, true);
        self.plan.row_inv.process(&mut buf);
        let scale = 1.0 / (rows * cols) as f64;
        let mut out = Vec::with_capacity(self.width * self.height);
        for r in 0..self.height {
            let base = (r + self.pad_rows) * cols + self.pad_cols;
            out.extend(buf[base..base + self.width].iter().map(|v| v * scale));
        }
        ResponseField::new(self.width, self.height, out)
    }
}

/// `||G * u||_2` for the kernel described by `p`.
pub fn response_norm(img: &GrayImage, p: &GaborParams, opts: GaborOptions) -> Result<f64> {
    let k = make_kernel(p, opts.dc_correct)?;
    Ok(convolve(img, &k, opts.backend)?.l2_norm())
}
