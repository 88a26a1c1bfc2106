//! Labeled synthetic soliton-like images.
//!
//! Every image is a Thomas-Fermi-like cloud (an inverted parabola clipped at
//! zero) multiplied by a vertical dip profile
//! `1 - depth * env(row) * hat(xi) * (1 + skew(row) * xi)`, where `hat` is the
//! Ricker shape `(1 - xi^2) exp(-xi^2 / 2)` whose negative lobes are the
//! shoulders. The classes differ only in `env` and `skew`:
//!
//! * longitudinal: `env = 1`, `skew = 0`, so the image is mirror-symmetric
//!   about the dip column and about the middle row;
//! * partial: `env` is a smooth window over the upper half;
//! * vortex: `env` is a Gaussian centered on the middle row and `skew` changes sign there,
//!   negative above and positive below, so the bottom-right shoulder is
//!   brighter than the bottom-left one.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataio::{write_labels, write_pgm16, GrayImage, LabelEntry, LabeledDataset, LABELS_FILE};
use crate::error::{Error, Result};
use crate::par::{self, Execution};

pub const CLASSES: [&str; 3] = ["longitudinal", "partial", "vortex"];
pub const GROUND_TRUTH_FILE: &str = "ground_truth.csv";

/// Sampling ranges `[lo, hi]` for the per-image shape parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeRanges {
    /// Peak cloud intensity.
    pub peak: (f64, f64),
    /// Cloud semi-axes as fractions of width and height.
    pub radius_x: (f64, f64),
    pub radius_y: (f64, f64),
    /// Dip column as a fraction of the width.
    pub dip_column: (f64, f64),
    /// Ricker width of the dip in pixels.
    pub dip_width: (f64, f64),
    pub depth: (f64, f64),
    /// Fraction of the dip depth lost between the middle row and the top and
    /// bottom rows (quadratic in the row offset).
    pub dip_falloff: (f64, f64),
    /// Last dipped row of a partial excitation, as a fraction of the height.
    pub partial_end: (f64, f64),
    /// Standard deviation of the Gaussian vortex envelope over rows, as a
    /// fraction of the height.
    pub vortex_extent: (f64, f64),
    /// Magnitude of the vortex skew away from the core row.
    pub vortex_skew: (f64, f64),
    /// Rows over which envelopes and the skew sign change.
    pub taper: f64,
}

impl Default for ShapeRanges {
    fn default() -> Self {
        Self {
            peak: (0.45, 0.55),
            radius_x: (0.7, 0.9),
            radius_y: (2.5, 3.5),
            dip_column: (0.4, 0.6),
            dip_width: (4.0, 7.0),
            depth: (0.5, 0.8),
            dip_falloff: (0.3, 0.5),
            partial_end: (0.25, 0.4),
            vortex_extent: (0.2, 0.3),
            vortex_skew: (0.3, 0.5),
            taper: 2.0,
        }
    }
}

/// What to generate.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub width: usize,
    pub height: usize,
    /// Images per class, in [`CLASSES`] order.
    pub counts: [usize; 3],
    pub noise_sigma: f64,
    pub seed: u64,
    pub shape: ShapeRanges,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self { width: 128, height: 64, counts: [400, 150, 50], noise_sigma: 0.02, seed: 7, shape: ShapeRanges::default() }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Param(format!("image size {}x{} must be nonzero", self.width, self.height)));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Param(format!("noise_sigma {} must be finite and >= 0", self.noise_sigma)));
        }
        Ok(())
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Generator ground truth for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub id: String,
    pub label: String,
    pub dip_column: f64,
    /// First and last rows where the dip envelope is at least one half.
    pub row_start: usize,
    pub row_end: usize,
    /// Sign of the skew in the lower half: +1 for vortices, 0 otherwise.
    pub asymmetry: i8,
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub dataset: LabeledDataset,
    pub truth: Vec<GroundTruth>,
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn smooth_step(t: f64) -> f64 {
    0.5 * (1.0 + t.tanh())
}

/// A function of the row coordinate.
type RowFn = Box<dyn Fn(f64) -> f64>;

fn render(spec: &SynthSpec, class: usize, index: usize) -> (GrayImage, GroundTruth) {
    let (w, h) = (spec.width, spec.height);
    let s = &spec.shape;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64);

    let peak = uniform(&mut rng, s.peak);
    let rx = uniform(&mut rng, s.radius_x) * w as f64;
    let ry = uniform(&mut rng, s.radius_y) * h as f64;
    let xd = uniform(&mut rng, s.dip_column) * (w as f64 - 1.0);
    let wd = uniform(&mut rng, s.dip_width);
    let depth = uniform(&mut rng, s.depth);
    let falloff = uniform(&mut rng, s.dip_falloff);
    let cy = (h as f64 - 1.0) / 2.0;
    let tau = s.taper.max(1e-9);

    let (env, skew): (RowFn, RowFn) = match class {
        0 => (Box::new(|_| 1.0), Box::new(|_| 0.0)),
        1 => {
            let end = uniform(&mut rng, s.partial_end) * h as f64;
            (Box::new(move |r| smooth_step((end - r) / tau)), Box::new(|_| 0.0))
        }
        _ => {
            let ext = uniform(&mut rng, s.vortex_extent) * h as f64;
            let k = uniform(&mut rng, s.vortex_skew);
            (
                Box::new(move |r: f64| (-0.5 * ((r - cy) / ext).powi(2)).exp()),
                Box::new(move |r: f64| k * ((r - cy) / tau).tanh()),
            )
        }
    };

    // Noise is drawn after every shape parameter so shapes do not depend on it.
    let noise = Normal::new(0.0, spec.noise_sigma.max(0.0)).expect("finite sigma");
    let mut data = Vec::with_capacity(w * h);
    for r in 0..h {
        let u = if cy > 0.0 { (r as f64 - cy) / cy } else { 0.0 };
        let (e, k) = (env(r as f64) * (1.0 - falloff * u * u), skew(r as f64));
        let vy = (r as f64 - cy) / ry;
        for c in 0..w {
            let vx = (c as f64 - xd) / rx;
            let cloud = peak * (1.0 - vx * vx - vy * vy).max(0.0);
            let xi = (c as f64 - xd) / wd;
            let hat = (1.0 - xi * xi) * (-0.5 * xi * xi).exp();
            let mut v = cloud * (1.0 - depth * e * hat * (1.0 + k * xi));
            if spec.noise_sigma > 0.0 {
                v += noise.sample(&mut rng);
            }
            data.push(v.clamp(0.0, 1.0));
        }
    }
    let img = GrayImage::new(w, h, data).expect("dimensions checked");

    let rows: Vec<usize> = (0..h).filter(|&r| env(r as f64) >= 0.5).collect();
    let truth = GroundTruth {
        id: image_name(index, class),
        label: CLASSES[class].to_string(),
        dip_column: xd,
        row_start: rows.first().copied().unwrap_or(0),
        row_end: rows.last().copied().unwrap_or(0),
        asymmetry: i8::from(class == 2),
    };
    (img, truth)
}

/// File stem for the `index`-th image; lexical order equals generation order.
pub fn image_name(index: usize, class: usize) -> String {
    format!("{index:05}_{}", CLASSES[class])
}

/// Renders every image of `spec`, classes in [`CLASSES`] order.
pub fn generate(spec: &SynthSpec, exec: Execution) -> Result<SynthOutput> {
    spec.validate()?;
    let classes: Vec<usize> = spec.counts.iter().enumerate().flat_map(|(c, &n)| std::iter::repeat_n(c, n)).collect();
    let rendered = par::map_range(exec, classes.len(), |i| render(spec, classes[i], i));
    let mut images = Vec::with_capacity(rendered.len());
    let mut truth = Vec::with_capacity(rendered.len());
    for (img, t) in rendered {
        images.push(img);
        truth.push(t);
    }
    let labels = truth.iter().map(|t| t.label.clone()).collect();
    let names = truth.iter().map(|t| t.id.clone()).collect();
    let present: Vec<String> =
        CLASSES.iter().zip(spec.counts).filter(|(_, n)| *n > 0).map(|(c, _)| c.to_string()).collect();
    let dataset = LabeledDataset::new(images, labels, names, present)?;
    Ok(SynthOutput { dataset, truth })
}

/// Writes `NNNNN_class.pgm` images, `labels.csv`, and `ground_truth.csv`.
pub fn write_output(out: &SynthOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let ds = &out.dataset;
    let mut entries = Vec::with_capacity(ds.len());
    for ((img, name), label) in ds.images().iter().zip(ds.names()).zip(ds.labels()) {
        let file = format!("{name}.pgm");
        write_pgm16(img, &dir.join(&file))?;
        entries.push(LabelEntry { filename: file, label: label.clone() });
    }
    write_labels(&entries, &dir.join(LABELS_FILE))?;
    let path = dir.join(GROUND_TRUTH_FILE);
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    let csv_err = |e: csv::Error| Error::Schema(format!("{}: {e}", path.display()));
    w.write_record(["filename", "label", "dip_column", "row_start", "row_end", "asymmetry"]).map_err(csv_err)?;
    for t in &out.truth {
        w.write_record([
            format!("{}.pgm", t.id),
            t.label.clone(),
            format!("{}", t.dip_column),
            t.row_start.to_string(),
            t.row_end.to_string(),
            t.asymmetry.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(counts: [usize; 3], noise: f64) -> SynthSpec {
        SynthSpec { counts, noise_sigma: noise, ..SynthSpec::default() }
    }

    #[test]
    fn longitudinal_is_vertically_symmetric() {
        let out = generate(&spec([1, 0, 0], 0.0), Execution::Sequential).unwrap();
        let img = &out.dataset.images()[0];
        let h = img.height();
        for r in 0..h / 2 {
            for (a, b) in img.row(r).iter().zip(img.row(h - 1 - r)) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn longitudinal_is_mirror_symmetric_about_dip() {
        let out = generate(&spec([3, 0, 0], 0.0), Execution::Sequential).unwrap();
        for (img, t) in out.dataset.images().iter().zip(&out.truth) {
            let p = crate::physfit::project(img, crate::physfit::Background::None);
            let v = p.values();
            for d in 1..20 {
                let (l, r) = (t.dip_column - d as f64, t.dip_column + d as f64);
                let lerp = |x: f64| {
                    let i = x.floor() as usize;
                    v[i] + (x - i as f64) * (v[i + 1] - v[i])
                };
                assert!((lerp(l) - lerp(r)).abs() < 0.02, "{d}");
            }
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let s = spec([4, 3, 2], 0.02);
        let a = generate(&s, Execution::Sequential).unwrap();
        let b = generate(&s, Execution::Parallel).unwrap();
        assert_eq!(a.dataset.images(), b.dataset.images());
        assert_eq!(a.truth, b.truth);
    }

    #[test]
    fn partial_depth_concentrated_in_upper_half() {
        let s = spec([0, 5, 0], 0.0);
        let out = generate(&s, Execution::Sequential).unwrap();
        let mut flat = s.clone();
        flat.shape.depth = (0.0, 0.0);
        let base = generate(&flat, Execution::Sequential).unwrap();
        for (img, bg) in out.dataset.images().iter().zip(base.dataset.images()) {
            let h = img.height();
            let depth = |rows: std::ops::Range<usize>| -> f64 {
                rows.map(|r| img.row(r).iter().zip(bg.row(r)).map(|(a, b)| (a - b).abs()).sum::<f64>()).sum()
            };
            assert!(depth(0..h / 2) >= 3.0 * depth(h / 2..h));
        }
    }

    #[test]
    fn vortex_bottom_right_shoulder_brighter() {
        let out = generate(&spec([0, 0, 3], 0.0), Execution::Sequential).unwrap();
        for (img, t) in out.dataset.images().iter().zip(&out.truth) {
            let r = img.height() / 2 + 3;
            let c = t.dip_column.round() as usize;
            let left: f64 = img.row(r)[c - 14..c - 4].iter().sum();
            let right: f64 = img.row(r)[c + 5..c + 15].iter().sum();
            assert!(right > left);
        }
    }

    #[test]
    fn zero_size_is_rejected() {
        let s = SynthSpec { width: 0, ..SynthSpec::default() };
        assert!(generate(&s, Execution::Sequential).is_err());
    }

    #[test]
    fn names_sort_in_generation_order() {
        let out = generate(&spec([2, 2, 2], 0.0), Execution::Sequential).unwrap();
        let mut sorted = out.dataset.names().to_vec();
        sorted.sort();
        assert_eq!(sorted, out.dataset.names());
    }
}
