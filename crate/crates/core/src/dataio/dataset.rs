use std::collections::BTreeSet;
use std::path::Path;

use super::loader::{image_path, load_image, read_labels, ImageFormat, LABELS_FILE};
use super::GrayImage;
use crate::error::{Error, Result};
use crate::par::{self, Execution};

/// Images with one class label and one source name each.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    images: Vec<GrayImage>,
    labels: Vec<String>,
    names: Vec<String>,
    classes: Vec<String>,
}

impl LabeledDataset {
    /// Builds a dataset over the declared `classes`, rejecting unknown labels.
    pub fn new(
        images: Vec<GrayImage>,
        labels: Vec<String>,
        names: Vec<String>,
        classes: Vec<String>,
    ) -> Result<Self> {
        if images.len() != labels.len() || images.len() != names.len() {
            return Err(Error::Size(format!(
                "{} images, {} labels, {} names",
                images.len(),
                labels.len(),
                names.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|l| !classes.contains(l)) {
            return Err(Error::Config(format!("label {bad:?} is not a declared class")));
        }
        Ok(Self { images, labels, names, classes })
    }

    pub fn empty(classes: Vec<String>) -> Self {
        Self { images: vec![], labels: vec![], names: vec![], classes }
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn images(&self) -> &[GrayImage] {
        &self.images
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }
}

/// Class merging with optional horizontal flips, applied per record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassReduction {
    /// `(original, merged)` pairs; merged class order follows first appearance.
    pub merge: Vec<(String, String)>,
    /// Original labels whose images are mirrored before merging.
    pub flip: Vec<String>,
}

impl ClassReduction {
    /// The five-to-three reduction of the soliton data: top/bottom partials
    /// become `partial`, both vortex handednesses become `vortex`, and the
    /// bottom and counterclockwise records are mirrored. `canted` is absent on
    /// purpose, so datasets still containing it are rejected.
    pub fn soliton() -> Self {
        let pairs = [
            ("longitudinal", "longitudinal"),
            ("top", "partial"),
            ("bottom", "partial"),
            ("partial", "partial"),
            ("clockwise", "vortex"),
            ("counterclockwise", "vortex"),
            ("vortex", "vortex"),
        ];
        Self {
            merge: pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
            flip: vec!["bottom".into(), "counterclockwise".into()],
        }
    }

    pub fn identity(classes: &[String]) -> Self {
        Self {
            merge: classes.iter().map(|c| (c.clone(), c.clone())).collect(),
            flip: vec![],
        }
    }

    fn target(&self, label: &str) -> Option<&str> {
        self.merge.iter().find(|(from, _)| from == label).map(|(_, to)| to.as_str())
    }

    /// Parses `from=to,from=to` merge pairs and a comma list of flipped labels.
    pub fn parse(merge: &str, flip: &str) -> Result<Self> {
        let merge = merge
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|pair| {
                pair.split_once('=')
                    .map(|(a, b)| (a.trim().to_string(), b.trim().to_string()))
                    .ok_or_else(|| Error::Config(format!("merge entry {pair:?} is not `from=to`")))
            })
            .collect::<Result<Vec<_>>>()?;
        let flip = flip
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect();
        Ok(Self { merge, flip })
    }
}

/// Merges labels and mirrors the records listed in the flip set.
pub fn reduce_classes(ds: &LabeledDataset, reduction: &ClassReduction) -> Result<LabeledDataset> {
    for f in &reduction.flip {
        if reduction.target(f).is_none() {
            return Err(Error::Config(format!("flip label {f:?} has no merge target")));
        }
    }
    let mut classes: Vec<String> = Vec::new();
    for (_, to) in &reduction.merge {
        if !classes.contains(to) {
            classes.push(to.clone());
        }
    }
    let mut images = Vec::with_capacity(ds.len());
    let mut labels = Vec::with_capacity(ds.len());
    for (img, label) in ds.images.iter().zip(&ds.labels) {
        let to = reduction
            .target(label)
            .ok_or_else(|| Error::Config(format!("label {label:?} has no merge target")))?;
        if reduction.flip.iter().any(|f| f == label) {
            images.push(img.flip_horizontal());
        } else {
            images.push(img.clone());
        }
        labels.push(to.to_string());
    }
    // Keep only classes that can occur, in merge order.
    let present: BTreeSet<&String> = labels.iter().collect();
    let classes: Vec<String> = classes.into_iter().filter(|c| present.contains(c)).collect();
    LabeledDataset::new(images, labels, ds.names.clone(), classes)
}

/// Loads every image listed in `dir/labels.csv`, ordered by filename.
///
/// The declared class set is the sorted set of labels found.
pub fn load_dataset(dir: &Path, exec: Execution) -> Result<LabeledDataset> {
    let mut entries = read_labels(&dir.join(LABELS_FILE))?;
    entries.sort_by(|a, b| a.filename.cmp(&b.filename));
    let images = par::try_map_range(exec, entries.len(), |i| {
        let path = image_path(dir, &entries[i].filename);
        let format = ImageFormat::from_path(&path).ok_or_else(|| {
            Error::Config(format!("{}: unsupported image extension", path.display()))
        })?;
        load_image(&path, format)
    })?;
    let classes: BTreeSet<String> = entries.iter().map(|e| e.label.clone()).collect();
    LabeledDataset::new(
        images,
        entries.iter().map(|e| e.label.clone()).collect(),
        entries.iter().map(|e| e.filename.clone()).collect(),
        classes.into_iter().collect(),
    )
}
