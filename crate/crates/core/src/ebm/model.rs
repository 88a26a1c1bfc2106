use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::BinMap;
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Additive score over the coarse bins of two features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTerm {
    pub i: usize,
    pub j: usize,
    /// Row-major `(bin_i, bin_j)` grid over the pair bin slots, missing bins included.
    pub scores: Vec<f64>,
}

/// One term and its mean absolute contribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermImportance {
    pub term: String,
    pub importance: f64,
}

/// Binary additive model with a logistic link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EbmModel {
    pub schema_version: u32,
    pub feature_names: Vec<String>,
    pub intercept: f64,
    pub bins: BinMap,
    /// Per feature, one score per slot of `bins` (missing slot last).
    pub shapes: Vec<Vec<f64>>,
    /// Coarser bins used by the pair terms.
    pub pair_bins: BinMap,
    pub pairs: Vec<PairTerm>,
    /// Univariate terms first, then pairs, in term order.
    pub importances: Vec<TermImportance>,
}

impl EbmModel {
    /// A model with every term zero.
    pub fn constant(feature_names: Vec<String>, bins: BinMap, pair_bins: BinMap, intercept: f64) -> Self {
        let shapes = bins.features.iter().map(|b| vec![0.0; b.n_slots()]).collect();
        let importances = feature_names.iter().map(|n| TermImportance { term: n.clone(), importance: 0.0 }).collect();
        Self {
            schema_version: SCHEMA_VERSION,
            feature_names,
            intercept,
            bins,
            shapes,
            pair_bins,
            pairs: Vec::new(),
            importances,
        }
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn pair_name(&self, p: &PairTerm) -> String {
        format!("{} & {}", self.feature_names[p.i], self.feature_names[p.j])
    }

    /// Score grid index of a row for pair `p`.
    #[inline]
    pub fn pair_index(&self, p: &PairTerm, row: &[f64]) -> usize {
        let bi = self.pair_bins.bin(p.i, row[p.i]);
        let bj = self.pair_bins.bin(p.j, row[p.j]);
        bi * self.pair_bins.features[p.j].n_slots() + bj
    }

    /// Per-term contributions for one row: features, then pairs.
    pub fn contributions(&self, row: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.shapes.len() + self.pairs.len());
        for (f, s) in self.shapes.iter().enumerate() {
            out.push(s[self.bins.bin(f, row[f])]);
        }
        for p in &self.pairs {
            out.push(p.scores[self.pair_index(p, row)]);
        }
        out
    }

    /// `intercept + sum of terms`, accumulated in that order.
    pub fn logit(&self, row: &[f64]) -> f64 {
        let mut z = self.intercept;
        for (f, s) in self.shapes.iter().enumerate() {
            z += s[self.bins.bin(f, row[f])];
        }
        for p in &self.pairs {
            z += p.scores[self.pair_index(p, row)];
        }
        z
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        logistic(self.logit(row))
    }

    /// Terms with nonzero importance, largest first; ties keep term order.
    pub fn importance_ranking(&self) -> Vec<TermImportance> {
        let mut r: Vec<TermImportance> = self.importances.iter().filter(|t| t.importance > 0.0).cloned().collect();
        r.sort_by(|a, b| b.importance.total_cmp(&a.importance));
        r
    }

    pub fn check_schema(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "model schema version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let d = self.feature_names.len();
        if self.bins.n_features() != d || self.pair_bins.n_features() != d || self.shapes.len() != d {
            return Err(Error::Schema("feature count mismatch".into()));
        }
        for (s, b) in self.shapes.iter().zip(&self.bins.features) {
            if s.len() != b.n_slots() {
                return Err(Error::Schema("shape length does not match bins".into()));
            }
        }
        for p in &self.pairs {
            if p.i >= p.j || p.j >= d {
                return Err(Error::Schema(format!("bad pair ({}, {})", p.i, p.j)));
            }
            let n = self.pair_bins.features[p.i].n_slots() * self.pair_bins.features[p.j].n_slots();
            if p.scores.len() != n {
                return Err(Error::Schema("pair grid does not match bins".into()));
            }
        }
        Ok(())
    }
}

/// Writes any serializable model as pretty JSON.
pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn save_model(model: &EbmModel, path: &Path) -> Result<()> {
    save_json(model, path)
}

pub fn load_model(path: &Path) -> Result<EbmModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let m: EbmModel = serde_json::from_str(&text)?;
    m.check_schema()?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ebm::FeatureBins;

    fn toy() -> EbmModel {
        let bins = BinMap { features: vec![FeatureBins { cuts: vec![0.0] }, FeatureBins { cuts: vec![] }] };
        let mut m = EbmModel::constant(vec!["a".into(), "b".into()], bins.clone(), bins, 0.0);
        m.shapes[0] = vec![-1.0, 1.0, 0.0];
        m.pairs.push(PairTerm { i: 0, j: 1, scores: vec![0.25, 0.0, -0.25, 0.0, 0.0, 0.0] });
        m
    }

    #[test]
    fn zero_model_is_one_half() {
        let bins = BinMap { features: vec![FeatureBins { cuts: vec![] }] };
        let m = EbmModel::constant(vec!["a".into()], bins.clone(), bins, 0.0);
        assert_eq!(m.predict(&[3.0]), 0.5);
        assert!(m.importance_ranking().is_empty());
    }

    #[test]
    fn intercept_shift_is_additive() {
        let mut m = toy();
        let row = [0.5, 2.0];
        let z = m.logit(&row);
        m.intercept += 0.75;
        assert_eq!(m.logit(&row), z + 0.75);
    }

    #[test]
    fn logit_is_sum_of_lookups() {
        let m = toy();
        assert_eq!(m.logit(&[-1.0, 0.0]), -1.0 + 0.25);
        assert_eq!(m.logit(&[1.0, 0.0]), 1.0 - 0.25);
        assert_eq!(m.logit(&[f64::NAN, 0.0]), 0.0);
    }

    #[test]
    fn logistic_is_stable() {
        assert_eq!(logistic(0.0), 0.5);
        assert!(logistic(-800.0) >= 0.0 && logistic(800.0) <= 1.0);
    }

    #[test]
    fn json_round_trip_and_version_guard() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let m = toy();
        save_model(&m, &path).unwrap();
        assert_eq!(load_model(&path).unwrap(), m);
        let text = std::fs::read_to_string(&path).unwrap().replace("\"schema_version\": 1", "\"schema_version\": 99");
        std::fs::write(&path, text).unwrap();
        assert!(load_model(&path).is_err());
        std::fs::write(&path, "{ not json").unwrap();
        assert!(load_model(&path).is_err());
    }
}
