use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{save_json, train_binary, EbmConfig, EbmModel, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::par::{self, Execution};

/// One binary model per class, each scoring "this class versus the rest".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvrEnsemble {
    pub schema_version: u32,
    pub classes: Vec<String>,
    pub models: Vec<EbmModel>,
}

impl OvrEnsemble {
    pub fn probabilities(&self, row: &[f64]) -> Vec<f64> {
        self.models.iter().map(|m| m.predict(row)).collect()
    }

    /// Index of the most probable class (earliest on ties) and all probabilities.
    pub fn predict(&self, row: &[f64]) -> (usize, Vec<f64>) {
        let p = self.probabilities(row);
        let mut best = 0;
        for (k, v) in p.iter().enumerate().skip(1) {
            if *v > p[best] {
                best = k;
            }
        }
        (best, p)
    }

    pub fn feature_names(&self) -> &[String] {
        &self.models[0].feature_names
    }

    pub fn check_schema(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "ensemble schema version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.classes.len() != self.models.len() || self.models.is_empty() {
            return Err(Error::Schema("class list does not match models".into()));
        }
        for m in &self.models {
            m.check_schema()?;
            if m.feature_names != self.models[0].feature_names {
                return Err(Error::Schema("models disagree on features".into()));
            }
        }
        Ok(())
    }
}

/// Free-function form of [`OvrEnsemble::predict`].
pub fn predict_ovr(ens: &OvrEnsemble, row: &[f64]) -> (usize, Vec<f64>) {
    ens.predict(row)
}

/// Trains one model per class; `labels` index into `classes`.
pub fn train_ovr(
    names: &[String],
    rows: &[Vec<f64>],
    labels: &[usize],
    classes: &[String],
    cfg: &EbmConfig,
    exec: Execution,
) -> Result<OvrEnsemble> {
    if classes.len() < 2 {
        return Err(Error::Training(format!("{} classes; at least 2 are needed", classes.len())));
    }
    if let Some(l) = labels.iter().find(|l| **l >= classes.len()) {
        return Err(Error::Training(format!("label index {l} out of range")));
    }
    let models = par::try_map_range(exec, classes.len(), |k| {
        let y: Vec<bool> = labels.iter().map(|l| *l == k).collect();
        train_binary(names, rows, &y, cfg)
    })?;
    Ok(OvrEnsemble { schema_version: SCHEMA_VERSION, classes: classes.to_vec(), models })
}

pub fn save_ensemble(ens: &OvrEnsemble, path: &Path) -> Result<()> {
    save_json(ens, path)
}

pub fn load_ensemble(path: &Path) -> Result<OvrEnsemble> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let e: OvrEnsemble = serde_json::from_str(&text)?;
    e.check_schema()?;
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ebm::{BinMap, FeatureBins};

    #[test]
    fn ties_go_to_first_class() {
        let bins = BinMap { features: vec![FeatureBins { cuts: vec![] }] };
        let m = EbmModel::constant(vec!["a".into()], bins.clone(), bins, 0.0);
        let ens = OvrEnsemble { schema_version: SCHEMA_VERSION, classes: vec!["p".into(), "q".into()], models: vec![m.clone(), m] };
        assert_eq!(ens.predict(&[1.0]).0, 0);
    }

    #[test]
    fn separable_three_classes() {
        let rows: Vec<Vec<f64>> = (0..90).map(|i| vec![(i % 3) as f64, (i * 7 % 11) as f64]).collect();
        let labels: Vec<usize> = (0..90).map(|i| i % 3).collect();
        let classes: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let names = vec!["k".to_string(), "noise".to_string()];
        let ens = train_ovr(&names, &rows, &labels, &classes, &EbmConfig::default(), Execution::Parallel).unwrap();
        assert!(rows.iter().zip(&labels).all(|(r, l)| ens.predict(r).0 == *l));
        let seq = train_ovr(&names, &rows, &labels, &classes, &EbmConfig::default(), Execution::Sequential).unwrap();
        assert_eq!(ens, seq);
    }
}
