use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{metrics, select, stratified_kfold, Confusion, FeatureSet, Selection};
use crate::ebm::{train_ovr, EbmConfig, OvrEnsemble};
use crate::error::{Error, Result};
use crate::features::FeatureRow;
use crate::par::{self, Execution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub feature_set: FeatureSet,
    pub repeats: usize,
    pub k: usize,
    /// Repeat `r` splits with `seed + r`.
    pub seed: u64,
    pub ebm: EbmConfig,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self { feature_set: FeatureSet::GfEgf, repeats: 5, k: 6, seed: 0, ebm: EbmConfig::default() }
    }
}

/// Mean and population standard deviation over cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    /// `mean(sigma)` with sigma in units of the last shown digit.
    pub text: String,
}

impl Stat {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len().max(1) as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        Self { mean, std, text: format_mean_sigma(mean, std) }
    }
}

/// `91.4(4)` for sigma 0.4, `88.2(1.3)` for sigma 1.3.
pub fn format_mean_sigma(mean: f64, std: f64) -> String {
    let digit = (std * 10.0).round();
    if digit < 10.0 {
        format!("{mean:.1}({digit:.0})")
    } else {
        format!("{mean:.1}({std:.1})")
    }
}

/// One train/test cell of the cross-validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub repeat: usize,
    pub fold: usize,
    pub split_seed: u64,
    pub n_test: usize,
    pub accuracy: f64,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub confusion: Vec<Vec<u64>>,
    /// `precision:<class>` or `recall:<class>` where the ratio was 0/0.
    pub undefined: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub config: CvConfig,
    pub classes: Vec<String>,
    pub features: Vec<String>,
    pub n_rows: usize,
    /// Rows left out because their physics fit failed.
    pub excluded_rows: Vec<String>,
    pub cells: Vec<CellResult>,
    pub accuracy: Stat,
    pub precision: Vec<Stat>,
    pub recall: Vec<Stat>,
}

impl CvReport {
    /// Plain-text table: one metric per line, the feature set as the column.
    pub fn text_table(&self) -> String {
        let col = self.config.feature_set.to_string();
        let w = self.classes.iter().map(|c| c.len()).max().unwrap_or(0).max(8);
        let mut s = String::new();
        let _ = writeln!(s, "{:<w$}  {:<9}  {col}", "Class", "Metric");
        let _ = writeln!(s, "{:<w$}  {:<9}  {}", "(all)", "Accuracy", self.accuracy.text);
        for (k, c) in self.classes.iter().enumerate() {
            let _ = writeln!(s, "{c:<w$}  {:<9}  {}", "Precision", self.precision[k].text);
            let _ = writeln!(s, "{:<w$}  {:<9}  {}", "", "Recall", self.recall[k].text);
        }
        let _ = writeln!(
            s,
            "\n{} rows, {} excluded, {} repeat(s) x {} folds, seed {}",
            self.n_rows,
            self.excluded_rows.len(),
            self.config.repeats,
            self.config.k,
            self.config.seed
        );
        s
    }
}

fn label_indices(sel: &Selection) -> (Vec<String>, Vec<usize>) {
    let mut classes = sel.labels.clone();
    classes.sort();
    classes.dedup();
    let idx = sel.labels.iter().map(|l| classes.binary_search(l).expect("present")).collect();
    (classes, idx)
}

/// Repeated stratified k-fold cross-validation of one-vs-rest models.
pub fn run_cv(table: &[FeatureRow], cfg: &CvConfig, exec: Execution) -> Result<CvReport> {
    if cfg.repeats == 0 {
        return Err(Error::Config("repeats must be at least 1".into()));
    }
    let sel = select(table, cfg.feature_set)?;
    let (classes, labels) = label_indices(&sel);
    let splits = (0..cfg.repeats as u64)
        .map(|r| stratified_kfold(&labels, cfg.k, cfg.seed.wrapping_add(r)))
        .collect::<Result<Vec<_>>>()?;
    let n_cells = cfg.repeats * cfg.k;
    let cells = par::try_map_range(exec, n_cells, |c| {
        let (repeat, fold) = (c / cfg.k, c % cfg.k);
        let split = &splits[repeat];
        let train = split.train_indices(fold);
        let test = split.test_indices(fold);
        let rows: Vec<Vec<f64>> = train.iter().map(|&i| sel.rows[i].clone()).collect();
        let y: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
        let ens = train_ovr(&sel.names, &rows, &y, &classes, &cfg.ebm, Execution::Sequential)?;
        let mut conf = Confusion::new(classes.len());
        for &i in &test {
            conf.add(labels[i], ens.predict(&sel.rows[i]).0);
        }
        let m = metrics(&conf);
        let mut undefined = Vec::new();
        for (k, c) in classes.iter().enumerate() {
            if m.precision_undefined[k] {
                undefined.push(format!("precision:{c}"));
            }
            if m.recall_undefined[k] {
                undefined.push(format!("recall:{c}"));
            }
        }
        Ok::<_, Error>(CellResult {
            repeat,
            fold,
            split_seed: split.seed,
            n_test: test.len(),
            accuracy: m.accuracy,
            precision: m.precision,
            recall: m.recall,
            confusion: conf.counts,
            undefined,
        })
    })?;
    let accuracy = Stat::from_values(&cells.iter().map(|c| c.accuracy).collect::<Vec<_>>());
    let per_class = |get: &dyn Fn(&CellResult) -> &Vec<f64>| -> Vec<Stat> {
        (0..classes.len()).map(|k| Stat::from_values(&cells.iter().map(|c| get(c)[k]).collect::<Vec<_>>())).collect()
    };
    let precision = per_class(&|c| &c.precision);
    let recall = per_class(&|c| &c.recall);
    Ok(CvReport {
        config: cfg.clone(),
        classes,
        features: sel.names.clone(),
        n_rows: sel.rows.len(),
        excluded_rows: sel.excluded.clone(),
        cells,
        accuracy,
        precision,
        recall,
    })
}

/// One-vs-rest models trained on every usable row of the table.
pub fn fit_full(table: &[FeatureRow], fs: FeatureSet, ebm: &EbmConfig, exec: Execution) -> Result<OvrEnsemble> {
    let sel = select(table, fs)?;
    let (classes, labels) = label_indices(&sel);
    train_ovr(&sel.names, &sel.rows, &labels, &classes, ebm, exec)
}
