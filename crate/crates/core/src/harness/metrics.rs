use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Square count matrix; rows are true classes, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub counts: Vec<Vec<u64>>,
}

impl Confusion {
    pub fn new(n_classes: usize) -> Self {
        Self { counts: vec![vec![0; n_classes]; n_classes] }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        if counts.iter().any(|r| r.len() != counts.len()) {
            return Err(Error::Param("confusion matrix must be square".into()));
        }
        Ok(Self { counts })
    }

    pub fn add(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

/// Percentages. Undefined ratios (0/0) are reported as 0 and flagged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub precision_undefined: Vec<bool>,
    pub recall_undefined: Vec<bool>,
}

fn pct(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (100.0 * num as f64 / den as f64, false)
    }
}

pub fn metrics(c: &Confusion) -> Metrics {
    let n = c.counts.len();
    let trace: u64 = (0..n).map(|i| c.counts[i][i]).sum();
    let (accuracy, _) = pct(trace, c.total());
    let (precision, precision_undefined) =
        (0..n).map(|j| pct(c.counts[j][j], (0..n).map(|i| c.counts[i][j]).sum())).unzip();
    let (recall, recall_undefined) = (0..n).map(|i| pct(c.counts[i][i], c.counts[i].iter().sum())).unzip();
    Metrics { accuracy, precision, recall, precision_undefined, recall_undefined }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_perfect() {
        let m = metrics(&Confusion::from_counts(vec![vec![3, 0], vec![0, 4]]).unwrap());
        assert_eq!(m.accuracy, 100.0);
        assert_eq!(m.precision, vec![100.0, 100.0]);
        assert_eq!(m.recall, vec![100.0, 100.0]);
    }

    #[test]
    fn hand_worked() {
        let m = metrics(&Confusion::from_counts(vec![vec![5, 5], vec![0, 10]]).unwrap());
        assert_eq!(m.accuracy, 75.0);
        assert_eq!(m.precision[0], 100.0);
        assert!((m.precision[1] - 66.666_666_666_666_67).abs() < 1e-9);
        assert_eq!(m.recall, vec![50.0, 100.0]);
    }

    #[test]
    fn never_predicted_class_is_flagged() {
        let m = metrics(&Confusion::from_counts(vec![vec![4, 0], vec![2, 0]]).unwrap());
        assert_eq!(m.precision[1], 0.0);
        assert!(m.precision_undefined[1]);
        assert!(!m.recall_undefined[1]);
    }

    #[test]
    fn non_square_rejected() {
        assert!(Confusion::from_counts(vec![vec![1, 2]]).is_err());
    }
}
