use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cut points of one feature. Bin `k` holds values in `(cuts[k-1], cuts[k]]`;
/// NaN goes to the extra missing bin at index `cuts.len() + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBins {
    pub cuts: Vec<f64>,
}

impl FeatureBins {
    /// Number of value bins, excluding the missing bin.
    pub fn n_bins(&self) -> usize {
        self.cuts.len() + 1
    }

    /// Score slots including the missing bin.
    pub fn n_slots(&self) -> usize {
        self.cuts.len() + 2
    }

    pub fn missing(&self) -> usize {
        self.cuts.len() + 1
    }

    /// Bin of `v`; values outside the training range land in the edge bins.
    #[inline]
    pub fn bin(&self, v: f64) -> usize {
        if v.is_nan() {
            self.missing()
        } else {
            self.cuts.partition_point(|c| *c < v)
        }
    }

    /// Quantile cuts over the finite values of one column.
    pub fn fit(values: &[f64], max_bins: usize) -> Self {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
        v.sort_by(f64::total_cmp);
        let mut uniq = v.clone();
        uniq.dedup();
        if uniq.len() <= max_bins {
            let cuts = uniq.windows(2).map(|w| midpoint(w[0], w[1])).collect();
            return Self { cuts };
        }
        let n = v.len();
        let mut cuts: Vec<f64> = Vec::with_capacity(max_bins - 1);
        for k in 1..max_bins {
            let idx = (k * n + max_bins / 2) / max_bins;
            if idx == 0 || idx >= n || v[idx - 1] == v[idx] {
                // Inside a run of ties: cut just above the run instead.
                let hi = v[idx.min(n - 1)];
                let Some(next) = v[idx.min(n - 1)..].iter().find(|x| **x > hi) else {
                    continue;
                };
                push_cut(&mut cuts, midpoint(hi, *next));
            } else {
                push_cut(&mut cuts, midpoint(v[idx - 1], v[idx]));
            }
        }
        Self { cuts }
    }
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + 0.5 * (b - a);
    // Guard the strict inequality against rounding when a and b are adjacent.
    if m > a {
        m
    } else {
        b
    }
}

fn push_cut(cuts: &mut Vec<f64>, c: f64) {
    if cuts.last().is_none_or(|l| c > *l) {
        cuts.push(c);
    }
}

/// Per-feature bins for a whole table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinMap {
    pub features: Vec<FeatureBins>,
}

impl BinMap {
    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn bin(&self, feature: usize, v: f64) -> usize {
        self.features[feature].bin(v)
    }
}

/// Quantile bins for every column of `rows`.
pub fn build_bins(rows: &[Vec<f64>], max_bins: usize) -> Result<BinMap> {
    if rows.is_empty() {
        return Err(Error::Training("cannot bin an empty table".into()));
    }
    if max_bins < 2 {
        return Err(Error::Param(format!("max_bins {max_bins} < 2")));
    }
    let d = rows[0].len();
    let features = (0..d)
        .map(|j| {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            FeatureBins::fit(&col, max_bins)
        })
        .collect();
    Ok(BinMap { features })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_values_two_bins() {
        let b = FeatureBins::fit(&[0.0, 1.0, 1.0, 0.0], 64);
        assert_eq!(b.cuts, vec![0.5]);
        assert_eq!((b.bin(0.0), b.bin(1.0)), (0, 1));
    }

    #[test]
    fn constant_feature_single_bin() {
        let b = FeatureBins::fit(&[3.0; 10], 64);
        assert_eq!(b.n_bins(), 1);
    }

    #[test]
    fn uniform_quantile_populations() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v: Vec<f64> = (0..1000).map(|_| rng.random::<f64>()).collect();
        let b = FeatureBins::fit(&v, 4);
        let mut counts = [0usize; 4];
        for x in &v {
            counts[b.bin(*x)] += 1;
        }
        assert!(counts.iter().all(|c| c.abs_diff(250) <= 1), "{counts:?}");
    }

    #[test]
    fn missing_and_out_of_range() {
        let b = FeatureBins::fit(&[1.0, 2.0, 3.0], 64);
        assert_eq!(b.bin(f64::NAN), 3);
        assert_eq!(b.bin(-100.0), 0);
        assert_eq!(b.bin(100.0), 2);
    }

    #[test]
    fn heavy_ties_stay_strict() {
        let mut v = vec![0.0; 900];
        v.extend((0..100).map(|i| i as f64));
        let b = FeatureBins::fit(&v, 8);
        assert!(b.cuts.windows(2).all(|w| w[0] < w[1]));
        assert!(b.n_bins() <= 8);
    }

    proptest! {
        #[test]
        fn cuts_ascending_and_total(v in prop::collection::vec(-1e6f64..1e6, 1..300), max_bins in 2usize..70) {
            let b = FeatureBins::fit(&v, max_bins);
            prop_assert!(b.cuts.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(b.n_bins() <= max_bins);
            for x in &v {
                prop_assert!(b.bin(*x) < b.n_bins());
            }
        }
    }
}
