use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{build_bins, logistic, BinMap, EbmModel, PairTerm, TermImportance};
use crate::error::{Error, Result};

const MIN_ROWS: usize = 20;
const RATE_CLIP: f64 = 1e-6;

/// Boosting hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EbmConfig {
    pub learning_rate: f64,
    /// Cap on boosting rounds; one round visits every term once.
    pub max_rounds: usize,
    /// Rounds without validation improvement before stopping.
    pub patience: usize,
    pub val_fraction: f64,
    pub max_pairs: usize,
    pub max_bins: usize,
    pub pair_max_bins: usize,
    /// Leaves of the tree fitted over a feature's ordered bins at each
    /// univariate step; 0 updates every bin with its own mean residual.
    pub max_leaves: usize,
    pub seed: u64,
    /// Weight each class by `n / (2 n_class)` in the loss.
    pub class_weights: bool,
    /// Return a constant model for single-class labels instead of failing.
    pub allow_single_class: bool,
}

impl Default for EbmConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            max_rounds: 1000,
            patience: 50,
            val_fraction: 0.15,
            max_pairs: 10,
            max_bins: 64,
            pair_max_bins: 16,
            max_leaves: 3,
            seed: 0,
            class_weights: false,
            allow_single_class: false,
        }
    }
}

impl EbmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Param(format!("learning_rate {} must be positive", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::Param(format!("val_fraction {} must be in [0, 1)", self.val_fraction)));
        }
        if self.max_leaves == 1 {
            return Err(Error::Param("max_leaves must be 0 (per bin) or at least 2".into()));
        }
        if self.max_bins < 2 || self.pair_max_bins < 2 {
            return Err(Error::Param("bin counts must be at least 2".into()));
        }
        Ok(())
    }
}

/// Losses recorded while training, for inspection.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainTrace {
    /// Validation log-loss after each univariate round, round 0 first.
    pub main_losses: Vec<f64>,
    pub main_best_round: usize,
    pub pair_losses: Vec<f64>,
    pub pair_best_round: usize,
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
}

struct Prepared {
    y: Vec<f64>,
    w: Vec<f64>,
    is_val: Vec<bool>,
    rows: Vec<Vec<f64>>,
}

/// Canonical row order and the seeded stratified validation split.
///
/// Rows are sorted by label, then by content, so the split and everything
/// after it do not depend on the order rows were supplied in.
fn prepare(rows: &[Vec<f64>], labels: &[bool], cfg: &EbmConfig) -> Prepared {
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| labels[a].cmp(&labels[b]).then_with(|| lex_cmp(&rows[a], &rows[b])).then(a.cmp(&b)));
    let rows: Vec<Vec<f64>> = order.iter().map(|&i| rows[i].clone()).collect();
    let y: Vec<f64> = order.iter().map(|&i| f64::from(u8::from(labels[i]))).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut is_val = vec![false; rows.len()];
    for class in [0.0, 1.0] {
        let mut members: Vec<usize> = (0..rows.len()).filter(|&i| y[i] == class).collect();
        members.shuffle(&mut rng);
        let n = members.len();
        let mut n_val = (cfg.val_fraction * n as f64).round() as usize;
        if cfg.val_fraction > 0.0 && n >= 2 {
            n_val = n_val.clamp(1, n - 1);
        } else {
            n_val = n_val.min(n.saturating_sub(1));
        }
        for &i in &members[..n_val] {
            is_val[i] = true;
        }
    }

    let n = rows.len() as f64;
    let n1 = y.iter().sum::<f64>();
    let w = y
        .iter()
        .map(|&yi| {
            if cfg.class_weights {
                let nc = if yi == 1.0 { n1 } else { n - n1 };
                n / (2.0 * nc)
            } else {
                1.0
            }
        })
        .collect();
    Prepared { y, w, is_val, rows }
}

fn log_loss(y: &[f64], w: &[f64], logits: &[f64], mask: &[bool], want: bool) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..y.len() {
        if mask[i] == want {
            // log(1 + e^z) - y z, computed stably.
            let z = logits[i];
            let sp = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
            num += w[i] * (sp - y[i] * z);
            den += w[i];
        }
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// One additive term being boosted: the slot of each row and its scores.
struct Term {
    slot: Vec<usize>,
    scores: Vec<f64>,
    /// `(ordered value bins, max leaves)` when updates are fitted as a tree;
    /// slots past the value bins keep per-slot updates.
    tree: Option<(usize, usize)>,
}

/// Greedy best-first partition of `0..n` into at most `leaves` runs,
/// splitting where the weighted residual sums gain the most.
fn tree_runs(num: &[f64], den: &[f64], n: usize, leaves: usize) -> Vec<(usize, usize)> {
    let (mut ps, mut pw) = (vec![0.0; n + 1], vec![0.0; n + 1]);
    for k in 0..n {
        ps[k + 1] = ps[k] + num[k];
        pw[k + 1] = pw[k] + den[k];
    }
    let score = |a: usize, b: usize| {
        let w = pw[b] - pw[a];
        if w > 0.0 {
            (ps[b] - ps[a]).powi(2) / w
        } else {
            0.0
        }
    };
    let mut runs = vec![(0, n)];
    while runs.len() < leaves {
        let mut best: Option<(f64, usize, usize)> = None;
        for (k, &(a, b)) in runs.iter().enumerate() {
            let whole = score(a, b);
            for cut in a + 1..b {
                let gain = score(a, cut) + score(cut, b) - whole;
                if gain > 1e-12 && best.is_none_or(|x| gain > x.0) {
                    best = Some((gain, k, cut));
                }
            }
        }
        let Some((_, k, cut)) = best else { break };
        let (a, b) = runs[k];
        runs[k] = (a, cut);
        runs.insert(k + 1, (cut, b));
    }
    runs
}

impl Term {
    /// Adds `lr` times the mean training residual of each slot, or of each
    /// tree leaf when the term is fitted as a tree.
    fn boost(&mut self, p: &Prepared, logits: &mut [f64], lr: f64, num: &mut Vec<f64>, den: &mut Vec<f64>) {
        num.clear();
        num.resize(self.scores.len(), 0.0);
        den.clear();
        den.resize(self.scores.len(), 0.0);
        for (i, z) in logits.iter().enumerate() {
            if !p.is_val[i] {
                let s = self.slot[i];
                num[s] += p.w[i] * (p.y[i] - logistic(*z));
                den[s] += p.w[i];
            }
        }
        let mut update: Vec<f64> = num.iter().zip(den.iter()).map(|(n, d)| if *d > 0.0 { lr * n / d } else { 0.0 }).collect();
        if let Some((nb, leaves)) = self.tree {
            for (a, b) in tree_runs(num, den, nb, leaves) {
                let (s, w) = (num[a..b].iter().sum::<f64>(), den[a..b].iter().sum::<f64>());
                let u = if w > 0.0 { lr * s / w } else { 0.0 };
                update[a..b].iter_mut().for_each(|v| *v = u);
            }
        }
        for (s, u) in self.scores.iter_mut().zip(&update) {
            *s += u;
        }
        for (z, &s) in logits.iter_mut().zip(&self.slot) {
            *z += update[s];
        }
    }
}

/// Cyclic boosting with early stopping; `terms` end at their best round.
fn boost_cyclic(p: &Prepared, logits: &mut Vec<f64>, terms: &mut [Term], cfg: &EbmConfig) -> (Vec<f64>, usize) {
    let has_val = p.is_val.iter().any(|v| *v);
    let start = logits.clone();
    let mut losses = vec![log_loss(&p.y, &p.w, logits, &p.is_val, true)];
    let mut best = (losses[0], 0usize, terms.iter().map(|t| t.scores.clone()).collect::<Vec<_>>());
    let (mut num, mut den) = (Vec::new(), Vec::new());
    for round in 1..=cfg.max_rounds {
        for t in terms.iter_mut() {
            t.boost(p, logits, cfg.learning_rate, &mut num, &mut den);
        }
        let loss = log_loss(&p.y, &p.w, logits, &p.is_val, true);
        losses.push(loss);
        if !has_val || loss < best.0 {
            best = (loss, round, terms.iter().map(|t| t.scores.clone()).collect());
        } else if round - best.1 >= cfg.patience {
            break;
        }
    }
    for (t, s) in terms.iter_mut().zip(best.2) {
        t.scores = s;
    }
    // Rebuild from the restored scores rather than unwinding updates.
    *logits = start;
    for t in terms.iter() {
        for (z, &s) in logits.iter_mut().zip(&t.slot) {
            *z += t.scores[s];
        }
    }
    (losses, best.1)
}

fn check_input(names: &[String], rows: &[Vec<f64>], labels: &[bool]) -> Result<()> {
    if rows.len() != labels.len() {
        return Err(Error::Training(format!("{} rows but {} labels", rows.len(), labels.len())));
    }
    if rows.len() < MIN_ROWS {
        return Err(Error::Training(format!("{} rows; at least {MIN_ROWS} are needed", rows.len())));
    }
    for (i, r) in rows.iter().enumerate() {
        if r.len() != names.len() {
            return Err(Error::Training(format!("row {i} has {} values, expected {}", r.len(), names.len())));
        }
        if let Some(j) = r.iter().position(|v| !v.is_finite()) {
            return Err(Error::Training(format!("non-finite value at row {i}, column {:?}", names[j])));
        }
    }
    Ok(())
}

fn pair_screen(p: &Prepared, logits: &[f64], pair_slots: &[Vec<usize>], pair_bins: &BinMap, max_pairs: usize) -> Vec<(usize, usize)> {
    let d = pair_slots.len();
    let resid: Vec<f64> = p.y.iter().zip(logits).map(|(y, z)| y - logistic(*z)).collect();
    let mut gains = Vec::new();
    for i in 0..d {
        for j in i + 1..d {
            let nj = pair_bins.features[j].n_slots();
            let cells = pair_bins.features[i].n_slots() * nj;
            let (mut sw, mut swr) = (vec![0.0; cells], vec![0.0; cells]);
            for r in 0..p.y.len() {
                if !p.is_val[r] {
                    let c = pair_slots[i][r] * nj + pair_slots[j][r];
                    sw[c] += p.w[r];
                    swr[c] += p.w[r] * resid[r];
                }
            }
            let gain: f64 = sw.iter().zip(&swr).filter(|(w, _)| **w > 0.0).map(|(w, s)| s * s / w).sum();
            gains.push(((i, j), gain));
        }
    }
    gains.sort_by(|a, b| b.1.total_cmp(&a.1));
    gains.into_iter().filter(|g| g.1 > 0.0).take(max_pairs).map(|g| g.0).collect()
}

/// Trains one binary model; see [`train_binary_traced`].
pub fn train_binary(names: &[String], rows: &[Vec<f64>], labels: &[bool], cfg: &EbmConfig) -> Result<EbmModel> {
    train_binary_traced(names, rows, labels, cfg).map(|(m, _)| m)
}

/// Trains `logit P(y) = beta + sum f_i(x_i) + sum f_ij(x_i, x_j)`.
///
/// Univariate terms are boosted first, cyclically, until the validation loss
/// stalls; then the best-scoring pairs are boosted on the frozen univariate
/// fit. Every term is finally shifted to zero mean over the rows and the
/// shifts are folded into the intercept.
pub fn train_binary_traced(
    names: &[String],
    rows: &[Vec<f64>],
    labels: &[bool],
    cfg: &EbmConfig,
) -> Result<(EbmModel, TrainTrace)> {
    cfg.validate()?;
    check_input(names, rows, labels)?;
    let p = prepare(rows, labels, cfg);
    let n = p.y.len();
    let bins = build_bins(&p.rows, cfg.max_bins)?;
    let pair_bins = build_bins(&p.rows, cfg.pair_max_bins)?;
    let d = names.len();

    let train_rate = {
        let (mut a, mut b) = (0.0, 0.0);
        for i in (0..n).filter(|&i| !p.is_val[i]) {
            a += p.w[i] * p.y[i];
            b += p.w[i];
        }
        (a / b).clamp(RATE_CLIP, 1.0 - RATE_CLIP)
    };
    let beta0 = (train_rate / (1.0 - train_rate)).ln();
    let n_pos = p.y.iter().filter(|y| **y == 1.0).count();
    if n_pos == 0 || n_pos == n {
        if !cfg.allow_single_class {
            return Err(Error::Training("labels contain a single class".into()));
        }
        return Ok((EbmModel::constant(names.to_vec(), bins, pair_bins, beta0), TrainTrace::default()));
    }

    let mut logits = vec![beta0; n];
    let mut mains: Vec<Term> = (0..d)
        .map(|f| Term {
            slot: p.rows.iter().map(|r| bins.bin(f, r[f])).collect(),
            scores: vec![0.0; bins.features[f].n_slots()],
            tree: (cfg.max_leaves > 0).then(|| (bins.features[f].n_bins(), cfg.max_leaves)),
        })
        .collect();
    let (main_losses, main_best_round) = boost_cyclic(&p, &mut logits, &mut mains, cfg);

    let pair_slots: Vec<Vec<usize>> = (0..d).map(|f| p.rows.iter().map(|r| pair_bins.bin(f, r[f])).collect()).collect();
    let selected = if d >= 2 && cfg.max_pairs > 0 { pair_screen(&p, &logits, &pair_slots, &pair_bins, cfg.max_pairs) } else { Vec::new() };
    let mut pair_terms: Vec<Term> = selected
        .iter()
        .map(|&(i, j)| {
            let nj = pair_bins.features[j].n_slots();
            Term {
                slot: (0..n).map(|r| pair_slots[i][r] * nj + pair_slots[j][r]).collect(),
                scores: vec![0.0; pair_bins.features[i].n_slots() * nj],
                tree: None,
            }
        })
        .collect();
    let (pair_losses, pair_best_round) =
        if pair_terms.is_empty() { (Vec::new(), 0) } else { boost_cyclic(&p, &mut logits, &mut pair_terms, cfg) };

    let mut intercept = beta0;
    let mut center = |t: &mut Term, missing: &dyn Fn(usize) -> bool| {
        let mean = t.slot.iter().map(|&s| t.scores[s]).sum::<f64>() / n as f64;
        for (s, v) in t.scores.iter_mut().enumerate() {
            if !missing(s) {
                *v -= mean;
            }
        }
        intercept += mean;
    };
    for (f, t) in mains.iter_mut().enumerate() {
        let m = bins.features[f].missing();
        center(t, &|s| s == m);
    }
    for (t, &(i, j)) in pair_terms.iter_mut().zip(&selected) {
        let (mi, nj) = (pair_bins.features[i].missing(), pair_bins.features[j].n_slots());
        center(t, &|s| s / nj == mi || s % nj == nj - 1);
    }

    let mean_abs = |t: &Term| t.slot.iter().map(|&s| t.scores[s].abs()).sum::<f64>() / n as f64;
    let mut importances: Vec<TermImportance> =
        names.iter().zip(&mains).map(|(name, t)| TermImportance { term: name.clone(), importance: mean_abs(t) }).collect();
    for (t, &(i, j)) in pair_terms.iter().zip(&selected) {
        importances.push(TermImportance { term: format!("{} & {}", names[i], names[j]), importance: mean_abs(t) });
    }

    let model = EbmModel {
        schema_version: super::SCHEMA_VERSION,
        feature_names: names.to_vec(),
        intercept,
        bins,
        shapes: mains.into_iter().map(|t| t.scores).collect(),
        pair_bins,
        pairs: selected.iter().zip(pair_terms).map(|(&(i, j), t)| PairTerm { i, j, scores: t.scores }).collect(),
        importances,
    };
    Ok((model, TrainTrace { main_losses, main_best_round, pair_losses, pair_best_round }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn names(d: usize) -> Vec<String> {
        (0..d).map(|i| format!("x{i}")).collect()
    }

    #[test]
    fn all_positive_labels() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64]).collect();
        let labels = vec![true; 30];
        assert!(train_binary(&names(1), &rows, &labels, &EbmConfig::default()).is_err());
        let cfg = EbmConfig { allow_single_class: true, ..EbmConfig::default() };
        let m = train_binary(&names(1), &rows, &labels, &cfg).unwrap();
        assert!(m.shapes[0].iter().all(|s| *s == 0.0));
        assert!(m.predict(&[3.0]) > 0.99);
        assert!(m.importance_ranking().is_empty());
    }

    #[test]
    fn threshold_is_learned() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        // 60 distinct values, so every value gets its own bin.
        let rows: Vec<Vec<f64>> = (0..1000).map(|_| vec![(rng.random_range(-30..30) as f64 + 0.5) / 30.0]).collect();
        let labels: Vec<bool> = rows.iter().map(|r| r[0] > 0.0).collect();
        let m = train_binary(&names(1), &rows, &labels, &EbmConfig::default()).unwrap();
        let correct = rows.iter().zip(&labels).filter(|(r, l)| (m.predict(r) > 0.5) == **l).count();
        // Brute-force best threshold as the oracle.
        let best = rows
            .iter()
            .map(|t| rows.iter().zip(&labels).filter(|(r, l)| (r[0] > t[0]) == **l).count())
            .max()
            .unwrap();
        assert_eq!(best, 1000);
        assert_eq!(correct, best);
        let s = &m.shapes[0];
        let zero = m.bins.bin(0, 0.0);
        assert!(s[zero.saturating_sub(3)..zero] .windows(2).all(|w| w[0] <= w[1] + 1e-12));
        assert!(s[zero + 1..(zero + 4).min(s.len() - 1)].windows(2).all(|w| w[0] <= w[1] + 1e-12));
        assert!(s[zero + 1] > s[zero.saturating_sub(1)]);
    }

    #[test]
    fn tree_splits_at_the_steps() {
        let num = [-1.0, -1.0, -1.0, 2.0, 2.0, 0.5, 0.5, 0.5];
        let den = [1.0; 8];
        assert_eq!(tree_runs(&num, &den, 8, 3), vec![(0, 3), (3, 5), (5, 8)]);
        assert_eq!(tree_runs(&num, &den, 8, 2).len(), 2);
        assert_eq!(tree_runs(&[0.0; 4], &[1.0; 4], 4, 3), vec![(0, 4)]);
        assert!(EbmConfig { max_leaves: 1, ..EbmConfig::default() }.validate().is_err());
    }

    #[test]
    fn rejects_non_finite_and_short_tables() {
        let mut rows: Vec<Vec<f64>> = (0..25).map(|i| vec![i as f64, 1.0]).collect();
        let labels: Vec<bool> = (0..25).map(|i| i % 2 == 0).collect();
        rows[7][1] = f64::NAN;
        let err = train_binary(&names(2), &rows, &labels, &EbmConfig::default()).unwrap_err();
        assert!(err.to_string().contains("row 7") && err.to_string().contains("x1"), "{err}");
        assert!(train_binary(&names(2), &rows[..10], &labels[..10], &EbmConfig::default()).is_err());
    }

    #[test]
    fn row_order_does_not_matter() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rows: Vec<Vec<f64>> = (0..200).map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]).collect();
        let labels: Vec<bool> = rows.iter().map(|r| r[0] * r[1] + 0.3 * rng.random::<f64>() > 0.0).collect();
        let cfg = EbmConfig { max_rounds: 200, ..EbmConfig::default() };
        let a = train_binary(&names(2), &rows, &labels, &cfg).unwrap();
        let mut idx: Vec<usize> = (0..200).collect();
        idx.shuffle(&mut rng);
        let rows2: Vec<Vec<f64>> = idx.iter().map(|&i| rows[i].clone()).collect();
        let labels2: Vec<bool> = idx.iter().map(|&i| labels[i]).collect();
        let b = train_binary(&names(2), &rows2, &labels2, &cfg).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn early_stop_never_worse_than_start() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rows: Vec<Vec<f64>> = (0..300).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
        let labels: Vec<bool> = (0..300).map(|_| rng.random::<bool>()).collect();
        let (_, trace) = train_binary_traced(&names(2), &rows, &labels, &EbmConfig::default()).unwrap();
        assert!(trace.main_losses[trace.main_best_round] <= trace.main_losses[0]);
    }

    #[test]
    fn terms_are_centered() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rows: Vec<Vec<f64>> = (0..400).map(|_| vec![rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)]).collect();
        let labels: Vec<bool> = rows.iter().map(|r| r[0].sin() + r[0] * r[1] > rng.random_range(-1.0..1.0)).collect();
        let m = train_binary(&names(2), &rows, &labels, &EbmConfig::default()).unwrap();
        for (f, s) in m.shapes.iter().enumerate() {
            let mean: f64 = rows.iter().map(|r| s[m.bins.bin(f, r[f])]).sum::<f64>() / 400.0;
            assert!(mean.abs() < 1e-12);
        }
        for p in &m.pairs {
            let mean: f64 = rows.iter().map(|r| p.scores[m.pair_index(p, r)]).sum::<f64>() / 400.0;
            assert!(mean.abs() < 1e-12);
        }
        assert!(!m.pairs.is_empty());
    }

    #[test]
    fn class_weights_raise_minority_probability() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rows: Vec<Vec<f64>> = (0..400).map(|_| vec![rng.random::<f64>()]).collect();
        let labels: Vec<bool> = rows.iter().map(|r| r[0] > 0.8 && rng.random::<f64>() < 0.5).collect();
        let plain = train_binary(&names(1), &rows, &labels, &EbmConfig::default()).unwrap();
        let cfg = EbmConfig { class_weights: true, ..EbmConfig::default() };
        let weighted = train_binary(&names(1), &rows, &labels, &cfg).unwrap();
        assert!(weighted.predict(&[0.9]) > plain.predict(&[0.9]));
    }
}
