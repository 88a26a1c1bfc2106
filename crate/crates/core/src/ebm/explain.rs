use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EbmModel, OvrEnsemble, TermImportance, SCHEMA_VERSION};
use crate::error::{Error, Result};

/// A shape function as a table. `scores[k]` covers `(cuts[k-1], cuts[k]]`;
/// the last score is the missing-value bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeTable {
    pub feature: String,
    pub cuts: Vec<f64>,
    pub scores: Vec<f64>,
}

/// A pair function as a grid; rows follow `cuts_a`, columns `cuts_b`,
/// each with a trailing missing bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTable {
    pub features: [String; 2],
    pub cuts_a: Vec<f64>,
    pub cuts_b: Vec<f64>,
    pub scores: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelExplanation {
    pub class: String,
    pub intercept: f64,
    /// Nonzero-importance terms, largest first.
    pub ranking: Vec<TermImportance>,
    pub shapes: Vec<ShapeTable>,
    pub pairs: Vec<PairTable>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationBundle {
    pub schema_version: u32,
    pub explanations: Vec<ModelExplanation>,
}

fn slot(cuts: &[f64], v: f64) -> usize {
    if v.is_nan() {
        cuts.len() + 1
    } else {
        cuts.partition_point(|c| *c < v)
    }
}

impl ModelExplanation {
    pub fn from_model(class: &str, m: &EbmModel) -> Self {
        let shapes = m
            .feature_names
            .iter()
            .zip(&m.bins.features)
            .zip(&m.shapes)
            .map(|((name, b), s)| ShapeTable { feature: name.clone(), cuts: b.cuts.clone(), scores: s.clone() })
            .collect();
        let pairs = m
            .pairs
            .iter()
            .map(|p| {
                let nb = m.pair_bins.features[p.j].n_slots();
                PairTable {
                    features: [m.feature_names[p.i].clone(), m.feature_names[p.j].clone()],
                    cuts_a: m.pair_bins.features[p.i].cuts.clone(),
                    cuts_b: m.pair_bins.features[p.j].cuts.clone(),
                    scores: p.scores.chunks(nb).map(|c| c.to_vec()).collect(),
                }
            })
            .collect();
        Self { class: class.to_string(), intercept: m.intercept, ranking: m.importance_ranking(), shapes, pairs }
    }

    /// Rank (0 = most important) of a term in the ranking.
    pub fn rank_of(&self, term: &str) -> Option<usize> {
        self.ranking.iter().position(|t| t.term == term)
    }

    /// Logit of `row` recomputed from the tables alone.
    pub fn logit(&self, row: &[f64]) -> f64 {
        let mut z = self.intercept;
        for (f, s) in self.shapes.iter().enumerate() {
            z += s.scores[slot(&s.cuts, row[f])];
        }
        for p in &self.pairs {
            let i = self.shapes.iter().position(|s| s.feature == p.features[0]).expect("pair feature");
            let j = self.shapes.iter().position(|s| s.feature == p.features[1]).expect("pair feature");
            z += p.scores[slot(&p.cuts_a, row[i])][slot(&p.cuts_b, row[j])];
        }
        z
    }
}

pub fn explain_model(class: &str, m: &EbmModel) -> ExplanationBundle {
    ExplanationBundle { schema_version: SCHEMA_VERSION, explanations: vec![ModelExplanation::from_model(class, m)] }
}

/// Global explanation of every class model.
pub fn explain_global(ens: &OvrEnsemble) -> ExplanationBundle {
    ExplanationBundle {
        schema_version: SCHEMA_VERSION,
        explanations: ens.classes.iter().zip(&ens.models).map(|(c, m)| ModelExplanation::from_model(c, m)).collect(),
    }
}

impl ExplanationBundle {
    pub fn for_class(&self, class: &str) -> Option<&ModelExplanation> {
        self.explanations.iter().find(|e| e.class == class)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let b: Self = serde_json::from_str(&text)?;
        if b.schema_version != SCHEMA_VERSION {
            return Err(Error::Schema(format!("bundle schema version {}", b.schema_version)));
        }
        Ok(b)
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Horizontal bar chart of the importance ranking.
pub fn importance_svg(e: &ModelExplanation) -> String {
    let (bar_h, label_w, plot_w) = (18.0, 220.0, 360.0);
    let n = e.ranking.len().max(1);
    let height = 40.0 + bar_h * n as f64;
    let max = e.ranking.iter().map(|t| t.importance).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{height}" font-family="sans-serif" font-size="12">"#,
        label_w + plot_w + 80.0
    );
    let _ = writeln!(s, r#"<text x="4" y="16" font-weight="bold">{} vs rest: mean |score|</text>"#, esc(&e.class));
    for (k, t) in e.ranking.iter().enumerate() {
        let y = 28.0 + bar_h * k as f64;
        let w = plot_w * t.importance / max;
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, label_w - 6.0, y + 12.0, esc(&t.term));
        let _ = writeln!(s, r##"<rect x="{label_w}" y="{y}" width="{w:.2}" height="{}" fill="#3b6ea5"/>"##, bar_h - 4.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{}">{:.4}</text>"#, label_w + w + 4.0, y + 12.0, t.importance);
    }
    s.push_str("</svg>\n");
    s
}

/// Diverging heatmap of one pair grid, missing bins omitted.
pub fn pair_svg(p: &PairTable) -> String {
    let cell = 14.0;
    let rows = p.scores.len().saturating_sub(1);
    let cols = p.scores.first().map_or(0, |r| r.len().saturating_sub(1));
    let max = p.scores.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="sans-serif" font-size="12">"#,
        60.0 + cell * cols as f64,
        60.0 + cell * rows as f64
    );
    let _ = writeln!(s, r#"<text x="4" y="16">{} (rows) x {} (columns)</text>"#, esc(&p.features[0]), esc(&p.features[1]));
    for r in 0..rows {
        for c in 0..cols {
            let v = p.scores[r][c] / max;
            let (red, blue) = if v >= 0.0 { (255.0, 255.0 * (1.0 - v)) } else { (255.0 * (1.0 + v), 255.0) };
            let green = 255.0 * (1.0 - v.abs());
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{}" width="{cell}" height="{cell}" fill="rgb({},{},{})"/>"#,
                40.0 + cell * c as f64,
                30.0 + cell * r as f64,
                red.round(),
                green.round(),
                blue.round()
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `importance_<class>.svg` and `pair_<class>_<k>.svg` files.
pub fn write_svgs(bundle: &ExplanationBundle, dir: &Path) -> Result<Vec<String>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for e in &bundle.explanations {
        let name = format!("importance_{}.svg", e.class);
        fs::write(dir.join(&name), importance_svg(e)).map_err(|err| Error::io(dir.join(&name), err))?;
        written.push(name);
        for (k, p) in e.pairs.iter().enumerate() {
            let name = format!("pair_{}_{k}.svg", e.class);
            fs::write(dir.join(&name), pair_svg(p)).map_err(|err| Error::io(dir.join(&name), err))?;
            written.push(name);
        }
    }
    Ok(written)
}
