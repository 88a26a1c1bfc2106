use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataio::PF_COLUMNS;
use crate::error::{Error, Result};
use crate::features::FeatureRow;

pub const GF_COLUMNS: [&str; 6] = ["x_star", "y_star", "q_tl", "q_tr", "q_bl", "q_br"];
pub const EGF_COLUMNS: [&str; 4] = ["egf_tl_bl", "egf_tr_br", "egf_tl_tr", "egf_bl_br"];

/// Which table columns a model sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum FeatureSet {
    Gf,
    #[default]
    GfEgf,
    GfPf,
    GfEgfPf,
    Pf,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 5] = [FeatureSet::Gf, FeatureSet::GfEgf, FeatureSet::GfPf, FeatureSet::GfEgfPf, FeatureSet::Pf];

    pub fn columns(self) -> Vec<&'static str> {
        let mut c = Vec::new();
        if self != FeatureSet::Pf {
            c.extend(GF_COLUMNS);
        }
        if matches!(self, FeatureSet::GfEgf | FeatureSet::GfEgfPf) {
            c.extend(EGF_COLUMNS);
        }
        if self.uses_pf() {
            c.extend(PF_COLUMNS);
        }
        c
    }

    pub fn uses_pf(self) -> bool {
        matches!(self, FeatureSet::GfPf | FeatureSet::GfEgfPf | FeatureSet::Pf)
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureSet::Gf => "GF",
            FeatureSet::GfEgf => "GF+EGF",
            FeatureSet::GfPf => "GF+PF",
            FeatureSet::GfEgfPf => "GF+EGF+PF",
            FeatureSet::Pf => "PF",
        })
    }
}

impl FromStr for FeatureSet {
    type Err = Error;

    /// Case-insensitive; `EGF` alone means `GF+EGF`.
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_uppercase().replace(' ', "").as_str() {
            "GF" => FeatureSet::Gf,
            "GF+EGF" | "EGF" => FeatureSet::GfEgf,
            "GF+PF" => FeatureSet::GfPf,
            "GF+EGF+PF" | "EGF+PF" => FeatureSet::GfEgfPf,
            "PF" => FeatureSet::Pf,
            _ => return Err(Error::Config(format!("unknown feature set {s:?} (GF, GF+EGF, GF+PF, GF+EGF+PF, PF)"))),
        })
    }
}

/// Model inputs drawn from a feature table.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<String>,
    /// Positions of the kept rows in the source table.
    pub kept: Vec<usize>,
    /// Rows dropped because their physics fit failed.
    pub excluded: Vec<String>,
}

pub fn select(table: &[FeatureRow], fs: FeatureSet) -> Result<Selection> {
    let cols = fs.columns();
    if fs.uses_pf() && table.iter().any(|r| r.pf.is_none()) {
        return Err(Error::Config(format!("feature set {fs} needs physics-fit columns; tabularize with PF enabled")));
    }
    let mut sel = Selection {
        names: cols.iter().map(|c| c.to_string()).collect(),
        rows: Vec::new(),
        labels: Vec::new(),
        kept: Vec::new(),
        excluded: Vec::new(),
    };
    for (i, r) in table.iter().enumerate() {
        if fs.uses_pf() && !r.has_valid_pf() {
            sel.excluded.push(r.id.clone());
            continue;
        }
        sel.rows.push(cols.iter().map(|c| r.value(c).expect("known column")).collect());
        sel.labels.push(r.label.clone());
        sel.kept.push(i);
    }
    Ok(sel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::PfFeatures;

    #[test]
    fn column_sets() {
        assert_eq!(FeatureSet::Gf.columns().len(), 6);
        assert_eq!(FeatureSet::GfEgf.columns().len(), 10);
        assert_eq!(FeatureSet::GfEgfPf.columns().len(), 15);
        assert_eq!(FeatureSet::Pf.columns(), PF_COLUMNS.to_vec());
        for fs in FeatureSet::ALL {
            assert_eq!(fs.to_string().parse::<FeatureSet>().unwrap(), fs);
        }
        assert!("GF+XYZ".parse::<FeatureSet>().is_err());
    }

    #[test]
    fn failed_fits_are_excluded() {
        let ok = PfFeatures::from_array([1.0, 2.0, 3.0, 0.0, 0.5]);
        let rows = vec![
            FeatureRow::from_parts("a".into(), [1.0; 13], Some(ok), "x".into()),
            FeatureRow::from_parts("b".into(), [2.0; 13], Some(PfFeatures::NAN), "y".into()),
        ];
        let s = select(&rows, FeatureSet::GfPf).unwrap();
        assert_eq!(s.kept, vec![0]);
        assert_eq!(s.excluded, vec!["b".to_string()]);
        assert_eq!(select(&rows, FeatureSet::Gf).unwrap().kept, vec![0, 1]);
        let no_pf = vec![FeatureRow::from_parts("a".into(), [1.0; 13], None, "x".into())];
        assert!(select(&no_pf, FeatureSet::Pf).is_err());
    }
}
