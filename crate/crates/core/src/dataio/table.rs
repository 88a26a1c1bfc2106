//! The feature-table CSV.
//!
//! Column order is fixed; the five physics-fit columns are either all present
//! or all absent.

use std::fs::File;
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::{FeatureRow, PfFeatures};

pub const BASE_COLUMNS: [&str; 14] = [
    "id", "sigma_x", "sigma_y", "lambda", "x_star", "y_star", "q_tl", "q_tr", "q_bl", "q_br",
    "egf_tl_bl", "egf_tr_br", "egf_tl_tr", "egf_bl_br",
];
pub const PF_COLUMNS: [&str; 5] = ["pf_amp", "pf_center", "pf_width", "pf_skew", "pf_offset"];

/// The header for a table with or without physics-fit columns.
pub fn header(with_pf: bool) -> Vec<&'static str> {
    let mut h: Vec<&str> = BASE_COLUMNS.to_vec();
    if with_pf {
        h.extend(PF_COLUMNS);
    }
    h.push("label");
    h
}

fn fmt(v: f64) -> String {
    // Display of f64 is the shortest string that parses back to the same bits.
    format!("{v}")
}

pub fn write_feature_table(rows: &[FeatureRow], path: &Path) -> Result<()> {
    let with_pf = rows.first().is_some_and(|r| r.pf.is_some());
    if rows.iter().any(|r| r.pf.is_some() != with_pf) {
        return Err(Error::Schema("rows disagree on physics-fit columns".into()));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let csv_err = |e: csv::Error| Error::Schema(format!("{}: {e}", path.display()));
    w.write_record(header(with_pf)).map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![r.id.clone()];
        rec.extend(r.numeric_base().iter().map(|&v| fmt(v)));
        if let Some(pf) = &r.pf {
            rec.extend(pf.as_array().iter().map(|&v| fmt(v)));
        }
        rec.push(r.label.clone());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_feature_table(path: &Path) -> Result<Vec<FeatureRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let hdr = r
        .headers()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?
        .clone();
    let cols: Vec<&str> = hdr.iter().collect();
    let with_pf = cols.len() == header(true).len();
    let expected = header(with_pf);
    for (i, c) in cols.iter().enumerate() {
        if expected.get(i) != Some(c) {
            let known = header(true).contains(c);
            let what = if known { "misplaced column" } else { "unknown column" };
            return Err(Error::parse(path, 1, format!("{what} {c:?} at position {}", i + 1)));
        }
    }
    if cols.len() != expected.len() {
        return Err(Error::parse(
            path,
            1,
            format!("missing column {:?}", expected[cols.len()]),
        ));
    }

    let mut rows = Vec::new();
    for (idx, rec) in r.records().enumerate() {
        let line = idx + 2;
        let rec = rec.map_err(|e| Error::parse(path, line, e.to_string()))?;
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::parse(path, line, format!("column {:?}: not a number", expected[i])))
        };
        let mut base = [0.0; 13];
        for (k, slot) in base.iter_mut().enumerate() {
            *slot = num(k + 1)?;
        }
        let pf = if with_pf {
            let mut a = [0.0; 5];
            for (k, slot) in a.iter_mut().enumerate() {
                *slot = num(14 + k)?;
            }
            Some(PfFeatures::from_array(a))
        } else {
            None
        };
        let label = rec[expected.len() - 1].to_string();
        rows.push(FeatureRow::from_parts(rec[0].to_string(), base, pf, label));
    }
    Ok(rows)
}
