//! Feature-set selection, repeated stratified cross-validation, metrics.

mod config;
mod cv;
mod featureset;
mod folds;
mod metrics;

pub use config::{load_config, parse_config};
pub use cv::{fit_full, format_mean_sigma, run_cv, CellResult, CvConfig, CvReport, Stat};
pub use featureset::{select, FeatureSet, Selection, EGF_COLUMNS, GF_COLUMNS};
pub use folds::{stratified_kfold, FoldSplit};
pub use metrics::{metrics, Confusion, Metrics};
