//! Additive boosted models: `logit P(y) = beta + sum f_i(x_i) + sum f_ij(x_i, x_j)`.

mod bins;
mod explain;
mod model;
mod ovr;
mod train;

pub use bins::{build_bins, BinMap, FeatureBins};
pub use explain::{
    explain_global, explain_model, importance_svg, pair_svg, write_svgs, ExplanationBundle, ModelExplanation,
    PairTable, ShapeTable,
};
pub use model::{load_model, logistic, save_json, save_model, EbmModel, PairTerm, TermImportance, SCHEMA_VERSION};
pub use ovr::{load_ensemble, predict_ovr, save_ensemble, train_ovr, OvrEnsemble};
pub use train::{train_binary, train_binary_traced, EbmConfig, TrainTrace};
