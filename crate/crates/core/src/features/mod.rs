//! Gabor quad transform: parameter search, response maximum, quadrant norms.

mod grid;
mod integral;
mod optimize;
mod roi;
mod tabularize;

pub use grid::ParamGrid;
pub use integral::{integral_image, IntegralImage};
pub(crate) use optimize::search;
pub use optimize::{grid_optimize, optimize, two_step_optimize, Optimum, ResponseEvaluator, SearchMode};
pub use roi::{engineered_features, half_extent_px, locate_center, quad_responses, QuadResponses, DEFAULT_EPSILON};
pub use tabularize::{tabularize, transform_image, FeatureRow, PfFeatures, TabularizeConfig, Tabulated};
