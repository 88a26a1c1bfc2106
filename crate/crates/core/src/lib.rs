//! Interpretable image classification: Gabor quad-transform features and an
//! additive boosted model with pairwise interactions.

pub mod dataio;
pub mod ebm;
pub mod error;
pub mod features;
pub mod gabor;
pub mod harness;
pub mod par;
pub mod physfit;
pub mod synthgen;

pub use error::{Error, Result};
pub use par::Execution;
