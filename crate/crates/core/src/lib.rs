//! Local post-hoc explainers (LIME, Kernel SHAP, exact Shapley values) and
//! the adversarial scaffolding that hides a biased classifier from them.

pub mod adversarial;
pub mod data;
pub mod ensemble;
pub mod error;
pub mod experiments;
pub mod explainers;
pub mod linalg;
pub mod model;
pub mod models;
pub mod perturb;
pub mod seed;

pub use error::{Error, Result};
