//! Neural models that jointly predict natural-language-inference labels and
//! generate free-form explanations, together with corpus tooling, template
//! filtering, annotation validators, and evaluation metrics.

pub mod autodiff;
pub mod error;

pub use error::{Error, Result};
pub mod evaluation;
pub mod model;
pub mod quality;
pub mod seed;
pub mod text;
pub mod training;
