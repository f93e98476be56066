//! Experiment harness: score matrices, error rates, curves and rater agreement.

mod experiment;
mod kappa;
mod rates;
mod scores;

pub use experiment::*;
pub use kappa::*;
pub use rates::*;
pub use scores::*;
