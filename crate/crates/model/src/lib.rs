//! Second-stage table relevance model.
//!
//! A question and each retrieved triple form a feature vector. Triples are
//! projected into a triple space and a table space; table-space vectors are
//! max-pooled per table and scored together with the triple-space vector.
//! [`relevance`] holds the model and its maximum-likelihood trainer,
//! [`bayes`] the mean-field variational trainer with chained priors.

pub mod bayes;
pub mod checkpoint;
mod error;
pub mod relevance;
pub mod stopping;

pub use error::{Error, Result};
