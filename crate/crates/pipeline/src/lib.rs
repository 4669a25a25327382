//! Question-driven table discovery: the staged offline build, the online
//! query engine, evaluation, timing and the HTTP service.
//!
//! Offline, tables are decomposed into triples, encoded and indexed;
//! synthetic questions sampled from SQL are answered by first-stage
//! retrieval to collect labeled training data, and a relevance model is
//! trained on it incrementally. Online, a question is retrieved against the
//! index and the retrieved tables are re-ranked by the model.

pub mod artifacts;
pub mod build;
pub mod config;
pub mod engine;
mod error;
pub mod eval;
pub mod features;
pub mod layout;
pub mod server;
pub mod synth;
pub mod timing;

pub use artifacts::Stage;
pub use build::Pipeline;
pub use config::PipelineConfig;
pub use engine::Engine;
pub use error::{Error, Result};
