//! Core building blocks for self-supervised table discovery.
//!
//! Tables are ingested into a [`corpus::TableCollection`], decomposed into
//! row-wise complete-graph triples ([`rcg`]), encoded ([`embed`]) and indexed
//! for first-stage retrieval ([`index`]). Synthetic training questions come
//! from sampled SQL ([`sqlgen`], [`qgen`]) and are turned into labeled
//! ranking examples by [`trainset`].

pub mod corpus;
pub mod embed;
pub mod error;
pub mod index;
pub mod qgen;
pub mod rcg;
pub mod sqlgen;
pub mod text;
pub mod trainset;

pub use error::{Error, Result};
