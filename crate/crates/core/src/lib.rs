//! Word storms: coordinated sets of word clouds, one per document or
//! document group, in which every word shared between clouds keeps the same
//! color, orientation and (approximately) the same position.
//!
//! The crate is organised as a pipeline:
//!
//! * [`corpus`] ingests documents and computes term statistics,
//! * [`style`] assigns storm-wide colors, transparency, orientation and sizes,
//! * [`geometry`] measures words and answers collision queries,
//! * [`layout`] runs the spiral, iterative and combined placement algorithms,
//! * [`optimizer`] minimises the penalized stress objective,
//! * [`render`] emits SVG and box-ink rasters and measures compactness,
//! * [`eval`] classifies documents from their cloud pixels.
//!
//! [`pipeline`] ties the stages together for a [`config::RunConfig`].

// `!(x > 0.0)` style checks reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod fixtures;
pub mod geometry;
pub mod layout;
pub mod optimizer;
pub mod pipeline;
pub mod render;
pub mod rng;
pub mod style;

pub use error::{Error, Result};
