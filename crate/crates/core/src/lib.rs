//! Part-based quantitative analysis of heatmaps (PQAH).
//!
//! Scores how well a classifier heatmap covers each annotated part of the
//! object in an image, then aggregates the per-part scores into quartile
//! statistics, boxplots and report payloads.

pub mod aggregate;
pub mod cli;
pub mod error;
pub mod grid;
pub mod io;
pub mod metric;
pub mod pipeline;
pub mod plot;
pub mod regions;
pub mod report;

pub use error::{Error, LlmError, Result};
pub use grid::{BinaryGrid, BinaryMap};
pub use io::{Heatmap, ImageEntry, Manifest, PartMaskSet};
pub use metric::{PHRecord, BACKGROUND};
