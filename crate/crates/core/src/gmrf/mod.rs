//! Precision matrices, constraints and scaling for the built-in latent models.

mod graph;
mod model;
pub mod structure;

pub use graph::Graph;
pub use model::{ComponentModel, ComponentOptions, ModelKind};
