pub mod data;
pub mod datasets;
pub mod design;
pub mod engine;
pub mod error;
pub mod families;
pub mod gmrf;
mod interp;
pub mod marginals;
pub mod oracle;
pub mod priors;
pub mod report;
pub mod sampler;
pub mod sparse;
pub mod spec;
pub mod util;

pub use error::{Error, Result};
