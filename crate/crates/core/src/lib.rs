pub mod classifier;
pub mod cli;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod groupdesc;
pub mod imageproc;
pub mod pipeline;
pub mod postproc;
pub mod simspace;
pub mod slc;
pub mod stoprule;
pub mod training;

pub use error::{Error, Result};
