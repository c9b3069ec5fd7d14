pub mod dsp;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod geometry;
pub mod graph;
pub mod pipeline;
pub mod roi_optimize;
pub mod rppg;
pub mod synth;
pub mod trace_io;

pub use error::{Error, Result};
