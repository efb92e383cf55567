pub mod equivalence;
pub mod experiment;
pub mod error;
pub mod io;
pub mod linalg;
pub mod par;
pub mod rnn;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
