//! Frame-level speech emotion diarization feeding an emotion-conditioned
//! 3D facial animation model, with the evaluation metrics for both stages.

pub mod animator;
pub mod corpus;
pub mod diarization;
pub mod error;
pub mod io;
pub mod metrics;
pub mod sed;
pub mod numeric;

pub use error::{Error, Result};
