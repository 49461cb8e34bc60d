//! Temporal action segmentation from complex-activity labels.
//!
//! A bank of action prototypes is learned by classifying whole videos into
//! their complex activity. Frames are then labeled by their most similar
//! prototype, optionally refined per activity with smoothing and ordered
//! Viterbi decoding, and scored through one-to-one Hungarian matching at
//! the video, activity or global level.

mod binio;
pub mod cli;
pub mod data;
pub mod error;
pub mod inference;
pub mod losses;
pub mod matching;
pub mod model;
pub mod numerics;
pub mod pipeline;
pub mod rng;
pub mod trainer;

pub use error::{CadError, Result};
