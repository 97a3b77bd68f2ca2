//! Gaze generation from head directions and full-body motion, together with
//! the statistics used to study eye-body coordination.
//!
//! * [`ndops`] – tensors, a reverse-mode tape, DCT and Adam.
//! * [`motiondata`] – skeletons, recordings, file I/O, windowing and a
//!   synthetic recording generator.
//! * [`coordination`] – cosine tables, lag sweeps, gaze-in-head fields,
//!   clustering and rank correlation.
//! * [`model`] – the gaze network and its checkpoint format.
//! * [`trainer`] – loss, training schedule, evaluation, baselines and
//!   ablations.
//! * [`cli`] – the `pose2gaze` command-line driver.

pub mod cli;
pub mod coordination;
pub mod error;
pub mod fsutil;
pub mod model;
pub mod motiondata;
pub mod ndops;
pub mod trainer;

pub use error::{Error, Result};
