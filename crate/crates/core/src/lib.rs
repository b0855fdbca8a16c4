//! Multi-object tracking toolkit.
//!
//! The pipeline segments a sequence into key-frame segments with a tabular
//! Q-learning agent ([`kfe`]), fuses each detection's appearance feature with
//! its spatial neighbours inside the frame ([`iff`]), links detections into
//! tracklets and merges them hierarchically with a focal-loss trained edge
//! scorer ([`assoc`]), and evaluates the result with HOTA, CLEAR and identity
//! metrics ([`metrics`]). [`synth`] produces seeded scenarios with ground truth
//! and [`cli`] wires everything into the `kfmot` binary.

pub mod assignment;
pub mod assoc;
pub mod cli;
pub mod data_io;
pub mod error;
pub mod iff;
pub mod kfe;
pub mod metrics;
pub mod synth;

pub use error::{Error, Result};
