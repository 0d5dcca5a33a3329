//! Band-wise EEG graph signals classified with a Chebyshev-polynomial graph
//! convolutional network.
//!
//! The pipeline: raw multichannel recordings are segmented, decomposed into
//! eight frequency bands with linear-phase FIR filters, and reduced to one
//! power or entropy value per (electrode, band) vertex. A merged band graph
//! carries these signals through spectral graph convolutions evaluated with
//! the Chebyshev recurrence, pooled over a Graclus coarsening hierarchy, and
//! classified by a fully connected head trained with Adam.

pub mod coarsen;
pub mod data;
pub mod dsp;
pub mod error;
pub mod graph;
pub mod layout;
pub mod linalg;
pub mod nn;
pub mod pipeline;

pub use error::{Error, Result};
