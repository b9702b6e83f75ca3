//! Neural gas segmentation and feature extraction with firefly contrast
//! enhancement, classical baselines, an SMO-trained SVM and evaluation tools.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod firefly;
pub mod image;
pub mod ngn;
pub mod segment;
pub mod svm;
pub mod synth;

pub use error::{Error, Result};
