//! Unsupervised segmentation of overlapping cell cytoplasm in grayscale
//! micrographs: clump extraction by morphological minima, nucleus detection
//! by prior-weighted Otsu thresholding, and per-nucleus level-set contours.

pub mod cli;
pub mod error;
pub mod io;
pub mod levelset;
pub mod metrics;
pub mod morphology;
pub mod phantom;
pub mod pipeline;
pub mod preprocess;
pub mod raster;
pub mod thresholding;

pub use error::{Error, Result};
