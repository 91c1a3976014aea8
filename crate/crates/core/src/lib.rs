//! Light-field refocusing and refocused-image error losses.
//!
//! The crate is organized around [`LightField`]:
//!
//! * [`lightfield`] / [`io`]: data model, PNG ingestion, sub-lightfields;
//! * [`refocus`]: sub-pixel shifting, shift-and-add refocusing and its adjoint;
//! * [`losses`]: view-wise and refocused-image losses with analytic gradients;
//! * [`spectral`]: DFT-domain closed forms used as numerical oracles;
//! * [`metrics`]: MAE/MSE/PSNR/SSIM/GMSD and quality reports;
//! * [`synth`]: plane-sweep disparity, warping and residual optimization.

pub mod error;
pub mod fft;
pub mod io;
pub mod lightfield;
pub mod losses;
pub mod manifest;
pub mod metrics;
pub mod refocus;
pub mod spectral;
pub mod synth;
pub mod verify;

pub use error::{Error, Result};
pub use io::{load_lightfield, save_lightfield, BitDepth, DatasetLayout};
pub use lightfield::{AngularIndex, LightField, View, ViewRole, ViewSample, ViewSet};
pub use losses::{LossKind, LossSpec, LossValue, Norm, RieParams, WeightConvention};
pub use manifest::Manifest;
pub use metrics::{QualityReport, SsimParams};
pub use refocus::{Boundary, FocalStack, RefocusSpec, ShiftEngine, ShiftMode};
pub use spectral::{ErrorSpectra, SpectralFilter, SpectralIdentity};
pub use synth::{AdamParams, DisparityMap, SynthRun};
