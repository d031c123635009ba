//! White-noise outlier detection for images.
//!
//! Inlier images are modelled by a multivariate normal; whitening a sample
//! with the inverse Cholesky factor of the inlier covariance yields a
//! sequence that is white noise for inliers. Outliers leave autocorrelation
//! in that sequence, which the Box-Pierce statistic picks up even when their
//! likelihood looks typical.
//!
//! Modules:
//! - [`tensor_io`]: CIFAR-10 binaries, the `OODT` tensor container, flattening.
//! - [`gaussian`]: model fitting, whitening and log-density.
//! - [`whitenoise`]: autocorrelations, lag sets, Box-Pierce statistic.
//! - [`scoring`]: likelihood and compressor baselines, score tables.
//! - [`eval`]: AUROC, bootstrap intervals, ranks, histograms, ACF profiles.
//! - [`synthetic`]: processes with known answers and calibration demos.

pub mod config;
pub mod distributions;
pub mod error;
pub mod eval;
pub mod gaussian;
mod linalg;
pub mod pipeline;
pub mod scoring;
pub mod synthetic;
pub mod tensor_io;
pub mod whitenoise;

pub use error::{Error, Result};
pub use gaussian::{fit_gaussian, GaussianModel};
pub use tensor_io::{ImageGeometry, SampleMatrix, ValueRange};
pub use whitenoise::{bp_statistic, LagSet, WnStatistic};
