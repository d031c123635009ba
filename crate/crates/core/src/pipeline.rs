//! Shared scoring path for the linear model: whiten once, then derive the
//! white-noise statistic and the log-density from the same residuals.

use crate::error::Result;
use crate::gaussian::GaussianModel;
use crate::tensor_io::SampleMatrix;
use crate::whitenoise::{wn_scores, LagSet};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearStatistics {
    /// `Q_BP` of the whitened rows (`+inf` for degenerate rows).
    pub wn: Vec<f64>,
    /// Gaussian log-density in nats.
    pub loglik: Vec<f64>,
}

pub fn linear_statistics(
    model: &GaussianModel,
    data: &SampleMatrix,
    lags: &LagSet,
) -> Result<LinearStatistics> {
    let whitened = model.whiten_all(data)?;
    Ok(LinearStatistics {
        wn: wn_scores(&whitened, lags)?,
        loglik: model.loglik_whitened(&whitened),
    })
}

/// Converts a density on pixels scaled by 1/255 into the log-probability of
/// the 8-bit image: each coordinate's bin has width 1/255.
pub fn discretized_loglik(unit_loglik: f64, d: usize) -> f64 {
    unit_loglik - d as f64 * 255f64.ln()
}
