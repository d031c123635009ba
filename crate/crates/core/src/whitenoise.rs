//! Box-Pierce white-noise test on residual sequences.
//!
//! A test sequence is standardized, its sample autocorrelations `ρ̂_l` are
//! computed on a chosen lag set, and `Q = d · Σ ρ̂_l²` is the outlier score.
//! Under an IID null, `Q` is approximately χ² with one degree of freedom per
//! lag.

use std::fmt;

use rayon::prelude::*;

use crate::distributions::chi2_sf;
use crate::error::{Error, Result};
use crate::tensor_io::{ImageGeometry, SampleMatrix};

/// Default maximum lag for image data.
pub const DEFAULT_MAX_LAG: usize = 1200;

/// Ordered, strictly increasing set of positive lags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LagSet {
    lags: Vec<usize>,
    max_lag: usize,
}

impl LagSet {
    pub fn new(mut lags: Vec<usize>, max_lag: usize) -> Result<Self> {
        lags.sort_unstable();
        lags.dedup();
        if lags.is_empty() {
            return Err(Error::Argument("lag set is empty".into()));
        }
        if lags[0] == 0 {
            return Err(Error::Argument("lags must be positive".into()));
        }
        Ok(Self { lags, max_lag })
    }

    pub fn lags(&self) -> &[usize] {
        &self.lags
    }

    pub fn len(&self) -> usize {
        self.lags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lags.is_empty()
    }

    /// The `L` this set was built from.
    pub fn max_lag(&self) -> usize {
        self.max_lag
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        let top = *self.lags.last().expect("nonempty");
        if top >= d {
            return Err(Error::Argument(format!(
                "lag {top} is not below the sequence length {d}"
            )));
        }
        Ok(())
    }
}

impl fmt::Display for LagSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.lags.iter().map(|l| l.to_string()).collect();
        write!(f, "{}", parts.join(" "))
    }
}

/// Lags aligned with vertical neighbours in a channel-last flattening:
/// every multiple of `C · Wd` up to `L`.
pub fn vertical_lags(geometry: ImageGeometry, max_lag: usize) -> Result<LagSet> {
    let stride = geometry.row_stride();
    if max_lag < stride {
        return Err(Error::Argument(format!(
            "L={max_lag} is below the vertical stride {stride} of {geometry}"
        )));
    }
    LagSet::new(
        (1..=max_lag / stride).map(|m| m * stride).collect(),
        max_lag,
    )
}

/// `{1, ..., L}` for a sequence of length `d`.
pub fn all_lags(max_lag: usize, d: usize) -> Result<LagSet> {
    if max_lag < 1 || max_lag >= d {
        return Err(Error::Argument(format!(
            "L must satisfy 1 <= L < d={d}, got {max_lag}"
        )));
    }
    LagSet::new((1..=max_lag).collect(), max_lag)
}

/// Rescales to sample mean 0 and variance 1 (divisor `d`).
pub fn standardize(seq: &[f64]) -> Result<Vec<f64>> {
    if seq.is_empty() {
        return Err(Error::DegenerateSequence);
    }
    let d = seq.len() as f64;
    let mean = seq.iter().sum::<f64>() / d;
    let var = seq.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
    // variance at the rounding floor of the inputs counts as zero
    let max_abs = seq.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = 16.0 * f64::EPSILON * max_abs;
    if !(var.is_finite() && var > floor * floor) {
        return Err(Error::DegenerateSequence);
    }
    let sd = var.sqrt();
    let mut out: Vec<f64> = seq.iter().map(|v| (v - mean) / sd).collect();
    // second pass removes the rounding left in the mean by the first
    let resid = out.iter().sum::<f64>() / d;
    out.iter_mut().for_each(|v| *v -= resid);
    Ok(out)
}

/// `ρ̂_l = (1 / (d - l)) Σ_{t < d - l} T_t T_{t+l}` on a standardized sequence.
pub fn acf(seq: &[f64], lag: usize) -> Result<f64> {
    let d = seq.len();
    if lag == 0 || lag >= d {
        return Err(Error::Argument(format!(
            "lag must satisfy 1 <= l < d={d}, got {lag}"
        )));
    }
    Ok(acf_unchecked(seq, lag))
}

#[inline]
fn acf_unchecked(seq: &[f64], lag: usize) -> f64 {
    let n = seq.len() - lag;
    crate::linalg::dot(&seq[..n], &seq[lag..]) / n as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct WnStatistic {
    pub q_bp: f64,
    /// Number of lags.
    pub k: usize,
    /// `ρ̂_l` in lag-set order.
    pub rho: Vec<f64>,
    pub p_value: f64,
}

/// Box-Pierce statistic of `seq` over `lags`, with its χ²_k tail probability.
pub fn bp_statistic(seq: &[f64], lags: &LagSet) -> Result<WnStatistic> {
    lags.check_dim(seq.len())?;
    let t = standardize(seq)?;
    let rho: Vec<f64> = lags.lags().iter().map(|&l| acf_unchecked(&t, l)).collect();
    let q_bp = t.len() as f64 * rho.iter().map(|r| r * r).sum::<f64>();
    let p_value = chi2_sf(q_bp, lags.len() as f64)?;
    Ok(WnStatistic {
        q_bp,
        k: lags.len(),
        rho,
        p_value,
    })
}

/// Outlier score: `Q_BP`, or `+inf` for a constant sequence.
pub fn wn_score(seq: &[f64], lags: &LagSet) -> Result<f64> {
    match bp_statistic(seq, lags) {
        Ok(s) => Ok(s.q_bp),
        Err(Error::DegenerateSequence) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

/// [`wn_score`] for every row, in row order.
pub fn wn_scores(data: &SampleMatrix, lags: &LagSet) -> Result<Vec<f64>> {
    lags.check_dim(data.d())?;
    data.values()
        .par_chunks_exact(data.d())
        .map(|row| wn_score(row, lags))
        .collect()
}

/// Empirical `(1 - target_fpr)`-quantile of inlier statistics, linearly
/// interpolated between order statistics.
pub fn calibrate_threshold(inlier_stats: &[f64], target_fpr: f64) -> Result<f64> {
    if inlier_stats.is_empty() {
        return Err(Error::Argument("no inlier statistics".into()));
    }
    if !(target_fpr > 0.0 && target_fpr < 1.0) {
        return Err(Error::Argument(format!(
            "target false-positive rate must lie in (0, 1), got {target_fpr}"
        )));
    }
    let mut sorted = inlier_stats.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * (1.0 - target_fpr);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - lo as f64;
    if frac == 0.0 || sorted[lo] == sorted[hi] {
        return Ok(sorted[lo]);
    }
    Ok(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}
