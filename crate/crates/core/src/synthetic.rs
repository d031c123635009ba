//! Synthetic processes with known answers: IID Gaussian noise, the circle
//! process that defeats the typicality test, stationary AR(1) sequences and
//! constants. Also the Gaussian-annulus demo and χ² null calibration.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use rayon::prelude::*;

use crate::distributions::{chi2_cdf, ks_distance};
use crate::error::{Error, Result};
use crate::tensor_io::{ImageGeometry, SampleMatrix, ValueRange};
use crate::whitenoise::{all_lags, bp_statistic};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProcessKind {
    IidGaussian,
    /// `(T₁, T₂)` uniform on the circle of radius √2, then `T_j = T_{j-2}`.
    Circle,
    /// `x_t = φ x_{t-lag} + ε_t`, `ε_t ~ N(0, innovation_sd²)`, started from the
    /// stationary marginal.
    Ar1 {
        phi: f64,
        lag: usize,
        innovation_sd: f64,
    },
    Constant(f64),
}

impl ProcessKind {
    /// Lag-1 AR with unit innovations.
    pub fn ar1(phi: f64) -> Self {
        ProcessKind::Ar1 {
            phi,
            lag: 1,
            innovation_sd: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcessSpec {
    pub kind: ProcessKind,
    pub d: usize,
    pub seed: u64,
}

impl ProcessSpec {
    pub fn new(kind: ProcessKind, d: usize, seed: u64) -> Self {
        Self { kind, d, seed }
    }

    fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::Argument("process dimension must be positive".into()));
        }
        match self.kind {
            ProcessKind::Circle if self.d < 4 || !self.d.is_multiple_of(2) => Err(Error::Argument(
                format!("circle process needs an even d >= 4, got {}", self.d),
            )),
            ProcessKind::Ar1 {
                phi,
                lag,
                innovation_sd,
            } => {
                if phi.is_nan() || phi.abs() >= 1.0 {
                    return Err(Error::Argument(format!(
                        "AR coefficient must satisfy |phi| < 1, got {phi}"
                    )));
                }
                if lag == 0 || lag >= self.d {
                    return Err(Error::Argument(format!("AR lag {lag} out of range")));
                }
                if !(innovation_sd.is_finite() && innovation_sd > 0.0) {
                    return Err(Error::Argument(format!(
                        "innovation sd must be positive, got {innovation_sd}"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

fn fill_row(kind: ProcessKind, rng: &mut ChaCha8Rng, row: &mut [f64]) {
    match kind {
        ProcessKind::IidGaussian => {
            for v in row.iter_mut() {
                *v = StandardNormal.sample(rng);
            }
        }
        ProcessKind::Circle => {
            let theta: f64 = Uniform::new(0.0, std::f64::consts::TAU)
                .expect("valid range")
                .sample(rng);
            let r = std::f64::consts::SQRT_2;
            let (t1, t2) = (r * theta.cos(), r * theta.sin());
            for (j, v) in row.iter_mut().enumerate() {
                *v = if j % 2 == 0 { t1 } else { t2 };
            }
        }
        ProcessKind::Ar1 {
            phi,
            lag,
            innovation_sd,
        } => {
            let stationary_sd = innovation_sd / (1.0 - phi * phi).sqrt();
            for t in 0..row.len() {
                let z: f64 = StandardNormal.sample(rng);
                row[t] = if t < lag {
                    stationary_sd * z
                } else {
                    phi * row[t - lag] + innovation_sd * z
                };
            }
        }
        ProcessKind::Constant(c) => row.fill(c),
    }
}

/// Draws `n` rows of the process. Identical specs give identical matrices.
pub fn sample_process(spec: &ProcessSpec, n: usize) -> Result<SampleMatrix> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut values = vec![0.0; n * spec.d];
    for row in values.chunks_exact_mut(spec.d) {
        fill_row(spec.kind, &mut rng, row);
    }
    SampleMatrix::new(
        ImageGeometry::sequence(spec.d),
        values,
        ValueRange::UnboundedResidual,
    )
}

/// `(1/d) Σ T_i²`, the quantity a typicality test checks against 1.
pub fn typicality_stat(seq: &[f64]) -> Result<f64> {
    if seq.is_empty() {
        return Err(Error::Argument("typicality of an empty sequence".into()));
    }
    Ok(seq.iter().map(|v| v * v).sum::<f64>() / seq.len() as f64)
}

/// Innovation sd that places a lag-1 AR(`phi_out`) outlier on the inlier
/// typical set: its expected Mahalanobis distance under the exact precision
/// of a unit-innovation AR(`phi_in`) equals `d`, the inlier expectation.
pub fn typical_set_matched_sd(d: usize, phi_in: f64, phi_out: f64) -> f64 {
    let df = d as f64;
    // tr(P_in Σ_out) = v [2 + (d-2)(1+φ_in²) - 2(d-1) φ_in φ_out]
    let per_unit_variance =
        2.0 + (df - 2.0) * (1.0 + phi_in * phi_in) - 2.0 * (df - 1.0) * phi_in * phi_out;
    let marginal_var = df / per_unit_variance;
    (marginal_var * (1.0 - phi_out * phi_out)).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypicalityReport {
    pub d: usize,
    pub n: usize,
    pub mean_norm: f64,
    pub std_norm: f64,
    /// `log p(0) - mean log p(x) = mean ‖x‖² / 2`.
    pub log_density_gap: f64,
    /// `d / 2`.
    pub target_gap: f64,
}

/// Samples `x ~ N(0, I_d)` and reports how far they sit from the mode.
pub fn typicality_demo(d: usize, n: usize, seed: u64) -> Result<TypicalityReport> {
    if d == 0 || n < 2 {
        return Err(Error::Argument(format!(
            "typicality demo needs d >= 1 and n >= 2, got d={d}, n={n}"
        )));
    }
    let data = sample_process(&ProcessSpec::new(ProcessKind::IidGaussian, d, seed), n)?;
    let sq: Vec<f64> = data.rows().map(|r| r.iter().map(|v| v * v).sum()).collect();
    let norms: Vec<f64> = sq.iter().map(|s| s.sqrt()).collect();
    let mean_norm = norms.iter().sum::<f64>() / n as f64;
    let var = norms
        .iter()
        .map(|v| (v - mean_norm) * (v - mean_norm))
        .sum::<f64>()
        / (n - 1) as f64;
    Ok(TypicalityReport {
        d,
        n,
        mean_norm,
        std_norm: var.sqrt(),
        log_density_gap: sq.iter().sum::<f64>() / n as f64 / 2.0,
        target_gap: d as f64 / 2.0,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NullCalibration {
    pub d: usize,
    pub k: usize,
    pub trials: usize,
    pub ks: f64,
    pub mean_q_over_k: f64,
    pub q: Vec<f64>,
}

/// Box-Pierce statistics of IID Gaussian sequences over lags `1..=k`, compared
/// with χ²_k by the Kolmogorov–Smirnov distance.
pub fn null_calibration(d: usize, k: usize, trials: usize, seed: u64) -> Result<NullCalibration> {
    if trials < 1000 {
        return Err(Error::Argument(format!(
            "null calibration needs at least 1000 trials, got {trials}"
        )));
    }
    let lags = all_lags(k, d)?;
    let q: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t);
            let seq: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            bp_statistic(&seq, &lags).map(|s| s.q_bp)
        })
        .collect::<Result<_>>()?;
    let ks = ks_distance(&q, |x| chi2_cdf(x, k as f64))?;
    let mean_q_over_k = q.iter().sum::<f64>() / trials as f64 / k as f64;
    Ok(NullCalibration {
        d,
        k,
        trials,
        ks,
        mean_q_over_k,
        q,
    })
}
