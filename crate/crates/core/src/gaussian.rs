//! The linear model: a multivariate normal fitted to inlier samples.
//!
//! Whitening with the inverse Cholesky factor `A = L⁻¹` of the regularized
//! inlier covariance turns inliers into a white-noise sequence
//! `W(x) = A (x - mu)`, whose coordinates have identity covariance. The same
//! factorization gives the exact log-density used by the likelihood scores.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;
use crate::tensor_io::{Dtype, ImageGeometry, SampleMatrix, Tensor};

/// Shrinkage used when the caller does not pick one.
pub const DEFAULT_EPS: f64 = 1e-3;

const GRAM_CHUNK: usize = 512;
const WHITEN_CHUNK: usize = 256;

#[derive(Debug)]
pub struct GaussianModel {
    geometry: ImageGeometry,
    mu: Vec<f64>,
    chol: Vec<f64>,
    chol_inv: OnceLock<Vec<f64>>,
    log_det_half: f64,
    eps: f64,
    n_train: usize,
}

/// A whitened sample, `A (x - mu)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WhitenedSequence {
    pub values: Vec<f64>,
    pub geometry: ImageGeometry,
}

impl GaussianModel {
    /// Builds a model from a mean and a lower Cholesky factor (row-major).
    pub fn from_parts(
        geometry: ImageGeometry,
        mu: Vec<f64>,
        chol: Vec<f64>,
        eps: f64,
        n_train: usize,
    ) -> Result<Self> {
        let d = geometry.dim();
        if mu.len() != d || chol.len() != d * d {
            return Err(Error::Argument(format!(
                "model parts do not match dimension {d}"
            )));
        }
        let mut log_det_half = 0.0;
        for t in 0..d {
            let diag = chol[t * d + t];
            if !(diag.is_finite() && diag > 0.0) {
                return Err(Error::Numerical(format!(
                    "Cholesky factor has non-positive diagonal at {t}"
                )));
            }
            log_det_half += diag.ln();
        }
        Ok(Self {
            geometry,
            mu,
            chol,
            chol_inv: OnceLock::new(),
            log_det_half,
            eps,
            n_train,
        })
    }

    pub fn geometry(&self) -> ImageGeometry {
        self.geometry
    }

    pub fn d(&self) -> usize {
        self.geometry.dim()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// Lower Cholesky factor of the regularized covariance, row-major.
    pub fn chol(&self) -> &[f64] {
        &self.chol
    }

    /// `A = chol⁻¹`, computed on first use.
    pub fn chol_inv(&self) -> &[f64] {
        self.chol_inv
            .get_or_init(|| linalg::invert_lower(&self.chol, self.d()))
    }

    /// `Σ_t log chol[t, t]`, half the log-determinant of the covariance.
    pub fn log_det_half(&self) -> f64 {
        self.log_det_half
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    /// The regularized covariance `chol · cholᵀ`.
    pub fn covariance(&self) -> Vec<f64> {
        let d = self.d();
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..=i {
                let v = linalg::dot(
                    &self.chol[i * d..i * d + j + 1],
                    &self.chol[j * d..j * d + j + 1],
                );
                out[i * d + j] = v;
                out[j * d + i] = v;
            }
        }
        out
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d() {
            return Err(Error::Argument(format!(
                "sample has length {}, model dimension is {}",
                x.len(),
                self.d()
            )));
        }
        Ok(())
    }

    fn check_geometry(&self, m: &SampleMatrix) -> Result<()> {
        if m.d() != self.d() {
            return Err(Error::Argument(format!(
                "data dimension {} ({}) does not match model dimension {} ({})",
                m.d(),
                m.geometry(),
                self.d(),
                self.geometry
            )));
        }
        Ok(())
    }

    fn loglik_from_sq_norm(&self, sq_norm: f64) -> f64 {
        -0.5 * self.d() as f64 * (2.0 * PI).ln() - self.log_det_half - 0.5 * sq_norm
    }

    /// `A (x - mu)` by forward substitution against the Cholesky factor.
    pub fn whiten(&self, x: &[f64]) -> Result<WhitenedSequence> {
        self.check_len(x)?;
        let mut w: Vec<f64> = x.iter().zip(&self.mu).map(|(a, m)| a - m).collect();
        linalg::forward_substitute(&self.chol, self.d(), &mut w);
        Ok(WhitenedSequence {
            values: w,
            geometry: self.geometry,
        })
    }

    /// Log-density in nats.
    pub fn loglik(&self, x: &[f64]) -> Result<f64> {
        let w = self.whiten(x)?;
        Ok(self.loglik_from_sq_norm(linalg::dot(&w.values, &w.values)))
    }

    /// Whitens every row. Rows are solved in blocks, so results agree with
    /// [`GaussianModel::whiten`] up to floating-point reassociation.
    pub fn whiten_all(&self, data: &SampleMatrix) -> Result<SampleMatrix> {
        self.check_geometry(data)?;
        let d = self.d();
        let mut values: Vec<f64> = data
            .rows()
            .flat_map(|row| row.iter().zip(&self.mu).map(|(a, m)| a - m))
            .collect();
        values.par_chunks_mut(WHITEN_CHUNK * d).for_each(|chunk| {
            let rows = chunk.len() / d;
            linalg::forward_substitute_rows(&self.chol, d, chunk, rows);
        });
        SampleMatrix::new(
            data.geometry(),
            values,
            crate::tensor_io::ValueRange::UnboundedResidual,
        )
    }

    /// Log-densities of the rows of an already whitened matrix.
    pub fn loglik_whitened(&self, whitened: &SampleMatrix) -> Vec<f64> {
        whitened
            .rows()
            .map(|w| self.loglik_from_sq_norm(linalg::dot(w, w)))
            .collect()
    }

    pub fn loglik_all(&self, data: &SampleMatrix) -> Result<Vec<f64>> {
        Ok(self.loglik_whitened(&self.whiten_all(data)?))
    }

    /// Persists the model as `mu.oodt`, `chol.oodt` (f64) and `meta.txt`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let d = self.d();
        Tensor::new(Dtype::F64, vec![d], self.mu.clone())?.write(&dir.join("mu.oodt"))?;
        Tensor::new(Dtype::F64, vec![d, d], self.chol.clone())?.write(&dir.join("chol.oodt"))?;
        let meta = format!(
            "format=1\nheight={}\nwidth={}\nchannels={}\nd={}\neps={:e}\nn_train={}\nlog_det_half={:e}\n",
            self.geometry.height,
            self.geometry.width,
            self.geometry.channels,
            d,
            self.eps,
            self.n_train,
            self.log_det_half
        );
        let path = dir.join("meta.txt");
        fs::write(&path, meta).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta_path = dir.join("meta.txt");
        let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let kv = crate::config::parse_key_values(&text)?;
        let get = |key: &str| -> Result<&str> {
            kv.get(key)
                .map(String::as_str)
                .ok_or_else(|| Error::Format(format!("{}: missing {key}", meta_path.display())))
        };
        let num = |key: &str| -> Result<usize> {
            get(key)?
                .parse()
                .map_err(|_| Error::Format(format!("{}: bad {key}", meta_path.display())))
        };
        let geometry = ImageGeometry::new(num("height")?, num("width")?, num("channels")?)?;
        let eps: f64 = get("eps")?
            .parse()
            .map_err(|_| Error::Format("bad eps in model meta".into()))?;
        let n_train = num("n_train")?;
        let mu = Tensor::read(&dir.join("mu.oodt"))?;
        let chol = Tensor::read(&dir.join("chol.oodt"))?;
        let d = geometry.dim();
        if mu.shape != [d] || chol.shape != [d, d] {
            return Err(Error::Format(format!(
                "model tensors do not match dimension {d}"
            )));
        }
        Self::from_parts(geometry, mu.data, chol.data, eps, n_train)
    }
}

/// Fits mean and shrinkage-regularized covariance
/// `Σ + eps · (tr Σ / d) · I`, then factorizes it.
pub fn fit_gaussian(train: &SampleMatrix, eps: f64) -> Result<GaussianModel> {
    let n = train.n();
    let d = train.d();
    if n < 2 {
        return Err(Error::Argument(format!(
            "need at least 2 training samples, got {n}"
        )));
    }
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(Error::Argument(format!("eps must be >= 0, got {eps}")));
    }

    let mut mu = vec![0.0; d];
    for row in train.rows() {
        for (m, v) in mu.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in mu.iter_mut() {
        *m /= n as f64;
    }

    let mut cov = vec![0.0; d * d];
    let mut centered = Vec::with_capacity(GRAM_CHUNK * d);
    for start in (0..n).step_by(GRAM_CHUNK) {
        let end = (start + GRAM_CHUNK).min(n);
        centered.clear();
        for k in start..end {
            centered.extend(train.row(k).iter().zip(&mu).map(|(v, m)| v - m));
        }
        linalg::gram_lower_accumulate(&centered, end - start, d, &mut cov);
    }
    let scale = 1.0 / (n - 1) as f64;
    let mut trace = 0.0;
    for i in 0..d {
        for j in 0..=i {
            cov[i * d + j] *= scale;
        }
        trace += cov[i * d + i];
    }
    let ridge = eps * trace / d as f64;
    for i in 0..d {
        cov[i * d + i] += ridge;
    }
    log::debug!("fit_gaussian: n={n} d={d} trace={trace:e} ridge={ridge:e}");

    linalg::cholesky_in_place(&mut cov, d)?;
    GaussianModel::from_parts(train.geometry(), mu, cov, eps, n)
}
