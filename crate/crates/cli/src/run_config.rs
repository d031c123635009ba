//! Run configuration: a `key = value` file merged with command-line overrides.
//!
//! Recognized keys:
//!
//! ```text
//! inlier_train = a.bin, b.bin      # CIFAR-10 binaries or .oodt containers
//! inlier_test = test.oodt
//! outlier.<setting> = svhn.oodt    # one key per named outlier setting
//! loglik.<role> = ll.oodt          # imported per-sample log-likelihoods (n,)
//! residual.<role> = res.oodt       # imported residual sequences (n,d)
//! residual_whiten = false          # fit/whiten the imported residuals
//! geometry = 32x32x3               # reinterpret every loaded matrix
//! unit_scale = true                # divide raw bytes by 255 before fitting
//! eps = 0.001
//! lags = vertical | all
//! L = 1200
//! tests = wn, lh, lh2s, lr
//! seed = 0
//! out = results
//! model_dir = results/model
//! bootstrap_trials = 1000
//! histogram_bins = 50
//! ```
//!
//! `<role>` is `inlier_train`, `inlier_test` or an outlier setting name.
//! Relative paths resolve against the working directory.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use wnood_core::config::parse_key_values;
use wnood_core::gaussian::DEFAULT_EPS;
use wnood_core::scoring::TestKind;
use wnood_core::whitenoise::{all_lags, vertical_lags, DEFAULT_MAX_LAG};
use wnood_core::{Error, ImageGeometry, LagSet, Result};

pub const INLIER_TRAIN: &str = "inlier_train";
pub const INLIER_TEST: &str = "inlier_test";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum LagMode {
    Vertical,
    All,
}

impl LagMode {
    pub fn lag_set(self, geometry: ImageGeometry, max_lag: usize) -> Result<LagSet> {
        let lags = match self {
            LagMode::Vertical => vertical_lags(geometry, max_lag),
            LagMode::All => all_lags(max_lag, geometry.dim()),
        };
        lags.map_err(|e| Error::Config(format!("lag set for {geometry}: {e}")))
    }
}

impl fmt::Display for LagMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LagMode::Vertical => "vertical",
            LagMode::All => "all",
        })
    }
}

impl FromStr for LagMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vertical" => Ok(LagMode::Vertical),
            "all" => Ok(LagMode::All),
            other => Err(Error::Config(format!(
                "lags must be `vertical` or `all`, got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub inlier_train: Vec<PathBuf>,
    pub inlier_test: Vec<PathBuf>,
    pub outliers: BTreeMap<String, Vec<PathBuf>>,
    pub loglik: BTreeMap<String, PathBuf>,
    pub residual: BTreeMap<String, PathBuf>,
    pub residual_whiten: bool,
    pub geometry: Option<ImageGeometry>,
    pub unit_scale: bool,
    pub eps: f64,
    pub lag_mode: LagMode,
    pub max_lag: usize,
    pub tests: Vec<TestKind>,
    pub seed: u64,
    pub out: PathBuf,
    pub model_dir: PathBuf,
    pub bootstrap_trials: usize,
    pub histogram_bins: usize,
}

fn paths(value: &str) -> Vec<PathBuf> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(PathBuf::from)
        .collect()
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!(
            "{key}: expected true or false, got {value:?}"
        ))),
    }
}

pub fn parse_tests(value: &str) -> Result<Vec<TestKind>> {
    let mut tests = Vec::new();
    for name in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let t: TestKind = name.parse()?;
        if !tests.contains(&t) {
            tests.push(t);
        }
    }
    if tests.is_empty() {
        return Err(Error::Config("test list is empty".into()));
    }
    Ok(tests)
}

fn valid_setting_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl RunConfig {
    /// Reads the optional config file and applies `overrides` on top.
    pub fn load(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut map = match file {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::Io {
                    path: path.to_path_buf(),
                    source: e,
                })?;
                parse_key_values(&text)?
            }
            None => BTreeMap::new(),
        };
        for (k, v) in overrides {
            map.insert(k.clone(), v.clone());
        }
        Self::from_map(&map)
    }

    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        let mut cfg = RunConfig {
            inlier_train: Vec::new(),
            inlier_test: Vec::new(),
            outliers: BTreeMap::new(),
            loglik: BTreeMap::new(),
            residual: BTreeMap::new(),
            residual_whiten: false,
            geometry: None,
            unit_scale: true,
            eps: DEFAULT_EPS,
            lag_mode: LagMode::Vertical,
            max_lag: DEFAULT_MAX_LAG,
            tests: vec![TestKind::Wn, TestKind::Lh, TestKind::Lh2s],
            seed: 0,
            out: PathBuf::from("wnood-out"),
            model_dir: PathBuf::new(),
            bootstrap_trials: 1000,
            histogram_bins: 50,
        };
        let mut model_dir = None;
        for (key, value) in map {
            let value = value.as_str();
            match key.as_str() {
                "inlier_train" => cfg.inlier_train = paths(value),
                "inlier_test" => cfg.inlier_test = paths(value),
                "residual_whiten" => cfg.residual_whiten = parse_bool(key, value)?,
                "geometry" => cfg.geometry = Some(parse(key, value)?),
                "unit_scale" => cfg.unit_scale = parse_bool(key, value)?,
                "eps" => cfg.eps = parse(key, value)?,
                "lags" => cfg.lag_mode = value.parse()?,
                "L" => cfg.max_lag = parse(key, value)?,
                "tests" => cfg.tests = parse_tests(value)?,
                "seed" => cfg.seed = parse(key, value)?,
                "out" => cfg.out = PathBuf::from(value),
                "model_dir" => model_dir = Some(PathBuf::from(value)),
                "bootstrap_trials" => cfg.bootstrap_trials = parse(key, value)?,
                "histogram_bins" => cfg.histogram_bins = parse(key, value)?,
                other => {
                    let (prefix, name) = other
                        .split_once('.')
                        .ok_or_else(|| Error::Config(format!("unknown config key {other:?}")))?;
                    if !valid_setting_name(name) {
                        return Err(Error::Config(format!(
                            "{other}: names may use letters, digits, '-' and '_'"
                        )));
                    }
                    match prefix {
                        "outlier" => {
                            if name == INLIER_TRAIN || name == INLIER_TEST {
                                return Err(Error::Config(format!(
                                    "{other}: setting name is reserved"
                                )));
                            }
                            cfg.outliers.insert(name.to_string(), paths(value));
                        }
                        "loglik" => {
                            cfg.loglik.insert(name.to_string(), PathBuf::from(value));
                        }
                        "residual" => {
                            cfg.residual.insert(name.to_string(), PathBuf::from(value));
                        }
                        _ => return Err(Error::Config(format!("unknown config key {other:?}"))),
                    }
                }
            }
        }
        if !(cfg.eps.is_finite() && cfg.eps >= 0.0) {
            return Err(Error::Config(format!("eps must be >= 0, got {}", cfg.eps)));
        }
        if cfg.max_lag == 0 {
            return Err(Error::Config("L must be positive".into()));
        }
        if cfg.bootstrap_trials < 200 {
            return Err(Error::Config(format!(
                "bootstrap_trials must be >= 200, got {}",
                cfg.bootstrap_trials
            )));
        }
        for role in cfg.loglik.keys().chain(cfg.residual.keys()) {
            if role != INLIER_TRAIN && role != INLIER_TEST && !cfg.outliers.contains_key(role) {
                return Err(Error::Config(format!(
                    "imported data for {role:?}, which is neither an inlier role nor an outlier setting"
                )));
            }
        }
        cfg.model_dir = model_dir.unwrap_or_else(|| cfg.out.join("model"));
        Ok(cfg)
    }

    pub fn settings(&self) -> Vec<&str> {
        self.outliers.keys().map(String::as_str).collect()
    }

    pub fn image_paths(&self, role: &str) -> &[PathBuf] {
        match role {
            INLIER_TRAIN => &self.inlier_train,
            INLIER_TEST => &self.inlier_test,
            other => self.outliers.get(other).map(Vec::as_slice).unwrap_or(&[]),
        }
    }

    pub fn scores_dir(&self) -> PathBuf {
        self.out.join("scores")
    }

    pub fn tests_string(&self) -> String {
        self.tests
            .iter()
            .map(|t| t.as_str())
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Every effective value, normalized, for report provenance.
    pub fn effective(&self) -> BTreeMap<String, String> {
        let join = |p: &[PathBuf]| {
            p.iter()
                .map(|x| x.display().to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut m = BTreeMap::new();
        m.insert("inlier_train".into(), join(&self.inlier_train));
        m.insert("inlier_test".into(), join(&self.inlier_test));
        for (k, v) in &self.outliers {
            m.insert(format!("outlier.{k}"), join(v));
        }
        for (k, v) in &self.loglik {
            m.insert(format!("loglik.{k}"), v.display().to_string());
        }
        for (k, v) in &self.residual {
            m.insert(format!("residual.{k}"), v.display().to_string());
        }
        m.insert("residual_whiten".into(), self.residual_whiten.to_string());
        m.insert(
            "geometry".into(),
            self.geometry.map_or("from-data".into(), |g| g.to_string()),
        );
        m.insert("unit_scale".into(), self.unit_scale.to_string());
        m.insert("eps".into(), format!("{:?}", self.eps));
        m.insert("lags".into(), self.lag_mode.to_string());
        m.insert("L".into(), self.max_lag.to_string());
        m.insert("tests".into(), self.tests_string());
        m.insert("seed".into(), self.seed.to_string());
        m.insert("out".into(), self.out.display().to_string());
        m.insert("model_dir".into(), self.model_dir.display().to_string());
        m.insert("bootstrap_trials".into(), self.bootstrap_trials.to_string());
        m.insert("histogram_bins".into(), self.histogram_bins.to_string());
        m
    }
}
