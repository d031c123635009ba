use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use wnood_core::eval::{auroc, auroc_ci, histogram_intersection, EvalCell, EvalReport};
use wnood_core::gaussian::{fit_gaussian, GaussianModel};
use wnood_core::pipeline::discretized_loglik;
use wnood_core::scoring::{
    complexity_bits_all, lh2s_score, lh_score, lr_score, median, SampleLabel, ScoreTable, TestKind,
    COMPRESSOR_SETTINGS,
};
use wnood_core::synthetic::{
    null_calibration, sample_process, typicality_demo, typicality_stat, ProcessKind, ProcessSpec,
};
use wnood_core::tensor_io::{read_cifar10_bin, read_container, read_vector};
use wnood_core::whitenoise::{all_lags, bp_statistic, wn_scores};
use wnood_core::{Error, ImageGeometry, LagSet, Result, SampleMatrix, ValueRange};

use crate::run_config::{RunConfig, INLIER_TEST, INLIER_TRAIN};

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::Io {
            path: parent.to_path_buf(),
            source: e,
        })?;
    }
    fs::write(path, contents).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn metadata_text(m: &BTreeMap<String, String>) -> String {
    m.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

/// Loads CIFAR-10 binaries (`.bin`) or `.oodt` containers and concatenates
/// them in order.
fn load_images(paths: &[PathBuf], geometry: Option<ImageGeometry>) -> Result<SampleMatrix> {
    if paths.is_empty() {
        return Err(Error::Config("no data paths given".into()));
    }
    let is_bin = |p: &PathBuf| p.extension().is_some_and(|e| e == "bin");
    let m = if paths.iter().all(is_bin) {
        read_cifar10_bin(paths)?
    } else if paths.iter().any(is_bin) {
        return Err(Error::Config(
            "cannot mix CIFAR-10 binaries with containers in one dataset".into(),
        ));
    } else {
        let parts = paths
            .iter()
            .map(|p| read_container(p))
            .collect::<Result<Vec<_>>>()?;
        SampleMatrix::concat(&parts).map_err(|e| Error::Format(e.to_string()))?
    };
    match geometry {
        Some(g) => m
            .with_geometry(g)
            .map_err(|e| Error::Config(format!("geometry key: {e}"))),
        None => Ok(m),
    }
}

/// Per-role data sources, loaded lazily.
struct Role<'a> {
    cfg: &'a RunConfig,
    name: &'a str,
}

impl<'a> Role<'a> {
    fn new(cfg: &'a RunConfig, name: &'a str) -> Self {
        Self { cfg, name }
    }

    fn images(&self) -> Result<SampleMatrix> {
        let paths = self.cfg.image_paths(self.name);
        if paths.is_empty() {
            return Err(Error::Config(format!("no image paths for {}", self.name)));
        }
        load_images(paths, self.cfg.geometry)
    }

    fn residuals(&self) -> Option<Result<SampleMatrix>> {
        self.cfg
            .residual
            .get(self.name)
            .map(|p| load_images(std::slice::from_ref(p), self.cfg.geometry))
    }

    fn imported_loglik(&self) -> Option<Result<Vec<f64>>> {
        self.cfg.loglik.get(self.name).map(|p| read_vector(p))
    }

    /// Input of the linear Gaussian model for this role.
    fn linear_input(&self) -> Result<SampleMatrix> {
        if self.cfg.residual_whiten {
            return self.residuals().unwrap_or_else(|| {
                Err(Error::Config(format!(
                    "residual_whiten is set but residual.{} is missing",
                    self.name
                )))
            });
        }
        let m = self.images()?;
        Ok(if self.cfg.unit_scale { m.to_unit() } else { m })
    }
}

fn check_model(model: &GaussianModel, data: &SampleMatrix, role: &str) -> Result<()> {
    if model.geometry() != data.geometry() {
        return Err(Error::Config(format!(
            "{role} has geometry {} but the model was fitted on {}",
            data.geometry(),
            model.geometry()
        )));
    }
    Ok(())
}

fn check_len(what: &str, role: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Format(format!(
            "{what} for {role} has {got} entries, expected {want}"
        )));
    }
    Ok(())
}

pub fn cmd_fit(cfg: &RunConfig) -> Result<PathBuf> {
    let train = Role::new(cfg, INLIER_TRAIN).linear_input()?;
    info!(
        "fitting on {} samples of dimension {}",
        train.n(),
        train.d()
    );
    let model = fit_gaussian(&train, cfg.eps)?;
    model.save(&cfg.model_dir)?;
    let mut meta = cfg.effective();
    meta.insert("n_train".into(), train.n().to_string());
    write_file(&cfg.model_dir.join("run.txt"), &metadata_text(&meta))?;
    Ok(cfg.model_dir.clone())
}

fn load_model(cfg: &RunConfig) -> Result<GaussianModel> {
    if !cfg.model_dir.join("meta.txt").exists() {
        return Err(Error::Config(format!(
            "no model in {}; run `wnood fit` first",
            cfg.model_dir.display()
        )));
    }
    GaussianModel::load(&cfg.model_dir)
}

/// Statistics of one role, each present only when requested.
#[derive(Default)]
struct RoleStats {
    n: usize,
    wn: Option<Vec<f64>>,
    loglik: Option<Vec<f64>>,
    lr: Option<Vec<f64>>,
}

struct Scorer<'a> {
    cfg: &'a RunConfig,
    model: Option<GaussianModel>,
}

impl<'a> Scorer<'a> {
    fn new(cfg: &'a RunConfig, tests: &[TestKind]) -> Result<Self> {
        let direct_wn = !cfg.residual_whiten;
        let needs_model = |role: &str| {
            let wn =
                tests.contains(&TestKind::Wn) && !(direct_wn && cfg.residual.contains_key(role));
            let lik = tests
                .iter()
                .any(|t| matches!(t, TestKind::Lh | TestKind::Lh2s | TestKind::Lr))
                && !cfg.loglik.contains_key(role);
            wn || lik
        };
        let mut roles = vec![INLIER_TEST];
        roles.extend(cfg.settings());
        if tests.contains(&TestKind::Lh2s) {
            roles.push(INLIER_TRAIN);
        }
        let model = if roles.iter().any(|r| needs_model(r)) {
            Some(load_model(cfg)?)
        } else {
            None
        };
        Ok(Self { cfg, model })
    }

    fn model(&self) -> Result<&GaussianModel> {
        self.model
            .as_ref()
            .ok_or_else(|| Error::Config("no linear model loaded".into()))
    }

    fn lags_for(&self, geometry: ImageGeometry) -> Result<LagSet> {
        self.cfg.lag_mode.lag_set(geometry, self.cfg.max_lag)
    }

    /// WN input sequences: imported residuals used directly, or whitened
    /// linear-model input.
    fn wn_sequences(&self, role: &Role) -> Result<SampleMatrix> {
        if !self.cfg.residual_whiten {
            if let Some(r) = role.residuals() {
                return r;
            }
        }
        let x = role.linear_input()?;
        let model = self.model()?;
        check_model(model, &x, role.name)?;
        model.whiten_all(&x)
    }

    fn stats(&self, role_name: &str, tests: &[TestKind]) -> Result<RoleStats> {
        let role = Role::new(self.cfg, role_name);
        let want_wn = tests.contains(&TestKind::Wn);
        let want_lik = tests
            .iter()
            .any(|t| matches!(t, TestKind::Lh | TestKind::Lh2s | TestKind::Lr));
        let want_lr = tests.contains(&TestKind::Lr);
        let mut out = RoleStats::default();
        let mut n = None;
        let mut agree = |what: &str, len: usize| -> Result<()> {
            match n {
                None => {
                    n = Some(len);
                    Ok(())
                }
                Some(want) => check_len(what, role_name, len, want),
            }
        };

        let imported = role.imported_loglik().transpose()?;
        let direct_wn = !self.cfg.residual_whiten && self.cfg.residual.contains_key(role_name);
        let linear_needed = (want_wn && !direct_wn) || (want_lik && imported.is_none());
        let mut linear_loglik = None;
        if linear_needed {
            let x = role.linear_input()?;
            let model = self.model()?;
            check_model(model, &x, role_name)?;
            let w = model.whiten_all(&x)?;
            agree("linear-model input", x.n())?;
            if want_wn && !direct_wn {
                out.wn = Some(wn_scores(&w, &self.lags_for(w.geometry())?)?);
            }
            linear_loglik = Some(model.loglik_whitened(&w));
        }
        if want_wn && direct_wn {
            let r = self.wn_sequences(&role)?;
            agree("residuals", r.n())?;
            out.wn = Some(wn_scores(&r, &self.lags_for(r.geometry())?)?);
        }
        if want_lik {
            let ll = match (&imported, &linear_loglik) {
                (Some(v), _) => v.clone(),
                (None, Some(v)) => v.clone(),
                (None, None) => unreachable!("linear path runs when no loglik is imported"),
            };
            agree("log-likelihoods", ll.len())?;
            out.loglik = Some(ll);
        }
        if want_lr {
            let images = role.images()?;
            if images.range() != ValueRange::RawBytes {
                return Err(Error::Config(format!(
                    "lr needs 8-bit images for {role_name}, got {:?} data",
                    images.range()
                )));
            }
            agree("images", images.n())?;
            let bits = complexity_bits_all(&images)?;
            let ll: Vec<f64> = match imported {
                Some(v) => v,
                None if self.cfg.residual_whiten => {
                    return Err(Error::Config(format!(
                        "lr on whitened residuals needs imported loglik.{role_name}"
                    )))
                }
                None => {
                    let d = images.d();
                    linear_loglik
                        .expect("linear path ran")
                        .into_iter()
                        .map(|l| {
                            if self.cfg.unit_scale {
                                discretized_loglik(l, d)
                            } else {
                                l
                            }
                        })
                        .collect()
                }
            };
            out.lr = Some(
                ll.iter()
                    .zip(&bits)
                    .map(|(&l, &b)| lr_score(l, b))
                    .collect(),
            );
        }
        out.n = n.unwrap_or(0);
        Ok(out)
    }
}

fn push_role(
    table: &mut ScoreTable,
    tests: &[TestKind],
    label: SampleLabel,
    stats: &RoleStats,
    median_train: Option<f64>,
) -> Result<()> {
    for &t in tests {
        let scores: Vec<f64> = match t {
            TestKind::Wn => stats.wn.clone().expect("wn computed"),
            TestKind::Lh => stats
                .loglik
                .as_ref()
                .expect("loglik computed")
                .iter()
                .map(|&l| lh_score(l))
                .collect(),
            TestKind::Lh2s => {
                let m = median_train.expect("median computed");
                stats
                    .loglik
                    .as_ref()
                    .expect("loglik computed")
                    .iter()
                    .map(|&l| lh2s_score(l, m))
                    .collect()
            }
            TestKind::Lr => stats.lr.clone().expect("lr computed"),
        };
        table.push_all(t, label, &scores)?;
    }
    Ok(())
}

fn score_metadata(cfg: &RunConfig, lag_desc: &str) -> BTreeMap<String, String> {
    let mut meta = cfg.effective();
    meta.insert("compressor".into(), COMPRESSOR_SETTINGS.into());
    meta.insert("lag_set".into(), lag_desc.into());
    meta.insert("version".into(), env!("CARGO_PKG_VERSION").into());
    meta
}

/// Scores the inlier test set and every outlier setting; writes one CSV per
/// setting under `<out>/scores/`.
pub fn cmd_score(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    if cfg.outliers.is_empty() {
        return Err(Error::Config("no outlier settings configured".into()));
    }
    let tests = cfg.tests.clone();
    let scorer = Scorer::new(cfg, &tests)?;

    let median_train = if tests.contains(&TestKind::Lh2s) {
        let train = scorer.stats(INLIER_TRAIN, &[TestKind::Lh])?;
        Some(median(train.loglik.as_ref().expect("loglik computed"))?)
    } else {
        None
    };
    let inliers = scorer.stats(INLIER_TEST, &tests)?;
    info!("scored {} inlier test samples", inliers.n);

    let mut lag_descs: Vec<String> = Vec::new();
    let mut written = Vec::new();
    for setting in cfg.settings() {
        let outliers = scorer.stats(setting, &tests)?;
        info!("scored {} samples of {setting}", outliers.n);
        let mut table = ScoreTable::default();
        push_role(
            &mut table,
            &tests,
            SampleLabel::InlierTest,
            &inliers,
            median_train,
        )?;
        push_role(
            &mut table,
            &tests,
            SampleLabel::Outlier,
            &outliers,
            median_train,
        )?;
        let path = cfg.scores_dir().join(format!("{setting}.csv"));
        write_file(&path, &table.to_csv())?;
        written.push(path);
    }
    if tests.contains(&TestKind::Wn) {
        let g = match (cfg.geometry, &scorer.model) {
            (Some(g), _) => Some(g),
            (None, Some(m)) => Some(m.geometry()),
            (None, None) => None,
        };
        if let Some(g) = g {
            lag_descs.push(scorer.lags_for(g)?.to_string());
        }
    }
    let mut meta = score_metadata(cfg, &lag_descs.join(";"));
    if let Some(m) = median_train {
        meta.insert("lh2s_inlier_median".into(), format!("{m:?}"));
    }
    write_file(
        &cfg.scores_dir().join("metadata.txt"),
        &metadata_text(&meta),
    )?;
    Ok(written)
}

fn finite(v: &[f64]) -> Vec<f64> {
    v.iter().copied().filter(|x| x.is_finite()).collect()
}

/// Builds the report from the score files of every configured setting.
pub fn build_report(cfg: &RunConfig) -> Result<(EvalReport, String)> {
    if cfg.outliers.is_empty() {
        return Err(Error::Config("no outlier settings configured".into()));
    }
    let mut report = EvalReport::default();
    let mut intersections = String::from("setting,test,intersection\n");
    let mut cell_index = 0u64;
    for setting in cfg.settings() {
        let path = cfg.scores_dir().join(format!("{setting}.csv"));
        if !path.exists() {
            return Err(Error::Config(format!(
                "missing score file {}; run `wnood score` first",
                path.display()
            )));
        }
        let table = ScoreTable::read_csv(&path)?;
        for &t in &cfg.tests {
            let inl = table.scores(t, SampleLabel::InlierTest);
            let out = table.scores(t, SampleLabel::Outlier);
            if inl.is_empty() || out.is_empty() {
                return Err(Error::Config(format!(
                    "{} has no {t} scores for both inliers and outliers",
                    path.display()
                )));
            }
            let a = auroc(&out, &inl)?;
            let (lo, hi) = auroc_ci(
                &out,
                &inl,
                cfg.bootstrap_trials,
                cfg.seed.wrapping_add(cell_index),
            )?;
            cell_index += 1;
            let hist = if cfg.histogram_bins > 0 {
                let (fo, fi) = (finite(&out), finite(&inl));
                if fo.is_empty() || fi.is_empty() {
                    None
                } else {
                    Some(histogram_intersection(&fi, &fo, cfg.histogram_bins)?)
                }
            } else {
                None
            };
            if let Some(h) = hist {
                let _ = writeln!(intersections, "{setting},{t},{h:.6}");
            }
            report.cells.push(EvalCell {
                setting: setting.to_string(),
                test: t.to_string(),
                auroc: a,
                ci_low: lo,
                ci_high: hi,
                n_inlier: inl.len(),
                n_outlier: out.len(),
                histogram_intersection: hist,
            });
        }
    }
    report.rank()?;

    let mut meta = cfg.effective();
    meta.insert("compressor".into(), COMPRESSOR_SETTINGS.into());
    meta.insert(
        "bootstrap_seed".into(),
        format!(
            "seed + cell index (cells in report order), base {}",
            cfg.seed
        ),
    );
    meta.insert("version".into(), env!("CARGO_PKG_VERSION").into());
    let score_meta = cfg.scores_dir().join("metadata.txt");
    if let Ok(text) = fs::read_to_string(&score_meta) {
        for (k, v) in wnood_core::config::parse_key_values(&text)? {
            if matches!(k.as_str(), "lag_set" | "lh2s_inlier_median") {
                meta.insert(format!("score.{k}"), v);
            }
        }
    }
    report.metadata = meta;
    Ok((report, intersections))
}

pub fn cmd_eval(cfg: &RunConfig) -> Result<EvalReport> {
    let (report, intersections) = build_report(cfg)?;
    write_file(&cfg.out.join("report.csv"), &report.to_csv())?;
    write_file(&cfg.out.join("ranks.csv"), &report.ranks_csv())?;
    write_file(&cfg.out.join("report.txt"), &report.to_table())?;
    write_file(&cfg.out.join("metadata.txt"), &report.metadata_text())?;
    if cfg.histogram_bins > 0 {
        write_file(&cfg.out.join("intersections.csv"), &intersections)?;
    }
    Ok(report)
}

/// WN AUROC per setting for each maximum lag, whitening every dataset once.
pub fn cmd_sweep_l(cfg: &RunConfig, l_values: &[usize]) -> Result<String> {
    if l_values.is_empty() {
        return Err(Error::Config("sweep-l needs at least one L value".into()));
    }
    if cfg.outliers.is_empty() {
        return Err(Error::Config("no outlier settings configured".into()));
    }
    let scorer = Scorer::new(cfg, &[TestKind::Wn])?;
    let inl = scorer.wn_sequences(&Role::new(cfg, INLIER_TEST))?;
    let lag_sets = l_values
        .iter()
        .map(|&l| cfg.lag_mode.lag_set(inl.geometry(), l))
        .collect::<Result<Vec<_>>>()?;
    let outs = cfg
        .settings()
        .into_iter()
        .map(|s| Ok((s, scorer.wn_sequences(&Role::new(cfg, s))?)))
        .collect::<Result<Vec<_>>>()?;

    let mut csv = String::from("L,setting,auroc\n");
    for (l, lags) in l_values.iter().zip(&lag_sets) {
        let inl_scores = wn_scores(&inl, lags)?;
        for (setting, seqs) in &outs {
            let a = auroc(&wn_scores(seqs, lags)?, &inl_scores)?;
            let _ = writeln!(csv, "{l},{setting},{a:.6}");
        }
    }
    write_file(&cfg.out.join("sweep_l.csv"), &csv)?;
    Ok(csv)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Demo {
    Typicality,
    Circle,
    NullCalibration,
}

pub struct DemoParams {
    pub d: usize,
    pub n: usize,
    pub k: usize,
    pub trials: usize,
    pub seed: u64,
}

pub fn cmd_demo(demo: Demo, p: &DemoParams) -> Result<String> {
    let mut out = String::new();
    match demo {
        Demo::Typicality => {
            let r = typicality_demo(p.d, p.n, p.seed)?;
            let sqrt_d = (r.d as f64).sqrt();
            let _ = writeln!(
                out,
                "demo=typicality\nd={}\nn={}\nseed={}",
                r.d, r.n, p.seed
            );
            let _ = writeln!(out, "mean_norm={:.6}\nsqrt_d={sqrt_d:.6}", r.mean_norm);
            let _ = writeln!(out, "std_norm={:.6}", r.std_norm);
            let _ = writeln!(
                out,
                "log_density_gap={:.6}\ntarget_gap={:.6}",
                r.log_density_gap, r.target_gap
            );
        }
        Demo::Circle => {
            let data = sample_process(&ProcessSpec::new(ProcessKind::Circle, p.d, p.seed), p.n)?;
            let lags = all_lags(p.k, p.d)?;
            let mut max_typ_err: f64 = 0.0;
            let mut max_p: f64 = 0.0;
            let mut min_q = f64::INFINITY;
            for row in data.rows() {
                max_typ_err = max_typ_err.max((typicality_stat(row)? - 1.0).abs());
                let s = bp_statistic(row, &lags)?;
                max_p = max_p.max(s.p_value);
                min_q = min_q.min(s.q_bp);
            }
            let _ = writeln!(
                out,
                "demo=circle\nd={}\nn={}\nseed={}\nlags={lags}",
                p.d, p.n, p.seed
            );
            let _ = writeln!(out, "max_abs_typicality_minus_one={max_typ_err:e}");
            let _ = writeln!(out, "min_q_bp={min_q:.6}\nmax_p_value={max_p:e}");
        }
        Demo::NullCalibration => {
            let c = null_calibration(p.d, p.k, p.trials, p.seed)?;
            let _ = writeln!(
                out,
                "demo=null-calibration\nd={}\nk={}\ntrials={}\nseed={}",
                c.d, c.k, c.trials, p.seed
            );
            let _ = writeln!(out, "ks={:.6}\nmean_q_over_k={:.6}", c.ks, c.mean_q_over_k);
        }
    }
    Ok(out)
}

pub fn write_demo(out_dir: &Path, demo: Demo, text: &str) -> Result<PathBuf> {
    let name = match demo {
        Demo::Typicality => "typicality",
        Demo::Circle => "circle",
        Demo::NullCalibration => "null-calibration",
    };
    let path = out_dir.join(format!("demo_{name}.txt"));
    write_file(&path, text)?;
    Ok(path)
}
