//! Evaluation: AUROC with bootstrap intervals, average ranks across settings,
//! histogram overlap and averaged autocorrelation profiles.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor_io::SampleMatrix;
use crate::whitenoise::{acf, standardize};

fn check_scores(name: &str, scores: &[f64]) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::Argument(format!("{name} scores are empty")));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Argument(format!("{name} scores contain NaN")));
    }
    Ok(())
}

/// Mann–Whitney estimate of `P(outlier > inlier) + ½ P(tie)`, computed from
/// mid-ranks of the pooled scores.
pub fn auroc(outlier_scores: &[f64], inlier_scores: &[f64]) -> Result<f64> {
    check_scores("outlier", outlier_scores)?;
    check_scores("inlier", inlier_scores)?;
    Ok(auroc_unchecked(outlier_scores, inlier_scores))
}

fn auroc_unchecked(outliers: &[f64], inliers: &[f64]) -> f64 {
    let m = outliers.len();
    let n = inliers.len();
    let mut pooled: Vec<(f64, bool)> = outliers
        .iter()
        .map(|&s| (s, true))
        .chain(inliers.iter().map(|&s| (s, false)))
        .collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i + 1;
        while j < pooled.len() && pooled[j].0 == pooled[i].0 {
            j += 1;
        }
        // ranks i+1 ..= j share the mid-rank
        let mid = (i + 1 + j) as f64 / 2.0;
        let hits = pooled[i..j].iter().filter(|p| p.1).count();
        rank_sum += mid * hits as f64;
        i = j;
    }
    let u = rank_sum - (m * (m + 1)) as f64 / 2.0;
    u / (m as f64 * n as f64)
}

/// Percentile of a sorted sample, linear interpolation between order
/// statistics.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// 95% percentile-bootstrap interval for [`auroc`]. Each trial resamples both
/// lists with replacement from its own stream of the seeded generator.
pub fn auroc_ci(
    outlier_scores: &[f64],
    inlier_scores: &[f64],
    trials: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    check_scores("outlier", outlier_scores)?;
    check_scores("inlier", inlier_scores)?;
    if trials < 200 {
        return Err(Error::Argument(format!(
            "bootstrap needs at least 200 trials, got {trials}"
        )));
    }
    let mut values: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t + 1);
            let o: Vec<f64> = (0..outlier_scores.len())
                .map(|_| outlier_scores[rng.random_range(0..outlier_scores.len())])
                .collect();
            let i: Vec<f64> = (0..inlier_scores.len())
                .map(|_| inlier_scores[rng.random_range(0..inlier_scores.len())])
                .collect();
            auroc_unchecked(&o, &i)
        })
        .collect();
    values.sort_by(f64::total_cmp);
    Ok((
        quantile_sorted(&values, 0.025),
        quantile_sorted(&values, 0.975),
    ))
}

/// AUROC values indexed by setting (rows) and test (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct AurocTable {
    pub settings: Vec<String>,
    pub tests: Vec<String>,
    /// `cells[s][t]`; `None` marks a missing value.
    pub cells: Vec<Vec<Option<f64>>>,
}

impl AurocTable {
    pub fn new(settings: Vec<String>, tests: Vec<String>) -> Self {
        let cells = vec![vec![None; tests.len()]; settings.len()];
        Self {
            settings,
            tests,
            cells,
        }
    }

    pub fn set(&mut self, setting: &str, test: &str, value: f64) -> Result<()> {
        let s = self
            .settings
            .iter()
            .position(|x| x == setting)
            .ok_or_else(|| Error::Argument(format!("unknown setting {setting:?}")))?;
        let t = self
            .tests
            .iter()
            .position(|x| x == test)
            .ok_or_else(|| Error::Argument(format!("unknown test {test:?}")))?;
        self.cells[s][t] = Some(value);
        Ok(())
    }
}

/// Mean over settings of each test's rank (1 = highest AUROC, ties share the
/// mean rank), in `table.tests` order.
pub fn average_ranks(table: &AurocTable) -> Result<Vec<(String, f64)>> {
    if table.settings.is_empty() || table.tests.is_empty() {
        return Err(Error::Argument("empty AUROC table".into()));
    }
    let k = table.tests.len();
    let mut totals = vec![0.0; k];
    for (s, row) in table.cells.iter().enumerate() {
        let values: Vec<f64> = row
            .iter()
            .enumerate()
            .map(|(t, c)| {
                c.ok_or_else(|| {
                    Error::Argument(format!(
                        "missing AUROC for setting {:?}, test {:?}",
                        table.settings[s], table.tests[t]
                    ))
                })
            })
            .collect::<Result<_>>()?;
        for t in 0..k {
            let better = values.iter().filter(|&&v| v > values[t]).count();
            let tied = values.iter().filter(|&&v| v == values[t]).count();
            totals[t] += better as f64 + (tied as f64 + 1.0) / 2.0;
        }
    }
    let n = table.settings.len() as f64;
    Ok(table
        .tests
        .iter()
        .cloned()
        .zip(totals.into_iter().map(|t| t / n))
        .collect())
}

/// Normalized histograms of `a` and `b` over a shared equal-width binning of
/// their combined range.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedHistogram {
    pub edges: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

pub fn shared_histogram(a: &[f64], b: &[f64], bins: usize) -> Result<SharedHistogram> {
    if bins == 0 {
        return Err(Error::Argument("need at least one bin".into()));
    }
    if a.is_empty() || b.is_empty() {
        return Err(Error::Argument("histogram inputs must be nonempty".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Argument("histogram inputs must be finite".into()));
    }
    let lo = a.iter().chain(b).copied().fold(f64::INFINITY, f64::min);
    let hi = a.iter().chain(b).copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return Ok(SharedHistogram {
            edges: vec![lo, hi],
            a: vec![1.0],
            b: vec![1.0],
        });
    }
    let width = (hi - lo) / bins as f64;
    let count = |xs: &[f64]| {
        let mut c = vec![0.0; bins];
        for &x in xs {
            let k = (((x - lo) / width) as usize).min(bins - 1);
            c[k] += 1.0;
        }
        let total = xs.len() as f64;
        c.iter_mut().for_each(|v| *v /= total);
        c
    };
    Ok(SharedHistogram {
        edges: (0..=bins).map(|k| lo + k as f64 * width).collect(),
        a: count(a),
        b: count(b),
    })
}

/// `Σ_bins min(p_a, p_b)` over a shared binning; 1 for identical samples, 0 for
/// separated supports.
pub fn histogram_intersection(a: &[f64], b: &[f64], bins: usize) -> Result<f64> {
    let h = shared_histogram(a, b, bins)?;
    Ok(h.a.iter().zip(&h.b).map(|(x, y)| x.min(*y)).sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcfProfileRow {
    pub lag: usize,
    pub mean_rho: f64,
    pub std_rho: f64,
    /// Standard deviation of `ρ̂_l` under an IID null, `1 / √(d - l)`.
    pub null_std: f64,
}

/// Mean and across-sample standard deviation of `ρ̂_l`, `l = 1..=L`, over the
/// standardized rows of `sequences`.
pub fn acf_profile(sequences: &SampleMatrix, max_lag: usize) -> Result<Vec<AcfProfileRow>> {
    let n = sequences.n();
    let d = sequences.d();
    if n < 2 {
        return Err(Error::Argument(format!(
            "ACF profile needs at least 2 sequences, got {n}"
        )));
    }
    if max_lag < 1 || max_lag >= d {
        return Err(Error::Argument(format!(
            "L must satisfy 1 <= L < d={d}, got {max_lag}"
        )));
    }
    let per_seq: Vec<Vec<f64>> = sequences
        .values()
        .par_chunks_exact(d)
        .map(|row| {
            let t = standardize(row)?;
            (1..=max_lag).map(|l| acf(&t, l)).collect()
        })
        .collect::<Result<_>>()?;
    Ok((1..=max_lag)
        .map(|l| {
            let vals = per_seq.iter().map(|r| r[l - 1]);
            let mean = vals.clone().sum::<f64>() / n as f64;
            let var = vals.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
            AcfProfileRow {
                lag: l,
                mean_rho: mean,
                std_rho: var.sqrt(),
                null_std: 1.0 / ((d - l) as f64).sqrt(),
            }
        })
        .collect())
}

pub fn acf_profile_csv(rows: &[AcfProfileRow]) -> String {
    let mut out = String::from("lag,mean_rho,std_rho,null_std\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{:?},{:?},{:?}",
            r.lag, r.mean_rho, r.std_rho, r.null_std
        );
    }
    out
}

pub fn histogram_csv(h: &SharedHistogram) -> String {
    let mut out = String::from("bin_low,bin_high,inlier_frac,outlier_frac\n");
    for k in 0..h.a.len() {
        let _ = writeln!(
            out,
            "{:?},{:?},{:?},{:?}",
            h.edges[k],
            h.edges[k + 1],
            h.a[k],
            h.b[k]
        );
    }
    out
}

/// One `(setting, test)` cell of a report.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalCell {
    pub setting: String,
    pub test: String,
    pub auroc: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_inlier: usize,
    pub n_outlier: usize,
    pub histogram_intersection: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    pub cells: Vec<EvalCell>,
    pub average_ranks: Vec<(String, f64)>,
    /// Effective configuration, echoed for provenance.
    pub metadata: BTreeMap<String, String>,
}

impl EvalReport {
    /// Fills `average_ranks` from the cells.
    pub fn rank(&mut self) -> Result<()> {
        let mut settings: Vec<String> = Vec::new();
        let mut tests: Vec<String> = Vec::new();
        for c in &self.cells {
            if !settings.contains(&c.setting) {
                settings.push(c.setting.clone());
            }
            if !tests.contains(&c.test) {
                tests.push(c.test.clone());
            }
        }
        let mut table = AurocTable::new(settings, tests);
        for c in &self.cells {
            table.set(&c.setting, &c.test, c.auroc)?;
        }
        self.average_ranks = average_ranks(&table)?;
        Ok(())
    }

    /// `setting,test,auroc,ci_low,ci_high,n_inlier,n_outlier`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("setting,test,auroc,ci_low,ci_high,n_inlier,n_outlier\n");
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{:.6},{:.6},{:.6},{},{}",
                c.setting, c.test, c.auroc, c.ci_low, c.ci_high, c.n_inlier, c.n_outlier
            );
        }
        out
    }

    pub fn ranks_csv(&self) -> String {
        let mut out = String::from("test,average_rank\n");
        for (t, r) in &self.average_ranks {
            let _ = writeln!(out, "{t},{r:.4}");
        }
        out
    }

    pub fn metadata_text(&self) -> String {
        self.metadata
            .iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    /// Fixed-width table: one row per test, one column per setting, plus the
    /// average rank.
    pub fn to_table(&self) -> String {
        let mut settings: Vec<&str> = Vec::new();
        let mut tests: Vec<&str> = Vec::new();
        for c in &self.cells {
            if !settings.contains(&c.setting.as_str()) {
                settings.push(&c.setting);
            }
            if !tests.contains(&c.test.as_str()) {
                tests.push(&c.test);
            }
        }
        let width = settings.iter().map(|s| s.len()).max().unwrap_or(0).max(8);
        let mut out = format!("{:<6}", "test");
        for s in &settings {
            let _ = write!(out, " {s:>width$}");
        }
        out.push_str("  avg.rank\n");
        for t in &tests {
            let _ = write!(out, "{t:<6}");
            for s in &settings {
                match self.cells.iter().find(|c| c.setting == *s && c.test == *t) {
                    Some(c) => {
                        let _ = write!(out, " {:>width$}", format!("{:.3}", c.auroc));
                    }
                    None => {
                        let _ = write!(out, " {:>width$}", "-");
                    }
                }
            }
            match self.average_ranks.iter().find(|(name, _)| name == t) {
                Some((_, r)) => {
                    let _ = writeln!(out, "  {r:8.2}");
                }
                None => out.push('\n'),
            }
        }
        out
    }
}
