//! Baseline outlier scores. Every score is oriented so that larger means
//! more outlying.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor_io::{SampleMatrix, ValueRange};

/// Compressor settings behind [`generic_complexity_bits`], echoed into reports.
pub const COMPRESSOR_SETTINGS: &str =
    "png-0.18.1 deflate-level=9 filter=adaptive bits=8*file_bytes";

/// Single-sided likelihood score: low likelihood is outlying.
pub fn lh_score(loglik: f64) -> f64 {
    -loglik
}

/// Two-sided likelihood score: distance from the inlier median.
pub fn lh2s_score(loglik: f64, inlier_median: f64) -> f64 {
    (loglik - inlier_median).abs()
}

/// Median with the midpoint convention for even lengths.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Argument("median of an empty list".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Ok(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Likelihood-ratio score against a generic compressor.
///
/// `S = loglik + bits · ln 2` is the log ratio of the model probability to the
/// compressor probability `2^-bits`; low `S` is outlying, so `-S` is returned.
pub fn lr_score(loglik_nats: f64, complexity_bits: f64) -> f64 {
    -(loglik_nats + complexity_bits * std::f64::consts::LN_2)
}

/// Size in bits of the lossless PNG encoding of one raw-byte image.
pub fn generic_complexity_bits(image: &[f64], data: &SampleMatrix) -> Result<f64> {
    if data.range() != ValueRange::RawBytes {
        return Err(Error::Argument(
            "compressor scores need raw-byte images".into(),
        ));
    }
    let g = data.geometry();
    if image.len() != g.dim() {
        return Err(Error::Argument(format!(
            "image has {} values, geometry {g} needs {}",
            image.len(),
            g.dim()
        )));
    }
    let color = match g.channels {
        1 => png::ColorType::Grayscale,
        2 => png::ColorType::GrayscaleAlpha,
        3 => png::ColorType::Rgb,
        4 => png::ColorType::Rgba,
        c => return Err(Error::Argument(format!("cannot PNG-encode {c} channels"))),
    };
    let bytes: Vec<u8> = image.iter().map(|&v| v as u8).collect();
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, g.width as u32, g.height as u32);
        enc.set_color(color);
        enc.set_depth(png::BitDepth::Eight);
        enc.set_deflate_compression(png::DeflateCompression::Level(9));
        enc.set_filter(png::Filter::Adaptive);
        let mut writer = enc
            .write_header()
            .map_err(|e| Error::Numerical(format!("png encoder: {e}")))?;
        writer
            .write_image_data(&bytes)
            .map_err(|e| Error::Numerical(format!("png encoder: {e}")))?;
        writer
            .finish()
            .map_err(|e| Error::Numerical(format!("png encoder: {e}")))?;
    }
    Ok(8.0 * out.len() as f64)
}

/// [`generic_complexity_bits`] for every row.
pub fn complexity_bits_all(data: &SampleMatrix) -> Result<Vec<f64>> {
    data.values()
        .par_chunks_exact(data.d())
        .map(|row| generic_complexity_bits(row, data))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SampleLabel {
    InlierTest,
    Outlier,
    InlierTrain,
}

impl SampleLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            SampleLabel::InlierTest => "inlier-test",
            SampleLabel::Outlier => "outlier",
            SampleLabel::InlierTrain => "inlier-train",
        }
    }
}

impl fmt::Display for SampleLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SampleLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inlier-test" => Ok(SampleLabel::InlierTest),
            "outlier" => Ok(SampleLabel::Outlier),
            "inlier-train" => Ok(SampleLabel::InlierTrain),
            other => Err(Error::Format(format!("unknown sample label {other:?}"))),
        }
    }
}

/// Test names accepted throughout the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TestKind {
    Wn,
    Lh,
    Lh2s,
    Lr,
}

impl TestKind {
    pub const ALL: [TestKind; 4] = [TestKind::Wn, TestKind::Lh, TestKind::Lh2s, TestKind::Lr];

    pub fn as_str(self) -> &'static str {
        match self {
            TestKind::Wn => "wn",
            TestKind::Lh => "lh",
            TestKind::Lh2s => "lh2s",
            TestKind::Lr => "lr",
        }
    }
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "wn" => Ok(TestKind::Wn),
            "lh" => Ok(TestKind::Lh),
            "lh2s" | "lh-2s" => Ok(TestKind::Lh2s),
            "lr" => Ok(TestKind::Lr),
            other => Err(Error::Config(format!("unknown test {other:?}"))),
        }
    }
}

/// One row of a score file.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub sample_index: usize,
    pub label: SampleLabel,
    pub test: TestKind,
    pub score: f64,
}

/// Per-sample scores, larger meaning more outlying. Scores are finite or
/// `+inf` (degenerate sequences under the WN test).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreTable {
    pub rows: Vec<ScoreRow>,
}

impl ScoreTable {
    pub fn push_all(&mut self, test: TestKind, label: SampleLabel, scores: &[f64]) -> Result<()> {
        for (i, &s) in scores.iter().enumerate() {
            if s.is_nan() || s == f64::NEG_INFINITY {
                return Err(Error::Numerical(format!(
                    "{test} score for {label} sample {i} is {s}"
                )));
            }
            self.rows.push(ScoreRow {
                sample_index: i,
                label,
                test,
                score: s,
            });
        }
        Ok(())
    }

    /// Scores of one test and label, in sample order.
    pub fn scores(&self, test: TestKind, label: SampleLabel) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.test == test && r.label == label)
            .map(|r| r.score)
            .collect()
    }

    pub fn tests(&self) -> Vec<TestKind> {
        let mut t: Vec<TestKind> = self.rows.iter().map(|r| r.test).collect();
        t.sort();
        t.dedup();
        t
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("sample_index,label,test,score\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.sample_index,
                r.label,
                r.test,
                format_score(r.score)
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_csv().as_bytes())
            .map_err(|e| Error::io(path, e))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some("sample_index,label,test,score") => {}
            other => {
                return Err(Error::Format(format!(
                    "unexpected score file header {other:?}"
                )))
            }
        }
        let mut rows = Vec::new();
        for (k, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(Error::Format(format!("score line {}: {line:?}", k + 2)));
            }
            let bad = |what: &str| Error::Format(format!("score line {}: bad {what}", k + 2));
            rows.push(ScoreRow {
                sample_index: fields[0].parse().map_err(|_| bad("index"))?,
                label: fields[1].parse()?,
                test: fields[2].parse().map_err(|_| bad("test"))?,
                score: fields[3].parse().map_err(|_| bad("score"))?,
            });
        }
        Ok(Self { rows })
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn format_score(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_string()
    } else {
        format!("{v:?}")
    }
}
