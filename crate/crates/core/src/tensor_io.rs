//! Image tensors: geometry, the flattened sample matrix, CIFAR-10 binary
//! ingestion and the `OODT` tensor container.
//!
//! Images are flattened channel-last: channel `c` of pixel `(i, j)` lives at
//! index `C * (Wd * i + j) + c` (all indices 0-based). This fixes the sequence
//! index `t` that every autocorrelation statistic runs over.
//!
//! Container layout (little-endian):
//!
//! ```text
//! magic   "OODT"        4 bytes
//! version u32 = 1       4 bytes
//! dtype   u8            0 = u8, 1 = f32, 2 = f64
//! ndim    u8
//! shape   ndim x u64
//! payload row-major
//! ```

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const CIFAR10_SIDE: usize = 32;
pub const CIFAR10_CHANNELS: usize = 3;
pub const CIFAR10_PIXELS: usize = CIFAR10_SIDE * CIFAR10_SIDE * CIFAR10_CHANNELS;
pub const CIFAR10_RECORD: usize = CIFAR10_PIXELS + 1;

const MAGIC: &[u8; 4] = b"OODT";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ImageGeometry {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl ImageGeometry {
    pub fn new(height: usize, width: usize, channels: usize) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::Argument(format!(
                "image geometry must be positive, got {height}x{width}x{channels}"
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
        })
    }

    pub fn cifar10() -> Self {
        Self {
            height: CIFAR10_SIDE,
            width: CIFAR10_SIDE,
            channels: CIFAR10_CHANNELS,
        }
    }

    /// A plain 1-D sequence of length `d`.
    pub fn sequence(d: usize) -> Self {
        Self {
            height: 1,
            width: d,
            channels: 1,
        }
    }

    pub fn dim(&self) -> usize {
        self.height * self.width * self.channels
    }

    /// Distance in the flattened sequence between vertically adjacent pixels.
    pub fn row_stride(&self) -> usize {
        self.width * self.channels
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, c: usize) -> usize {
        self.channels * (self.width * i + j) + c
    }
}

impl fmt::Display for ImageGeometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.height, self.width, self.channels)
    }
}

impl FromStr for ImageGeometry {
    type Err = Error;

    /// Parses `HxWxC`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(['x', 'X']).collect();
        if parts.len() != 3 {
            return Err(Error::Argument(format!(
                "geometry must be HxWxC, got {s:?}"
            )));
        }
        let mut dims = [0usize; 3];
        for (slot, p) in dims.iter_mut().zip(&parts) {
            *slot = p
                .parse()
                .map_err(|_| Error::Argument(format!("bad geometry component {p:?}")))?;
        }
        ImageGeometry::new(dims[0], dims[1], dims[2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueRange {
    /// Integers in `[0, 255]`.
    RawBytes,
    /// Reals in `[0, 1]`.
    Unit,
    UnboundedResidual,
}

/// `n` flattened samples of dimension `d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    geometry: ImageGeometry,
    n: usize,
    values: Vec<f64>,
    range: ValueRange,
}

impl SampleMatrix {
    pub fn new(geometry: ImageGeometry, values: Vec<f64>, range: ValueRange) -> Result<Self> {
        let d = geometry.dim();
        if !values.len().is_multiple_of(d) {
            return Err(Error::Argument(format!(
                "{} values is not a whole number of rows of dimension {d}",
                values.len()
            )));
        }
        if range == ValueRange::RawBytes
            && values
                .iter()
                .any(|&v| !(0.0..=255.0).contains(&v) || v.fract() != 0.0)
        {
            return Err(Error::Argument(
                "raw-byte matrices must hold integers in [0, 255]".into(),
            ));
        }
        Ok(Self {
            geometry,
            n: values.len() / d,
            values,
            range,
        })
    }

    pub fn from_rows(
        geometry: ImageGeometry,
        rows: &[Vec<f64>],
        range: ValueRange,
    ) -> Result<Self> {
        let d = geometry.dim();
        let mut values = Vec::with_capacity(rows.len() * d);
        for (k, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Argument(format!(
                    "row {k} has {} entries, expected {d}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Self::new(geometry, values, range)
    }

    pub fn geometry(&self) -> ImageGeometry {
        self.geometry
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.geometry.dim()
    }

    pub fn range(&self) -> ValueRange {
        self.range
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, k: usize) -> &[f64] {
        let d = self.d();
        &self.values[k * d..(k + 1) * d]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.d())
    }

    /// Rescales raw bytes to `[0, 1]`; other ranges are returned unchanged.
    pub fn to_unit(&self) -> SampleMatrix {
        match self.range {
            ValueRange::RawBytes => SampleMatrix {
                geometry: self.geometry,
                n: self.n,
                values: self.values.iter().map(|v| v / 255.0).collect(),
                range: ValueRange::Unit,
            },
            _ => self.clone(),
        }
    }

    /// Reinterprets the rows under another geometry of the same dimension.
    pub fn with_geometry(mut self, geometry: ImageGeometry) -> Result<Self> {
        if geometry.dim() != self.d() {
            return Err(Error::Argument(format!(
                "cannot view dimension {} as {geometry}",
                self.d()
            )));
        }
        self.geometry = geometry;
        Ok(self)
    }

    /// Keeps the rows at the given indices, in order.
    pub fn select(&self, indices: &[usize]) -> SampleMatrix {
        let mut values = Vec::with_capacity(indices.len() * self.d());
        for &k in indices {
            values.extend_from_slice(self.row(k));
        }
        SampleMatrix {
            geometry: self.geometry,
            n: indices.len(),
            values,
            range: self.range,
        }
    }

    /// Concatenates matrices with identical geometry.
    pub fn concat(parts: &[SampleMatrix]) -> Result<SampleMatrix> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Argument("nothing to concatenate".into()))?;
        let mut values = Vec::new();
        for p in parts {
            if p.geometry != first.geometry {
                return Err(Error::Argument(format!(
                    "geometry mismatch: {} vs {}",
                    p.geometry, first.geometry
                )));
            }
            values.extend_from_slice(&p.values);
        }
        let range = if parts.iter().all(|p| p.range == first.range) {
            first.range
        } else {
            ValueRange::UnboundedResidual
        };
        SampleMatrix::new(first.geometry, values, range)
    }
}

/// Flattens an `H x Wd x C` array given as nested `[i][j][c]` into a
/// channel-last `d`-vector.
pub fn flatten_hwc(image: &[Vec<Vec<f64>>], geometry: ImageGeometry) -> Result<Vec<f64>> {
    if image.len() != geometry.height {
        return Err(shape_mismatch(geometry));
    }
    let mut out = Vec::with_capacity(geometry.dim());
    for row in image {
        if row.len() != geometry.width {
            return Err(shape_mismatch(geometry));
        }
        for pixel in row {
            if pixel.len() != geometry.channels {
                return Err(shape_mismatch(geometry));
            }
            out.extend_from_slice(pixel);
        }
    }
    Ok(out)
}

/// Inverse of [`flatten_hwc`].
pub fn unflatten_hwc(flat: &[f64], geometry: ImageGeometry) -> Result<Vec<Vec<Vec<f64>>>> {
    if flat.len() != geometry.dim() {
        return Err(shape_mismatch(geometry));
    }
    Ok((0..geometry.height)
        .map(|i| {
            (0..geometry.width)
                .map(|j| {
                    let at = geometry.index(i, j, 0);
                    flat[at..at + geometry.channels].to_vec()
                })
                .collect()
        })
        .collect())
}

fn shape_mismatch(geometry: ImageGeometry) -> Error {
    Error::Argument(format!("image shape does not match geometry {geometry}"))
}

/// Converts one 3072-byte channel-planar CIFAR-10 image to channel-last order.
fn planar_to_hwc(planar: &[u8], out: &mut Vec<f64>) {
    let g = ImageGeometry::cifar10();
    let plane = g.height * g.width;
    for p in 0..plane {
        for c in 0..g.channels {
            out.push(planar[c * plane + p] as f64);
        }
    }
}

/// Reads CIFAR-10 binary batches. Labels are discarded.
pub fn read_cifar10_bin<P: AsRef<Path>>(paths: &[P]) -> Result<SampleMatrix> {
    let mut values = Vec::new();
    for path in paths {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.len() % CIFAR10_RECORD != 0 {
            return Err(Error::Format(format!(
                "{}: length {} is not a multiple of {CIFAR10_RECORD}",
                path.display(),
                bytes.len()
            )));
        }
        values.reserve(bytes.len() / CIFAR10_RECORD * CIFAR10_PIXELS);
        for record in bytes.chunks_exact(CIFAR10_RECORD) {
            planar_to_hwc(&record[1..], &mut values);
        }
    }
    SampleMatrix::new(ImageGeometry::cifar10(), values, ValueRange::RawBytes)
}

/// Writes CIFAR-10 records (label byte 0) from a raw-byte 32x32x3 matrix.
/// Used to produce fixtures.
pub fn write_cifar10_bin(path: &Path, m: &SampleMatrix) -> Result<()> {
    if m.geometry() != ImageGeometry::cifar10() || m.range() != ValueRange::RawBytes {
        return Err(Error::Argument(
            "CIFAR-10 records need a raw-byte 32x32x3 matrix".into(),
        ));
    }
    let g = m.geometry();
    let plane = g.height * g.width;
    let mut bytes = Vec::with_capacity(m.n() * CIFAR10_RECORD);
    for row in m.rows() {
        bytes.push(0u8);
        for c in 0..g.channels {
            for p in 0..plane {
                bytes.push(row[p * g.channels + c] as u8);
            }
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    U8,
    F32,
    F64,
}

impl Dtype {
    fn code(self) -> u8 {
        match self {
            Dtype::U8 => 0,
            Dtype::F32 => 1,
            Dtype::F64 => 2,
        }
    }

    fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Dtype::U8),
            1 => Ok(Dtype::F32),
            2 => Ok(Dtype::F64),
            other => Err(Error::Format(format!("unknown dtype code {other}"))),
        }
    }

    pub fn size(self) -> usize {
        match self {
            Dtype::U8 => 1,
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

/// A decoded container: shape plus values promoted to `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dtype: Dtype,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(dtype: Dtype, shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let count: usize = shape.iter().product();
        if count != data.len() {
            return Err(Error::Argument(format!(
                "shape {shape:?} holds {count} values, got {}",
                data.len()
            )));
        }
        Ok(Self { dtype, shape, data })
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        if self.shape.len() > u8::MAX as usize {
            return Err(Error::Argument("too many dimensions".into()));
        }
        let mut out =
            Vec::with_capacity(10 + 8 * self.shape.len() + self.data.len() * self.dtype.size());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(self.dtype.code());
        out.push(self.shape.len() as u8);
        for &s in &self.shape {
            out.extend_from_slice(&(s as u64).to_le_bytes());
        }
        match self.dtype {
            Dtype::U8 => {
                for &v in &self.data {
                    if !(0.0..=255.0).contains(&v) || v.fract() != 0.0 {
                        return Err(Error::Argument(format!("{v} is not a byte value")));
                    }
                    out.push(v as u8);
                }
            }
            Dtype::F32 => {
                for &v in &self.data {
                    out.extend_from_slice(&(v as f32).to_le_bytes());
                }
            }
            Dtype::F64 => {
                for &v in &self.data {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 10 {
            return Err(Error::Format("container shorter than its header".into()));
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::Format(format!("bad magic {:?}", &bytes[..4])));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let dtype = Dtype::from_code(bytes[8])?;
        let ndim = bytes[9] as usize;
        let header = 10 + 8 * ndim;
        if bytes.len() < header {
            return Err(Error::Format("truncated shape".into()));
        }
        let mut shape = Vec::with_capacity(ndim);
        let mut count: usize = 1;
        for k in 0..ndim {
            let at = 10 + 8 * k;
            let s = u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
            let s = usize::try_from(s).map_err(|_| Error::Format("dimension overflow".into()))?;
            count = count
                .checked_mul(s)
                .ok_or_else(|| Error::Format("shape overflow".into()))?;
            shape.push(s);
        }
        let payload = &bytes[header..];
        let expected = count
            .checked_mul(dtype.size())
            .ok_or_else(|| Error::Format("shape overflow".into()))?;
        if payload.len() != expected {
            return Err(Error::Format(format!(
                "payload is {} bytes, shape {shape:?} needs {expected}",
                payload.len()
            )));
        }
        let data = match dtype {
            Dtype::U8 => payload.iter().map(|&b| b as f64).collect(),
            Dtype::F32 => payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect(),
            Dtype::F64 => payload
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        };
        Ok(Self { dtype, shape, data })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes).map_err(|e| match e {
            Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let bytes = self.encode()?;
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(&bytes)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }
}

/// Reads a container of shape `(n, H, Wd, C)` or `(n, d)`. The latter gets
/// the 1-D geometry `1 x d x 1`.
pub fn read_container(path: &Path) -> Result<SampleMatrix> {
    let t = Tensor::read(path)?;
    let geometry = match t.shape.as_slice() {
        [_, h, w, c] => ImageGeometry::new(*h, *w, *c),
        [_, d] => ImageGeometry::new(1, *d, 1),
        other => {
            return Err(Error::Format(format!(
                "{}: expected shape (n,H,W,C) or (n,d), got {other:?}",
                path.display()
            )))
        }
    }
    .map_err(|e| Error::Format(e.to_string()))?;
    let range = match t.dtype {
        Dtype::U8 => ValueRange::RawBytes,
        _ => ValueRange::UnboundedResidual,
    };
    SampleMatrix::new(geometry, t.data, range)
}

/// Writes raw-byte matrices as u8 and everything else as f32.
pub fn write_container(path: &Path, m: &SampleMatrix) -> Result<()> {
    let dtype = match m.range() {
        ValueRange::RawBytes => Dtype::U8,
        _ => Dtype::F32,
    };
    write_container_as(path, m, dtype)
}

pub fn write_container_as(path: &Path, m: &SampleMatrix, dtype: Dtype) -> Result<()> {
    let g = m.geometry();
    let shape = if g.height == 1 && g.channels == 1 {
        vec![m.n(), g.width]
    } else {
        vec![m.n(), g.height, g.width, g.channels]
    };
    Tensor::new(dtype, shape, m.values().to_vec())?.write(path)
}

/// Reads a per-sample column, shape `(n,)`, e.g. imported log-likelihoods.
pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let t = Tensor::read(path)?;
    if t.shape.len() != 1 {
        return Err(Error::Format(format!(
            "{}: expected shape (n,), got {:?}",
            path.display(),
            t.shape
        )));
    }
    Ok(t.data)
}

pub fn write_vector(path: &Path, values: &[f64], dtype: Dtype) -> Result<()> {
    Tensor::new(dtype, vec![values.len()], values.to_vec())?.write(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cifar_record(pixels: &[u8]) -> Vec<u8> {
        let mut r = vec![3u8];
        r.extend_from_slice(pixels);
        r
    }

    #[test]
    fn constant_cifar_record() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("batch.bin");
        fs::write(&path, cifar_record(&[7u8; CIFAR10_PIXELS])).unwrap();
        let m = read_cifar10_bin(&[&path]).unwrap();
        assert_eq!(m.n(), 1);
        assert_eq!(m.d(), 3072);
        assert!(m.row(0).iter().all(|&v| v == 7.0));
        assert_eq!(m.range(), ValueRange::RawBytes);
    }

    #[test]
    fn red_plane_origin_lands_at_index_zero() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("batch.bin");
        let mut px = vec![0u8; CIFAR10_PIXELS];
        px[0] = 255;
        fs::write(&path, cifar_record(&px)).unwrap();
        let m = read_cifar10_bin(&[&path]).unwrap();
        assert_eq!(m.row(0)[0], 255.0);
        assert_eq!(m.row(0)[1], 0.0);
        assert_eq!(m.row(0)[2], 0.0);
    }

    #[test]
    fn planar_offsets_follow_channel_last_index() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("batch.bin");
        let mut px = vec![0u8; CIFAR10_PIXELS];
        // green plane, pixel (i=2, j=5)
        px[1024 + 2 * 32 + 5] = 9;
        fs::write(&path, cifar_record(&px)).unwrap();
        let m = read_cifar10_bin(&[&path]).unwrap();
        let g = ImageGeometry::cifar10();
        assert_eq!(m.row(0)[g.index(2, 5, 1)], 9.0);
        assert_eq!(g.index(2, 5, 1), 3 * (32 * 2 + 5) + 1);
    }

    #[test]
    fn truncated_cifar_file_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("short.bin");
        fs::write(&path, vec![0u8; CIFAR10_RECORD + 5]).unwrap();
        assert!(matches!(read_cifar10_bin(&[&path]), Err(Error::Format(_))));
    }

    #[test]
    fn missing_cifar_file_is_io_error() {
        let err = read_cifar10_bin(&[Path::new("/nonexistent/batch.bin")]).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn u8_zero_container_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("z.oodt");
        let g = ImageGeometry::new(2, 2, 3).unwrap();
        let m = SampleMatrix::new(g, vec![0.0; 24], ValueRange::RawBytes).unwrap();
        write_container(&path, &m).unwrap();
        let back = read_container(&path).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn bad_magic_is_format_error() {
        let mut bytes = Tensor::new(Dtype::U8, vec![1], vec![1.0])
            .unwrap()
            .encode()
            .unwrap();
        bytes[..4].copy_from_slice(b"XXXX");
        assert!(matches!(Tensor::decode(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn bad_version_dtype_and_length_are_format_errors() {
        let good = Tensor::new(Dtype::F32, vec![2, 3], vec![0.5; 6])
            .unwrap()
            .encode()
            .unwrap();

        let mut v = good.clone();
        v[4] = 2;
        assert!(matches!(Tensor::decode(&v), Err(Error::Format(_))));

        let mut v = good.clone();
        v[8] = 7;
        assert!(matches!(Tensor::decode(&v), Err(Error::Format(_))));

        let mut v = good.clone();
        v.pop();
        assert!(matches!(Tensor::decode(&v), Err(Error::Format(_))));

        let mut v = good;
        v.extend_from_slice(&[0, 0, 0, 0]);
        assert!(matches!(Tensor::decode(&v), Err(Error::Format(_))));
    }

    #[test]
    fn header_bytes_are_fixed() {
        let bytes = Tensor::new(Dtype::F32, vec![1, 2], vec![1.0, -2.0])
            .unwrap()
            .encode()
            .unwrap();
        let mut expected = b"OODT".to_vec();
        expected.extend_from_slice(&[1, 0, 0, 0, 1, 2]);
        expected.extend_from_slice(&1u64.to_le_bytes());
        expected.extend_from_slice(&2u64.to_le_bytes());
        expected.extend_from_slice(&1.0f32.to_le_bytes());
        expected.extend_from_slice(&(-2.0f32).to_le_bytes());
        assert_eq!(bytes, expected);
    }

    #[test]
    fn sequence_shape_reads_as_one_dimensional_geometry() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.oodt");
        Tensor::new(Dtype::F32, vec![2, 5], (0..10).map(|v| v as f64).collect())
            .unwrap()
            .write(&path)
            .unwrap();
        let m = read_container(&path).unwrap();
        assert_eq!(m.geometry(), ImageGeometry::sequence(5));
        assert_eq!(m.row(1), &[5.0, 6.0, 7.0, 8.0, 9.0]);
        let img = m
            .with_geometry(ImageGeometry::new(1, 5, 1).unwrap())
            .unwrap();
        assert!(img.with_geometry(ImageGeometry::cifar10()).is_err());
    }

    #[test]
    fn vector_container_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ll.oodt");
        write_vector(&path, &[-1.5, 2.25, 1e3], Dtype::F32).unwrap();
        assert_eq!(read_vector(&path).unwrap(), vec![-1.5, 2.25, 1e3]);
        assert!(read_container(&path).is_err());
    }

    #[test]
    fn flatten_small_examples() {
        let g = ImageGeometry::new(1, 1, 3).unwrap();
        assert_eq!(
            flatten_hwc(&[vec![vec![1.0, 2.0, 3.0]]], g).unwrap(),
            vec![1.0, 2.0, 3.0]
        );
        let g = ImageGeometry::new(2, 2, 1).unwrap();
        let img = vec![vec![vec![1.0], vec![2.0]], vec![vec![3.0], vec![4.0]]];
        assert_eq!(flatten_hwc(&img, g).unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
        assert!(flatten_hwc(&img, ImageGeometry::new(2, 3, 1).unwrap()).is_err());
    }

    #[test]
    fn raw_bytes_are_validated() {
        let g = ImageGeometry::sequence(2);
        assert!(SampleMatrix::new(g, vec![0.0, 256.0], ValueRange::RawBytes).is_err());
        assert!(SampleMatrix::new(g, vec![0.5, 1.0], ValueRange::RawBytes).is_err());
        assert!(SampleMatrix::new(g, vec![0.0, 1.0, 2.0], ValueRange::Unit).is_err());
    }

    #[test]
    fn to_unit_divides_by_255() {
        let g = ImageGeometry::sequence(2);
        let m = SampleMatrix::new(g, vec![0.0, 255.0], ValueRange::RawBytes).unwrap();
        let u = m.to_unit();
        assert_eq!(u.values(), &[0.0, 1.0]);
        assert_eq!(u.range(), ValueRange::Unit);
    }

    #[test]
    fn geometry_parses() {
        assert_eq!(
            "32x32x3".parse::<ImageGeometry>().unwrap(),
            ImageGeometry::cifar10()
        );
        assert!("32x32".parse::<ImageGeometry>().is_err());
        assert!("0x1x1".parse::<ImageGeometry>().is_err());
    }
}
