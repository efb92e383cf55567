//! On-disk formats: `model.json`, dataset directories (`meta.json`,
//! `train.bin`, `test.bin`) and JSON reports. Every write goes to a
//! temporary file in the target directory and is renamed into place.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rnn::{Activation, RnnParams, Sequence};
use crate::synth::{Dataset, DatasetMeta};

pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const DATASET_MAGIC: &[u8; 7] = b"URNNDS1";

/// Pretty JSON with every float written as 17 significant digits, which
/// round-trips any `f64` exactly.
struct ExactFloats<'a> {
    inner: PrettyFormatter<'a>,
}

impl Formatter for ExactFloats<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}

/// Serializes `value` as pretty JSON with exact floats and a trailing newline.
/// Non-finite floats come out as `null`, which the readers reject.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, ExactFloats { inner: PrettyFormatter::new() });
    value.serialize(&mut ser).map_err(|e| Error::Format(format!("cannot write JSON: {e}")))?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    if !dir.is_dir() {
        return Err(Error::file(dir, io::Error::new(io::ErrorKind::NotFound, "directory does not exist")));
    }
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::file(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::file(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::file(path, e))?;
    tmp.persist(path).map_err(|e| Error::file(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, to_json_string(value)?.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Serialized form of [`RnnParams`]: dimensions, activation tag and
/// row-major weights, plus free-form metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub activation: Activation,
    pub w: Vec<f64>,
    pub f: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub h_init: Vec<f64>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub metadata: serde_json::Value,
}

impl ModelFile {
    pub fn from_params(params: &RnnParams, metadata: serde_json::Value) -> Self {
        ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            n: params.n(),
            m: params.m(),
            p: params.p(),
            activation: params.activation,
            w: params.w.as_slice().to_vec(),
            f: params.f.as_slice().to_vec(),
            b: params.b.clone(),
            c: params.c.as_slice().to_vec(),
            h_init: params.h_init.clone(),
            metadata,
        }
    }

    pub fn to_params(&self) -> Result<RnnParams> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported model format version {}", self.format_version)));
        }
        let (n, m, p) = (self.n, self.m, self.p);
        let shape = |what: &str, e: Error| Error::Format(format!("{what}: {e}"));
        let params = RnnParams {
            w: Matrix::from_vec(n, n, self.w.clone()).map_err(|e| shape("w", e))?,
            f: Matrix::from_vec(n, m, self.f.clone()).map_err(|e| shape("f", e))?,
            b: self.b.clone(),
            c: Matrix::from_vec(p, n, self.c.clone()).map_err(|e| shape("c", e))?,
            h_init: self.h_init.clone(),
            activation: self.activation,
        };
        params.validate().map_err(|e| Error::Format(e.to_string()))?;
        Ok(params)
    }
}

pub fn save_model(path: &Path, params: &RnnParams, metadata: serde_json::Value) -> Result<()> {
    params.validate()?;
    write_json(path, &ModelFile::from_params(params, metadata))
}

pub fn load_model(path: &Path) -> Result<(RnnParams, serde_json::Value)> {
    let file: ModelFile = read_json(path)?;
    let params = file.to_params().map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    Ok((params, file.metadata))
}

/// Binary sequence block: magic, then `n_seq`, `T`, `m`, `p` as `u64`, then
/// per sequence `x` and `y` row-major, all little-endian.
pub fn encode_sequences(seqs: &[Sequence], t_len: usize, m: usize, p: usize) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(7 + 32 + seqs.len() * t_len * (m + p) * 8);
    out.extend_from_slice(DATASET_MAGIC);
    for v in [seqs.len(), t_len, m, p] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    for s in seqs {
        let y = s.targets()?;
        if s.x.shape() != (t_len, m) || y.shape() != (t_len, p) {
            return Err(Error::DimensionMismatch(format!(
                "sequence x {:?}, y {:?} in a ({t_len}, {m}, {p}) block",
                s.x.shape(),
                y.shape()
            )));
        }
        for v in s.x.as_slice().iter().chain(y.as_slice()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Inverse of [`encode_sequences`]; returns the sequences and `(T, m, p)`.
pub fn decode_sequences(bytes: &[u8]) -> Result<(Vec<Sequence>, (usize, usize, usize))> {
    let bad = |msg: &str| Error::Format(msg.to_string());
    let rest = bytes.strip_prefix(DATASET_MAGIC.as_slice()).ok_or_else(|| bad("missing dataset magic"))?;
    if rest.len() < 32 {
        return Err(bad("truncated dataset header"));
    }
    let word = |i: usize| u64::from_le_bytes(rest[8 * i..8 * i + 8].try_into().unwrap());
    let to_usize = |v: u64| usize::try_from(v).map_err(|_| bad("header count too large"));
    let (n_seq, t_len, m, p) = (to_usize(word(0))?, to_usize(word(1))?, to_usize(word(2))?, to_usize(word(3))?);
    let per_seq = t_len
        .checked_mul(m + p)
        .and_then(|v| v.checked_mul(8))
        .ok_or_else(|| bad("header sizes overflow"))?;
    let body = &rest[32..];
    if Some(body.len()) != n_seq.checked_mul(per_seq) {
        return Err(bad("dataset body length does not match header"));
    }
    let mut floats = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let mut seqs = Vec::with_capacity(n_seq);
    for _ in 0..n_seq {
        let x = Matrix::from_vec(t_len, m, floats.by_ref().take(t_len * m).collect())?;
        let y = Matrix::from_vec(t_len, p, floats.by_ref().take(t_len * p).collect())?;
        if !y.is_finite() {
            return Err(bad("non-finite target value"));
        }
        seqs.push(Sequence::new(x, Some(y)).map_err(|e| Error::Format(e.to_string()))?);
    }
    Ok((seqs, (t_len, m, p)))
}

/// Writes `meta.json`, `train.bin` and `test.bin` into `dir`, creating `dir`
/// itself (but not its parents) if needed.
pub fn save_dataset(dir: &Path, data: &Dataset) -> Result<()> {
    if !dir.is_dir() {
        fs::create_dir(dir).map_err(|e| Error::file(dir, e))?;
    }
    let (t, m, p) = (data.meta.t_len, data.meta.spec.m, data.meta.spec.p);
    write_atomic(&dir.join("train.bin"), &encode_sequences(&data.train, t, m, p)?)?;
    write_atomic(&dir.join("test.bin"), &encode_sequences(&data.test, t, m, p)?)?;
    write_json(&dir.join("meta.json"), &data.meta)
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let meta: DatasetMeta = read_json(&dir.join("meta.json"))?;
    let expected = (meta.t_len, meta.spec.m, meta.spec.p);
    let load = |name: &str, count: usize| -> Result<Vec<Sequence>> {
        let path = dir.join(name);
        let bytes = fs::read(&path).map_err(|e| Error::file(&path, e))?;
        let (seqs, dims) = decode_sequences(&bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        if dims != expected || seqs.len() != count {
            return Err(Error::Format(format!("{} disagrees with meta.json", path.display())));
        }
        Ok(seqs)
    };
    let train = load("train.bin", meta.n_train)?;
    let test = load("test.bin", meta.n_test)?;
    Ok(Dataset { train, test, meta })
}
