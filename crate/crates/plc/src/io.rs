//! Bit-exact file formats.
//!
//! Tensor files ("PLCT") carry magic, a version, the dimension list and the
//! row-major f64 payload, all little-endian. Model files ("PLCM") carry the
//! rank plus named matrices — canonically `W`, `Wt`, then one factor per
//! non-sample mode named `A`, `B`, `C`, ... Labels are plain one-integer-
//! per-line text, and metrics are a stable-keyed JSON document.

use crate::error::{Error, Result};
use crate::loss::LossReport;
use crate::tensor::{DenseTensor, KruskalModel, Matrix};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const TENSOR_MAGIC: &[u8; 4] = b"PLCT";
const MODEL_MAGIC: &[u8; 4] = b"PLCM";
const FORMAT_VERSION: u32 = 1;

fn read_exact_checked(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| Error::Format(format!("truncated file while reading {what}")))
}

fn read_u32(r: &mut impl Read, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact_checked(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read, what: &str) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact_checked(r, &mut b, what)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64_payload(r: &mut impl Read, len: usize, what: &str) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; len * 8];
    read_exact_checked(r, &mut bytes, what)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

fn write_f64_payload(w: &mut impl Write, data: &[f64]) -> Result<()> {
    for v in data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn check_magic(r: &mut impl Read, expect: &[u8; 4]) -> Result<()> {
    let mut magic = [0u8; 4];
    read_exact_checked(r, &mut magic, "magic")?;
    if &magic != expect {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&magic),
            String::from_utf8_lossy(expect)
        )));
    }
    let version = read_u32(r, "version")?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported version {version}, expected {FORMAT_VERSION}"
        )));
    }
    Ok(())
}

pub fn write_tensor(path: &Path, t: &DenseTensor) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(TENSOR_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(t.order() as u32).to_le_bytes())?;
    for &d in t.dims() {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    write_f64_payload(&mut w, t.data())?;
    w.flush()?;
    Ok(())
}

pub fn read_tensor(path: &Path) -> Result<DenseTensor> {
    let mut r = BufReader::new(fs::File::open(path)?);
    check_magic(&mut r, TENSOR_MAGIC)?;
    let order = read_u32(&mut r, "order")? as usize;
    if order == 0 || order > 16 {
        return Err(Error::Format(format!("implausible tensor order {order}")));
    }
    let mut dims = Vec::with_capacity(order);
    let mut len: usize = 1;
    for i in 0..order {
        let d = read_u64(&mut r, "dims")? as usize;
        len = len
            .checked_mul(d)
            .ok_or_else(|| Error::Format("dims overflow".into()))?;
        dims.push(d);
        let _ = i;
    }
    let data = read_f64_payload(&mut r, len, "tensor payload")?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Format("trailing bytes after tensor payload".into()));
    }
    DenseTensor::new(dims, data)
}

/// Canonical factor name for non-sample mode `i`: A, B, C, ...
fn factor_name(i: usize) -> String {
    ((b'A' + (i as u8)) as char).to_string()
}

pub fn write_model(path: &Path, model: &KruskalModel, w_aug: &Matrix) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(MODEL_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(model.rank as u64).to_le_bytes())?;
    let count = 2 + model.factors.len();
    w.write_all(&(count as u32).to_le_bytes())?;
    let write_matrix = |w: &mut BufWriter<fs::File>, name: &str, m: &Matrix| -> Result<()> {
        let bytes = name.as_bytes();
        w.write_all(&(bytes.len() as u32).to_le_bytes())?;
        w.write_all(bytes)?;
        w.write_all(&(m.rows() as u64).to_le_bytes())?;
        w.write_all(&(m.cols() as u64).to_le_bytes())?;
        write_f64_payload(w, m.data())
    };
    write_matrix(&mut w, "W", &model.weights)?;
    write_matrix(&mut w, "Wt", w_aug)?;
    for (i, f) in model.factors.iter().enumerate() {
        write_matrix(&mut w, &factor_name(i), f)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<(KruskalModel, Matrix)> {
    let mut r = BufReader::new(fs::File::open(path)?);
    check_magic(&mut r, MODEL_MAGIC)?;
    let rank = read_u64(&mut r, "rank")? as usize;
    let count = read_u32(&mut r, "matrix count")? as usize;
    if count < 4 {
        return Err(Error::Format(format!(
            "model needs at least W, Wt and two factors, found {count} matrices"
        )));
    }
    let mut weights = None;
    let mut w_aug = None;
    let mut factors = Vec::new();
    for _ in 0..count {
        let name_len = read_u32(&mut r, "name length")? as usize;
        if name_len > 64 {
            return Err(Error::Format(format!("implausible name length {name_len}")));
        }
        let mut name_bytes = vec![0u8; name_len];
        read_exact_checked(&mut r, &mut name_bytes, "matrix name")?;
        let name = String::from_utf8(name_bytes)
            .map_err(|_| Error::Format("matrix name is not UTF-8".into()))?;
        let rows = read_u64(&mut r, "rows")? as usize;
        let cols = read_u64(&mut r, "cols")? as usize;
        if cols != rank {
            return Err(Error::Format(format!(
                "matrix {name} has {cols} columns, expected rank {rank}"
            )));
        }
        let data = read_f64_payload(&mut r, rows * cols, "matrix payload")?;
        let m = Matrix::new(rows, cols, data)?;
        match name.as_str() {
            "W" => weights = Some(m),
            "Wt" => w_aug = Some(m),
            _ => factors.push(m),
        }
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Format("trailing bytes after model payload".into()));
    }
    let weights = weights.ok_or_else(|| Error::Format("model file missing W".into()))?;
    let w_aug = w_aug.ok_or_else(|| Error::Format("model file missing Wt".into()))?;
    if weights.rows() != w_aug.rows() {
        return Err(Error::Format("W and Wt row counts differ".into()));
    }
    Ok((KruskalModel::new(weights, factors)?, w_aug))
}

pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut out = String::with_capacity(labels.len() * 2);
    for l in labels {
        out.push_str(&l.to_string());
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| {
            line.trim()
                .parse::<usize>()
                .map_err(|_| Error::Format(format!("labels line {}: not an integer: {line:?}", i + 1)))
        })
        .collect()
}

/// Metrics document written by the CLI; absent sections are omitted.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MetricsFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<Vec<LossReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seconds_per_iter: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clustering_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub graph_agreement: Option<f64>,
}

pub fn write_metrics(path: &Path, metrics: &MetricsFile) -> Result<()> {
    let mut json = serde_json::to_string_pretty(metrics)?;
    json.push('\n');
    fs::write(path, json)?;
    Ok(())
}

pub fn read_metrics(path: &Path) -> Result<MetricsFile> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// "x,y,label" CSV of a 2-D projection.
pub fn write_projection_csv(path: &Path, projection: &Matrix, labels: &[usize]) -> Result<()> {
    if projection.rows() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} projection rows vs {} labels",
            projection.rows(),
            labels.len()
        )));
    }
    let mut out = String::from("x,y,label\n");
    for i in 0..projection.rows() {
        out.push_str(&format!(
            "{},{},{}\n",
            projection.at(i, 0),
            projection.at(i, 1),
            labels[i]
        ));
    }
    fs::write(path, out)?;
    Ok(())
}
