//! Binary tensor files and factor directories.
//!
//! A tensor file is the 4-byte magic `DNT1`, the order `N` and the `N`
//! dimensions as little-endian `u64`, then the entries as little-endian `f64`
//! in first-index-fastest order. Factor directories hold one such file per
//! core or factor plus a `manifest.txt` of `key = value` lines.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::metrics::join_dims;
use crate::tensor::DenseTensor;
use crate::tring::TRFactors;
use crate::tucker::TuckerFactors;

const MAGIC: &[u8; 4] = b"DNT1";
const MANIFEST: &str = "manifest.txt";

pub fn write_tensor_to(x: &DenseTensor, mut out: impl Write) -> Result<()> {
    let mut buf = Vec::with_capacity(12 + 8 * (x.order() + x.len()));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(x.order() as u64).to_le_bytes());
    for &d in x.shape() {
        buf.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &v in x.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

fn take_u64(bytes: &[u8], pos: &mut usize) -> Result<u64> {
    let end = *pos + 8;
    let chunk = bytes
        .get(*pos..end)
        .ok_or_else(|| Error::Format("truncated header".into()))?;
    *pos = end;
    Ok(u64::from_le_bytes(chunk.try_into().expect("8 bytes")))
}

pub fn read_tensor_from(mut input: impl Read) -> Result<DenseTensor> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::Format("missing DNT1 magic".into()));
    }
    let mut pos = 4;
    let order = take_u64(&bytes, &mut pos)?;
    if order == 0 || order > 64 {
        return Err(Error::Format(format!("implausible order {order}")));
    }
    let mut shape = Vec::with_capacity(order as usize);
    for _ in 0..order {
        let d = take_u64(&bytes, &mut pos)?;
        shape.push(usize::try_from(d).map_err(|_| Error::Format(format!("dimension {d} too large")))?);
    }
    let count = shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Format("element count overflows".into()))?;
    let payload = &bytes[pos..];
    if Some(payload.len()) != count.checked_mul(8) {
        return Err(Error::Format(format!(
            "payload has {} bytes, shape {:?} needs {}",
            payload.len(),
            shape,
            count.saturating_mul(8)
        )));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    DenseTensor::new(shape, data).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_tensor(path: impl AsRef<Path>, x: &DenseTensor) -> Result<()> {
    let f = fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    write_tensor_to(x, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<DenseTensor> {
    read_tensor_from(std::io::BufReader::new(fs::File::open(path)?))
}

fn write_matrix(path: &Path, m: &DenseMatrix) -> Result<()> {
    write_tensor(path, &DenseTensor::new(vec![m.rows(), m.cols()], m.data().to_vec())?)
}

fn read_matrix(path: &Path) -> Result<DenseMatrix> {
    let t = read_tensor(path)?;
    if t.order() != 2 {
        return Err(Error::Format(format!("{} is not a 2-way tensor", path.display())));
    }
    let (r, c) = (t.shape()[0], t.shape()[1]);
    DenseMatrix::from_col_major(r, c, t.into_data())
}

/// Ordered `key = value` pairs.
pub type Manifest = BTreeMap<String, String>;

fn write_manifest(dir: &Path, entries: &Manifest) -> Result<()> {
    let mut text = String::new();
    for (k, v) in entries {
        text.push_str(&format!("{k} = {v}\n"));
    }
    fs::write(dir.join(MANIFEST), text)?;
    Ok(())
}

pub fn read_manifest(dir: impl AsRef<Path>) -> Result<Manifest> {
    let text = fs::read_to_string(dir.as_ref().join(MANIFEST))?;
    let mut out = Manifest::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("manifest line without '=': {line}")))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

fn manifest_order(m: &Manifest) -> Result<usize> {
    m.get("order")
        .ok_or_else(|| Error::Format("manifest lacks 'order'".into()))?
        .parse()
        .map_err(|_| Error::Format("manifest 'order' is not an integer".into()))
}

/// Writes `core.dnt`, `factor_<n>.dnt` and the manifest. `extra` entries
/// (sketch configuration, seed, …) are added to the manifest.
pub fn save_tucker(dir: impl AsRef<Path>, tf: &TuckerFactors, extra: &Manifest) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    write_tensor(dir.join("core.dnt"), tf.core())?;
    for (n, u) in tf.factors().iter().enumerate() {
        write_matrix(&dir.join(format!("factor_{n}.dnt")), u)?;
    }
    let mut m = extra.clone();
    m.insert("kind".into(), "tucker".into());
    m.insert("order".into(), tf.core().order().to_string());
    m.insert("dims".into(), join_dims(&tf.dims()));
    m.insert("ranks".into(), join_dims(tf.core().shape()));
    write_manifest(dir, &m)
}

pub fn load_tucker(dir: impl AsRef<Path>) -> Result<TuckerFactors> {
    let dir = dir.as_ref();
    let m = read_manifest(dir)?;
    let order = manifest_order(&m)?;
    let core = read_tensor(dir.join("core.dnt"))?;
    let factors = (0..order)
        .map(|n| read_matrix(&dir.join(format!("factor_{n}.dnt"))))
        .collect::<Result<Vec<_>>>()?;
    TuckerFactors::new(core, factors)
}

/// Writes `core_<n>.dnt` for every ring core and the manifest.
pub fn save_tr(dir: impl AsRef<Path>, f: &TRFactors, extra: &Manifest) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    for (n, c) in f.cores().iter().enumerate() {
        write_tensor(dir.join(format!("core_{n}.dnt")), c)?;
    }
    let mut m = extra.clone();
    m.insert("kind".into(), "tensor-ring".into());
    m.insert("order".into(), f.order().to_string());
    m.insert("dims".into(), join_dims(&f.dims()));
    m.insert("ranks".into(), join_dims(f.ranks().ranks()));
    write_manifest(dir, &m)
}

pub fn load_tr(dir: impl AsRef<Path>) -> Result<TRFactors> {
    let dir = dir.as_ref();
    let order = manifest_order(&read_manifest(dir)?)?;
    let cores = (0..order)
        .map(|n| read_tensor(dir.join(format!("core_{n}.dnt"))))
        .collect::<Result<Vec<_>>>()?;
    TRFactors::new(cores)
}

/// Either kind of saved decomposition.
#[derive(Debug, Clone)]
pub enum Factors {
    Tucker(TuckerFactors),
    Ring(TRFactors),
}

impl Factors {
    pub fn reconstruct(&self) -> DenseTensor {
        match self {
            Factors::Tucker(t) => crate::tucker::tucker_reconstruct(t),
            Factors::Ring(r) => crate::tring::tr_reconstruct(r),
        }
    }
}

/// Loads a factor directory, dispatching on the manifest's `kind`.
pub fn load_factors(dir: impl AsRef<Path>) -> Result<Factors> {
    let dir = dir.as_ref();
    let m = read_manifest(dir)?;
    match m.get("kind").map(String::as_str) {
        Some("tucker") => Ok(Factors::Tucker(load_tucker(dir)?)),
        Some("tensor-ring") => Ok(Factors::Ring(load_tr(dir)?)),
        other => Err(Error::Format(format!("unknown factor kind {other:?}"))),
    }
}
