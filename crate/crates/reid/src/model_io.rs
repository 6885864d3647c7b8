//! Trained-model files.
//!
//! All numbers are little-endian; matrices are column-major `f64`.
//!
//! Version 1 holds an XQDA model:
//!
//! ```text
//! "XQDA" | 1u16 | d u32 | r u32 | regularizer f64 | W (d×r) | M' (r×r) | eigenvalues (r)
//! ```
//!
//! Version 2 adds a method tag byte after the version and covers the
//! quadratic baselines (tag 1 = KISSME, 2 = Mahalanobis on genuine pairs):
//!
//! ```text
//! "XQDA" | 2u16 | tag u8 | d u32 | k u32 | regularizer f64 | has_pca u8
//!        | [mean (d) | basis (d×k) | variances (k)]   if has_pca
//!        | M (k×k)
//! ```
//!
//! Tag 0 in version 2 carries the version-1 XQDA payload. XQDA models are
//! written as version 1.

use std::io::{self, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use reid_core::{MetricKind, MetricModel, PcaModel, Trained, XqdaModel};

use crate::error::{Result, ToolError};

pub const MODEL_MAGIC: [u8; 4] = *b"XQDA";

const TAG_XQDA: u8 = 0;
const TAG_KISSME: u8 = 1;
const TAG_MAHALANOBIS: u8 = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum SavedModel {
    Xqda(XqdaModel),
    Metric(MetricModel),
}

impl SavedModel {
    pub fn name(&self) -> &'static str {
        match self {
            SavedModel::Xqda(_) => "xqda",
            SavedModel::Metric(m) => match m.kind {
                MetricKind::Kissme => "kissme",
                MetricKind::MahalanobisGenuine => "mahalanobis",
            },
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            SavedModel::Xqda(m) => m.input_dim(),
            SavedModel::Metric(m) => m.input_dim(),
        }
    }

    pub fn into_trained(self) -> Trained {
        match self {
            SavedModel::Xqda(m) => Trained::Xqda(m),
            SavedModel::Metric(m) => Trained::Metric(m),
        }
    }

    pub fn from_trained(t: Trained) -> Option<Self> {
        match t {
            Trained::Xqda(m) => Some(SavedModel::Xqda(m)),
            Trained::Metric(m) => Some(SavedModel::Metric(m)),
            Trained::Euclidean | Trained::Cosine => None,
        }
    }

    pub fn write_to(&self, mut w: impl Write) -> io::Result<()> {
        w.write_all(&MODEL_MAGIC)?;
        match self {
            SavedModel::Xqda(m) => {
                w.write_all(&1u16.to_le_bytes())?;
                write_xqda(&mut w, m)?;
            }
            SavedModel::Metric(m) => {
                w.write_all(&2u16.to_le_bytes())?;
                let tag = match m.kind {
                    MetricKind::Kissme => TAG_KISSME,
                    MetricKind::MahalanobisGenuine => TAG_MAHALANOBIS,
                };
                w.write_all(&[tag])?;
                write_metric(&mut w, m)?;
            }
        }
        w.flush()
    }

    pub fn read_from(mut r: impl Read) -> io::Result<Self> {
        if read_array::<4>(&mut r)? != MODEL_MAGIC {
            return Err(invalid("not a model file (bad magic)"));
        }
        let model = match u16::from_le_bytes(read_array(&mut r)?) {
            1 => SavedModel::Xqda(read_xqda(&mut r)?),
            2 => match read_array::<1>(&mut r)?[0] {
                TAG_XQDA => SavedModel::Xqda(read_xqda(&mut r)?),
                TAG_KISSME => SavedModel::Metric(read_metric(&mut r, MetricKind::Kissme)?),
                TAG_MAHALANOBIS => SavedModel::Metric(read_metric(&mut r, MetricKind::MahalanobisGenuine)?),
                tag => return Err(invalid(format!("unknown method tag {tag}"))),
            },
            v => return Err(invalid(format!("unsupported model version {v}"))),
        };
        if r.read(&mut [0u8])? != 0 {
            return Err(invalid("trailing bytes after the model payload"));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(ToolError::io(path))?;
        self.write_to(io::BufWriter::new(file)).map_err(ToolError::io(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(ToolError::io(path))?;
        Self::read_from(io::BufReader::new(file))
            .map_err(|e| ToolError::Data(format!("{}: corrupt model file: {e}", path.display())))
    }
}

fn invalid(detail: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, detail.into())
}

fn read_array<const N: usize>(r: &mut impl Read) -> io::Result<[u8; N]> {
    let mut buf = [0; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_u32(r: &mut impl Read) -> io::Result<usize> {
    Ok(u32::from_le_bytes(read_array(r)?) as usize)
}

fn read_f64s(r: &mut impl Read, n: usize) -> io::Result<Vec<f64>> {
    let mut raw = Vec::new();
    r.take(n as u64 * 8).read_to_end(&mut raw)?;
    if raw.len() != n * 8 {
        return Err(io::ErrorKind::UnexpectedEof.into());
    }
    Ok(raw.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk"))).collect())
}

fn read_matrix(r: &mut impl Read, rows: usize, cols: usize) -> io::Result<DMatrix<f64>> {
    Ok(DMatrix::from_vec(rows, cols, read_f64s(r, rows * cols)?))
}

fn write_u32(w: &mut impl Write, v: usize) -> io::Result<()> {
    let v = u32::try_from(v).map_err(|_| invalid("dimension exceeds 32 bits"))?;
    w.write_all(&v.to_le_bytes())
}

fn write_f64s<'a>(w: &mut impl Write, values: impl IntoIterator<Item = &'a f64>) -> io::Result<()> {
    let bytes: Vec<u8> = values.into_iter().flat_map(|v| v.to_le_bytes()).collect();
    w.write_all(&bytes)
}

fn write_xqda(w: &mut impl Write, m: &XqdaModel) -> io::Result<()> {
    write_u32(w, m.input_dim())?;
    write_u32(w, m.subspace_dim())?;
    w.write_all(&m.regularizer().to_le_bytes())?;
    write_f64s(w, m.w().as_slice())?;
    write_f64s(w, m.m_prime().as_slice())?;
    write_f64s(w, m.eigenvalues())
}

fn read_xqda(r: &mut impl Read) -> io::Result<XqdaModel> {
    let d = read_u32(r)?;
    let k = read_u32(r)?;
    let reg = f64::from_le_bytes(read_array(r)?);
    let w = read_matrix(r, d, k)?;
    let m = read_matrix(r, k, k)?;
    let eigenvalues = read_f64s(r, k)?;
    XqdaModel::from_parts(w, m, eigenvalues, reg).map_err(|e| invalid(e.to_string()))
}

fn write_metric(w: &mut impl Write, m: &MetricModel) -> io::Result<()> {
    write_u32(w, m.input_dim())?;
    write_u32(w, m.m.nrows())?;
    w.write_all(&m.regularizer.to_le_bytes())?;
    match &m.pca {
        None => w.write_all(&[0]),
        Some(pca) => {
            w.write_all(&[1])?;
            write_f64s(w, pca.mean.as_slice())?;
            write_f64s(w, pca.basis.as_slice())?;
            write_f64s(w, &pca.variances)
        }
    }?;
    write_f64s(w, m.m.as_slice())
}

fn read_metric(r: &mut impl Read, kind: MetricKind) -> io::Result<MetricModel> {
    let d = read_u32(r)?;
    let k = read_u32(r)?;
    let regularizer = f64::from_le_bytes(read_array(r)?);
    let pca = match read_array::<1>(r)?[0] {
        0 if d == k => None,
        0 => return Err(invalid("metric without PCA must be square in the input dimension")),
        1 => Some(PcaModel {
            mean: DVector::from_vec(read_f64s(r, d)?),
            basis: read_matrix(r, d, k)?,
            variances: read_f64s(r, k)?,
        }),
        flag => return Err(invalid(format!("bad PCA flag {flag}"))),
    };
    let m = read_matrix(r, k, k)?;
    Ok(MetricModel { kind, pca, m, regularizer })
}
