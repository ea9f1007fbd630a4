//! Fidelity kernels `k(x, x') = |⟨ψ(x)|ψ(x')⟩|²` over re-uploading
//! embeddings, and their on-disk format.
//!
//! A matrix is stored as a data file plus a JSON sidecar at
//! `<data path>.json`. The data file is either CSV (one matrix row per line,
//! no header) or binary: the bytes `NQKM`, `u64` rows, `u64` cols, then
//! row-major `f64` values, all little-endian.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{is_psd_within, min_eigenvalue, Matrix};
use crate::qsim::{fidelity, Statevector};
use crate::reupload::{embed_1_to_n, run_nqubit_qnn, EncodedPoint, QnnParams};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingKind {
    /// Single-qubit parameters replicated on `n` wires with CNOT cascades.
    OneToN,
    /// The trained `n`-qubit classifier itself.
    NToN,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real"))]
pub struct EmbeddingSpec<T> {
    pub kind: EmbeddingKind,
    pub params: QnnParams<T>,
    pub n_qubits: usize,
}

impl<T: Real> EmbeddingSpec<T> {
    pub fn new(kind: EmbeddingKind, params: QnnParams<T>, n_qubits: usize) -> Result<Self> {
        let s = Self {
            kind,
            params,
            n_qubits,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let want = match self.kind {
            EmbeddingKind::OneToN => 1,
            EmbeddingKind::NToN => self.n_qubits,
        };
        if self.params.n_qubits != want {
            return Err(Error::Config(format!(
                "{:?} embedding on {} qubits needs {want}-qubit parameters, got {}",
                self.kind, self.n_qubits, self.params.n_qubits
            )));
        }
        if self.n_qubits == 0 || self.n_qubits > crate::qsim::MAX_QUBITS {
            return Err(Error::Config(format!(
                "embedding width {} out of range",
                self.n_qubits
            )));
        }
        Ok(())
    }

    pub fn state(&self, point: &EncodedPoint<T>) -> Result<Statevector<T>> {
        match self.kind {
            EmbeddingKind::OneToN => embed_1_to_n(&self.params, point, self.n_qubits),
            EmbeddingKind::NToN => run_nqubit_qnn(&self.params, point),
        }
    }

    pub fn states(&self, points: &[EncodedPoint<T>]) -> Result<Vec<Statevector<T>>> {
        self.validate()?;
        points.par_iter().map(|p| self.state(p)).collect()
    }

    /// Hex SHA-256 of the embedding's JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("spec serializes");
        hex(&Sha256::digest(&json))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn kernel_entry<T: Real>(
    spec: &EmbeddingSpec<T>,
    xi: &EncodedPoint<T>,
    xj: &EncodedPoint<T>,
) -> Result<T> {
    spec.validate()?;
    if xi.dim() != xj.dim() {
        return Err(Error::DimensionMismatch(format!(
            "points of dimension {} and {}",
            xi.dim(),
            xj.dim()
        )));
    }
    Ok(clamp_unit(fidelity(&spec.state(xi)?, &spec.state(xj)?)?))
}

/// Snaps values within `1e-12` outside `[0, 1]` back onto the bounds.
fn clamp_unit<T: Real>(v: T) -> T {
    let tol = T::lit(1e-12);
    if v < T::zero() && v > -tol {
        T::zero()
    } else if v > T::one() && v < T::one() + tol {
        T::one()
    } else {
        v
    }
}

fn same_dim<T: Real>(points: &[EncodedPoint<T>]) -> Result<()> {
    if let Some(first) = points.first() {
        if points.iter().any(|p| p.dim() != first.dim()) {
            return Err(Error::DimensionMismatch(
                "points have different dimensions".into(),
            ));
        }
    }
    Ok(())
}

/// Symmetric kernel matrix over a labeled point set.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix<T> {
    pub entries: Matrix<T>,
    pub point_ids: Vec<String>,
}

impl<T: Real> GramMatrix<T> {
    pub fn from_parts(entries: Matrix<T>, point_ids: Vec<String>) -> Result<Self> {
        if entries.rows() != entries.cols() || entries.rows() != point_ids.len() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} Gram matrix with {} ids",
                entries.rows(),
                entries.cols(),
                point_ids.len()
            )));
        }
        Ok(Self { entries, point_ids })
    }

    pub fn len(&self) -> usize {
        self.point_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.point_ids.is_empty()
    }

    /// Passes when `K + tol·I` has a Cholesky factorization.
    pub fn is_psd(&self, tol: T) -> bool {
        is_psd_within(&self.entries, tol)
    }

    pub fn min_eigenvalue(&self) -> Result<T> {
        min_eigenvalue(&self.entries)
    }
}

/// Gram matrix from one state per point; each unordered pair is evaluated
/// once and mirrored.
pub fn gram<T: Real>(
    spec: &EmbeddingSpec<T>,
    points: &[EncodedPoint<T>],
    ids: &[String],
) -> Result<GramMatrix<T>> {
    if points.is_empty() {
        return Err(Error::Empty("point set"));
    }
    if ids.len() != points.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} points, {} ids",
            points.len(),
            ids.len()
        )));
    }
    same_dim(points)?;
    let states = spec.states(points)?;
    gram_from_states(&states, ids)
}

pub fn gram_from_states<T: Real>(
    states: &[Statevector<T>],
    ids: &[String],
) -> Result<GramMatrix<T>> {
    let m = states.len();
    let upper: Vec<Vec<T>> = (0..m)
        .into_par_iter()
        .map(|i| {
            (i..m)
                .map(|j| fidelity(&states[i], &states[j]).map(clamp_unit))
                .collect::<Result<Vec<T>>>()
        })
        .collect::<Result<_>>()?;
    let mut k = Matrix::zeros(m, m);
    for (i, row) in upper.iter().enumerate() {
        for (off, v) in row.iter().enumerate() {
            k[(i, i + off)] = *v;
            k[(i + off, i)] = *v;
        }
    }
    GramMatrix::from_parts(k, ids.to_vec())
}

/// `test.len() × train.len()` matrix of `k(test_t, train_i)`.
pub fn cross_gram<T: Real>(
    spec: &EmbeddingSpec<T>,
    train: &[EncodedPoint<T>],
    test: &[EncodedPoint<T>],
) -> Result<Matrix<T>> {
    let all: Vec<EncodedPoint<T>> = train.iter().chain(test).cloned().collect();
    same_dim(&all)?;
    let tr = spec.states(train)?;
    let te = spec.states(test)?;
    cross_from_states(&tr, &te)
}

pub fn cross_from_states<T: Real>(
    train: &[Statevector<T>],
    test: &[Statevector<T>],
) -> Result<Matrix<T>> {
    let rows: Vec<Vec<T>> = test
        .par_iter()
        .map(|t| {
            train
                .iter()
                .map(|s| fidelity(t, s).map(clamp_unit))
                .collect::<Result<Vec<T>>>()
        })
        .collect::<Result<_>>()?;
    Matrix::from_vec(test.len(), train.len(), rows.concat())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixFormat {
    Csv,
    Binary,
}

impl MatrixFormat {
    /// `.bin` selects binary, anything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") => Self::Binary,
            _ => Self::Csv,
        }
    }
}

/// Metadata stored next to a kernel matrix file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub spec_hash: String,
    pub format: MatrixFormat,
    pub rows: usize,
    pub cols: usize,
    /// Ids of the matrix rows.
    pub point_ids: Vec<String>,
    /// Ids of the columns when they differ from the rows (cross matrices).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column_ids: Option<Vec<String>>,
    pub p: usize,
    pub n_qubits: usize,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

const MAGIC: &[u8; 4] = b"NQKM";

pub fn write_matrix<T: Real, W: Write>(
    m: &Matrix<T>,
    format: MatrixFormat,
    mut w: W,
) -> Result<()> {
    match format {
        MatrixFormat::Binary => {
            w.write_all(MAGIC)?;
            w.write_all(&(m.rows() as u64).to_le_bytes())?;
            w.write_all(&(m.cols() as u64).to_le_bytes())?;
            for v in m.as_slice() {
                w.write_all(&v.to_f64_lossy().to_le_bytes())?;
            }
        }
        MatrixFormat::Csv => {
            let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
            for i in 0..m.rows() {
                wr.write_record(m.row(i).iter().map(|v| v.to_f64_lossy().to_string()))?;
            }
            wr.flush()?;
        }
    }
    Ok(())
}

pub fn read_matrix<T: Real, R: Read>(format: MatrixFormat, mut r: R) -> Result<Matrix<T>> {
    match format {
        MatrixFormat::Binary => {
            let mut head = [0u8; 20];
            r.read_exact(&mut head)?;
            if &head[..4] != MAGIC {
                return Err(Error::Data("not a kernel matrix file".into()));
            }
            let rows = u64::from_le_bytes(head[4..12].try_into().expect("8 bytes")) as usize;
            let cols = u64::from_le_bytes(head[12..20].try_into().expect("8 bytes")) as usize;
            let mut bytes = Vec::new();
            r.read_to_end(&mut bytes)?;
            if bytes.len() != rows * cols * 8 {
                return Err(Error::Data(format!(
                    "{} payload bytes for a {rows}x{cols} matrix",
                    bytes.len()
                )));
            }
            let data = bytes
                .chunks_exact(8)
                .map(|c| T::lit(f64::from_le_bytes(c.try_into().expect("8 bytes"))))
                .collect();
            Matrix::from_vec(rows, cols, data)
        }
        MatrixFormat::Csv => {
            let mut rd = csv::ReaderBuilder::new().has_headers(false).from_reader(r);
            let mut data = Vec::new();
            let mut rows = 0;
            let mut cols = None;
            for rec in rd.records() {
                let rec = rec?;
                if *cols.get_or_insert(rec.len()) != rec.len() {
                    return Err(Error::Data(format!("ragged matrix row {rows}")));
                }
                for f in rec.iter() {
                    let v: f64 = f
                        .trim()
                        .parse()
                        .map_err(|_| Error::Data(format!("bad matrix entry {f:?}")))?;
                    data.push(T::lit(v));
                }
                rows += 1;
            }
            Matrix::from_vec(rows, cols.unwrap_or(0), data)
        }
    }
}

/// Writes the matrix and its sidecar; the format follows the extension.
pub fn save_matrix<T: Real>(path: &Path, m: &Matrix<T>, meta: &Sidecar) -> Result<()> {
    if meta.rows != m.rows() || meta.cols != m.cols() {
        return Err(Error::DimensionMismatch(
            "sidecar shape does not match the matrix".into(),
        ));
    }
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_matrix(m, meta.format, f)?;
    std::fs::write(sidecar_path(path), serde_json::to_string_pretty(meta)?)?;
    Ok(())
}

pub fn load_matrix<T: Real>(path: &Path) -> Result<(Matrix<T>, Sidecar)> {
    let meta: Sidecar = serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)
        .map_err(|e| Error::Data(format!("bad sidecar: {e}")))?;
    let m = read_matrix(
        meta.format,
        std::io::BufReader::new(std::fs::File::open(path)?),
    )?;
    if m.rows() != meta.rows || m.cols() != meta.cols || meta.point_ids.len() != meta.rows {
        return Err(Error::Data(format!(
            "matrix is {}x{} but the sidecar describes {}x{}",
            m.rows(),
            m.cols(),
            meta.rows,
            meta.cols
        )));
    }
    if let Some(c) = &meta.column_ids {
        if c.len() != meta.cols {
            return Err(Error::Data(
                "sidecar column ids do not match the matrix width".into(),
            ));
        }
    }
    Ok((m, meta))
}
