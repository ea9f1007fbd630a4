//! Data re-uploading circuits: the layered single-qubit classifier, its
//! iteratively widened n-qubit form, and the two kernel embeddings built
//! from trained parameters.
//!
//! Every layer of an n-qubit classifier is, in application order:
//!
//! 1. the encoding block: each encoding unitary applied to every qubit;
//! 2. one trainable SU(2) gate per qubit;
//! 3. the coupling block: for each extra qubit `k = 1..n` in ascending
//!    order, a controlled SU(2) with angles `phi[l][k-1]` (star topology:
//!    control `k`, target 0; chain topology: control `k`, target `k-1`).
//!
//! Zero coupling angles make every controlled gate the identity, so a
//! freshly added qubit leaves the marginal of qubit 0 untouched.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qsim::{Circuit, Op, Statevector, Su2Angles};
use crate::scalar::Real;

/// How extra qubits are coupled into the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// Qubit `k` controls a rotation on qubit 0.
    #[default]
    Star,
    /// Qubit `k` controls a rotation on qubit `k - 1`.
    Chain,
}

/// Trainable angles of an `n_qubits`-wide, `n_layers`-deep classifier.
///
/// `theta` is row-major `[layer][qubit][axis]` and `phi` is row-major
/// `[layer][coupling][axis]`, where coupling `k` belongs to qubit `k + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de>"))]
pub struct QnnParams<T> {
    pub n_qubits: usize,
    pub n_layers: usize,
    pub theta: Vec<T>,
    pub phi: Vec<T>,
    #[serde(default)]
    pub coupling: Coupling,
}

impl<T: Real> QnnParams<T> {
    pub fn zeros(n_qubits: usize, n_layers: usize) -> Result<Self> {
        let p = Self {
            n_qubits,
            n_layers,
            theta: vec![T::zero(); 3 * n_layers * n_qubits],
            phi: vec![T::zero(); 3 * n_layers * n_qubits.saturating_sub(1)],
            coupling: Coupling::Star,
        };
        p.validate()?;
        Ok(p)
    }

    /// Single-qubit angles drawn uniformly from `[-pi, pi)`; couplings zero.
    pub fn random_uniform<R: Rng + ?Sized>(
        n_qubits: usize,
        n_layers: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut p = Self::zeros(n_qubits, n_layers)?;
        let pi = std::f64::consts::PI;
        for t in p.theta.iter_mut() {
            *t = T::lit(rng.random_range(-pi..pi));
        }
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 || self.n_qubits > crate::qsim::MAX_QUBITS {
            return Err(Error::InvalidParameter(format!(
                "n_qubits = {}",
                self.n_qubits
            )));
        }
        if self.n_layers == 0 {
            return Err(Error::InvalidParameter("n_layers must be >= 1".into()));
        }
        let want_theta = 3 * self.n_layers * self.n_qubits;
        let want_phi = 3 * self.n_layers * (self.n_qubits - 1);
        if self.theta.len() != want_theta || self.phi.len() != want_phi {
            return Err(Error::DimensionMismatch(format!(
                "theta/phi lengths {}/{} but {}x{} network needs {want_theta}/{want_phi}",
                self.theta.len(),
                self.phi.len(),
                self.n_qubits,
                self.n_layers
            )));
        }
        if self.theta.iter().chain(&self.phi).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite angle".into()));
        }
        Ok(())
    }

    pub fn theta_offset(&self, layer: usize, qubit: usize) -> usize {
        3 * (layer * self.n_qubits + qubit)
    }

    pub fn phi_offset(&self, layer: usize, coupling: usize) -> usize {
        3 * (layer * (self.n_qubits - 1) + coupling)
    }

    pub fn theta_at(&self, layer: usize, qubit: usize) -> Su2Angles<T> {
        Su2Angles::from_slice(&self.theta[self.theta_offset(layer, qubit)..])
    }

    pub fn phi_at(&self, layer: usize, coupling: usize) -> Su2Angles<T> {
        Su2Angles::from_slice(&self.phi[self.phi_offset(layer, coupling)..])
    }

    pub fn n_params(&self) -> usize {
        self.theta.len() + self.phi.len()
    }

    /// `theta` followed by `phi`.
    pub fn flat(&self) -> Vec<T> {
        self.theta.iter().chain(&self.phi).copied().collect()
    }

    pub fn set_flat(&mut self, v: &[T]) -> Result<()> {
        if v.len() != self.n_params() {
            return Err(Error::DimensionMismatch(format!(
                "flat vector has {} entries, expected {}",
                v.len(),
                self.n_params()
            )));
        }
        let (t, p) = v.split_at(self.theta.len());
        self.theta.copy_from_slice(t);
        self.phi.copy_from_slice(p);
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

impl<T: Real> QnnParams<T> {
    pub fn from_json(s: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(s)?;
        p.validate()?;
        Ok(p)
    }
}

/// Packs features into consecutive ZYZ triples, zero-padding the last one.
pub fn encode_angles<T: Real>(features: &[T]) -> Result<Vec<Su2Angles<T>>> {
    if features.is_empty() {
        return Err(Error::Empty("feature vector"));
    }
    Ok(features
        .chunks(3)
        .map(|c| {
            let mut a = [T::zero(); 3];
            a[..c.len()].copy_from_slice(c);
            Su2Angles::from_slice(&a)
        })
        .collect())
}

/// A feature vector together with its encoding angles.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedPoint<T> {
    features: Vec<T>,
    angles: Vec<Su2Angles<T>>,
}

impl<T: Real> EncodedPoint<T> {
    pub fn new(features: &[T]) -> Result<Self> {
        if features.iter().any(|f| !f.is_finite()) {
            return Err(Error::InvalidParameter("non-finite feature".into()));
        }
        if features.iter().any(|f| f.abs() > T::one()) {
            log::warn!("feature outside [-1, 1] passed to the encoder");
        }
        Ok(Self {
            features: features.to_vec(),
            angles: encode_angles(features)?,
        })
    }

    pub fn features(&self) -> &[T] {
        &self.features
    }

    pub fn angles(&self) -> &[Su2Angles<T>] {
        &self.angles
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }
}

fn push_encoding<T: Real>(c: &mut Circuit<T>, point: &EncodedPoint<T>, n: usize) -> Result<()> {
    for q in 0..n {
        for enc in point.angles() {
            c.push(Op::Rot {
                qubit: q,
                angles: *enc,
                param: None,
            })?;
        }
    }
    Ok(())
}

/// Circuit of the n-qubit classifier. Parameter offsets index into
/// [`QnnParams::flat`].
pub fn qnn_circuit<T: Real>(params: &QnnParams<T>, point: &EncodedPoint<T>) -> Result<Circuit<T>> {
    params.validate()?;
    let n = params.n_qubits;
    let phi_base = params.theta.len();
    let mut c = Circuit::new(n)?;
    for l in 0..params.n_layers {
        push_encoding(&mut c, point, n)?;
        for q in 0..n {
            let off = params.theta_offset(l, q);
            c.push(Op::Rot {
                qubit: q,
                angles: params.theta_at(l, q),
                param: Some(off),
            })?;
        }
        for k in 1..n {
            let target = match params.coupling {
                Coupling::Star => 0,
                Coupling::Chain => k - 1,
            };
            let off = phi_base + params.phi_offset(l, k - 1);
            c.push(Op::CRot {
                control: k,
                target,
                angles: params.phi_at(l, k - 1),
                param: Some(off),
            })?;
        }
    }
    Ok(c)
}

pub fn run_single_qubit_qnn<T: Real>(
    params: &QnnParams<T>,
    point: &EncodedPoint<T>,
) -> Result<Statevector<T>> {
    if params.n_qubits != 1 {
        return Err(Error::DimensionMismatch(format!(
            "single-qubit classifier given {}-qubit parameters",
            params.n_qubits
        )));
    }
    run_nqubit_qnn(params, point)
}

pub fn run_nqubit_qnn<T: Real>(
    params: &QnnParams<T>,
    point: &EncodedPoint<T>,
) -> Result<Statevector<T>> {
    Ok(qnn_circuit(params, point)?.run())
}

/// Circuit of the 1-to-n embedding: the single-qubit classifier replicated on
/// `n` wires with a nearest-neighbour CNOT cascade closing every layer.
pub fn one_to_n_circuit<T: Real>(
    params: &QnnParams<T>,
    point: &EncodedPoint<T>,
    n: usize,
) -> Result<Circuit<T>> {
    params.validate()?;
    if params.n_qubits != 1 {
        return Err(Error::DimensionMismatch(format!(
            "1-to-n embedding needs single-qubit parameters, got {} qubits",
            params.n_qubits
        )));
    }
    let mut c = Circuit::new(n)?;
    for l in 0..params.n_layers {
        push_encoding(&mut c, point, n)?;
        let off = params.theta_offset(l, 0);
        for q in 0..n {
            c.push(Op::Rot {
                qubit: q,
                angles: params.theta_at(l, 0),
                param: Some(off),
            })?;
        }
        for s in 0..n.saturating_sub(1) {
            c.push(Op::Cnot {
                control: s,
                target: s + 1,
            })?;
        }
    }
    Ok(c)
}

pub fn embed_1_to_n<T: Real>(
    params: &QnnParams<T>,
    point: &EncodedPoint<T>,
    n: usize,
) -> Result<Statevector<T>> {
    Ok(one_to_n_circuit(params, point, n)?.run())
}

/// Initialization of the single-qubit angles of a newly added qubit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
#[derive(Default)]
pub enum ExtendInit {
    /// Copy qubit 0's trained angles layer by layer.
    #[default]
    CopyFirst,
    /// As `CopyFirst`, plus Gaussian noise of standard deviation `sigma`.
    CopyFirstNoisy { sigma: f64, seed: u64 },
}


/// Widens trained `n`-qubit parameters to `n + 1` qubits. Existing angles are
/// copied, the new qubit's couplings are exactly zero.
pub fn extend_params<T: Real>(params: &QnnParams<T>, init: ExtendInit) -> Result<QnnParams<T>> {
    params.validate()?;
    let n = params.n_qubits;
    let mut out = QnnParams::zeros(n + 1, params.n_layers)?;
    out.coupling = params.coupling;
    let mut noise: Option<(rand_chacha::ChaCha8Rng, Normal<f64>)> = match init {
        ExtendInit::CopyFirst => None,
        ExtendInit::CopyFirstNoisy { sigma, seed } => {
            use rand::SeedableRng;
            let normal = Normal::new(0.0, sigma)
                .map_err(|e| Error::InvalidParameter(format!("noise sigma: {e}")))?;
            Some((rand_chacha::ChaCha8Rng::seed_from_u64(seed), normal))
        }
    };
    for l in 0..params.n_layers {
        for q in 0..n {
            let (src, dst) = (params.theta_offset(l, q), out.theta_offset(l, q));
            out.theta[dst..dst + 3].copy_from_slice(&params.theta[src..src + 3]);
        }
        let src = params.theta_offset(l, 0);
        let dst = out.theta_offset(l, n);
        for a in 0..3 {
            let mut v = params.theta[src + a];
            if let Some((rng, normal)) = noise.as_mut() {
                v += T::lit(normal.sample(rng));
            }
            out.theta[dst + a] = v;
        }
        for k in 0..n.saturating_sub(1) {
            let (src, dst) = (params.phi_offset(l, k), out.phi_offset(l, k));
            out.phi[dst..dst + 3].copy_from_slice(&params.phi[src..src + 3]);
        }
    }
    Ok(out)
}
