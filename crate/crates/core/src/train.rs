//! Fidelity-cost training with Adam, the first-qubit decision rule and
//! qubit-by-qubit scaling.
//!
//! Label `+1` targets `|0⟩` on qubit 0 and label `-1` targets `|1⟩`, so the
//! per-point cost is `1 - P0` or `P0` respectively, where `P0` is the
//! probability of measuring qubit 0 in `|0⟩`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{FeatureTable, Label};
use crate::error::{Error, Result};
use crate::reupload::{extend_params, qnn_circuit, EncodedPoint, ExtendInit, QnnParams};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMethod {
    FiniteDiff,
    ParameterShift,
    /// Reverse-mode differentiation through the statevector.
    Adjoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchSize {
    Full,
    Size(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Optimal,
    Suboptimal,
    Scaling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: BatchSize,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub gradient_method: GradientMethod,
    pub fd_step: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            epochs: 10,
            batch_size: BatchSize::Full,
            seed: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            gradient_method: GradientMethod::Adjoint,
            fd_step: 1e-5,
        }
    }
}

/// Mini-batch size used by the named presets.
pub const PRESET_BATCH: usize = 32;

impl TrainConfig {
    /// lr 0.01 for 10 epochs.
    pub fn optimal() -> Self {
        Self {
            learning_rate: 0.01,
            epochs: 10,
            batch_size: BatchSize::Size(PRESET_BATCH),
            ..Self::default()
        }
    }

    /// lr 0.001, stopped after 2 epochs.
    pub fn suboptimal() -> Self {
        Self {
            learning_rate: 0.001,
            epochs: 2,
            batch_size: BatchSize::Size(PRESET_BATCH),
            ..Self::default()
        }
    }

    /// lr 0.005 for 10 epochs, used when growing the qubit count.
    pub fn scaling() -> Self {
        Self {
            learning_rate: 0.005,
            epochs: 10,
            batch_size: BatchSize::Size(PRESET_BATCH),
            ..Self::default()
        }
    }

    pub fn preset(p: Preset) -> Self {
        match p {
            Preset::Optimal => Self::optimal(),
            Preset::Suboptimal => Self::suboptimal(),
            Preset::Scaling => Self::scaling(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// A zero learning rate or zero epochs is accepted and leaves the
    /// parameters untouched.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning_rate {} must be finite and >= 0",
                self.learning_rate
            ));
        }
        if !(0.0 < self.adam_beta1
            && self.adam_beta1 < 1.0
            && 0.0 < self.adam_beta2
            && self.adam_beta2 < 1.0)
        {
            return bad("adam betas must lie in (0, 1)".into());
        }
        if !(self.adam_eps > 0.0) {
            return bad("adam_eps must be > 0".into());
        }
        if !(self.fd_step > 0.0) {
            return bad("fd_step must be > 0".into());
        }
        if self.batch_size == BatchSize::Size(0) {
            return bad("batch_size must be >= 1".into());
        }
        Ok(())
    }
}

/// Pre-encoded training points with their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSet<T> {
    pub points: Vec<EncodedPoint<T>>,
    pub labels: Vec<Label>,
}

impl<T: Real> EncodedSet<T> {
    pub fn new(points: Vec<EncodedPoint<T>>, labels: Vec<Label>) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} points, {} labels",
                points.len(),
                labels.len()
            )));
        }
        Ok(Self { points, labels })
    }

    pub fn from_table(t: &FeatureTable<T>) -> Result<Self> {
        let points = t
            .rows()
            .map(EncodedPoint::new)
            .collect::<Result<Vec<_>>>()?;
        Self::new(points, t.labels().to_vec())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            points: idx.iter().map(|&i| self.points[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// `P(qubit 0 = |0⟩)` after the classifier circuit.
pub fn prob_zero<T: Real>(params: &QnnParams<T>, point: &EncodedPoint<T>) -> Result<T> {
    Ok(qnn_circuit(params, point)?.run().prob_first_qubit_zero())
}

fn point_cost<T: Real>(p0: T, label: Label) -> T {
    match label {
        Label::Pos => T::one() - p0,
        Label::Neg => p0,
    }
}

/// Mean fidelity cost over `data`, in `[0, 1]`.
pub fn fidelity_cost<T: Real>(params: &QnnParams<T>, data: &EncodedSet<T>) -> Result<T> {
    if data.is_empty() {
        return Err(Error::Empty("training set"));
    }
    params.validate()?;
    let terms: Vec<T> = data
        .points
        .par_iter()
        .zip(&data.labels)
        .map(|(x, l)| prob_zero(params, x).map(|p| point_cost(p, *l)))
        .collect::<Result<_>>()?;
    Ok(terms.into_iter().sum::<T>() / T::from_usize_lossy(data.len()))
}

/// Cost and gradient over `data` with respect to [`QnnParams::flat`].
pub fn cost_and_gradient<T: Real>(
    params: &QnnParams<T>,
    data: &EncodedSet<T>,
    method: GradientMethod,
    fd_step: T,
) -> Result<(T, Vec<T>)> {
    if data.is_empty() {
        return Err(Error::Empty("training set"));
    }
    params.validate()?;
    let n = params.n_params();
    let terms: Vec<(T, Vec<T>)> = data
        .points
        .par_iter()
        .zip(&data.labels)
        .map(|(x, l)| {
            let c = qnn_circuit(params, x)?;
            let (p0, g) = match method {
                GradientMethod::Adjoint => c.prob_zero_and_gradient(n),
                GradientMethod::ParameterShift => (
                    c.run().prob_first_qubit_zero(),
                    c.prob_zero_gradient_shift(n),
                ),
                GradientMethod::FiniteDiff => (
                    c.run().prob_first_qubit_zero(),
                    c.prob_zero_gradient_fd(n, fd_step),
                ),
            };
            let sign = match l {
                Label::Pos => -T::one(),
                Label::Neg => T::one(),
            };
            Ok((
                point_cost(p0, *l),
                g.into_iter().map(|v| sign * v).collect(),
            ))
        })
        .collect::<Result<_>>()?;
    let m = T::from_usize_lossy(data.len());
    let mut cost = T::zero();
    let mut grad = vec![T::zero(); n];
    for (c, g) in terms {
        cost += c;
        for (acc, v) in grad.iter_mut().zip(g) {
            *acc += v;
        }
    }
    grad.iter_mut().for_each(|v| *v /= m);
    Ok((cost / m, grad))
}

pub fn gradient<T: Real>(
    params: &QnnParams<T>,
    data: &EncodedSet<T>,
    config: &TrainConfig,
) -> Result<Vec<T>> {
    config.validate()?;
    Ok(cost_and_gradient(params, data, config.gradient_method, T::lit(config.fd_step))?.1)
}

/// Adam moments and step counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub t: u32,
}

impl<T: Real> Adam<T> {
    pub fn new(n: usize, lr: T, beta1: T, beta2: T, eps: T) -> Self {
        Self {
            lr,
            beta1,
            beta2,
            eps,
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
            t: 0,
        }
    }

    pub fn from_config(n: usize, c: &TrainConfig) -> Self {
        Self::new(
            n,
            T::lit(c.learning_rate),
            T::lit(c.adam_beta1),
            T::lit(c.adam_beta2),
            T::lit(c.adam_eps),
        )
    }

    pub fn step(&mut self, params: &mut [T], grad: &[T]) -> Result<()> {
        if params.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(Error::DimensionMismatch(format!(
                "adam state has {} entries, got {} params and {} gradients",
                self.m.len(),
                params.len(),
                grad.len()
            )));
        }
        self.t += 1;
        let one = T::one();
        let c1 = one - self.beta1.powi(self.t as i32);
        let c2 = one - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (one - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (one - self.beta2) * g * g;
            let mhat = self.m[i] / c1;
            let vhat = self.v[i] / c2;
            params[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real"))]
pub struct TrainHistory<T> {
    /// Cost of the initial parameters on the full training set.
    pub initial_cost: T,
    /// Full-set cost after each epoch.
    pub cost_per_epoch: Vec<T>,
    pub best_cost: T,
    pub best_params: QnnParams<T>,
    pub steps: usize,
}

/// Runs `epochs` passes of (mini-)batch Adam. Batches are drawn from a
/// per-epoch shuffle seeded by `config.seed`; the best parameters among the
/// initial point and every epoch end are kept.
pub fn train_qnn<T: Real>(
    init: &QnnParams<T>,
    data: &EncodedSet<T>,
    config: &TrainConfig,
) -> Result<TrainHistory<T>> {
    config.validate()?;
    let initial_cost = fidelity_cost(init, data)?;
    let mut params = init.clone();
    let mut flat = params.flat();
    let mut adam = Adam::from_config(flat.len(), config);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let batch = match config.batch_size {
        BatchSize::Full => data.len(),
        BatchSize::Size(b) => b.min(data.len()),
    };
    let fd = T::lit(config.fd_step);
    let mut history = TrainHistory {
        initial_cost,
        cost_per_epoch: Vec::with_capacity(config.epochs),
        best_cost: initial_cost,
        best_params: init.clone(),
        steps: 0,
    };
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..config.epochs {
        if batch < data.len() {
            order.shuffle(&mut rng);
        }
        for chunk in order.chunks(batch) {
            let sub;
            let set = if chunk.len() == data.len() {
                data
            } else {
                sub = data.subset(chunk);
                &sub
            };
            let (_, g) = cost_and_gradient(&params, set, config.gradient_method, fd)?;
            adam.step(&mut flat, &g)?;
            params.set_flat(&flat)?;
            history.steps += 1;
        }
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "parameters diverged in epoch {epoch}"
            )));
        }
        let cost = fidelity_cost(&params, data)?;
        log::debug!("epoch {epoch}: cost {cost}");
        history.cost_per_epoch.push(cost);
        if cost < history.best_cost {
            history.best_cost = cost;
            history.best_params = params.clone();
        }
    }
    Ok(history)
}

/// `+1` iff `P0 > 1/2`; an exact tie gives `-1`.
pub fn qnn_predict<T: Real>(params: &QnnParams<T>, point: &EncodedPoint<T>) -> Result<Label> {
    Ok(decide(prob_zero(params, point)?))
}

pub fn decide<T: Real>(p0: T) -> Label {
    if p0 > T::lit(0.5) {
        Label::Pos
    } else {
        Label::Neg
    }
}

pub fn predict_all<T: Real>(
    params: &QnnParams<T>,
    points: &[EncodedPoint<T>],
) -> Result<Vec<Label>> {
    points.par_iter().map(|x| qnn_predict(params, x)).collect()
}

/// Fraction of `truth` matched by `pred`.
pub fn accuracy(pred: &[Label], truth: &[Label]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    pred.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
}

pub fn qnn_accuracy<T: Real>(params: &QnnParams<T>, data: &EncodedSet<T>) -> Result<f64> {
    Ok(accuracy(&predict_all(params, &data.points)?, &data.labels))
}

/// Trains `init` (a single-qubit network) and then grows it one qubit at a
/// time up to `n_max`, retraining all parameters at every stage. Stage `k`
/// trains with seed `config.seed + k - 1`. Returns one history per qubit
/// count.
pub fn scale_qnn<T: Real>(
    init: &QnnParams<T>,
    data: &EncodedSet<T>,
    n_max: usize,
    config: &TrainConfig,
    extend: ExtendInit,
) -> Result<Vec<TrainHistory<T>>> {
    if n_max == 0 {
        return Err(Error::Config("n_max must be >= 1".into()));
    }
    if init.n_qubits != 1 {
        return Err(Error::DimensionMismatch(format!(
            "scaling starts from 1 qubit, got {}",
            init.n_qubits
        )));
    }
    let mut out: Vec<TrainHistory<T>> = Vec::with_capacity(n_max);
    let mut start = init.clone();
    for k in 1..=n_max {
        if let Some(prev) = out.last() {
            start = extend_params(&prev.best_params, extend)?;
        }
        let cfg = config
            .clone()
            .with_seed(config.seed.wrapping_add(k as u64 - 1));
        let h = train_qnn(&start, data, &cfg)?;
        log::info!("{k} qubit(s): cost {} -> {}", h.initial_cost, h.best_cost);
        out.push(h);
    }
    Ok(out)
}
