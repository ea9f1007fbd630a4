//! Soft-margin binary SVM trained in the dual by SMO.
//!
//! The solver minimizes `½ αᵀQα − Σα` with `Q_ij = y_i y_j K_ij`,
//! `0 ≤ α ≤ C` and `Σ α_i y_i = 0`. Each iteration takes the maximal
//! violating pair (lowest index on ties) and stops once the violation gap
//! falls below `tol`.
//!
//! Quantum kernels are used in shifted form `(k + 1) / 2` for both training
//! and prediction, and by default the decision drops the bias:
//! `sign(Σ α_i y_i (k_i + 1) / 2)`. The fitted bias is still stored.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{fold_partition, stratified_kfold, FeatureTable, Label};
use crate::error::{Error, Result};
use crate::linalg::{is_psd_within, Matrix};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum KernelKind {
    Precomputed,
    Linear,
    Rbf { gamma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasMode {
    /// Decision without a bias term.
    Zero,
    /// Decision with the bias fitted from the KKT conditions.
    Fitted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub c: f64,
    pub bias: BiasMode,
    /// Train and predict on `(k + 1) / 2` instead of `k`.
    pub shift: bool,
    pub tol: f64,
    pub max_iter: usize,
    /// Slack for the Cholesky PSD test on precomputed kernels.
    pub psd_tol: f64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            bias: BiasMode::Zero,
            shift: true,
            tol: 1e-5,
            max_iter: 10_000_000,
            psd_tol: 1e-8,
        }
    }
}

impl SvmConfig {
    /// Plain kernel with a fitted bias, for the classical baselines.
    pub fn classical(c: f64) -> Self {
        Self {
            c,
            bias: BiasMode::Fitted,
            shift: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config(format!("C = {} must be positive", self.c)));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::Config(
                "solver tolerance and iteration cap must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real"))]
pub struct SvmModel<T> {
    pub alphas: Vec<T>,
    pub labels: Vec<Label>,
    pub point_ids: Vec<String>,
    pub c: f64,
    pub kernel: KernelKind,
    pub bias_mode: BiasMode,
    pub shift: bool,
    /// Fitted bias, used only in [`BiasMode::Fitted`].
    pub b: T,
    /// Set when every training label is the same; predictions return it.
    pub constant: Option<Label>,
    pub iterations: usize,
    /// Maximal KKT violation at termination.
    pub kkt_gap: T,
    /// Training rows, kept for feature kernels.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub train_features: Vec<Vec<T>>,
}

impl<T: Real> SvmModel<T> {
    pub fn support_ids(&self) -> Vec<&str> {
        self.alphas
            .iter()
            .zip(&self.point_ids)
            .filter(|(a, _)| **a > T::zero())
            .map(|(_, id)| id.as_str())
            .collect()
    }

    pub fn n_support(&self) -> usize {
        self.alphas.iter().filter(|a| **a > T::zero()).count()
    }

    /// `Σ α_i y_i k'_i (+ b)` for a row of base kernel values against the
    /// training points.
    pub fn decision_value(&self, k_row: &[T]) -> Result<T> {
        if k_row.len() != self.alphas.len() {
            return Err(Error::DimensionMismatch(format!(
                "kernel row of length {} for {} training points",
                k_row.len(),
                self.alphas.len()
            )));
        }
        let half = T::lit(0.5);
        let mut s = T::zero();
        for ((a, y), k) in self.alphas.iter().zip(&self.labels).zip(k_row) {
            if *a > T::zero() {
                let k = if self.shift {
                    (*k + T::one()) * half
                } else {
                    *k
                };
                s += *a * y.value::<T>() * k;
            }
        }
        if self.bias_mode == BiasMode::Fitted {
            s += self.b;
        }
        Ok(s)
    }

    /// Positive decision values give `+1`; zero gives `-1`.
    pub fn predict(&self, k_row: &[T]) -> Result<Label> {
        if let Some(l) = self.constant {
            return Ok(l);
        }
        Ok(if self.decision_value(k_row)? > T::zero() {
            Label::Pos
        } else {
            Label::Neg
        })
    }

    pub fn predict_rows(&self, k: &Matrix<T>) -> Result<Vec<Label>> {
        (0..k.rows()).map(|i| self.predict(k.row(i))).collect()
    }

    /// Prediction for a raw feature vector (linear and RBF models).
    pub fn predict_features(&self, x: &[T]) -> Result<Label> {
        let row = self.feature_row(x)?;
        self.predict(&row)
    }

    fn feature_row(&self, x: &[T]) -> Result<Vec<T>> {
        if self.train_features.len() != self.alphas.len() {
            return Err(Error::Config(
                "model was trained on a precomputed kernel".into(),
            ));
        }
        self.train_features
            .iter()
            .map(|t| feature_kernel(self.kernel, t, x))
            .collect()
    }

    /// Dual objective `Σα − ½ αᵀQα` for the base kernel `k`.
    pub fn dual_objective(&self, k: &Matrix<T>) -> T {
        let m = self.alphas.len();
        let kk = |i: usize, j: usize| {
            if self.shift {
                (k[(i, j)] + T::one()) * T::lit(0.5)
            } else {
                k[(i, j)]
            }
        };
        let mut quad = T::zero();
        for i in 0..m {
            for j in 0..m {
                quad += self.alphas[i]
                    * self.alphas[j]
                    * self.labels[i].value::<T>()
                    * self.labels[j].value::<T>()
                    * kk(i, j);
            }
        }
        self.alphas.iter().copied().sum::<T>() - quad * T::lit(0.5)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

pub fn linear_kernel<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

pub fn rbf_kernel<T: Real>(a: &[T], b: &[T], gamma: T) -> T {
    let d: T = a.iter().zip(b).map(|(x, y)| (*x - *y) * (*x - *y)).sum();
    (-gamma * d).exp()
}

fn feature_kernel<T: Real>(kind: KernelKind, a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    match kind {
        KernelKind::Linear => Ok(linear_kernel(a, b)),
        KernelKind::Rbf { gamma } => Ok(rbf_kernel(a, b, T::lit(gamma))),
        KernelKind::Precomputed => Err(Error::Config(
            "precomputed kernels have no feature form".into(),
        )),
    }
}

/// `1 / (p · Var)` with the variance taken over every feature value.
pub fn default_rbf_gamma<T: Real>(t: &FeatureTable<T>) -> f64 {
    let v: Vec<f64> = t.values().iter().map(|x| x.to_f64_lossy()).collect();
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;
    if var > 0.0 {
        1.0 / (t.n_features() as f64 * var)
    } else {
        1.0
    }
}

/// Solves the dual for a precomputed base kernel. Kernels that fail the PSD
/// test are rejected.
pub fn solve_dual<T: Real>(
    k: &Matrix<T>,
    y: &[Label],
    ids: &[String],
    cfg: &SvmConfig,
) -> Result<SvmModel<T>> {
    cfg.validate()?;
    let m = y.len();
    if k.rows() != m || k.cols() != m || ids.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} kernel, {m} labels, {} ids",
            k.rows(),
            k.cols(),
            ids.len()
        )));
    }
    if m == 0 {
        return Err(Error::Empty("training set"));
    }
    if k.asymmetry() > T::lit(1e-8) {
        return Err(Error::Numerical("kernel matrix is not symmetric".into()));
    }
    if !is_psd_within(k, T::lit(cfg.psd_tol)) {
        return Err(Error::Numerical(format!(
            "kernel matrix is not PSD within {}",
            cfg.psd_tol
        )));
    }
    smo(k, y, ids, cfg, KernelKind::Precomputed)
}

/// Trains on feature rows with a linear or RBF kernel.
pub fn fit_features<T: Real>(
    x: &FeatureTable<T>,
    kernel: KernelKind,
    cfg: &SvmConfig,
) -> Result<SvmModel<T>> {
    let m = x.n_rows();
    let mut k = Matrix::zeros(m, m);
    for i in 0..m {
        for j in 0..=i {
            let v = feature_kernel(kernel, x.row(i), x.row(j))?;
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    cfg.validate()?;
    let mut model = smo(&k, x.labels(), x.ids(), cfg, kernel)?;
    model.train_features = x.rows().map(<[T]>::to_vec).collect();
    Ok(model)
}

fn smo<T: Real>(
    k: &Matrix<T>,
    y: &[Label],
    ids: &[String],
    cfg: &SvmConfig,
    kernel: KernelKind,
) -> Result<SvmModel<T>> {
    let m = y.len();
    let c = T::lit(cfg.c);
    let mut model = SvmModel {
        alphas: vec![T::zero(); m],
        labels: y.to_vec(),
        point_ids: ids.to_vec(),
        c: cfg.c,
        kernel,
        bias_mode: cfg.bias,
        shift: cfg.shift,
        b: T::zero(),
        constant: None,
        iterations: 0,
        kkt_gap: T::zero(),
        train_features: Vec::new(),
    };
    if y.iter().all(|l| *l == y[0]) {
        model.constant = Some(y[0]);
        return Ok(model);
    }
    let half = T::lit(0.5);
    let ys: Vec<T> = y.iter().map(|l| l.value()).collect();
    let kk: Vec<T> = if cfg.shift {
        k.as_slice()
            .iter()
            .map(|v| (*v + T::one()) * half)
            .collect()
    } else {
        k.as_slice().to_vec()
    };
    let prob = Dual {
        m,
        c,
        ys: &ys,
        kk: &kk,
        tol: T::lit(cfg.tol),
        max_iter: cfg.max_iter,
    };
    let sol = match cfg.bias {
        BiasMode::Fitted => prob.solve_pairs()?,
        BiasMode::Zero => prob.solve_coordinates()?,
    };
    model.iterations = sol.iterations;
    model.kkt_gap = sol.gap;
    model.b = sol.b;
    model.alphas = sol.alpha;
    Ok(model)
}

struct Dual<'a, T> {
    m: usize,
    c: T,
    ys: &'a [T],
    /// Row-major kernel as seen by the solver (shift already applied).
    kk: &'a [T],
    tol: T,
    max_iter: usize,
}

struct Solution<T> {
    alpha: Vec<T>,
    b: T,
    gap: T,
    iterations: usize,
}

impl<T: Real> Dual<'_, T> {
    fn q(&self, i: usize, j: usize) -> T {
        self.ys[i] * self.ys[j] * self.kk[i * self.m + j]
    }

    /// Box constraints only: greedy coordinate descent on the coordinate with
    /// the largest projected gradient.
    fn solve_coordinates(&self) -> Result<Solution<T>> {
        let (m, c) = (self.m, self.c);
        let mut alpha = vec![T::zero(); m];
        let mut grad = vec![-T::one(); m];
        let mut iter = 0;
        loop {
            let (mut best, mut i) = (T::zero(), usize::MAX);
            for t in 0..m {
                let pg = projected_gradient(alpha[t], grad[t], c).abs();
                if pg > best {
                    best = pg;
                    i = t;
                }
            }
            if i == usize::MAX || best < self.tol {
                return Ok(Solution {
                    alpha,
                    b: T::zero(),
                    gap: best,
                    iterations: iter,
                });
            }
            if iter >= self.max_iter {
                return Err(Error::Numerical(format!(
                    "solver did not converge in {iter} iterations (violation {best})"
                )));
            }
            iter += 1;
            let mut qii = self.q(i, i);
            if qii <= T::zero() {
                qii = T::lit(1e-12);
            }
            let new = (alpha[i] - grad[i] / qii).max(T::zero()).min(c);
            let d = new - alpha[i];
            alpha[i] = new;
            for t in 0..m {
                grad[t] += self.q(i, t) * d;
            }
        }
    }

    /// With `Σ α_i y_i = 0`: two-variable SMO steps on the maximal violating
    /// pair, then the bias from the KKT conditions.
    fn solve_pairs(&self) -> Result<Solution<T>> {
        let (m, c, ys) = (self.m, self.c, self.ys);
        let q = |i: usize, j: usize| self.q(i, j);
        let tau = T::lit(1e-12);
        let tol = self.tol;
        let mut alpha = vec![T::zero(); m];
        let mut grad = vec![-T::one(); m];
        let mut iter = 0;
        let gap_out;
        let in_up = |a: T, yi: T| (yi > T::zero() && a < c) || (yi < T::zero() && a > T::zero());
        let in_low = |a: T, yi: T| (yi < T::zero() && a < c) || (yi > T::zero() && a > T::zero());
        loop {
            let mut gmax = T::neg_infinity();
            let mut gmin = T::infinity();
            let (mut i, mut j) = (usize::MAX, usize::MAX);
            for t in 0..m {
                let v = -ys[t] * grad[t];
                if in_up(alpha[t], ys[t]) && v > gmax {
                    gmax = v;
                    i = t;
                }
                if in_low(alpha[t], ys[t]) && v < gmin {
                    gmin = v;
                    j = t;
                }
            }
            let gap = gmax - gmin;
            if i == usize::MAX || j == usize::MAX || gap < tol {
                gap_out = if gap.is_finite() {
                    gap.max(T::zero())
                } else {
                    T::zero()
                };
                break;
            }
            if iter >= self.max_iter {
                return Err(Error::Numerical(format!(
                    "SMO did not converge in {iter} iterations (gap {gap})"
                )));
            }
            iter += 1;
            let (old_i, old_j) = (alpha[i], alpha[j]);
            if ys[i] != ys[j] {
                let mut quad = q(i, i) + q(j, j) + T::lit(2.0) * q(i, j);
                if quad <= T::zero() {
                    quad = tau;
                }
                let delta = (-grad[i] - grad[j]) / quad;
                let diff = alpha[i] - alpha[j];
                alpha[i] += delta;
                alpha[j] += delta;
                if diff > T::zero() {
                    if alpha[j] < T::zero() {
                        alpha[j] = T::zero();
                        alpha[i] = diff;
                    }
                } else if alpha[i] < T::zero() {
                    alpha[i] = T::zero();
                    alpha[j] = -diff;
                }
                if diff > T::zero() {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = c - diff;
                    }
                } else if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = c + diff;
                }
            } else {
                let mut quad = q(i, i) + q(j, j) - T::lit(2.0) * q(i, j);
                if quad <= T::zero() {
                    quad = tau;
                }
                let delta = (grad[i] - grad[j]) / quad;
                let sum = alpha[i] + alpha[j];
                alpha[i] -= delta;
                alpha[j] += delta;
                if sum > c {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = sum - c;
                    }
                } else if alpha[j] < T::zero() {
                    alpha[j] = T::zero();
                    alpha[i] = sum;
                }
                if sum > c {
                    if alpha[j] > c {
                        alpha[j] = c;
                        alpha[i] = sum - c;
                    }
                } else if alpha[i] < T::zero() {
                    alpha[i] = T::zero();
                    alpha[j] = sum;
                }
            }
            let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
            for t in 0..m {
                grad[t] += q(i, t) * di + q(j, t) * dj;
            }
        }
        let b = -rho(&alpha, &grad, ys, c);
        Ok(Solution {
            alpha,
            b,
            gap: gap_out,
            iterations: iter,
        })
    }
}

fn projected_gradient<T: Real>(a: T, g: T, c: T) -> T {
    if a <= T::zero() {
        g.min(T::zero())
    } else if a >= c {
        g.max(T::zero())
    } else {
        g
    }
}

/// Offset from free support vectors, or the midpoint of the feasible
/// interval when there are none.
fn rho<T: Real>(alpha: &[T], grad: &[T], ys: &[T], c: T) -> T {
    let (mut ub, mut lb) = (T::infinity(), T::neg_infinity());
    let (mut sum, mut n_free) = (T::zero(), 0usize);
    for t in 0..alpha.len() {
        let yg = ys[t] * grad[t];
        let pos = ys[t] > T::zero();
        if alpha[t] >= c {
            if pos {
                lb = lb.max(yg);
            } else {
                ub = ub.min(yg);
            }
        } else if alpha[t] <= T::zero() {
            if pos {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum += yg;
        }
    }
    if n_free > 0 {
        sum / T::from_usize_lossy(n_free)
    } else {
        (ub + lb) * T::lit(0.5)
    }
}

/// Largest violation of the dual optimality conditions for the model's
/// alphas on the base kernel `k`, measured like the solver's stopping rule:
/// the largest projected gradient without a bias, the maximal violating
/// pair gap with one.
pub fn kkt_violation<T: Real>(model: &SvmModel<T>, k: &Matrix<T>) -> T {
    let m = model.alphas.len();
    let c = T::lit(model.c);
    let ys: Vec<T> = model.labels.iter().map(|l| l.value()).collect();
    let kk = |i: usize, j: usize| {
        if model.shift {
            (k[(i, j)] + T::one()) * T::lit(0.5)
        } else {
            k[(i, j)]
        }
    };
    let grad: Vec<T> = (0..m)
        .map(|t| {
            (0..m)
                .map(|s| ys[t] * ys[s] * kk(t, s) * model.alphas[s])
                .sum::<T>()
                - T::one()
        })
        .collect();
    if model.bias_mode == BiasMode::Zero {
        return (0..m)
            .map(|t| projected_gradient(model.alphas[t], grad[t], c).abs())
            .fold(T::zero(), T::max);
    }
    let (mut gmax, mut gmin) = (T::neg_infinity(), T::infinity());
    for t in 0..m {
        let v = -ys[t] * grad[t];
        let a = model.alphas[t];
        if (ys[t] > T::zero() && a < c) || (ys[t] < T::zero() && a > T::zero()) {
            gmax = gmax.max(v);
        }
        if (ys[t] < T::zero() && a < c) || (ys[t] > T::zero() && a > T::zero()) {
            gmin = gmin.min(v);
        }
    }
    (gmax - gmin).max(T::zero())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelChoice {
    Linear,
    Rbf,
}

/// Sampling distributions for [`random_search_svc`]. `C` and `gamma` are
/// log-uniform over their closed ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub c_range: (f64, f64),
    pub kernels: Vec<KernelChoice>,
    pub gamma_range: (f64, f64),
    pub folds: usize,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            c_range: (1e-3, 1e3),
            kernels: vec![KernelChoice::Linear, KernelChoice::Rbf],
            gamma_range: (1e-3, 1e2),
            folds: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub c: f64,
    pub kernel: KernelKind,
    pub cv_accuracy: f64,
    pub draws: usize,
}

fn log_uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo.ln()..=hi.ln()).exp()
    }
}

/// Mean stratified k-fold accuracy of one hyperparameter setting.
pub fn cv_accuracy<T: Real>(
    data: &FeatureTable<T>,
    kernel: KernelKind,
    c: f64,
    folds: usize,
    seed: u64,
) -> Result<f64> {
    let split = stratified_kfold(data.labels(), folds, seed)?;
    let mut total = 0.0;
    for f in 0..folds {
        let (tr, te) = fold_partition(&split, f);
        let model = fit_features(&data.subset(&tr), kernel, &SvmConfig::classical(c))?;
        let test = data.subset(&te);
        let pred = test
            .rows()
            .map(|r| model.predict_features(r))
            .collect::<Result<Vec<_>>>()?;
        total += crate::train::accuracy(&pred, test.labels());
    }
    Ok(total / folds as f64)
}

/// Draws `n_iters` settings and keeps the one with the best CV accuracy
/// (earliest draw on ties). Folds are fixed by `seed` across draws.
pub fn random_search_svc<T: Real>(
    data: &FeatureTable<T>,
    n_iters: usize,
    seed: u64,
    space: &SearchSpace,
) -> Result<SearchResult> {
    if space.kernels.is_empty() || n_iters == 0 {
        return Err(Error::Config("search space is empty".into()));
    }
    let (lo, hi) = space.c_range;
    let (glo, ghi) = space.gamma_range;
    if !(lo > 0.0 && lo <= hi && glo > 0.0 && glo <= ghi) {
        return Err(Error::Config(
            "search ranges must be positive and ordered".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<SearchResult> = None;
    for _ in 0..n_iters {
        let choice = space.kernels[rng.random_range(0..space.kernels.len())];
        let c = log_uniform(&mut rng, space.c_range);
        let kernel = match choice {
            KernelChoice::Linear => KernelKind::Linear,
            KernelChoice::Rbf => KernelKind::Rbf {
                gamma: log_uniform(&mut rng, space.gamma_range),
            },
        };
        let acc = cv_accuracy(data, kernel, c, space.folds, seed)?;
        if best.as_ref().is_none_or(|b| acc > b.cv_accuracy) {
            best = Some(SearchResult {
                c,
                kernel,
                cv_accuracy: acc,
                draws: n_iters,
            });
        }
    }
    Ok(best.expect("at least one draw"))
}
