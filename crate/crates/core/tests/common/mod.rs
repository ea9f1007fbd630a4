//! Brute-force references shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{Complex, DMatrix, DVector};
use nqk_core::qsim::{Circuit, Op, Su2Angles};
use nqk_core::reupload::{one_to_n_circuit, qnn_circuit, Coupling, EncodedPoint, QnnParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type C64 = Complex<f64>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

pub fn rz(t: f64) -> DMatrix<C64> {
    DMatrix::from_row_slice(
        2,
        2,
        &[
            Complex::from_polar(1.0, -t / 2.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
            Complex::from_polar(1.0, t / 2.0),
        ],
    )
}

pub fn ry(t: f64) -> DMatrix<C64> {
    let (co, si) = ((t / 2.0).cos(), (t / 2.0).sin());
    DMatrix::from_row_slice(2, 2, &[c(co, 0.0), c(-si, 0.0), c(si, 0.0), c(co, 0.0)])
}

/// `Rz(γ) Ry(β) Rz(α)` as a product of elementary rotations.
pub fn zyz(a: &Su2Angles<f64>) -> DMatrix<C64> {
    let [alpha, beta, gamma] = a.as_array();
    rz(gamma) * ry(beta) * rz(alpha)
}

fn proj(bit: usize) -> DMatrix<C64> {
    let mut p = DMatrix::zeros(2, 2);
    p[(bit, bit)] = c(1.0, 0.0);
    p
}

/// Kronecker product with qubit 0 as the rightmost (least significant)
/// factor.
fn kron_all(factors: &[DMatrix<C64>]) -> DMatrix<C64> {
    factors
        .iter()
        .rev()
        .fold(DMatrix::identity(1, 1), |acc, f| acc.kronecker(f))
}

pub fn full_single(n: usize, q: usize, g: &DMatrix<C64>) -> DMatrix<C64> {
    let f: Vec<DMatrix<C64>> = (0..n)
        .map(|k| {
            if k == q {
                g.clone()
            } else {
                DMatrix::identity(2, 2)
            }
        })
        .collect();
    kron_all(&f)
}

pub fn full_controlled(n: usize, control: usize, target: usize, g: &DMatrix<C64>) -> DMatrix<C64> {
    let off: Vec<DMatrix<C64>> = (0..n)
        .map(|k| {
            if k == control {
                proj(0)
            } else {
                DMatrix::identity(2, 2)
            }
        })
        .collect();
    let on: Vec<DMatrix<C64>> = (0..n)
        .map(|k| {
            if k == control {
                proj(1)
            } else if k == target {
                g.clone()
            } else {
                DMatrix::identity(2, 2)
            }
        })
        .collect();
    kron_all(&off) + kron_all(&on)
}

pub fn pauli_x() -> DMatrix<C64> {
    DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])
}

/// Full `2^n × 2^n` unitary of one gate.
pub fn op_unitary(n: usize, op: &Op<f64>) -> DMatrix<C64> {
    match op {
        Op::Rot { qubit, angles, .. } => full_single(n, *qubit, &zyz(angles)),
        Op::CRot {
            control,
            target,
            angles,
            ..
        } => full_controlled(n, *control, *target, &zyz(angles)),
        Op::Cnot { control, target } => full_controlled(n, *control, *target, &pauli_x()),
    }
}

/// Statevector by multiplying dense unitaries onto `|0…0⟩`.
pub fn dense_run(circuit: &Circuit<f64>) -> DVector<C64> {
    let n = circuit.n_qubits();
    let mut psi = DVector::zeros(1 << n);
    psi[0] = c(1.0, 0.0);
    for op in circuit.ops() {
        psi = op_unitary(n, op) * psi;
    }
    psi
}

pub fn max_amp_diff(circuit: &Circuit<f64>) -> f64 {
    let fast = circuit.run();
    let dense = dense_run(circuit);
    fast.amplitudes()
        .iter()
        .zip(dense.iter())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max)
}

pub fn random_angles(r: &mut impl Rng) -> Su2Angles<f64> {
    let pi = std::f64::consts::PI;
    Su2Angles::new(
        r.random_range(-pi..pi),
        r.random_range(-pi..pi),
        r.random_range(-pi..pi),
    )
}

pub fn random_params(n: usize, layers: usize, r: &mut impl Rng) -> QnnParams<f64> {
    let mut p = QnnParams::zeros(n, layers).unwrap();
    let v: Vec<f64> = (0..p.n_params())
        .map(|_| r.random_range(-3.0..3.0))
        .collect();
    p.set_flat(&v).unwrap();
    if r.random_bool(0.5) {
        p.coupling = Coupling::Chain;
    }
    p
}

pub fn random_point(d: usize, r: &mut impl Rng) -> EncodedPoint<f64> {
    let x: Vec<f64> = (0..d).map(|_| r.random_range(-1.0..1.0)).collect();
    EncodedPoint::new(&x).unwrap()
}

/// Cycles through classifier, 1-to-n and free-form gate sequences.
pub fn random_circuit(i: usize, r: &mut impl Rng) -> Circuit<f64> {
    let n = r.random_range(1..=3);
    let layers = r.random_range(1..=4);
    let d = r.random_range(1..=5);
    match i % 3 {
        0 => qnn_circuit(&random_params(n, layers, r), &random_point(d, r)).unwrap(),
        1 => one_to_n_circuit(&random_params(1, layers, r), &random_point(d, r), n).unwrap(),
        _ => {
            let mut c = Circuit::new(n).unwrap();
            for _ in 0..layers * 4 {
                let q = r.random_range(0..n);
                let other = (q + r.random_range(1..n.max(2))) % n;
                let op = match r.random_range(0..3) {
                    _ if n == 1 => Op::Rot {
                        qubit: q,
                        angles: random_angles(r),
                        param: None,
                    },
                    0 => Op::Rot {
                        qubit: q,
                        angles: random_angles(r),
                        param: None,
                    },
                    1 => Op::CRot {
                        control: other,
                        target: q,
                        angles: random_angles(r),
                        param: None,
                    },
                    _ => Op::Cnot {
                        control: other,
                        target: q,
                    },
                };
                c.push(op).unwrap();
            }
            c
        }
    }
}

/// Exact optimum of the SVM dual by enumerating every assignment of the
/// coordinates to lower bound, upper bound or free, solving the stationarity
/// system on the free set and keeping the best feasible point. Only usable
/// for a handful of points with a positive definite `q`.
#[derive(Debug, Clone)]
pub struct QpSolution {
    pub alpha: Vec<f64>,
    pub b: f64,
    pub objective: f64,
}

/// `q` is the effective kernel (already shifted if needed), `y` in ±1.
pub fn dual_oracle(q: &DMatrix<f64>, y: &[f64], c: f64, equality: bool) -> QpSolution {
    let m = y.len();
    assert!(m <= 10);
    let qq = DMatrix::from_fn(m, m, |i, j| y[i] * y[j] * q[(i, j)]);
    let objective = |a: &[f64]| {
        let av = DVector::from_column_slice(a);
        a.iter().sum::<f64>() - 0.5 * (av.transpose() * &qq * &av)[(0, 0)]
    };
    let mut best: Option<(f64, Vec<f64>, f64)> = None;
    let eps = 1e-11;
    for code in 0..3usize.pow(m as u32) {
        let mut state = vec![0u8; m];
        let mut x = code;
        for s in state.iter_mut() {
            *s = (x % 3) as u8;
            x /= 3;
        }
        let free: Vec<usize> = (0..m).filter(|&i| state[i] == 2).collect();
        let mut a: Vec<f64> = state
            .iter()
            .map(|&s| if s == 1 { c } else { 0.0 })
            .collect();
        let mut lambda = 0.0;
        let nf = free.len();
        if nf > 0 {
            let dim = nf + usize::from(equality);
            let mut lhs = DMatrix::zeros(dim, dim);
            let mut rhs = DVector::zeros(dim);
            for (r, &i) in free.iter().enumerate() {
                rhs[r] = 1.0;
                for j in 0..m {
                    if state[j] != 2 {
                        rhs[r] -= qq[(i, j)] * a[j];
                    }
                }
                for (s, &j) in free.iter().enumerate() {
                    lhs[(r, s)] = qq[(i, j)];
                }
                if equality {
                    lhs[(r, nf)] = y[i];
                    lhs[(nf, r)] = y[i];
                }
            }
            if equality {
                rhs[nf] = -(0..m)
                    .filter(|&j| state[j] != 2)
                    .map(|j| y[j] * a[j])
                    .sum::<f64>();
            }
            let Some(sol) = lhs.lu().solve(&rhs) else {
                continue;
            };
            for (r, &i) in free.iter().enumerate() {
                a[i] = sol[r];
            }
            if equality {
                lambda = sol[nf];
            }
        }
        if a.iter().any(|&v| v < -eps || v > c + eps) {
            continue;
        }
        if equality && y.iter().zip(&a).map(|(y, a)| y * a).sum::<f64>().abs() > 1e-9 {
            continue;
        }
        let f = objective(&a);
        if best.as_ref().is_none_or(|(bf, _, _)| f > *bf) {
            best = Some((f, a, lambda));
        }
    }
    let (objective, alpha, lambda) = best.expect("feasible point");
    // λ from the stationarity system is the bias when a free vector exists;
    // otherwise take the middle of the interval the bound vectors allow.
    let has_free = alpha.iter().any(|&a| a > 1e-9 && a < c - 1e-9);
    let b = if !equality {
        0.0
    } else if has_free {
        lambda
    } else {
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..m {
            let g: f64 = (0..m).map(|j| alpha[j] * y[j] * q[(i, j)]).sum();
            // α = 0 needs y f ≥ 1, α = C needs y f ≤ 1.
            let bound = y[i] - g;
            let lower = (alpha[i] < 1e-9) == (y[i] > 0.0);
            if lower {
                lo = lo.max(bound);
            } else {
                hi = hi.min(bound);
            }
        }
        0.5 * (lo + hi)
    };
    QpSolution {
        alpha,
        b,
        objective,
    }
}

/// Decision value of an oracle solution against a row of effective kernel
/// values.
pub fn oracle_decision(sol: &QpSolution, y: &[f64], row: &[f64]) -> f64 {
    sol.alpha
        .iter()
        .zip(y)
        .zip(row)
        .map(|((a, y), k)| a * y * k)
        .sum::<f64>()
        + sol.b
}

/// Rank-`p` reconstruction of (optionally centered) rows from nalgebra's SVD.
pub fn svd_reconstruction(x: &DMatrix<f64>, p: usize, center: bool) -> DMatrix<f64> {
    let (m, d) = x.shape();
    let mean: Vec<f64> = (0..d)
        .map(|j| if center { x.column(j).mean() } else { 0.0 })
        .collect();
    let xc = DMatrix::from_fn(m, d, |i, j| x[(i, j)] - mean[j]);
    let svd = xc.clone().svd(false, true);
    let vt = svd.v_t.unwrap();
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let vp = DMatrix::from_fn(d, p, |j, k| vt[(order[k], j)]);
    let rec = &xc * &vp * vp.transpose();
    DMatrix::from_fn(m, d, |i, j| rec[(i, j)] + mean[j])
}
