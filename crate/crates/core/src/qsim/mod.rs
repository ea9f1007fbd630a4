//! Dense statevector simulation for few-qubit circuits.
//!
//! Basis-state index convention: qubit `q` is bit `q` of the index, so qubit 0
//! is the least significant bit. Qubit 0 is the measured ("first") qubit of
//! the re-uploading classifiers.

mod circuit;

pub use circuit::{Circuit, Op};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Hard cap on simulated register size.
pub const MAX_QUBITS: usize = 12;

/// ZYZ Euler angles of a single-qubit unitary: `Rz(gamma) Ry(beta) Rz(alpha)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Su2Angles<T> {
    pub alpha: T,
    pub beta: T,
    pub gamma: T,
}

impl<T: Real> Su2Angles<T> {
    pub fn new(alpha: T, beta: T, gamma: T) -> Self {
        Self { alpha, beta, gamma }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn from_slice(s: &[T]) -> Self {
        Self::new(s[0], s[1], s[2])
    }

    pub fn as_array(&self) -> [T; 3] {
        [self.alpha, self.beta, self.gamma]
    }

    pub fn get(&self, axis: usize) -> T {
        self.as_array()[axis]
    }

    pub fn with(&self, axis: usize, value: T) -> Self {
        let mut a = self.as_array();
        a[axis] = value;
        Self::from_slice(&a)
    }

    pub fn is_zero(&self) -> bool {
        self.alpha.is_zero() && self.beta.is_zero() && self.gamma.is_zero()
    }
}

/// A 2×2 complex matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2<T>(pub [[Complex<T>; 2]; 2]);

impl<T: Real> Mat2<T> {
    pub fn identity() -> Self {
        let (o, z) = (
            Complex::new(T::one(), T::zero()),
            Complex::new(T::zero(), T::zero()),
        );
        Mat2([[o, z], [z, o]])
    }

    pub fn pauli_x() -> Self {
        let (o, z) = (
            Complex::new(T::one(), T::zero()),
            Complex::new(T::zero(), T::zero()),
        );
        Mat2([[z, o], [o, z]])
    }

    pub fn rz(t: T) -> Self {
        let h = t / T::lit(2.0);
        let z = Complex::new(T::zero(), T::zero());
        Mat2([
            [Complex::from_polar(T::one(), -h), z],
            [z, Complex::from_polar(T::one(), h)],
        ])
    }

    pub fn ry(t: T) -> Self {
        let h = t / T::lit(2.0);
        let (c, s) = (
            Complex::new(h.cos(), T::zero()),
            Complex::new(h.sin(), T::zero()),
        );
        Mat2([[c, -s], [s, c]])
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        let (a, b) = (&self.0, &rhs.0);
        let mut out = [[Complex::new(T::zero(), T::zero()); 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Mat2(out)
    }

    pub fn dagger(&self) -> Self {
        let m = &self.0;
        Mat2([
            [m[0][0].conj(), m[1][0].conj()],
            [m[0][1].conj(), m[1][1].conj()],
        ])
    }

    pub fn det(&self) -> Complex<T> {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    /// Largest entrywise deviation of `M†M` from the identity.
    pub fn unitarity_error(&self) -> T {
        let p = self.dagger().mul(self);
        let id = Mat2::identity();
        let mut err = T::zero();
        for i in 0..2 {
            for j in 0..2 {
                err = err.max((p.0[i][j] - id.0[i][j]).norm());
            }
        }
        err
    }
}

/// ZYZ unitary `Rz(gamma) · Ry(beta) · Rz(alpha)`, in closed form.
pub fn su2_matrix<T: Real>(a: &Su2Angles<T>) -> Mat2<T> {
    let two = T::lit(2.0);
    let (c, s) = ((a.beta / two).cos(), (a.beta / two).sin());
    let sum = (a.alpha + a.gamma) / two;
    let diff = (a.alpha - a.gamma) / two;
    let e = |phase: T, mag: T| Complex::from_polar(mag, phase);
    Mat2([[e(-sum, c), -e(diff, s)], [e(-diff, s), e(sum, c)]])
}

/// Partial derivatives of [`su2_matrix`] with respect to alpha, beta, gamma.
pub fn su2_derivatives<T: Real>(a: &Su2Angles<T>) -> [Mat2<T>; 3] {
    let half = T::lit(0.5);
    let u = su2_matrix(a);
    let mi = Complex::new(T::zero(), -half);
    let pi = Complex::new(T::zero(), half);
    // dU/dalpha = U · (-i Z / 2): scale columns.
    let mut da = u;
    for row in da.0.iter_mut() {
        row[0] *= mi;
        row[1] *= pi;
    }
    // dU/dgamma = (-i Z / 2) · U: scale rows.
    let mut dg = u;
    for j in 0..2 {
        dg.0[0][j] *= mi;
        dg.0[1][j] *= pi;
    }
    // dU/dbeta: differentiate cos/sin of beta/2.
    let two = T::lit(2.0);
    let (c, s) = ((a.beta / two).cos(), (a.beta / two).sin());
    let (dc, ds) = (-s * half, c * half);
    let sum = (a.alpha + a.gamma) / two;
    let diff = (a.alpha - a.gamma) / two;
    let e = |phase: T, mag: T| Complex::from_polar(mag, phase);
    let db = Mat2([
        [e(-sum, T::one()) * dc, -e(diff, T::one()) * ds],
        [e(-diff, T::one()) * ds, e(sum, T::one()) * dc],
    ]);
    [da, db, dg]
}

/// Pure state of `n_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct Statevector<T> {
    n_qubits: usize,
    amps: Vec<Complex<T>>,
}

impl<T: Real> Statevector<T> {
    /// The all-zeros state `|0…0⟩`.
    pub fn zero_state(n_qubits: usize) -> Result<Self> {
        check_register(n_qubits)?;
        let mut amps = vec![Complex::new(T::zero(), T::zero()); 1 << n_qubits];
        amps[0] = Complex::new(T::one(), T::zero());
        Ok(Self { n_qubits, amps })
    }

    /// Wraps an amplitude vector; the length must be a power of two and the
    /// vector must be normalized.
    pub fn from_amplitudes(amps: Vec<Complex<T>>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::DimensionMismatch(format!(
                "amplitude vector length {len} is not 2^n with n >= 1"
            )));
        }
        let n_qubits = len.trailing_zeros() as usize;
        check_register(n_qubits)?;
        let norm: T = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - T::one()).abs() > T::lit(1e-6) {
            return Err(Error::InvalidParameter(format!(
                "state norm^2 is {norm}, expected 1"
            )));
        }
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> T {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n_qubits {
            return Err(Error::QubitOutOfRange {
                index: q,
                n_qubits: self.n_qubits,
            });
        }
        Ok(())
    }

    /// Applies a 2×2 matrix to `target`.
    pub fn apply_single(&mut self, gate: &Mat2<T>, target: usize) -> Result<()> {
        self.check_qubit(target)?;
        self.apply_single_unchecked(gate, target);
        Ok(())
    }

    pub(crate) fn apply_single_unchecked(&mut self, gate: &Mat2<T>, target: usize) {
        let g = &gate.0;
        let stride = 1usize << target;
        let dim = self.amps.len();
        let mut base = 0;
        while base < dim {
            for i in base..base + stride {
                let j = i + stride;
                let (a, b) = (self.amps[i], self.amps[j]);
                self.amps[i] = g[0][0] * a + g[0][1] * b;
                self.amps[j] = g[1][0] * a + g[1][1] * b;
            }
            base += stride << 1;
        }
    }

    /// Applies `gate` to `target` on the subspace where `control` is `|1⟩`.
    pub fn apply_controlled(
        &mut self,
        gate: &Mat2<T>,
        control: usize,
        target: usize,
    ) -> Result<()> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        if control == target {
            return Err(Error::ControlIsTarget(control));
        }
        self.apply_controlled_unchecked(gate, control, target);
        Ok(())
    }

    pub(crate) fn apply_controlled_unchecked(
        &mut self,
        gate: &Mat2<T>,
        control: usize,
        target: usize,
    ) {
        let g = &gate.0;
        let cmask = 1usize << control;
        let tmask = 1usize << target;
        for i in 0..self.amps.len() {
            if i & cmask == 0 || i & tmask != 0 {
                continue;
            }
            let j = i | tmask;
            let (a, b) = (self.amps[i], self.amps[j]);
            self.amps[i] = g[0][0] * a + g[0][1] * b;
            self.amps[j] = g[1][0] * a + g[1][1] * b;
        }
    }

    /// CNOT as an amplitude permutation.
    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<()> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        if control == target {
            return Err(Error::ControlIsTarget(control));
        }
        self.apply_cnot_unchecked(control, target);
        Ok(())
    }

    pub(crate) fn apply_cnot_unchecked(&mut self, control: usize, target: usize) {
        let cmask = 1usize << control;
        let tmask = 1usize << target;
        for i in 0..self.amps.len() {
            if i & cmask != 0 && i & tmask == 0 {
                self.amps.swap(i, i | tmask);
            }
        }
    }

    /// Probability that qubit 0 reads `|0⟩`.
    pub fn prob_first_qubit_zero(&self) -> T {
        self.amps.iter().step_by(2).map(|a| a.norm_sqr()).sum()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Result<Complex<T>> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::DimensionMismatch(format!(
                "{}-qubit vs {}-qubit state",
                self.n_qubits, other.n_qubits
            )));
        }
        Ok(inner_unchecked(&self.amps, &other.amps))
    }

    /// Zeroes every amplitude whose qubit-0 bit is set (projector `|0⟩⟨0| ⊗ 1`).
    pub(crate) fn project_first_qubit_zero(&mut self) {
        for a in self.amps.iter_mut().skip(1).step_by(2) {
            *a = Complex::new(T::zero(), T::zero());
        }
    }
}

pub(crate) fn inner_unchecked<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    a.iter()
        .zip(b)
        .fold(Complex::new(T::zero(), T::zero()), |acc, (x, y)| {
            acc + x.conj() * y
        })
}

/// State fidelity `|⟨a|b⟩|²`.
pub fn fidelity<T: Real>(a: &Statevector<T>, b: &Statevector<T>) -> Result<T> {
    Ok(a.inner(b)?.norm_sqr())
}

fn check_register(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(Error::InvalidParameter(format!(
            "register size {n_qubits} outside 1..={MAX_QUBITS}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    type C = Complex<f64>;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    /// Product of the three factor matrices, multiplied out by hand.
    fn zyz_oracle(a: f64, b: f64, g: f64) -> Mat2<f64> {
        Mat2::rz(g).mul(&Mat2::ry(b)).mul(&Mat2::rz(a))
    }

    fn assert_mat_close(m: &Mat2<f64>, expected: [[C; 2]; 2], tol: f64) {
        for i in 0..2 {
            for j in 0..2 {
                assert!(
                    (m.0[i][j] - expected[i][j]).norm() < tol,
                    "{m:?} vs {expected:?}"
                );
            }
        }
    }

    #[test]
    fn su2_zero_angles_is_identity() {
        let m = su2_matrix(&Su2Angles::new(0.0, 0.0, 0.0));
        assert_eq!(m, Mat2::identity());
    }

    #[test]
    fn su2_pure_ry_pi() {
        let m = su2_matrix(&Su2Angles::new(0.0, PI, 0.0));
        assert_mat_close(
            &m,
            [[c(0.0, 0.0), c(-1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]],
            1e-15,
        );
    }

    #[test]
    fn su2_quarter_turns_match_factor_product() {
        // Frozen from an independent numpy product Rz(pi/2) Ry(pi/2) Rz(pi/2).
        let h = FRAC_1_SQRT_2;
        let expected = [[c(0.0, -h), c(-h, 0.0)], [c(h, 0.0), c(0.0, h)]];
        let m = su2_matrix(&Su2Angles::new(PI / 2.0, PI / 2.0, PI / 2.0));
        assert_mat_close(&m, expected, 1e-15);
        assert_mat_close(&zyz_oracle(PI / 2.0, PI / 2.0, PI / 2.0), expected, 1e-15);
    }

    #[test]
    fn su2_unitary_with_unit_determinant() {
        for &(a, b, g) in &[(0.3, -1.2, 2.5), (10.0, 7.0, -3.0), (1e3, -2e2, 0.1)] {
            let m: Mat2<f64> = su2_matrix(&Su2Angles::new(a, b, g));
            assert!(m.unitarity_error() < 1e-12);
            assert!((m.det().norm() - 1.0).abs() < 1e-12);
            let o = zyz_oracle(a, b, g);
            assert_mat_close(&m, o.0, 1e-12);
        }
    }

    #[test]
    fn su2_derivatives_match_finite_differences() {
        let a = Su2Angles::new(0.4, -0.9, 1.7);
        let d = su2_derivatives(&a);
        let h = 1e-6;
        for axis in 0..3 {
            let p = su2_matrix(&a.with(axis, a.get(axis) + h));
            let m = su2_matrix(&a.with(axis, a.get(axis) - h));
            for i in 0..2 {
                for j in 0..2 {
                    let fd = (p.0[i][j] - m.0[i][j]) / (2.0 * h);
                    assert!((fd - d[axis].0[i][j]).norm() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn x_on_zero_gives_one() {
        let mut s = Statevector::<f64>::zero_state(1).unwrap();
        s.apply_single(&su2_matrix(&Su2Angles::new(0.0, PI, 0.0)), 0)
            .unwrap();
        assert!(s.amplitudes()[0].norm() < 1e-15);
        assert!((s.amplitudes()[1].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn identity_leaves_state() {
        let mut s = Statevector::<f64>::zero_state(2).unwrap();
        s.apply_single(&Mat2::identity(), 1).unwrap();
        assert_eq!(s, Statevector::zero_state(2).unwrap());
    }

    #[test]
    fn out_of_range_and_same_wire_rejected() {
        let mut s = Statevector::<f64>::zero_state(2).unwrap();
        assert!(matches!(
            s.apply_single(&Mat2::identity(), 2),
            Err(Error::QubitOutOfRange {
                index: 2,
                n_qubits: 2
            })
        ));
        assert!(matches!(
            s.apply_controlled(&Mat2::identity(), 1, 1),
            Err(Error::ControlIsTarget(1))
        ));
        assert!(matches!(s.apply_cnot(0, 0), Err(Error::ControlIsTarget(0))));
        assert!(Statevector::<f64>::zero_state(0).is_err());
        assert!(Statevector::<f64>::zero_state(MAX_QUBITS + 1).is_err());
    }

    #[test]
    fn controlled_flip_from_set_control() {
        // |10⟩ with qubit 1 set is basis index 2.
        let mut amps = vec![c(0.0, 0.0); 4];
        amps[2] = c(1.0, 0.0);
        let mut s = Statevector::from_amplitudes(amps).unwrap();
        s.apply_controlled(&su2_matrix(&Su2Angles::new(0.0, PI, 0.0)), 1, 0)
            .unwrap();
        assert!((s.amplitudes()[3].norm() - 1.0).abs() < 1e-15);

        let mut t = Statevector::<f64>::zero_state(2).unwrap();
        t.apply_cnot(1, 0).unwrap();
        assert_eq!(t, Statevector::zero_state(2).unwrap());
        let mut amps = vec![c(0.0, 0.0); 4];
        amps[2] = c(1.0, 0.0);
        let mut u = Statevector::from_amplitudes(amps).unwrap();
        u.apply_cnot(1, 0).unwrap();
        assert_eq!(u.amplitudes()[3], c(1.0, 0.0));
    }

    #[test]
    fn first_qubit_probability() {
        assert_eq!(
            Statevector::<f64>::zero_state(3)
                .unwrap()
                .prob_first_qubit_zero(),
            1.0
        );
        // (|0⟩+|1⟩)/√2 on qubit 0, qubit 1 in |0⟩.
        let amps = vec![
            c(FRAC_1_SQRT_2, 0.0),
            c(FRAC_1_SQRT_2, 0.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
        ];
        let s = Statevector::from_amplitudes(amps).unwrap();
        assert!((s.prob_first_qubit_zero() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn fidelity_basics() {
        let zero = Statevector::<f64>::zero_state(1).unwrap();
        let one = Statevector::from_amplitudes(vec![c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert_eq!(fidelity(&zero, &one).unwrap(), 0.0);
        assert!((fidelity(&one, &one).unwrap() - 1.0).abs() < 1e-12);
        let two = Statevector::<f64>::zero_state(2).unwrap();
        assert!(fidelity(&zero, &two).is_err());
    }

    #[test]
    fn rejects_bad_amplitude_vectors() {
        assert!(Statevector::from_amplitudes(vec![c(1.0, 0.0); 3]).is_err());
        assert!(Statevector::from_amplitudes(vec![c(1.0, 0.0); 2]).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let mut s = Statevector::<f32>::zero_state(2).unwrap();
        s.apply_single(&su2_matrix(&Su2Angles::new(0.1f32, 0.7, -0.3)), 0)
            .unwrap();
        s.apply_cnot(0, 1).unwrap();
        assert!((s.norm_sqr() - 1.0).abs() < 1e-6);
    }
}
