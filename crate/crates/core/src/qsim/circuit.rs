use num_complex::Complex;

use super::{su2_derivatives, su2_matrix, Statevector, Su2Angles};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// One gate of a parameterized circuit.
///
/// `param` is the offset of the gate's `alpha` angle in the caller's flat
/// parameter vector (`beta` and `gamma` follow), or `None` when the angles are
/// data or constants.
#[derive(Debug, Clone, PartialEq)]
pub enum Op<T> {
    Rot {
        qubit: usize,
        angles: Su2Angles<T>,
        param: Option<usize>,
    },
    CRot {
        control: usize,
        target: usize,
        angles: Su2Angles<T>,
        param: Option<usize>,
    },
    Cnot {
        control: usize,
        target: usize,
    },
}

impl<T: Real> Op<T> {
    fn param(&self) -> Option<usize> {
        match self {
            Op::Rot { param, .. } | Op::CRot { param, .. } => *param,
            Op::Cnot { .. } => None,
        }
    }

    fn angles_mut(&mut self) -> Option<&mut Su2Angles<T>> {
        match self {
            Op::Rot { angles, .. } | Op::CRot { angles, .. } => Some(angles),
            Op::Cnot { .. } => None,
        }
    }

    fn apply(&self, s: &mut Statevector<T>) {
        match self {
            Op::Rot { qubit, angles, .. } => s.apply_single_unchecked(&su2_matrix(angles), *qubit),
            Op::CRot {
                control,
                target,
                angles,
                ..
            } => s.apply_controlled_unchecked(&su2_matrix(angles), *control, *target),
            Op::Cnot { control, target } => s.apply_cnot_unchecked(*control, *target),
        }
    }

    fn apply_inverse(&self, s: &mut Statevector<T>) {
        match self {
            Op::Rot { qubit, angles, .. } => {
                s.apply_single_unchecked(&su2_matrix(angles).dagger(), *qubit)
            }
            Op::CRot {
                control,
                target,
                angles,
                ..
            } => s.apply_controlled_unchecked(&su2_matrix(angles).dagger(), *control, *target),
            Op::Cnot { control, target } => s.apply_cnot_unchecked(*control, *target),
        }
    }

    /// Applies `dG/d(angle)` to a copy of `s`. For controlled rotations the
    /// derivative vanishes on the control-off subspace.
    fn apply_derivative(&self, s: &Statevector<T>, axis: usize) -> Statevector<T> {
        let mut out = s.clone();
        match self {
            Op::Rot { qubit, angles, .. } => {
                out.apply_single_unchecked(&su2_derivatives(angles)[axis], *qubit);
            }
            Op::CRot {
                control,
                target,
                angles,
                ..
            } => {
                let cmask = 1usize << control;
                for (i, a) in out.amps.iter_mut().enumerate() {
                    if i & cmask == 0 {
                        *a = Complex::new(T::zero(), T::zero());
                    }
                }
                out.apply_controlled_unchecked(&su2_derivatives(angles)[axis], *control, *target);
            }
            Op::Cnot { .. } => unreachable!("CNOT has no angles"),
        }
        out
    }
}

/// An ordered gate list acting on `|0…0⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit<T> {
    n_qubits: usize,
    ops: Vec<Op<T>>,
}

impl<T: Real> Circuit<T> {
    pub fn new(n_qubits: usize) -> Result<Self> {
        Statevector::<T>::zero_state(n_qubits)?;
        Ok(Self {
            n_qubits,
            ops: Vec::new(),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn ops(&self) -> &[Op<T>] {
        &self.ops
    }

    pub fn push(&mut self, op: Op<T>) -> Result<()> {
        let check = |q: usize| {
            if q >= self.n_qubits {
                Err(Error::QubitOutOfRange {
                    index: q,
                    n_qubits: self.n_qubits,
                })
            } else {
                Ok(())
            }
        };
        match &op {
            Op::Rot { qubit, .. } => check(*qubit)?,
            Op::CRot {
                control, target, ..
            }
            | Op::Cnot { control, target } => {
                check(*control)?;
                check(*target)?;
                if control == target {
                    return Err(Error::ControlIsTarget(*control));
                }
            }
        }
        self.ops.push(op);
        Ok(())
    }

    /// Final state from `|0…0⟩`.
    pub fn run(&self) -> Statevector<T> {
        let mut s =
            Statevector::zero_state(self.n_qubits).expect("register validated at construction");
        for op in &self.ops {
            op.apply(&mut s);
        }
        s
    }

    /// Highest trainable parameter offset plus one.
    pub fn n_params(&self) -> usize {
        self.ops
            .iter()
            .filter_map(Op::param)
            .map(|p| p + 3)
            .max()
            .unwrap_or(0)
    }

    /// Copy of the circuit with `delta` added to a single gate angle. `op_index`
    /// selects the gate, `axis` the Euler angle.
    pub fn shifted(&self, op_index: usize, axis: usize, delta: T) -> Self {
        let mut c = self.clone();
        if let Some(a) = c.ops[op_index].angles_mut() {
            *a = a.with(axis, a.get(axis) + delta);
        }
        c
    }

    /// Gradient of `P(qubit 0 = 0)` with respect to the trainable parameters,
    /// by reverse-mode (adjoint) differentiation. Returns the probability and
    /// a gradient of length `n_params`.
    pub fn prob_zero_and_gradient(&self, n_params: usize) -> (T, Vec<T>) {
        let psi = self.run();
        let prob = psi.prob_first_qubit_zero();
        let mut grad = vec![T::zero(); n_params];
        let mut lambda = psi.clone();
        lambda.project_first_qubit_zero();
        let mut phi = psi;
        let two = T::lit(2.0);
        for op in self.ops.iter().rev() {
            op.apply_inverse(&mut phi);
            if let Some(p) = op.param() {
                for axis in 0..3 {
                    let mu = op.apply_derivative(&phi, axis);
                    let ov = super::inner_unchecked(&lambda.amps, &mu.amps);
                    grad[p + axis] += two * ov.re;
                }
            }
            op.apply_inverse(&mut lambda);
        }
        (prob, grad)
    }

    /// Gradient of `P(qubit 0 = 0)` by exact parameter-shift rules: the
    /// two-term rule for plain rotations and the four-term rule for
    /// controlled rotations, whose generator has eigenvalues {0, ±1/2}.
    pub fn prob_zero_gradient_shift(&self, n_params: usize) -> Vec<T> {
        let mut grad = vec![T::zero(); n_params];
        let half_pi = T::FRAC_PI_2();
        let three_half_pi = T::lit(3.0) * half_pi;
        let sqrt2 = T::SQRT_2();
        let four_sqrt2 = T::lit(4.0) * sqrt2;
        let d1 = (sqrt2 + T::one()) / four_sqrt2;
        let d2 = (sqrt2 - T::one()) / four_sqrt2;
        let eval =
            |k: usize, axis: usize, d: T| self.shifted(k, axis, d).run().prob_first_qubit_zero();
        for (k, op) in self.ops.iter().enumerate() {
            let Some(p) = op.param() else { continue };
            for axis in 0..3 {
                let g = match op {
                    Op::Rot { .. } => {
                        (eval(k, axis, half_pi) - eval(k, axis, -half_pi)) / T::lit(2.0)
                    }
                    Op::CRot { .. } => {
                        d1 * (eval(k, axis, half_pi) - eval(k, axis, -half_pi))
                            - d2 * (eval(k, axis, three_half_pi) - eval(k, axis, -three_half_pi))
                    }
                    Op::Cnot { .. } => unreachable!(),
                };
                grad[p + axis] += g;
            }
        }
        grad
    }

    /// Gradient of `P(qubit 0 = 0)` by central differences of step `h`.
    pub fn prob_zero_gradient_fd(&self, n_params: usize, h: T) -> Vec<T> {
        let mut grad = vec![T::zero(); n_params];
        for (k, op) in self.ops.iter().enumerate() {
            let Some(p) = op.param() else { continue };
            for axis in 0..3 {
                let up = self.shifted(k, axis, h).run().prob_first_qubit_zero();
                let dn = self.shifted(k, axis, -h).run().prob_first_qubit_zero();
                grad[p + axis] += (up - dn) / (T::lit(2.0) * h);
            }
        }
        grad
    }
}
