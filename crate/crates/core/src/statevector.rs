//! Dense statevector with in-place rotation and CNOT kernels.
//!
//! Qubit `q` is bit `q` of the basis index, so qubit 0 is the least
//! significant bit. Every other module (Pauli strings included) uses the
//! same convention.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest register the dense simulator accepts.
pub const MAX_QUBITS: usize = 24;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Rotation axis of a parameterized single-qubit gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    /// Position of the axis inside a qubit's RX, RY, RZ triple.
    pub fn ordinal(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn from_ordinal(ordinal: usize) -> Option<Axis> {
        Axis::ALL.get(ordinal).copied()
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Axis::X => "X",
            Axis::Y => "Y",
            Axis::Z => "Z",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    num_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl Statevector {
    /// The computational basis state |0...0⟩.
    pub fn zero_state(num_qubits: usize) -> Result<Self> {
        check_qubit_count(num_qubits)?;
        let mut amplitudes = vec![ZERO; 1 << num_qubits];
        amplitudes[0] = ONE;
        Ok(Self {
            num_qubits,
            amplitudes,
        })
    }

    /// The basis state whose index is `index`.
    pub fn basis_state(num_qubits: usize, index: usize) -> Result<Self> {
        let mut state = Self::zero_state(num_qubits)?;
        if index >= state.dim() {
            return Err(Error::Index(format!(
                "basis index {index} out of range for {num_qubits} qubits"
            )));
        }
        state.amplitudes[0] = ZERO;
        state.amplitudes[index] = ONE;
        Ok(state)
    }

    /// Wraps raw amplitudes. The length must be a power of two; no
    /// normalization is applied.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::Size(format!(
                "amplitude count {len} is not a power of two >= 2"
            )));
        }
        let num_qubits = len.trailing_zeros() as usize;
        check_qubit_count(num_qubits)?;
        Ok(Self {
            num_qubits,
            amplitudes,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Applies RX, RY or RZ by `theta` radians to `qubit`.
    ///
    /// RX(θ) = [[c, -is], [-is, c]], RY(θ) = [[c, -s], [s, c]] and
    /// RZ(θ) = diag(e^{-iθ/2}, e^{iθ/2}) with c = cos(θ/2), s = sin(θ/2).
    pub fn apply_rotation(&mut self, axis: Axis, qubit: usize, theta: f64) -> Result<()> {
        self.check_qubit(qubit)?;
        if !theta.is_finite() {
            return Err(Error::Argument(format!("rotation angle {theta} is not finite")));
        }
        let (s, c) = (0.5 * theta).sin_cos();
        match axis {
            Axis::X => {
                let ms = Complex64::new(0.0, -s);
                self.for_each_pair(qubit, |a0, a1| {
                    let (x0, x1) = (*a0, *a1);
                    *a0 = x0 * c + x1 * ms;
                    *a1 = x0 * ms + x1 * c;
                });
            }
            Axis::Y => {
                self.for_each_pair(qubit, |a0, a1| {
                    let (x0, x1) = (*a0, *a1);
                    *a0 = x0 * c - x1 * s;
                    *a1 = x0 * s + x1 * c;
                });
            }
            Axis::Z => {
                let lo = Complex64::new(c, -s);
                let hi = Complex64::new(c, s);
                self.for_each_pair(qubit, |a0, a1| {
                    *a0 *= lo;
                    *a1 *= hi;
                });
            }
        }
        Ok(())
    }

    /// Applies the bare Pauli operator of `axis` to `qubit`.
    pub fn apply_pauli(&mut self, axis: Axis, qubit: usize) -> Result<()> {
        self.check_qubit(qubit)?;
        match axis {
            Axis::X => self.for_each_pair(qubit, std::mem::swap),
            Axis::Y => self.for_each_pair(qubit, |a0, a1| {
                let (x0, x1) = (*a0, *a1);
                *a0 = Complex64::new(x1.im, -x1.re);
                *a1 = Complex64::new(-x0.im, x0.re);
            }),
            Axis::Z => self.for_each_pair(qubit, |_, a1| *a1 = -*a1),
        }
        Ok(())
    }

    /// Flips the target bit of every basis state whose control bit is set.
    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<()> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        if control == target {
            return Err(Error::Index(format!(
                "CNOT control and target are both qubit {control}"
            )));
        }
        let cmask = 1usize << control;
        let tmask = 1usize << target;
        for i in 0..self.amplitudes.len() {
            // visit each swapped pair once, from its target-bit-clear member
            if i & cmask != 0 && i & tmask == 0 {
                self.amplitudes.swap(i, i | tmask);
            }
        }
        Ok(())
    }

    /// ⟨self|other⟩ = Σ conj(self_i)·other_i.
    pub fn inner_product(&self, other: &Statevector) -> Result<Complex64> {
        if self.num_qubits != other.num_qubits {
            return Err(Error::Size(format!(
                "inner product of {}-qubit and {}-qubit states",
                self.num_qubits, other.num_qubits
            )));
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// ⟨self| P_axis(qubit) |other⟩ without materializing P|other⟩.
    pub fn pauli_matrix_element(
        &self,
        axis: Axis,
        qubit: usize,
        other: &Statevector,
    ) -> Result<Complex64> {
        if self.num_qubits != other.num_qubits {
            return Err(Error::Size("pauli matrix element across dimensions".into()));
        }
        self.check_qubit(qubit)?;
        let stride = 1usize << qubit;
        let lhs = &self.amplitudes;
        let rhs = &other.amplitudes;
        let mut acc = ZERO;
        for block in (0..lhs.len()).step_by(stride << 1) {
            for i0 in block..block + stride {
                let i1 = i0 | stride;
                let (l0, l1) = (lhs[i0].conj(), lhs[i1].conj());
                let (r0, r1) = (rhs[i0], rhs[i1]);
                acc += match axis {
                    Axis::X => l0 * r1 + l1 * r0,
                    // Y|0⟩ = i|1⟩, Y|1⟩ = -i|0⟩
                    Axis::Y => l0 * Complex64::new(r1.im, -r1.re) + l1 * Complex64::new(-r0.im, r0.re),
                    Axis::Z => l0 * r0 - l1 * r1,
                };
            }
        }
        Ok(acc)
    }

    fn for_each_pair<F>(&mut self, qubit: usize, mut f: F)
    where
        F: FnMut(&mut Complex64, &mut Complex64),
    {
        let stride = 1usize << qubit;
        for chunk in self.amplitudes.chunks_exact_mut(stride << 1) {
            let (lo, hi) = chunk.split_at_mut(stride);
            for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
                f(a0, a1);
            }
        }
    }

    fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit >= self.num_qubits {
            Err(Error::Index(format!(
                "qubit {qubit} out of range for {} qubits",
                self.num_qubits
            )))
        } else {
            Ok(())
        }
    }
}

fn check_qubit_count(num_qubits: usize) -> Result<()> {
    if (1..=MAX_QUBITS).contains(&num_qubits) {
        Ok(())
    } else {
        Err(Error::Size(format!(
            "qubit count {num_qubits} outside 1..={MAX_QUBITS}"
        )))
    }
}
