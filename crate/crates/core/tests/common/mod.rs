//! Dense-matrix reference implementations built from Kronecker products.
//! Deliberately naive and independent of the crate's bit-twiddling kernels.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use selact_core::ansatz::Op;
use selact_core::{Axis, CircuitSpec, Hamiltonian, ParamVector, Statevector};

type C = Complex64;

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

pub fn pauli(ch: char) -> DMatrix<C> {
    let z = c(0.0, 0.0);
    let o = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    match ch {
        'I' => DMatrix::from_row_slice(2, 2, &[o, z, z, o]),
        'X' => DMatrix::from_row_slice(2, 2, &[z, o, o, z]),
        'Y' => DMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        'Z' => DMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
        other => panic!("not a Pauli: {other}"),
    }
}

pub fn rotation(axis: Axis, theta: f64) -> DMatrix<C> {
    let (s, co) = (theta / 2.0).sin_cos();
    let z = c(0.0, 0.0);
    match axis {
        Axis::X => DMatrix::from_row_slice(2, 2, &[c(co, 0.0), c(0.0, -s), c(0.0, -s), c(co, 0.0)]),
        Axis::Y => DMatrix::from_row_slice(2, 2, &[c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0)]),
        Axis::Z => DMatrix::from_row_slice(2, 2, &[c(co, -s), z, z, c(co, s)]),
    }
}

/// `ops[q]` acts on qubit q; qubit 0 is the least significant index bit, so
/// it is the rightmost Kronecker factor.
pub fn kron_all(ops: &[DMatrix<C>]) -> DMatrix<C> {
    ops.iter()
        .rev()
        .fold(DMatrix::from_element(1, 1, c(1.0, 0.0)), |acc, m| acc.kronecker(m))
}

pub fn embed(n: usize, q: usize, gate: DMatrix<C>) -> DMatrix<C> {
    let ops: Vec<_> = (0..n).map(|k| if k == q { gate.clone() } else { pauli('I') }).collect();
    kron_all(&ops)
}

pub fn cnot(n: usize, control: usize, target: usize) -> DMatrix<C> {
    let dim = 1 << n;
    let mut m = DMatrix::zeros(dim, dim);
    for b in 0..dim {
        let out = if b >> control & 1 == 1 { b ^ (1 << target) } else { b };
        m[(out, b)] = c(1.0, 0.0);
    }
    m
}

pub fn dense_hamiltonian(h: &Hamiltonian) -> DMatrix<C> {
    let dim = 1 << h.num_qubits();
    let mut m = DMatrix::zeros(dim, dim);
    for term in h.terms() {
        let ops: Vec<_> = term.paulis().chars().map(pauli).collect();
        m += kron_all(&ops) * c(term.coeff(), 0.0);
    }
    m
}

pub fn dense_ground_energy(h: &Hamiltonian) -> f64 {
    SymmetricEigen::new(dense_hamiltonian(h)).eigenvalues.min()
}

pub fn dense_state(circuit: &CircuitSpec, params: &ParamVector) -> DVector<C> {
    let n = circuit.num_qubits();
    let mut psi = DVector::zeros(1 << n);
    psi[0] = c(1.0, 0.0);
    for op in circuit.ops() {
        let u = match op {
            Op::Rotation(slot) => embed(n, slot.qubit, rotation(slot.axis, params[slot.param_index])),
            Op::Cnot { control, target } => cnot(n, control, target),
        };
        psi = u * psi;
    }
    psi
}

pub fn to_dvector(s: &Statevector) -> DVector<C> {
    DVector::from_column_slice(s.amplitudes())
}

pub fn max_diff(a: &DVector<C>, b: &DVector<C>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Every built-in family member with n ≤ 6 over a small grid of couplings.
pub fn builtin_grid() -> Vec<Hamiltonian> {
    let mut out = Vec::new();
    for n in 2..=6 {
        for g in [0.0, 0.5, 1.0, 2.0] {
            out.push(Hamiltonian::tfim(n, g).unwrap());
        }
        for (j, h) in [(1.0, 0.0), (1.0, 0.5), (0.5, 1.0), (-1.0, 0.3)] {
            out.push(Hamiltonian::heisenberg(n, j, h).unwrap());
        }
    }
    out
}
