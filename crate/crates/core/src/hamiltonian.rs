//! Real-weighted Pauli-sum Hamiltonians.
//!
//! Character `q` of a Pauli string acts on qubit `q`, which is bit `q` of the
//! basis index. A Pauli string maps |b⟩ to i^{#Y}·(-1)^{|b & zmask|}·|b ^ xmask⟩
//! where `xmask` marks X/Y positions and `zmask` marks Y/Z positions.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lanczos::{self, LanczosOptions};
use crate::statevector::{Statevector, MAX_QUBITS};

/// Identifier written to and accepted in the `format` field.
pub const FORMAT_TAG: &str = "pauli-sum-v1";

/// Terms whose merged coefficient falls below this magnitude are dropped.
pub const COEFF_DROP_THRESHOLD: f64 = 1e-14;

/// Allowed disagreement between the computed ground energy and `e_gs_reference`.
pub const REFERENCE_TOLERANCE: f64 = 1e-6;

const NORM_TOLERANCE: f64 = 1e-9;
const IMAG_RESIDUE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct PauliTerm {
    coeff: f64,
    paulis: String,
    x_mask: usize,
    z_mask: usize,
    y_count: u32,
}

impl PauliTerm {
    pub fn new(coeff: f64, paulis: impl Into<String>) -> Result<Self> {
        let paulis = paulis.into();
        if !coeff.is_finite() {
            return Err(Error::Schema(format!(
                "coefficient {coeff} of term {paulis:?} is not finite"
            )));
        }
        if paulis.len() > MAX_QUBITS {
            return Err(Error::Schema(format!(
                "pauli string of length {} exceeds {MAX_QUBITS} qubits",
                paulis.len()
            )));
        }
        let (mut x_mask, mut z_mask, mut y_count) = (0usize, 0usize, 0u32);
        for (q, ch) in paulis.chars().enumerate() {
            let bit = 1usize << q;
            match ch {
                'I' => {}
                'X' => x_mask |= bit,
                'Z' => z_mask |= bit,
                'Y' => {
                    x_mask |= bit;
                    z_mask |= bit;
                    y_count += 1;
                }
                other => {
                    return Err(Error::Schema(format!(
                        "illegal character {other:?} in pauli string {paulis:?}"
                    )))
                }
            }
        }
        Ok(Self {
            coeff,
            paulis,
            x_mask,
            z_mask,
            y_count,
        })
    }

    pub fn coeff(&self) -> f64 {
        self.coeff
    }

    pub fn paulis(&self) -> &str {
        &self.paulis
    }

    pub fn num_qubits(&self) -> usize {
        self.paulis.len()
    }

    /// The i^{#Y} prefactor of the string.
    fn y_phase(&self) -> Complex64 {
        match self.y_count % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }

    /// Adds `coeff·P|input⟩` into `output`.
    fn accumulate(&self, input: &[Complex64], output: &mut [Complex64]) {
        let prefactor = self.y_phase() * self.coeff;
        let neg = -prefactor;
        for (b, amp) in input.iter().enumerate() {
            let sign = if (b & self.z_mask).count_ones() & 1 == 0 {
                prefactor
            } else {
                neg
            };
            output[b ^ self.x_mask] += sign * amp;
        }
    }

    /// ⟨lhs| coeff·P |rhs⟩.
    fn matrix_element(&self, lhs: &[Complex64], rhs: &[Complex64]) -> Complex64 {
        let mut even = Complex64::new(0.0, 0.0);
        let mut odd = Complex64::new(0.0, 0.0);
        for (b, amp) in rhs.iter().enumerate() {
            let term = lhs[b ^ self.x_mask].conj() * amp;
            if (b & self.z_mask).count_ones() & 1 == 0 {
                even += term;
            } else {
                odd += term;
            }
        }
        self.y_phase() * self.coeff * (even - odd)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    num_qubits: usize,
    terms: Vec<PauliTerm>,
    label: String,
    e_gs_reference: Option<f64>,
}

impl Hamiltonian {
    /// Validates term lengths, merges duplicate strings (first-appearance
    /// order) and drops near-zero merged terms.
    pub fn new(num_qubits: usize, terms: Vec<PauliTerm>, label: impl Into<String>) -> Result<Self> {
        if num_qubits == 0 || num_qubits > MAX_QUBITS {
            return Err(Error::Size(format!(
                "hamiltonian qubit count {num_qubits} outside 1..={MAX_QUBITS}"
            )));
        }
        let mut merged: Vec<PauliTerm> = Vec::with_capacity(terms.len());
        let mut position: HashMap<String, usize> = HashMap::new();
        for term in terms {
            if term.num_qubits() != num_qubits {
                return Err(Error::Schema(format!(
                    "pauli string {:?} has length {}, expected {num_qubits}",
                    term.paulis,
                    term.num_qubits()
                )));
            }
            match position.get(&term.paulis) {
                Some(&idx) => merged[idx].coeff += term.coeff,
                None => {
                    position.insert(term.paulis.clone(), merged.len());
                    merged.push(term);
                }
            }
        }
        merged.retain(|t| t.coeff.abs() >= COEFF_DROP_THRESHOLD);
        Ok(Self {
            num_qubits,
            terms: merged,
            label: label.into(),
            e_gs_reference: None,
        })
    }

    pub fn with_reference(mut self, e_gs_reference: Option<f64>) -> Self {
        self.e_gs_reference = e_gs_reference;
        self
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn e_gs_reference(&self) -> Option<f64> {
        self.e_gs_reference
    }

    /// Transverse-field Ising chain, open boundary:
    /// H = -Σ Z_q Z_{q+1} - g Σ X_q.
    pub fn tfim(num_qubits: usize, g: f64) -> Result<Self> {
        check_chain_length(num_qubits)?;
        let mut terms = Vec::with_capacity(2 * num_qubits - 1);
        for q in 0..num_qubits - 1 {
            terms.push(PauliTerm::new(-1.0, pauli_string(num_qubits, &[(q, 'Z'), (q + 1, 'Z')]))?);
        }
        for q in 0..num_qubits {
            terms.push(PauliTerm::new(-g, pauli_string(num_qubits, &[(q, 'X')]))?);
        }
        Self::new(num_qubits, terms, format!("tfim(n={num_qubits},g={g})"))
    }

    /// Heisenberg XXX chain with a longitudinal field, open boundary:
    /// H = J Σ (X_q X_{q+1} + Y_q Y_{q+1} + Z_q Z_{q+1}) + h Σ Z_q.
    pub fn heisenberg(num_qubits: usize, j: f64, h: f64) -> Result<Self> {
        check_chain_length(num_qubits)?;
        let mut terms = Vec::with_capacity(4 * num_qubits);
        for q in 0..num_qubits - 1 {
            for p in ['X', 'Y', 'Z'] {
                terms.push(PauliTerm::new(j, pauli_string(num_qubits, &[(q, p), (q + 1, p)]))?);
            }
        }
        for q in 0..num_qubits {
            terms.push(PauliTerm::new(h, pauli_string(num_qubits, &[(q, 'Z')]))?);
        }
        Self::new(num_qubits, terms, format!("heisenberg(n={num_qubits},J={j},h={h})"))
    }

    /// H|ψ⟩ as a new, generally unnormalized, state.
    pub fn apply(&self, psi: &Statevector) -> Result<Statevector> {
        self.check_dims(psi)?;
        let mut out = vec![Complex64::new(0.0, 0.0); psi.dim()];
        self.apply_into(psi.amplitudes(), &mut out);
        Statevector::from_amplitudes(out)
    }

    /// Overwrites `output` with H·`input`. Both slices must have length 2^n.
    pub(crate) fn apply_into(&self, input: &[Complex64], output: &mut [Complex64]) {
        output.fill(Complex64::new(0.0, 0.0));
        for term in &self.terms {
            term.accumulate(input, output);
        }
    }

    /// ⟨lhs|H|rhs⟩ for arbitrary (not necessarily normalized) states.
    pub fn matrix_element(&self, lhs: &Statevector, rhs: &Statevector) -> Result<Complex64> {
        self.check_dims(lhs)?;
        self.check_dims(rhs)?;
        Ok(self
            .terms
            .iter()
            .map(|t| t.matrix_element(lhs.amplitudes(), rhs.amplitudes()))
            .sum())
    }

    /// ⟨ψ|H|ψ⟩ for a unit-norm state.
    pub fn expectation(&self, psi: &Statevector) -> Result<f64> {
        self.check_dims(psi)?;
        let norm = psi.norm_sqr();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::State(format!("state norm² {norm} is not 1")));
        }
        let value = self.matrix_element(psi, psi)?;
        real_part(value)
    }

    /// Minimal eigenvalue by Lanczos iteration on the matrix-free operator.
    pub fn ground_energy(&self, tol: f64) -> Result<f64> {
        let opts = LanczosOptions {
            tol,
            ..LanczosOptions::default()
        };
        lanczos::min_eigenvalue(1 << self.num_qubits, |x, y| self.apply_into(x, y), &opts)
    }

    /// Compares the computed ground energy with the embedded reference, if any.
    /// Returns the absolute disagreement.
    pub fn reference_mismatch(&self, e_gs: f64) -> Option<f64> {
        self.e_gs_reference.map(|r| (r - e_gs).abs())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let doc: HamiltonianDoc =
            serde_json::from_value(value).map_err(|e| Error::Schema(e.to_string()))?;
        doc.into_hamiltonian()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let doc = HamiltonianDoc {
            format: Some(FORMAT_TAG.to_string()),
            num_qubits: self.num_qubits,
            label: self.label.clone(),
            e_gs_reference: self.e_gs_reference,
            terms: self
                .terms
                .iter()
                .map(|t| TermDoc {
                    coeff: serde_json::Value::from(t.coeff),
                    paulis: t.paulis.clone(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("hamiltonian document serializes")
    }

    fn check_dims(&self, psi: &Statevector) -> Result<()> {
        if psi.num_qubits() != self.num_qubits {
            Err(Error::Size(format!(
                "{}-qubit state against {}-qubit hamiltonian",
                psi.num_qubits(),
                self.num_qubits
            )))
        } else {
            Ok(())
        }
    }
}

fn real_part(value: Complex64) -> Result<f64> {
    if value.im.abs() > IMAG_RESIDUE_TOLERANCE {
        return Err(Error::State(format!(
            "expectation has imaginary part {}; hamiltonian not hermitian?",
            value.im
        )));
    }
    Ok(value.re)
}

fn check_chain_length(num_qubits: usize) -> Result<()> {
    if num_qubits < 2 {
        Err(Error::Size(format!("spin chain needs at least 2 qubits, got {num_qubits}")))
    } else {
        Ok(())
    }
}

fn pauli_string(num_qubits: usize, ops: &[(usize, char)]) -> String {
    let mut chars = vec!['I'; num_qubits];
    for &(q, p) in ops {
        chars[q] = p;
    }
    chars.into_iter().collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct HamiltonianDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    format: Option<String>,
    num_qubits: usize,
    #[serde(default)]
    label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    e_gs_reference: Option<f64>,
    terms: Vec<TermDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TermDoc {
    // kept untyped so complex-valued exports are reported as schema errors
    coeff: serde_json::Value,
    paulis: String,
}

impl HamiltonianDoc {
    fn into_hamiltonian(self) -> Result<Hamiltonian> {
        if let Some(format) = &self.format {
            if format != FORMAT_TAG {
                return Err(Error::Schema(format!(
                    "unsupported format {format:?}, expected {FORMAT_TAG:?}"
                )));
            }
        }
        if self.num_qubits == 0 || self.num_qubits > MAX_QUBITS {
            return Err(Error::Schema(format!(
                "num_qubits {} outside 1..={MAX_QUBITS}",
                self.num_qubits
            )));
        }
        if let Some(r) = self.e_gs_reference {
            if !r.is_finite() {
                return Err(Error::Schema("e_gs_reference is not finite".into()));
            }
        }
        let mut terms = Vec::with_capacity(self.terms.len());
        for (i, term) in self.terms.into_iter().enumerate() {
            let coeff = term.coeff.as_f64().ok_or_else(|| {
                Error::Schema(format!(
                    "term {i}: coefficient must be a real number, got {}",
                    term.coeff
                ))
            })?;
            if term.paulis.chars().count() != self.num_qubits {
                return Err(Error::Schema(format!(
                    "term {i}: pauli string {:?} has length {}, expected {}",
                    term.paulis,
                    term.paulis.chars().count(),
                    self.num_qubits
                )));
            }
            terms.push(PauliTerm::new(coeff, term.paulis)?);
        }
        Ok(Hamiltonian::new(self.num_qubits, terms, self.label)?.with_reference(self.e_gs_reference))
    }
}

/// A built-in spin-chain family with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Builtin {
    Tfim { num_qubits: usize, g: f64 },
    Heisenberg { num_qubits: usize, j: f64, h: f64 },
}

impl Builtin {
    pub fn build(&self) -> Result<Hamiltonian> {
        match *self {
            Builtin::Tfim { num_qubits, g } => Hamiltonian::tfim(num_qubits, g),
            Builtin::Heisenberg { num_qubits, j, h } => Hamiltonian::heisenberg(num_qubits, j, h),
        }
    }
}

/// Where a Hamiltonian comes from: `builtin:tfim:<n>:<g>`,
/// `builtin:heisenberg:<n>:<J>:<h>`, or a path to a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum HamiltonianSource {
    Builtin { spec: Builtin, text: String },
    File(PathBuf),
}

impl HamiltonianSource {
    pub fn builtin_tfim(num_qubits: usize, g: f64) -> Self {
        format!("builtin:tfim:{num_qubits}:{g}").parse().expect("valid builtin uri")
    }

    pub fn builtin_heisenberg(num_qubits: usize, j: f64, h: f64) -> Self {
        format!("builtin:heisenberg:{num_qubits}:{j}:{h}")
            .parse()
            .expect("valid builtin uri")
    }

    pub fn load(&self) -> Result<Hamiltonian> {
        match self {
            HamiltonianSource::Builtin { spec, .. } => spec.build(),
            HamiltonianSource::File(path) => Hamiltonian::load(path),
        }
    }
}

impl fmt::Display for HamiltonianSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HamiltonianSource::Builtin { text, .. } => f.write_str(text),
            HamiltonianSource::File(path) => write!(f, "{}", path.display()),
        }
    }
}

impl FromStr for HamiltonianSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let Some(rest) = s.strip_prefix("builtin:") else {
            if s.is_empty() {
                return Err(Error::Argument("empty hamiltonian source".into()));
            }
            return Ok(HamiltonianSource::File(PathBuf::from(s)));
        };
        let parts: Vec<&str> = rest.split(':').collect();
        let bad = || Error::Argument(format!("malformed builtin hamiltonian {s:?}"));
        let int = |p: &str| p.parse::<usize>().map_err(|_| bad());
        let real = |p: &str| {
            p.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(bad)
        };
        let spec = match parts.as_slice() {
            ["tfim", n, g] => Builtin::Tfim {
                num_qubits: int(n)?,
                g: real(g)?,
            },
            ["heisenberg", n, j, h] => Builtin::Heisenberg {
                num_qubits: int(n)?,
                j: real(j)?,
                h: real(h)?,
            },
            _ => return Err(bad()),
        };
        Ok(HamiltonianSource::Builtin {
            spec,
            text: s.to_string(),
        })
    }
}

impl TryFrom<String> for HamiltonianSource {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        value.parse()
    }
}

impl From<HamiltonianSource> for String {
    fn from(value: HamiltonianSource) -> Self {
        value.to_string()
    }
}
