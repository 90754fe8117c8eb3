//! Energy loss, exact gradients and the gradient-variance diagnostic.
//!
//! Two independent exact methods are provided. The adjoint sweep is what the
//! training loop uses; the parameter-shift rule stays as a cross-check and
//! for gradients over a subset of indices. Central finite differences give a
//! third, approximate, reference.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{CircuitSpec, Op, ParamVector};
use crate::error::{Error, Result};
use crate::hamiltonian::Hamiltonian;
use crate::seed::{derive_seed, stream};

/// Step used by [`gradient_finite_difference`] when callers have no reason to
/// pick another.
pub const DEFAULT_FD_STEP: f64 = 1e-4;

/// ∂l/∂θ_i for every parameter, in energy units per radian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GradientVector(Vec<f64>);

impl GradientVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, g| m.max(g.abs()))
    }

    /// Index of the first non-finite entry, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.0.iter().position(|g| !g.is_finite())
    }
}

impl From<Vec<f64>> for GradientVector {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

impl std::ops::Index<usize> for GradientVector {
    type Output = f64;

    fn index(&self, index: usize) -> &f64 {
        &self.0[index]
    }
}

/// l(θ) = ⟨ψ(θ)|H|ψ(θ)⟩.
pub fn loss(circuit: &CircuitSpec, params: &ParamVector, h: &Hamiltonian) -> Result<f64> {
    check_dims(circuit, h)?;
    let state = circuit.prepare_state(params)?;
    h.expectation(&state)
}

/// Energy and full gradient from one forward pass and one backward sweep.
///
/// The backward sweep carries |ψ_k⟩ (the state right after gate k) and
/// |λ_k⟩ (H|ψ⟩ pulled back to the same point). Since
/// ∂_θ R_a(θ) = -(i/2)·P_a·R_a(θ), each rotation contributes
/// ∂l/∂θ_k = Im⟨λ_k|P_a|ψ_k⟩, after which both vectors are unwound through
/// the inverse gate.
pub fn loss_and_gradient(
    circuit: &CircuitSpec,
    params: &ParamVector,
    h: &Hamiltonian,
) -> Result<(f64, GradientVector)> {
    check_dims(circuit, h)?;
    let mut psi = circuit.prepare_state(params)?;
    let energy = h.expectation(&psi)?;
    let mut lambda = h.apply(&psi)?;
    let mut grad = vec![0.0; circuit.num_params()];

    for op in circuit.ops().rev() {
        match op {
            Op::Rotation(slot) => {
                let element = lambda.pauli_matrix_element(slot.axis, slot.qubit, &psi)?;
                grad[slot.param_index] = element.im;
                let theta = params[slot.param_index];
                psi.apply_rotation(slot.axis, slot.qubit, -theta)?;
                lambda.apply_rotation(slot.axis, slot.qubit, -theta)?;
            }
            Op::Cnot { control, target } => {
                psi.apply_cnot(control, target)?;
                lambda.apply_cnot(control, target)?;
            }
        }
    }
    Ok((energy, GradientVector(grad)))
}

pub fn gradient_adjoint(
    circuit: &CircuitSpec,
    params: &ParamVector,
    h: &Hamiltonian,
) -> Result<GradientVector> {
    loss_and_gradient(circuit, params, h).map(|(_, g)| g)
}

/// Parameter-shift gradient, ∂_i l = [l(θ + π/2·e_i) - l(θ - π/2·e_i)] / 2.
///
/// With `indices = None` every entry is computed; otherwise entries outside
/// the set are left at zero.
pub fn gradient_param_shift(
    circuit: &CircuitSpec,
    params: &ParamVector,
    h: &Hamiltonian,
    indices: Option<&[usize]>,
) -> Result<GradientVector> {
    check_dims(circuit, h)?;
    circuit.check_params(params)?;
    let all: Vec<usize>;
    let indices = match indices {
        Some(ix) => ix,
        None => {
            all = (0..circuit.num_params()).collect();
            &all
        }
    };
    let mut grad = vec![0.0; circuit.num_params()];
    let mut shifted = params.clone();
    for &i in indices {
        if i >= circuit.num_params() {
            return Err(Error::Index(format!(
                "parameter index {i} out of range for {} parameters",
                circuit.num_params()
            )));
        }
        let theta = params[i];
        shifted[i] = theta + FRAC_PI_2;
        let plus = loss(circuit, &shifted, h)?;
        shifted[i] = theta - FRAC_PI_2;
        let minus = loss(circuit, &shifted, h)?;
        shifted[i] = theta;
        grad[i] = 0.5 * (plus - minus);
    }
    Ok(GradientVector(grad))
}

/// Central finite differences with step `eps`.
pub fn gradient_finite_difference(
    circuit: &CircuitSpec,
    params: &ParamVector,
    h: &Hamiltonian,
    eps: f64,
) -> Result<GradientVector> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::Argument(format!("finite-difference step {eps} must be positive")));
    }
    check_dims(circuit, h)?;
    circuit.check_params(params)?;
    let mut shifted = params.clone();
    let mut grad = vec![0.0; circuit.num_params()];
    for (i, g) in grad.iter_mut().enumerate() {
        let theta = params[i];
        shifted[i] = theta + eps;
        let plus = loss(circuit, &shifted, h)?;
        shifted[i] = theta - eps;
        let minus = loss(circuit, &shifted, h)?;
        shifted[i] = theta;
        *g = (plus - minus) / (2.0 * eps);
    }
    Ok(GradientVector(grad))
}

/// Distribution the variance diagnostic samples parameters from.
pub const VARIANCE_PARAM_DISTRIBUTION: &str = "uniform[-pi,pi) per coordinate";

/// Sample statistics of ∂_i l over random parameter draws, with the empirical
/// tail probabilities P(|∂_i l| ≥ δ) that the Chebyshev bound Var/δ² caps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub num_qubits: usize,
    pub num_layers: usize,
    pub hamiltonian: String,
    pub seed: u64,
    pub parameter_distribution: String,
    pub sample_count: usize,
    pub delta_grid: Vec<f64>,
    pub per_index_mean: Vec<f64>,
    /// Unbiased sample variance (divisor M - 1).
    pub per_index_variance: Vec<f64>,
    /// `empirical_exceedance[i][d]` is the fraction of samples with
    /// |∂_i l| ≥ `delta_grid[d]`.
    pub empirical_exceedance: Vec<Vec<f64>>,
}

/// A (parameter, δ) cell whose empirical tail exceeds the Chebyshev bound by
/// more than the allowed sampling slack.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChebyshevViolation {
    pub index: usize,
    pub delta: f64,
    pub exceedance: f64,
    pub bound: f64,
    pub slack: f64,
}

impl VarianceReport {
    pub fn median_variance(&self) -> f64 {
        let mut v = self.per_index_variance.clone();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n == 0 {
            return 0.0;
        }
        if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    }

    /// Cells violating P(|∂_i l| ≥ δ) ≤ Var_i/δ² + sigmas·SE, where SE is the
    /// binomial standard error of a tail frequency equal to the bound.
    pub fn chebyshev_violations(&self, sigmas: f64) -> Vec<ChebyshevViolation> {
        let m = self.sample_count as f64;
        let mut out = Vec::new();
        for (index, (var, row)) in self
            .per_index_variance
            .iter()
            .zip(&self.empirical_exceedance)
            .enumerate()
        {
            for (&delta, &exceedance) in self.delta_grid.iter().zip(row) {
                let bound = var / (delta * delta);
                let p = bound.clamp(0.0, 1.0);
                let slack = sigmas * (p * (1.0 - p) / m).sqrt();
                if exceedance > bound + slack {
                    out.push(ChebyshevViolation {
                        index,
                        delta,
                        exceedance,
                        bound,
                        slack,
                    });
                }
            }
        }
        out
    }
}

/// Draws `samples` parameter vectors from the initialization distribution
/// (each from its own derived seed), computes full gradients and summarizes
/// them per index.
pub fn gradient_variance(
    circuit: &CircuitSpec,
    h: &Hamiltonian,
    samples: usize,
    seed: u64,
    delta_grid: &[f64],
) -> Result<VarianceReport> {
    if samples < 2 {
        return Err(Error::Argument(format!(
            "gradient variance needs at least 2 samples, got {samples}"
        )));
    }
    if let Some(d) = delta_grid.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
        return Err(Error::Argument(format!("delta {d} must be positive and finite")));
    }
    check_dims(circuit, h)?;

    let grads: Vec<GradientVector> = (0..samples)
        .into_par_iter()
        .map(|m| {
            let params =
                circuit.init_params(derive_seed(seed, stream::VARIANCE_SAMPLES, m as u64));
            gradient_adjoint(circuit, &params, h)
        })
        .collect::<Result<_>>()?;

    let p = circuit.num_params();
    let count = samples as f64;
    let mut mean = vec![0.0; p];
    for g in &grads {
        for (acc, x) in mean.iter_mut().zip(g.as_slice()) {
            *acc += x;
        }
    }
    mean.iter_mut().for_each(|x| *x /= count);

    let mut variance = vec![0.0; p];
    let mut exceed = vec![vec![0usize; delta_grid.len()]; p];
    for g in &grads {
        for (i, &x) in g.as_slice().iter().enumerate() {
            variance[i] += (x - mean[i]).powi(2);
            for (d, &delta) in delta_grid.iter().enumerate() {
                if x.abs() >= delta {
                    exceed[i][d] += 1;
                }
            }
        }
    }
    variance.iter_mut().for_each(|v| *v /= count - 1.0);

    Ok(VarianceReport {
        num_qubits: circuit.num_qubits(),
        num_layers: circuit.num_layers(),
        hamiltonian: h.label().to_string(),
        seed,
        parameter_distribution: VARIANCE_PARAM_DISTRIBUTION.to_string(),
        sample_count: samples,
        delta_grid: delta_grid.to_vec(),
        per_index_mean: mean,
        per_index_variance: variance,
        empirical_exceedance: exceed
            .into_iter()
            .map(|row| row.into_iter().map(|c| c as f64 / count).collect())
            .collect(),
    })
}

fn check_dims(circuit: &CircuitSpec, h: &Hamiltonian) -> Result<()> {
    if circuit.num_qubits() != h.num_qubits() {
        Err(Error::Size(format!(
            "{}-qubit circuit against {}-qubit hamiltonian",
            circuit.num_qubits(),
            h.num_qubits()
        )))
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::PauliTerm;
    use crate::statevector::Axis;
    use std::f64::consts::PI;

    fn z_on(num_qubits: usize, qubit: usize) -> Hamiltonian {
        let mut s = vec!['I'; num_qubits];
        s[qubit] = 'Z';
        let s: String = s.into_iter().collect();
        Hamiltonian::new(num_qubits, vec![PauliTerm::new(1.0, s).unwrap()], "z").unwrap()
    }

    fn ry_only(theta: f64) -> ParamVector {
        let mut p = ParamVector::zeros(6);
        p[CircuitSpec::param_index(0, 0, Axis::Y, 2)] = theta;
        p
    }

    #[test]
    fn loss_examples() {
        let c = CircuitSpec::new(2, 1).unwrap();
        let tfim = Hamiltonian::tfim(2, 1.0).unwrap();
        assert_eq!(loss(&c, &ParamVector::zeros(6), &tfim).unwrap(), -1.0);

        let mut p = ParamVector::zeros(6);
        p[0] = PI;
        // the CNOT ring carries qubit 0's flip over to qubit 1
        assert!((loss(&c, &p, &z_on(2, 1)).unwrap() + 1.0).abs() < 1e-12);
        assert!((loss(&c, &p, &z_on(2, 0)).unwrap() - 1.0).abs() < 1e-12);

        let three = Hamiltonian::tfim(3, 1.0).unwrap();
        assert!(matches!(loss(&c, &p, &three), Err(Error::Size(_))));
    }

    #[test]
    fn single_ry_cosine_curve() {
        // with Z on qubit 1, l(θ) = cos θ for the RY on qubit 0
        let c = CircuitSpec::new(2, 1).unwrap();
        let h = z_on(2, 1);
        let idx = CircuitSpec::param_index(0, 0, Axis::Y, 2);
        for theta in [0.0, 0.4, PI / 2.0, 2.0, PI] {
            let l = loss(&c, &ry_only(theta), &h).unwrap();
            assert!((l - theta.cos()).abs() < 1e-12);
        }
        let g = gradient_adjoint(&c, &ry_only(PI / 2.0), &h).unwrap();
        assert!((g[idx] + 1.0).abs() < 1e-12);

        for theta in [0.0, PI] {
            let g = gradient_param_shift(&c, &ry_only(theta), &h, Some(&[idx])).unwrap();
            assert!(g[idx].abs() < 1e-12);
            assert!(g.as_slice().iter().enumerate().all(|(i, v)| i == idx || *v == 0.0));
        }
    }

    #[test]
    fn first_layer_rz_gradients_vanish_at_zero() {
        let c = CircuitSpec::new(4, 2).unwrap();
        let h = Hamiltonian::tfim(4, 1.0).unwrap();
        let params = ParamVector::zeros(c.num_params());
        let adj = gradient_adjoint(&c, &params, &h).unwrap();
        let ps = gradient_param_shift(&c, &params, &h, None).unwrap();
        for q in 0..4 {
            let i = CircuitSpec::param_index(0, q, Axis::Z, 4);
            assert!(adj[i].abs() < 1e-12);
            assert!(ps[i].abs() < 1e-12);
        }
    }

    #[test]
    fn adjoint_energy_matches_loss() {
        let c = CircuitSpec::new(3, 2).unwrap();
        let h = Hamiltonian::heisenberg(3, 1.0, 0.3).unwrap();
        let params = c.init_params(5);
        let (energy, _) = loss_and_gradient(&c, &params, &h).unwrap();
        assert_eq!(energy, loss(&c, &params, &h).unwrap());
    }

    #[test]
    fn shift_rejects_bad_index() {
        let c = CircuitSpec::new(2, 1).unwrap();
        let h = z_on(2, 0);
        let r = gradient_param_shift(&c, &ParamVector::zeros(6), &h, Some(&[6]));
        assert!(matches!(r, Err(Error::Index(_))));
    }

    #[test]
    fn variance_report_contract() {
        let c = CircuitSpec::new(2, 1).unwrap();
        let h = z_on(2, 1);
        let m = 2000;
        let report = gradient_variance(&c, &h, m, 3, &[0.1, 0.5]).unwrap();
        assert_eq!(report.sample_count, m);
        assert!(report.per_index_variance.iter().all(|v| *v >= 0.0));
        assert!(report.chebyshev_violations(3.0).is_empty());
        assert!(matches!(
            gradient_variance(&c, &h, 1, 3, &[0.1]),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            gradient_variance(&c, &h, 10, 3, &[0.0]),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn variance_of_sine_derivative() {
        // one live parameter: l(θ) = cos θ, so ∂l = -sin θ with θ ~ U[-π, π)
        let c = CircuitSpec::new(2, 1).unwrap();
        let h = z_on(2, 1);
        let idx = CircuitSpec::param_index(0, 0, Axis::Y, 2);
        let m = 2000usize;
        let mut samples = Vec::with_capacity(m);
        for s in 0..m {
            let theta = c.init_params(derive_seed(99, 0, s as u64))[idx];
            let g = gradient_adjoint(&c, &ry_only(theta), &h).unwrap();
            samples.push(g[idx]);
        }
        let mean = samples.iter().sum::<f64>() / m as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m as f64 - 1.0);
        // Var[-sin θ] = 1/2; Var of the sample variance: (E[sin^4] - 1/4)/M = (3/8 - 1/4)/M
        let se = ((3.0 / 8.0 - 0.25) / m as f64).sqrt();
        assert!((var - 0.5).abs() < 3.0 * se, "var {var}");
    }

    #[test]
    fn report_statistics() {
        let report = VarianceReport {
            num_qubits: 1,
            num_layers: 1,
            hamiltonian: String::new(),
            seed: 0,
            parameter_distribution: VARIANCE_PARAM_DISTRIBUTION.into(),
            sample_count: 100,
            delta_grid: vec![0.5],
            per_index_mean: vec![0.0; 3],
            per_index_variance: vec![0.3, 0.1, 0.2],
            empirical_exceedance: vec![vec![0.1], vec![0.9], vec![0.1]],
        };
        assert_eq!(report.median_variance(), 0.2);
        let v = report.chebyshev_violations(3.0);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].index, 1);
    }
}
