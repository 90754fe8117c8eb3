//! Adam with activation-gated updates.
//!
//! Only active coordinates move. An inactive coordinate keeps its parameter,
//! both moments and its step counter bit-for-bit, and bias correction uses
//! the coordinate's own count of active steps, so each parameter behaves as
//! if it ran its own Adam over the iterations where it was selected.

use serde::{Deserialize, Serialize};

use crate::activation::ActivationMask;
use crate::ansatz::ParamVector;
use crate::error::{Error, Result};
use crate::gradient::GradientVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.lr.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0
            && self.epsilon.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid Adam hyperparameters {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    /// Active steps taken by each coordinate.
    pub steps: Vec<u64>,
}

impl AdamState {
    pub fn new(num_params: usize, config: AdamConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            steps: vec![0; num_params],
        })
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// One masked Adam update. Nothing is modified when an error is returned.
    pub fn step(
        &mut self,
        params: &mut ParamVector,
        grad: &GradientVector,
        mask: &ActivationMask,
    ) -> Result<()> {
        let n = self.len();
        if params.len() != n || grad.len() != n || mask.len() != n {
            return Err(Error::Size(format!(
                "adam state of {n} against params {}, gradient {}, mask {}",
                params.len(),
                grad.len(),
                mask.len()
            )));
        }
        if let Some(i) = grad.first_non_finite() {
            return Err(Error::Numeric(format!(
                "gradient entry {i} is {} at iteration {}",
                grad[i], mask.iteration
            )));
        }

        let AdamConfig {
            lr,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let theta = params.as_mut_slice();
        for i in 0..n {
            if !mask.active[i] {
                continue;
            }
            let g = grad[i];
            self.steps[i] += 1;
            let t = self.steps[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            let m_hat = self.m[i] / (1.0 - powu(beta1, t));
            let v_hat = self.v[i] / (1.0 - powu(beta2, t));
            theta[i] -= lr * m_hat / (v_hat.sqrt() + epsilon);
        }
        Ok(())
    }
}

/// base^exp by repeated squaring; plain multiplications keep the result
/// identical on every IEEE-754 platform.
fn powu(base: f64, mut exp: u64) -> f64 {
    let mut result = 1.0;
    let mut b = base;
    while exp > 0 {
        if exp & 1 == 1 {
            result *= b;
        }
        b *= b;
        exp >>= 1;
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fresh(n: usize) -> AdamState {
        AdamState::new(n, AdamConfig::default()).unwrap()
    }

    #[test]
    fn empty_mask_changes_nothing() {
        let mut state = fresh(3);
        let mut params = ParamVector::new(vec![0.1, -0.2, 0.3]).unwrap();
        let before = params.clone();
        let grad = GradientVector::from(vec![1.0, 2.0, 3.0]);
        state.step(&mut params, &grad, &ActivationMask::none(3, 0)).unwrap();
        assert_eq!(params, before);
        assert_eq!(state, fresh(3));
    }

    #[test]
    fn zero_gradient_leaves_parameter() {
        let mut state = fresh(1);
        let mut params = ParamVector::new(vec![0.4]).unwrap();
        state
            .step(&mut params, &GradientVector::from(vec![0.0]), &ActivationMask::all(1, 0))
            .unwrap();
        assert_eq!(params[0], 0.4);
        assert_eq!(state.steps[0], 1);
    }

    #[test]
    fn first_step_is_lr_sized() {
        let mut state = fresh(1);
        let mut params = ParamVector::new(vec![0.0]).unwrap();
        state
            .step(&mut params, &GradientVector::from(vec![2.0]), &ActivationMask::all(1, 0))
            .unwrap();
        let expected = -0.001 * 2.0 / (2.0 + 1e-8);
        assert!((params[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_finite_gradient_without_mutating() {
        let mut state = fresh(2);
        let mut params = ParamVector::new(vec![0.1, 0.2]).unwrap();
        let grad = GradientVector::from(vec![1.0, f64::NAN]);
        let err = state.step(&mut params, &grad, &ActivationMask::all(2, 3));
        assert!(matches!(err, Err(Error::Numeric(_))));
        assert_eq!(params.as_slice(), &[0.1, 0.2]);
        assert_eq!(state, fresh(2));
    }

    #[test]
    fn rejects_length_mismatch() {
        let mut state = fresh(2);
        let mut params = ParamVector::zeros(3);
        let grad = GradientVector::zeros(3);
        let err = state.step(&mut params, &grad, &ActivationMask::all(3, 0));
        assert!(matches!(err, Err(Error::Size(_))));
    }

    #[test]
    fn bias_correction_uses_own_step_count() {
        // a coordinate activated for the first time at a late iteration still
        // takes a full lr-sized first step
        let mut state = fresh(2);
        let mut params = ParamVector::zeros(2);
        let grad = GradientVector::from(vec![0.5, 0.5]);
        for it in 0..50 {
            state
                .step(&mut params, &grad, &ActivationMask::from_indices(2, &[0], it))
                .unwrap();
        }
        state
            .step(&mut params, &grad, &ActivationMask::from_indices(2, &[1], 50))
            .unwrap();
        assert_eq!(state.steps, vec![50, 1]);
        assert!((params[1] + 0.001 * 0.5 / (0.5 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn powu_matches_powi() {
        for t in [0u64, 1, 2, 7, 100, 2000] {
            let a = powu(0.999, t);
            let b = 0.999f64.powi(t as i32);
            assert!((a - b).abs() <= 1e-13 * b.abs().max(1e-300));
        }
    }

    proptest! {
        #[test]
        fn inactive_coordinates_are_frozen_bitwise(
            n in 1..40usize,
            steps in 1..30usize,
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut state = fresh(n);
            let mut params = ParamVector::new((0..n).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap();
            for it in 0..steps {
                let grad = GradientVector::from((0..n).map(|_| rng.random_range(-5.0..5.0)).collect::<Vec<_>>());
                let mask = ActivationMask { active: (0..n).map(|_| rng.random_bool(0.3)).collect(), iteration: it };
                let before = (params.clone(), state.clone());
                state.step(&mut params, &grad, &mask).unwrap();
                for i in 0..n {
                    if mask.active[i] {
                        prop_assert_eq!(state.steps[i], before.1.steps[i] + 1);
                        if before.1.steps[i] == 0 {
                            let lr = state.config.lr;
                            prop_assert!((params[i] - before.0[i]).abs() <= lr * (1.0 + 1e-6));
                        }
                    } else {
                        prop_assert_eq!(params[i].to_bits(), before.0[i].to_bits());
                        prop_assert_eq!(state.m[i].to_bits(), before.1.m[i].to_bits());
                        prop_assert_eq!(state.v[i].to_bits(), before.1.v[i].to_bits());
                        prop_assert_eq!(state.steps[i], before.1.steps[i]);
                    }
                }
            }
        }
    }
}
