//! Per-iteration choice of which rotation gates the optimizer may update.
//!
//! Every strategy activates a fixed number of gates per iteration,
//! `floor(P·k/100)`:
//!
//! * fully random (`ra`): a uniform random subset of all gates;
//! * gate random (`gate-ra`): one rotation axis is drawn, then a uniform
//!   subset of that axis' gates, capped at the P/3 gates of the axis;
//! * magnitude (`mag`): the gates with the largest |θ|, after an optional
//!   warm-up during which every gate trains.

use std::fmt;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ansatz::{CircuitSpec, ParamVector};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, stream};
use crate::statevector::Axis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StrategyKind {
    #[serde(rename = "ra")]
    FullyRandom,
    #[serde(rename = "gate-ra")]
    GateRandom,
    #[serde(rename = "mag")]
    MagnitudeBased,
}

impl StrategyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::FullyRandom => "ra",
            StrategyKind::GateRandom => "gate-ra",
            StrategyKind::MagnitudeBased => "mag",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ra" => Ok(StrategyKind::FullyRandom),
            "gate-ra" => Ok(StrategyKind::GateRandom),
            "mag" => Ok(StrategyKind::MagnitudeBased),
            other => Err(Error::Config(format!(
                "unknown strategy {other:?}, expected ra, gate-ra or mag"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    #[serde(rename = "strategy")]
    pub kind: StrategyKind,
    pub k_percent: f64,
    #[serde(default)]
    pub warmup_iters: usize,
    /// Gate-random only: draw the axis once per run instead of every iteration.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub gate_ra_fixed_axis: bool,
}

impl StrategyConfig {
    pub fn fully_random(k_percent: f64) -> Self {
        Self::new(StrategyKind::FullyRandom, k_percent, 0)
    }

    pub fn gate_random(k_percent: f64) -> Self {
        Self::new(StrategyKind::GateRandom, k_percent, 0)
    }

    pub fn magnitude(k_percent: f64, warmup_iters: usize) -> Self {
        Self::new(StrategyKind::MagnitudeBased, k_percent, warmup_iters)
    }

    fn new(kind: StrategyKind, k_percent: f64, warmup_iters: usize) -> Self {
        Self {
            kind,
            k_percent,
            warmup_iters,
            gate_ra_fixed_axis: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k_percent > 0.0 && self.k_percent <= 100.0) {
            return Err(Error::Config(format!(
                "k_percent {} outside (0, 100]",
                self.k_percent
            )));
        }
        if self.kind != StrategyKind::MagnitudeBased && self.warmup_iters != 0 {
            return Err(Error::Config(format!(
                "warmup_iters is only meaningful for mag, got {} for {}",
                self.warmup_iters, self.kind
            )));
        }
        if self.kind != StrategyKind::GateRandom && self.gate_ra_fixed_axis {
            return Err(Error::Config(format!(
                "gate_ra_fixed_axis set for strategy {}",
                self.kind
            )));
        }
        Ok(())
    }

    /// floor(P·k/100). The small offset keeps decimal percentages such as
    /// 29% of 100 from flooring one below the exact product.
    pub fn target_count(&self, num_params: usize) -> usize {
        (num_params as f64 * self.k_percent / 100.0 + 1e-9).floor() as usize
    }

    fn checked_target(&self, num_params: usize) -> Result<usize> {
        self.validate()?;
        match self.target_count(num_params).min(num_params) {
            0 => Err(Error::Config(format!(
                "{}% of {num_params} gates activates nothing",
                self.k_percent
            ))),
            n => Ok(n),
        }
    }

    fn expect_kind(&self, kind: StrategyKind) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "{kind} selector called with a {} config",
                self.kind
            )))
        }
    }
}

/// Which parameters the optimizer may update at `iteration`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivationMask {
    pub active: Vec<bool>,
    pub iteration: usize,
}

impl ActivationMask {
    pub fn all(num_params: usize, iteration: usize) -> Self {
        Self {
            active: vec![true; num_params],
            iteration,
        }
    }

    pub fn none(num_params: usize, iteration: usize) -> Self {
        Self {
            active: vec![false; num_params],
            iteration,
        }
    }

    pub fn from_indices(num_params: usize, indices: &[usize], iteration: usize) -> Self {
        let mut mask = Self::none(num_params, iteration);
        for &i in indices {
            mask.active[i] = true;
        }
        mask
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn count(&self) -> usize {
        self.active.iter().filter(|a| **a).count()
    }

    pub fn is_active(&self, index: usize) -> bool {
        self.active[index]
    }

    pub fn active_indices(&self) -> Vec<usize> {
        self.active
            .iter()
            .enumerate()
            .filter_map(|(i, a)| a.then_some(i))
            .collect()
    }
}

pub fn select_fully_random<R: Rng + ?Sized>(
    cfg: &StrategyConfig,
    num_params: usize,
    rng: &mut R,
    iteration: usize,
) -> Result<ActivationMask> {
    cfg.expect_kind(StrategyKind::FullyRandom)?;
    let target = cfg.checked_target(num_params)?;
    let chosen = index::sample(rng, num_params, target).into_vec();
    Ok(ActivationMask::from_indices(num_params, &chosen, iteration))
}

/// `axis = None` draws a fresh axis uniformly from {X, Y, Z}.
pub fn select_gate_random<R: Rng + ?Sized>(
    cfg: &StrategyConfig,
    circuit: &CircuitSpec,
    axis: Option<Axis>,
    rng: &mut R,
    iteration: usize,
) -> Result<ActivationMask> {
    cfg.expect_kind(StrategyKind::GateRandom)?;
    let num_params = circuit.num_params();
    let target = cfg.checked_target(num_params)?;
    let axis = match axis {
        Some(a) => a,
        None => Axis::ALL[rng.random_range(0..3)],
    };
    let pool = circuit.indices_for_axis(axis);
    let count = target.min(pool.len());
    let picks = index::sample(rng, pool.len(), count);
    let chosen: Vec<usize> = picks.iter().map(|p| pool[p]).collect();
    Ok(ActivationMask::from_indices(num_params, &chosen, iteration))
}

/// All gates during warm-up; afterwards the largest-|θ| gates, ties going to
/// the lower index.
pub fn select_magnitude(
    cfg: &StrategyConfig,
    params: &ParamVector,
    iteration: usize,
) -> Result<ActivationMask> {
    cfg.expect_kind(StrategyKind::MagnitudeBased)?;
    let num_params = params.len();
    let target = cfg.checked_target(num_params)?;
    if iteration < cfg.warmup_iters {
        return Ok(ActivationMask::all(num_params, iteration));
    }
    let theta = params.as_slice();
    let mut order: Vec<usize> = (0..num_params).collect();
    order.sort_by(|&a, &b| theta[b].abs().total_cmp(&theta[a].abs()).then(a.cmp(&b)));
    Ok(ActivationMask::from_indices(num_params, &order[..target], iteration))
}

/// Stateful driver owning a run's activation RNG stream.
#[derive(Debug, Clone)]
pub struct Activator {
    cfg: StrategyConfig,
    circuit: CircuitSpec,
    rng: ChaCha8Rng,
    fixed_axis: Option<Axis>,
}

impl Activator {
    pub fn new(cfg: StrategyConfig, circuit: &CircuitSpec, seed: u64) -> Result<Self> {
        cfg.checked_target(circuit.num_params())?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, stream::ACTIVATION, 0));
        let fixed_axis = (cfg.kind == StrategyKind::GateRandom && cfg.gate_ra_fixed_axis)
            .then(|| Axis::ALL[rng.random_range(0..3)]);
        Ok(Self {
            cfg,
            circuit: circuit.clone(),
            rng,
            fixed_axis,
        })
    }

    pub fn config(&self) -> &StrategyConfig {
        &self.cfg
    }

    /// Number of gates a mask at `iteration` activates.
    pub fn expected_count(&self, iteration: usize) -> usize {
        let p = self.circuit.num_params();
        let target = self.cfg.target_count(p).min(p);
        match self.cfg.kind {
            StrategyKind::FullyRandom => target,
            StrategyKind::GateRandom => target.min(p / 3),
            StrategyKind::MagnitudeBased if iteration < self.cfg.warmup_iters => p,
            StrategyKind::MagnitudeBased => target,
        }
    }

    pub fn next_mask(&mut self, iteration: usize, params: &ParamVector) -> Result<ActivationMask> {
        match self.cfg.kind {
            StrategyKind::FullyRandom => {
                select_fully_random(&self.cfg, self.circuit.num_params(), &mut self.rng, iteration)
            }
            StrategyKind::GateRandom => select_gate_random(
                &self.cfg,
                &self.circuit,
                self.fixed_axis,
                &mut self.rng,
                iteration,
            ),
            StrategyKind::MagnitudeBased => select_magnitude(&self.cfg, params, iteration),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn fully_random_counts() {
        let cfg = StrategyConfig::fully_random(10.0);
        assert_eq!(select_fully_random(&cfg, 210, &mut rng(0), 0).unwrap().count(), 21);
        let cfg = StrategyConfig::fully_random(100.0);
        assert_eq!(select_fully_random(&cfg, 210, &mut rng(0), 0).unwrap().count(), 210);
        let cfg = StrategyConfig::fully_random(0.1);
        assert!(matches!(select_fully_random(&cfg, 210, &mut rng(0), 0), Err(Error::Config(_))));
    }

    #[test]
    fn gate_random_cap() {
        let circuit = CircuitSpec::new(10, 7).unwrap();
        for (k, expected) in [(10.0, 21), (50.0, 70), (90.0, 70)] {
            let cfg = StrategyConfig::gate_random(k);
            let mask = select_gate_random(&cfg, &circuit, None, &mut rng(1), 0).unwrap();
            assert_eq!(mask.count(), expected, "k = {k}");
            let axes: std::collections::BTreeSet<_> = mask
                .active_indices()
                .into_iter()
                .map(|i| circuit.slots()[i].axis)
                .collect();
            assert_eq!(axes.len(), 1);
        }
    }

    #[test]
    fn magnitude_examples() {
        let cfg = StrategyConfig::magnitude(34.0, 0);
        let params = ParamVector::new(vec![0.5, -0.9, 0.1]).unwrap();
        assert_eq!(select_magnitude(&cfg, &params, 0).unwrap().active_indices(), vec![1]);

        let tied = ParamVector::new(vec![0.7, 0.7, 0.1]).unwrap();
        assert_eq!(select_magnitude(&cfg, &tied, 0).unwrap().active_indices(), vec![0]);

        let warm = StrategyConfig::magnitude(34.0, 100);
        assert_eq!(select_magnitude(&warm, &params, 50).unwrap().count(), 3);
        assert_eq!(select_magnitude(&warm, &params, 100).unwrap().count(), 1);
    }

    #[test]
    fn config_validation() {
        assert!(StrategyConfig::fully_random(0.0).validate().is_err());
        assert!(StrategyConfig::fully_random(100.5).validate().is_err());
        assert!(StrategyConfig::fully_random(f64::NAN).validate().is_err());
        let mut bad = StrategyConfig::gate_random(10.0);
        bad.warmup_iters = 5;
        assert!(bad.validate().is_err());
        let mut bad = StrategyConfig::magnitude(10.0, 0);
        bad.gate_ra_fixed_axis = true;
        assert!(bad.validate().is_err());
        let params = ParamVector::zeros(3);
        assert!(select_magnitude(&StrategyConfig::fully_random(50.0), &params, 0).is_err());
    }

    #[test]
    fn config_json_keys() {
        let cfg: StrategyConfig =
            serde_json::from_str(r#"{"strategy":"mag","k_percent":10,"warmup_iters":100}"#).unwrap();
        assert_eq!(cfg, StrategyConfig::magnitude(10.0, 100));
        let cfg: StrategyConfig =
            serde_json::from_str(r#"{"strategy":"gate-ra","k_percent":50}"#).unwrap();
        assert_eq!(cfg, StrategyConfig::gate_random(50.0));
    }

    #[test]
    fn fully_random_marginals_are_uniform() {
        let cfg = StrategyConfig::fully_random(50.0);
        let mut r = rng(42);
        let draws = 10_000;
        let mut hits = [0usize; 20];
        for it in 0..draws {
            for i in select_fully_random(&cfg, 20, &mut r, it).unwrap().active_indices() {
                hits[i] += 1;
            }
        }
        let sigma = (0.25 / draws as f64).sqrt();
        for h in hits {
            let freq = h as f64 / draws as f64;
            assert!((freq - 0.5).abs() <= 3.0 * sigma, "frequency {freq}");
        }
    }

    #[test]
    fn fixed_axis_stays_put() {
        let circuit = CircuitSpec::new(4, 3).unwrap();
        let mut cfg = StrategyConfig::gate_random(10.0);
        cfg.gate_ra_fixed_axis = true;
        let mut act = Activator::new(cfg, &circuit, 9).unwrap();
        let params = ParamVector::zeros(circuit.num_params());
        let mut axes = std::collections::BTreeSet::new();
        for it in 0..50 {
            for i in act.next_mask(it, &params).unwrap().active_indices() {
                axes.insert(circuit.slots()[i].axis);
            }
        }
        assert_eq!(axes.len(), 1);
    }

    #[test]
    fn per_iteration_axis_varies() {
        let circuit = CircuitSpec::new(4, 3).unwrap();
        let mut act = Activator::new(StrategyConfig::gate_random(10.0), &circuit, 9).unwrap();
        let params = ParamVector::zeros(circuit.num_params());
        let mut axes = std::collections::BTreeSet::new();
        for it in 0..50 {
            let mask = act.next_mask(it, &params).unwrap();
            axes.insert(circuit.slots()[mask.active_indices()[0]].axis);
        }
        assert_eq!(axes.len(), 3);
    }

    fn any_strategy() -> impl Strategy<Value = StrategyConfig> {
        (0..3usize, 1.0..=100.0f64, 0..20usize).prop_map(|(kind, k, warmup)| match kind {
            0 => StrategyConfig::fully_random(k),
            1 => StrategyConfig::gate_random(k),
            _ => StrategyConfig::magnitude(k, warmup),
        })
    }

    proptest! {
        #[test]
        fn popcount_and_determinism(
            cfg in any_strategy(),
            n in 2..=6usize,
            layers in 1..=4usize,
            seed in any::<u64>(),
            param_seed in any::<u64>(),
        ) {
            let circuit = CircuitSpec::new(n, layers).unwrap();
            let p = circuit.num_params();
            prop_assume!(cfg.target_count(p) >= 1);
            let params = circuit.init_params(param_seed);
            let mut a = Activator::new(cfg.clone(), &circuit, seed).unwrap();
            let mut b = Activator::new(cfg.clone(), &circuit, seed).unwrap();
            let target = cfg.target_count(p);
            for it in 0..25 {
                let mask = a.next_mask(it, &params).unwrap();
                prop_assert_eq!(&mask, &b.next_mask(it, &params).unwrap());
                let expected = match cfg.kind {
                    StrategyKind::FullyRandom => target,
                    StrategyKind::GateRandom => target.min(p / 3),
                    StrategyKind::MagnitudeBased if it < cfg.warmup_iters => p,
                    StrategyKind::MagnitudeBased => target,
                };
                prop_assert_eq!(mask.count(), expected);
                prop_assert_eq!(a.expected_count(it), expected);

                match cfg.kind {
                    StrategyKind::GateRandom => {
                        let axes: std::collections::BTreeSet<_> = mask
                            .active_indices()
                            .into_iter()
                            .map(|i| circuit.slots()[i].axis)
                            .collect();
                        prop_assert_eq!(axes.len(), 1);
                    }
                    StrategyKind::MagnitudeBased if it >= cfg.warmup_iters => {
                        let theta = params.as_slice();
                        let min_active = mask.active_indices().iter().map(|&i| theta[i].abs()).fold(f64::INFINITY, f64::min);
                        for i in (0..p).filter(|&i| !mask.is_active(i)) {
                            prop_assert!(theta[i].abs() <= min_active);
                        }
                    }
                    _ => {}
                }
            }
        }
    }
}
