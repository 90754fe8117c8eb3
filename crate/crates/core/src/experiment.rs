//! Training loop, sweeps over (Hamiltonian, seed, strategy) and result files.
//!
//! The convergence metric is the base-10 log of the absolute gap between the
//! exact ground energy and the trained energy, floored at -15.

use std::collections::HashMap;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activation::{Activator, StrategyConfig, StrategyKind};
use crate::ansatz::{CircuitSpec, ParamVector};
use crate::error::{Error, Result};
use crate::gradient::loss_and_gradient;
use crate::hamiltonian::{Hamiltonian, HamiltonianSource, REFERENCE_TOLERANCE};
use crate::optimizer::{AdamConfig, AdamState};

/// Lanczos tolerance used for every reference ground energy.
pub const GROUND_ENERGY_TOL: f64 = 1e-10;

/// Gap value recorded when |E_gs - E| underflows.
pub const GAP_FLOOR: f64 = -15.0;

pub const GAP_LOG_BASE: u32 = 10;

pub const TRACE_CSV_HEADER: [&str; 9] = [
    "strategy",
    "k_percent",
    "warmup",
    "hamiltonian",
    "seed",
    "iteration",
    "energy",
    "gap_log10",
    "active_count",
];

pub const AGGREGATE_CSV_HEADER: [&str; 9] = [
    "strategy",
    "k_percent",
    "warmup",
    "iteration",
    "records",
    "mean_gap_log10",
    "std_gap_log10",
    "band_low",
    "band_high",
];

/// Everything about a run except which Hamiltonian, strategy and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    #[serde(default = "defaults::num_layers")]
    pub num_layers: usize,
    #[serde(default = "defaults::iterations")]
    pub iterations: usize,
    #[serde(default = "defaults::lr")]
    pub lr: f64,
    #[serde(default = "defaults::beta1")]
    pub beta1: f64,
    #[serde(default = "defaults::beta2")]
    pub beta2: f64,
    #[serde(default = "defaults::epsilon")]
    pub epsilon: f64,
    #[serde(default = "defaults::log_every")]
    pub log_every: usize,
}

mod defaults {
    use crate::optimizer::AdamConfig;

    pub fn num_layers() -> usize {
        4
    }
    pub fn iterations() -> usize {
        2000
    }
    pub fn lr() -> f64 {
        AdamConfig::default().lr
    }
    pub fn beta1() -> f64 {
        AdamConfig::default().beta1
    }
    pub fn beta2() -> f64 {
        AdamConfig::default().beta2
    }
    pub fn epsilon() -> f64 {
        AdamConfig::default().epsilon
    }
    pub fn log_every() -> usize {
        10
    }
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            num_layers: defaults::num_layers(),
            iterations: defaults::iterations(),
            lr: defaults::lr(),
            beta1: defaults::beta1(),
            beta2: defaults::beta2(),
            epsilon: defaults::epsilon(),
            log_every: defaults::log_every(),
        }
    }
}

impl TrainSettings {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if self.num_layers == 0 {
            return Err(Error::Config("num_layers must be at least 1".into()));
        }
        if self.log_every == 0 {
            return Err(Error::Config("log_every must be at least 1".into()));
        }
        self.adam().validate()
    }
}

/// One training run. Serialized with flat keys, e.g.
/// `{"hamiltonian": "builtin:tfim:6:1", "strategy": "mag", "k_percent": 10, ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub hamiltonian: HamiltonianSource,
    #[serde(flatten)]
    pub strategy: StrategyConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(flatten)]
    pub train: TrainSettings,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.strategy.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub energy: f64,
    pub gap_log10: f64,
    pub active_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: RunConfig,
    pub hamiltonian_label: String,
    pub e_gs: f64,
    pub gap_log_base: u32,
    pub trace: Vec<TracePoint>,
    pub final_params: ParamVector,
    /// Seconds spent training. Left out of serialized records so result
    /// files stay byte-identical across reruns.
    #[serde(skip)]
    pub wall_time: f64,
}

impl RunRecord {
    pub fn initial(&self) -> &TracePoint {
        self.trace.first().expect("trace always has iteration 0")
    }

    pub fn last(&self) -> &TracePoint {
        self.trace.last().expect("trace always has the final iteration")
    }

    pub fn final_gap(&self) -> f64 {
        self.last().gap_log10
    }
}

/// log10|E_gs - E|, floored at [`GAP_FLOOR`].
pub fn gap_log10(e_gs: f64, energy: f64) -> f64 {
    let diff = (e_gs - energy).abs();
    if diff < 1e-15 {
        GAP_FLOOR
    } else {
        diff.log10()
    }
}

/// Ground energy of `h`, warning when it disagrees with an embedded reference.
pub fn reference_ground_energy(h: &Hamiltonian) -> Result<f64> {
    let e_gs = h.ground_energy(GROUND_ENERGY_TOL)?;
    if let Some(diff) = h.reference_mismatch(e_gs) {
        if diff > REFERENCE_TOLERANCE {
            log::warn!(
                "{}: computed ground energy {e_gs} differs from e_gs_reference by {diff:e}",
                h.label()
            );
        }
    }
    Ok(e_gs)
}

pub fn run_vqe(cfg: &RunConfig) -> Result<RunRecord> {
    cfg.validate()?;
    let h = cfg.hamiltonian.load()?;
    let e_gs = reference_ground_energy(&h)?;
    train(cfg, &h, e_gs)
}

/// Trains against an already loaded Hamiltonian whose ground energy is known.
///
/// Each iteration evaluates energy and gradient at the current parameters,
/// asks the strategy for a mask, logs, then takes one masked Adam step.
/// Parameters are initialized from `cfg.seed` alone, so runs that share a
/// seed start from the same point whatever their strategy.
pub fn train(cfg: &RunConfig, h: &Hamiltonian, e_gs: f64) -> Result<RunRecord> {
    cfg.validate()?;
    let start = Instant::now();
    let circuit = CircuitSpec::new(h.num_qubits(), cfg.train.num_layers)?;
    let mut params = circuit.init_params(cfg.seed);
    let mut activator = Activator::new(cfg.strategy.clone(), &circuit, cfg.seed)?;
    let mut adam = AdamState::new(circuit.num_params(), cfg.train.adam())?;
    let last = cfg.train.iterations;
    let mut trace = Vec::with_capacity(last / cfg.train.log_every + 2);

    for iteration in 0..=last {
        let (energy, grad) = loss_and_gradient(&circuit, &params, h)?;
        let mask = activator.next_mask(iteration, &params)?;
        if iteration % cfg.train.log_every == 0 || iteration == last {
            trace.push(TracePoint {
                iteration,
                energy,
                gap_log10: gap_log10(e_gs, energy),
                active_count: mask.count(),
            });
        }
        if iteration == last {
            break;
        }
        adam.step(&mut params, &grad, &mask)?;
    }

    Ok(RunRecord {
        config: cfg.clone(),
        hamiltonian_label: h.label().to_string(),
        e_gs,
        gap_log_base: GAP_LOG_BASE,
        trace,
        final_params: params,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Declarative sweep: shared settings plus the lists whose Cartesian product
/// is run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    #[serde(flatten)]
    pub train: TrainSettings,
    pub hamiltonians: Vec<HamiltonianSource>,
    pub seeds: Vec<u64>,
    pub variants: Vec<StrategyConfig>,
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn run(&self, jobs: usize) -> Result<Vec<SweepCell>> {
        run_sweep(&self.train, &self.hamiltonians, &self.seeds, &self.variants, jobs)
    }
}

/// One (Hamiltonian, seed, variant) cell; failures are kept per cell.
#[derive(Debug)]
pub struct SweepCell {
    pub hamiltonian: HamiltonianSource,
    pub seed: u64,
    pub variant: StrategyConfig,
    pub outcome: Result<RunRecord>,
}

/// Runs every (hamiltonian, seed, variant) combination on a pool of `jobs`
/// threads (0 = one per logical CPU). Cells come back in product order,
/// Hamiltonian outermost, whatever the scheduling.
pub fn run_sweep(
    settings: &TrainSettings,
    hamiltonians: &[HamiltonianSource],
    seeds: &[u64],
    variants: &[StrategyConfig],
    jobs: usize,
) -> Result<Vec<SweepCell>> {
    for (name, empty) in [
        ("hamiltonians", hamiltonians.is_empty()),
        ("seeds", seeds.is_empty()),
        ("variants", variants.is_empty()),
    ] {
        if empty {
            return Err(Error::Argument(format!("sweep needs at least one entry in {name}")));
        }
    }
    settings.validate()?;
    for v in variants {
        v.validate()?;
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Argument(format!("cannot start worker pool: {e}")))?;

    pool.install(|| {
        let loaded: Vec<std::result::Result<(Hamiltonian, f64), String>> = hamiltonians
            .par_iter()
            .map(|src| {
                let h = src.load().map_err(|e| e.to_string())?;
                let e_gs = reference_ground_energy(&h).map_err(|e| e.to_string())?;
                Ok((h, e_gs))
            })
            .collect();

        let cells: Vec<(usize, u64, &StrategyConfig)> = (0..hamiltonians.len())
            .flat_map(|hi| {
                seeds
                    .iter()
                    .flat_map(move |&seed| variants.iter().map(move |v| (hi, seed, v)))
            })
            .collect();

        Ok(cells
            .into_par_iter()
            .map(|(hi, seed, variant)| {
                let cfg = RunConfig {
                    hamiltonian: hamiltonians[hi].clone(),
                    strategy: variant.clone(),
                    seed,
                    train: settings.clone(),
                };
                let outcome = match &loaded[hi] {
                    Ok((h, e_gs)) => train(&cfg, h, *e_gs),
                    Err(msg) => Err(Error::Config(format!(
                        "hamiltonian {} unavailable: {msg}",
                        hamiltonians[hi]
                    ))),
                };
                SweepCell {
                    hamiltonian: cfg.hamiltonian,
                    seed,
                    variant: cfg.strategy,
                    outcome,
                }
            })
            .collect())
    })
}

/// Grouping key for aggregation: everything that identifies a variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct VariantKey {
    kind: StrategyKind,
    k_bits: u64,
    warmup: usize,
    fixed_axis: bool,
}

impl From<&StrategyConfig> for VariantKey {
    fn from(cfg: &StrategyConfig) -> Self {
        Self {
            kind: cfg.kind,
            k_bits: cfg.k_percent.to_bits(),
            warmup: cfg.warmup_iters,
            fixed_axis: cfg.gate_ra_fixed_axis,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AggregatePoint {
    pub iteration: usize,
    pub mean: f64,
    /// Sample standard deviation, divisor N - 1 (0 for a single record).
    pub std: f64,
    pub band_low: f64,
    pub band_high: f64,
}

/// Mean and spread of the gap over every record of one strategy variant,
/// with the μ ± σ/2 band.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateTrace {
    pub variant: StrategyConfig,
    pub records: usize,
    pub points: Vec<AggregatePoint>,
}

/// Groups records by strategy variant (first-appearance order) and reduces
/// each group's gap traces pointwise.
pub fn aggregate<'a, I>(records: I) -> Result<Vec<AggregateTrace>>
where
    I: IntoIterator<Item = &'a RunRecord>,
{
    let mut order: Vec<VariantKey> = Vec::new();
    let mut groups: HashMap<VariantKey, Vec<&RunRecord>> = HashMap::new();
    for r in records {
        let key = VariantKey::from(&r.config.strategy);
        groups
            .entry(key)
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(r);
    }

    order
        .into_iter()
        .map(|key| {
            let group = &groups[&key];
            let grid: Vec<usize> = group[0].trace.iter().map(|p| p.iteration).collect();
            for r in group {
                if r.trace.len() != grid.len()
                    || r.trace.iter().zip(&grid).any(|(p, &it)| p.iteration != it)
                {
                    return Err(Error::Aggregation(format!(
                        "records of {} k={} use different iteration grids",
                        key.kind,
                        f64::from_bits(key.k_bits)
                    )));
                }
            }
            let n = group.len() as f64;
            let points = grid
                .iter()
                .enumerate()
                .map(|(j, &iteration)| {
                    let mean = group.iter().map(|r| r.trace[j].gap_log10).sum::<f64>() / n;
                    let std = if group.len() > 1 {
                        let ss: f64 = group
                            .iter()
                            .map(|r| (r.trace[j].gap_log10 - mean).powi(2))
                            .sum();
                        (ss / (n - 1.0)).sqrt()
                    } else {
                        0.0
                    };
                    AggregatePoint {
                        iteration,
                        mean,
                        std,
                        band_low: mean - 0.5 * std,
                        band_high: mean + 0.5 * std,
                    }
                })
                .collect();
            Ok(AggregateTrace {
                variant: group[0].config.strategy.clone(),
                records: group.len(),
                points,
            })
        })
        .collect()
}

/// Formats `x` with `digits` significant digits, plain notation where that
/// stays readable.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exponent = x.abs().log10().floor() as i32;
    if (-5..15).contains(&exponent) {
        let decimals = (digits as i32 - 1 - exponent).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.*e}", digits - 1)
    }
}

fn num(x: f64) -> String {
    fmt_sig(x, 9)
}

pub fn write_trace_csv<'a, W, I>(writer: W, records: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a RunRecord>,
{
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(TRACE_CSV_HEADER)?;
    for r in records {
        let s = &r.config.strategy;
        for p in &r.trace {
            csv.write_record([
                s.kind.as_str().to_string(),
                s.k_percent.to_string(),
                s.warmup_iters.to_string(),
                r.config.hamiltonian.to_string(),
                r.config.seed.to_string(),
                p.iteration.to_string(),
                num(p.energy),
                num(p.gap_log10),
                p.active_count.to_string(),
            ])?;
        }
    }
    csv.flush()?;
    Ok(())
}

pub fn write_aggregate_csv<W: Write>(writer: W, traces: &[AggregateTrace]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(AGGREGATE_CSV_HEADER)?;
    for t in traces {
        for p in &t.points {
            csv.write_record([
                t.variant.kind.as_str().to_string(),
                t.variant.k_percent.to_string(),
                t.variant.warmup_iters.to_string(),
                p.iteration.to_string(),
                t.records.to_string(),
                num(p.mean),
                num(p.std),
                num(p.band_low),
                num(p.band_high),
            ])?;
        }
    }
    csv.flush()?;
    Ok(())
}

/// One JSON object per line; failed sweep cells are written as
/// `{"hamiltonian", "seed", "variant", "error"}` objects.
pub fn write_jsonl<W: Write>(mut writer: W, cells: &[SweepCell]) -> Result<()> {
    for cell in cells {
        let line = match &cell.outcome {
            Ok(record) => serde_json::to_string(record),
            Err(e) => serde_json::to_string(&serde_json::json!({
                "hamiltonian": cell.hamiltonian,
                "seed": cell.seed,
                "variant": cell.variant,
                "error": e.to_string(),
            })),
        }
        .map_err(|e| Error::Io(e.into()))?;
        writeln!(writer, "{line}")?;
    }
    Ok(())
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => v[n / 2],
        _ => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}
