//! `selact` command-line driver.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on runtime or numeric
//! failures.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use selact_core::experiment::{
    aggregate, fmt_sig, reference_ground_energy, write_aggregate_csv, write_jsonl,
    write_trace_csv, SweepCell, GROUND_ENERGY_TOL,
};
use selact_core::hamiltonian::REFERENCE_TOLERANCE;
use selact_core::{
    gradient_variance, run_vqe, CircuitSpec, Error, HamiltonianSource, RunConfig, SweepConfig,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

/// Overrides the seed of any config, for smoke tests.
pub const SEED_ENV: &str = "VQE_SELACT_SEED";

pub const TRACE_FILE: &str = "trace.csv";
pub const RECORDS_FILE: &str = "runs.jsonl";
pub const AGGREGATE_FILE: &str = "aggregate.csv";

#[derive(Debug, Parser)]
#[command(name = "selact", version, about = "VQE training with selective gate activation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one configuration and write trace.csv and runs.jsonl.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every (hamiltonian, seed, variant) combination of a sweep config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; defaults to the number of logical CPUs.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Print the exact ground-state energy of a Hamiltonian.
    GroundEnergy {
        /// File path, builtin:tfim:<n>:<g> or builtin:heisenberg:<n>:<J>:<h>.
        #[arg(long)]
        hamiltonian: HamiltonianSource,
        #[arg(long, default_value_t = GROUND_ENERGY_TOL)]
        tol: f64,
    },
    /// Sample gradient statistics over random parameters (JSON report).
    GradVariance {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        samples: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [0.01, 0.05, 0.1])]
        deltas: Vec<f64>,
        /// Output file; the report goes to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a built-in Hamiltonian in the pauli-sum-v1 JSON format.
    MakeHamiltonian {
        source: HamiltonianSource,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a Hamiltonian file against the schema and its e_gs_reference.
    Validate {
        #[arg(long)]
        hamiltonian: PathBuf,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

/// Parses `args` (program name first) and runs the subcommand, returning the
/// process exit code.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            EXIT_RUNTIME
        }
    }
}

fn seed_override() -> Result<Option<u64>, Failure> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Failure::Usage(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::Runtime(format!("cannot read {}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", path.display())))
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run { config, out } => {
            let mut cfg = RunConfig::from_json(&read(&config)?)?;
            if let Some(seed) = seed_override()? {
                cfg.seed = seed;
            }
            let record = run_vqe(&cfg)?;
            log::info!("run finished in {:.2}s", record.wall_time);
            fs::create_dir_all(&out)?;
            let mut csv = create(&out.join(TRACE_FILE))?;
            write_trace_csv(&mut csv, [&record])?;
            csv.flush()?;
            let last = *record.last();
            let cell = SweepCell {
                hamiltonian: cfg.hamiltonian.clone(),
                seed: cfg.seed,
                variant: cfg.strategy.clone(),
                outcome: Ok(record),
            };
            let mut jsonl = create(&out.join(RECORDS_FILE))?;
            write_jsonl(&mut jsonl, std::slice::from_ref(&cell))?;
            jsonl.flush()?;
            println!(
                "iteration {} energy {} gap_log10 {}",
                last.iteration,
                fmt_sig(last.energy, 9),
                fmt_sig(last.gap_log10, 9)
            );
            Ok(())
        }
        Command::Sweep { config, out, jobs } => {
            let mut sweep = SweepConfig::from_json(&read(&config)?)?;
            if let Some(seed) = seed_override()? {
                sweep.seeds = vec![seed];
            }
            let cells = sweep.run(jobs.unwrap_or(0))?;
            fs::create_dir_all(&out)?;
            let ok: Vec<_> = cells.iter().filter_map(|c| c.outcome.as_ref().ok()).collect();
            let mut csv = create(&out.join(TRACE_FILE))?;
            write_trace_csv(&mut csv, ok.iter().copied())?;
            csv.flush()?;
            let mut jsonl = create(&out.join(RECORDS_FILE))?;
            write_jsonl(&mut jsonl, &cells)?;
            jsonl.flush()?;
            let traces = aggregate(ok.iter().copied())?;
            let mut agg = create(&out.join(AGGREGATE_FILE))?;
            write_aggregate_csv(&mut agg, &traces)?;
            agg.flush()?;

            let failed: Vec<&SweepCell> = cells.iter().filter(|c| c.outcome.is_err()).collect();
            println!("{} runs, {} failed", cells.len(), failed.len());
            for t in &traces {
                let last = t.points.last().expect("non-empty trace");
                println!(
                    "{} k={} warmup={}: mean final gap_log10 {} (n={})",
                    t.variant.kind,
                    t.variant.k_percent,
                    t.variant.warmup_iters,
                    fmt_sig(last.mean, 9),
                    t.records
                );
            }
            if failed.is_empty() {
                Ok(())
            } else {
                for c in &failed {
                    if let Err(e) = &c.outcome {
                        eprintln!("{} seed {} {}: {e}", c.hamiltonian, c.seed, c.variant.kind);
                    }
                }
                Err(Failure::Runtime(format!("{} sweep cells failed", failed.len())))
            }
        }
        Command::GroundEnergy { hamiltonian, tol } => {
            let h = hamiltonian.load()?;
            let e_gs = h.ground_energy(tol)?;
            println!("{}", fmt_sig(e_gs, 9));
            Ok(())
        }
        Command::GradVariance {
            config,
            samples,
            deltas,
            out,
        } => {
            let mut cfg = RunConfig::from_json(&read(&config)?)?;
            if let Some(seed) = seed_override()? {
                cfg.seed = seed;
            }
            let h = cfg.hamiltonian.load()?;
            let circuit = CircuitSpec::new(h.num_qubits(), cfg.train.num_layers)?;
            let report = gradient_variance(&circuit, &h, samples, cfg.seed, &deltas)?;
            let text = serde_json::to_string_pretty(&report)
                .map_err(|e| Failure::Runtime(e.to_string()))?;
            match out {
                Some(path) => {
                    let mut w = create(&path)?;
                    writeln!(w, "{text}")?;
                    w.flush()?;
                    println!("median per-index variance {}", fmt_sig(report.median_variance(), 9));
                }
                None => println!("{text}"),
            }
            Ok(())
        }
        Command::MakeHamiltonian { source, out } => {
            if !matches!(source, HamiltonianSource::Builtin { .. }) {
                return Err(Failure::Usage(format!(
                    "make-hamiltonian expects a builtin:... source, got {source}"
                )));
            }
            let h = source.load()?;
            let mut w = create(&out)?;
            writeln!(w, "{}", h.to_json())?;
            w.flush()?;
            Ok(())
        }
        Command::Validate { hamiltonian } => {
            let h = HamiltonianSource::File(hamiltonian).load()?;
            let e_gs = reference_ground_energy(&h)?;
            println!(
                "{}: {} qubits, {} terms, ground energy {}",
                if h.label().is_empty() { "<unlabelled>" } else { h.label() },
                h.num_qubits(),
                h.terms().len(),
                fmt_sig(e_gs, 9)
            );
            match h.reference_mismatch(e_gs) {
                Some(diff) if diff > REFERENCE_TOLERANCE => Err(Failure::Runtime(format!(
                    "ground energy differs from e_gs_reference by {diff:e} (> {REFERENCE_TOLERANCE:e})"
                ))),
                Some(diff) => {
                    println!("e_gs_reference agrees within {}", fmt_sig(diff, 3));
                    Ok(())
                }
                None => Ok(()),
            }
        }
    }
}
