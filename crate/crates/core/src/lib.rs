//! Variational quantum eigensolver training with selective gate activation.
//!
//! A dense statevector simulator drives a layered RX/RY/RZ + CNOT-ring ansatz
//! against Pauli-sum Hamiltonians. Each training iteration, an activation
//! strategy picks which rotation gates the masked Adam optimizer may update:
//! a uniformly random subset, a random subset of one rotation axis, or the
//! gates with the largest parameter magnitude.
//!
//! ```
//! use selact_core::{run_vqe, HamiltonianSource, RunConfig, StrategyConfig, TrainSettings};
//!
//! let cfg = RunConfig {
//!     hamiltonian: HamiltonianSource::builtin_tfim(3, 1.0),
//!     strategy: StrategyConfig::magnitude(50.0, 0),
//!     seed: 7,
//!     train: TrainSettings { num_layers: 2, iterations: 20, ..TrainSettings::default() },
//! };
//! let record = run_vqe(&cfg).unwrap();
//! assert_eq!(record.trace.last().unwrap().iteration, 20);
//! ```

pub mod activation;
pub mod ansatz;
pub mod error;
pub mod experiment;
pub mod gradient;
pub mod hamiltonian;
pub mod lanczos;
pub mod optimizer;
pub mod seed;
pub mod statevector;

pub use activation::{ActivationMask, Activator, StrategyConfig, StrategyKind};
pub use ansatz::{CircuitSpec, GateSlot, ParamVector};
pub use error::{Error, Result};
pub use experiment::{
    aggregate, run_sweep, run_vqe, AggregateTrace, RunConfig, RunRecord, SweepCell, SweepConfig,
    TracePoint, TrainSettings,
};
pub use gradient::{
    gradient_adjoint, gradient_finite_difference, gradient_param_shift, gradient_variance, loss,
    loss_and_gradient, GradientVector, VarianceReport,
};
pub use hamiltonian::{Hamiltonian, HamiltonianSource, PauliTerm};
pub use optimizer::{AdamConfig, AdamState};
pub use statevector::{Axis, Statevector};
