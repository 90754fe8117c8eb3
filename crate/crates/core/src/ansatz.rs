//! Strongly-entangling layered ansatz.
//!
//! Each layer applies RX, RY, RZ to every qubit (qubit-major) followed by a
//! nearest-neighbour CNOT ring. Parameter `layer·3n + qubit·3 + axis` drives
//! the rotation on that (layer, qubit, axis).

use std::f64::consts::PI;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::statevector::{Axis, Statevector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GateSlot {
    pub param_index: usize,
    pub layer: usize,
    pub qubit: usize,
    pub axis: Axis,
}

/// One step of the circuit in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Rotation(GateSlot),
    Cnot { control: usize, target: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CircuitSpec {
    num_qubits: usize,
    num_layers: usize,
    slots: Vec<GateSlot>,
    entanglers: Vec<Vec<(usize, usize)>>,
}

impl CircuitSpec {
    pub fn new(num_qubits: usize, num_layers: usize) -> Result<Self> {
        if num_qubits < 2 {
            return Err(Error::Size(format!(
                "ansatz needs at least 2 qubits, got {num_qubits}"
            )));
        }
        if num_layers == 0 {
            return Err(Error::Size("ansatz needs at least one layer".into()));
        }
        // probe the simulator bound up front
        Statevector::zero_state(num_qubits)?;

        let mut slots = Vec::with_capacity(3 * num_qubits * num_layers);
        for layer in 0..num_layers {
            for qubit in 0..num_qubits {
                for axis in Axis::ALL {
                    slots.push(GateSlot {
                        param_index: slots.len(),
                        layer,
                        qubit,
                        axis,
                    });
                }
            }
        }
        let ring: Vec<(usize, usize)> = (0..num_qubits).map(|q| (q, (q + 1) % num_qubits)).collect();
        Ok(Self {
            num_qubits,
            num_layers,
            slots,
            entanglers: vec![ring; num_layers],
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn num_layers(&self) -> usize {
        self.num_layers
    }

    /// Total parameter count, 3·n·L.
    pub fn num_params(&self) -> usize {
        self.slots.len()
    }

    pub fn slots(&self) -> &[GateSlot] {
        &self.slots
    }

    pub fn entanglers(&self, layer: usize) -> &[(usize, usize)] {
        &self.entanglers[layer]
    }

    /// Parameter indices of every rotation about `axis`.
    pub fn indices_for_axis(&self, axis: Axis) -> Vec<usize> {
        self.slots
            .iter()
            .filter(|s| s.axis == axis)
            .map(|s| s.param_index)
            .collect()
    }

    pub fn param_index(layer: usize, qubit: usize, axis: Axis, num_qubits: usize) -> usize {
        layer * 3 * num_qubits + qubit * 3 + axis.ordinal()
    }

    /// Gates in execution order.
    pub fn ops(&self) -> impl DoubleEndedIterator<Item = Op> + '_ {
        let per_layer = 3 * self.num_qubits;
        (0..self.num_layers).flat_map(move |layer| {
            let rotations = self.slots[layer * per_layer..(layer + 1) * per_layer]
                .iter()
                .map(|&s| Op::Rotation(s));
            let cnots = self.entanglers[layer]
                .iter()
                .map(|&(control, target)| Op::Cnot { control, target });
            rotations.chain(cnots)
        })
    }

    /// U(θ)|0...0⟩.
    pub fn prepare_state(&self, params: &ParamVector) -> Result<Statevector> {
        self.check_params(params)?;
        let mut state = Statevector::zero_state(self.num_qubits)?;
        for op in self.ops() {
            match op {
                Op::Rotation(s) => state.apply_rotation(s.axis, s.qubit, params[s.param_index])?,
                Op::Cnot { control, target } => state.apply_cnot(control, target)?,
            }
        }
        Ok(state)
    }

    /// Independent uniform draws on [-π, π) from a ChaCha20 stream keyed by
    /// `seed`. The float conversion is done by hand so the values do not
    /// depend on the `rand` distribution implementation.
    pub fn init_params(&self, seed: u64) -> ParamVector {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let values = (0..self.num_params())
            .map(|_| {
                let unit = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
                PI * (2.0 * unit - 1.0)
            })
            .collect();
        ParamVector(values)
    }

    pub fn check_params(&self, params: &ParamVector) -> Result<()> {
        if params.len() != self.num_params() {
            Err(Error::Size(format!(
                "{} parameters given, circuit has {}",
                params.len(),
                self.num_params()
            )))
        } else {
            Ok(())
        }
    }
}

/// Rotation angles θ, one per gate slot, in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("parameter {i} is not finite")));
        }
        Ok(Self(values))
    }

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

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for ParamVector {
    type Output = f64;

    fn index(&self, index: usize) -> &f64 {
        &self.0[index]
    }
}

impl std::ops::IndexMut<usize> for ParamVector {
    fn index_mut(&mut self, index: usize) -> &mut f64 {
        &mut self.0[index]
    }
}
