//! Quantum-trajectory simulation of Grover search with gate-level amplitude
//! damping.
//!
//! The algorithm is decomposed into single-qubit, CNOT and Toffoli gates on
//! `n_q` register qubits plus one ancilla. After every gate each qubit decays
//! with probability `Gamma` per unit of excitation; the resulting decay of the
//! search probability, the 4-state subspace weight and the fidelity is fitted
//! to extract the normalized rate `C = gamma / (Gamma n_g n_tot)`.

pub mod analysis;
pub mod density;
pub mod error;
pub mod grover;
pub mod noise;
pub mod observables;
pub mod qstate;
pub mod trajectory;

pub use error::{Error, Result};
pub use grover::{GroverCircuit, GroverConfig, TickMode};
pub use noise::NoiseModel;
pub use qstate::{Gate, StateVector};
pub use trajectory::{run_ensemble, run_trajectory, trajectory_rng, EnsembleSpec, TrajectoryEnsemble};
