//! Test states: critical Ising ground states, their bond-truncated
//! approximations, perturbed companion chains and noisy random circuits.

mod circuit;
mod descriptor;
mod ising;
mod mps;

pub use circuit::{depolarize, haar_unitary, CircuitSpec, MAX_NOISY_QUBITS};
pub use descriptor::{read_matrix_file, read_state_file, write_state_file, StateDescriptor};
pub use ising::{ising_ground, ising_ground_state, IsingSpec};
pub use mps::bond_truncate;
