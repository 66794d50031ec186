//! Classical shadows with common randomized measurements (CRM).
//!
//! The crate simulates randomized local Pauli measurements on small dense
//! quantum states, builds standard, CRM and companion shadow snapshots, and
//! provides single- and multi-copy estimators together with the analytic
//! variance expressions used to judge them.
//!
//! Qubits are indexed from 0. Qubit 0 is the most significant bit of a
//! computational-basis index, i.e. `|s_0 s_1 ... s_{N-1}>` has index
//! `sum_i s_i 2^(N-1-i)`.

pub mod error;
pub mod experiment;
pub mod measurement;
pub mod observables;
pub mod qcore;
pub mod shadows;
pub mod statesrc;
pub mod variance;

pub use error::{Error, Result};
