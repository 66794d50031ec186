//! Dense state primitives: rotations, reductions, Pauli expectations and
//! exact spectral quantities.

pub mod linalg;
pub mod pauli;
pub mod state;

pub use linalg::{CMatrix, CVector, C64};
pub use pauli::{Pauli, PauliString};
pub use state::{DensityState, PseudoState, StateData};

use crate::measurement::MeasurementSetting;
use crate::{Error, Result};
use linalg::{apply_1q_vec, conjugate_1q, hermitian_eigenvalues, qubit_count};
use state::NEGATIVITY_TOL;

fn check_setting(n: usize, setting: &MeasurementSetting) -> Result<()> {
    if setting.len() != n {
        return Err(Error::Dimension(format!(
            "setting of length {} applied to {n} qubits",
            setting.len()
        )));
    }
    Ok(())
}

/// `U m U^dagger` with `U` the product of the setting's basis rotations.
pub fn rotate_matrix(m: &CMatrix, setting: &MeasurementSetting) -> Result<CMatrix> {
    let n = qubit_count(m.nrows())?;
    check_setting(n, setting)?;
    let mut out = m.clone();
    for (q, basis) in setting.bases().iter().enumerate() {
        if let Some(g) = basis.rotation() {
            conjugate_1q(&mut out, n, q, &g);
        }
    }
    Ok(out)
}

/// `U psi` for the setting's product rotation.
pub fn rotate_vector(psi: &CVector, setting: &MeasurementSetting) -> Result<CVector> {
    let n = qubit_count(psi.len())?;
    check_setting(n, setting)?;
    let mut out = psi.clone();
    for (q, basis) in setting.bases().iter().enumerate() {
        if let Some(g) = basis.rotation() {
            apply_1q_vec(out.as_mut_slice(), n, q, &g);
        }
    }
    Ok(out)
}

/// Rotated density matrix `U rho U^dagger` of a physical state.
pub fn rotate_state(state: &DensityState, setting: &MeasurementSetting) -> Result<CMatrix> {
    match state.data() {
        StateData::Pure(psi) => Ok(linalg::outer(&rotate_vector(psi, setting)?)),
        StateData::Mixed(m) => rotate_matrix(m, setting),
    }
}

/// `Tr(rho gamma)`.
pub fn pauli_expectation(state: &DensityState, gamma: &PauliString) -> Result<f64> {
    let value = match state.data() {
        StateData::Pure(psi) => gamma.expectation_pure(psi)?,
        StateData::Mixed(m) => gamma.trace_with(m)?,
    };
    Ok(value.re)
}

/// Eigenvalues of a density matrix, clamped into `[0, 1]` after the
/// negativity check.
pub fn density_spectrum(rho: &CMatrix) -> Result<Vec<f64>> {
    let ev = hermitian_eigenvalues(rho);
    if let Some(&min) = ev.first() {
        if min < -NEGATIVITY_TOL {
            return Err(Error::Validation(format!("negative eigenvalue {min:e}")));
        }
    }
    Ok(ev.into_iter().map(|l| l.clamp(0.0, 1.0)).collect())
}

/// Von Neumann entropy in nats, `0 log 0 = 0`.
pub fn exact_entropy(rho: &CMatrix) -> Result<f64> {
    Ok(entropy_of_spectrum(&density_spectrum(rho)?))
}

pub fn entropy_of_spectrum(spectrum: &[f64]) -> f64 {
    spectrum
        .iter()
        .filter(|&&l| l > 0.0)
        .map(|&l| -l * l.ln())
        .sum::<f64>()
        .max(0.0)
}

/// `Tr(rho^n)`.
pub fn exact_trace_moment(rho: &CMatrix, n: u32) -> Result<f64> {
    if n == 0 {
        return Err(Error::Argument("trace moment order must be >= 1".into()));
    }
    Ok(density_spectrum(rho)?.iter().map(|l| l.powi(n as i32)).sum())
}
