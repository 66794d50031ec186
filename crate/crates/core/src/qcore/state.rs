use std::borrow::Cow;

use super::linalg::{
    hermitian_eigenvalues, hermiticity_defect, outer, partial_trace, qubit_count,
    reduced_from_pure, trace, CMatrix, CVector, C64, MAX_STATE_QUBITS,
};
use crate::{Error, Result};

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const NEGATIVITY_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub enum StateData {
    Pure(CVector),
    Mixed(CMatrix),
}

/// A validated physical state on `n` qubits.
///
/// Pure states stay as statevectors and are promoted to density matrices
/// only when a dense matrix is requested.
#[derive(Clone, Debug)]
pub struct DensityState {
    n: usize,
    data: StateData,
}

impl DensityState {
    pub fn from_statevector(psi: CVector) -> Result<Self> {
        let n = qubit_count(psi.len())?;
        check_qubits(n)?;
        let norm = psi.norm();
        if (norm * norm - 1.0).abs() > TRACE_TOL {
            return Err(Error::Validation(format!(
                "statevector norm^2 is {}, expected 1",
                norm * norm
            )));
        }
        Ok(Self {
            n,
            data: StateData::Pure(psi),
        })
    }

    pub fn from_matrix(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension("density matrix must be square".into()));
        }
        let n = qubit_count(m.nrows())?;
        check_qubits(n)?;
        validate_density(&m)?;
        Ok(Self {
            n,
            data: StateData::Mixed(m),
        })
    }

    pub fn maximally_mixed(n: usize) -> Result<Self> {
        let d = 1usize << n;
        Self::from_matrix(CMatrix::identity(d, d) / C64::new(d as f64, 0.0))
    }

    /// Computational basis state `|index>`.
    pub fn basis(n: usize, index: usize) -> Result<Self> {
        let mut psi = CVector::zeros(1 << n);
        if index >= psi.len() {
            return Err(Error::Argument(format!("basis index {index} out of range")));
        }
        psi[index] = C64::new(1.0, 0.0);
        Self::from_statevector(psi)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn data(&self) -> &StateData {
        &self.data
    }

    pub fn statevector(&self) -> Option<&CVector> {
        match &self.data {
            StateData::Pure(psi) => Some(psi),
            StateData::Mixed(_) => None,
        }
    }

    pub fn matrix(&self) -> Cow<'_, CMatrix> {
        match &self.data {
            StateData::Pure(psi) => Cow::Owned(outer(psi)),
            StateData::Mixed(m) => Cow::Borrowed(m),
        }
    }

    /// Reduced density matrix on sorted qubits `keep`.
    pub fn reduced(&self, keep: &[usize]) -> Result<CMatrix> {
        if keep.len() == self.n && keep.iter().enumerate().all(|(i, &q)| i == q) {
            return Ok(self.matrix().into_owned());
        }
        match &self.data {
            StateData::Pure(psi) => reduced_from_pure(psi, keep),
            StateData::Mixed(m) => partial_trace(m, keep),
        }
    }

    pub fn purity(&self) -> f64 {
        match &self.data {
            StateData::Pure(_) => 1.0,
            StateData::Mixed(m) => super::linalg::hs_norm_sq(m),
        }
    }
}

fn check_qubits(n: usize) -> Result<()> {
    if n > MAX_STATE_QUBITS {
        return Err(Error::Resource(format!(
            "{n} qubits exceeds the {MAX_STATE_QUBITS}-qubit cap for full states"
        )));
    }
    Ok(())
}

/// Checks hermiticity, unit trace and positivity within the crate tolerances.
pub fn validate_density(m: &CMatrix) -> Result<()> {
    let defect = hermiticity_defect(m);
    if defect > HERMITIAN_TOL {
        return Err(Error::Validation(format!("matrix not hermitian (defect {defect:e})")));
    }
    let tr = trace(m);
    if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
        return Err(Error::Validation(format!("trace {tr} differs from 1")));
    }
    let min_ev = hermitian_eigenvalues(m).first().copied().unwrap_or(0.0);
    if min_ev < -NEGATIVITY_TOL {
        return Err(Error::Validation(format!("negative eigenvalue {min_ev:e}")));
    }
    Ok(())
}

/// A hermitian prior on a declared support; trace and sign are unrestricted.
#[derive(Clone, Debug)]
pub struct PseudoState {
    support: Vec<usize>,
    matrix: CMatrix,
}

impl PseudoState {
    pub fn new(support: Vec<usize>, matrix: CMatrix) -> Result<Self> {
        if support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Argument("support must be strictly increasing".into()));
        }
        if matrix.nrows() != matrix.ncols() || matrix.nrows() != 1 << support.len() {
            return Err(Error::Dimension(format!(
                "pseudo-state of dim {}x{} on {} qubits",
                matrix.nrows(),
                matrix.ncols(),
                support.len()
            )));
        }
        let defect = hermiticity_defect(&matrix);
        if defect > HERMITIAN_TOL {
            return Err(Error::Validation(format!(
                "pseudo-state not hermitian (defect {defect:e})"
            )));
        }
        Ok(Self { support, matrix })
    }

    /// The all-zero prior, which turns CRM shadows back into standard ones.
    pub fn zero(support: Vec<usize>) -> Self {
        let d = 1 << support.len();
        Self {
            support,
            matrix: CMatrix::zeros(d, d),
        }
    }

    /// Reduction of a physical state onto `support`.
    pub fn from_state(state: &DensityState, support: Vec<usize>) -> Result<Self> {
        let m = state.reduced(&support)?;
        Self::new(support, m)
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn num_qubits(&self) -> usize {
        self.support.len()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        trace(&self.matrix).re
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_physical_matrices() {
        let mut m = CMatrix::identity(2, 2);
        assert!(matches!(DensityState::from_matrix(m.clone()), Err(Error::Validation(_))));
        m[(1, 1)] = C64::new(-0.5, 0.0);
        m[(0, 0)] = C64::new(1.5, 0.0);
        assert!(matches!(DensityState::from_matrix(m), Err(Error::Validation(_))));
        let mut h = CMatrix::identity(2, 2) * C64::new(0.5, 0.0);
        h[(0, 1)] = C64::new(0.1, 0.1);
        assert!(matches!(DensityState::from_matrix(h), Err(Error::Validation(_))));
    }

    #[test]
    fn pseudo_state_allows_any_trace() {
        let m = CMatrix::from_diagonal(&CVector::from_vec(vec![C64::new(1.2, 0.0), C64::new(-0.3, 0.0)]));
        let s = PseudoState::new(vec![2], m).unwrap();
        assert!((s.trace() - 0.9).abs() < 1e-15);
    }

    #[test]
    fn state_caps() {
        assert!(matches!(
            DensityState::from_statevector(CVector::zeros(1 << 17)),
            Err(Error::Resource(_))
        ));
    }
}
