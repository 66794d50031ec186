use crate::qcore::linalg::{qubit_count, CMatrix, CVector, C64};
use crate::{Error, Result};

/// Truncates a pure state to bond dimension `chi` by one left-to-right
/// sweep of Schmidt decompositions, keeping the `chi` largest singular
/// values at every bond, and renormalizes.
pub fn bond_truncate(psi: &CVector, chi: usize) -> Result<CVector> {
    if chi == 0 {
        return Err(Error::Argument("bond dimension must be >= 1".into()));
    }
    let n = qubit_count(psi.len())?;
    // prefix: isometry from kept bond states to the first k qubits,
    // rest: (bond) x (remaining qubits) coefficients
    let mut prefix = CMatrix::from_element(1, 1, C64::new(1.0, 0.0));
    let mut rest = CMatrix::from_fn(1, psi.len(), |_, c| psi[c]);
    for _ in 0..n {
        let r = rest.nrows();
        let half = rest.ncols() / 2;
        // rows: (bond, next qubit); the next qubit is the most significant
        // of the remaining ones
        let m = CMatrix::from_fn(2 * r, half, |row, col| rest[(row / 2, (row % 2) * half + col)]);
        // left singular vectors from the small gram matrix M M^dagger
        let eig = (&m * m.adjoint()).symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let keep: Vec<usize> = order
            .into_iter()
            .take(chi)
            .filter(|&i| eig.eigenvalues[i] > 1e-28)
            .collect();
        if keep.is_empty() {
            return Err(Error::Validation("state has zero norm".into()));
        }
        let u = eig.eigenvectors.select_columns(&keep);
        let p = prefix.nrows();
        let next_prefix = CMatrix::from_fn(2 * p, keep.len(), |row, j| {
            let (pre, s) = (row / 2, row % 2);
            (0..r).map(|a| prefix[(pre, a)] * u[(2 * a + s, j)]).sum()
        });
        rest = u.adjoint() * m;
        prefix = next_prefix;
    }
    let out = &prefix * &rest;
    let v = CVector::from_iterator(out.nrows(), out.column(0).iter().cloned());
    let norm = v.norm();
    Ok(v / C64::new(norm, 0.0))
}
