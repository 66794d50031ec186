//! Dense complex matrix helpers on qubit registers.
//!
//! Matrices are `nalgebra` column-major `DMatrix<Complex64>`. Single- and
//! two-qubit operations act in place through the raw column slices, which
//! keeps conjugation of a 2^12 x 2^12 matrix by a product unitary cheap.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;
pub type Gate1 = [[C64; 2]; 2];
pub type Gate2 = [[C64; 4]; 4];

/// Largest register held as a full state.
pub const MAX_STATE_QUBITS: usize = 16;
/// Largest support on which dense reduced matrices are materialized.
pub const MAX_REDUCED_QUBITS: usize = 12;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Number of qubits for a power-of-two dimension.
pub fn qubit_count(dim: usize) -> Result<usize> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(Error::Argument(format!(
            "dimension {dim} is not a power of two"
        )));
    }
    Ok(dim.trailing_zeros() as usize)
}

/// Bit mask of qubit `q` inside an `n`-qubit index.
#[inline]
pub fn qubit_mask(n: usize, q: usize) -> usize {
    1 << (n - 1 - q)
}

pub fn dagger(m: &CMatrix) -> CMatrix {
    m.adjoint()
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// `Tr(a b)` without forming the product.
pub fn trace_of_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let d = a.nrows();
    let mut acc = ZERO;
    for j in 0..d {
        for i in 0..d {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Squared Hilbert-Schmidt norm `Tr(m^dagger m)`.
pub fn hs_norm_sq(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Max elementwise `|M - M^dagger|`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let d = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in i..d {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn kron_all(factors: &[CMatrix]) -> CMatrix {
    let mut acc = CMatrix::from_element(1, 1, ONE);
    for f in factors {
        acc = acc.kronecker(f);
    }
    acc
}

pub fn gate_matrix(g: &Gate1) -> CMatrix {
    CMatrix::from_fn(2, 2, |i, j| g[i][j])
}

pub fn outer(psi: &CVector) -> CMatrix {
    psi * psi.adjoint()
}

/// `v <- G_q v`.
pub fn apply_1q_vec(v: &mut [C64], n: usize, q: usize, g: &Gate1) {
    let mask = qubit_mask(n, q);
    for i0 in 0..v.len() {
        if i0 & mask != 0 {
            continue;
        }
        let i1 = i0 | mask;
        let (a, b) = (v[i0], v[i1]);
        v[i0] = g[0][0] * a + g[0][1] * b;
        v[i1] = g[1][0] * a + g[1][1] * b;
    }
}

/// `v <- G_{q1 q2} v` with `q1` the more significant index of the 4x4 gate.
pub fn apply_2q_vec(v: &mut [C64], n: usize, q1: usize, q2: usize, g: &Gate2) {
    let m1 = qubit_mask(n, q1);
    let m2 = qubit_mask(n, q2);
    for base in 0..v.len() {
        if base & (m1 | m2) != 0 {
            continue;
        }
        let idx = [base, base | m2, base | m1, base | m1 | m2];
        let old = [v[idx[0]], v[idx[1]], v[idx[2]], v[idx[3]]];
        for (r, &target) in idx.iter().enumerate() {
            let mut acc = ZERO;
            for (c, &o) in old.iter().enumerate() {
                acc += g[r][c] * o;
            }
            v[target] = acc;
        }
    }
}

/// `m <- G_q m` (acts on the row index).
pub fn apply_1q_left(m: &mut CMatrix, n: usize, q: usize, g: &Gate1) {
    let rows = m.nrows();
    for col in m.as_mut_slice().chunks_mut(rows) {
        apply_1q_vec(col, n, q, g);
    }
}

/// `m <- m G_q^dagger` (acts on the column index).
pub fn apply_1q_right_adj(m: &mut CMatrix, n: usize, q: usize, g: &Gate1) {
    let rows = m.nrows();
    let mask = qubit_mask(n, q);
    let data = m.as_mut_slice();
    let (g00, g01, g10, g11) = (g[0][0].conj(), g[0][1].conj(), g[1][0].conj(), g[1][1].conj());
    for j0 in 0..rows {
        if j0 & mask != 0 {
            continue;
        }
        let j1 = j0 | mask;
        for i in 0..rows {
            let a = data[j0 * rows + i];
            let b = data[j1 * rows + i];
            // (M G^dagger)_{i,b} = sum_a M_{i,a} conj(G_{b,a})
            data[j0 * rows + i] = a * g00 + b * g01;
            data[j1 * rows + i] = a * g10 + b * g11;
        }
    }
}

/// `m <- G_q m G_q^dagger`.
pub fn conjugate_1q(m: &mut CMatrix, n: usize, q: usize, g: &Gate1) {
    apply_1q_left(m, n, q, g);
    apply_1q_right_adj(m, n, q, g);
}

/// `m <- G m G^dagger` for a two-qubit gate on `(q1, q2)`.
pub fn conjugate_2q(m: &mut CMatrix, n: usize, q1: usize, q2: usize, g: &Gate2) {
    let rows = m.nrows();
    for col in m.as_mut_slice().chunks_mut(rows) {
        apply_2q_vec(col, n, q1, q2, g);
    }
    // right multiplication by G^dagger == left multiplication of M^dagger by G
    let mut adj = m.adjoint();
    for col in adj.as_mut_slice().chunks_mut(rows) {
        apply_2q_vec(col, n, q1, q2, g);
    }
    *m = adj.adjoint();
}

/// Index maps splitting an `n`-qubit index into kept and traced parts.
pub(crate) fn split_index_maps(n: usize, keep: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let traced: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
    let scatter = |qubits: &[usize]| -> Vec<usize> {
        let k = qubits.len();
        (0..1usize << k)
            .map(|local| {
                let mut full = 0usize;
                for (pos, &q) in qubits.iter().enumerate() {
                    if local & (1 << (k - 1 - pos)) != 0 {
                        full |= qubit_mask(n, q);
                    }
                }
                full
            })
            .collect()
    };
    (scatter(keep), scatter(&traced))
}

fn check_keep(n: usize, keep: &[usize]) -> Result<()> {
    if keep.is_empty() {
        return Err(Error::Argument("empty subsystem".into()));
    }
    if let Some(&q) = keep.iter().find(|&&q| q >= n) {
        return Err(Error::Argument(format!(
            "qubit {q} out of range for {n} qubits"
        )));
    }
    if keep.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Argument(
            "subsystem qubits must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Reduced matrix on the (sorted) qubits `keep`, tracing out the rest.
pub fn partial_trace(m: &CMatrix, keep: &[usize]) -> Result<CMatrix> {
    let n = qubit_count(m.nrows())?;
    check_keep(n, keep)?;
    let (kept, traced) = split_index_maps(n, keep);
    let d = kept.len();
    Ok(CMatrix::from_fn(d, d, |i, j| {
        traced
            .iter()
            .map(|&t| m[(kept[i] | t, kept[j] | t)])
            .sum()
    }))
}

/// Reduced matrix of the pure state `psi` on the (sorted) qubits `keep`.
pub fn reduced_from_pure(psi: &CVector, keep: &[usize]) -> Result<CMatrix> {
    let n = qubit_count(psi.len())?;
    check_keep(n, keep)?;
    let (kept, traced) = split_index_maps(n, keep);
    let amps = CMatrix::from_fn(kept.len(), traced.len(), |i, t| psi[kept[i] | traced[t]]);
    Ok(&amps * amps.adjoint())
}

/// Eigenvalues of a hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_hermitian(d: usize, seed: u64) -> CMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = CMatrix::from_fn(d, d, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        (&a + a.adjoint()) * c(0.5, 0.0)
    }

    #[test]
    fn single_qubit_conjugation_matches_dense_kron() {
        let g: Gate1 = [[c(0.6, 0.0), c(0.0, 0.8)], [c(0.0, 0.8), c(0.6, 0.0)]];
        let m0 = random_hermitian(8, 3);
        for q in 0..3 {
            let mut factors = vec![CMatrix::identity(2, 2); 3];
            factors[q] = gate_matrix(&g);
            let full = kron_all(&factors);
            let expected = &full * &m0 * full.adjoint();
            let mut m = m0.clone();
            conjugate_1q(&mut m, 3, q, &g);
            assert!(max_abs_diff(&m, &expected) < 1e-12);
        }
    }

    #[test]
    fn two_qubit_conjugation_matches_dense_kron() {
        // CNOT on (1, 2) of a 3-qubit register
        let mut g: Gate2 = [[ZERO; 4]; 4];
        g[0][0] = ONE;
        g[1][1] = ONE;
        g[2][3] = ONE;
        g[3][2] = ONE;
        let g4 = CMatrix::from_fn(4, 4, |i, j| g[i][j]);
        let full = kron(&CMatrix::identity(2, 2), &g4);
        let m0 = random_hermitian(8, 5);
        let mut m = m0.clone();
        conjugate_2q(&mut m, 3, 1, 2, &g);
        assert!(max_abs_diff(&m, &(&full * &m0 * full.adjoint())) < 1e-12);
    }

    #[test]
    fn partial_trace_of_product_state() {
        // |0> (x) |1>
        let mut psi = CVector::zeros(4);
        psi[1] = ONE;
        let rho = outer(&psi);
        let r0 = partial_trace(&rho, &[0]).unwrap();
        assert!((r0[(0, 0)] - ONE).norm() < 1e-14);
        assert!(r0[(1, 1)].norm() < 1e-14);
        let r1 = reduced_from_pure(&psi, &[1]).unwrap();
        assert!((r1[(1, 1)] - ONE).norm() < 1e-14);
    }

    #[test]
    fn partial_trace_of_bell_pair_is_maximally_mixed() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = CVector::from_vec(vec![c(s, 0.0), ZERO, ZERO, c(s, 0.0)]);
        let r = partial_trace(&outer(&psi), &[0]).unwrap();
        let half = CMatrix::identity(2, 2) * c(0.5, 0.0);
        assert!(max_abs_diff(&r, &half) < 1e-14);
    }

    #[test]
    fn chained_partial_trace() {
        let a = random_hermitian(8, 11);
        let rho = &a * &a;
        let two = partial_trace(&rho, &[0, 1]).unwrap();
        let chained = partial_trace(&two, &[0]).unwrap();
        let direct = partial_trace(&rho, &[0]).unwrap();
        assert!(max_abs_diff(&chained, &direct) < 1e-12);
        assert!((trace(&two) - trace(&rho)).norm() < 1e-12);
    }

    #[test]
    fn partial_trace_rejects_bad_subsets() {
        let rho = CMatrix::identity(4, 4);
        assert!(matches!(partial_trace(&rho, &[]), Err(Error::Argument(_))));
        assert!(matches!(partial_trace(&rho, &[2]), Err(Error::Argument(_))));
        assert!(matches!(partial_trace(&rho, &[1, 0]), Err(Error::Argument(_))));
    }

    #[test]
    fn pure_reduction_matches_density_reduction() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let mut psi = CVector::from_fn(16, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        psi /= c(psi.norm(), 0.0);
        for keep in [vec![0], vec![1, 3], vec![0, 2, 3]] {
            let a = reduced_from_pure(&psi, &keep).unwrap();
            let b = partial_trace(&outer(&psi), &keep).unwrap();
            assert!(max_abs_diff(&a, &b) < 1e-13);
        }
    }
}
