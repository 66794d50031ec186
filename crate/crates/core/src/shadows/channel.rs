use crate::measurement::MeasurementSetting;
use crate::qcore::linalg::{conjugate_1q, qubit_count, qubit_mask, CMatrix, Gate1, C64};
use crate::Result;

/// Applies `O -> 3 O - Tr(O) 1` independently on every qubit index.
pub fn inverse_channel_apply(m: &CMatrix) -> Result<CMatrix> {
    let n = qubit_count(m.nrows())?;
    let mut out = m.clone();
    let d = out.nrows();
    let three = C64::new(3.0, 0.0);
    for q in 0..n {
        let mask = qubit_mask(n, q);
        for j in (0..d).filter(|j| j & mask == 0) {
            for i in (0..d).filter(|i| i & mask == 0) {
                let b00 = out[(i, j)];
                let b11 = out[(i | mask, j | mask)];
                let tr = b00 + b11;
                out[(i, j)] = three * b00 - tr;
                out[(i | mask, j | mask)] = three * b11 - tr;
                out[(i, j | mask)] *= three;
                out[(i | mask, j)] *= three;
            }
        }
    }
    Ok(out)
}

/// Inverse channel restricted to diagonal matrices: per qubit
/// `(p0, p1) -> (2 p0 - p1, 2 p1 - p0)`.
pub fn inverse_channel_diagonal(w: &mut [f64]) {
    let n = w.len().trailing_zeros() as usize;
    for q in 0..n {
        let mask = qubit_mask(n, q);
        for i0 in (0..w.len()).filter(|i| i & mask == 0) {
            let (a, b) = (w[i0], w[i0 | mask]);
            w[i0] = 2.0 * a - b;
            w[i0 | mask] = 2.0 * b - a;
        }
    }
}

fn adjoint(g: &Gate1) -> Gate1 {
    [[g[0][0].conj(), g[1][0].conj()], [g[0][1].conj(), g[1][1].conj()]]
}

/// `U^dagger diag(w) U` for the product rotation of `setting`.
pub fn unrotate_diagonal(w: &[f64], setting: &MeasurementSetting) -> CMatrix {
    let n = setting.len();
    let mut m = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        w.len(),
        w.iter().map(|&x| C64::new(x, 0.0)),
    ));
    for (q, basis) in setting.bases().iter().enumerate() {
        if let Some(g) = basis.rotation() {
            conjugate_1q(&mut m, n, q, &adjoint(&g));
        }
    }
    m
}
