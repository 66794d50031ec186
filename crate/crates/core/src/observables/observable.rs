use crate::qcore::linalg::{hermiticity_defect, CMatrix, CVector, C64, ONE, ZERO};
use crate::qcore::state::HERMITIAN_TOL;
use crate::qcore::PauliString;
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub enum Representation {
    /// Single-copy Pauli string, stored on the full register.
    Pauli(PauliString),
    /// Cyclic shift `tau^(n)` on `n` copies of the support.
    Shift,
    /// Single-copy projector `|psi><psi|` on the support.
    Projector(CVector),
    /// Explicit operator on `n` copies of the support, copy 1 most significant.
    Dense(CMatrix),
}

/// An `n`-copy operator `O` with expectation `Tr(O rho^{(x) n})`.
#[derive(Clone, Debug)]
pub struct MultiCopyObservable {
    copies: usize,
    support: Vec<usize>,
    repr: Representation,
}

impl MultiCopyObservable {
    pub fn pauli(gamma: PauliString) -> Self {
        Self {
            copies: 1,
            support: gamma.support(),
            repr: Representation::Pauli(gamma),
        }
    }

    pub fn shift(copies: usize, support: Vec<usize>) -> Result<Self> {
        if copies < 2 {
            return Err(Error::Argument("cyclic shift needs at least 2 copies".into()));
        }
        Ok(Self {
            copies,
            support,
            repr: Representation::Shift,
        })
    }

    pub fn projector(psi: CVector, support: Vec<usize>) -> Result<Self> {
        if psi.len() != 1 << support.len() {
            return Err(Error::Dimension(format!(
                "projector vector of length {} on {} qubits",
                psi.len(),
                support.len()
            )));
        }
        let norm2 = psi.norm_squared();
        if (norm2 - 1.0).abs() > 1e-10 {
            return Err(Error::Validation(format!("projector vector has norm^2 {norm2}")));
        }
        Ok(Self {
            copies: 1,
            support,
            repr: Representation::Projector(psi),
        })
    }

    pub fn dense(copies: usize, support: Vec<usize>, matrix: CMatrix) -> Result<Self> {
        if copies == 0 {
            return Err(Error::Argument("observable needs at least one copy".into()));
        }
        let expected = 1usize << (copies * support.len());
        if matrix.nrows() != expected || matrix.ncols() != expected {
            return Err(Error::Dimension(format!(
                "dense {copies}-copy observable on {} qubits must be {expected}x{expected}",
                support.len()
            )));
        }
        let defect = hermiticity_defect(&matrix);
        if defect > HERMITIAN_TOL {
            return Err(Error::Validation(format!("observable not hermitian (defect {defect:e})")));
        }
        Ok(Self {
            copies,
            support,
            repr: Representation::Dense(matrix),
        })
    }

    pub fn copies(&self) -> usize {
        self.copies
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn representation(&self) -> &Representation {
        &self.repr
    }

    /// Dense operator on the support (all copies). Only for small cases.
    pub fn to_dense(&self) -> Result<CMatrix> {
        let na = self.support.len();
        match &self.repr {
            Representation::Pauli(g) => Ok(g.restrict(&self.support).matrix()),
            Representation::Shift => Ok(shift_operator(self.copies, na)),
            Representation::Projector(psi) => Ok(psi * psi.adjoint()),
            Representation::Dense(m) => Ok(m.clone()),
        }
    }
}

/// Dense `tau^(n)` on `n` copies of `na` qubits:
/// `tau |s_1>|s_2>...|s_n> = |s_n>|s_1>...|s_{n-1}>`.
pub fn shift_operator(copies: usize, na: usize) -> CMatrix {
    let d = 1usize << na;
    let total = d.pow(copies as u32);
    let mut tau = CMatrix::from_element(total, total, ZERO);
    for col in 0..total {
        // digits of the input, copy 1 most significant
        let mut digits = vec![0usize; copies];
        let mut rest = col;
        for k in (0..copies).rev() {
            digits[k] = rest % d;
            rest /= d;
        }
        let row = (0..copies).fold(0usize, |acc, k| acc * d + digits[(k + copies - 1) % copies]);
        tau[(row, col)] = ONE;
    }
    tau
}

/// `Tr[tau^(n) (A_1 (x) ... (x) A_n)]`, which equals `Tr(A_n ... A_1)`.
pub fn cyclic_trace(mats: &[&CMatrix]) -> C64 {
    match mats.len() {
        0 => ONE,
        1 => crate::qcore::linalg::trace(mats[0]),
        2 => crate::qcore::linalg::trace_of_product(mats[1], mats[0]),
        k => {
            let mut acc = mats[k - 1] * mats[k - 2];
            for m in mats[1..k - 2].iter().rev() {
                acc = &acc * *m;
            }
            crate::qcore::linalg::trace_of_product(&acc, mats[0])
        }
    }
}
