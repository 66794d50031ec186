use std::fmt;
use std::str::FromStr;

use super::linalg::{qubit_count, qubit_mask, CMatrix, CVector, C64, ONE, ZERO};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn matrix(self) -> CMatrix {
        let i = C64::new(0.0, 1.0);
        let m = match self {
            Pauli::I => [[ONE, ZERO], [ZERO, ONE]],
            Pauli::X => [[ZERO, ONE], [ONE, ZERO]],
            Pauli::Y => [[ZERO, -i], [i, ZERO]],
            Pauli::Z => [[ONE, ZERO], [ZERO, -ONE]],
        };
        CMatrix::from_fn(2, 2, |r, c| m[r][c])
    }

    fn from_char(c: char) -> Option<Self> {
        match c {
            'I' | '1' | '_' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// Tensor product of single-qubit Paulis, one letter per qubit.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PauliString {
    letters: Vec<Pauli>,
}

impl PauliString {
    pub fn new(letters: Vec<Pauli>) -> Self {
        Self { letters }
    }

    pub fn identity(n: usize) -> Self {
        Self::new(vec![Pauli::I; n])
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn letters(&self) -> &[Pauli] {
        &self.letters
    }

    /// Qubits carrying a non-identity letter, ascending.
    pub fn support(&self) -> Vec<usize> {
        self.letters
            .iter()
            .enumerate()
            .filter(|(_, &p)| p != Pauli::I)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn weight(&self) -> usize {
        self.letters.iter().filter(|&&p| p != Pauli::I).count()
    }

    /// Letters on the given qubits, in order.
    pub fn restrict(&self, qubits: &[usize]) -> PauliString {
        PauliString::new(qubits.iter().map(|&q| self.letters[q]).collect())
    }

    pub fn matrix(&self) -> CMatrix {
        let mut acc = CMatrix::from_element(1, 1, ONE);
        for p in &self.letters {
            acc = acc.kronecker(&p.matrix());
        }
        acc
    }

    /// `gamma |k> = phase * |k'>`.
    #[inline]
    pub fn act(&self, k: usize) -> (usize, C64) {
        let n = self.letters.len();
        let mut out = k;
        let mut phase = ONE;
        for (q, p) in self.letters.iter().enumerate() {
            let mask = qubit_mask(n, q);
            let bit = k & mask != 0;
            match p {
                Pauli::I => {}
                Pauli::X => out ^= mask,
                Pauli::Y => {
                    out ^= mask;
                    phase *= if bit { C64::new(0.0, -1.0) } else { C64::new(0.0, 1.0) };
                }
                Pauli::Z => {
                    if bit {
                        phase = -phase;
                    }
                }
            }
        }
        (out, phase)
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        let n = qubit_count(dim)?;
        if n != self.len() {
            return Err(Error::Dimension(format!(
                "Pauli string of length {} on {n}-qubit operator",
                self.len()
            )));
        }
        Ok(())
    }

    /// `Tr(m gamma)` for a matrix on the same register.
    pub fn trace_with(&self, m: &CMatrix) -> Result<C64> {
        self.check_dim(m.nrows())?;
        let mut acc = ZERO;
        for k in 0..m.nrows() {
            let (kp, phase) = self.act(k);
            acc += phase * m[(k, kp)];
        }
        Ok(acc)
    }

    /// `<psi| gamma |psi>`.
    pub fn expectation_pure(&self, psi: &CVector) -> Result<C64> {
        self.check_dim(psi.len())?;
        let mut acc = ZERO;
        for k in 0..psi.len() {
            let (kp, phase) = self.act(k);
            acc += psi[kp].conj() * phase * psi[k];
        }
        Ok(acc)
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| {
                Pauli::from_char(c.to_ascii_uppercase())
                    .ok_or_else(|| Error::Parse(format!("invalid Pauli letter `{c}` in `{s}`")))
            })
            .collect::<Result<Vec<_>>>()
            .map(PauliString::new)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.letters {
            write!(f, "{}", p.as_char())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::linalg::trace;

    #[test]
    fn support_and_identity() {
        let g: PauliString = "IXIZ".parse().unwrap();
        assert_eq!(g.support(), vec![1, 3]);
        assert_eq!(g.weight(), 2);
        let id = PauliString::identity(3);
        assert!(id.support().is_empty());
        assert_eq!(id.to_string(), "III");
    }

    #[test]
    fn trace_with_matches_dense_product() {
        let m = CMatrix::from_fn(8, 8, |i, j| C64::new((i * 3 + j) as f64 * 0.1, (i as f64) - (j as f64)));
        for s in ["XYZ", "IYI", "ZZX", "YIY", "III"] {
            let g: PauliString = s.parse().unwrap();
            let dense = trace(&(&m * g.matrix()));
            assert!((g.trace_with(&m).unwrap() - dense).norm() < 1e-12, "{s}");
        }
    }

    #[test]
    fn bad_letter_is_parse_error() {
        assert!(matches!("XQ".parse::<PauliString>(), Err(Error::Parse(_))));
    }
}
