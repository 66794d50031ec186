use std::fmt;
use std::str::FromStr;

use crate::qcore::linalg::{Gate1, C64, ONE, ZERO};
use crate::{Error, Result};

/// Local measurement basis. The associated rotation `U` satisfies
/// `U^dagger Z U = Z, X, Y` respectively.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Basis {
    Z,
    X,
    Y,
}

impl Basis {
    pub const ALL: [Basis; 3] = [Basis::Z, Basis::X, Basis::Y];

    /// Rotation applied before the computational-basis readout; `None` for Z.
    pub fn rotation(self) -> Option<Gate1> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let h = C64::new(s, 0.0);
        match self {
            Basis::Z => None,
            Basis::X => Some([[h, h], [h, -h]]),
            Basis::Y => Some([[h, C64::new(0.0, -s)], [h, C64::new(0.0, s)]]),
        }
    }

    pub fn rotation_or_identity(self) -> Gate1 {
        self.rotation().unwrap_or([[ONE, ZERO], [ZERO, ONE]])
    }

    pub fn as_char(self) -> char {
        match self {
            Basis::Z => 'Z',
            Basis::X => 'X',
            Basis::Y => 'Y',
        }
    }

    pub fn from_index(i: usize) -> Basis {
        Self::ALL[i % 3]
    }
}

/// One basis label per qubit.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MeasurementSetting {
    bases: Vec<Basis>,
}

impl MeasurementSetting {
    pub fn new(bases: Vec<Basis>) -> Self {
        Self { bases }
    }

    pub fn uniform(n: usize, basis: Basis) -> Self {
        Self::new(vec![basis; n])
    }

    pub fn bases(&self) -> &[Basis] {
        &self.bases
    }

    pub fn len(&self) -> usize {
        self.bases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }

    pub fn restrict(&self, qubits: &[usize]) -> MeasurementSetting {
        MeasurementSetting::new(qubits.iter().map(|&q| self.bases[q]).collect())
    }

    /// Setting number `index` in base-3 order over `n` qubits.
    pub fn from_index(mut index: usize, n: usize) -> Self {
        let mut bases = vec![Basis::Z; n];
        for slot in bases.iter_mut().rev() {
            *slot = Basis::from_index(index % 3);
            index /= 3;
        }
        Self::new(bases)
    }

    /// All `3^n` settings.
    pub fn all(n: usize) -> impl Iterator<Item = MeasurementSetting> {
        (0..3usize.pow(n as u32)).map(move |i| Self::from_index(i, n))
    }
}

impl FromStr for MeasurementSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c.to_ascii_uppercase() {
                'Z' => Ok(Basis::Z),
                'X' => Ok(Basis::X),
                'Y' => Ok(Basis::Y),
                _ => Err(Error::Parse(format!("invalid basis `{c}` in setting `{s}`"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }
}

impl fmt::Display for MeasurementSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.bases {
            write!(f, "{}", b.as_char())?;
        }
        Ok(())
    }
}

/// A computational-basis outcome; position `i` of the string is qubit `i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bitstring {
    index: u32,
    len: u8,
}

impl Bitstring {
    pub fn new(index: u32, len: usize) -> Self {
        debug_assert!(len <= 32);
        Self {
            index,
            len: len as u8,
        }
    }

    pub fn index(self) -> u32 {
        self.index
    }

    pub fn len(self) -> usize {
        self.len as usize
    }

    pub fn is_empty(self) -> bool {
        self.len == 0
    }

    pub fn bit(self, qubit: usize) -> u8 {
        ((self.index >> (self.len as usize - 1 - qubit)) & 1) as u8
    }
}

impl FromStr for Bitstring {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.len() > 32 {
            return Err(Error::Parse(format!("bitstring `{s}` too long")));
        }
        let mut index = 0u32;
        for c in s.chars() {
            index = (index << 1)
                | match c {
                    '0' => 0,
                    '1' => 1,
                    _ => return Err(Error::Parse(format!("invalid bit `{c}` in `{s}`"))),
                };
        }
        Ok(Bitstring::new(index, s.len()))
    }
}

impl fmt::Display for Bitstring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.len() {
            write!(f, "{}", self.bit(q))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotations_map_z_to_the_labelled_pauli() {
        use crate::qcore::linalg::{gate_matrix, max_abs_diff};
        use crate::qcore::Pauli;
        for (basis, target) in [(Basis::X, Pauli::X), (Basis::Y, Pauli::Y), (Basis::Z, Pauli::Z)] {
            let u = gate_matrix(&basis.rotation_or_identity());
            let mapped = u.adjoint() * Pauli::Z.matrix() * &u;
            assert!(max_abs_diff(&mapped, &target.matrix()) < 1e-15, "{basis:?}");
        }
    }

    #[test]
    fn enumeration_covers_every_setting_once() {
        let all: Vec<_> = MeasurementSetting::all(2).collect();
        assert_eq!(all.len(), 9);
        let unique: std::collections::HashSet<_> = all.iter().cloned().collect();
        assert_eq!(unique.len(), 9);
        assert_eq!(all[0].to_string(), "ZZ");
    }

    #[test]
    fn bitstring_round_trip_and_bits() {
        let b: Bitstring = "0110".parse().unwrap();
        assert_eq!(b.index(), 6);
        assert_eq!(b.bit(0), 0);
        assert_eq!(b.bit(1), 1);
        assert_eq!(b.to_string(), "0110");
        assert!("012".parse::<Bitstring>().is_err());
    }
}
