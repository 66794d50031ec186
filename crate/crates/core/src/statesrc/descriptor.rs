use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::qcore::linalg::{CMatrix, C64, MAX_STATE_QUBITS};
use crate::qcore::DensityState;
use crate::{Error, Result};

use super::circuit::CircuitSpec;
use super::ising::{ising_ground_state, IsingSpec};

/// A reproducible recipe for a test state.
///
/// ```text
/// ising:N=16
/// ising:N=12:eps=0.02:seed=7
/// circuit:N=8:d=4:p=0.001:seed=3
/// file:/path/to/state.bin
/// ```
#[derive(Clone, Debug, PartialEq)]
pub enum StateDescriptor {
    /// Critical chain, optionally with random longitudinal fields in `[0, eps]`.
    Ising { n: usize, perturbation: Option<(f64, u64)> },
    Circuit(CircuitSpec),
    File(PathBuf),
}

fn parse_fields<'a>(kind: &str, parts: impl Iterator<Item = &'a str>) -> Result<Vec<(&'a str, &'a str)>> {
    parts
        .map(|p| {
            p.split_once('=')
                .ok_or_else(|| Error::Parse(format!("{kind} descriptor field `{p}` is not key=value")))
        })
        .collect()
}

fn field<T: FromStr>(fields: &[(&str, &str)], kind: &str, key: &str) -> Result<Option<T>> {
    match fields.iter().find(|(k, _)| *k == key) {
        None => Ok(None),
        Some((_, v)) => v
            .parse()
            .map(Some)
            .map_err(|_| Error::Parse(format!("{kind} descriptor: cannot parse {key}=`{v}`"))),
    }
}

fn required<T: FromStr>(fields: &[(&str, &str)], kind: &str, key: &str) -> Result<T> {
    field(fields, kind, key)?.ok_or_else(|| Error::Parse(format!("{kind} descriptor is missing `{key}`")))
}

fn reject_unknown(fields: &[(&str, &str)], kind: &str, known: &[&str]) -> Result<()> {
    match fields.iter().find(|(k, _)| !known.contains(k)) {
        Some((k, _)) => Err(Error::Parse(format!("{kind} descriptor has unknown field `{k}`"))),
        None => Ok(()),
    }
}

impl FromStr for StateDescriptor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("state descriptor `{s}` has no kind prefix")))?;
        match kind {
            "file" if !rest.is_empty() => Ok(Self::File(PathBuf::from(rest))),
            "ising" => {
                let f = parse_fields(kind, rest.split(':'))?;
                reject_unknown(&f, kind, &["N", "eps", "seed"])?;
                let n = required(&f, kind, "N")?;
                let eps: Option<f64> = field(&f, kind, "eps")?;
                let seed: Option<u64> = field(&f, kind, "seed")?;
                let perturbation = match (eps, seed) {
                    (None, None) => None,
                    (Some(e), Some(s)) => Some((e, s)),
                    _ => return Err(Error::Parse("ising descriptor needs both `eps` and `seed` or neither".into())),
                };
                Ok(Self::Ising { n, perturbation })
            }
            "circuit" => {
                let f = parse_fields(kind, rest.split(':'))?;
                reject_unknown(&f, kind, &["N", "d", "p", "seed"])?;
                Ok(Self::Circuit(CircuitSpec {
                    n: required(&f, kind, "N")?,
                    depth: required(&f, kind, "d")?,
                    p: required(&f, kind, "p")?,
                    seed: required(&f, kind, "seed")?,
                }))
            }
            _ => Err(Error::Parse(format!("unknown state descriptor `{s}`"))),
        }
    }
}

impl fmt::Display for StateDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Ising { n, perturbation: None } => write!(f, "ising:N={n}"),
            Self::Ising { n, perturbation: Some((eps, seed)) } => write!(f, "ising:N={n}:eps={eps}:seed={seed}"),
            Self::Circuit(c) => write!(f, "circuit:N={}:d={}:p={}:seed={}", c.n, c.depth, c.p, c.seed),
            Self::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl StateDescriptor {
    pub fn num_qubits(&self) -> Option<usize> {
        match self {
            Self::Ising { n, .. } => Some(*n),
            Self::Circuit(c) => Some(c.n),
            Self::File(_) => None,
        }
    }

    pub fn ising_spec(&self) -> Option<Result<IsingSpec>> {
        match self {
            Self::Ising { n, perturbation: None } => Some(Ok(IsingSpec::critical(*n))),
            Self::Ising { n, perturbation: Some((eps, seed)) } => Some(IsingSpec::perturbed(*n, *eps, *seed)),
            _ => None,
        }
    }

    pub fn build(&self) -> Result<DensityState> {
        match self {
            Self::Ising { .. } => {
                let spec = self.ising_spec().expect("ising descriptor")?;
                DensityState::from_statevector(ising_ground_state(&spec)?)
            }
            Self::Circuit(c) => c.state(),
            Self::File(p) => read_state_file(p),
        }
    }
}

/// Writes a dense matrix as a little-endian `u64` dimension followed by
/// `dim * dim` entries in row-major order, each as `re, im` `f64` pairs.
pub fn write_state_file(path: &Path, m: &CMatrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension("state matrix must be square".into()));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&(m.nrows() as u64).to_le_bytes())?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            w.write_all(&m[(i, j)].re.to_le_bytes())?;
            w.write_all(&m[(i, j)].im.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads the layout of [`write_state_file`] without physical validation,
/// e.g. for pseudo-state priors.
pub fn read_matrix_file(path: &Path) -> Result<CMatrix> {
    let mut r = BufReader::new(File::open(path)?);
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let dim = u64::from_le_bytes(word);
    if dim == 0 || dim > 1 << MAX_STATE_QUBITS {
        return Err(Error::Resource(format!("state file dimension {dim} outside 1..=2^{MAX_STATE_QUBITS}")));
    }
    let dim = dim as usize;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != dim * dim * 16 {
        return Err(Error::Parse(format!(
            "state file holds {} payload bytes, expected {} for dimension {dim}",
            bytes.len(),
            dim * dim * 16
        )));
    }
    let value = |k: usize| f64::from_le_bytes(bytes[8 * k..8 * k + 8].try_into().unwrap());
    Ok(CMatrix::from_fn(dim, dim, |i, j| {
        let k = 2 * (i * dim + j);
        C64::new(value(k), value(k + 1))
    }))
}

/// Reads the layout of [`write_state_file`] and validates the state.
pub fn read_state_file(path: &Path) -> Result<DensityState> {
    DensityState::from_matrix(read_matrix_file(path)?)
}
