//! Born-rule probabilities, randomized-measurement datasets and their
//! JSON Lines persistence.

mod jsonl;
mod sampling;
mod setting;

pub use jsonl::{load_dataset, read_dataset, save_dataset, write_dataset};
pub use sampling::{exact_dataset, random_settings, sample_dataset, sample_dataset_with_settings, sample_record};
pub use setting::{Basis, Bitstring, MeasurementSetting};

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

use crate::qcore::linalg::{qubit_count, qubit_mask, CMatrix};
use crate::qcore::state::NEGATIVITY_TOL;
use crate::qcore::{rotate_matrix, rotate_vector, DensityState, PseudoState, StateData};
use crate::{Error, Result};

/// Measurement outcomes for one setting: sampled shots, or the exact
/// probability vector (the infinite-shot limit).
#[derive(Clone, Debug, PartialEq)]
pub enum Outcomes {
    /// Basis-state indices of the individual shots.
    Shots(Vec<u32>),
    /// Full probability vector of length `2^N`.
    Exact(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementRecord {
    /// 1-based record index.
    pub r: usize,
    pub setting: MeasurementSetting,
    pub outcomes: Outcomes,
}

impl MeasurementRecord {
    pub fn num_qubits(&self) -> usize {
        self.setting.len()
    }

    /// Shots per setting, `None` in exact mode.
    pub fn shots_per_setting(&self) -> Option<usize> {
        match &self.outcomes {
            Outcomes::Shots(s) => Some(s.len()),
            Outcomes::Exact(_) => None,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.outcomes, Outcomes::Exact(_))
    }

    /// Outcome distribution on the sorted qubits `support` (empirical or exact).
    pub fn marginal(&self, support: &[usize]) -> Vec<f64> {
        let n = self.num_qubits();
        let k = support.len();
        let local = |full: usize| -> usize {
            support.iter().enumerate().fold(0usize, |acc, (pos, &q)| {
                if full & qubit_mask(n, q) != 0 {
                    acc | (1 << (k - 1 - pos))
                } else {
                    acc
                }
            })
        };
        let mut out = vec![0.0; 1 << k];
        match &self.outcomes {
            Outcomes::Shots(shots) => {
                let w = 1.0 / shots.len() as f64;
                for &s in shots {
                    out[local(s as usize)] += w;
                }
            }
            Outcomes::Exact(p) => {
                for (full, &pr) in p.iter().enumerate() {
                    out[local(full)] += pr;
                }
            }
        }
        out
    }

    /// Sparse outcome frequencies. In exact mode zero-probability outcomes
    /// are omitted.
    pub fn empirical_distribution(&self) -> BTreeMap<Bitstring, f64> {
        let n = self.num_qubits();
        let mut map = BTreeMap::new();
        match &self.outcomes {
            Outcomes::Shots(shots) => {
                let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
                for &s in shots {
                    *counts.entry(s).or_default() += 1;
                }
                let total = shots.len() as f64;
                for (s, c) in counts {
                    map.insert(Bitstring::new(s, n), c as f64 / total);
                }
            }
            Outcomes::Exact(p) => {
                for (i, &pr) in p.iter().enumerate() {
                    if pr != 0.0 {
                        map.insert(Bitstring::new(i as u32, n), pr);
                    }
                }
            }
        }
        map
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetMeta {
    pub n: usize,
    pub nu: usize,
    /// Shots per setting; `None` for exact-probability datasets.
    pub nm: Option<usize>,
    pub seed: u64,
    pub state: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub records: Vec<MeasurementRecord>,
}

impl Dataset {
    /// Builds a dataset and checks that every record agrees with the metadata.
    pub fn new(meta: DatasetMeta, records: Vec<MeasurementRecord>) -> Result<Self> {
        if records.len() != meta.nu {
            return Err(Error::Validation(format!(
                "{} records but N_U = {}",
                records.len(),
                meta.nu
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for rec in &records {
            if rec.num_qubits() != meta.n {
                return Err(Error::Validation(format!(
                    "record {} has {} qubits, expected {}",
                    rec.r,
                    rec.num_qubits(),
                    meta.n
                )));
            }
            if rec.shots_per_setting() != meta.nm {
                return Err(Error::Validation(format!(
                    "record {} has {:?} shots, expected {:?}",
                    rec.r,
                    rec.shots_per_setting(),
                    meta.nm
                )));
            }
            if meta.nm == Some(0) {
                return Err(Error::Validation("N_M must be >= 1".into()));
            }
            if let Outcomes::Shots(shots) = &rec.outcomes {
                if let Some(&bad) = shots.iter().find(|&&s| (s as usize) >> meta.n != 0) {
                    return Err(Error::Validation(format!(
                        "record {} has outcome {bad} outside {} qubits",
                        rec.r, meta.n
                    )));
                }
            }
            if !seen.insert(rec.r) {
                return Err(Error::Validation(format!("duplicate record index {}", rec.r)));
            }
        }
        Ok(Self { meta, records })
    }

    pub fn num_qubits(&self) -> usize {
        self.meta.n
    }

    pub fn settings(&self) -> impl Iterator<Item = &MeasurementSetting> {
        self.records.iter().map(|r| &r.setting)
    }

    /// Content hash of the ordered setting sequence.
    pub fn settings_hash(&self) -> String {
        settings_hash(self.settings())
    }
}

pub fn settings_hash<'a>(settings: impl Iterator<Item = &'a MeasurementSetting>) -> String {
    let mut h = Sha256::new();
    for s in settings {
        h.update(s.to_string().as_bytes());
        h.update(b"\n");
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Diagonal of `U m U^dagger`; no sign check.
pub fn rotated_diagonal(m: &CMatrix, setting: &MeasurementSetting) -> Result<Vec<f64>> {
    Ok(rotate_matrix(m, setting)?.diagonal().iter().map(|z| z.re).collect())
}

/// Outcome probabilities of a physical state measured in `setting`.
pub fn born_probabilities(state: &DensityState, setting: &MeasurementSetting) -> Result<Vec<f64>> {
    let probs: Vec<f64> = match state.data() {
        StateData::Pure(psi) => rotate_vector(psi, setting)?.iter().map(|a| a.norm_sqr()).collect(),
        StateData::Mixed(m) => rotated_diagonal(m, setting)?,
    };
    if let Some((i, &p)) = probs.iter().enumerate().find(|(_, &p)| p < -NEGATIVITY_TOL) {
        return Err(Error::Validation(format!(
            "negative Born probability {p:e} at outcome {i}"
        )));
    }
    Ok(probs)
}

/// Quasi-probabilities `<s|U sigma U^dagger|s>` of a pseudo-state; entries
/// may be negative and sum to `Tr(sigma)`.
pub fn pseudo_probabilities(sigma: &PseudoState, setting: &MeasurementSetting) -> Result<Vec<f64>> {
    let _ = qubit_count(sigma.matrix().nrows())?;
    rotated_diagonal(sigma.matrix(), setting)
}
