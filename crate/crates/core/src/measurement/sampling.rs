use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{born_probabilities, Basis, Dataset, DatasetMeta, MeasurementRecord, MeasurementSetting, Outcomes};
use crate::qcore::DensityState;
use crate::{Error, Result};

/// RNG for record `r`: settings and shots use disjoint ChaCha streams, so a
/// record depends only on `(seed, r)` and shots can be redrawn for a fixed
/// setting sequence.
fn record_rng(seed: u64, r: usize, shots: bool) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * r as u64 + u64::from(shots));
    rng
}

fn draw_setting(n: usize, rng: &mut ChaCha8Rng) -> MeasurementSetting {
    MeasurementSetting::new((0..n).map(|_| Basis::from_index(rng.random_range(0..3))).collect())
}

/// Inverse-CDF sampling of `nm` outcomes.
fn draw_shots(probs: &[f64], nm: usize, rng: &mut ChaCha8Rng) -> Vec<u32> {
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for &p in probs {
        acc += p.max(0.0);
        cdf.push(acc);
    }
    let total = acc;
    (0..nm)
        .map(|_| {
            let u = rng.random::<f64>() * total;
            let i = cdf.partition_point(|&c| c <= u);
            i.min(probs.len() - 1) as u32
        })
        .collect()
}

/// Simulates record `r` (1-based) of a dataset with master `seed`.
pub fn sample_record(state: &DensityState, r: usize, nm: usize, seed: u64) -> Result<MeasurementRecord> {
    let mut rng = record_rng(seed, r, false);
    let setting = draw_setting(state.num_qubits(), &mut rng);
    shots_for(state, r, setting, nm, seed)
}

fn shots_for(
    state: &DensityState,
    r: usize,
    setting: MeasurementSetting,
    nm: usize,
    seed: u64,
) -> Result<MeasurementRecord> {
    let probs = born_probabilities(state, &setting)?;
    let mut rng = record_rng(seed, r, true);
    Ok(MeasurementRecord {
        r,
        setting,
        outcomes: Outcomes::Shots(draw_shots(&probs, nm, &mut rng)),
    })
}

fn check_budget(nu: usize, nm: usize) -> Result<()> {
    if nu == 0 || nm == 0 {
        return Err(Error::Argument(format!("N_U = {nu} and N_M = {nm} must be >= 1")));
    }
    Ok(())
}

/// `N_U` records with i.i.d. uniform settings and `N_M` Born-sampled shots
/// each. Output is identical for identical inputs regardless of threading.
pub fn sample_dataset(
    state: &DensityState,
    nu: usize,
    nm: usize,
    seed: u64,
    descriptor: &str,
) -> Result<Dataset> {
    check_budget(nu, nm)?;
    let records = (1..=nu)
        .into_par_iter()
        .map(|r| sample_record(state, r, nm, seed))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(
        DatasetMeta {
            n: state.num_qubits(),
            nu,
            nm: Some(nm),
            seed,
            state: descriptor.to_string(),
        },
        records,
    )
}

/// Like [`sample_dataset`] but with a prescribed setting sequence, as in a
/// companion experiment re-using the unitaries of another run.
pub fn sample_dataset_with_settings(
    state: &DensityState,
    settings: &[MeasurementSetting],
    nm: usize,
    seed: u64,
    descriptor: &str,
) -> Result<Dataset> {
    check_budget(settings.len(), nm)?;
    let records = settings
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            if s.len() != state.num_qubits() {
                return Err(Error::Dimension(format!(
                    "setting `{s}` does not match {} qubits",
                    state.num_qubits()
                )));
            }
            shots_for(state, i + 1, s.clone(), nm, seed)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(
        DatasetMeta {
            n: state.num_qubits(),
            nu: settings.len(),
            nm: Some(nm),
            seed,
            state: descriptor.to_string(),
        },
        records,
    )
}

/// Exact-mode dataset: each record carries the full Born distribution.
pub fn exact_dataset(state: &DensityState, settings: &[MeasurementSetting], descriptor: &str) -> Result<Dataset> {
    if settings.is_empty() {
        return Err(Error::Argument("exact dataset needs at least one setting".into()));
    }
    let records = settings
        .iter()
        .enumerate()
        .map(|(i, s)| {
            Ok(MeasurementRecord {
                r: i + 1,
                setting: s.clone(),
                outcomes: Outcomes::Exact(born_probabilities(state, s)?),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(
        DatasetMeta {
            n: state.num_qubits(),
            nu: settings.len(),
            nm: None,
            seed: 0,
            state: descriptor.to_string(),
        },
        records,
    )
}

/// Uniformly random settings, drawn from the same streams as
/// [`sample_dataset`] so the two agree for equal seeds.
pub fn random_settings(n: usize, nu: usize, seed: u64) -> Vec<MeasurementSetting> {
    (1..=nu).map(|r| draw_setting(n, &mut record_rng(seed, r, false))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::linalg::{CMatrix, C64};

    fn two_qubit_state() -> DensityState {
        let m = CMatrix::from_fn(4, 4, |i, j| {
            if i == j {
                C64::new([0.4, 0.3, 0.2, 0.1][i], 0.0)
            } else if i < j {
                C64::new(0.05, 0.02 * (i + j) as f64)
            } else {
                C64::new(0.05, -0.02 * (i + j) as f64)
            }
        });
        DensityState::from_matrix(m).unwrap()
    }

    #[test]
    fn zero_state_in_z_basis_gives_zero_shots() {
        let zero = DensityState::basis(3, 0).unwrap();
        let ds = sample_dataset(&zero, 200, 5, 1, "basis").unwrap();
        let mut hit = false;
        for rec in &ds.records {
            if rec.setting.bases().iter().all(|&b| b == Basis::Z) {
                hit = true;
                assert_eq!(rec.outcomes, Outcomes::Shots(vec![0; 5]));
            }
        }
        assert!(hit, "no all-Z setting drawn");
    }

    #[test]
    fn setting_frequencies_are_uniform() {
        let state = DensityState::maximally_mixed(2).unwrap();
        let nu = 10_000;
        let ds = sample_dataset(&state, nu, 1, 42, "mm").unwrap();
        let mut counts = std::collections::HashMap::new();
        for s in ds.settings() {
            *counts.entry(s.to_string()).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 9);
        let p = 1.0 / 9.0;
        let sd = (nu as f64 * p * (1.0 - p)).sqrt();
        for (s, c) in counts {
            assert!((c as f64 - nu as f64 * p).abs() < 5.0 * sd, "{s}: {c}");
        }
    }

    #[test]
    fn empirical_distribution_converges_to_born() {
        let state = two_qubit_state();
        let nm = 100_000;
        for (r, setting) in ["XY", "ZZ", "YX"].iter().enumerate() {
            let s: MeasurementSetting = setting.parse().unwrap();
            let rec = shots_for(&state, r + 1, s.clone(), nm, 7).unwrap();
            let emp = rec.marginal(&[0, 1]);
            let exact = born_probabilities(&state, &s).unwrap();
            let tv: f64 = 0.5 * emp.iter().zip(&exact).map(|(a, b)| (a - b).abs()).sum::<f64>();
            assert!(tv < 0.02, "{setting}: tv = {tv}");
        }
    }

    #[test]
    fn records_depend_only_on_seed_and_index() {
        let state = two_qubit_state();
        let ds = sample_dataset(&state, 12, 20, 99, "x").unwrap();
        for r in [7, 3, 12, 1, 9] {
            assert_eq!(sample_record(&state, r, 20, 99).unwrap(), ds.records[r - 1]);
        }
        let again = sample_dataset(&state, 12, 20, 99, "x").unwrap();
        assert_eq!(ds, again);
        let settings: Vec<_> = ds.settings().cloned().collect();
        assert_eq!(random_settings(2, 12, 99), settings);
    }

    #[test]
    fn zero_budget_is_rejected() {
        let state = two_qubit_state();
        assert!(matches!(sample_dataset(&state, 0, 1, 0, ""), Err(Error::Argument(_))));
        assert!(matches!(sample_dataset(&state, 1, 0, 0, ""), Err(Error::Argument(_))));
    }
}
