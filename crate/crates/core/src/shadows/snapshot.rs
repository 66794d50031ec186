use super::channel::{inverse_channel_diagonal, unrotate_diagonal};
use crate::measurement::{pseudo_probabilities, MeasurementRecord, MeasurementSetting};
use crate::qcore::linalg::{CMatrix, MAX_REDUCED_QUBITS};
use crate::qcore::PseudoState;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SnapshotKind {
    /// `rho_hat^(r)` from measured frequencies.
    Standard,
    /// `sigma^(r)` from exact prior probabilities.
    Prior,
    /// `rho_hat^(r) - sigma^(r) + sigma`.
    Crm,
    /// Combination of experimental and companion-experiment shadows.
    Companion,
}

/// A single-setting shadow on a declared support.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub support: Vec<usize>,
    pub matrix: CMatrix,
    pub kind: SnapshotKind,
    /// Setting of the record (full register) the snapshot was built from.
    pub setting: MeasurementSetting,
}

/// A shadow kept in the rotated frame: the snapshot equals
/// `U_A^dagger diag(weights) U_A + offset`, where `offset` is `sigma_A` for
/// CRM shadows and zero otherwise.
#[derive(Clone, Debug)]
pub struct RotatedShadow {
    pub setting: MeasurementSetting,
    pub weights: Vec<f64>,
}

impl RotatedShadow {
    pub fn to_matrix(&self) -> CMatrix {
        unrotate_diagonal(&self.weights, &self.setting)
    }
}

pub(crate) fn check_support(n: usize, support: &[usize]) -> Result<()> {
    if support.is_empty() {
        return Err(Error::Argument("empty support".into()));
    }
    if support.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Argument("support must be strictly increasing".into()));
    }
    if let Some(&q) = support.iter().find(|&&q| q >= n) {
        return Err(Error::Argument(format!("qubit {q} outside {n}-qubit register")));
    }
    if support.len() > MAX_REDUCED_QUBITS {
        return Err(Error::Resource(format!(
            "support of {} qubits exceeds the {MAX_REDUCED_QUBITS}-qubit cap",
            support.len()
        )));
    }
    Ok(())
}

/// Inverse-channel weights of the measured distribution on `support`.
pub fn rho_weights(record: &MeasurementRecord, support: &[usize]) -> Result<RotatedShadow> {
    check_support(record.num_qubits(), support)?;
    let mut w = record.marginal(support);
    inverse_channel_diagonal(&mut w);
    Ok(RotatedShadow {
        setting: record.setting.restrict(support),
        weights: w,
    })
}

/// Inverse-channel weights of the exact quasi-probabilities of `sigma`,
/// for a setting already restricted to the prior's support.
pub fn sigma_weights(sigma: &PseudoState, local_setting: &MeasurementSetting) -> Result<RotatedShadow> {
    if local_setting.len() != sigma.num_qubits() {
        return Err(Error::Argument(format!(
            "setting of length {} for a prior on {} qubits",
            local_setting.len(),
            sigma.num_qubits()
        )));
    }
    let mut w = pseudo_probabilities(sigma, local_setting)?;
    inverse_channel_diagonal(&mut w);
    Ok(RotatedShadow {
        setting: local_setting.clone(),
        weights: w,
    })
}

/// Weights of `rho_hat^(r) - sigma^(r)` on the prior's support.
pub fn crm_weights(record: &MeasurementRecord, sigma: &PseudoState) -> Result<RotatedShadow> {
    let support = sigma.support();
    check_support(record.num_qubits(), support)?;
    let mut diff = record.marginal(support);
    let local = record.setting.restrict(support);
    let prior = pseudo_probabilities(sigma, &local)?;
    for (d, p) in diff.iter_mut().zip(prior) {
        *d -= p;
    }
    inverse_channel_diagonal(&mut diff);
    Ok(RotatedShadow {
        setting: local,
        weights: diff,
    })
}

/// Standard shadow `rho_hat_A^(r)`.
pub fn build_rho_snapshot(record: &MeasurementRecord, support: &[usize]) -> Result<Snapshot> {
    let rot = rho_weights(record, support)?;
    Ok(Snapshot {
        support: support.to_vec(),
        matrix: rot.to_matrix(),
        kind: SnapshotKind::Standard,
        setting: record.setting.clone(),
    })
}

/// Prior shadow `sigma^(r)` for a setting already restricted to the prior's support.
pub fn build_sigma_snapshot(sigma: &PseudoState, local_setting: &MeasurementSetting) -> Result<Snapshot> {
    let rot = sigma_weights(sigma, local_setting)?;
    Ok(Snapshot {
        support: sigma.support().to_vec(),
        matrix: rot.to_matrix(),
        kind: SnapshotKind::Prior,
        setting: local_setting.clone(),
    })
}

/// CRM shadow `rho_hat^(r) - sigma^(r) + sigma` on the prior's support,
/// with both shadow terms built from the record's own setting.
pub fn build_crm_snapshot(record: &MeasurementRecord, sigma: &PseudoState) -> Result<Snapshot> {
    let rot = crm_weights(record, sigma)?;
    Ok(Snapshot {
        support: sigma.support().to_vec(),
        matrix: rot.to_matrix() + sigma.matrix(),
        kind: SnapshotKind::Crm,
        setting: record.setting.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{born_probabilities, MeasurementSetting, Outcomes};
    use crate::qcore::linalg::{hermiticity_defect, max_abs_diff, trace, C64};
    use crate::qcore::DensityState;
    use rand::{Rng, SeedableRng};

    fn random_hermitian(d: usize, rng: &mut impl Rng) -> CMatrix {
        let a = CMatrix::from_fn(d, d, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        (&a + a.adjoint()) * C64::new(0.5, 0.0)
    }

    fn random_density(n: usize, rng: &mut impl Rng) -> DensityState {
        let d = 1 << n;
        let a = CMatrix::from_fn(d, d, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let m = &a * a.adjoint();
        let t = trace(&m);
        DensityState::from_matrix(m / t).unwrap()
    }

    fn exact_record(state: &DensityState, setting: MeasurementSetting) -> MeasurementRecord {
        MeasurementRecord {
            r: 1,
            outcomes: Outcomes::Exact(born_probabilities(state, &setting).unwrap()),
            setting,
        }
    }

    /// Record holding the single outcome `s` (one shot).
    fn single_shot(setting: MeasurementSetting, s: u32) -> MeasurementRecord {
        MeasurementRecord {
            r: 1,
            setting,
            outcomes: Outcomes::Shots(vec![s]),
        }
    }

    #[test]
    fn zero_state_z_setting() {
        let rho = DensityState::basis(1, 0).unwrap();
        let snap = build_rho_snapshot(&exact_record(&rho, "Z".parse().unwrap()), &[0]).unwrap();
        assert!((snap.matrix[(0, 0)].re - 2.0).abs() < 1e-15);
        assert!((snap.matrix[(1, 1)].re + 1.0).abs() < 1e-15);
        assert!(snap.matrix[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn standard_snapshot_average_is_unbiased_one_qubit() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let rho = random_density(1, &mut rng);
        let mut avg = CMatrix::zeros(2, 2);
        for s in MeasurementSetting::all(1) {
            avg += build_rho_snapshot(&exact_record(&rho, s), &[0]).unwrap().matrix / C64::new(3.0, 0.0);
        }
        assert!(max_abs_diff(&avg, &rho.matrix()) < 1e-12);
    }

    #[test]
    fn every_snapshot_has_unit_trace() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let rho = random_density(3, &mut rng);
        let ds = crate::measurement::sample_dataset(&rho, 10, 7, 3, "r").unwrap();
        for rec in &ds.records {
            for support in [vec![0], vec![1, 2], vec![0, 1, 2]] {
                let s = build_rho_snapshot(rec, &support).unwrap();
                assert!((trace(&s.matrix) - C64::new(1.0, 0.0)).norm() < 1e-10);
                assert!(hermiticity_defect(&s.matrix) < 1e-10);
            }
        }
    }

    #[test]
    fn sigma_snapshot_examples() {
        let mm = PseudoState::new(vec![0, 1], CMatrix::identity(4, 4) * C64::new(0.25, 0.0)).unwrap();
        for s in MeasurementSetting::all(2) {
            let snap = build_sigma_snapshot(&mm, &s).unwrap();
            assert!(max_abs_diff(&snap.matrix, mm.matrix()) < 1e-14);
        }

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let rho = random_density(2, &mut rng);
        let sigma = PseudoState::from_state(&rho, vec![0, 1]).unwrap();
        let mut avg = CMatrix::zeros(4, 4);
        for s in MeasurementSetting::all(2) {
            let a = build_rho_snapshot(&exact_record(&rho, s.clone()), &[0, 1]).unwrap();
            let b = build_sigma_snapshot(&sigma, &s).unwrap();
            assert!(max_abs_diff(&a.matrix, &b.matrix) < 1e-14);
            avg += b.matrix / C64::new(9.0, 0.0);
        }
        assert!(max_abs_diff(&avg, sigma.matrix()) < 1e-12);

        let bad: MeasurementSetting = "XYZ".parse().unwrap();
        assert!(matches!(build_sigma_snapshot(&sigma, &bad), Err(Error::Argument(_))));
    }

    #[test]
    fn prior_snapshot_trace_follows_prior() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let sigma = PseudoState::new(vec![0, 1], random_hermitian(4, &mut rng)).unwrap();
        for s in MeasurementSetting::all(2) {
            let snap = build_sigma_snapshot(&sigma, &s).unwrap();
            assert!((trace(&snap.matrix).re - sigma.trace()).abs() < 1e-10);
        }
    }

    #[test]
    fn crm_examples() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let rho = random_density(2, &mut rng);
        let rho_a = PseudoState::from_state(&rho, vec![0, 1]).unwrap();
        let zero = PseudoState::zero(vec![0, 1]);
        for s in MeasurementSetting::all(2) {
            let rec = exact_record(&rho, s);
            let crm0 = build_crm_snapshot(&rec, &zero).unwrap();
            let std = build_rho_snapshot(&rec, &[0, 1]).unwrap();
            assert!(max_abs_diff(&crm0.matrix, &std.matrix) < 1e-14);
            let perfect = build_crm_snapshot(&rec, &rho_a).unwrap();
            assert!(max_abs_diff(&perfect.matrix, &rho.matrix()) < 1e-13);
        }
    }

    #[test]
    fn crm_linearity_in_prior() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        let rho = random_density(3, &mut rng);
        let sigma = PseudoState::new(vec![0, 2], random_hermitian(4, &mut rng)).unwrap();
        let zero = PseudoState::zero(vec![0, 2]);
        let ds = crate::measurement::sample_dataset(&rho, 5, 11, 8, "r").unwrap();
        for rec in &ds.records {
            let a = build_crm_snapshot(rec, &sigma).unwrap();
            let b = build_crm_snapshot(rec, &zero).unwrap();
            let sig_r = build_sigma_snapshot(&sigma, &rec.setting.restrict(&[0, 2])).unwrap();
            let expected = sigma.matrix() - &sig_r.matrix;
            assert!(max_abs_diff(&(a.matrix - b.matrix), &expected) < 1e-12);
        }
    }

    #[test]
    fn crm_exhaustive_unbiasedness() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let rho = random_density(2, &mut rng);
        let sigma = PseudoState::new(vec![0, 1], random_hermitian(4, &mut rng)).unwrap();
        let mut avg = CMatrix::zeros(4, 4);
        for setting in MeasurementSetting::all(2) {
            let probs = born_probabilities(&rho, &setting).unwrap();
            for (s, p) in probs.iter().enumerate() {
                let snap = build_crm_snapshot(&single_shot(setting.clone(), s as u32), &sigma).unwrap();
                assert!((trace(&snap.matrix).re - 1.0).abs() < 1e-10);
                avg += snap.matrix * C64::new(p / 9.0, 0.0);
            }
        }
        assert!(max_abs_diff(&avg, &rho.matrix()) < 1e-12);
    }

    #[test]
    fn oversized_support_is_a_resource_error() {
        let rec = single_shot(MeasurementSetting::uniform(13, crate::measurement::Basis::Z), 0);
        let support: Vec<usize> = (0..13).collect();
        assert!(matches!(build_rho_snapshot(&rec, &support), Err(Error::Resource(_))));
    }
}
