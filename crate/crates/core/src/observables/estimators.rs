use serde::Serialize;

use super::entropy_poly::{entropy_poly_coeffs, EntropyPolynomial};
use crate::measurement::{Basis, Dataset, MeasurementRecord};
use crate::qcore::linalg::{CVector, MAX_REDUCED_QUBITS};
use crate::qcore::{rotate_vector, Pauli, PauliString, PseudoState};
use crate::shadows::{check_support, crm_weights, rho_weights, BatchShadow};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Budget {
    pub nu: usize,
    /// `None` for exact-mode data or when the shot count is unknown.
    pub nm: Option<usize>,
}

/// Estimate with the standard error of the mean over unitaries or batches.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateReport {
    pub value: f64,
    /// NaN when the data admit no error estimate (see
    /// [`estimate_trace_moment`]).
    pub stderr: f64,
    pub budget: Budget,
}

impl EstimateReport {
    /// Mean and `sample std / sqrt(count)`; a single value has stderr 0.
    pub fn from_values(values: &[f64], budget: Budget) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Argument("no values to average".into()));
        }
        let k = values.len() as f64;
        let mean = values.iter().sum::<f64>() / k;
        let stderr = if values.len() == 1 {
            0.0
        } else {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
            (var / k).sqrt()
        };
        Ok(Self {
            value: mean,
            stderr,
            budget,
        })
    }
}

fn dataset_budget(ds: &Dataset) -> Budget {
    Budget {
        nu: ds.records.len(),
        nm: ds.meta.nm,
    }
}

fn basis_for(p: Pauli) -> Option<Basis> {
    match p {
        Pauli::I => None,
        Pauli::X => Some(Basis::X),
        Pauli::Y => Some(Basis::Y),
        Pauli::Z => Some(Basis::Z),
    }
}

/// Single-record Pauli estimate
/// `3^w delta(U_A = V_gamma) (<Z_A> - Tr(sigma gamma)) + Tr(sigma gamma)`,
/// with `Tr(sigma gamma) = 0` for standard shadows.
pub fn pauli_contribution(record: &MeasurementRecord, gamma: &PauliString, prior_value: f64) -> f64 {
    let support = gamma.support();
    let matches = support
        .iter()
        .all(|&q| basis_for(gamma.letters()[q]) == Some(record.setting.bases()[q]));
    if !matches {
        return prior_value;
    }
    let marginal = record.marginal(&support);
    let w = support.len();
    let parity: f64 = marginal
        .iter()
        .enumerate()
        .map(|(s, p)| if s.count_ones() % 2 == 0 { *p } else { -*p })
        .sum();
    3f64.powi(w as i32) * (parity - prior_value) + prior_value
}

/// `Tr(sigma gamma)` for a prior whose support covers that of `gamma`.
pub fn prior_pauli_value(sigma: &PseudoState, gamma: &PauliString) -> Result<f64> {
    let support = sigma.support();
    if let Some(q) = gamma.support().into_iter().find(|q| !support.contains(q)) {
        return Err(Error::Argument(format!("Pauli qubit {q} outside prior support {support:?}")));
    }
    Ok(gamma.restrict(support).trace_with(sigma.matrix())?.re)
}

/// Standard (`sigma = None`) or CRM estimate of `Tr(rho gamma)`.
pub fn estimate_pauli(ds: &Dataset, sigma: Option<&PseudoState>, gamma: &PauliString) -> Result<EstimateReport> {
    if gamma.len() != ds.num_qubits() {
        return Err(Error::Dimension(format!(
            "Pauli string of length {} on a {}-qubit dataset",
            gamma.len(),
            ds.num_qubits()
        )));
    }
    let prior_value = match sigma {
        Some(s) => prior_pauli_value(s, gamma)?,
        None => 0.0,
    };
    let values: Vec<f64> = ds
        .records
        .iter()
        .map(|r| pauli_contribution(r, gamma, prior_value))
        .collect();
    EstimateReport::from_values(&values, dataset_budget(ds))
}

fn batch_budget(batches: &[BatchShadow]) -> Budget {
    Budget {
        nu: batches.iter().map(|b| b.members).sum(),
        nm: None,
    }
}

fn check_batches(batches: &[BatchShadow], n: usize) -> Result<()> {
    if batches.len() < n || batches.is_empty() {
        return Err(Error::Argument(format!(
            "{} batches cannot estimate a degree-{n} moment",
            batches.len()
        )));
    }
    Ok(())
}

fn shift_stats(batches: &[BatchShadow], n: usize) -> (f64, Vec<f64>) {
    let mats: Vec<_> = batches.iter().map(|b| b.matrix.clone()).collect();
    crate::shadows::shift_u_statistic(&mats, n)
}

/// First-order (Hoeffding) standard error `sqrt(var_t(h_t) / m)` of a
/// U-statistic whose projections, already scaled by the kernel degree,
/// are `h`. Needs more batches than the largest degree.
fn projection_stderr(h: &[f64], max_degree: usize) -> f64 {
    let m = h.len();
    if m <= max_degree {
        return f64::NAN;
    }
    let mean = h.iter().sum::<f64>() / m as f64;
    let var = h.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    (var / m as f64).sqrt()
}

/// `p_n = Tr(rho_A^n)` from batch shadows on `A`. The stderr is the
/// first-order U-statistic estimate and is NaN when `m = n >= 2`.
pub fn estimate_trace_moment(batches: &[BatchShadow], n: usize) -> Result<EstimateReport> {
    if n == 0 {
        return Err(Error::Argument("moment order must be >= 1".into()));
    }
    check_batches(batches, n)?;
    let budget = batch_budget(batches);
    if n == 1 {
        let traces: Vec<f64> = batches.iter().map(|b| crate::qcore::linalg::trace(&b.matrix).re).collect();
        return EstimateReport::from_values(&traces, budget);
    }
    let (value, proj) = shift_stats(batches, n);
    let scaled: Vec<f64> = proj.iter().map(|h| n as f64 * h).collect();
    Ok(EstimateReport {
        value,
        stderr: projection_stderr(&scaled, n),
        budget,
    })
}

/// `S_K = sum_n a_n p_n` with all moments estimated from the same batches;
/// the `n = 1` term contributes `a_1` exactly.
pub fn estimate_entropy_with(batches: &[BatchShadow], poly: &EntropyPolynomial) -> Result<EstimateReport> {
    let k = poly.n_max();
    check_batches(batches, k)?;
    let a = poly.coefficients();
    let m = batches.len();
    let mut value = a[0];
    let mut proj = vec![0.0; m];
    for n in 2..=k {
        let (p, h) = shift_stats(batches, n);
        value += a[n - 1] * p;
        for (acc, v) in proj.iter_mut().zip(h) {
            *acc += a[n - 1] * n as f64 * v;
        }
    }
    let stderr = if k == 1 { 0.0 } else { projection_stderr(&proj, k) };
    Ok(EstimateReport {
        value,
        stderr,
        budget: batch_budget(batches),
    })
}

/// [`estimate_entropy_with`] using the optimal polynomial of degree `n_max`.
pub fn estimate_entropy_poly(batches: &[BatchShadow], n_max: usize) -> Result<EstimateReport> {
    estimate_entropy_with(batches, &entropy_poly_coeffs(n_max)?)
}

/// Per-record fidelity contributions `<psi| rho_hat_sigma^(r) |psi>`.
pub fn fidelity_contributions(ds: &Dataset, sigma: Option<&PseudoState>, psi: &CVector) -> Result<Vec<f64>> {
    let n = ds.num_qubits();
    let support: Vec<usize> = match sigma {
        Some(s) => s.support().to_vec(),
        None => (0..n).collect(),
    };
    check_support(n, &support)?;
    if support.len() > MAX_REDUCED_QUBITS || psi.len() != 1 << support.len() {
        return Err(Error::Dimension(format!(
            "target vector of length {} on {} qubits",
            psi.len(),
            support.len()
        )));
    }
    let norm2 = psi.norm_squared();
    if (norm2 - 1.0).abs() > 1e-10 {
        return Err(Error::Validation(format!("target vector has norm^2 {norm2}")));
    }
    let offset = match sigma {
        Some(s) => (psi.adjoint() * s.matrix() * psi)[(0, 0)].re,
        None => 0.0,
    };
    ds.records
        .iter()
        .map(|r| {
            let rot = match sigma {
                Some(s) => crm_weights(r, s)?,
                None => rho_weights(r, &support)?,
            };
            let phi = rotate_vector(psi, &rot.setting)?;
            let v: f64 = rot
                .weights
                .iter()
                .zip(phi.iter())
                .map(|(w, a)| w * a.norm_sqr())
                .sum();
            Ok(v + offset)
        })
        .collect()
}

/// Standard or CRM estimate of `<psi| rho |psi>`; `psi` lives on the
/// prior's support, or on the full register without a prior.
pub fn estimate_fidelity(ds: &Dataset, sigma: Option<&PseudoState>, psi: &CVector) -> Result<EstimateReport> {
    let values = fidelity_contributions(ds, sigma, psi)?;
    EstimateReport::from_values(&values, dataset_budget(ds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{exact_dataset, sample_dataset, MeasurementSetting};
    use crate::qcore::linalg::{trace, CMatrix, C64};
    use crate::qcore::{density_spectrum, pauli_expectation, DensityState};
    use crate::shadows::{build_rho_snapshot, crm_batches};
    use rand::{Rng, SeedableRng};

    fn random_state(n: usize, seed: u64) -> DensityState {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let d = 1 << n;
        let a = CMatrix::from_fn(d, d, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let m = &a * a.adjoint();
        let t = trace(&m);
        DensityState::from_matrix(m / t).unwrap()
    }

    fn all_settings(n: usize) -> Vec<MeasurementSetting> {
        MeasurementSetting::all(n).collect()
    }

    #[test]
    fn pauli_without_matching_setting() {
        let rho = random_state(2, 1);
        let settings = vec![MeasurementSetting::uniform(2, Basis::Z); 4];
        let ds = exact_dataset(&rho, &settings, "r").unwrap();
        let gamma: PauliString = "XI".parse().unwrap();
        assert_eq!(estimate_pauli(&ds, None, &gamma).unwrap().value, 0.0);
        let sigma = PseudoState::from_state(&random_state(2, 2), vec![0, 1]).unwrap();
        let expected = prior_pauli_value(&sigma, &gamma).unwrap();
        assert!((estimate_pauli(&ds, Some(&sigma), &gamma).unwrap().value - expected).abs() < 1e-15);
    }

    #[test]
    fn single_qubit_z_enumeration() {
        let rho = DensityState::basis(1, 0).unwrap();
        let ds = exact_dataset(&rho, &all_settings(1), "0").unwrap();
        let r = estimate_pauli(&ds, None, &"Z".parse().unwrap()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pauli_exhaustive_unbiasedness() {
        let rho = random_state(3, 3);
        let ds = exact_dataset(&rho, &all_settings(3), "r").unwrap();
        let sigma = PseudoState::new(vec![0, 1, 2], random_state(3, 4).matrix().into_owned() * C64::new(1.7, 0.0)).unwrap();
        for s in ["ZIX", "YYI", "XYZ", "IIZ", "III"] {
            let gamma: PauliString = s.parse().unwrap();
            let exact = pauli_expectation(&rho, &gamma).unwrap();
            assert!((estimate_pauli(&ds, None, &gamma).unwrap().value - exact).abs() < 1e-12);
            assert!((estimate_pauli(&ds, Some(&sigma), &gamma).unwrap().value - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn pauli_zero_variance_with_perfect_prior() {
        let rho = random_state(2, 5);
        let ds = exact_dataset(&rho, &all_settings(2), "r").unwrap();
        let sigma = PseudoState::from_state(&rho, vec![0, 1]).unwrap();
        let gamma: PauliString = "XZ".parse().unwrap();
        let r = estimate_pauli(&ds, Some(&sigma), &gamma).unwrap();
        assert!((r.value - pauli_expectation(&rho, &gamma).unwrap()).abs() < 1e-12);
        assert!(r.stderr < 1e-12);
    }

    #[test]
    fn closed_form_matches_snapshot_trace() {
        let rho = random_state(3, 6);
        let ds = sample_dataset(&rho, 40, 7, 9, "r").unwrap();
        for s in ["ZZI", "XIY", "IYI"] {
            let gamma: PauliString = s.parse().unwrap();
            for r in &ds.records {
                let snap = build_rho_snapshot(r, &[0, 1, 2]).unwrap();
                let generic = gamma.trace_with(&snap.matrix).unwrap().re;
                assert!((pauli_contribution(r, &gamma, 0.0) - generic).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn first_moment_is_one() {
        let rho = random_state(3, 7);
        let ds = sample_dataset(&rho, 12, 5, 1, "r").unwrap();
        let b = crm_batches(&ds, None, &[0, 2], 4).unwrap();
        assert!((estimate_trace_moment(&b, 1).unwrap().value - 1.0).abs() < 1e-12);
        assert!(matches!(estimate_trace_moment(&b, 5), Err(Error::Argument(_))));
    }

    #[test]
    fn bell_half_purity_with_perfect_prior() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = DensityState::from_statevector(CVector::from_vec(vec![
            C64::new(s, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(s, 0.0),
        ]))
        .unwrap();
        let ds = exact_dataset(&bell, &all_settings(2), "bell").unwrap();
        let sigma = PseudoState::from_state(&bell, vec![0]).unwrap();
        let b = crm_batches(&ds, Some(&sigma), &[0], 3).unwrap();
        let r = estimate_trace_moment(&b, 2).unwrap();
        assert!((r.value - 0.5).abs() < 1e-12);
        assert!(r.stderr < 1e-12);
    }

    #[test]
    fn perfect_prior_entropy_is_exact() {
        let rho = random_state(2, 8);
        let ds = exact_dataset(&rho, &all_settings(2), "r").unwrap();
        let sigma = PseudoState::from_state(&rho, vec![0, 1]).unwrap();
        let b = crm_batches(&ds, Some(&sigma), &[0, 1], 3).unwrap();
        let poly = entropy_poly_coeffs(3).unwrap();
        let exact = poly.eval_spectrum(&density_spectrum(&rho.matrix()).unwrap());
        let r = estimate_entropy_with(&b, &poly).unwrap();
        assert!((r.value - exact).abs() < 1e-12);
    }

    #[test]
    fn entropy_stderr_needs_spare_batches() {
        let rho = random_state(2, 9);
        let ds = sample_dataset(&rho, 12, 10, 3, "r").unwrap();
        let b3 = crm_batches(&ds, None, &[0, 1], 3).unwrap();
        assert!(estimate_entropy_poly(&b3, 3).unwrap().stderr.is_nan());
        let b6 = crm_batches(&ds, None, &[0, 1], 6).unwrap();
        let r = estimate_entropy_poly(&b6, 3).unwrap();
        assert!(r.stderr.is_finite() && r.stderr > 0.0);
        assert!(matches!(estimate_entropy_poly(&b3, 4), Err(Error::Argument(_))));
    }

    fn plus_state(n: usize) -> CVector {
        let d = 1 << n;
        CVector::from_element(d, C64::new(1.0 / (d as f64).sqrt(), 0.0))
    }

    #[test]
    fn fidelity_limits() {
        let psi = plus_state(2);
        let rho = DensityState::from_statevector(psi.clone()).unwrap();
        let ds = exact_dataset(&rho, &all_settings(2), "plus").unwrap();
        let sigma = PseudoState::from_state(&rho, vec![0, 1]).unwrap();
        let r = estimate_fidelity(&ds, Some(&sigma), &psi).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12 && r.stderr < 1e-12);

        let mut perp = plus_state(2);
        perp[1] = -perp[1];
        perp[2] = -perp[2];
        let r = estimate_fidelity(&ds, Some(&sigma), &perp).unwrap();
        assert!(r.value.abs() < 1e-12 && r.stderr < 1e-12);
    }

    #[test]
    fn fidelity_unbiased_by_enumeration() {
        let rho = random_state(2, 10);
        let ds = exact_dataset(&rho, &all_settings(2), "r").unwrap();
        let psi = {
            let v = CVector::from_vec(vec![
                C64::new(0.3, 0.1),
                C64::new(-0.2, 0.5),
                C64::new(0.6, 0.0),
                C64::new(0.1, -0.4),
            ]);
            let norm = v.norm();
            v / C64::new(norm, 0.0)
        };
        let exact = (psi.adjoint() * rho.matrix().as_ref() * &psi)[(0, 0)].re;
        let got = estimate_fidelity(&ds, None, &psi).unwrap().value;
        assert!((got - exact).abs() < 1e-12);
        let bad = psi * C64::new(2.0, 0.0);
        assert!(matches!(estimate_fidelity(&ds, None, &bad), Err(Error::Validation(_))));
    }

    #[test]
    fn report_two_point_formula() {
        let b = Budget { nu: 2, nm: None };
        let r = EstimateReport::from_values(&[0.0, 2.0], b).unwrap();
        assert_eq!((r.value, r.stderr), (1.0, 1.0));
        assert_eq!(EstimateReport::from_values(&[3.0; 5], b).unwrap().stderr, 0.0);
    }
}
