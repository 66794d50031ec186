//! Variance formulas and bounds, the exhaustive leading-order variance
//! oracle, empirical error reports and prior selection.

use rayon::prelude::*;
use serde::Serialize;

use crate::measurement::{rotated_diagonal, Dataset, MeasurementSetting};
use crate::observables::{
    fidelity_contributions, pauli_contribution, prior_pauli_value, Budget, EstimateReport,
};
use crate::qcore::linalg::{hermiticity_defect, hs_norm_sq, qubit_count, trace_of_product, CMatrix, CVector};
use crate::qcore::state::HERMITIAN_TOL;
use crate::qcore::{PauliString, PseudoState};
use crate::shadows::{crm_weights, inverse_channel_apply, rho_weights};
use crate::{Error, Result};

/// Largest support for [`exact_leading_variance`].
pub const MAX_ENUMERATION_QUBITS: usize = 8;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum OperatorOrigin {
    /// `rho_A^{n-1}` for the trace moment of order `n`.
    Shift { copies: usize },
    Pauli(String),
    Explicit,
}

/// Single-copy operator `O^(1)_A` governing the leading variance term.
#[derive(Clone, Debug)]
pub struct ReducedOneCopyOperator {
    matrix: CMatrix,
    origin: OperatorOrigin,
}

impl ReducedOneCopyOperator {
    pub fn explicit(matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::Dimension("operator must be square".into()));
        }
        qubit_count(matrix.nrows())?;
        let defect = hermiticity_defect(&matrix);
        if defect > HERMITIAN_TOL {
            return Err(Error::Validation(format!("operator not hermitian (defect {defect:e})")));
        }
        Ok(Self {
            matrix,
            origin: OperatorOrigin::Explicit,
        })
    }

    /// `rho_A^{n-1}` for the `n`-th trace moment.
    pub fn shift(rho_a: &CMatrix, copies: usize) -> Result<Self> {
        if copies < 1 {
            return Err(Error::Argument("trace moment order must be >= 1".into()));
        }
        let mut op = Self::explicit(rho_a.clone())?;
        let d = rho_a.nrows();
        let mut power = CMatrix::identity(d, d);
        for _ in 1..copies {
            power = &power * rho_a;
        }
        op.matrix = power;
        op.origin = OperatorOrigin::Shift { copies };
        Ok(op)
    }

    /// Pauli string restricted to its support (the full register when it
    /// is the identity).
    pub fn pauli(gamma: &PauliString) -> Self {
        let support = gamma.support();
        let local = if support.is_empty() {
            gamma.clone()
        } else {
            gamma.restrict(&support)
        };
        Self {
            matrix: local.matrix(),
            origin: OperatorOrigin::Pauli(gamma.to_string()),
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn origin(&self) -> &OperatorOrigin {
        &self.origin
    }

    pub fn num_qubits(&self) -> usize {
        self.matrix.nrows().trailing_zeros() as usize
    }
}

fn shot_factor(nm: Option<usize>) -> f64 {
    nm.map_or(0.0, |m| 1.0 / m as f64)
}

fn check_nu(nu: usize) -> Result<()> {
    if nu == 0 {
        return Err(Error::Argument("N_U must be >= 1".into()));
    }
    Ok(())
}

fn pauli_terms(gamma: &PauliString, rho: &CMatrix, sigma: Option<&PseudoState>) -> Result<(f64, f64, f64)> {
    let w = gamma.weight() as i32;
    let t = gamma.trace_with(rho)?.re;
    let s = match sigma {
        Some(sig) => prior_pauli_value(sig, gamma)?,
        None => 0.0,
    };
    Ok((3f64.powi(w), t, t - s))
}

/// Exact variance of the Pauli estimator:
/// `[(3^w - 1) Tr(gamma(rho - sigma))^2 + 3^w (1 - Tr(rho gamma)^2) / N_M] / N_U`,
/// with `w` the weight of `gamma`. `nm = None` is the infinite-shot limit.
pub fn pauli_variance_exact(
    gamma: &PauliString,
    rho: &CMatrix,
    sigma: Option<&PseudoState>,
    nu: usize,
    nm: Option<usize>,
) -> Result<f64> {
    check_nu(nu)?;
    let (three_w, t, diff) = pauli_terms(gamma, rho, sigma)?;
    Ok(((three_w - 1.0) * diff * diff + three_w * (1.0 - t * t) * shot_factor(nm)) / nu as f64)
}

/// Upper bound `3^w (Tr(gamma(rho - sigma))^2 + 1/N_M) / N_U`.
pub fn pauli_variance_bound(
    gamma: &PauliString,
    rho: &CMatrix,
    sigma: Option<&PseudoState>,
    nu: usize,
    nm: Option<usize>,
) -> Result<f64> {
    check_nu(nu)?;
    let (three_w, _, diff) = pauli_terms(gamma, rho, sigma)?;
    Ok(three_w * (diff * diff + shot_factor(nm)) / nu as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VarianceBoundReport {
    pub bound: f64,
    pub setting_noise: f64,
    pub shot_noise: f64,
    pub nu: usize,
    pub nm: Option<usize>,
    pub na: usize,
    pub copies: usize,
}

/// Leading-order bound
/// `n^2 ||O_A||_2^2 (3^{N_A} ||rho_A - sigma_A||_2^2 + 2^{N_A} / N_M) / N_U`;
/// the `O(1/N_U^2)` remainder is not included.
pub fn mco_variance_bound(
    o1: &ReducedOneCopyOperator,
    rho_a: &CMatrix,
    sigma_a: Option<&CMatrix>,
    copies: usize,
    nu: usize,
    nm: Option<usize>,
) -> Result<VarianceBoundReport> {
    check_nu(nu)?;
    let d = o1.matrix.nrows();
    if rho_a.nrows() != d || sigma_a.is_some_and(|s| s.nrows() != d) {
        return Err(Error::Dimension("operator and states must share the support".into()));
    }
    let na = o1.num_qubits();
    let diff = match sigma_a {
        Some(s) => hs_norm_sq(&(rho_a - s)),
        None => hs_norm_sq(rho_a),
    };
    let prefactor = (copies * copies) as f64 * hs_norm_sq(&o1.matrix) / nu as f64;
    let setting_noise = prefactor * 3f64.powi(na as i32) * diff;
    let shot_noise = prefactor * (1usize << na) as f64 * shot_factor(nm);
    Ok(VarianceBoundReport {
        bound: setting_noise + shot_noise,
        setting_noise,
        shot_noise,
        nu,
        nm,
        na,
        copies,
    })
}

/// Exact `V_1 = V_U[f(U)] + E_U[g(U)] / N_M` by enumerating all `3^{N_A}`
/// settings, with
/// `f(U) = sum_s (P_rho(s|U) - P_sigma(s|U)) v(U,s)`,
/// `g(U) = sum_s P_rho v^2 - (sum_s P_rho v)^2` and
/// `v(U,s) = <s| U M^{-1}(O) U^dag |s>`.
/// The variance of an `n`-copy estimator is `n^2 V_1 / N_U` to leading order.
pub fn exact_leading_variance(
    o1: &ReducedOneCopyOperator,
    rho_a: &CMatrix,
    sigma_a: Option<&CMatrix>,
    nm: Option<usize>,
) -> Result<f64> {
    let na = o1.num_qubits();
    if na > MAX_ENUMERATION_QUBITS {
        return Err(Error::Resource(format!(
            "exhaustive variance on {na} qubits exceeds the {MAX_ENUMERATION_QUBITS}-qubit cap"
        )));
    }
    let d = 1usize << na;
    if rho_a.nrows() != d || sigma_a.is_some_and(|s| s.nrows() != d) {
        return Err(Error::Dimension("operator and states must share the support".into()));
    }
    let inv = inverse_channel_apply(&o1.matrix)?;
    let count = 3usize.pow(na as u32);
    let terms: Vec<(f64, f64)> = (0..count)
        .into_par_iter()
        .map(|i| {
            let setting = MeasurementSetting::from_index(i, na);
            let v = rotated_diagonal(&inv, &setting)?;
            let p = rotated_diagonal(rho_a, &setting)?;
            let q = match sigma_a {
                Some(s) => rotated_diagonal(s, &setting)?,
                None => vec![0.0; d],
            };
            let mut f = 0.0;
            let (mut first, mut second) = (0.0, 0.0);
            for s in 0..d {
                f += (p[s] - q[s]) * v[s];
                first += p[s] * v[s];
                second += p[s] * v[s] * v[s];
            }
            Ok((f, second - first * first))
        })
        .collect::<Result<_>>()?;
    let k = count as f64;
    let mean_f = terms.iter().map(|t| t.0).sum::<f64>() / k;
    let var_f = terms.iter().map(|t| (t.0 - mean_f).powi(2)).sum::<f64>() / k;
    let mean_g = terms.iter().map(|t| t.1).sum::<f64>() / k;
    Ok(var_f + mean_g * shot_factor(nm))
}

/// Mean and standard error of a list of per-unitary (or per-batch) values.
pub fn empirical_report(values: &[f64]) -> Result<EstimateReport> {
    if values.len() < 2 {
        return Err(Error::Argument(format!(
            "an empirical error needs at least 2 values, got {}",
            values.len()
        )));
    }
    EstimateReport::from_values(
        values,
        Budget {
            nu: values.len(),
            nm: None,
        },
    )
}

/// Observable used to compare candidate priors.
#[derive(Clone, Debug)]
pub enum SelectionTarget {
    Pauli(PauliString),
    /// Fidelity with a pure state on the full register.
    Fidelity(CVector),
}

#[derive(Clone, Debug, Serialize)]
pub struct PriorSelection {
    /// Index into the candidate list with the smallest stderr (ties go to
    /// the lower index).
    pub chosen: usize,
    pub reports: Vec<EstimateReport>,
    /// Estimated `Tr(rho sigma)` per candidate (`None` for "no prior"),
    /// which is the fidelity `<phi|rho|phi>` for a pure prior.
    pub prior_fidelity: Vec<Option<f64>>,
    /// Candidates whose estimated prior fidelity is below the threshold.
    pub below_threshold: Vec<bool>,
}

/// Per-record estimates of `Tr(op rho)` for an operator on `support`.
fn linear_contributions(ds: &Dataset, sigma: Option<&PseudoState>, op: &CMatrix, support: &[usize]) -> Result<Vec<f64>> {
    let offset = match sigma {
        Some(s) => trace_of_product(op, s.matrix()).re,
        None => 0.0,
    };
    ds.records
        .iter()
        .map(|r| {
            let rot = match sigma {
                Some(s) => crm_weights(r, s)?,
                None => rho_weights(r, support)?,
            };
            let diag = rotated_diagonal(op, &rot.setting)?;
            Ok(rot.weights.iter().zip(diag).map(|(w, o)| w * o).sum::<f64>() + offset)
        })
        .collect()
}

/// Best of standard and CRM estimates of `Tr(rho sigma)`.
fn estimate_prior_overlap(ds: &Dataset, sigma: &PseudoState) -> Result<f64> {
    let budget = Budget {
        nu: ds.records.len(),
        nm: ds.meta.nm,
    };
    let standard = EstimateReport::from_values(&linear_contributions(ds, None, sigma.matrix(), sigma.support())?, budget)?;
    let crm = EstimateReport::from_values(&linear_contributions(ds, Some(sigma), sigma.matrix(), sigma.support())?, budget)?;
    Ok(if crm.stderr < standard.stderr { crm.value } else { standard.value })
}

/// Compares candidate priors (`None` = standard shadows) on one dataset
/// by the empirical stderr of the target estimate.
pub fn prior_selection(
    ds: &Dataset,
    candidates: &[Option<PseudoState>],
    target: &SelectionTarget,
    threshold: f64,
) -> Result<PriorSelection> {
    if candidates.is_empty() {
        return Err(Error::Argument("no candidate priors".into()));
    }
    let budget = Budget {
        nu: ds.records.len(),
        nm: ds.meta.nm,
    };
    let mut reports = Vec::with_capacity(candidates.len());
    let mut prior_fidelity = Vec::with_capacity(candidates.len());
    for sigma in candidates {
        let values = match target {
            SelectionTarget::Pauli(gamma) => {
                let prior_value = match sigma {
                    Some(s) => prior_pauli_value(s, gamma)?,
                    None => 0.0,
                };
                ds.records
                    .iter()
                    .map(|r| pauli_contribution(r, gamma, prior_value))
                    .collect()
            }
            SelectionTarget::Fidelity(psi) => fidelity_contributions(ds, sigma.as_ref(), psi)?,
        };
        reports.push(EstimateReport::from_values(&values, budget)?);
        prior_fidelity.push(match sigma {
            Some(s) => Some(estimate_prior_overlap(ds, s)?),
            None => None,
        });
    }
    let chosen = reports
        .iter()
        .enumerate()
        .fold(0, |best, (i, r)| if r.stderr < reports[best].stderr { i } else { best });
    let below_threshold = prior_fidelity.iter().map(|f| f.is_some_and(|f| f < threshold)).collect();
    Ok(PriorSelection {
        chosen,
        reports,
        prior_fidelity,
        below_threshold,
    })
}

/// Default fidelity threshold for useful priors.
pub const DEFAULT_PRIOR_THRESHOLD: f64 = 0.5;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{exact_dataset, sample_dataset};
    use crate::qcore::linalg::{trace, C64, ONE};
    use crate::qcore::DensityState;
    use rand::{Rng, SeedableRng};

    fn random_matrix(d: usize, rng: &mut impl Rng) -> CMatrix {
        let a = CMatrix::from_fn(d, d, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let m = &a * a.adjoint();
        let t = trace(&m);
        m / t
    }

    fn random_pauli(n: usize, rng: &mut impl Rng) -> PauliString {
        use crate::qcore::Pauli;
        let letters = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
        PauliString::new((0..n).map(|_| letters[rng.random_range(0..4)]).collect())
    }

    #[test]
    fn pauli_variance_examples() {
        let rho = DensityState::basis(1, 0).unwrap().matrix().into_owned();
        let z: PauliString = "Z".parse().unwrap();
        assert!((pauli_variance_exact(&z, &rho, None, 5, None).unwrap() - 2.0 / 5.0).abs() < 1e-15);
        let sigma = PseudoState::new(vec![0], rho.clone()).unwrap();
        let v = pauli_variance_exact(&z, &rho, Some(&sigma), 5, Some(100)).unwrap();
        // Tr(rho Z) = 1 so the shot term vanishes as well
        assert!(v.abs() < 1e-15);
        let mixed = CMatrix::identity(2, 2) * C64::new(0.5, 0.0);
        let sigma = PseudoState::new(vec![0], mixed.clone()).unwrap();
        let v = pauli_variance_exact(&z, &mixed, Some(&sigma), 4, Some(10)).unwrap();
        assert!((v - 3.0 / 4.0 / 10.0).abs() < 1e-15);
    }

    #[test]
    fn bound_dominates_and_crm_condition() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let n = rng.random_range(1..=3);
            let rho = random_matrix(1 << n, &mut rng);
            let sigma_m = random_matrix(1 << n, &mut rng) * C64::new(rng.random_range(0.2..1.5), 0.0);
            let sigma = PseudoState::new((0..n).collect(), sigma_m.clone()).unwrap();
            let gamma = random_pauli(n, &mut rng);
            let nm = Some(rng.random_range(1..1000));
            let exact = pauli_variance_exact(&gamma, &rho, Some(&sigma), 7, nm).unwrap();
            let bound = pauli_variance_bound(&gamma, &rho, Some(&sigma), 7, nm).unwrap();
            assert!(exact <= bound + 1e-12);

            let (_, t, diff) = pauli_terms(&gamma, &rho, Some(&sigma)).unwrap();
            let standard = pauli_variance_exact(&gamma, &rho, None, 7, nm).unwrap();
            if gamma.weight() > 0 && (diff.abs() - t.abs()).abs() > 1e-9 {
                assert_eq!(exact < standard, diff.abs() < t.abs());
            }

            let o1 = ReducedOneCopyOperator::pauli(&gamma);
            let support = gamma.support();
            let (rho_a, sig_a) = if support.is_empty() {
                (rho.clone(), sigma_m.clone())
            } else {
                (
                    crate::qcore::linalg::partial_trace(&rho, &support).unwrap(),
                    crate::qcore::linalg::partial_trace(&sigma_m, &support).unwrap(),
                )
            };
            let v1 = exact_leading_variance(&o1, &rho_a, Some(&sig_a), nm).unwrap();
            let mco = mco_variance_bound(&o1, &rho_a, Some(&sig_a), 1, 7, nm).unwrap();
            assert!(v1 / 7.0 <= mco.bound + 1e-12);
            if gamma.weight() > 0 {
                assert!((v1 - 7.0 * exact).abs() < 1e-10, "{gamma}: {v1} vs {}", 7.0 * exact);
            }
        }
    }

    #[test]
    fn purity_bound_with_perfect_prior() {
        let psi = CVector::from_vec(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]);
        let rho = crate::qcore::linalg::outer(&psi);
        let o1 = ReducedOneCopyOperator::shift(&rho, 2).unwrap();
        let r = mco_variance_bound(&o1, &rho, Some(&rho), 2, 10, Some(50)).unwrap();
        assert!((r.bound - 4.0 * 2.0 / (10.0 * 50.0)).abs() < 1e-14);
        assert_eq!(r.setting_noise, 0.0);
        let more = mco_variance_bound(&o1, &rho, None, 2, 20, Some(50)).unwrap();
        let fewer = mco_variance_bound(&o1, &rho, None, 2, 10, Some(50)).unwrap();
        let shots = mco_variance_bound(&o1, &rho, None, 2, 10, Some(500)).unwrap();
        assert!(more.bound <= fewer.bound && shots.bound <= fewer.bound);
    }

    #[test]
    fn leading_variance_examples() {
        let z = ReducedOneCopyOperator::pauli(&"Z".parse().unwrap());
        let mixed = CMatrix::identity(2, 2) * C64::new(0.5, 0.0);
        let v = exact_leading_variance(&z, &mixed, None, Some(7)).unwrap();
        assert!((v - 3.0 / 7.0).abs() < 1e-14);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let rho = random_matrix(4, &mut rng);
        let o1 = ReducedOneCopyOperator::shift(&rho, 3).unwrap();
        assert!(exact_leading_variance(&o1, &rho, Some(&rho), None).unwrap().abs() < 1e-14);
        let big = ReducedOneCopyOperator::explicit(CMatrix::identity(512, 512)).unwrap();
        assert!(matches!(
            exact_leading_variance(&big, &CMatrix::identity(512, 512), None, None),
            Err(Error::Resource(_))
        ));
    }

    #[test]
    fn empirical_report_rules() {
        assert!(matches!(empirical_report(&[1.0]), Err(Error::Argument(_))));
        let r = empirical_report(&[0.0, 2.0]).unwrap();
        assert_eq!((r.value, r.stderr), (1.0, 1.0));
        assert_eq!(empirical_report(&[0.3; 4]).unwrap().stderr, 0.0);
    }

    #[test]
    fn empirical_stderr_agrees_with_jackknife() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let normal = rand_distr::Normal::new(1.0, 2.0).unwrap();
        let values: Vec<f64> = (0..1000).map(|_| rng.sample(normal)).collect();
        let r = empirical_report(&values).unwrap();
        // delete-a-group jackknife with 100 groups
        let g = 100;
        let size = values.len() / g;
        let total: f64 = values.iter().sum();
        let means: Vec<f64> = (0..g)
            .map(|k| {
                let part: f64 = values[k * size..(k + 1) * size].iter().sum();
                (total - part) / (values.len() - size) as f64
            })
            .collect();
        let mbar = means.iter().sum::<f64>() / g as f64;
        let jack = ((g - 1) as f64 / g as f64 * means.iter().map(|m| (m - mbar).powi(2)).sum::<f64>()).sqrt();
        assert!((r.stderr - jack).abs() < 0.2 * jack, "{} vs {jack}", r.stderr);
    }

    #[test]
    fn selection_prefers_exact_prior() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        let rho = DensityState::from_matrix(random_matrix(4, &mut rng)).unwrap();
        let settings: Vec<_> = MeasurementSetting::all(2).collect();
        let ds = exact_dataset(&rho, &settings, "r").unwrap();
        let exact = PseudoState::from_state(&rho, vec![0, 1]).unwrap();
        let target = SelectionTarget::Pauli("XY".parse().unwrap());
        let sel = prior_selection(&ds, &[None, Some(exact)], &target, DEFAULT_PRIOR_THRESHOLD).unwrap();
        assert_eq!(sel.chosen, 1);
        assert!(sel.reports[1].stderr < 1e-12);
        let only = prior_selection(&ds, &[None], &target, DEFAULT_PRIOR_THRESHOLD).unwrap();
        assert_eq!(only.chosen, 0);
        assert_eq!(only.below_threshold, vec![false]);
    }

    #[test]
    fn selection_flags_poor_priors() {
        let plus = CVector::from_element(4, C64::new(0.5, 0.0));
        let rho = DensityState::from_statevector(plus.clone()).unwrap();
        let ds = sample_dataset(&rho, 300, 50, 2, "plus").unwrap();
        let zero = PseudoState::new(vec![0, 1], {
            let mut m = CMatrix::zeros(4, 4);
            m[(0, 0)] = ONE;
            m
        })
        .unwrap();
        let good = PseudoState::from_state(&rho, vec![0, 1]).unwrap();
        let sel = prior_selection(
            &ds,
            &[None, Some(zero), Some(good)],
            &SelectionTarget::Fidelity(plus),
            DEFAULT_PRIOR_THRESHOLD,
        )
        .unwrap();
        assert_eq!(sel.below_threshold, vec![false, true, false]);
        assert_eq!(sel.chosen, 2);
        assert!((sel.prior_fidelity[1].unwrap() - 0.25).abs() < 0.1);
    }
}
