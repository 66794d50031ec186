//! Experiment driver: simulates datasets over an `N_U` grid and repetitions,
//! runs standard, CRM and companion estimators and tabulates the results.

mod config;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

pub use config::{ExperimentConfig, ExperimentKind, PriorSpec};

use crate::measurement::{exact_dataset, random_settings, sample_dataset, sample_dataset_with_settings, Dataset};
use crate::observables::{entropy_poly_coeffs, estimate_entropy_with, estimate_fidelity, EntropyPolynomial};
use crate::qcore::linalg::{outer, reduced_from_pure, CMatrix, CVector};
use crate::qcore::{density_spectrum, entropy_of_spectrum, DensityState, PseudoState};
use crate::shadows::{balanced_standard_batches, build_companion_batches, crm_batches, standard_batches};
use crate::statesrc::{bond_truncate, StateDescriptor};
use crate::{Error, Result};

/// One estimate from one repetition at one grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub nu: usize,
    pub repetition: usize,
    pub seed: u64,
    pub prior: String,
    pub estimator: String,
    pub value: f64,
    pub stderr: f64,
}

/// One CSV row, aggregated over repetitions.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub experiment: ExperimentKind,
    pub n: usize,
    pub n_a: usize,
    pub nu: usize,
    pub nm: Option<usize>,
    pub prior: String,
    pub estimator: String,
    /// Mean estimate over repetitions.
    pub value: f64,
    /// Standard error of `value`: spread over repetitions, or the
    /// estimator's own error bar when there is a single repetition.
    pub stderr: f64,
    pub exact_reference: f64,
    /// Mean of `|estimate - exact_reference| / |exact_reference|`.
    pub rel_error: f64,
}

#[derive(Clone, Debug, Default)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
    pub runs: Vec<RunRecord>,
}

pub const CSV_HEADER: &str = "experiment,N,N_A,N_U,N_M,prior,estimator,value,stderr,exact_reference,rel_error";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl ResultTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let nm = r.nm.map_or("exact".to_string(), |v| v.to_string());
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.experiment,
                r.n,
                r.n_a,
                r.nu,
                nm,
                csv_field(&r.prior),
                csv_field(&r.estimator),
                r.value,
                r.stderr,
                r.exact_reference,
                r.rel_error
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// Runs matching `prior` and `estimator`, grouped by `N_U`.
    pub fn runs_for(&self, prior: &str, estimator: &str) -> BTreeMap<usize, Vec<&RunRecord>> {
        let mut map: BTreeMap<usize, Vec<&RunRecord>> = BTreeMap::new();
        for r in self.runs.iter().filter(|r| r.prior == prior && r.estimator == estimator) {
            map.entry(r.nu).or_default().push(r);
        }
        map
    }

    pub fn row(&self, nu: usize, prior: &str, estimator: &str) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.nu == nu && r.prior == prior && r.estimator == estimator)
    }
}

/// SplitMix64 finalizer folded over `parts`.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    let mix = |mut z: u64| {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    };
    parts.iter().fold(mix(master), |acc, &p| mix(acc ^ mix(p)))
}

const TAG_RHO: u64 = 1;
const TAG_COMPANION_SAME: u64 = 2;
const TAG_COMPANION_INDEP: u64 = 3;

/// Statevector from which MPS priors are truncated: the noiseless circuit
/// output for circuits, the state itself when pure.
fn reference_vector(desc: &StateDescriptor, state: &DensityState) -> Option<CVector> {
    match desc {
        StateDescriptor::Circuit(c) => c.noiseless_state().ok(),
        _ => state.statevector().cloned(),
    }
}

/// Pure prior (or fidelity target) for `prior`; `state` is `desc` built.
pub fn prior_vector(prior: PriorSpec, desc: &StateDescriptor, state: &DensityState) -> Result<CVector> {
    let psi = match prior {
        PriorSpec::Exact => state.statevector().cloned(),
        _ => reference_vector(desc, state),
    }
    .ok_or_else(|| Error::config("priors", format!("prior `{prior}` needs a pure reference state")))?;
    match prior {
        PriorSpec::Mps { chi } => bond_truncate(&psi, chi),
        _ => Ok(psi),
    }
}

/// Prior reduced onto `support`; `None` for [`PriorSpec::None`].
pub fn prior_on(
    prior: PriorSpec,
    desc: &StateDescriptor,
    state: &DensityState,
    support: &[usize],
) -> Result<Option<PseudoState>> {
    let matrix = match prior {
        PriorSpec::None => return Ok(None),
        PriorSpec::Exact => state.reduced(support)?,
        PriorSpec::Mps { .. } => reduced_from_pure(&prior_vector(prior, desc, state)?, support)?,
    };
    Ok(Some(PseudoState::new(support.to_vec(), matrix)?))
}

fn simulate(state: &DensityState, cfg: &ExperimentConfig, nu: usize, seed: u64) -> Result<Dataset> {
    let desc = cfg.state.to_string();
    match cfg.nm {
        Some(nm) => sample_dataset(state, nu, nm, seed, &desc),
        None => exact_dataset(state, &random_settings(state.num_qubits(), nu, seed), &desc),
    }
}

struct Job {
    nu: usize,
    repetition: usize,
    seed: u64,
}

fn jobs(cfg: &ExperimentConfig) -> Vec<Job> {
    let mut out = Vec::new();
    for &nu in &cfg.nu_grid {
        for repetition in 0..cfg.repetitions {
            let seed = derive_seed(cfg.seed, &[TAG_RHO, nu as u64, repetition as u64]);
            out.push(Job { nu, repetition, seed });
        }
    }
    out
}

fn run_record(job: &Job, prior: &str, estimator: &str, value: f64, stderr: f64) -> RunRecord {
    RunRecord {
        nu: job.nu,
        repetition: job.repetition,
        seed: job.seed,
        prior: prior.to_string(),
        estimator: estimator.to_string(),
        value,
        stderr,
    }
}

/// Exact references attached to the rows of one (prior, estimator) series:
/// `(row estimator label, reference)`.
type References = Vec<(String, f64)>;

struct Series {
    prior: String,
    estimator: String,
    references: References,
}

fn aggregate(
    cfg: &ExperimentConfig,
    n: usize,
    n_a: usize,
    runs: Vec<RunRecord>,
    series: &[Series],
) -> ResultTable {
    let mut rows = Vec::new();
    for &nu in &cfg.nu_grid {
        for s in series {
            let group: Vec<&RunRecord> = runs
                .iter()
                .filter(|r| r.nu == nu && r.prior == s.prior && r.estimator == s.estimator)
                .collect();
            if group.is_empty() {
                continue;
            }
            let k = group.len() as f64;
            let value = group.iter().map(|r| r.value).sum::<f64>() / k;
            let stderr = if group.len() == 1 {
                group[0].stderr
            } else {
                let var = group.iter().map(|r| (r.value - value).powi(2)).sum::<f64>() / (k - 1.0);
                (var / k).sqrt()
            };
            for (label, reference) in &s.references {
                let rel_error = group.iter().map(|r| ((r.value - reference) / reference).abs()).sum::<f64>() / k;
                rows.push(ResultRow {
                    experiment: cfg.experiment,
                    n,
                    n_a,
                    nu,
                    nm: cfg.nm,
                    prior: s.prior.clone(),
                    estimator: label.clone(),
                    value,
                    stderr,
                    exact_reference: *reference,
                    rel_error,
                });
            }
        }
    }
    ResultTable { rows, runs }
}

fn entropy_references(estimator: &str, poly: &EntropyPolynomial, rho_a: &CMatrix) -> Result<References> {
    let spectrum = density_spectrum(rho_a)?;
    Ok(vec![
        (estimator.to_string(), poly.eval_spectrum(&spectrum)),
        (format!("{estimator}_vs_S"), entropy_of_spectrum(&spectrum)),
    ])
}

fn subsystem(cfg: &ExperimentConfig, n: usize) -> Result<Vec<usize>> {
    let na = cfg.subsystem.unwrap_or(n);
    if na == 0 || na > n {
        return Err(Error::config("subsystem", format!("N_A = {na} outside 1..={n}")));
    }
    Ok((0..na).collect())
}

fn run_entropy(cfg: &ExperimentConfig, state: &DensityState) -> Result<ResultTable> {
    let n = state.num_qubits();
    let a = subsystem(cfg, n)?;
    let rho_a = state.reduced(&a)?;
    let poly = entropy_poly_coeffs(cfg.n_max)?;
    let mut priors: Vec<(String, PseudoState)> = Vec::new();
    for &p in &cfg.priors {
        if let Some(sigma) = prior_on(p, &cfg.state, state, &a)? {
            priors.push((p.to_string(), sigma));
        }
    }
    let runs: Vec<Vec<RunRecord>> = jobs(cfg)
        .par_iter()
        .map(|job| {
            let ds = simulate(state, cfg, job.nu, job.seed)?;
            let std = estimate_entropy_with(&standard_batches(&ds, &a, cfg.batches)?, &poly)?;
            let mut out = vec![run_record(job, "none", "standard", std.value, std.stderr)];
            for (label, sigma) in &priors {
                let crm = estimate_entropy_with(&crm_batches(&ds, Some(sigma), &a, cfg.batches)?, &poly)?;
                out.push(run_record(job, label, "crm", crm.value, crm.stderr));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut series = vec![Series {
        prior: "none".into(),
        estimator: "standard".into(),
        references: entropy_references("standard", &poly, &rho_a)?,
    }];
    for (label, _) in &priors {
        series.push(Series {
            prior: label.clone(),
            estimator: "crm".into(),
            references: entropy_references("crm", &poly, &rho_a)?,
        });
    }
    Ok(aggregate(cfg, n, a.len(), runs.into_iter().flatten().collect(), &series))
}

fn run_fidelity(cfg: &ExperimentConfig, state: &DensityState) -> Result<ResultTable> {
    let n = state.num_qubits();
    let all: Vec<usize> = (0..n).collect();
    let rho = state.matrix();
    let mut targets: Vec<(String, CVector, PseudoState, f64)> = Vec::new();
    for &p in cfg.priors.iter().filter(|p| **p != PriorSpec::None) {
        let phi = prior_vector(p, &cfg.state, state)?;
        let exact = (phi.adjoint() * rho.as_ref() * &phi)[(0, 0)].re;
        targets.push((p.to_string(), phi.clone(), PseudoState::new(all.clone(), outer(&phi))?, exact));
    }
    let runs: Vec<Vec<RunRecord>> = jobs(cfg)
        .par_iter()
        .map(|job| {
            let ds = simulate(state, cfg, job.nu, job.seed)?;
            let mut out = Vec::new();
            for (label, phi, sigma, _) in &targets {
                let std = estimate_fidelity(&ds, None, phi)?;
                let crm = estimate_fidelity(&ds, Some(sigma), phi)?;
                out.push(run_record(job, label, "standard", std.value, std.stderr));
                out.push(run_record(job, label, "crm", crm.value, crm.stderr));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut series = Vec::new();
    for (label, _, _, exact) in &targets {
        for est in ["standard", "crm"] {
            series.push(Series {
                prior: label.clone(),
                estimator: est.into(),
                references: vec![(est.into(), *exact)],
            });
        }
    }
    Ok(aggregate(cfg, n, n, runs.into_iter().flatten().collect(), &series))
}

fn companion_label(nu_prime: usize) -> String {
    format!("companion:nu_prime={nu_prime}")
}

fn run_companion(cfg: &ExperimentConfig, state: &DensityState) -> Result<ResultTable> {
    let n = state.num_qubits();
    let a = subsystem(cfg, n)?;
    let rho_a = state.reduced(&a)?;
    let poly = entropy_poly_coeffs(cfg.n_max)?;
    let companion_desc = cfg.companion_state.as_ref().expect("validated companion config");
    let companion = companion_desc.build()?;
    if companion.num_qubits() != n {
        return Err(Error::config("companion_state", "qubit count differs from `state`"));
    }
    let nm = cfg.nm.expect("validated companion config");
    let desc = companion_desc.to_string();
    let runs: Vec<Vec<RunRecord>> = (0..cfg.repetitions)
        .into_par_iter()
        .map(|rep| {
            // independent companion batches are shared by all N_U of one repetition
            let mut indep = Vec::new();
            for &nu_prime in &cfg.nu_prime {
                let seed = derive_seed(cfg.seed, &[TAG_COMPANION_INDEP, nu_prime as u64, rep as u64]);
                let ds = sample_dataset(&companion, nu_prime, nm, seed, &desc)?;
                indep.push((nu_prime, balanced_standard_batches(&ds, &a, cfg.batches)?));
            }
            let mut out = Vec::new();
            for job in jobs(cfg).iter().filter(|j| j.repetition == rep) {
                let ds = simulate(state, cfg, job.nu, job.seed)?;
                let settings: Vec<_> = ds.settings().cloned().collect();
                let same_seed = derive_seed(cfg.seed, &[TAG_COMPANION_SAME, job.nu as u64, rep as u64]);
                let same = sample_dataset_with_settings(&companion, &settings, nm, same_seed, &desc)?;
                let rho_batches = standard_batches(&ds, &a, cfg.batches)?;
                let same_batches = standard_batches(&same, &a, cfg.batches)?;
                let std = estimate_entropy_with(&rho_batches, &poly)?;
                out.push(run_record(job, "none", "standard", std.value, std.stderr));
                for (nu_prime, sigma_prime) in &indep {
                    let combined = build_companion_batches(&rho_batches, &same_batches, sigma_prime)?;
                    let est = estimate_entropy_with(&combined, &poly)?;
                    out.push(run_record(job, &companion_label(*nu_prime), "companion", est.value, est.stderr));
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut series = vec![Series {
        prior: "none".into(),
        estimator: "standard".into(),
        references: entropy_references("standard", &poly, &rho_a)?,
    }];
    for &nu_prime in &cfg.nu_prime {
        series.push(Series {
            prior: companion_label(nu_prime),
            estimator: "companion".into(),
            references: entropy_references("companion", &poly, &rho_a)?,
        });
    }
    let mut runs: Vec<RunRecord> = runs.into_iter().flatten().collect();
    runs.sort_by_key(|r| (cfg.nu_grid.iter().position(|&v| v == r.nu), r.repetition));
    Ok(aggregate(cfg, n, a.len(), runs, &series))
}

/// Runs the configured experiment. Results depend only on the config.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let state = cfg.state.build()?;
    match cfg.experiment {
        ExperimentKind::Entropy => run_entropy(cfg, &state),
        ExperimentKind::Fidelity => run_fidelity(cfg, &state),
        ExperimentKind::Companion => run_companion(cfg, &state),
    }
}
