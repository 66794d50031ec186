//! `crmshadow`: coefficients, simulation, estimation, experiments and bounds.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crm_shadows::experiment::{prior_on, prior_vector, run_experiment, ExperimentConfig, ExperimentKind, PriorSpec};
use crm_shadows::measurement::{load_dataset, sample_dataset, save_dataset, Dataset};
use crm_shadows::observables::{alpha, entropy_poly_coeffs, estimate_entropy_poly, estimate_fidelity, estimate_pauli,
    estimate_trace_moment};
use crm_shadows::qcore::{DensityState, PauliString, PseudoState};
use crm_shadows::shadows::crm_batches;
use crm_shadows::statesrc::{read_matrix_file, StateDescriptor};
use crm_shadows::variance::{
    exact_leading_variance, mco_variance_bound, pauli_variance_bound, pauli_variance_exact, ReducedOneCopyOperator,
    MAX_ENUMERATION_QUBITS,
};
use crm_shadows::{Error, Result};

#[derive(Parser)]
#[command(name = "crmshadow", version, about = "Classical shadows with common randomized measurements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Entropy polynomial coefficients a_n and the sup-error alpha_K.
    Coeffs {
        #[arg(long)]
        nmax: usize,
    },
    /// Sample a dataset of randomized Pauli measurements as JSONL.
    Simulate {
        #[arg(long)]
        state: StateDescriptor,
        #[arg(long)]
        nu: usize,
        #[arg(long)]
        nm: usize,
        #[arg(long)]
        seed: u64,
        /// Defaults to stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Estimate from a stored dataset.
    #[command(subcommand)]
    Estimate(Estimate),
    /// Run an experiment described by a TOML config and write its CSV.
    Exp {
        kind: ExperimentKind,
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's `output`; stdout if neither is set.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Analytic variances for a Pauli or shift-operator estimator.
    Bounds(BoundsArgs),
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    data: PathBuf,
    /// `none`, `exact`, `mps:chi=K` (built from the dataset's state) or
    /// `file:<path>` (a dense matrix on the estimator's support).
    #[arg(long, default_value = "none")]
    prior: String,
}

#[derive(Args)]
struct BatchArgs {
    /// `N_A`: the subsystem is qubits `0..N_A`.
    #[arg(long)]
    subsystem: usize,
    #[arg(long)]
    batches: usize,
}

#[derive(Subcommand)]
enum Estimate {
    Pauli {
        #[command(flatten)]
        data: DataArgs,
        /// Pauli string over all qubits, e.g. `XZI`.
        #[arg(long)]
        pauli: PauliString,
    },
    Moment {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        batch: BatchArgs,
        #[arg(long)]
        order: usize,
    },
    Entropy {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        batch: BatchArgs,
        #[arg(long)]
        nmax: usize,
    },
    Fidelity {
        #[command(flatten)]
        data: DataArgs,
        /// Target state: `exact` or `mps:chi=K`, built from the dataset's state.
        #[arg(long)]
        target: PriorSpec,
    },
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long)]
    state: StateDescriptor,
    #[arg(long)]
    nu: usize,
    /// Omit for the infinite-shot limit.
    #[arg(long)]
    nm: Option<usize>,
    #[arg(long, default_value = "none")]
    prior: PriorSpec,
    /// Pauli observable over all qubits.
    #[arg(long, conflicts_with_all = ["subsystem", "copies"])]
    pauli: Option<PauliString>,
    /// `N_A` for the n-copy shift operator on qubits `0..N_A`.
    #[arg(long, requires = "copies")]
    subsystem: Option<usize>,
    #[arg(long, requires = "subsystem")]
    copies: Option<usize>,
}

fn usage_error(field: &str, msg: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        msg: msg.into(),
    }
}

fn dataset_state(ds: &Dataset) -> Result<(StateDescriptor, DensityState)> {
    let desc: StateDescriptor = ds.meta.state.parse()?;
    let state = desc.build()?;
    if state.num_qubits() != ds.num_qubits() {
        return Err(Error::Validation(format!(
            "dataset has {} qubits but its state `{desc}` has {}",
            ds.num_qubits(),
            state.num_qubits()
        )));
    }
    Ok((desc, state))
}

fn load_prior(prior: &str, ds: &Dataset, support: &[usize]) -> Result<Option<PseudoState>> {
    if let Some(path) = prior.strip_prefix("file:") {
        return PseudoState::new(support.to_vec(), read_matrix_file(path.as_ref())?).map(Some);
    }
    let spec: PriorSpec = prior.parse()?;
    if spec == PriorSpec::None {
        return Ok(None);
    }
    let (desc, state) = dataset_state(ds)?;
    prior_on(spec, &desc, &state, support)
}

fn subsystem(ds: &Dataset, na: usize) -> Result<Vec<usize>> {
    if na == 0 || na > ds.num_qubits() {
        return Err(usage_error("subsystem", format!("N_A = {na} outside 1..={}", ds.num_qubits())));
    }
    Ok((0..na).collect())
}

fn report(estimator: &str, prior: &str, r: impl serde::Serialize) -> Result<Value> {
    let mut v = serde_json::to_value(r)?;
    v["estimator"] = json!(estimator);
    v["prior"] = json!(prior);
    Ok(v)
}

fn estimate(cmd: Estimate) -> Result<Value> {
    match cmd {
        Estimate::Pauli { data, pauli } => {
            let ds = load_dataset(&data.data)?;
            if pauli.len() != ds.num_qubits() {
                return Err(usage_error("pauli", format!("expected {} letters", ds.num_qubits())));
            }
            let sigma = load_prior(&data.prior, &ds, &(0..ds.num_qubits()).collect::<Vec<_>>())?;
            let mut v = report("pauli", &data.prior, estimate_pauli(&ds, sigma.as_ref(), &pauli)?)?;
            v["pauli"] = json!(pauli.to_string());
            Ok(v)
        }
        Estimate::Moment { data, batch, order } => {
            let ds = load_dataset(&data.data)?;
            let support = subsystem(&ds, batch.subsystem)?;
            let sigma = load_prior(&data.prior, &ds, &support)?;
            let batches = crm_batches(&ds, sigma.as_ref(), &support, batch.batches)?;
            let mut v = report("moment", &data.prior, estimate_trace_moment(&batches, order)?)?;
            v["budget"]["nm"] = json!(ds.meta.nm);
            v["order"] = json!(order);
            v["subsystem"] = json!(batch.subsystem);
            Ok(v)
        }
        Estimate::Entropy { data, batch, nmax } => {
            let ds = load_dataset(&data.data)?;
            let support = subsystem(&ds, batch.subsystem)?;
            let sigma = load_prior(&data.prior, &ds, &support)?;
            let batches = crm_batches(&ds, sigma.as_ref(), &support, batch.batches)?;
            let mut v = report("entropy", &data.prior, estimate_entropy_poly(&batches, nmax)?)?;
            v["budget"]["nm"] = json!(ds.meta.nm);
            v["n_max"] = json!(nmax);
            v["subsystem"] = json!(batch.subsystem);
            Ok(v)
        }
        Estimate::Fidelity { data, target } => {
            if target == PriorSpec::None {
                return Err(usage_error("target", "fidelity needs a target state"));
            }
            let ds = load_dataset(&data.data)?;
            let (desc, state) = dataset_state(&ds)?;
            let psi = prior_vector(target, &desc, &state)?;
            let sigma = load_prior(&data.prior, &ds, &(0..ds.num_qubits()).collect::<Vec<_>>())?;
            let mut v = report("fidelity", &data.prior, estimate_fidelity(&ds, sigma.as_ref(), &psi)?)?;
            v["target"] = json!(target.to_string());
            Ok(v)
        }
    }
}

fn bounds(args: BoundsArgs) -> Result<Value> {
    let state = args.state.build()?;
    let n = state.num_qubits();
    if let Some(gamma) = args.pauli {
        if gamma.len() != n {
            return Err(usage_error("pauli", format!("expected {n} letters")));
        }
        let all: Vec<usize> = (0..n).collect();
        let sigma = prior_on(args.prior, &args.state, &state, &all)?;
        let rho = state.matrix();
        return Ok(json!({
            "observable": gamma.to_string(),
            "prior": args.prior.to_string(),
            "nu": args.nu,
            "nm": args.nm,
            "variance_exact": pauli_variance_exact(&gamma, &rho, sigma.as_ref(), args.nu, args.nm)?,
            "variance_bound": pauli_variance_bound(&gamma, &rho, sigma.as_ref(), args.nu, args.nm)?,
        }));
    }
    let (Some(na), Some(copies)) = (args.subsystem, args.copies) else {
        return Err(usage_error("pauli", "give either --pauli or --subsystem with --copies"));
    };
    if na == 0 || na > n {
        return Err(usage_error("subsystem", format!("N_A = {na} outside 1..={n}")));
    }
    let support: Vec<usize> = (0..na).collect();
    let rho_a = state.reduced(&support)?;
    let sigma = prior_on(args.prior, &args.state, &state, &support)?;
    let sigma_a = sigma.as_ref().map(PseudoState::matrix);
    let o1 = ReducedOneCopyOperator::shift(&rho_a, copies)?;
    let bound = mco_variance_bound(&o1, &rho_a, sigma_a, copies, args.nu, args.nm)?;
    let mut v = serde_json::to_value(&bound)?;
    v["observable"] = json!(format!("shift:n={copies}"));
    v["prior"] = json!(args.prior.to_string());
    if na <= MAX_ENUMERATION_QUBITS {
        let v1 = exact_leading_variance(&o1, &rho_a, sigma_a, args.nm)?;
        v["v1"] = json!(v1);
        v["variance_leading"] = json!((copies * copies) as f64 * v1 / args.nu as f64);
    }
    Ok(v)
}

fn coeffs(nmax: usize) -> Result<Value> {
    let poly = entropy_poly_coeffs(nmax)?;
    let exact = poly.exact_coefficients().unwrap_or_default();
    let rows: Vec<Value> = poly
        .coefficients()
        .iter()
        .enumerate()
        .map(|(i, a)| json!({ "n": i + 1, "exact": exact.get(i).map(|r| r.to_string()), "value": a }))
        .collect();
    Ok(json!({ "n_max": nmax, "coefficients": rows, "alpha": alpha(&poly) }))
}

fn exp(kind: ExperimentKind, config: PathBuf, output: Option<PathBuf>) -> Result<()> {
    let cfg = ExperimentConfig::load(&config)?;
    if cfg.experiment != kind {
        return Err(usage_error(
            "experiment",
            format!("config describes a {} experiment, not {kind}", cfg.experiment),
        ));
    }
    let table = run_experiment(&cfg)?;
    match output.or(cfg.output.clone()) {
        Some(path) => table.write_csv(&path),
        None => Ok(std::io::stdout().write_all(table.to_csv().as_bytes())?),
    }
}

fn run(cli: Cli) -> Result<()> {
    let value = match cli.command {
        Command::Coeffs { nmax } => coeffs(nmax)?,
        Command::Simulate {
            state,
            nu,
            nm,
            seed,
            output,
        } => {
            let ds = sample_dataset(&state.build()?, nu, nm, seed, &state.to_string())?;
            return match output {
                Some(path) => save_dataset(&ds, path),
                None => crm_shadows::measurement::write_dataset(&ds, std::io::stdout().lock()),
            };
        }
        Command::Estimate(cmd) => estimate(cmd)?,
        Command::Exp { kind, config, output } => return exp(kind, config, output),
        Command::Bounds(args) => bounds(args)?,
    };
    println!("{value}");
    Ok(())
}

fn error_line(kind: &str, field: Option<&str>, message: &str) {
    eprintln!("{}", json!({ "error": kind, "field": field, "message": message }));
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.to_string();
            let body = rendered.split("\n\n").next().unwrap_or("");
            let message = body.trim_start_matches("error: ").split_whitespace().collect::<Vec<_>>().join(" ");
            error_line("usage", None, &message);
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                Error::Config { field, msg } => error_line(e.kind(), Some(field), msg),
                _ => error_line(e.kind(), None, &e.to_string()),
            }
            ExitCode::FAILURE
        }
    }
}
