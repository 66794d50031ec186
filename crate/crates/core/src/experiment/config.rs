use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use crate::observables::MAX_NMAX;
use crate::qcore::linalg::MAX_REDUCED_QUBITS;
use crate::statesrc::StateDescriptor;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ExperimentKind {
    Entropy,
    Fidelity,
    Companion,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Entropy => "entropy",
            Self::Fidelity => "fidelity",
            Self::Companion => "companion",
        })
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "entropy" => Ok(Self::Entropy),
            "fidelity" => Ok(Self::Fidelity),
            "companion" => Ok(Self::Companion),
            _ => Err(Error::config("experiment", format!("unknown experiment `{s}`"))),
        }
    }
}

/// Classical prior: none (standard shadows), a bond-truncated copy of the
/// noiseless state, or the exact state itself.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum PriorSpec {
    None,
    Mps { chi: usize },
    Exact,
}

impl fmt::Display for PriorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::None => f.write_str("none"),
            Self::Mps { chi } => write!(f, "mps:chi={chi}"),
            Self::Exact => f.write_str("exact"),
        }
    }
}

impl FromStr for PriorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "exact" => Ok(Self::Exact),
            _ => match s.strip_prefix("mps:chi=").map(str::parse::<usize>) {
                Some(Ok(chi)) if chi >= 1 => Ok(Self::Mps { chi }),
                _ => Err(Error::Parse(format!("unknown prior descriptor `{s}`"))),
            },
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: String,
    state: String,
    subsystem: Option<usize>,
    #[serde(default)]
    priors: Vec<String>,
    n_max: Option<usize>,
    batches: Option<usize>,
    nu_grid: Vec<usize>,
    nm: Option<usize>,
    #[serde(default)]
    exact_mode: bool,
    repetitions: usize,
    seed: u64,
    output: Option<PathBuf>,
    companion_state: Option<String>,
    #[serde(default)]
    nu_prime: Vec<usize>,
}

/// A validated experiment description.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub state: StateDescriptor,
    /// `N_A`: the subsystem is qubits `0..N_A`. `None` means the full
    /// register (fidelity experiments only).
    pub subsystem: Option<usize>,
    pub priors: Vec<PriorSpec>,
    pub n_max: usize,
    pub batches: usize,
    pub nu_grid: Vec<usize>,
    /// `None` in exact mode.
    pub nm: Option<usize>,
    pub repetitions: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub companion_state: Option<StateDescriptor>,
    pub nu_prime: Vec<usize>,
}

fn require<T>(value: Option<T>, field: &str, kind: ExperimentKind) -> Result<T> {
    value.ok_or_else(|| Error::config(field, format!("required for the {kind} experiment")))
}

/// Key of the TOML line a deserialization error points at.
fn offending_key(source: &str, err: &toml::de::Error) -> String {
    err.span()
        .and_then(|span| {
            let line_start = source[..span.start].rfind('\n').map_or(0, |i| i + 1);
            let line = &source[line_start..];
            let line = line.split('\n').next().unwrap_or("");
            line.split_once('=').map(|(k, _)| k.trim().to_string())
        })
        .filter(|k| !k.is_empty())
        .unwrap_or_else(|| "config".to_string())
}

impl ExperimentConfig {
    pub fn from_toml_str(source: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(source).map_err(|e| {
            let message = e.message().to_string();
            let field = match message.strip_prefix("missing field `") {
                Some(rest) => rest.trim_end_matches('`').to_string(),
                None => offending_key(source, &e),
            };
            Error::config(field, message)
        })?;
        Self::from_raw(raw)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    fn from_raw(raw: RawConfig) -> Result<Self> {
        let experiment: ExperimentKind = raw.experiment.parse()?;
        let state: StateDescriptor = raw.state.parse().map_err(|e: Error| Error::config("state", e.to_string()))?;
        let mut priors = Vec::new();
        for p in &raw.priors {
            let prior: PriorSpec = p.parse().map_err(|e: Error| Error::config("priors", e.to_string()))?;
            if !priors.contains(&prior) {
                priors.push(prior);
            }
        }
        if raw.repetitions == 0 {
            return Err(Error::config("repetitions", "must be >= 1"));
        }
        if raw.nu_grid.is_empty() || raw.nu_grid.contains(&0) {
            return Err(Error::config("nu_grid", "needs at least one value, all >= 1"));
        }
        let nm = match (raw.exact_mode, raw.nm) {
            (true, None) => None,
            (true, Some(_)) => return Err(Error::config("nm", "must be absent in exact mode")),
            (false, None) => return Err(Error::config("nm", "required unless exact_mode = true")),
            (false, Some(0)) => return Err(Error::config("nm", "must be >= 1")),
            (false, Some(nm)) => Some(nm),
        };
        if let (Some(na), Some(n)) = (raw.subsystem, state.num_qubits()) {
            if na == 0 || na > n {
                return Err(Error::config("subsystem", format!("N_A = {na} outside 1..={n}")));
            }
        }

        let mut cfg = Self {
            experiment,
            state,
            subsystem: raw.subsystem,
            priors,
            n_max: 0,
            batches: 0,
            nu_grid: raw.nu_grid,
            nm,
            repetitions: raw.repetitions,
            seed: raw.seed,
            output: raw.output,
            companion_state: None,
            nu_prime: raw.nu_prime,
        };
        match experiment {
            ExperimentKind::Fidelity => {
                if cfg.priors.iter().all(|p| *p == PriorSpec::None) {
                    return Err(Error::config("priors", "fidelity needs at least one target prior"));
                }
                if let (Some(na), Some(n)) = (cfg.subsystem, cfg.state.num_qubits()) {
                    if na != n {
                        return Err(Error::config("subsystem", "fidelity is estimated on the full register"));
                    }
                }
            }
            ExperimentKind::Entropy | ExperimentKind::Companion => {
                let na = require(cfg.subsystem, "subsystem", experiment)?;
                if na > MAX_REDUCED_QUBITS {
                    return Err(Error::config("subsystem", format!("N_A = {na} exceeds {MAX_REDUCED_QUBITS}")));
                }
                cfg.n_max = require(raw.n_max, "n_max", experiment)?;
                if !(1..=MAX_NMAX).contains(&cfg.n_max) {
                    return Err(Error::config("n_max", format!("must lie in 1..={MAX_NMAX}")));
                }
                cfg.batches = require(raw.batches, "batches", experiment)?;
                if cfg.batches < cfg.n_max {
                    return Err(Error::config("batches", format!("need at least n_max = {} batches", cfg.n_max)));
                }
                if let Some(nu) = cfg.nu_grid.iter().find(|&&nu| nu % cfg.batches != 0) {
                    return Err(Error::config("nu_grid", format!("N_U = {nu} not divisible by {} batches", cfg.batches)));
                }
            }
        }
        if experiment == ExperimentKind::Companion {
            let desc = require(raw.companion_state, "companion_state", experiment)?;
            let companion: StateDescriptor =
                desc.parse().map_err(|e: Error| Error::config("companion_state", e.to_string()))?;
            if companion.num_qubits().is_some() && companion.num_qubits() != cfg.state.num_qubits() {
                return Err(Error::config("companion_state", "qubit count differs from `state`"));
            }
            cfg.companion_state = Some(companion);
            if cfg.nu_prime.is_empty() || cfg.nu_prime.iter().any(|&v| v < cfg.batches) {
                return Err(Error::config("nu_prime", format!("needs values >= {} batches", cfg.batches)));
            }
            if cfg.nm.is_none() {
                return Err(Error::config("exact_mode", "companion experiments need finite N_M"));
            }
        } else if !cfg.nu_prime.is_empty() {
            return Err(Error::config("nu_prime", "only valid for the companion experiment"));
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ENTROPY: &str = r#"
experiment = "entropy"
state = "ising:N=8"
subsystem = 4
priors = ["none", "mps:chi=2"]
n_max = 3
batches = 3
nu_grid = [9, 27]
nm = 100
repetitions = 2
seed = 1
"#;

    fn field_of(src: &str) -> String {
        match ExperimentConfig::from_toml_str(src) {
            Err(Error::Config { field, .. }) => field,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn parses_entropy_config() {
        let c = ExperimentConfig::from_toml_str(ENTROPY).unwrap();
        assert_eq!(c.experiment, ExperimentKind::Entropy);
        assert_eq!(c.priors, vec![PriorSpec::None, PriorSpec::Mps { chi: 2 }]);
        assert_eq!(c.nm, Some(100));
    }

    #[test]
    fn errors_name_the_field() {
        assert_eq!(field_of(&ENTROPY.replace("ising:N=8", "isinq:N=8")), "state");
        assert_eq!(field_of(&ENTROPY.replace("mps:chi=2", "mps:chi=0")), "priors");
        assert_eq!(field_of(&ENTROPY.replace("nm = 100", "nm = \"x\"")), "nm");
        assert_eq!(field_of(&ENTROPY.replace("nu_grid = [9, 27]", "nu_grid = [10]")), "nu_grid");
        assert_eq!(field_of(&ENTROPY.replace("repetitions = 2", "repetitions = 0")), "repetitions");
        assert_eq!(field_of(&ENTROPY.replace("seed = 1\n", "")), "seed");
        assert_eq!(field_of(&ENTROPY.replace("subsystem = 4", "subsystem = 9")), "subsystem");
        assert_eq!(field_of(&ENTROPY.replace("batches = 3", "batches = 2")), "batches");
        assert_eq!(field_of(&ENTROPY.replace("entropy", "magic")), "experiment");
        assert_eq!(field_of(&format!("{ENTROPY}bogus = 1\n")), "bogus");
        assert_eq!(field_of(&ENTROPY.replace("experiment = \"entropy\"", "experiment = \"companion\"")), "companion_state");
    }

    #[test]
    fn prior_round_trip() {
        for s in ["none", "exact", "mps:chi=3"] {
            assert_eq!(s.parse::<PriorSpec>().unwrap().to_string(), s);
        }
    }
}
