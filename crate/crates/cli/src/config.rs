//! Flat `section.key = value` configuration.
//!
//! Every recognised key has a default; files and `--set` overrides may only
//! touch keys from [`DEFAULTS`]. The fully resolved map is what gets written
//! into each output header.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ini::Ini;
use qkrylov::estimators::{FidelityBackend, ShotModel};
use qkrylov::geig::Backend;
use qkrylov::models::{self, ModelSpec};
use qkrylov::subspace::{HElementPath, PencilKind};
use qkrylov::workflows::{EstimatorKind, FilterSpec, RunConfig, ShiftPolicy, SymmetryKind, WindowPreset};
use qkrylov::{PauliSumHamiltonian, StateVector};
use serde::de::DeserializeOwned;

use crate::CliError;

/// Recognised keys and their defaults. An empty default means "unset".
pub const DEFAULTS: &[(&str, &str)] = &[
    ("model.family", "tfim"),
    ("model.n_qubits", "8"),
    ("model.coupling", "1.0"),
    ("model.field", "1.0"),
    ("model.delta", "1.0"),
    ("model.path", ""),
    // plus | vacuum | hartree_fock | basis | block | singlet
    ("reference.state", "plus"),
    ("reference.particles", ""),
    ("reference.bits", ""),
    ("reference.block", "4"),
    ("reference.pattern_a", ""),
    ("reference.pattern_b", ""),
    ("run.method", "KDM_U"),
    ("run.tau", "0.1"),
    ("run.m_max", "10"),
    ("run.shift", "mid_spectrum"),
    ("run.estimator", "direct"),
    ("run.svd_threshold", "auto"),
    ("run.backend", "svd_regularized"),
    ("run.h_path", "toeplitz"),
    ("run.variance_tol", "1e-8"),
    ("run.symmetry", "particle_number"),
    ("run.two_fidelity", "false"),
    ("run.fidelity_backend", "swap"),
    // ground | nearest
    ("run.error_reference", "ground"),
    // none | window | narrow | wide | dft
    ("filter.type", "none"),
    ("filter.e_min", ""),
    ("filter.e_max", ""),
    ("filter.j", "5"),
    ("shots.mode", "exact"),
    ("shots.count", "10000"),
    ("shots.seed", "0"),
    // field | coupling | delta | tau
    ("sweep.parameter", "field"),
    ("sweep.start", "0.2"),
    ("sweep.stop", "2.0"),
    ("sweep.points", "10"),
    ("sweep.values", ""),
    // standard | dft
    ("hyperopt.candidates", "standard"),
    ("spectrum.levels", "16"),
    ("output.dir", "out"),
    ("output.prefix", ""),
];

/// Resolved key/value map.
#[derive(Debug, Clone)]
pub struct Config {
    entries: BTreeMap<String, String>,
    base_dir: PathBuf,
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl Config {
    /// Defaults only.
    pub fn defaults() -> Self {
        let entries = DEFAULTS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        Config { entries, base_dir: PathBuf::from(".") }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_ini_str(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        if cfg.get("output.prefix").is_empty() {
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("run").to_string();
            cfg.entries.insert("output.prefix".into(), stem);
        }
        Ok(cfg)
    }

    pub fn from_ini_str(text: &str) -> Result<Self, CliError> {
        let ini = Ini::load_from_str(text).map_err(|e| config_error(format!("config syntax: {e}")))?;
        let mut cfg = Self::defaults();
        for (section, props) in ini.iter() {
            let Some(section) = section else {
                if let Some((k, _)) = props.iter().next() {
                    return Err(config_error(format!("key {k:?} outside any section")));
                }
                continue;
            };
            for (k, v) in props.iter() {
                cfg.set(&format!("{section}.{k}"), v)?;
            }
        }
        Ok(cfg)
    }

    /// Set one known key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match self.entries.get_mut(key) {
            Some(slot) => {
                *slot = value.trim().to_string();
                Ok(())
            }
            None => Err(config_error(format!("unknown config key {key:?}"))),
        }
    }

    /// Apply a `section.key=value` override.
    pub fn apply_override(&mut self, spec: &str) -> Result<(), CliError> {
        let (k, v) = spec.split_once('=').ok_or_else(|| config_error(format!("override {spec:?} is not key=value")))?;
        self.set(k.trim(), v)
    }

    pub fn get(&self, key: &str) -> &str {
        self.entries.get(key).map(String::as_str).expect("key listed in DEFAULTS")
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.get(key);
        raw.parse().map_err(|e| config_error(format!("{key} = {raw:?}: {e}")))
    }

    fn optional<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        if self.get(key).is_empty() {
            Ok(None)
        } else {
            self.parse(key).map(Some)
        }
    }

    fn finite(&self, key: &str) -> Result<f64, CliError> {
        let x: f64 = self.parse(key)?;
        if x.is_finite() {
            Ok(x)
        } else {
            Err(config_error(format!("{key} must be finite")))
        }
    }

    /// Enums spelled the way they serialize.
    fn named<T: DeserializeOwned>(&self, key: &str) -> Result<T, CliError> {
        let raw = self.get(key);
        serde_json::from_value(serde_json::Value::String(raw.to_string()))
            .map_err(|_| config_error(format!("{key} = {raw:?} is not a recognised value")))
    }

    pub fn model(&self) -> Result<ModelSpec, CliError> {
        let n_qubits = self.parse("model.n_qubits")?;
        Ok(match self.get("model.family") {
            "tfim" => ModelSpec::Tfim { n_qubits, coupling: self.finite("model.coupling")?, field: self.finite("model.field")? },
            "heisenberg_xxz" => ModelSpec::HeisenbergXxz { n_qubits, delta: self.finite("model.delta")? },
            "h2_sto3g" => ModelSpec::H2Sto3g,
            "file" => {
                let p = self.get("model.path");
                if p.is_empty() {
                    return Err(config_error("model.family = file needs model.path"));
                }
                ModelSpec::File { path: self.base_dir.join(p) }
            }
            other => return Err(config_error(format!("unknown model.family {other:?}"))),
        })
    }

    /// Copy with one swept parameter replaced.
    pub fn with_value(&self, parameter: &str, value: f64) -> Result<Config, CliError> {
        let mut c = self.clone();
        let key = if parameter == "tau" { "run.tau".to_string() } else { format!("model.{parameter}") };
        c.set(&key, &value.to_string())?;
        Ok(c)
    }

    pub fn hamiltonian(&self) -> Result<PauliSumHamiltonian, CliError> {
        Ok(self.model()?.build()?)
    }

    pub fn reference(&self, h: &PauliSumHamiltonian) -> Result<StateVector, CliError> {
        let n = h.n_qubits();
        Ok(match self.get("reference.state") {
            "plus" => models::plus_state(n),
            "vacuum" => StateVector::vacuum(n),
            "hartree_fock" => {
                let eta = self.optional::<usize>("reference.particles")?.unwrap_or(n / 2);
                models::hartree_fock_state(n, eta)?
            }
            "basis" => StateVector::basis_state(n, self.get("reference.bits"))?,
            "block" => {
                let ModelSpec::Tfim { coupling, field, .. } = self.model()? else {
                    return Err(config_error("reference.state = block needs model.family = tfim"));
                };
                models::tfim_block_reference(n, coupling, field, self.parse("reference.block")?)?
            }
            "singlet" => models::singlet_ansatz(n, self.get("reference.pattern_a"), self.get("reference.pattern_b"))?,
            other => return Err(config_error(format!("unknown reference.state {other:?}"))),
        })
    }

    pub fn shot_model(&self) -> Result<ShotModel, CliError> {
        match self.get("shots.mode") {
            "exact" => Ok(ShotModel::exact()),
            "sampled" => {
                let count: u64 = self.parse("shots.count")?;
                if count == 0 {
                    return Err(config_error("shots.count must be positive"));
                }
                Ok(ShotModel::sampled(count, self.parse("shots.seed")?))
            }
            other => Err(config_error(format!("unknown shots.mode {other:?}"))),
        }
    }

    pub fn filter(&self) -> Result<Option<FilterSpec>, CliError> {
        let j = || self.parse::<usize>("filter.j");
        Ok(match self.get("filter.type") {
            "none" => None,
            "dft" => Some(FilterSpec::Dft),
            "narrow" => Some(FilterSpec::Preset { preset: WindowPreset::Narrow, j: j()? }),
            "wide" => Some(FilterSpec::Preset { preset: WindowPreset::Wide, j: j()? }),
            "window" => {
                let (Some(e_min), Some(e_max)) = (self.optional("filter.e_min")?, self.optional("filter.e_max")?) else {
                    return Err(config_error("filter.type = window needs filter.e_min and filter.e_max"));
                };
                Some(FilterSpec::Window { e_min, e_max, j: j()? })
            }
            other => return Err(config_error(format!("unknown filter.type {other:?}"))),
        })
    }

    pub fn run_config(&self) -> Result<RunConfig, CliError> {
        let svd_threshold = match self.get("run.svd_threshold") {
            "auto" | "" => None,
            _ => Some(self.parse("run.svd_threshold")?),
        };
        let backend: Backend = self.parse("run.backend")?;
        let cfg = RunConfig {
            method: self.parse::<PencilKind>("run.method")?,
            tau: self.finite("run.tau")?,
            m_max: self.parse("run.m_max")?,
            filter: self.filter()?,
            shot: self.shot_model()?,
            svd_threshold,
            shift: self.parse::<ShiftPolicy>("run.shift")?,
            estimator: self.named::<EstimatorKind>("run.estimator")?,
            fidelity_backend: self.named::<FidelityBackend>("run.fidelity_backend")?,
            symmetry: self.named::<SymmetryKind>("run.symmetry")?,
            two_fidelity: self.parse("run.two_fidelity")?,
            backend,
            h_path: self.named::<HElementPath>("run.h_path")?,
            variance_tol: self.finite("run.variance_tol")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn error_reference_nearest(&self) -> Result<bool, CliError> {
        match self.get("run.error_reference") {
            "ground" => Ok(false),
            "nearest" => Ok(true),
            other => Err(config_error(format!("unknown run.error_reference {other:?}"))),
        }
    }

    pub fn sweep_axis(&self) -> Result<(String, Vec<f64>), CliError> {
        let parameter = self.get("sweep.parameter").to_string();
        if !matches!(parameter.as_str(), "field" | "coupling" | "delta" | "tau") {
            return Err(config_error(format!("cannot sweep {parameter:?}")));
        }
        let explicit = self.get("sweep.values");
        let values = if explicit.is_empty() {
            let (start, stop) = (self.finite("sweep.start")?, self.finite("sweep.stop")?);
            let points: usize = self.parse("sweep.points")?;
            match points {
                0 => Vec::new(),
                1 => vec![start],
                _ => (0..points).map(|i| start + (stop - start) * i as f64 / (points - 1) as f64).collect(),
            }
        } else {
            explicit
                .split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|e| config_error(format!("sweep.values entry {v:?}: {e}"))))
                .collect::<Result<_, _>>()?
        };
        if values.is_empty() {
            return Err(config_error("sweep axis is empty"));
        }
        Ok((parameter, values))
    }

    pub fn output_dir(&self) -> PathBuf {
        PathBuf::from(self.get("output.dir"))
    }

    pub fn prefix(&self) -> &str {
        match self.get("output.prefix") {
            "" => "run",
            p => p,
        }
    }
}
