//! Run configuration for `rank`: a JSON file merged with command-line flags.
//! Flags take precedence. Relative paths in a config file are resolved
//! against the file's directory.

use std::fs;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};

use replica_rank::{AcceptTiming, EstimatorVariant, FaultModel};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub matrix: Option<PathBuf>,
    /// Candidate replica sites; all catalog sites when absent.
    pub sites: Option<Vec<String>>,
    /// `Name:count,...`
    pub clients: Option<String>,
    pub n: Option<usize>,
    pub f: Option<usize>,
    pub estimator: Option<EstimatorVariant>,
    pub accept_timing: Option<AcceptTiming>,
    pub fault_model: Option<FaultModel>,
    pub output: Option<PathBuf>,
    pub workers: Option<usize>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let mut cfg: ConfigFile = serde_json::from_str(&text)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.matrix, &mut cfg.output].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Fields set in `flags` override those in `self`.
    pub fn merge(self, flags: ConfigFile) -> ConfigFile {
        ConfigFile {
            matrix: flags.matrix.or(self.matrix),
            sites: flags.sites.or(self.sites),
            clients: flags.clients.or(self.clients),
            n: flags.n.or(self.n),
            f: flags.f.or(self.f),
            estimator: flags.estimator.or(self.estimator),
            accept_timing: flags.accept_timing.or(self.accept_timing),
            fault_model: flags.fault_model.or(self.fault_model),
            output: flags.output.or(self.output),
            workers: flags.workers.or(self.workers),
        }
    }

    pub fn resolve(self) -> Result<RunConfig, CliError> {
        let mut missing = Vec::new();
        if self.matrix.is_none() {
            missing.push("missing --matrix".to_owned());
        }
        if self.clients.is_none() {
            missing.push("missing --clients".to_owned());
        }
        if self.n.is_none() {
            missing.push("missing --n".to_owned());
        }
        if self.output.is_none() {
            missing.push("missing --out".to_owned());
        }
        let workers = NonZeroUsize::new(self.workers.unwrap_or(1));
        if workers.is_none() {
            missing.push("worker count must be at least 1".to_owned());
        }
        if !missing.is_empty() {
            return Err(CliError::Input(missing));
        }
        let n = self.n.unwrap_or_default();
        let fault_model = self.fault_model.unwrap_or_default();
        Ok(RunConfig {
            matrix: self.matrix.unwrap_or_default(),
            sites: self.sites,
            clients: self.clients.unwrap_or_default(),
            n,
            f: self.f.unwrap_or_else(|| default_f(n, fault_model)),
            estimator: self.estimator.unwrap_or_default(),
            accept_timing: self.accept_timing.unwrap_or_default(),
            fault_model,
            output: self.output.unwrap_or_default(),
            workers: workers.unwrap_or(NonZeroUsize::MIN),
        })
    }
}

/// Largest fault bound `n` replicas tolerate under `model`.
pub fn default_f(n: usize, model: FaultModel) -> usize {
    let n = n.max(1);
    match model {
        FaultModel::Bft => (n - 1) / 3,
        FaultModel::Cft => (n - 1) / 2,
    }
}

/// Fully resolved `rank` settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub matrix: PathBuf,
    pub sites: Option<Vec<String>>,
    pub clients: String,
    pub n: usize,
    /// Defaults to [`default_f`].
    pub f: usize,
    pub estimator: EstimatorVariant,
    pub accept_timing: AcceptTiming,
    pub fault_model: FaultModel,
    pub output: PathBuf,
    pub workers: NonZeroUsize,
}
