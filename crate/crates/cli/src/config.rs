//! Experiment configuration: defaults, a TOML key-value file and command-line
//! overrides, applied in that order.

use std::path::{Path, PathBuf};

use clap::Args;
use nntt::fit::{EnvStorage, FitConfig};
use nntt::XxzParams;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Storage {
    Anchored,
    Full,
}

impl From<Storage> for EnvStorage {
    fn from(s: Storage) -> Self {
        match s {
            Storage::Anchored => EnvStorage::Anchored,
            Storage::Full => EnvStorage::Full,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub sites: usize,
    pub coupling: f64,
    pub anisotropy: f64,
    pub field: f64,
    pub noise: f64,

    pub train: u64,
    pub test: u64,
    /// Seed of the train/test draws.
    pub seed: u64,

    pub bond_dim: usize,
    pub trials: usize,
    pub max_sweeps: usize,
    pub window: usize,
    pub rel_tol: f64,
    pub eps: f64,
    pub base_seed: u64,
    pub storage: Storage,

    /// Write wall-clock times into outputs; when false they are omitted so
    /// that reruns are byte-identical.
    pub record_timing: bool,
    pub out: PathBuf,

    pub scan_sites: Option<Vec<usize>>,
    pub scan_noise: Option<Vec<f64>>,
    pub scan_anisotropy: Option<Vec<f64>>,
    pub scan_bond_dim: Option<Vec<usize>>,
    pub scan_samples: Option<Vec<u64>>,
    pub scan_seeds: Option<Vec<u64>>,
    /// Run the doubling search for the smallest sample count reaching
    /// `ic_target` instead of the plain grid.
    pub min_n: bool,
    pub ic_target: f64,
    pub max_samples: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            sites: 4,
            coupling: 1.0,
            anisotropy: 1.0,
            field: 1.0,
            noise: 0.6,
            train: 1_000_000,
            test: 1_000_000,
            seed: 0,
            bond_dim: 10,
            trials: 20,
            max_sweeps: 2000,
            window: 10,
            rel_tol: 1e-8,
            eps: 1e-16,
            base_seed: 0,
            storage: Storage::Anchored,
            record_timing: true,
            out: PathBuf::from("out"),
            scan_sites: None,
            scan_noise: None,
            scan_anisotropy: None,
            scan_bond_dim: None,
            scan_samples: None,
            scan_seeds: None,
            min_n: false,
            ic_target: 0.01,
            max_samples: 100_000_000,
        }
    }
}

/// One value per scanned axis.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanAxes {
    pub sites: Vec<usize>,
    pub noise: Vec<f64>,
    pub anisotropy: Vec<f64>,
    pub bond_dim: Vec<usize>,
    pub samples: Vec<u64>,
    pub seeds: Vec<u64>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn xxz(&self) -> Result<XxzParams<f64>, CliError> {
        Ok(XxzParams::new(self.sites, self.coupling, self.anisotropy, self.field, self.noise)?)
    }

    pub fn fit_config(&self) -> FitConfig<f64> {
        FitConfig {
            bond_dim: self.bond_dim,
            max_sweeps: self.max_sweeps,
            window: self.window,
            rel_tol: self.rel_tol,
            eps: self.eps,
            trials: self.trials,
            base_seed: self.base_seed,
            storage: self.storage.clone().into(),
            record_updates: false,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.xxz()?;
        self.fit_config().validate()?;
        if self.train == 0 || self.test == 0 {
            return Err(CliError::Invalid("train and test sample counts must be positive".into()));
        }
        if self.ic_target.is_nan() || self.ic_target <= 0.0 {
            return Err(CliError::Invalid("ic_target must be positive".into()));
        }
        Ok(())
    }

    /// Axes for `scan`; an unset axis is the single base value.
    pub fn axes(&self) -> Result<ScanAxes, CliError> {
        fn axis<T: Clone>(name: &str, v: &Option<Vec<T>>, base: T) -> Result<Vec<T>, CliError> {
            match v {
                None => Ok(vec![base]),
                Some(v) if v.is_empty() => Err(CliError::Invalid(format!("scan axis {name} is empty"))),
                Some(v) => Ok(v.clone()),
            }
        }
        Ok(ScanAxes {
            sites: axis("scan_sites", &self.scan_sites, self.sites)?,
            noise: axis("scan_noise", &self.scan_noise, self.noise)?,
            anisotropy: axis("scan_anisotropy", &self.scan_anisotropy, self.anisotropy)?,
            bond_dim: axis("scan_bond_dim", &self.scan_bond_dim, self.bond_dim)?,
            samples: axis("scan_samples", &self.scan_samples, self.train)?,
            seeds: axis("scan_seeds", &self.scan_seeds, self.seed)?,
        })
    }
}

/// Flags shared by every subcommand. Unset flags fall back to the config
/// file, then to the defaults.
#[derive(Args, Clone, Debug, Default)]
pub struct Overrides {
    /// TOML file with experiment settings
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub sites: Option<usize>,
    /// Exchange coupling J
    #[arg(long)]
    pub coupling: Option<f64>,
    /// Anisotropy γ
    #[arg(long)]
    pub anisotropy: Option<f64>,
    /// Longitudinal field h
    #[arg(long)]
    pub field: Option<f64>,
    /// Depolarizing strength p
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub train: Option<u64>,
    #[arg(long)]
    pub test: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub bond_dim: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub max_sweeps: Option<usize>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub rel_tol: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub base_seed: Option<u64>,
    #[arg(long, value_parser = parse_storage)]
    pub storage: Option<Storage>,
    #[arg(long)]
    pub record_timing: Option<bool>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub scan_sites: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub scan_noise: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub scan_anisotropy: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub scan_bond_dim: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub scan_samples: Option<Vec<u64>>,
    #[arg(long, value_delimiter = ',')]
    pub scan_seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub min_n: Option<bool>,
    #[arg(long)]
    pub ic_target: Option<f64>,
    #[arg(long)]
    pub max_samples: Option<u64>,
}

fn parse_storage(s: &str) -> Result<Storage, String> {
    match s {
        "anchored" => Ok(Storage::Anchored),
        "full" => Ok(Storage::Full),
        _ => Err(format!("unknown storage {s:?} (anchored | full)")),
    }
}

macro_rules! overlay {
    ($cfg:ident, $ov:ident; $($f:ident),* $(,)?) => {
        $(if let Some(v) = $ov.$f.clone() { $cfg.$f = v; })*
    };
}

impl Overrides {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        overlay!(cfg, self; sites, coupling, anisotropy, field, noise, train, test, seed,
            bond_dim, trials, max_sweeps, window, rel_tol, eps, base_seed, storage,
            record_timing, out, min_n, ic_target, max_samples);
        if let Some(v) = &self.scan_sites {
            cfg.scan_sites = Some(v.clone());
        }
        if let Some(v) = &self.scan_noise {
            cfg.scan_noise = Some(v.clone());
        }
        if let Some(v) = &self.scan_anisotropy {
            cfg.scan_anisotropy = Some(v.clone());
        }
        if let Some(v) = &self.scan_bond_dim {
            cfg.scan_bond_dim = Some(v.clone());
        }
        if let Some(v) = &self.scan_samples {
            cfg.scan_samples = Some(v.clone());
        }
        if let Some(v) = &self.scan_seeds {
            cfg.scan_seeds = Some(v.clone());
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_flag_over_file_over_default() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "sites = 3\nnoise = 0.2\ntrials = 5\n").unwrap();
        let ov = Overrides { config: Some(path), noise: Some(0.8), ..Default::default() };
        let cfg = ov.resolve().unwrap();
        assert_eq!((cfg.sites, cfg.noise, cfg.trials, cfg.bond_dim), (3, 0.8, 5, 10));
    }

    #[test]
    fn unknown_keys_and_empty_axes_are_rejected() {
        assert!(matches!(ExperimentConfig::from_toml("sitez = 3"), Err(CliError::Config(_))));
        let cfg = ExperimentConfig::from_toml("scan_noise = []").unwrap();
        assert!(matches!(cfg.axes(), Err(CliError::Invalid(_))));
        let axes = ExperimentConfig::default().axes().unwrap();
        assert_eq!(axes.bond_dim, vec![10]);
    }

    #[test]
    fn bad_noise_fails_validation() {
        let cfg = ExperimentConfig { noise: 1.2, ..Default::default() };
        assert!(cfg.validate().is_err());
    }
}
