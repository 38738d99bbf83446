//! Solver settings, merged as flags > config file > preset > defaults.

use std::path::Path;

use anyhow::{Context, Result};
use clap::Args;
use serde::Deserialize;
use ttrs_core::{HybridConfig, Preset};

#[derive(Debug, Clone, Default, Args)]
pub struct SolverArgs {
    /// Stopping tolerance of ADMM and of the global certificate [default: 1e-7]
    #[arg(long)]
    pub tol: Option<f64>,
    /// ADMM iterations per starting point [default: 1000]
    #[arg(long)]
    pub maxiter: Option<usize>,
    /// ADMM parameter preset: class2, class3 or class4 [default: class2]
    #[arg(long)]
    pub preset: Option<Preset>,
    /// Penalty parameter, overriding the preset
    #[arg(long)]
    pub rho: Option<f64>,
    /// Dual step in (0, 1), overriding the preset
    #[arg(long)]
    pub tau: Option<f64>,
    /// TOML file with any of: tol, maxiter, preset, rho, tau, lambda_scale, polish
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub tol: Option<f64>,
    pub maxiter: Option<usize>,
    pub preset: Option<String>,
    pub rho: Option<f64>,
    pub tau: Option<f64>,
    pub lambda_scale: Option<f64>,
    pub polish: Option<bool>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

impl SolverArgs {
    pub fn build(&self) -> Result<HybridConfig> {
        let file = match &self.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        merge(self, &file)
    }
}

pub fn merge(args: &SolverArgs, file: &ConfigFile) -> Result<HybridConfig> {
    let preset = match (args.preset, &file.preset) {
        (Some(p), _) => p,
        (None, Some(name)) => name.parse::<Preset>()?,
        (None, None) => Preset::default(),
    };
    let mut cfg = HybridConfig::with_preset(preset);
    if let Some(v) = args.tol.or(file.tol) {
        cfg.tol = v;
    }
    if let Some(v) = args.maxiter.or(file.maxiter) {
        cfg.max_iter = v;
    }
    cfg.rho = args.rho.or(file.rho);
    cfg.tau = args.tau.or(file.tau);
    cfg.lambda_scale = file.lambda_scale;
    if let Some(v) = file.polish {
        cfg.polish = v;
    }
    cfg.validate()?;
    Ok(cfg)
}
