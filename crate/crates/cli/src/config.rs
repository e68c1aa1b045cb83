//! Run configuration: command-line flags over an optional TOML file over
//! built-in defaults.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::Deserialize;
use stiefelmix::mixture::{GibbsConfig, PriorRecipe};
use stiefelmix::model_select::Criterion;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PriorKind {
    Weak,
    Empirical,
}

/// Flags shared by every subcommand. Each one overrides the config file.
#[derive(Args, Debug, Default, Clone)]
pub struct Flags {
    /// TOML file with any of the flag names below as keys (dashes become underscores)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of mixture components
    #[arg(long, global = true)]
    pub clusters: Option<usize>,
    /// Candidate numbers of components, comma separated
    #[arg(long, global = true, value_delimiter = ',')]
    pub candidates: Option<Vec<usize>>,
    /// Kept Gibbs sweeps
    #[arg(long, global = true)]
    pub iters: Option<usize>,
    /// Discarded Gibbs sweeps
    #[arg(long, global = true)]
    pub burnin: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub prior: Option<PriorKind>,
    /// Prior sample-size divisor of the empirical prior
    #[arg(long, global = true)]
    pub kdagger: Option<f64>,
    #[arg(long, global = true)]
    pub criterion: Option<Criterion>,
    /// Added to the criterion once per component
    #[arg(long, global = true)]
    pub penalty: Option<f64>,
    /// Worker threads of select-k (also capped by STIEFELMIX_THREADS)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    clusters: Option<usize>,
    candidates: Option<Vec<usize>>,
    iters: Option<usize>,
    burnin: Option<usize>,
    prior: Option<PriorKind>,
    kdagger: Option<f64>,
    criterion: Option<Criterion>,
    penalty: Option<f64>,
    threads: Option<usize>,
    input: Option<PathBuf>,
    output_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub clusters: usize,
    pub candidates: Vec<usize>,
    pub iters: usize,
    pub burnin: usize,
    pub prior: PriorKind,
    pub kdagger: f64,
    pub criterion: Criterion,
    pub penalty: f64,
    pub threads: Option<usize>,
    pub input: Option<PathBuf>,
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn resolve(flags: &Flags) -> Result<Self> {
        let file = match &flags.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("cannot read config file {}", path.display()))?;
                toml::from_str::<FileConfig>(&text)
                    .with_context(|| format!("invalid config file {}", path.display()))?
            }
            None => FileConfig::default(),
        };
        let gibbs = GibbsConfig::default();
        let cfg = Self {
            seed: flags.seed.or(file.seed).unwrap_or(1),
            clusters: flags.clusters.or(file.clusters).unwrap_or(3),
            candidates: flags.candidates.clone().or(file.candidates).unwrap_or_else(|| vec![2, 3, 4, 5]),
            iters: flags.iters.or(file.iters).unwrap_or(gibbs.n_iter),
            burnin: flags.burnin.or(file.burnin).unwrap_or(gibbs.n_burnin),
            prior: flags.prior.or(file.prior).unwrap_or(PriorKind::Empirical),
            kdagger: flags.kdagger.or(file.kdagger).unwrap_or(20.0),
            criterion: flags.criterion.or(file.criterion).unwrap_or(Criterion::Dic),
            penalty: flags.penalty.or(file.penalty).unwrap_or(0.0),
            threads: flags.threads.or(file.threads),
            input: flags.input.clone().or(file.input),
            output_dir: flags.output_dir.clone().or(file.output_dir).unwrap_or_else(|| PathBuf::from(".")),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.clusters == 0 {
            bail!("--clusters must be at least 1");
        }
        if self.candidates.is_empty() || self.candidates.contains(&0) {
            bail!("--candidates needs one or more positive numbers of components, e.g. --candidates 2,3,4");
        }
        if self.iters == 0 {
            bail!("--iters must be at least 1");
        }
        if !(self.kdagger > 0.0 && self.kdagger.is_finite()) {
            bail!("--kdagger must be a positive number, got {}", self.kdagger);
        }
        if !self.penalty.is_finite() {
            bail!("--penalty must be finite");
        }
        if self.threads == Some(0) {
            bail!("--threads must be at least 1");
        }
        Ok(())
    }

    pub fn input(&self) -> Result<&Path> {
        self.input.as_deref().context("missing input: pass --input or set `input` in the config file")
    }

    pub fn recipe(&self) -> PriorRecipe {
        match self.prior {
            PriorKind::Weak => PriorRecipe::Weak,
            PriorKind::Empirical => PriorRecipe::Empirical { k_dagger: self.kdagger },
        }
    }

    pub fn gibbs(&self) -> GibbsConfig {
        GibbsConfig { n_iter: self.iters, n_burnin: self.burnin, ..Default::default() }
    }
}
