//! Batch command-line interface. Each subcommand reads files, runs one pipeline stage
//! and writes CSV/JSON outputs plus a `run_manifest.json` into its output directory.

mod commands;

pub use commands::*;

use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data_model::{ModelConfig, Variant};
use crate::error::{Error, Result};

pub const RUN_MANIFEST: &str = "run_manifest.json";

#[derive(Debug, Parser)]
#[command(name = "netpanel", version, about = "Bayesian panel estimation with time-varying network dependence")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build network weight matrices from dated make/use table vintages.
    Weights(WeightsArgs),
    /// Simulate a panel from the model's data-generating process.
    Simulate(SimulateArgs),
    /// Run the sampler, write the draw bundle, impacts and a summary row.
    Estimate(EstimateArgs),
    /// Cluster units on their posterior (total effect, network share) pairs.
    Cluster(ClusterArgs),
    /// Merge the summary rows of several estimation runs.
    Report(ReportArgs),
    /// Compute policy shocks from futures-implied rates.
    Shocks(ShocksArgs),
    /// Correlation table of dated indices aligned to the first series' dates.
    Correlate(CorrelateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct OutArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Overwrite a non-empty output directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Args)]
pub struct WeightsArgs {
    /// Vintage manifest `vintage,make_file,use_file,cutover`.
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum NetworkShape {
    Ring,
    Random,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 10)]
    pub units: usize,
    #[arg(long, default_value_t = 60)]
    pub periods: usize,
    /// Constant network dependence, or the start of its random walk.
    #[arg(long, default_value_t = 0.4)]
    pub rho: f64,
    /// Innovation variance of a random-walk `rho`; 0 keeps it constant.
    #[arg(long, default_value_t = 0.0)]
    pub varsigma_sq: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub alpha: f64,
    #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
    pub beta: f64,
    /// Standard deviation of the coefficient random walks; 0 keeps them constant.
    #[arg(long, default_value_t = 0.0)]
    pub omega_sqrt: f64,
    #[arg(long, default_value_t = 0.2)]
    pub sigma_sq: f64,
    #[arg(long, default_value_t = 0.25)]
    pub shock_sd: f64,
    #[arg(long, value_enum, default_value_t = NetworkShape::Ring)]
    pub network: NetworkShape,
    /// Use the first matrix of this weight manifest instead of a generated network.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    /// `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory with `panel.csv` and, for network variants, `weights_manifest.csv`.
    #[arg(long)]
    pub data: PathBuf,
    /// Model variant; overrides the configuration file's structure.
    #[arg(long)]
    pub variant: Option<Variant>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Independent chains, run concurrently and stored separately.
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
    /// Omit the coefficient paths from the draw bundle.
    #[arg(long)]
    pub skip_paths: bool,
    /// Covariate 1 may differ across units.
    #[arg(long)]
    pub unit_covariates: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ClusterArgs {
    /// Output directory of an `estimate` run.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2)]
    pub k_fixed: usize,
    #[arg(long, default_value_t = crate::clustering::DEFAULT_K_MAX)]
    pub k_max: usize,
    /// z-score both features within each draw.
    #[arg(long)]
    pub standardize: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Output directories of `estimate` runs.
    #[arg(long = "data", required = true, num_args = 1..)]
    pub data: Vec<PathBuf>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ShocksArgs {
    /// `date,ff_pre,ff_post,days_in_month,day_of_meeting`.
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CorrelateArgs {
    /// `date,value` series; the first one supplies the target dates.
    #[arg(long = "data", required = true, num_args = 2..)]
    pub data: Vec<PathBuf>,
    #[command(flatten)]
    pub out: OutArgs,
}

/// Provenance record written next to every command's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Option<ModelConfig>,
    /// SHA-256 of every input file, keyed by path.
    pub input_hashes: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub version: String,
    pub started_unix: u64,
    pub elapsed_seconds: f64,
}

pub(crate) struct ManifestBuilder {
    manifest: RunManifest,
    start: Instant,
}

impl ManifestBuilder {
    pub(crate) fn new(command: &str) -> Self {
        let started = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        Self {
            manifest: RunManifest {
                command: command.into(),
                config: None,
                input_hashes: BTreeMap::new(),
                seed: None,
                version: env!("CARGO_PKG_VERSION").into(),
                started_unix: started,
                elapsed_seconds: 0.0,
            },
            start: Instant::now(),
        }
    }

    pub(crate) fn input(&mut self, path: &Path) -> Result<()> {
        let h = hash_file(path)?;
        self.manifest
            .input_hashes
            .insert(path.display().to_string(), h);
        Ok(())
    }

    pub(crate) fn config(&mut self, cfg: &ModelConfig) {
        self.manifest.seed = Some(cfg.rng_seed);
        self.manifest.config = Some(cfg.clone());
    }

    pub(crate) fn seed(&mut self, seed: u64) {
        self.manifest.seed = Some(seed);
    }

    pub(crate) fn finish(mut self, out: &Path) -> Result<RunManifest> {
        self.manifest.elapsed_seconds = self.start.elapsed().as_secs_f64();
        let path = out.join(RUN_MANIFEST);
        let text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(self.manifest)
    }
}

pub fn hash_file(path: &Path) -> Result<String> {
    let mut f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut h = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

/// Creates `out`, refusing to reuse a non-empty directory unless `force` is set.
pub fn prepare_out(o: &OutArgs) -> Result<()> {
    if let Ok(mut entries) = std::fs::read_dir(&o.out) {
        if entries.next().is_some() && !o.force {
            return Err(Error::Usage(format!(
                "output directory {} is not empty; pass --force to overwrite",
                o.out.display()
            )));
        }
    }
    std::fs::create_dir_all(&o.out).map_err(|e| Error::io(&o.out, e))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Weights(a) => cmd_weights(&a).map(drop),
        Command::Simulate(a) => cmd_simulate(&a).map(drop),
        Command::Estimate(a) => cmd_estimate(&a).map(drop),
        Command::Cluster(a) => cmd_cluster(&a).map(drop),
        Command::Report(a) => cmd_report(&a).map(drop),
        Command::Shocks(a) => cmd_shocks(&a).map(drop),
        Command::Correlate(a) => cmd_correlate(&a).map(drop),
    }
}
