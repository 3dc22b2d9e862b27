//! Experiment harness for the `delay-embed` library: a TOML-configured
//! command line that writes CSV/JSON results plus a manifest per run.

pub mod config;
pub mod error;
pub mod experiments;
pub mod presets;
pub mod signal;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use config::{ExperimentConfig, SignalConfig};
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "delay-embed", version, about = "Linear time-delay models of periodic signals")]
pub struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in configuration; `presets` lists them.
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// Output directory (default: the config's `out_dir`, else `out/<experiment>`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides the noise seed and the surrogate signal seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the configured signal as CSV.
    Gen,
    /// One-period spectrum, sparsity pattern and minimal delay per component.
    Spectrum {
        /// Analyse this CSV instead of the configured signal.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Fit delay models (one per L in the sweep) and score their rollouts.
    Fit,
    /// Roll a saved model out from the start of the signal.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Minimal number of delays (scalar pattern size or vector rank test).
    Mindelay {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Conditioning sweep over M and L.
    Cond,
    /// Pseudospectra of companion matrices.
    Pseudospec,
    /// Noisy-training ensemble.
    Ensemble,
    /// HODMD over an (r, L) grid.
    Hodmd {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// List the built-in presets.
    Presets,
    /// Print the resolved configuration as TOML.
    Config,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Gen => "gen",
            Command::Spectrum { .. } => "spectrum",
            Command::Fit => "fit",
            Command::Predict { .. } => "predict",
            Command::Mindelay { .. } => "mindelay",
            Command::Cond => "cond",
            Command::Pseudospec => "pseudospec",
            Command::Ensemble => "ensemble",
            Command::Hodmd { .. } => "hodmd",
            Command::Presets => "presets",
            Command::Config => "config",
        }
    }

    fn input(&self) -> Option<&Path> {
        match self {
            Command::Spectrum { input, .. }
            | Command::Predict { input, .. }
            | Command::Mindelay { input }
            | Command::Hodmd { input } => input.as_deref(),
            _ => None,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub experiment: String,
    pub config_sha256: String,
    pub version: String,
    pub started_unix: u64,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<String>,
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    Sha256::digest(cfg.to_toml().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// The configuration a command line resolves to.
pub fn resolve_config(cli: &Cli) -> CliResult<ExperimentConfig> {
    let mut cfg = match (&cli.config, &cli.preset) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(name)) => presets::preset(name).ok_or_else(|| {
            CliError::Validation(format!("unknown preset '{name}'; known: {}", presets::PRESETS.join(", ")))
        })?,
        (None, None) => match cli.command.input() {
            Some(path) => ExperimentConfig::from_toml(&format!(
                "experiment = \"adhoc\"\n[signal]\nkind = \"csv\"\npath = {}\n",
                toml_string(path)
            ))?,
            None => return Err(CliError::Validation("pass --config, --preset or --input".into())),
        },
    };
    if let Some(path) = cli.command.input() {
        cfg.signal = SignalConfig::Csv { path: path.to_path_buf() };
        cfg.preprocess = None;
    }
    if let Command::Spectrum { threshold: Some(t), .. } = cli.command {
        cfg.spectrum.threshold = t;
    }
    if let Some(seed) = cli.seed {
        if let Some(e) = cfg.ensemble.as_mut() {
            e.seed = seed;
        }
        if let SignalConfig::Surrogate { seed: s, .. } = &mut cfg.signal {
            *s = seed;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn toml_string(path: &Path) -> String {
    toml::Value::String(path.display().to_string()).to_string()
}

fn output_dir(cli: &Cli, cfg: &ExperimentConfig) -> PathBuf {
    cli.out.clone().or_else(|| cfg.out_dir.clone()).unwrap_or_else(|| Path::new("out").join(&cfg.experiment))
}

/// Runs the command and returns the summary printed on stdout.
pub fn run(cli: &Cli) -> CliResult<String> {
    if let Command::Presets = cli.command {
        return Ok(presets::PRESETS.join("\n"));
    }
    let cfg = resolve_config(cli)?;
    if let Command::Config = cli.command {
        return Ok(cfg.to_toml());
    }
    let out = output_dir(cli, &cfg);
    fs::create_dir_all(&out)
        .map_err(|e| CliError::Validation(format!("cannot create output directory {}: {e}", out.display())))?;
    let started = Instant::now();
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let ts = experiments::load_signal(&cfg)?;
    let (files, summary) = match &cli.command {
        Command::Gen => {
            let files = experiments::gen_write(&ts, &out)?;
            let s = serde_json::json!({ "J": ts.n_components(), "N": ts.len(), "dt": ts.dt() });
            (files, s)
        }
        Command::Spectrum { .. } => {
            let r = experiments::spectrum(&cfg, &ts)?;
            (r.write(&out)?, serde_json::to_value(&r)?)
        }
        Command::Fit => {
            let r = experiments::fit(&cfg, &ts)?;
            (r.write(&out)?, serde_json::to_value(&r.rows)?)
        }
        Command::Predict { model, .. } => {
            let r = experiments::predict(&cfg, &ts, model)?;
            (r.write(&out)?, serde_json::json!({ "nmse": r.nmse }))
        }
        Command::Mindelay { .. } => {
            let r = experiments::mindelay(&cfg, &ts)?;
            (r.write(&out)?, serde_json::to_value(&r)?)
        }
        Command::Cond => {
            let r = experiments::cond(&cfg, &ts)?;
            let s = serde_json::json!({
                "spectral": r.spectral.iter().map(|c| c.sweep_row()).collect::<Vec<_>>(),
                "time_domain": r.time_domain,
            });
            (r.write(&out)?, s)
        }
        Command::Pseudospec => {
            let r = experiments::pseudospec(&cfg, &ts)?;
            (r.write(&out)?, serde_json::to_value(&r.summaries)?)
        }
        Command::Ensemble => {
            let r = experiments::ensemble(&cfg, &ts)?;
            (r.write(&out)?, serde_json::to_value(&r.summaries)?)
        }
        Command::Hodmd { .. } => {
            let r = experiments::hodmd_sweep(&cfg, &ts)?;
            let s = serde_json::json!({ "rows": r.rows, "delay_advice": r.delay_advice });
            (r.write(&out)?, s)
        }
        Command::Presets | Command::Config => unreachable!("handled above"),
    };
    let cfg_path = out.join("config.toml");
    fs::write(&cfg_path, cfg.to_toml())?;
    let mut outputs: Vec<String> = files
        .iter()
        .chain(std::iter::once(&cfg_path))
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    outputs.sort();
    let manifest = Manifest {
        command: cli.command.name().to_string(),
        experiment: cfg.experiment.clone(),
        config_sha256: config_hash(&cfg),
        version: env!("CARGO_PKG_VERSION").to_string(),
        started_unix,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        outputs,
    };
    fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(serde_json::to_string_pretty(&summary)?)
}
