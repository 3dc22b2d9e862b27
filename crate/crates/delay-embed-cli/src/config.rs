//! Experiment configuration, read from TOML. The schema lives in
//! `config.schema.json` next to the crate manifest.

use std::path::{Path, PathBuf};

use delay_embed::delay_solver::DEFAULT_SVD_CUTOFF;
use delay_embed::modal::GridSpec;
use delay_embed::signals::LatentSurrogate;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub signal: SignalConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preprocess: Option<PreprocessConfig>,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cond: Option<CondConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pseudospec: Option<PseudospecConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hodmd: Option<HodmdConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalConfig {
    /// Five-frequency signal, `m` samples per period.
    FiveMode {
        m: usize,
        periods: usize,
    },
    QuasiPeriodic {
        dt: f64,
        n: usize,
        /// Declared pseudo-period in samples, for spectral analysis.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        period_samples: Option<usize>,
    },
    /// Van der Pol; the first `discard` samples are dropped and `periods`
    /// periods of `period` samples are kept.
    Vdp {
        mu: f64,
        x0: [f64; 2],
        dt: f64,
        discard: usize,
        period: usize,
        periods: usize,
    },
    Surrogate {
        #[serde(rename = "J")]
        j: usize,
        #[serde(rename = "M")]
        m: usize,
        n_latent: usize,
        n_residual: usize,
        residual_amp: f64,
        seed: u64,
    },
    Csv {
        path: PathBuf,
    },
}

impl SignalConfig {
    pub fn surrogate(s: &LatentSurrogate) -> Self {
        SignalConfig::Surrogate {
            j: s.j,
            m: s.m,
            n_latent: s.n_latent,
            n_residual: s.n_residual,
            residual_amp: s.residual_amp,
            seed: s.seed,
        }
    }
}

/// Replace the raw signal by its thresholded, band-limited version resampled
/// to `m` samples per period and repeated for `periods` periods.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessConfig {
    #[serde(default = "yes")]
    pub mean_subtract: bool,
    pub threshold: f64,
    pub m: usize,
    pub periods: usize,
    /// Components to keep (all when empty).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub components: Vec<usize>,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub mean_subtract: bool,
    /// Relative tolerance of the vector-case rank test.
    #[serde(default = "default_rank_tol")]
    pub rank_tol: f64,
}

fn default_threshold() -> f64 {
    1e-8
}

fn default_rank_tol() -> f64 {
    delay_embed::vector_analysis::DEFAULT_RANK_TOL
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig { threshold: default_threshold(), mean_subtract: false, rank_tol: default_rank_tol() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverChoice {
    TimeDomain,
    Bp,
    Svd,
    Exact,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Number of delays; the minimal delay from the spectrum when absent.
    #[serde(default, rename = "L", skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,
    #[serde(default, rename = "L_sweep", skip_serializing_if = "Vec::is_empty")]
    pub l_sweep: Vec<usize>,
    #[serde(default = "default_solver")]
    pub solver: SolverChoice,
    #[serde(default = "default_cutoff")]
    pub svd_cutoff: f64,
    /// Train on rows `L … train_samples−2`, i.e. every pair inside the first
    /// `train_samples` samples. Absent: every row of one period, wrapped.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_samples: Option<usize>,
    /// Total rollout length including the `L+1` seed samples; the whole
    /// available series when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
}

fn default_solver() -> SolverChoice {
    SolverChoice::TimeDomain
}

fn default_cutoff() -> f64 {
    DEFAULT_SVD_CUTOFF
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            l: None,
            l_sweep: Vec::new(),
            solver: default_solver(),
            svd_cutoff: default_cutoff(),
            train_samples: None,
            horizon: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub members: usize,
    pub snr_fraction: f64,
    pub seed: u64,
    #[serde(rename = "L")]
    pub l: Vec<usize>,
    /// A rollout counts as stable when its NMSE is below this.
    #[serde(default = "default_stable")]
    pub stable_nmse: f64,
}

fn default_stable() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CondConfig {
    /// First-half indices of the pattern; taken from the signal when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub first_half: Vec<usize>,
    #[serde(rename = "M")]
    pub m: Vec<usize>,
    #[serde(rename = "L")]
    pub l: Vec<usize>,
    #[serde(default = "default_cutoff")]
    pub rel_cutoff: f64,
    /// Also fit time-domain models at every `(M, L)`; needs a five-mode signal.
    #[serde(default)]
    pub time_domain: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PseudospecConfig {
    #[serde(rename = "L")]
    pub l: Vec<usize>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default = "default_eps")]
    pub eps: Vec<f64>,
}

fn default_eps() -> Vec<f64> {
    vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HodmdConfig {
    pub r: Vec<usize>,
    #[serde(rename = "L")]
    pub l: Vec<usize>,
    #[serde(default = "default_hodmd_cutoff")]
    pub cutoff: f64,
}

fn default_hodmd_cutoff() -> f64 {
    1e-10
}

fn nonempty<T>(v: &[T], what: &str) -> CliResult<()> {
    if v.is_empty() {
        return Err(CliError::Validation(format!("{what} must not be empty")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Validation(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Checks that do not depend on the subcommand.
    pub fn validate(&self) -> CliResult<()> {
        if let Some(e) = &self.ensemble {
            nonempty(&e.l, "ensemble.L")?;
            if e.members == 0 {
                return Err(CliError::Validation("ensemble.members must be positive".into()));
            }
        }
        if let Some(c) = &self.cond {
            nonempty(&c.m, "cond.M")?;
            nonempty(&c.l, "cond.L")?;
        }
        if let Some(p) = &self.pseudospec {
            nonempty(&p.l, "pseudospec.L")?;
            nonempty(&p.eps, "pseudospec.eps")?;
        }
        if let Some(h) = &self.hodmd {
            nonempty(&h.r, "hodmd.r")?;
            nonempty(&h.l, "hodmd.L")?;
        }
        if let Some(p) = &self.preprocess {
            if p.m == 0 || p.periods == 0 {
                return Err(CliError::Validation("preprocess.m and preprocess.periods must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn ensemble(&self) -> CliResult<&EnsembleConfig> {
        self.ensemble.as_ref().ok_or_else(|| CliError::Validation("config has no [ensemble] section".into()))
    }

    pub fn cond(&self) -> CliResult<&CondConfig> {
        self.cond.as_ref().ok_or_else(|| CliError::Validation("config has no [cond] section".into()))
    }

    pub fn pseudospec(&self) -> CliResult<&PseudospecConfig> {
        self.pseudospec.as_ref().ok_or_else(|| CliError::Validation("config has no [pseudospec] section".into()))
    }

    pub fn hodmd(&self) -> CliResult<&HodmdConfig> {
        self.hodmd.as_ref().ok_or_else(|| CliError::Validation("config has no [hodmd] section".into()))
    }
}
