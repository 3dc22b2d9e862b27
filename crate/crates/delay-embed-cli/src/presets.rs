//! Built-in experiment configurations, named after the figure or table
//! whose data they regenerate.

use delay_embed::modal::GridSpec;
use delay_embed::signals::LatentSurrogate;

use crate::config::{
    CondConfig, EnsembleConfig, ExperimentConfig, HodmdConfig, ModelConfig, PreprocessConfig, PseudospecConfig,
    SignalConfig, SpectrumConfig,
};

pub const PRESETS: &[&str] = &[
    "fig-result-1",
    "fig-result-3",
    "fig-result-4",
    "fig-result-5",
    "quasi-window",
    "fig-true-quasi",
    "tab-vdp-x1",
    "tab-vdp-x2",
    "fig-result-11",
    "fig-noise-spectra",
    "fig-wave-L-cond",
    "compare-dmd",
];

/// Pseudo-period used to analyse the quasi-periodic signal over a window.
pub const QUASI_WINDOW: f64 = 21.991;

/// Spectra of the Van der Pol components keep coefficients above this
/// fraction of the component's largest one.
pub const VDP_THRESHOLD: f64 = 8e-3;

fn base(name: &str, signal: SignalConfig) -> ExperimentConfig {
    ExperimentConfig {
        experiment: name.to_string(),
        signal,
        preprocess: None,
        spectrum: SpectrumConfig::default(),
        model: ModelConfig::default(),
        ensemble: None,
        cond: None,
        pseudospec: None,
        hodmd: None,
        out_dir: None,
    }
}

fn five_mode(name: &str, m: usize, periods: usize) -> ExperimentConfig {
    base(name, SignalConfig::FiveMode { m, periods })
}

fn vdp(name: &str, m: usize, periods: usize, components: Vec<usize>) -> ExperimentConfig {
    let mut c =
        base(name, SignalConfig::Vdp { mu: 2.0, x0: [1.0, 0.0], dt: 0.01, discard: 530, period: 776, periods: 1 });
    c.preprocess = Some(PreprocessConfig { mean_subtract: true, threshold: VDP_THRESHOLD, m, periods, components });
    c.spectrum = SpectrumConfig { threshold: VDP_THRESHOLD, mean_subtract: true, ..SpectrumConfig::default() };
    c
}

fn surrogate(name: &str, r: Vec<usize>, l: Vec<usize>) -> ExperimentConfig {
    let mut c = base(name, SignalConfig::surrogate(&LatentSurrogate::default()));
    c.hodmd = Some(HodmdConfig { r, l, cutoff: 1e-10 });
    c
}

pub fn preset(name: &str) -> Option<ExperimentConfig> {
    let cfg = match name {
        // Train on the first 40% of a period, roll out over two periods.
        "fig-result-1" => {
            let mut c = five_mode(name, 100, 2);
            c.model.l = Some(9);
            c.model.l_sweep = (1..=15).collect();
            c.model.train_samples = Some(40);
            c.model.horizon = Some(200);
            c
        }
        "fig-result-3" => {
            let mut c = five_mode(name, 100, 1);
            c.cond = Some(CondConfig {
                first_half: vec![],
                m: vec![26, 50, 100, 200, 400],
                l: vec![9],
                rel_cutoff: 1e-15,
                time_domain: false,
            });
            c
        }
        "fig-result-4" => {
            let mut c = five_mode(name, 500, 2);
            c.cond = Some(CondConfig {
                first_half: vec![],
                m: vec![500],
                l: (9..=489).step_by(20).collect(),
                // Between the true smallest singular value at L=9 (~3e-13
                // relative) and the roundoff floor of the null directions.
                rel_cutoff: 1e-13,
                time_domain: true,
            });
            c
        }
        "fig-result-5" => {
            let mut c = five_mode(name, 26, 2);
            c.cond = Some(CondConfig {
                first_half: vec![],
                m: (26..=98).step_by(8).collect(),
                l: vec![9],
                rel_cutoff: 1e-15,
                time_domain: true,
            });
            c
        }
        "quasi-window" => {
            let mut c =
                base(name, SignalConfig::QuasiPeriodic { dt: QUASI_WINDOW / 220.0, n: 220, period_samples: Some(220) });
            c.spectrum.threshold = 0.2;
            c
        }
        // Train on t ∈ [0, 6], predict t ∈ [0, 40].
        "fig-true-quasi" => {
            let mut c = base(name, SignalConfig::QuasiPeriodic { dt: 0.1, n: 401, period_samples: None });
            c.model.l = Some(7);
            c.model.l_sweep = vec![6, 7];
            c.model.train_samples = Some(61);
            c.model.horizon = Some(401);
            c
        }
        "tab-vdp-x1" => {
            let mut c = vdp(name, 200, 2, vec![0]);
            c.model.l = Some(9);
            c.model.train_samples = Some(80);
            c
        }
        "tab-vdp-x2" => {
            let mut c = vdp(name, 100, 2, vec![1]);
            c.model.l = Some(17);
            c.model.train_samples = Some(70);
            c
        }
        "fig-result-11" => {
            let mut c = vdp(name, 80, 3, vec![]);
            // The resampled signal is exactly sparse; only roundoff sits below this.
            c.spectrum.threshold = 1e-8;
            c.spectrum.mean_subtract = false;
            c.model.l_sweep = vec![7, 8];
            c.model.train_samples = Some(40);
            c
        }
        "fig-noise-spectra" => {
            let mut c = five_mode(name, 100, 2);
            c.model.train_samples = Some(100);
            c.model.horizon = Some(200);
            c.ensemble =
                Some(EnsembleConfig { members: 500, snr_fraction: 0.01, seed: 0, l: vec![9, 20], stable_nmse: 0.5 });
            c.pseudospec = Some(PseudospecConfig {
                l: vec![9, 20],
                grid: GridSpec::default(),
                eps: vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6],
            });
            c
        }
        "fig-wave-L-cond" => surrogate(name, vec![10, 50, 200], vec![0, 1, 2, 4, 8]),
        "compare-dmd" => surrogate(name, vec![200], vec![0, 1]),
        _ => return None,
    };
    Some(cfg)
}
