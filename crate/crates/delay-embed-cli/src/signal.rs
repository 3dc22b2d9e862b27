//! Turning a signal section (and optional preprocessing) into a series.

use delay_embed::signals::{
    gen_five_mode, gen_latent_surrogate, gen_quasi_periodic, gen_vdp, read_csv, LatentSurrogate, TimeSeries,
};
use delay_embed::spectral::{detect_sparsity, dft, filter_spectrum, resample_spectrum, synthesize};
use ndarray::Array2;

use crate::config::{ExperimentConfig, PreprocessConfig, SignalConfig};
use crate::error::{CliError, CliResult};

pub fn raw_signal(sig: &SignalConfig) -> CliResult<TimeSeries> {
    let ts = match sig {
        SignalConfig::FiveMode { m, periods } => gen_five_mode(*m, *periods)?,
        SignalConfig::QuasiPeriodic { dt, n, period_samples } => {
            let ts = gen_quasi_periodic(*dt, *n)?;
            match period_samples {
                Some(p) => ts.with_period(*p)?,
                None => ts,
            }
        }
        SignalConfig::Vdp { mu, x0, dt, discard, period, periods } => {
            let keep = period * periods;
            let ts = gen_vdp(*mu, (x0[0], x0[1]), *dt, discard + keep)?;
            ts.validate()?;
            ts.window(*discard, keep)?.with_period(*period)?
        }
        SignalConfig::Surrogate { j, m, n_latent, n_residual, residual_amp, seed } => {
            gen_latent_surrogate(&LatentSurrogate {
                j: *j,
                m: *m,
                n_latent: *n_latent,
                n_residual: *n_residual,
                residual_amp: *residual_amp,
                seed: *seed,
            })?
        }
        SignalConfig::Csv { path } => read_csv(path)?,
    };
    Ok(ts)
}

/// For a Van der Pol section: the largest `|x(t+T) − x(t)|` over the kept
/// window, relative to each component's peak magnitude, with `T` the
/// declared period. `None` for other signals.
pub fn periodicity_defect(sig: &SignalConfig) -> CliResult<Option<f64>> {
    let SignalConfig::Vdp { mu, x0, dt, discard, period, periods } = sig else {
        return Ok(None);
    };
    let keep = period * periods;
    let ts = gen_vdp(*mu, (x0[0], x0[1]), *dt, discard + keep + period)?;
    let mut worst = 0.0f64;
    for j in 0..ts.n_components() {
        let x = ts.component(j);
        let peak = x.iter().skip(*discard).fold(0.0f64, |a, v| a.max(v.abs()));
        let gap = (*discard..discard + keep).map(|k| (x[k + period] - x[k]).abs()).fold(0.0f64, f64::max);
        if peak > 0.0 {
            worst = worst.max(gap / peak);
        }
    }
    Ok(Some(worst))
}

/// Band-limits each component over one period and resamples it.
pub fn preprocess(ts: &TimeSeries, p: &PreprocessConfig) -> CliResult<TimeSeries> {
    let period = ts
        .period_samples()
        .ok_or_else(|| CliError::Validation("preprocessing needs a signal with a declared period".into()))?;
    let one = ts.window(0, period)?.with_period(period)?;
    let one = if p.components.is_empty() { one } else { one.select_components(&p.components)? };
    let one = if p.mean_subtract { one.mean_subtracted() } else { one };
    let n = p.m * p.periods;
    let dt = one.dt() * period as f64 / p.m as f64;
    let mut data = Array2::<f64>::zeros((one.n_components(), n));
    for j in 0..one.n_components() {
        let spec = dft(&one, j)?;
        let pattern = detect_sparsity(&spec, p.threshold)?;
        let band = resample_spectrum(&filter_spectrum(&spec, &pattern)?, p.m)?;
        data.row_mut(j).assign(&synthesize(&band, n, dt)?.component(0));
    }
    Ok(TimeSeries::new(data, dt, Some(p.m))?)
}

/// The series every analysis command works on.
pub fn load(cfg: &ExperimentConfig) -> CliResult<TimeSeries> {
    let ts = raw_signal(&cfg.signal)?;
    match &cfg.preprocess {
        Some(p) => preprocess(&ts, p),
        None => Ok(ts),
    }
}
