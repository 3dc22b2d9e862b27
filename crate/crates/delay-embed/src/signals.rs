//! Trajectory containers, built-in generators, noise and resampling, plus
//! CSV ingest/emit with a JSON sidecar for metadata.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::{Error, Result};

/// Uniformly sampled real trajectory with `J` components and `N` samples,
/// stored as a `J×N` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    data: Array2<f64>,
    dt: f64,
    period_samples: Option<usize>,
}

impl TimeSeries {
    pub fn new(data: Array2<f64>, dt: f64, period_samples: Option<usize>) -> Result<Self> {
        let ts = TimeSeries { data, dt, period_samples };
        ts.validate()?;
        Ok(ts)
    }

    pub fn scalar(values: Vec<f64>, dt: f64, period_samples: Option<usize>) -> Result<Self> {
        let n = values.len();
        let data = Array2::from_shape_vec((1, n), values).map_err(|e| Error::Invalid(e.to_string()))?;
        Self::new(data, dt, period_samples)
    }

    /// Checks every structural invariant, including finiteness. Generators
    /// that may legitimately blow up (forward Euler) skip this at
    /// construction, so consumers call it before use.
    pub fn validate(&self) -> Result<()> {
        let (j, n) = self.data.dim();
        if j == 0 || n == 0 {
            return invalid(format!("time series must be nonempty, got {j}x{n}"));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return invalid(format!("dt must be positive and finite, got {}", self.dt));
        }
        if let Some(m) = self.period_samples {
            if m == 0 || m > n {
                return invalid(format!("period_samples {m} must lie in 1..={n}"));
            }
        }
        if let Some(pos) = self.data.iter().position(|v| !v.is_finite()) {
            return invalid(format!("non-finite sample at component {}, index {}", pos / n, pos % n));
        }
        Ok(())
    }

    pub fn data(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn period_samples(&self) -> Option<usize> {
        self.period_samples
    }

    pub fn n_components(&self) -> usize {
        self.data.nrows()
    }

    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn component(&self, j: usize) -> ArrayView1<'_, f64> {
        self.data.row(j)
    }

    pub fn times(&self) -> Array1<f64> {
        Array1::from_shape_fn(self.len(), |k| k as f64 * self.dt)
    }

    pub fn with_period(mut self, m: usize) -> Result<Self> {
        self.period_samples = Some(m);
        self.validate()?;
        Ok(self)
    }

    pub fn without_period(mut self) -> Self {
        self.period_samples = None;
        self
    }

    /// Samples `start..start+len`. The declared period is kept when it still
    /// fits inside the window.
    pub fn window(&self, start: usize, len: usize) -> Result<Self> {
        if len == 0 || start + len > self.len() {
            return invalid(format!("window {start}..{} out of range for {} samples", start + len, self.len()));
        }
        let data = self.data.slice(s![.., start..start + len]).to_owned();
        let period = self.period_samples.filter(|&m| m <= len);
        Ok(TimeSeries { data, dt: self.dt, period_samples: period })
    }

    pub fn select_components(&self, which: &[usize]) -> Result<Self> {
        if which.is_empty() || which.iter().any(|&j| j >= self.n_components()) {
            return invalid(format!("component selection {which:?} invalid for J={}", self.n_components()));
        }
        Ok(TimeSeries { data: self.data.select(Axis(0), which), dt: self.dt, period_samples: self.period_samples })
    }

    /// Subtracts each component's mean. When a period is declared the mean
    /// is taken over the first period only.
    pub fn mean_subtracted(&self) -> Self {
        let span = self.period_samples.unwrap_or(self.len());
        let mut data = self.data.clone();
        for mut row in data.axis_iter_mut(Axis(0)) {
            let mean = row.slice(s![..span]).sum() / span as f64;
            row.mapv_inplace(|v| v - mean);
        }
        TimeSeries { data, dt: self.dt, period_samples: self.period_samples }
    }
}

/// Additive Gaussian noise, scaled per component.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Noise standard deviation as a fraction of each component's standard deviation.
    pub snr_fraction: f64,
    pub seed: u64,
}

fn five_mode_value(t: f64) -> f64 {
    let w = 2.0 * std::f64::consts::PI / 100.0;
    0.3 * (w * t).cos()
        + 0.5 * (2.0 * w * t).sin()
        + 0.9 * (4.0 * w * t).cos()
        + 1.6 * (8.0 * w * t).sin()
        + 1.2 * (12.0 * w * t).cos()
}

/// The five-frequency test signal with period 100, sampled `m_per_period`
/// times per period for `n_periods` periods.
pub fn gen_five_mode(m_per_period: usize, n_periods: usize) -> Result<TimeSeries> {
    if m_per_period < 26 {
        return invalid(format!(
            "five-mode signal needs at least 26 samples per period (highest index 12), got {m_per_period}"
        ));
    }
    if n_periods == 0 {
        return invalid("n_periods must be positive");
    }
    let dt = 100.0 / m_per_period as f64;
    let n = m_per_period * n_periods;
    let values = (0..n).map(|k| five_mode_value(k as f64 * dt)).collect();
    TimeSeries::scalar(values, dt, Some(m_per_period))
}

/// Closed form of the five-mode signal, for oracles.
pub fn five_mode_at(t: f64) -> f64 {
    five_mode_value(t)
}

/// Forward-Euler Van der Pol trajectory: `n_steps` samples starting at `x0`.
/// The result is not validated; a diverging run carries non-finite entries.
pub fn gen_vdp(mu: f64, x0: (f64, f64), dt: f64, n_steps: usize) -> Result<TimeSeries> {
    if !(dt > 0.0) {
        return invalid(format!("dt must be positive, got {dt}"));
    }
    if n_steps == 0 {
        return invalid("n_steps must be positive");
    }
    let mut data = Array2::<f64>::zeros((2, n_steps));
    let (mut x1, mut x2) = x0;
    for k in 0..n_steps {
        data[[0, k]] = x1;
        data[[1, k]] = x2;
        let n1 = x1 + dt * x2;
        let n2 = x2 + dt * (mu * (1.0 - x1 * x1) * x2 - x1);
        x1 = n1;
        x2 = n2;
    }
    Ok(TimeSeries { data, dt, period_samples: None })
}

pub fn quasi_periodic_at(t: f64) -> f64 {
    (2f64.sqrt() * t / 2.0).cos() * (3f64.sqrt() * t / 2.0).sin() * t.cos()
}

/// `x(t) = cos(√2 t/2)·sin(√3 t/2)·cos(t)` at `t = k·dt`, `k < n_steps`.
pub fn gen_quasi_periodic(dt: f64, n_steps: usize) -> Result<TimeSeries> {
    if !(dt > 0.0) {
        return invalid(format!("dt must be positive, got {dt}"));
    }
    if n_steps == 0 {
        return invalid("n_steps must be positive");
    }
    let values = (0..n_steps).map(|k| quasi_periodic_at(k as f64 * dt)).collect();
    TimeSeries::scalar(values, dt, None)
}

/// High-dimensional surrogate: `n_latent` undamped oscillator pairs with
/// random spatial profiles plus `n_residual` weakly damped pairs of
/// amplitude `residual_amp` spread over `(0, π)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentSurrogate {
    #[serde(rename = "J")]
    pub j: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub n_latent: usize,
    pub n_residual: usize,
    pub residual_amp: f64,
    pub seed: u64,
}

impl Default for LatentSurrogate {
    fn default() -> Self {
        LatentSurrogate { j: 200, m: 400, n_latent: 10, n_residual: 120, residual_amp: 1e-2, seed: 1 }
    }
}

impl LatentSurrogate {
    /// Latent frequencies `θ_m = 0.1(m+1)`.
    pub fn latent_angles(&self) -> Vec<f64> {
        (0..self.n_latent).map(|m| 0.1 * (m + 1) as f64).collect()
    }

    /// The `2·n_latent` latent eigenvalues `e^{±jθ_m}`.
    pub fn latent_eigenvalues(&self) -> Vec<crate::C64> {
        self.latent_angles()
            .into_iter()
            .flat_map(|th| [crate::C64::from_polar(1.0, th), crate::C64::from_polar(1.0, -th)])
            .collect()
    }
}

pub fn gen_latent_surrogate(spec: &LatentSurrogate) -> Result<TimeSeries> {
    if spec.j == 0 || spec.m < 2 {
        return invalid("surrogate needs J >= 1 and M >= 2");
    }
    if !(spec.residual_amp >= 0.0) {
        return invalid("residual amplitude must be nonnegative");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut data = Array2::<f64>::zeros((spec.j, spec.m));
    let mut add_pair = |rng: &mut ChaCha8Rng, rho: f64, th: f64, amp: f64| {
        let a: Vec<f64> = (0..spec.j).map(|_| StandardNormal.sample(rng)).collect();
        let b: Vec<f64> = (0..spec.j).map(|_| StandardNormal.sample(rng)).collect();
        for k in 0..spec.m {
            let g = amp * rho.powi(k as i32);
            let (c, s) = ((th * k as f64).cos() * g, (th * k as f64).sin() * g);
            for i in 0..spec.j {
                data[[i, k]] += a[i] * c + b[i] * s;
            }
        }
    };
    for th in spec.latent_angles() {
        add_pair(&mut rng, 1.0, th, 1.0);
    }
    let n = spec.n_residual as f64;
    for m in 0..spec.n_residual {
        let rho = rng.random_range(0.99..0.999);
        let jitter: f64 = rng.random_range(-0.2..0.2);
        let th = std::f64::consts::PI * (m as f64 + 0.5 + jitter) / n;
        add_pair(&mut rng, rho, th, spec.residual_amp);
    }
    TimeSeries::new(data, 1.0, None)
}

pub(crate) fn population_std(x: ArrayView1<'_, f64>) -> f64 {
    let n = x.len() as f64;
    let mean = x.sum() / n;
    (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Adds i.i.d. Gaussian noise with standard deviation
/// `snr_fraction · std(component)` to each component. Draws come from a
/// ChaCha8 stream seeded with `spec.seed`, component by component.
pub fn add_noise(ts: &TimeSeries, spec: &NoiseSpec) -> Result<TimeSeries> {
    ts.validate()?;
    if !(spec.snr_fraction >= 0.0) {
        return invalid(format!("snr_fraction must be nonnegative, got {}", spec.snr_fraction));
    }
    if spec.snr_fraction == 0.0 {
        return Ok(ts.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut data = ts.data.clone();
    for mut row in data.axis_iter_mut(Axis(0)) {
        let sigma = spec.snr_fraction * population_std(row.view());
        for v in row.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += sigma * z;
        }
    }
    Ok(TimeSeries { data, dt: ts.dt, period_samples: ts.period_samples })
}

/// Keeps every `stride`-th sample from index 0.
pub fn subsample(ts: &TimeSeries, stride: usize) -> Result<TimeSeries> {
    if stride == 0 {
        return invalid("stride must be positive");
    }
    let period = match ts.period_samples {
        Some(m) if m % stride != 0 => {
            return invalid(format!("period {m} is not divisible by stride {stride}"));
        }
        Some(m) => Some(m / stride),
        None => None,
    };
    let data = ts.data.slice(s![.., ..;stride]).to_owned();
    Ok(TimeSeries { data, dt: ts.dt * stride as f64, period_samples: period })
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    dt: f64,
    period_samples: Option<usize>,
    #[serde(rename = "J")]
    j: usize,
}

/// Sidecar metadata path: `series.csv` → `series.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Writes `t,x1,...,xJ` rows with 17 significant digits and the JSON sidecar.
pub fn write_csv(ts: &TimeSeries, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=ts.n_components()).map(|j| format!("x{j}")));
    w.write_record(&header)?;
    for k in 0..ts.len() {
        let mut rec = vec![format!("{:.16e}", k as f64 * ts.dt)];
        rec.extend(ts.data.column(k).iter().map(|v| format!("{v:.16e}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    let meta = Sidecar { dt: ts.dt, period_samples: ts.period_samples, j: ts.n_components() };
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

/// Reads a series written by [`write_csv`] (or any CSV with the same
/// header). `dt` comes from the first two time stamps; the sidecar, when
/// present, supplies the period and must agree on `dt` and `J`.
pub fn read_csv(path: &Path) -> Result<TimeSeries> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    if header.len() < 2 || &header[0] != "t" {
        return invalid(format!("{}: header must be t,x1,...,xJ", path.display()));
    }
    let j = header.len() - 1;
    let mut times = Vec::new();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); j];
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != j + 1 {
            return invalid(format!("{}: row {} has {} fields", path.display(), line + 2, rec.len()));
        }
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Invalid(format!("{}: row {}: cannot parse {s:?}", path.display(), line + 2)))
        };
        times.push(parse(&rec[0])?);
        for c in 0..j {
            cols[c].push(parse(&rec[c + 1])?);
        }
    }
    if times.is_empty() {
        return invalid(format!("{}: no samples", path.display()));
    }
    let side = sidecar_path(path);
    let meta: Option<Sidecar> =
        if side.exists() { Some(serde_json::from_str(&fs::read_to_string(&side)?)?) } else { None };
    let dt = if times.len() >= 2 {
        times[1] - times[0]
    } else if let Some(m) = &meta {
        m.dt
    } else {
        return invalid(format!("{}: a single sample needs a sidecar with dt", path.display()));
    };
    let mut period = None;
    if let Some(m) = meta {
        if m.j != j {
            return invalid(format!("sidecar says J={} but CSV has {j} components", m.j));
        }
        if (m.dt - dt).abs() > 1e-9 * dt.abs().max(m.dt.abs()) {
            return invalid(format!("sidecar dt {} disagrees with CSV dt {dt}", m.dt));
        }
        period = m.period_samples;
    }
    let n = times.len();
    let flat: Vec<f64> = cols.into_iter().flatten().collect();
    let data = Array2::from_shape_vec((j, n), flat).map_err(|e| Error::Invalid(e.to_string()))?;
    TimeSeries::new(data, dt, period)
}
