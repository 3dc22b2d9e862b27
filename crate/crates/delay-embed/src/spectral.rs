//! One-period DFT, sparsity detection and filtering, band-limited
//! reconstruction and the minimal-subsampling advisor.
//!
//! Convention: `a_i = (1/M) Σ_k x_k e^{+j2πki/M}` and `x_k = Σ_i a_i ω^{ki}`
//! with `ω = e^{−j2π/M}`. Between samples the reconstruction uses signed
//! frequencies (`i − M` for the upper half) so that real spectra stay real.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::signals::TimeSeries;
use crate::{Error, Result, C64};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierSpectrum {
    coeffs: Vec<C64>,
}

impl FourierSpectrum {
    pub fn new(coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.is_empty() {
            return invalid("spectrum must have at least one coefficient");
        }
        Ok(FourierSpectrum { coeffs })
    }

    pub fn m(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    /// Largest `|a_i − conj(a_{M−i})|` relative to `max |a|`; zero for the
    /// spectrum of a real signal up to roundoff.
    pub fn symmetry_defect(&self) -> f64 {
        let m = self.m();
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        (0..m).map(|i| (self.coeffs[i] - self.coeffs[(m - i) % m].conj()).norm()).fold(0.0, f64::max) / scale
    }
}

/// Reflection-closed set of nonzero wave numbers for a length-`M` spectrum.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparsityPattern {
    m: usize,
    indices: Vec<usize>,
    #[serde(skip)]
    threshold_bits: u64,
}

impl SparsityPattern {
    /// Builds a pattern from arbitrary indices, adding mirrors `M − i` so the
    /// result is reflection-closed.
    pub fn closed(m: usize, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        if m == 0 {
            return invalid("pattern length M must be positive");
        }
        let mut set = std::collections::BTreeSet::new();
        for i in indices {
            if i >= m {
                return invalid(format!("index {i} out of range for M={m}"));
            }
            set.insert(i);
            set.insert((m - i) % m);
        }
        Ok(SparsityPattern { m, indices: set.into_iter().collect(), threshold_bits: 0 })
    }

    /// The pattern of a real spectrum built from first-half indices, e.g.
    /// `{1,2,4,8,12}` with `M=100`.
    pub fn from_half(m: usize, half: &[usize]) -> Result<Self> {
        Self::closed(m, half.iter().copied())
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn p(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn threshold_used(&self) -> f64 {
        f64::from_bits(self.threshold_bits)
    }

    /// Indices with `0 < i < M/2`.
    pub fn first_half(&self) -> Vec<usize> {
        self.indices.iter().copied().filter(|&i| i > 0 && 2 * i < self.m).collect()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn is_reflection_closed(&self) -> bool {
        self.indices.iter().all(|&i| self.contains((self.m - i) % self.m))
    }

    /// The same wave numbers on a grid of `m_new` samples per period, each
    /// index moved by its signed frequency.
    pub fn remap(&self, m_new: usize) -> Result<Self> {
        let mut out = Vec::with_capacity(self.indices.len());
        for &i in &self.indices {
            out.push(remap_index(i, self.m, m_new)?);
        }
        let mut p = Self::closed(m_new, out)?;
        p.threshold_bits = self.threshold_bits;
        Ok(p)
    }
}

/// Signed frequency of bin `i`: `i` on the lower half, `i − M` above it.
/// The Nyquist bin `M/2` (even `M`) maps to `+M/2`.
pub fn signed_frequency(i: usize, m: usize) -> i64 {
    if 2 * i <= m {
        i as i64
    } else {
        i as i64 - m as i64
    }
}

fn remap_index(i: usize, m: usize, m_new: usize) -> Result<usize> {
    let f = signed_frequency(i, m);
    if 2 * f.unsigned_abs() as usize >= m_new && f != 0 {
        return invalid(format!("frequency {f} (bin {i} of {m}) aliases on a grid of {m_new} samples"));
    }
    if 2 * i == m && i != 0 {
        return invalid(format!("Nyquist bin {i} of {m} cannot be remapped"));
    }
    Ok(f.rem_euclid(m_new as i64) as usize)
}

fn twiddles(m: usize, sign: f64) -> Vec<C64> {
    (0..m)
        .map(|n| {
            let th = sign * 2.0 * PI * n as f64 / m as f64;
            C64::new(th.cos(), th.sin())
        })
        .collect()
}

/// DFT of one period of raw samples.
pub fn dft_values(x: &[f64]) -> Result<FourierSpectrum> {
    let m = x.len();
    if m == 0 {
        return invalid("DFT of an empty signal");
    }
    let tw = twiddles(m, 1.0);
    let coeffs = (0..m)
        .map(|i| {
            let mut acc = C64::new(0.0, 0.0);
            for (k, &v) in x.iter().enumerate() {
                acc += tw[(k * i) % m] * v;
            }
            acc / m as f64
        })
        .collect();
    FourierSpectrum::new(coeffs)
}

/// DFT of the first `period_samples` samples of one component.
pub fn dft(ts: &TimeSeries, component: usize) -> Result<FourierSpectrum> {
    ts.validate()?;
    let m = ts.period_samples().ok_or_else(|| Error::Invalid("DFT needs period_samples to be declared".into()))?;
    if component >= ts.n_components() {
        return invalid(format!("component {component} out of range (J={})", ts.n_components()));
    }
    let row = ts.component(component);
    let x: Vec<f64> = row.iter().take(m).copied().collect();
    dft_values(&x)
}

/// Inverse DFT at the sample points, `x_k = Σ a_i ω^{ki}`, real part.
pub fn inverse_dft(spec: &FourierSpectrum) -> Vec<f64> {
    let m = spec.m();
    let tw = twiddles(m, -1.0);
    (0..m)
        .map(|k| {
            let mut acc = C64::new(0.0, 0.0);
            for (i, &a) in spec.coeffs.iter().enumerate() {
                acc += a * tw[(k * i) % m];
            }
            acc.re
        })
        .collect()
}

/// Evaluates `S_M` at `t/T`. The imaginary part must vanish to `1e-10`
/// relative to `Σ|a_i|`; a larger residue means the spectrum is not that of
/// a real signal.
pub fn reconstruct(spec: &FourierSpectrum, t_over_t: f64) -> Result<f64> {
    let m = spec.m();
    let mut acc = C64::new(0.0, 0.0);
    let mut scale = 0.0;
    for (i, &a) in spec.coeffs.iter().enumerate() {
        if a == C64::new(0.0, 0.0) {
            continue;
        }
        scale += a.norm();
        if 2 * i == m {
            acc += a * (PI * m as f64 * t_over_t).cos();
            continue;
        }
        let f = signed_frequency(i, m) as f64;
        let ph = (f * t_over_t).rem_euclid(1.0);
        let th = -2.0 * PI * ph;
        acc += a * C64::new(th.cos(), th.sin());
    }
    if scale > 0.0 && acc.im.abs() > 1e-10 * scale {
        return invalid(format!(
            "spectrum is not reflection-symmetric: imaginary residue {:.3e} of {:.3e}",
            acc.im.abs(),
            scale
        ));
    }
    Ok(acc.re)
}

/// Pattern of coefficients with `|a_i| > rel_threshold · max |a|`, closed
/// under reflection.
pub fn detect_sparsity(spec: &FourierSpectrum, rel_threshold: f64) -> Result<SparsityPattern> {
    if !(0.0..1.0).contains(&rel_threshold) {
        return invalid(format!("rel_threshold must lie in [0,1), got {rel_threshold}"));
    }
    let m = spec.m();
    let top = spec.max_abs();
    let picked: Vec<usize> =
        if top == 0.0 { Vec::new() } else { (0..m).filter(|&i| spec.coeffs[i].norm() > rel_threshold * top).collect() };
    let mut p = SparsityPattern::closed(m, picked)?;
    p.threshold_bits = rel_threshold.to_bits();
    Ok(p)
}

/// Smallest even samples-per-period that keeps every wave number in the
/// pattern: `2·(i_max + 1)` with `i_max` the largest first-half index.
pub fn min_subsample(pattern: &SparsityPattern) -> Result<usize> {
    let m = pattern.m();
    if pattern.is_empty() {
        return invalid("min_subsample of an empty pattern");
    }
    if !m.is_multiple_of(2) {
        return invalid(format!("min_subsample assumes an even M, got {m}"));
    }
    if pattern.contains(m / 2) {
        return invalid(format!("pattern contains the Nyquist bin {}, which is unsupported", m / 2));
    }
    let top = pattern.first_half().into_iter().max().unwrap_or(0);
    Ok(2 * (top + 1))
}

/// Zeroes every coefficient outside the pattern.
pub fn filter_spectrum(spec: &FourierSpectrum, pattern: &SparsityPattern) -> Result<FourierSpectrum> {
    if pattern.m() != spec.m() {
        return invalid(format!("pattern M={} vs spectrum M={}", pattern.m(), spec.m()));
    }
    let coeffs = (0..spec.m()).map(|i| if pattern.contains(i) { spec.coeffs[i] } else { C64::new(0.0, 0.0) }).collect();
    FourierSpectrum::new(coeffs)
}

/// The same band-limited signal seen on a grid of `m_new` samples per
/// period. Fails when a nonzero coefficient would alias.
pub fn resample_spectrum(spec: &FourierSpectrum, m_new: usize) -> Result<FourierSpectrum> {
    if m_new == 0 {
        return invalid("m_new must be positive");
    }
    let mut out = vec![C64::new(0.0, 0.0); m_new];
    for (i, &a) in spec.coeffs.iter().enumerate() {
        if a != C64::new(0.0, 0.0) {
            out[remap_index(i, spec.m(), m_new)?] += a;
        }
    }
    FourierSpectrum::new(out)
}

/// Samples the spectrum's signal at `t/T = k/M` for `k < n_samples`; the
/// result declares `period_samples = M`.
pub fn synthesize(spec: &FourierSpectrum, n_samples: usize, dt: f64) -> Result<TimeSeries> {
    let m = spec.m();
    let values = (0..n_samples).map(|k| reconstruct(spec, k as f64 / m as f64)).collect::<Result<Vec<f64>>>()?;
    TimeSeries::scalar(values, dt, if n_samples >= m { Some(m) } else { None })
}

/// JSON form of a spectrum together with its detected pattern.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectrumReport {
    #[serde(rename = "M")]
    pub m: usize,
    pub coeffs: Vec<[f64; 2]>,
    pub pattern: Vec<usize>,
    #[serde(rename = "P")]
    pub p: usize,
    pub threshold: f64,
}

impl SpectrumReport {
    pub fn new(spec: &FourierSpectrum, pattern: &SparsityPattern) -> Self {
        SpectrumReport {
            m: spec.m(),
            coeffs: spec.coeffs.iter().map(|c| [c.re, c.im]).collect(),
            pattern: pattern.indices().to_vec(),
            p: pattern.p(),
            threshold: pattern.threshold_used(),
        }
    }

    pub fn spectrum(&self) -> Result<FourierSpectrum> {
        FourierSpectrum::new(self.coeffs.iter().map(|c| C64::new(c[0], c[1])).collect())
    }

    pub fn sparsity(&self) -> Result<SparsityPattern> {
        let mut p = SparsityPattern::closed(self.m, self.pattern.iter().copied())?;
        p.threshold_bits = self.threshold.to_bits();
        Ok(p)
    }
}
