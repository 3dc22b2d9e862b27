//! Condition numbers of the delay systems and the bounds that bracket them:
//! a minimum-norm growth bound, a Vandermonde upper bound driven by node
//! separation, the well-separated asymptotic bound, and a lower bound for
//! nearly colliding nodes.

use std::path::Path;

use ndarray::Array2;
use ndarray_linalg::{Lapack, Scalar};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::delay_solver::{build_spectral_system, root_of_unity, spectral_solution, SpectralMethod};
use crate::error::invalid;
use crate::linalg::singular_values;
use crate::spectral::SparsityPattern;
use crate::Result;

/// Above this, condition numbers only say "numerically singular".
pub const QUALITATIVE_KAPPA: f64 = 1e16;

/// `σ_max/σ_min` over the nonzero singular values.
pub fn cond2<A: Scalar<Real = f64> + Lapack>(a: &Array2<A>) -> Result<f64> {
    let s = singular_values(a)?;
    let hi = s.iter().cloned().fold(0.0, f64::max);
    if !(hi > 0.0) {
        return invalid("condition number of a zero matrix");
    }
    let lo = s.iter().cloned().filter(|&v| v > 0.0).fold(f64::INFINITY, f64::min);
    Ok(hi / lo)
}

/// `‖A‖_F ‖A⁺‖_F` over the nonzero singular values.
pub fn cond_frobenius<A: Scalar<Real = f64> + Lapack>(a: &Array2<A>) -> Result<f64> {
    let s = singular_values(a)?;
    let nz: Vec<f64> = s.iter().cloned().filter(|&v| v > 0.0).collect();
    if nz.is_empty() {
        return invalid("condition number of a zero matrix");
    }
    let f = nz.iter().map(|v| v * v).sum::<f64>().sqrt();
    let fi = nz.iter().map(|v| v.powi(-2)).sum::<f64>().sqrt();
    Ok(f * fi)
}

/// `σ_max/σ_min` over singular values above `rel_cutoff · σ_max`.
pub fn cond_effective<A: Scalar<Real = f64> + Lapack>(a: &Array2<A>, rel_cutoff: f64) -> Result<f64> {
    if !(rel_cutoff > 0.0 && rel_cutoff < 1.0) {
        return invalid(format!("rel_cutoff must lie in (0,1), got {rel_cutoff}"));
    }
    let s = singular_values(a)?;
    let hi = s.iter().cloned().fold(0.0, f64::max);
    if !(hi > 0.0) {
        return invalid("condition number of a zero matrix");
    }
    let lo = s.iter().cloned().filter(|&v| v > rel_cutoff * hi).fold(f64::INFINITY, f64::min);
    Ok(hi / lo)
}

/// Minimum pairwise distance between the nodes `ω^{−i_p}`.
pub fn delta(pattern: &SparsityPattern) -> f64 {
    let m = pattern.m();
    let nodes: Vec<_> = pattern.indices().iter().map(|&i| root_of_unity(-(i as i64), m)).collect();
    let mut best = f64::INFINITY;
    for a in 0..nodes.len() {
        for b in a + 1..nodes.len() {
            best = best.min((nodes[a] - nodes[b]).norm());
        }
    }
    best
}

/// Minimum wrapped spacing of `i_p/M` on the unit torus.
pub fn torus_separation(pattern: &SparsityPattern) -> f64 {
    let m = pattern.m();
    let idx = pattern.indices();
    let mut best = usize::MAX;
    for a in 0..idx.len() {
        for b in a + 1..idx.len() {
            let d = idx[a].abs_diff(idx[b]);
            best = best.min(d.min(m - d));
        }
    }
    best as f64 / m as f64
}

fn floor_term(pattern: &SparsityPattern, l: usize) -> Result<usize> {
    let p = pattern.p();
    if p == 0 {
        return invalid("empty sparsity pattern");
    }
    if l + 1 < p {
        return invalid(format!("L={l} is below P-1={}", p - 1));
    }
    Ok((l + 1 - p) / pattern.m())
}

/// `‖K̂_{P−1}‖²`, the squared norm of the unique square-system solution.
pub fn k_min_norm_sq(pattern: &SparsityPattern) -> Result<f64> {
    let sys = build_spectral_system(pattern, pattern.p() - 1)?;
    let k = spectral_solution(&sys, SpectralMethod::Bp, 0.0)?;
    Ok(k.iter().map(|z| z.norm_sqr()).sum())
}

/// Upper bound on the squared norm of the minimum-norm solution with `L`
/// delays: `‖K̂_{P−1}‖² / (1 + ⌊(L−P+1)/M⌋)`.
pub fn min_norm_bound(pattern: &SparsityPattern, l: usize) -> Result<f64> {
    let f = floor_term(pattern, l)?;
    Ok(k_min_norm_sq(pattern)? / (1.0 + f as f64))
}

/// Upper bound on `κ₂` of the `P×(L+1)` spectral system from node
/// separation and the minimum-norm bound. Returns 1 when `d = 0`.
pub fn prop3_upper(pattern: &SparsityPattern, l: usize) -> Result<f64> {
    let p = pattern.p();
    let f = floor_term(pattern, l)?;
    if p < 2 {
        return Ok(1.0);
    }
    let dl = delta(pattern);
    let knorm = k_min_norm_sq(pattern)?;
    let pm1 = (p - 1) as f64;
    let inner = 1.0 + knorm / (pm1 * (1.0 + f as f64) * dl * dl);
    let d = p as f64 * (inner.powf(pm1 / 2.0) - 1.0);
    if d == 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 + 0.5 * d * (1.0 + (1.0 + 4.0 / d).sqrt()))
}

/// Well-separated bound `√(1 + 2/(δ(L+1)/(2P−2) − 1))`, applicable only
/// when `δ(L+1) > 2(P−1)`.
pub fn bazan_upper(pattern: &SparsityPattern, l: usize) -> Option<f64> {
    let p = pattern.p();
    if p < 2 {
        return None;
    }
    let x = delta(pattern) * (l + 1) as f64;
    let two_p = 2.0 * (p - 1) as f64;
    if x <= two_p {
        return None;
    }
    Some((1.0 + 2.0 / (x / two_p - 1.0)).sqrt())
}

/// Nearly-colliding lower bound `√6/(πτ)` with `τ = (L+1)·min spacing`,
/// applicable when `τ ≤ 1`.
pub fn kunis_lower(pattern: &SparsityPattern, l: usize) -> Option<f64> {
    if pattern.p() < 2 {
        return None;
    }
    let tau = (l + 1) as f64 * torus_separation(pattern);
    (tau <= 1.0).then(|| 6f64.sqrt() / (std::f64::consts::PI * tau))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub prop3_upper: f64,
    pub bazan_upper: Option<f64>,
    pub kunis_lower: Option<f64>,
    pub minnorm_upper: f64,
}

/// Conditioning of the spectral system for a pattern and delay count. The
/// 2-norm condition number uses the full singular spectrum of the wide
/// `P×(L+1)` matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "P")]
    pub p: usize,
    pub kappa2: f64,
    #[serde(rename = "kappaF")]
    pub kappa_f: f64,
    pub kappa_eff: f64,
    pub rel_cutoff: f64,
    pub delta: f64,
    pub bounds: Bounds,
    /// `κ₂ ≥ 1e16`: the value is only a qualitative indication.
    pub qualitative: bool,
}

impl ConditionReport {
    pub fn new(pattern: &SparsityPattern, l: usize, rel_cutoff: f64) -> Result<Self> {
        let sys = build_spectral_system(pattern, l)?;
        let kappa2 = cond2(&sys.matrix)?;
        Ok(ConditionReport {
            m: pattern.m(),
            l,
            p: pattern.p(),
            kappa2,
            kappa_f: cond_frobenius(&sys.matrix)?,
            kappa_eff: cond_effective(&sys.matrix, rel_cutoff)?,
            rel_cutoff,
            delta: delta(pattern),
            bounds: Bounds {
                prop3_upper: prop3_upper(pattern, l)?,
                bazan_upper: bazan_upper(pattern, l),
                kunis_lower: kunis_lower(pattern, l),
                minnorm_upper: min_norm_bound(pattern, l)?,
            },
            qualitative: !(kappa2 < QUALITATIVE_KAPPA),
        })
    }

    pub fn sweep_row(&self) -> SweepRow {
        SweepRow {
            m: self.m,
            l: self.l,
            kappa2: self.kappa2,
            kappa_eff: self.kappa_eff,
            prop3: self.bounds.prop3_upper,
            bazan: self.bounds.bazan_upper,
            kunis: self.bounds.kunis_lower,
            delta: self.delta,
        }
    }

    /// Lower bound ≤ κ₂ ≤ every applicable upper bound, with multiplicative
    /// slack `1 + slack`.
    pub fn sandwich_holds(&self, slack: f64) -> bool {
        let s = 1.0 + slack;
        let lower = self.bounds.kunis_lower.is_none_or(|k| k <= self.kappa2 * s);
        let upper =
            self.kappa2 <= self.bounds.prop3_upper * s && self.bounds.bazan_upper.is_none_or(|b| self.kappa2 <= b * s);
        lower && upper
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub kappa2: f64,
    pub kappa_eff: f64,
    pub prop3: f64,
    pub bazan: Option<f64>,
    pub kunis: Option<f64>,
    pub delta: f64,
}

/// Reports for every `(M, L)` pair with `L ≥ P−1`; the pattern is given by
/// its first-half indices and rebuilt at each `M`.
pub fn sweep(first_half: &[usize], ms: &[usize], ls: &[usize], rel_cutoff: f64) -> Result<Vec<ConditionReport>> {
    let points: Vec<(usize, usize)> = ms.iter().flat_map(|&m| ls.iter().map(move |&l| (m, l))).collect();
    let out = points
        .par_iter()
        .map(|&(m, l)| {
            let pattern = SparsityPattern::from_half(m, first_half)?;
            if l + 1 < pattern.p() {
                return Ok(None);
            }
            ConditionReport::new(&pattern, l, rel_cutoff).map(Some)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(out.into_iter().flatten().collect())
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["M", "L", "kappa2", "kappa_eff", "prop3", "bazan", "kunis", "delta"])?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
    for r in rows {
        w.write_record(&[
            r.m.to_string(),
            r.l.to_string(),
            format!("{:.16e}", r.kappa2),
            format!("{:.16e}", r.kappa_eff),
            format!("{:.16e}", r.prop3),
            opt(r.bazan),
            opt(r.kunis),
            format!("{:.16e}", r.delta),
        ])?;
    }
    w.flush()?;
    Ok(())
}
