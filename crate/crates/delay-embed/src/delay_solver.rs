//! Delay (Hankel) systems and their solution for the delay transition
//! weights, in the time domain and in the spectral domain.
//!
//! Weight layout: row `j·(L+1) + l`, column `i` multiplies component `j`
//! delayed by `l` samples when predicting component `i`. `l = 0` is the
//! newest sample, so a scalar model is `K = (K_0, …, K_L)` with
//! `x_{k+1} = Σ_l K_l x_{k−l}`.

use std::f64::consts::PI;

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::linalg::{lstsq, ThinSvd};
use crate::signals::TimeSeries;
use crate::spectral::SparsityPattern;
use crate::{Error, Result, C64};

pub const DEFAULT_SVD_CUTOFF: f64 = 1e-15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    TimeDomain,
    Bp,
    Svd,
    Exact,
    Given,
}

impl Solver {
    pub fn name(self) -> &'static str {
        match self {
            Solver::TimeDomain => "time_domain",
            Solver::Bp => "bp",
            Solver::Svd => "svd",
            Solver::Exact => "exact",
            Solver::Given => "given",
        }
    }
}

/// Real delay transition weights for `J` components and `L` delays.
#[derive(Clone, Debug, PartialEq)]
pub struct DelayModel {
    j: usize,
    l: usize,
    weights: Array2<f64>,
    imag_residue: f64,
    solver: Solver,
    svd_cutoff: Option<f64>,
}

impl DelayModel {
    pub fn new(
        weights: Array2<f64>,
        l: usize,
        solver: Solver,
        imag_residue: f64,
        svd_cutoff: Option<f64>,
    ) -> Result<Self> {
        let j = weights.ncols();
        if j == 0 || weights.nrows() != j * (l + 1) {
            return invalid(format!("weights must be J(L+1)xJ; got {}x{} with L={l}", weights.nrows(), j));
        }
        if weights.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("delay weights are not finite".into()));
        }
        Ok(DelayModel { j, l, weights, imag_residue, solver, svd_cutoff })
    }

    /// Scalar model from `K = (K_0, …, K_L)`.
    pub fn scalar(k: &[f64]) -> Result<Self> {
        if k.is_empty() {
            return invalid("scalar model needs at least one weight");
        }
        let w = Array2::from_shape_vec((k.len(), 1), k.to_vec()).expect("shape");
        Self::new(w, k.len() - 1, Solver::Given, 0.0, None)
    }

    pub fn j(&self) -> usize {
        self.j
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn weights(&self) -> ArrayView2<'_, f64> {
        self.weights.view()
    }

    pub fn imag_residue(&self) -> f64 {
        self.imag_residue
    }

    pub fn solver(&self) -> Solver {
        self.solver
    }

    pub fn svd_cutoff(&self) -> Option<f64> {
        self.svd_cutoff
    }

    /// Scalar weights `K_0 … K_L`, or `None` for a vector model.
    pub fn k(&self) -> Option<Array1<f64>> {
        (self.j == 1).then(|| self.weights.column(0).to_owned())
    }

    /// `W_l` as a `J×J` matrix acting on `x_{k−l}`.
    pub fn block(&self, l: usize) -> Array2<f64> {
        let n = self.l + 1;
        Array2::from_shape_fn((self.j, self.j), |(i, c)| self.weights[[c * n + l, i]])
    }

    /// The same weights with delays reversed inside each component block
    /// (oldest sample first), as used by stacked formulations that put `W_L`
    /// leftmost.
    pub fn weights_oldest_first(&self) -> Array2<f64> {
        let n = self.l + 1;
        let order: Vec<usize> = (0..self.j).flat_map(|c| (0..n).rev().map(move |l| c * n + l)).collect();
        self.weights.select(Axis(0), &order)
    }

    pub fn to_json(&self) -> DelayModelJson {
        DelayModelJson {
            j: self.j,
            l: self.l,
            weights: self.weights.outer_iter().map(|r| r.to_vec()).collect(),
            weights_oldest_first: Some(self.weights_oldest_first().outer_iter().map(|r| r.to_vec()).collect()),
            imag_residue: self.imag_residue,
            solver: self.solver,
            svd_cutoff: self.svd_cutoff,
        }
    }
}

/// On-disk form of a [`DelayModel`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DelayModelJson {
    #[serde(rename = "J")]
    pub j: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub weights: Vec<Vec<f64>>,
    /// Informational copy of `weights` with delays reversed; ignored on load.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights_oldest_first: Option<Vec<Vec<f64>>>,
    pub imag_residue: f64,
    pub solver: Solver,
    pub svd_cutoff: Option<f64>,
}

impl TryFrom<DelayModelJson> for DelayModel {
    type Error = Error;

    fn try_from(js: DelayModelJson) -> Result<Self> {
        let rows = js.weights.len();
        let flat: Vec<f64> = js.weights.into_iter().flatten().collect();
        if rows == 0 || flat.len() != rows * js.j {
            return invalid("model weights are ragged or empty");
        }
        let w = Array2::from_shape_vec((rows, js.j), flat).map_err(|e| Error::Invalid(e.to_string()))?;
        let m = DelayModel::new(w, js.l, js.solver, js.imag_residue, js.svd_cutoff)?;
        Ok(m)
    }
}

/// Which time indices `k` contribute a row `Y_k → x_{k+1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowSelection {
    /// Explicit indices, no wrap-around.
    Indices(Vec<usize>),
    /// Every `k` in one period, delays wrapped modulo the period.
    AllPeriodic,
    /// `count` consecutive rows from `start`, no wrap-around.
    Contiguous { start: usize, count: usize },
}

/// Stacked delay vectors and next states.
#[derive(Clone, Debug)]
pub struct HankelSystem {
    pub regressor: Array2<f64>,
    pub target: Array2<f64>,
    pub row_indices: Vec<usize>,
    pub l: usize,
    pub j: usize,
}

impl HankelSystem {
    /// Largest absolute entry of `regressor · W − target`.
    pub fn residual(&self, model: &DelayModel) -> f64 {
        let r = self.regressor.dot(&model.weights) - &self.target;
        r.iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}

pub fn build_hankel(ts: &TimeSeries, l: usize, rows: &RowSelection) -> Result<HankelSystem> {
    ts.validate()?;
    let n = ts.len();
    let jn = ts.n_components();
    let x = ts.data();
    let (ks, wrap): (Vec<usize>, Option<usize>) = match rows {
        RowSelection::AllPeriodic => {
            let m = ts
                .period_samples()
                .ok_or_else(|| Error::Invalid("all-periodic rows need period_samples to be declared".into()))?;
            ((0..m).collect(), Some(m))
        }
        RowSelection::Contiguous { start, count } => {
            if *count == 0 {
                return invalid("contiguous selection needs at least one row");
            }
            if *start < l || start + count > n - 1 {
                return invalid(format!(
                    "contiguous({start}, {count}) needs start >= L={l} and start+count <= N-1={}",
                    n - 1
                ));
            }
            ((*start..start + count).collect(), None)
        }
        RowSelection::Indices(list) => {
            if list.is_empty() {
                return invalid("row index list is empty");
            }
            if let Some(&k) = list.iter().find(|&&k| k < l || k + 1 >= n) {
                return invalid(format!("row index {k} needs L={l} <= k < N-1={}", n - 1));
            }
            (list.clone(), None)
        }
    };
    let q = ks.len();
    let mut regressor = Array2::<f64>::zeros((q, jn * (l + 1)));
    let mut target = Array2::<f64>::zeros((q, jn));
    for (r, &k) in ks.iter().enumerate() {
        for c in 0..jn {
            for d in 0..=l {
                let idx = match wrap {
                    Some(m) => (k + m * (d / m + 1) - d) % m,
                    None => k - d,
                };
                regressor[[r, c * (l + 1) + d]] = x[[c, idx]];
            }
            let next = match wrap {
                Some(m) => (k + 1) % m,
                None => k + 1,
            };
            target[[r, c]] = x[[c, next]];
        }
    }
    Ok(HankelSystem { regressor, target, row_indices: ks, l, j: jn })
}

/// Minimum-norm least-squares weights through a truncated SVD.
pub fn solve_time_domain(sys: &HankelSystem, svd_rel_cutoff: f64) -> Result<DelayModel> {
    if !(0.0..1.0).contains(&svd_rel_cutoff) {
        return invalid(format!("svd cutoff must lie in [0,1), got {svd_rel_cutoff}"));
    }
    if sys.regressor.iter().all(|&v| v == 0.0) {
        return invalid("regressor is identically zero");
    }
    let w = lstsq(&sys.regressor, &sys.target, svd_rel_cutoff)?;
    DelayModel::new(w, sys.l, Solver::TimeDomain, 0.0, Some(svd_rel_cutoff))
}

/// Vandermonde system `A K = b` restricted to the pattern rows.
#[derive(Clone, Debug)]
pub struct SpectralSystem {
    pub pattern: SparsityPattern,
    pub l: usize,
    /// `ω^{−i_p} = e^{+j2π i_p/M}`.
    pub nodes: Vec<C64>,
    pub matrix: Array2<C64>,
    pub rhs: Array1<C64>,
}

impl SpectralSystem {
    pub fn m(&self) -> usize {
        self.pattern.m()
    }

    /// `‖A K − b‖₂` for a real weight vector.
    pub fn residual(&self, k: &Array1<f64>) -> f64 {
        let kc = k.mapv(|v| C64::new(v, 0.0));
        (self.matrix.dot(&kc) - &self.rhs).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// `e^{+j2π n/M}` with `n` reduced modulo `M` first.
pub(crate) fn root_of_unity(n: i64, m: usize) -> C64 {
    let r = n.rem_euclid(m as i64) as f64;
    let th = 2.0 * PI * r / m as f64;
    C64::new(th.cos(), th.sin())
}

pub fn build_spectral_system(pattern: &SparsityPattern, l: usize) -> Result<SpectralSystem> {
    if pattern.is_empty() {
        return invalid("spectral system needs a nonempty pattern");
    }
    let m = pattern.m();
    let idx = pattern.indices();
    let p = idx.len();
    let nodes: Vec<C64> = idx.iter().map(|&i| root_of_unity(i as i64, m)).collect();
    let matrix = Array2::from_shape_fn((p, l + 1), |(r, c)| root_of_unity((idx[r] as i64) * (c as i64), m));
    let rhs = Array1::from_shape_fn(p, |r| root_of_unity(-(idx[r] as i64), m));
    Ok(SpectralSystem { pattern: pattern.clone(), l, nodes, matrix, rhs })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralMethod {
    Bp,
    Svd,
}

/// Björck–Pereyra solve of `Σ_c K_c α_p^c = b_p` for distinct nodes `α`:
/// Newton divided differences followed by conversion to monomial form.
pub fn bjorck_pereyra(nodes: &[C64], rhs: &[C64]) -> Result<Vec<C64>> {
    let n = nodes.len();
    if n == 0 || rhs.len() != n {
        return invalid("Björck–Pereyra needs matching nonempty nodes and right-hand side");
    }
    for a in 0..n {
        for b in a + 1..n {
            if (nodes[a] - nodes[b]).norm() == 0.0 {
                return Err(Error::Numerical(format!("repeated node at positions {a} and {b}")));
            }
        }
    }
    // Leja ordering keeps the divided differences well scaled; permuting
    // equations leaves the solution unchanged.
    let order = leja_order(nodes);
    let nodes: Vec<C64> = order.iter().map(|&i| nodes[i]).collect();
    let mut c: Vec<C64> = order.iter().map(|&i| rhs[i]).collect();
    for k in 0..n - 1 {
        for i in (k + 1..n).rev() {
            c[i] = (c[i] - c[i - 1]) / (nodes[i] - nodes[i - k - 1]);
        }
    }
    for k in (0..n - 1).rev() {
        for i in k..n - 1 {
            let next = c[i + 1];
            c[i] -= nodes[k] * next;
        }
    }
    Ok(c)
}

fn leja_order(nodes: &[C64]) -> Vec<usize> {
    let n = nodes.len();
    let mut order = Vec::with_capacity(n);
    let first = (0..n).max_by(|&a, &b| nodes[a].norm().total_cmp(&nodes[b].norm())).unwrap_or(0);
    order.push(first);
    let mut score = vec![0.0f64; n];
    for i in 0..n {
        score[i] = (nodes[i] - nodes[first]).norm().ln();
    }
    while order.len() < n {
        let next = (0..n)
            .filter(|i| !order.contains(i))
            .max_by(|&a, &b| score[a].total_cmp(&score[b]))
            .expect("remaining node");
        order.push(next);
        for i in 0..n {
            score[i] += (nodes[i] - nodes[next]).norm().ln();
        }
    }
    order
}

/// Complex solution of the spectral system before realization.
pub fn spectral_solution(sys: &SpectralSystem, method: SpectralMethod, svd_cutoff: f64) -> Result<Array1<C64>> {
    match method {
        SpectralMethod::Bp => {
            if sys.matrix.nrows() != sys.matrix.ncols() {
                return invalid(format!(
                    "bp needs a square system (L = P-1); got {}x{}",
                    sys.matrix.nrows(),
                    sys.matrix.ncols()
                ));
            }
            Ok(Array1::from(bjorck_pereyra(&sys.nodes, sys.rhs.as_slice().expect("contiguous"))?))
        }
        SpectralMethod::Svd => {
            let b = sys.rhs.clone().insert_axis(Axis(1));
            let x = ThinSvd::new(&sys.matrix)?.solve(&b, svd_cutoff);
            Ok(x.column(0).to_owned())
        }
    }
}

fn realize(k: &Array1<C64>, l: usize, solver: Solver, cutoff: Option<f64>) -> Result<DelayModel> {
    let re = k.mapv(|z| (z + z.conj()).re / 2.0);
    let residue = k.iter().map(|z| z.im * z.im).sum::<f64>().sqrt();
    let w = re.insert_axis(Axis(1));
    DelayModel::new(w, l, solver, residue, cutoff)
}

/// Solves the spectral system and realizes the solution as real weights,
/// keeping the discarded imaginary norm as `imag_residue`.
pub fn solve_spectral(sys: &SpectralSystem, method: SpectralMethod) -> Result<DelayModel> {
    let k = spectral_solution(sys, method, DEFAULT_SVD_CUTOFF)?;
    match method {
        SpectralMethod::Bp => realize(&k, sys.l, Solver::Bp, None),
        SpectralMethod::Svd => realize(&k, sys.l, Solver::Svd, Some(DEFAULT_SVD_CUTOFF)),
    }
}

/// Closed-form weights at `L = P−1` through the explicit inverse of the
/// Vandermonde matrix. Elementary symmetric polynomials are summed over
/// node subsets, so the cost grows like `P·2^P`; `P ≤ 16`.
pub fn exact_k(pattern: &SparsityPattern) -> Result<DelayModel> {
    let p = pattern.p();
    if p == 0 {
        return invalid("exact K needs a nonempty pattern");
    }
    if p > 16 {
        return invalid(format!("exact K enumerates 2^(P-1) node subsets per term; P={p} exceeds the limit of 16"));
    }
    let sys = build_spectral_system(pattern, p - 1)?;
    let alpha = &sys.nodes;
    let mut k = Array1::<C64>::zeros(p);
    for n in 0..p {
        let others: Vec<C64> = (0..p).filter(|&l| l != n).map(|l| alpha[l]).collect();
        let mut e = vec![C64::new(0.0, 0.0); p];
        for mask in 0u32..(1u32 << others.len()) {
            let mut prod = C64::new(1.0, 0.0);
            for (b, a) in others.iter().enumerate() {
                if mask & (1 << b) != 0 {
                    prod *= a;
                }
            }
            e[mask.count_ones() as usize] += prod;
        }
        let denom = others.iter().fold(C64::new(1.0, 0.0), |acc, &a| acc * (alpha[n] - a));
        let scale = sys.rhs[n] / denom;
        for c in 0..p {
            let deg = p - 1 - c;
            let sign = if deg.is_multiple_of(2) { 1.0 } else { -1.0 };
            k[c] += scale * e[deg] * sign;
        }
    }
    realize(&k, p - 1, Solver::Exact, None)
}

/// Fewest delays reproducing a scalar signal with this pattern: `P − 1`.
pub fn minimal_delay_scalar(pattern: &SparsityPattern) -> Result<usize> {
    if pattern.is_empty() {
        return invalid("minimal delay of an empty pattern");
    }
    Ok(pattern.p() - 1)
}

/// Autoregressive rollout. `seed` is `J×(L+1)` with the newest state in the
/// last column; the result holds the `n_steps` predicted states.
pub fn predict_rollout(model: &DelayModel, seed: ArrayView2<'_, f64>, n_steps: usize) -> Result<Array2<f64>> {
    let (j, l) = (model.j, model.l);
    if seed.dim() != (j, l + 1) {
        return invalid(format!("seed window must be {j}x{}, got {}x{}", l + 1, seed.nrows(), seed.ncols()));
    }
    let mut buf = Array2::<f64>::zeros((j, l + 1 + n_steps));
    buf.slice_mut(s![.., ..l + 1]).assign(&seed);
    let w = &model.weights;
    for t in l + 1..l + 1 + n_steps {
        for i in 0..j {
            let mut acc = 0.0;
            for c in 0..j {
                for d in 0..=l {
                    acc += w[[c * (l + 1) + d, i]] * buf[[c, t - 1 - d]];
                }
            }
            buf[[i, t]] = acc;
        }
    }
    Ok(buf.slice(s![.., l + 1..]).to_owned())
}

/// Seeds with the first `L+1` samples of `truth` and rolls out until the
/// trajectory has `n_total` samples (seed included).
pub fn rollout_from_start(model: &DelayModel, truth: &TimeSeries, n_total: usize) -> Result<Array2<f64>> {
    let l = model.l;
    if truth.len() < l + 1 || n_total < l + 1 {
        return invalid(format!("need at least L+1={} samples to seed the rollout", l + 1));
    }
    let seed = truth.data().slice(s![.., ..l + 1]).to_owned();
    let pred = predict_rollout(model, seed.view(), n_total - l - 1)?;
    let mut out = Array2::<f64>::zeros((model.j, n_total));
    out.slice_mut(s![.., ..l + 1]).assign(&seed);
    out.slice_mut(s![.., l + 1..]).assign(&pred);
    Ok(out)
}

/// Mean over components of `MSE / var(truth component)`. Non-finite
/// predictions score `+∞`.
pub fn nmse(pred: ArrayView2<'_, f64>, truth: ArrayView2<'_, f64>) -> Result<f64> {
    if pred.dim() != truth.dim() || truth.is_empty() {
        return invalid(format!("nmse shape mismatch: {:?} vs {:?}", pred.dim(), truth.dim()));
    }
    let mut total = 0.0;
    for (pj, tj) in pred.outer_iter().zip(truth.outer_iter()) {
        let n = tj.len() as f64;
        let mean = tj.sum() / n;
        let var = tj.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        if var == 0.0 {
            return invalid("nmse undefined for a constant truth component");
        }
        let mse = pj.iter().zip(tj.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n;
        total += mse / var;
    }
    let v = total / pred.nrows() as f64;
    Ok(if v.is_finite() { v } else { f64::INFINITY })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::gen_five_mode;
    use crate::spectral::{detect_sparsity, dft};
    use ndarray::array;

    fn cosine8() -> TimeSeries {
        let x: Vec<f64> = (0..8).map(|k| (2.0 * PI * k as f64 / 8.0).cos()).collect();
        TimeSeries::scalar(x, 1.0, Some(8)).unwrap()
    }

    /// Direct 2x2 complex solve of the spectral system for pattern {1, 7}.
    fn two_by_two_oracle() -> [f64; 2] {
        let a = C64::from_polar(1.0, 2.0 * PI / 8.0);
        let b = a.conj();
        // [1 a; 1 b] K = [b; a]
        let det = b - a;
        let k0 = (b * b - a * a) / det;
        let k1 = (a - b) / det;
        assert!(k0.im.abs() < 1e-14 && k1.im.abs() < 1e-14);
        [k0.re, k1.re]
    }

    #[test]
    fn hankel_shift_and_wrap() {
        let ts = TimeSeries::scalar(vec![1.0, 2.0, 3.0, 4.0], 1.0, Some(4)).unwrap();
        let sys = build_hankel(&ts, 0, &RowSelection::Contiguous { start: 0, count: 3 }).unwrap();
        assert_eq!(sys.regressor.column(0).to_vec(), vec![1.0, 2.0, 3.0]);
        assert_eq!(sys.target.column(0).to_vec(), vec![2.0, 3.0, 4.0]);
        let per = build_hankel(&ts, 1, &RowSelection::AllPeriodic).unwrap();
        assert_eq!(per.regressor.row(0).to_vec(), vec![1.0, 4.0]);
        assert_eq!(per.target[[3, 0]], 1.0);
    }

    #[test]
    fn hankel_guards() {
        let ts = TimeSeries::scalar(vec![1.0, 2.0, 3.0, 4.0], 1.0, None).unwrap();
        assert!(build_hankel(&ts, 1, &RowSelection::AllPeriodic).is_err());
        assert!(build_hankel(&ts, 1, &RowSelection::Contiguous { start: 0, count: 2 }).is_err());
        assert!(build_hankel(&ts, 1, &RowSelection::Contiguous { start: 1, count: 3 }).is_err());
    }

    #[test]
    fn five_mode_partial_rows_shape() {
        let ts = gen_five_mode(100, 2).unwrap();
        let sys = build_hankel(&ts, 9, &RowSelection::Contiguous { start: 9, count: 30 }).unwrap();
        assert_eq!(sys.regressor.dim(), (30, 10));
    }

    #[test]
    fn single_cosine_time_domain() {
        let want = two_by_two_oracle();
        let sys = build_hankel(&cosine8(), 1, &RowSelection::AllPeriodic).unwrap();
        let k = solve_time_domain(&sys, DEFAULT_SVD_CUTOFF).unwrap().k().unwrap();
        assert!((k[0] - want[0]).abs() < 1e-10 && (k[1] - want[1]).abs() < 1e-10);
        assert!((want[0] - 2f64.sqrt()).abs() < 1e-12 && (want[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_system_small_example() {
        let p = SparsityPattern::closed(4, [1, 3]).unwrap();
        let sys = build_spectral_system(&p, 1).unwrap();
        let w = C64::new(0.0, -1.0);
        assert!((sys.matrix[[0, 1]] - w.powi(-1)).norm() < 1e-15);
        assert!((sys.matrix[[1, 1]] - w.powi(-3)).norm() < 1e-15);
        assert!((sys.rhs[0] - w).norm() < 1e-15);
        assert!((sys.rhs[1] - w.powi(3)).norm() < 1e-15);
        let z = build_spectral_system(&SparsityPattern::closed(5, [0]).unwrap(), 0).unwrap();
        assert_eq!(z.matrix[[0, 0]], C64::new(1.0, 0.0));
        assert_eq!(z.rhs[0], C64::new(1.0, 0.0));
    }

    #[test]
    fn spectral_two_by_two_all_methods() {
        let want = two_by_two_oracle();
        let p = SparsityPattern::closed(8, [1, 7]).unwrap();
        let sys = build_spectral_system(&p, 1).unwrap();
        for m in [SpectralMethod::Bp, SpectralMethod::Svd] {
            let k = solve_spectral(&sys, m).unwrap().k().unwrap();
            assert!((k[0] - want[0]).abs() < 1e-10 && (k[1] - want[1]).abs() < 1e-10);
        }
        let k = exact_k(&p).unwrap().k().unwrap();
        assert!((k[0] - want[0]).abs() < 1e-10 && (k[1] - want[1]).abs() < 1e-10);
    }

    #[test]
    fn bp_rejects_rectangular() {
        let p = SparsityPattern::closed(8, [1, 7]).unwrap();
        let sys = build_spectral_system(&p, 3).unwrap();
        assert!(solve_spectral(&sys, SpectralMethod::Bp).is_err());
    }

    #[test]
    fn exact_matches_bp_and_dense_case() {
        let p = SparsityPattern::closed(100, [1, 2, 98, 99]).unwrap();
        let bp = solve_spectral(&build_spectral_system(&p, 3).unwrap(), SpectralMethod::Bp).unwrap();
        let ex = exact_k(&p).unwrap();
        let d = (&bp.k().unwrap() - &ex.k().unwrap()).mapv(f64::abs);
        assert!(d.iter().all(|&v| v < 1e-8));
        let dense = exact_k(&SparsityPattern::closed(4, 0..4).unwrap()).unwrap().k().unwrap();
        let want = [0.0, 0.0, 0.0, 1.0];
        assert!(dense.iter().zip(want).all(|(a, b)| (a - b).abs() < 1e-12));
        assert!(exact_k(&SparsityPattern::closed(40, 1..18).unwrap()).is_err());
    }

    #[test]
    fn five_mode_bp_vs_svd() {
        let s = dft(&gen_five_mode(100, 1).unwrap(), 0).unwrap();
        let p = detect_sparsity(&s, 1e-10).unwrap();
        let sys = build_spectral_system(&p, 9).unwrap();
        assert_eq!(sys.matrix.dim(), (10, 10));
        let a = solve_spectral(&sys, SpectralMethod::Bp).unwrap().k().unwrap();
        let b = solve_spectral(&sys, SpectralMethod::Svd).unwrap().k().unwrap();
        let e = exact_k(&p).unwrap().k().unwrap();
        // kappa_2 is about 2e8 here, so agreement is measured relative to |K|.
        let scale = e.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((&a - &b).iter().all(|v| v.abs() < 1e-8 * scale));
        assert!((&a - &e).iter().all(|v| v.abs() < 1e-8 * scale));
        assert_eq!(minimal_delay_scalar(&p).unwrap(), 9);
    }

    #[test]
    fn minimal_delay_examples() {
        assert_eq!(minimal_delay_scalar(&SparsityPattern::closed(16, [3]).unwrap()).unwrap(), 1);
        assert!(minimal_delay_scalar(&SparsityPattern::closed(16, []).unwrap()).is_err());
    }

    #[test]
    fn rollout_of_known_recurrence() {
        let model = DelayModel::scalar(&[2f64.sqrt(), -1.0]).unwrap();
        let seed = array![[(-(2.0 * PI) / 8.0).cos(), 1.0]];
        let out = predict_rollout(&model, seed.view(), 40).unwrap();
        for k in 1..=40 {
            let want = (2.0 * PI * k as f64 / 8.0).cos();
            assert!((out[[0, k - 1]] - want).abs() < 1e-9);
        }
        let zero = DelayModel::scalar(&[0.0, 0.0, 0.0]).unwrap();
        let out = predict_rollout(&zero, array![[1.0, 2.0, 3.0]].view(), 5).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn nmse_definition() {
        let t = array![[1.0, -1.0, 1.0, -1.0]];
        assert_eq!(nmse(t.view(), t.view()).unwrap(), 0.0);
        let shifted = t.mapv(|v| v + 0.5);
        assert!((nmse(shifted.view(), t.view()).unwrap() - 0.25).abs() < 1e-15);
        let zero = Array2::<f64>::zeros((1, 4));
        assert!((nmse(zero.view(), t.view()).unwrap() - 1.0).abs() < 1e-15);
        assert!(nmse(t.view(), zero.view()).is_err());
        let blown = array![[f64::NAN, 0.0, 0.0, 0.0]];
        assert_eq!(nmse(blown.view(), t.view()).unwrap(), f64::INFINITY);
    }

    #[test]
    fn model_json_round_trip() {
        let m = DelayModel::scalar(&[0.25, -1.5, 3.0]).unwrap();
        let js = serde_json::to_string(&m.to_json()).unwrap();
        let back: DelayModelJson = serde_json::from_str(&js).unwrap();
        assert_eq!(DelayModel::try_from(back).unwrap(), m);
    }

    #[test]
    fn block_layout() {
        // J=2, L=1: rows (c0,d0), (c0,d1), (c1,d0), (c1,d1).
        let w = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0], [7.0, 8.0]];
        let m = DelayModel::new(w, 1, Solver::Given, 0.0, None).unwrap();
        assert_eq!(m.block(0), array![[1.0, 5.0], [2.0, 6.0]]);
        assert_eq!(m.block(1), array![[3.0, 7.0], [4.0, 8.0]]);
        assert_eq!(m.weights_oldest_first().row(0).to_vec(), vec![3.0, 4.0]);
    }
}
