//! Companion and block-companion matrices, their eigenstructure, HODMD with
//! spatial SVD reduction, and pseudospectra.

use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use ndarray_linalg::{JobSvd, SVDDC};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::delay_solver::DelayModel;
use crate::error::invalid;
use crate::linalg::{eig_sorted, singular_values, solve_square, to_complex, ThinSvd};
use crate::signals::TimeSeries;
use crate::{Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompanionKind {
    /// `(L+1)×(L+1)`, first column `K_0 … K_L`, ones on the superdiagonal;
    /// acts on row vectors `Y_k^T = (x_k, …, x_{k−L})`.
    Scalar,
    /// `J(L+1)×J(L+1)`, identity super-blocks and last block row
    /// `W_L … W_0`; acts on `h_k = (x_{k−L}; …; x_k)`.
    Block,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompanionMatrix {
    pub kind: CompanionKind,
    pub j: usize,
    pub l: usize,
    pub matrix: Array2<f64>,
}

pub fn companion(model: &DelayModel) -> CompanionMatrix {
    let (j, l) = (model.j(), model.l());
    let n = j * (l + 1);
    let mut a = Array2::<f64>::zeros((n, n));
    if j == 1 {
        let k = model.weights();
        for i in 0..=l {
            a[[i, 0]] = k[[i, 0]];
            if i < l {
                a[[i, i + 1]] = 1.0;
            }
        }
        return CompanionMatrix { kind: CompanionKind::Scalar, j, l, matrix: a };
    }
    for b in 0..l {
        for i in 0..j {
            a[[b * j + i, (b + 1) * j + i]] = 1.0;
        }
    }
    for d in 0..=l {
        let w = model.block(d);
        let col = (l - d) * j;
        a.slice_mut(s![l * j.., col..col + j]).assign(&w);
    }
    CompanionMatrix { kind: CompanionKind::Block, j, l, matrix: a }
}

impl CompanionMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// The matrix advancing a column state vector one step: the transpose
    /// for the scalar form, the matrix itself for the block form.
    pub fn propagator(&self) -> Array2<f64> {
        match self.kind {
            CompanionKind::Scalar => self.matrix.t().to_owned(),
            CompanionKind::Block => self.matrix.clone(),
        }
    }

    /// Column state for a seed window (`J×(L+1)`, newest last).
    pub fn state_from_window(&self, seed: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        if seed.dim() != (self.j, self.l + 1) {
            return invalid(format!("seed window must be {}x{}", self.j, self.l + 1));
        }
        Ok(match self.kind {
            CompanionKind::Scalar => Array1::from_iter((0..=self.l).map(|m| seed[[0, self.l - m]])),
            CompanionKind::Block => {
                Array1::from_iter((0..=self.l).flat_map(|b| (0..self.j).map(move |i| seed[[i, b]])))
            }
        })
    }

    fn current(&self, state: &Array1<f64>) -> Array1<f64> {
        match self.kind {
            CompanionKind::Scalar => Array1::from_elem(1, state[0]),
            CompanionKind::Block => state.slice(s![self.l * self.j..]).to_owned(),
        }
    }

    /// Rollout by repeated multiplication with the companion matrix.
    pub fn rollout(&self, seed: ArrayView2<'_, f64>, n_steps: usize) -> Result<Array2<f64>> {
        let p = self.propagator();
        let mut state = self.state_from_window(seed)?;
        let mut out = Array2::<f64>::zeros((self.j, n_steps));
        for t in 0..n_steps {
            state = p.dot(&state);
            out.column_mut(t).assign(&self.current(&state));
        }
        Ok(out)
    }
}

/// Eigenvalues with their spatial modes and, once fitted to a state,
/// temporal amplitudes: `x_{L+s} ≈ Re Σ_i λ_i^s φ_i b_i`.
#[derive(Clone, Debug)]
pub struct ModalDecomposition {
    pub eigenvalues: Vec<C64>,
    /// `J × n` spatial modes `φ_i`.
    pub spatial_modes: Array2<C64>,
    /// Full eigenvectors in the state space of the propagator.
    pub state_modes: Array2<C64>,
    pub amplitudes: Option<Vec<C64>>,
    pub r_prime: usize,
    /// For the scalar companion: largest deviation of the left eigenvectors
    /// from Vandermonde structure.
    pub vandermonde_defect: Option<f64>,
    /// Condition number of the eigenvector matrix; huge values flag a
    /// (nearly) defective matrix.
    pub eigvec_condition: f64,
}

impl ModalDecomposition {
    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.norm()).fold(0.0, f64::max)
    }

    pub fn is_defective(&self) -> bool {
        !(self.eigvec_condition < 1e12)
    }

    /// `n` states starting at the fitted one (`s = 0 … n−1`).
    pub fn reconstruct(&self, n: usize) -> Result<Array2<f64>> {
        let b =
            self.amplitudes.as_ref().ok_or_else(|| Error::Invalid("modal amplitudes have not been fitted".into()))?;
        let j = self.spatial_modes.nrows();
        let mut out = Array2::<f64>::zeros((j, n));
        let mut pw: Vec<C64> = b.clone();
        for t in 0..n {
            for i in 0..j {
                let mut acc = C64::new(0.0, 0.0);
                for (q, w) in pw.iter().enumerate() {
                    acc += self.spatial_modes[[i, q]] * w;
                }
                out[[i, t]] = acc.re;
            }
            for (w, lam) in pw.iter_mut().zip(&self.eigenvalues) {
                *w *= lam;
            }
        }
        Ok(out)
    }

    pub fn report(&self) -> ModalReport {
        ModalReport {
            eigenvalues: self
                .eigenvalues
                .iter()
                .map(|l| EigenEntry { value: [l.re, l.im], modulus: l.norm(), phase: l.arg() })
                .collect(),
            spectral_radius: self.spectral_radius(),
            r_prime: self.r_prime,
            amplitudes: self.amplitudes.as_ref().map(|b| b.iter().map(|z| [z.re, z.im]).collect()),
            vandermonde_defect: self.vandermonde_defect,
            eigvec_condition: self.eigvec_condition,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EigenEntry {
    pub value: [f64; 2],
    pub modulus: f64,
    pub phase: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModalReport {
    pub eigenvalues: Vec<EigenEntry>,
    pub spectral_radius: f64,
    pub r_prime: usize,
    pub amplitudes: Option<Vec<[f64; 2]>>,
    pub vandermonde_defect: Option<f64>,
    pub eigvec_condition: f64,
}

fn eigvec_condition(v: &Array2<C64>) -> Result<f64> {
    let s = singular_values(v)?;
    let lo = s.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(if lo > 0.0 { s[0] / lo } else { f64::INFINITY })
}

/// Eigendecomposition of a companion matrix, sorted by descending modulus
/// then ascending phase.
pub fn eigendecompose(cm: &CompanionMatrix) -> Result<ModalDecomposition> {
    let p = cm.propagator();
    let (vals, vecs) = eig_sorted(&p)?;
    let n = vals.len();
    let (spatial, defect) = match cm.kind {
        CompanionKind::Scalar => {
            let spatial = vecs.slice(s![0..1, ..]).to_owned();
            let mut worst = 0.0f64;
            for (q, lam) in vals.iter().enumerate() {
                let v = vecs.column(q);
                let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                for m in 1..n {
                    worst = worst.max((v[m] * lam - v[m - 1]).norm() / norm);
                }
            }
            (spatial, Some(worst))
        }
        CompanionKind::Block => (vecs.slice(s![cm.l * cm.j.., ..]).to_owned(), None),
    };
    Ok(ModalDecomposition {
        eigenvalues: vals,
        spatial_modes: spatial,
        eigvec_condition: eigvec_condition(&vecs)?,
        state_modes: vecs,
        amplitudes: None,
        r_prime: n,
        vandermonde_defect: defect,
    })
}

/// Fits temporal amplitudes so that `reconstruct` starts at the seed's
/// newest state.
pub fn fit_amplitudes(cm: &CompanionMatrix, modal: &mut ModalDecomposition, seed: ArrayView2<'_, f64>) -> Result<()> {
    let state = cm.state_from_window(seed)?;
    let rhs = to_complex(&state.insert_axis(Axis(1)));
    let b = solve_square(&modal.state_modes, &rhs)?;
    modal.amplitudes = Some(b.column(0).to_vec());
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankLimit {
    /// Singular values below the relative cutoff.
    Cutoff,
    /// `r′ ≤ r(L+1)`, the delay-embedded dimension.
    EmbeddedDimension,
    /// `r′ ≤ M−1−L`, the number of shifted snapshot pairs.
    SnapshotPairs,
}

#[derive(Clone, Debug)]
pub struct Hodmd {
    pub modal: ModalDecomposition,
    pub r: usize,
    pub l: usize,
    pub r_prime_cap: usize,
    pub binding: RankLimit,
    pub reduced_operator: Array2<f64>,
    /// Number of snapshots used.
    pub m: usize,
}

impl Hodmd {
    pub fn r_prime(&self) -> usize {
        self.modal.r_prime
    }

    /// Reconstruction `x_L … x_{L+n−1}` from the fitted amplitudes.
    pub fn reconstruct(&self, n: usize) -> Result<Array2<f64>> {
        self.modal.reconstruct(n)
    }
}

/// Higher-order DMD: spatial SVD to `r` dimensions, delay stacking with `L`
/// delays, a second SVD truncated at `r_prime_cutoff · σ_max` and at
/// `min(r(L+1), M−1−L)`, then the reduced operator and its lifted modes.
pub fn hodmd(data: &TimeSeries, r: usize, l: usize, r_prime_cutoff: f64) -> Result<Hodmd> {
    data.validate()?;
    let x = data.data();
    let (jn, m) = x.dim();
    if r == 0 || r > jn.min(m) {
        return invalid(format!("r={r} must lie in 1..=min(J, M)={}", jn.min(m)));
    }
    if m < 2 || l > m - 2 {
        return invalid(format!("L={l} violates L <= M-2 = {} (no shifted snapshot pair would remain)", m as i64 - 2));
    }
    let xo = x.to_owned();
    let (u, _, _) = xo.svddc(JobSvd::Some)?;
    let u = u.ok_or_else(|| Error::Numerical("spatial SVD returned no basis".into()))?;
    let ur = u.slice(s![.., ..r]).to_owned();
    let xh = ur.t().dot(&xo);
    let cols = m - l;
    let mut h = Array2::<f64>::zeros((r * (l + 1), cols));
    for c in 0..cols {
        for b in 0..=l {
            h.slice_mut(s![b * r..(b + 1) * r, c]).assign(&xh.column(c + b));
        }
    }
    let h0 = h.slice(s![.., ..cols - 1]).to_owned();
    let h1 = h.slice(s![.., 1..]).to_owned();
    let svd = ThinSvd::new(&h0)?;
    let by_cutoff = svd.rank(r_prime_cutoff);
    let cap = (r * (l + 1)).min(m - 1 - l);
    let (rp, binding) = if by_cutoff < cap {
        (by_cutoff, RankLimit::Cutoff)
    } else if r * (l + 1) <= m - 1 - l {
        (cap, RankLimit::EmbeddedDimension)
    } else {
        (cap, RankLimit::SnapshotPairs)
    };
    if rp == 0 {
        return Err(Error::Numerical("delay-embedded data has no singular value above the cutoff".into()));
    }
    let q = svd.u.slice(s![.., ..rp]).to_owned();
    let z = svd.vt.slice(s![..rp, ..]).t().to_owned();
    let mut a_hat = q.t().dot(&h1).dot(&z);
    for (c, mut col) in a_hat.axis_iter_mut(Axis(1)).enumerate() {
        col.mapv_inplace(|v| v / svd.s[c]);
    }
    let (vals, w) = eig_sorted(&a_hat)?;
    let lifted = to_complex(&q).dot(&w);
    let last = lifted.slice(s![l * r.., ..]).to_owned();
    let spatial = to_complex(&ur).dot(&last);
    let h_l = h0.column(0).to_owned().insert_axis(Axis(1));
    let rhs = to_complex(&q.t().dot(&h_l));
    let b = solve_square(&w, &rhs)?;
    let modal = ModalDecomposition {
        eigenvalues: vals,
        spatial_modes: spatial,
        eigvec_condition: eigvec_condition(&w)?,
        state_modes: lifted,
        amplitudes: Some(b.column(0).to_vec()),
        r_prime: rp,
        vandermonde_defect: None,
    };
    Ok(Hodmd { modal, r, l, r_prime_cap: cap, binding, reduced_operator: a_hat, m })
}

/// `L_opt = ⌈M/(r+1)⌉` and the crossing point `r′_* = rM/(r+1)` of the two
/// rank constraints.
pub fn optimal_delay(m: usize, r: usize) -> Result<(usize, f64)> {
    if r == 0 || m < 2 {
        return invalid(format!("optimal_delay needs r >= 1 and M >= 2, got r={r}, M={m}"));
    }
    let l_opt = m.div_ceil(r + 1);
    Ok((l_opt, r as f64 * m as f64 / (r as f64 + 1.0)))
}

/// Rectangular grid in the complex plane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub n_re: usize,
    pub n_im: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { re_min: -1.5, re_max: 1.5, im_min: -1.5, im_max: 1.5, n_re: 301, n_im: 301 }
    }
}

impl GridSpec {
    pub fn re(&self, i: usize) -> f64 {
        self.re_min + (self.re_max - self.re_min) * i as f64 / (self.n_re - 1) as f64
    }

    pub fn im(&self, i: usize) -> f64 {
        self.im_min + (self.im_max - self.im_min) * i as f64 / (self.n_im - 1) as f64
    }
}

/// `σ_min(zI − A)` on every grid node; rows follow the imaginary axis.
#[derive(Clone, Debug)]
pub struct PseudospectrumGrid {
    pub grid: GridSpec,
    pub sigma_min: Array2<f64>,
}

impl PseudospectrumGrid {
    /// Grid nodes inside the ε-pseudospectrum.
    pub fn level_set(&self, eps: f64) -> Array2<bool> {
        self.sigma_min.mapv(|v| v <= eps)
    }

    pub fn area_fraction(&self, eps: f64) -> f64 {
        self.level_set(eps).iter().filter(|&&b| b).count() as f64 / self.sigma_min.len() as f64
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["re", "im", "sigma_min"])?;
        for a in 0..self.grid.n_im {
            for b in 0..self.grid.n_re {
                w.write_record(&[
                    format!("{:.16e}", self.grid.re(b)),
                    format!("{:.16e}", self.grid.im(a)),
                    format!("{:.16e}", self.sigma_min[[a, b]]),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub fn sigma_min_at(a: &Array2<f64>, z: C64) -> Result<f64> {
    let n = a.nrows();
    let mut m = a.mapv(|v| C64::new(-v, 0.0));
    for i in 0..n {
        m[[i, i]] += z;
    }
    let s = singular_values(&m)?;
    Ok(s.iter().cloned().fold(f64::INFINITY, f64::min))
}

pub fn pseudospectrum(cm: &CompanionMatrix, grid: &GridSpec) -> Result<PseudospectrumGrid> {
    if grid.n_re < 2 || grid.n_im < 2 {
        return invalid("pseudospectrum grid needs at least 2 nodes per axis");
    }
    let a = &cm.matrix;
    let values = (0..grid.n_im * grid.n_re)
        .into_par_iter()
        .map(|p| sigma_min_at(a, C64::new(grid.re(p % grid.n_re), grid.im(p / grid.n_re))))
        .collect::<Result<Vec<f64>>>()?;
    let sigma_min = Array2::from_shape_vec((grid.n_im, grid.n_re), values).expect("grid shape");
    Ok(PseudospectrumGrid { grid: grid.clone(), sigma_min })
}

/// Minimum of `σ_min(zI − A)` over `n` equispaced points of the unit circle.
pub fn unit_circle_min_sigma(cm: &CompanionMatrix, n: usize) -> Result<f64> {
    let vals = (0..n)
        .into_par_iter()
        .map(|k| {
            let th = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            sigma_min_at(&cm.matrix, C64::new(th.cos(), th.sin()))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(vals.into_iter().fold(f64::INFINITY, f64::min))
}
