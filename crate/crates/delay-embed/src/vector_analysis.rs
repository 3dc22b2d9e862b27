//! Existence of real delay models for multi-component signals: the rank
//! test on coefficient-weighted Vandermonde blocks, the induced
//! output-controllability matrix and its index, and minimal-delay search.

use ndarray::{s, Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::delay_solver::root_of_unity;
use crate::error::invalid;
use crate::linalg::{numerical_rank, ThinSvd};
use crate::signals::TimeSeries;
use crate::spectral::{dft, FourierSpectrum, SparsityPattern};
use crate::{Error, Result, C64};

pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Spectra of `J` components over a common period, with the union of their
/// significant rows.
#[derive(Clone, Debug)]
pub struct StackedSpectra {
    spectra: Vec<FourierSpectrum>,
    union_pattern: SparsityPattern,
}

impl StackedSpectra {
    /// Keeps row `i` when `max_j |a^{(j)}_i|` exceeds `rel_threshold` times
    /// the largest coefficient over all components.
    pub fn new(spectra: Vec<FourierSpectrum>, rel_threshold: f64) -> Result<Self> {
        let Some(first) = spectra.first() else {
            return invalid("stacked spectra need at least one component");
        };
        let m = first.m();
        if spectra.iter().any(|s| s.m() != m) {
            return invalid("all component spectra must share the same M");
        }
        let top = spectra.iter().map(|s| s.max_abs()).fold(0.0, f64::max);
        let rows = (0..m).filter(|&i| top > 0.0 && spectra.iter().any(|s| s.coeffs()[i].norm() > rel_threshold * top));
        let union_pattern = SparsityPattern::closed(m, rows.collect::<Vec<_>>())?;
        Ok(StackedSpectra { spectra, union_pattern })
    }

    /// DFT of every component of a periodic series.
    pub fn from_series(ts: &TimeSeries, rel_threshold: f64) -> Result<Self> {
        let spectra = (0..ts.n_components()).map(|j| dft(ts, j)).collect::<Result<Vec<_>>>()?;
        Self::new(spectra, rel_threshold)
    }

    pub fn j(&self) -> usize {
        self.spectra.len()
    }

    pub fn m(&self) -> usize {
        self.union_pattern.m()
    }

    pub fn spectra(&self) -> &[FourierSpectrum] {
        &self.spectra
    }

    pub fn union_pattern(&self) -> &SparsityPattern {
        &self.union_pattern
    }

    pub fn p_union(&self) -> usize {
        self.union_pattern.p()
    }

    fn nodes(&self) -> Vec<C64> {
        let m = self.m();
        self.union_pattern.indices().iter().map(|&i| root_of_unity(i as i64, m)).collect()
    }

    /// `P_union × J` coefficients on the union rows.
    fn coeff_matrix(&self) -> Array2<C64> {
        let rows = self.union_pattern.indices();
        Array2::from_shape_fn((rows.len(), self.j()), |(p, j)| self.spectra[j].coeffs()[rows[p]])
    }
}

/// `[diag(a^{(1)}) A_L … diag(a^{(J)}) A_L]` on the union rows, and the `J`
/// augmentation columns `diag(a^{(j)}) b`.
pub fn rank_test_matrices(spectra: &StackedSpectra, l: usize) -> (Array2<C64>, Array2<C64>) {
    let nodes = spectra.nodes();
    let c = spectra.coeff_matrix();
    let (p, j) = c.dim();
    let m = spectra.m();
    let rows = spectra.union_pattern.indices();
    let mut big = Array2::<C64>::zeros((p, j * (l + 1)));
    let mut aug = Array2::<C64>::zeros((p, j));
    for r in 0..p {
        for comp in 0..j {
            for d in 0..=l {
                big[[r, comp * (l + 1) + d]] = c[[r, comp]] * root_of_unity(rows[r] as i64 * d as i64, m);
            }
            aug[[r, comp]] = c[[r, comp]] * nodes[r].conj();
        }
    }
    (big, aug)
}

/// Numerical ranks of the rank-test matrix and of its augmentation.
pub fn rank_pair(spectra: &StackedSpectra, l: usize, rank_tol: f64) -> Result<(usize, usize)> {
    if spectra.p_union() == 0 {
        return Ok((0, 0));
    }
    let (big, aug) = rank_test_matrices(spectra, l);
    let full = ndarray::concatenate![ndarray::Axis(1), big, aug];
    Ok((numerical_rank(&big, rank_tol)?, numerical_rank(&full, rank_tol)?))
}

/// True when a real `L`-delay model reproducing all components exists.
pub fn rank_test_vector(spectra: &StackedSpectra, l: usize, rank_tol: f64) -> Result<bool> {
    let (a, b) = rank_pair(spectra, l, rank_tol)?;
    Ok(a == b)
}

/// Smallest `L` passing the rank test.
pub fn minimal_delay_vector(spectra: &StackedSpectra, rank_tol: f64) -> Result<usize> {
    let p = spectra.p_union();
    for l in 0..p.max(1) {
        if rank_test_vector(spectra, l, rank_tol)? {
            return Ok(l);
        }
    }
    Err(Error::Numerical(format!("rank test failed for every L < P_union = {p}; loosen rank_tol")))
}

/// Largest relative distance of an augmentation column from the column
/// space of the rank-test matrix. Small exactly when the test passes.
pub fn containment_residual(spectra: &StackedSpectra, l: usize, rank_tol: f64) -> Result<f64> {
    let (big, aug) = rank_test_matrices(spectra, l);
    let svd = ThinSvd::new(&big)?;
    let r = svd.rank(rank_tol);
    let u = svd.u.slice(s![.., ..r]).to_owned();
    let proj = u.dot(&u.t().mapv(|z| z.conj()).dot(&aug));
    let mut worst = 0.0f64;
    for (col, pcol) in aug.columns().into_iter().zip(proj.columns()) {
        let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let res = col.iter().zip(pcol.iter()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        worst = worst.max(res / norm);
    }
    Ok(worst)
}

/// The spectrum-induced system `(A, B, C)` after zero-row elimination.
/// `A = blockdiag(Λ^{-1})` and `B = blockdiag(e)` stay implicit; `C` is
/// stored by its nonzero entries, one `J`-vector per retained row.
#[derive(Clone, Debug)]
pub struct OcSystem {
    pub m: usize,
    pub rows: Vec<usize>,
    pub nodes: Vec<C64>,
    pub coeffs: Array2<C64>,
}

impl OcSystem {
    pub fn p_union(&self) -> usize {
        self.rows.len()
    }

    /// `C A^k B`, a `P_union × J` block: entry `(p, j)` is `a^{(j)}_{i_p} ω^{−k i_p}`.
    pub fn block(&self, k: usize) -> Array2<C64> {
        let (p, j) = self.coeffs.dim();
        Array2::from_shape_fn((p, j), |(r, c)| {
            self.coeffs[[r, c]] * root_of_unity(self.rows[r] as i64 * k as i64, self.m)
        })
    }
}

/// Drops rows whose coefficients are all at or below `rel_threshold` times
/// the global maximum. Retained rows have disjoint column supports in the
/// full `P × JM` matrix, so `C` has full row rank iff no retained row is zero.
pub fn row_eliminate(spectra: &StackedSpectra, rel_threshold: f64) -> Result<OcSystem> {
    let m = spectra.m();
    let top = spectra.spectra.iter().map(|s| s.max_abs()).fold(0.0, f64::max);
    let rows: Vec<usize> = (0..m)
        .filter(|&i| top > 0.0 && spectra.spectra.iter().any(|s| s.coeffs()[i].norm() > rel_threshold * top))
        .collect();
    if rows.is_empty() {
        return invalid("row elimination removed every row");
    }
    let j = spectra.j();
    let coeffs = Array2::from_shape_fn((rows.len(), j), |(r, c)| spectra.spectra[c].coeffs()[rows[r]]);
    for (r, row) in coeffs.outer_iter().enumerate() {
        if row.iter().all(|z| z.norm() == 0.0) {
            return Err(Error::Numerical(format!("retained row {} is zero", rows[r])));
        }
    }
    let nodes = rows.iter().map(|&i| root_of_unity(i as i64, m)).collect();
    Ok(OcSystem { m, rows, nodes, coeffs })
}

/// Least `μ` with `[CB CAB … CA^{μ−1}B]` of full row rank.
pub fn oc_index(sys: &OcSystem, rank_tol: f64) -> Result<usize> {
    let p = sys.p_union();
    let j = sys.coeffs.ncols();
    let mut oc = Array2::<C64>::zeros((p, 0));
    for mu in 1..=sys.m.max(p) {
        let blk = sys.block(mu - 1);
        oc = ndarray::concatenate![ndarray::Axis(1), oc, blk];
        if oc.ncols() >= p && numerical_rank(&oc, rank_tol)? == p {
            return Ok(mu);
        }
        debug_assert_eq!(oc.ncols(), mu * j);
    }
    Err(Error::Numerical("output-controllability matrix never reached full row rank".into()))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RankEntry {
    #[serde(rename = "L")]
    pub l: usize,
    pub rank: usize,
    pub rank_augmented: usize,
    pub pass: bool,
}

/// JSON report of the vector-case analysis.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VectorReport {
    #[serde(rename = "P_union")]
    pub p_union: usize,
    #[serde(rename = "minimal_L")]
    pub minimal_l: usize,
    pub oc_index: usize,
    pub ranks_by_l: Vec<RankEntry>,
}

/// Rank test for `L = 0 … max(minimal L, oc_index − 1)`, plus the bound.
pub fn vector_report(spectra: &StackedSpectra, rel_threshold: f64, rank_tol: f64) -> Result<VectorReport> {
    let minimal_l = minimal_delay_vector(spectra, rank_tol)?;
    let mu = oc_index(&row_eliminate(spectra, rel_threshold)?, rank_tol)?;
    let top = minimal_l.max(mu.saturating_sub(1));
    let ranks_by_l = (0..=top)
        .map(|l| {
            let (rank, rank_augmented) = rank_pair(spectra, l, rank_tol)?;
            Ok(RankEntry { l, rank, rank_augmented, pass: rank == rank_augmented })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VectorReport { p_union: spectra.p_union(), minimal_l, oc_index: mu, ranks_by_l })
}

/// Spectra of a band-limited multi-component signal given by first-half
/// coefficients per component; used by tests and experiments to build
/// instances with a known union pattern.
pub fn spectra_from_half(m: usize, half: &[Vec<(usize, C64)>]) -> Result<StackedSpectra> {
    let mut out = Vec::with_capacity(half.len());
    for comp in half {
        let mut a = Array1::<C64>::zeros(m);
        for &(i, c) in comp {
            if i == 0 || 2 * i >= m {
                return invalid(format!("first-half index {i} out of range for M={m}"));
            }
            a[i] += c;
            a[m - i] += c.conj();
        }
        out.push(FourierSpectrum::new(a.to_vec())?);
    }
    StackedSpectra::new(out, 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delay_solver::{build_hankel, solve_time_domain, RowSelection};
    use crate::signals::gen_five_mode;
    use crate::spectral::synthesize;
    use ndarray::Array2;

    fn disjoint_pair() -> StackedSpectra {
        spectra_from_half(16, &[vec![(1, C64::new(0.5, 0.0))], vec![(2, C64::new(0.0, -0.5))]]).unwrap()
    }

    fn brute_force_fits(spectra: &StackedSpectra, l: usize) -> bool {
        let m = spectra.m();
        let rows: Vec<Vec<f64>> =
            spectra.spectra().iter().map(|s| synthesize(s, m, 1.0).unwrap().component(0).to_vec()).collect();
        let data = Array2::from_shape_fn((rows.len(), m), |(j, k)| rows[j][k]);
        let ts = TimeSeries::new(data, 1.0, Some(m)).unwrap();
        let sys = build_hankel(&ts, l, &RowSelection::AllPeriodic).unwrap();
        let model = solve_time_domain(&sys, 1e-13).unwrap();
        sys.residual(&model) < 1e-10
    }

    #[test]
    fn disjoint_frequencies_need_one_delay() {
        let s = disjoint_pair();
        assert!(!rank_test_vector(&s, 0, DEFAULT_RANK_TOL).unwrap());
        assert!(rank_test_vector(&s, 1, DEFAULT_RANK_TOL).unwrap());
        assert!(!brute_force_fits(&s, 0));
        assert!(brute_force_fits(&s, 1));
        assert_eq!(minimal_delay_vector(&s, DEFAULT_RANK_TOL).unwrap(), 1);
        let sys = row_eliminate(&s, 1e-12).unwrap();
        assert_eq!(oc_index(&sys, DEFAULT_RANK_TOL).unwrap(), 2);
    }

    #[test]
    fn scalar_case_reduces_to_p_minus_one() {
        let ts = gen_five_mode(100, 1).unwrap();
        let s = StackedSpectra::from_series(&ts, 1e-10).unwrap();
        assert_eq!(s.p_union(), 10);
        for l in 0..12 {
            assert_eq!(rank_test_vector(&s, l, DEFAULT_RANK_TOL).unwrap(), l >= 9, "L={l}");
        }
        assert_eq!(minimal_delay_vector(&s, DEFAULT_RANK_TOL).unwrap(), 9);
        let sys = row_eliminate(&s, 1e-10).unwrap();
        assert_eq!(oc_index(&sys, DEFAULT_RANK_TOL).unwrap(), 10);
    }

    #[test]
    fn duplicate_components_keep_row_rank() {
        let comp = vec![(1, C64::new(0.3, 0.1)), (3, C64::new(-0.2, 0.4))];
        let s = spectra_from_half(12, &[comp.clone(), comp]).unwrap();
        let sys = row_eliminate(&s, 1e-12).unwrap();
        assert_eq!(sys.p_union(), 4);
        // C on the full JM columns: row p has entries at columns i_p and M + i_p.
        let mut c = Array2::<C64>::zeros((4, 24));
        for (r, &i) in sys.rows.iter().enumerate() {
            c[[r, i]] = sys.coeffs[[r, 0]];
            c[[r, 12 + i]] = sys.coeffs[[r, 1]];
        }
        assert_eq!(numerical_rank(&c, 1e-12).unwrap(), 4);
    }

    #[test]
    fn zero_second_component() {
        let comp = vec![(2, C64::new(1.0, 0.0))];
        let s = spectra_from_half(10, &[comp, vec![]]).unwrap();
        let sys = row_eliminate(&s, 1e-12).unwrap();
        assert!(sys.coeffs.column(1).iter().all(|z| z.norm() == 0.0));
        assert_eq!(oc_index(&sys, DEFAULT_RANK_TOL).unwrap(), 2);
    }

    #[test]
    fn containment_tracks_rank_test() {
        let s = disjoint_pair();
        assert!(containment_residual(&s, 0, DEFAULT_RANK_TOL).unwrap() > 1e-3);
        assert!(containment_residual(&s, 1, DEFAULT_RANK_TOL).unwrap() < 1e-10);
    }

    #[test]
    fn report_lists_ranks() {
        let r = vector_report(&disjoint_pair(), 1e-12, DEFAULT_RANK_TOL).unwrap();
        assert_eq!((r.p_union, r.minimal_l, r.oc_index), (4, 1, 2));
        assert_eq!(r.ranks_by_l.len(), 2);
        assert!(!r.ranks_by_l[0].pass && r.ranks_by_l[1].pass);
    }
}
