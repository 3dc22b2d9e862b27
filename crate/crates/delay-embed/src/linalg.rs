//! Small dense helpers on top of LAPACK: thin SVD, truncated least squares,
//! numerical rank and sorted eigendecomposition.

use ndarray::{Array1, Array2, Axis};
use ndarray_linalg::{Eig, JobSvd, Lapack, Scalar, SVD, SVDDC};

use crate::{Error, Result, C64};

/// Thin SVD `a = u · diag(s) · vt` with singular values in descending order.
pub struct ThinSvd<A: Scalar> {
    pub u: Array2<A>,
    pub s: Array1<f64>,
    pub vt: Array2<A>,
}

impl<A: Scalar<Real = f64> + Lapack> ThinSvd<A> {
    pub fn new(a: &Array2<A>) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::Invalid("SVD of an empty matrix".into()));
        }
        let (u, s, vt) = a.svd(true, true)?;
        let k = s.len();
        match (u, vt) {
            (Some(u), Some(vt)) => Ok(ThinSvd {
                u: u.slice(ndarray::s![.., ..k]).to_owned(),
                s,
                vt: vt.slice(ndarray::s![..k, ..]).to_owned(),
            }),
            _ => Err(Error::Numerical("SVD did not return singular vectors".into())),
        }
    }

    /// Number of singular values strictly above `rel_cutoff · σ_max`.
    pub fn rank(&self, rel_cutoff: f64) -> usize {
        rank_of(&self.s, rel_cutoff)
    }

    /// Pseudo-inverse applied to `b`, dropping singular values at or below
    /// `rel_cutoff · σ_max`.
    pub fn solve(&self, b: &Array2<A>, rel_cutoff: f64) -> Array2<A> {
        let r = self.rank(rel_cutoff);
        let ur = self.u.slice(ndarray::s![.., ..r]);
        let mut c = ur.t().mapv(|z| z.conj()).dot(b);
        for (i, mut row) in c.axis_iter_mut(Axis(0)).enumerate() {
            let inv = A::from_real(1.0 / self.s[i]);
            row.mapv_inplace(|z| z * inv);
        }
        let vr = self.vt.slice(ndarray::s![..r, ..]);
        vr.t().mapv(|z| z.conj()).dot(&c)
    }
}

fn rank_of(s: &Array1<f64>, rel_cutoff: f64) -> usize {
    let smax = s.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > rel_cutoff * smax).count()
}

pub fn singular_values<A: Scalar<Real = f64> + Lapack>(a: &Array2<A>) -> Result<Array1<f64>> {
    if a.is_empty() {
        return Err(Error::Invalid("SVD of an empty matrix".into()));
    }
    let (_, s, _) = a.svddc(JobSvd::None)?;
    Ok(s)
}

pub fn numerical_rank<A: Scalar<Real = f64> + Lapack>(a: &Array2<A>, rel_tol: f64) -> Result<usize> {
    Ok(rank_of(&singular_values(a)?, rel_tol))
}

/// Minimum-norm least-squares solution of `a · x = b` by truncated SVD.
pub fn lstsq<A: Scalar<Real = f64> + Lapack>(a: &Array2<A>, b: &Array2<A>, rel_cutoff: f64) -> Result<Array2<A>> {
    if a.nrows() != b.nrows() {
        return Err(Error::Invalid(format!("lstsq shape mismatch: {} rows vs {} rows", a.nrows(), b.nrows())));
    }
    Ok(ThinSvd::new(a)?.solve(b, rel_cutoff))
}

pub fn to_complex(a: &Array2<f64>) -> Array2<C64> {
    a.mapv(|v| C64::new(v, 0.0))
}

/// Ordering used for every reported spectrum: descending modulus, then
/// ascending phase in (−π, π]. Moduli within `1e-12` (relative) count as
/// equal so conjugate pairs stay adjacent.
pub fn eigen_order(values: &[C64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].norm().total_cmp(&values[a].norm()));
    let mut out = Vec::with_capacity(idx.len());
    let mut start = 0;
    while start < idx.len() {
        let head = values[idx[start]].norm();
        let mut end = start + 1;
        while end < idx.len() {
            let m = values[idx[end]].norm();
            if (head - m).abs() > 1e-12 * head.max(1.0) {
                break;
            }
            end += 1;
        }
        let mut group = idx[start..end].to_vec();
        group.sort_by(|&a, &b| values[a].arg().total_cmp(&values[b].arg()));
        out.extend(group);
        start = end;
    }
    out
}

/// Right eigenpairs of a real square matrix, sorted with [`eigen_order`].
/// Eigenvectors are the columns of the returned matrix, unit 2-norm.
pub fn eig_sorted(a: &Array2<f64>) -> Result<(Vec<C64>, Array2<C64>)> {
    if a.nrows() != a.ncols() || a.is_empty() {
        return Err(Error::Invalid("eigendecomposition needs a nonempty square matrix".into()));
    }
    let (vals, vecs) = a.eig()?;
    let vals = vals.to_vec();
    let order = eigen_order(&vals);
    let sorted: Vec<C64> = order.iter().map(|&i| vals[i]).collect();
    let vecs = vecs.select(Axis(1), &order);
    Ok((sorted, vecs))
}

/// Inverse of a square complex matrix via its SVD; fails when singular.
pub fn solve_square(a: &Array2<C64>, b: &Array2<C64>) -> Result<Array2<C64>> {
    let svd = ThinSvd::new(a)?;
    if svd.rank(1e-14) < a.ncols() {
        return Err(Error::Numerical("square system is numerically singular".into()));
    }
    Ok(svd.solve(b, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn lstsq_recovers_exact_solution() {
        let a = array![[1.0, 2.0], [3.0, 4.0], [5.0, 7.0]];
        let x = array![[1.5], [-0.5]];
        let b = a.dot(&x);
        let got = lstsq(&a, &b, 1e-15).unwrap();
        assert!((&got - &x).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn lstsq_min_norm_on_underdetermined() {
        let a = array![[1.0, 1.0]];
        let b = array![[2.0]];
        let got = lstsq(&a, &b, 1e-15).unwrap();
        assert!((got[[0, 0]] - 1.0).abs() < 1e-12 && (got[[1, 0]] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rank_ignores_duplicate_column() {
        let a = array![[1.0, 1.0, 0.0], [2.0, 2.0, 1.0], [3.0, 3.0, 0.0]];
        assert_eq!(numerical_rank(&a, 1e-12).unwrap(), 2);
    }

    #[test]
    fn cyclic_shift_eigenvalues_on_unit_circle() {
        let n = 32;
        let mut a = Array2::<f64>::zeros((n, n));
        for i in 0..n - 1 {
            a[[i, i + 1]] = 1.0;
        }
        a[[n - 1, 0]] = 1.0;
        let (vals, _) = eig_sorted(&a).unwrap();
        assert!(vals.iter().all(|l| (l.norm() - 1.0).abs() < 1e-12));
        for w in vals.windows(2) {
            assert!(w[0].arg() <= w[1].arg() + 1e-12);
        }
    }

    #[test]
    fn order_puts_larger_modulus_first() {
        let v = [C64::new(0.5, 0.0), C64::new(0.0, -1.0), C64::new(0.0, 1.0)];
        assert_eq!(eigen_order(&v), vec![1, 2, 0]);
    }
}
