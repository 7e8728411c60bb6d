//! Dense complex helpers on top of faer.

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::{Mat, MatMut, MatRef, Side};
use num_complex::Complex64 as c64;

pub type CMat = Mat<c64>;

/// A factor is treated as singular once its condition number exceeds this.
pub const COND_LIMIT: f64 = 1e12;

/// LU factorization with a 1-norm condition estimate.
pub struct Factorization {
    lu: PartialPivLu<c64>,
    n: usize,
    cond: f64,
}

impl Factorization {
    pub fn new(a: MatRef<'_, c64>) -> Self {
        assert_eq!(a.nrows(), a.ncols(), "factorization needs a square matrix");
        let n = a.nrows();
        if n == 0 {
            return Factorization { lu: a.partial_piv_lu(), n, cond: 1.0 };
        }
        let finite = (0..n).all(|j| (0..n).all(|i| a[(i, j)].re.is_finite() && a[(i, j)].im.is_finite()));
        let lu = a.partial_piv_lu();
        let cond = if finite { norm1(a) * inverse_norm1_estimate(&lu, n) } else { f64::INFINITY };
        let cond = if cond.is_finite() { cond } else { f64::INFINITY };
        Factorization { lu, n, cond }
    }

    /// Factor `a`, mapping a condition number above `limit` to `err(cond)`.
    pub fn checked<E>(a: MatRef<'_, c64>, limit: f64, err: impl FnOnce(f64) -> E) -> Result<Self, E> {
        let f = Factorization::new(a);
        if f.cond > limit {
            Err(err(f.cond))
        } else {
            Ok(f)
        }
    }

    /// Like `checked`, but measures ||A^{-1}|| against `scale`, the size of
    /// the terms A was formed from; a difference of nearly equal terms is
    /// singular even when A itself is tiny and well conditioned.
    pub fn checked_scaled<E>(a: MatRef<'_, c64>, scale: f64, limit: f64, err: impl FnOnce(f64) -> E) -> Result<Self, E> {
        let mut f = Factorization::new(a);
        let a1 = norm1(a);
        if a1 > 0.0 && f.cond.is_finite() {
            f.cond *= (scale / a1).max(1.0);
        }
        if f.cond > limit {
            Err(err(f.cond))
        } else {
            Ok(f)
        }
    }

    pub fn cond(&self) -> f64 {
        self.cond
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: MatRef<'_, c64>) -> CMat {
        let mut x = b.to_owned();
        self.solve_in_place(x.as_mut());
        x
    }

    pub fn solve_in_place(&self, b: MatMut<'_, c64>) {
        if self.n > 0 {
            self.lu.solve_in_place(b);
        }
    }

    pub fn solve_vec(&self, b: &[c64]) -> Vec<c64> {
        let mut x = col_from_slice(b);
        self.solve_in_place(x.as_mut());
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }

    pub fn inverse(&self) -> CMat {
        self.solve(Mat::<c64>::identity(self.n, self.n).as_ref())
    }
}

pub fn norm1(a: MatRef<'_, c64>) -> f64 {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Hager's estimator for the 1-norm of A^{-1}, as in LAPACK's xLACON.
fn inverse_norm1_estimate(lu: &PartialPivLu<c64>, n: usize) -> f64 {
    let mut x = Mat::<c64>::from_fn(n, 1, |_, _| c64::new(1.0 / n as f64, 0.0));
    let mut est = 0.0;
    let mut last_j = usize::MAX;
    for _ in 0..5 {
        let mut y = x.clone();
        lu.solve_in_place(y.as_mut());
        let y_norm: f64 = (0..n).map(|i| y[(i, 0)].norm()).sum();
        if !y_norm.is_finite() {
            return f64::INFINITY;
        }
        if y_norm <= est {
            break;
        }
        est = y_norm;
        let mut xi = Mat::<c64>::from_fn(n, 1, |i, _| {
            let v = y[(i, 0)];
            let m = v.norm();
            if m > 0.0 { v / m } else { c64::new(1.0, 0.0) }
        });
        lu.solve_adjoint_in_place(xi.as_mut());
        let (j, zmax) = (0..n)
            .map(|i| (i, xi[(i, 0)].norm()))
            .fold((0, -1.0), |acc, v| if v.1 > acc.1 { v } else { acc });
        let ztx: f64 = (0..n).map(|i| (xi[(i, 0)].conj() * x[(i, 0)]).re).sum();
        if zmax <= ztx || j == last_j {
            break;
        }
        last_j = j;
        x = Mat::<c64>::zeros(n, 1);
        x[(j, 0)] = c64::new(1.0, 0.0);
    }
    // Alternating-sign probe guards against the estimator's blind spots.
    let mut alt = Mat::<c64>::from_fn(n, 1, |i, _| {
        let s = if i % 2 == 0 { 1.0 } else { -1.0 };
        c64::new(s * (1.0 + i as f64 / (n.max(2) - 1) as f64), 0.0)
    });
    lu.solve_in_place(alt.as_mut());
    let alt_est = 2.0 * (0..n).map(|i| alt[(i, 0)].norm()).sum::<f64>() / (3.0 * n as f64);
    est.max(alt_est)
}

pub fn col_from_slice(v: &[c64]) -> CMat {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

pub fn identity(n: usize) -> CMat {
    Mat::identity(n, n)
}

pub fn adjoint(a: MatRef<'_, c64>) -> CMat {
    a.adjoint().to_owned()
}

pub fn scale(a: MatRef<'_, c64>, s: c64) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

/// [[a, 0], [0, b]].
pub fn block_diag(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> CMat {
    let (r1, c1) = (a.nrows(), a.ncols());
    let mut out = Mat::<c64>::zeros(r1 + b.nrows(), c1 + b.ncols());
    out.as_mut().submatrix_mut(0, 0, r1, c1).copy_from(a);
    out.as_mut().submatrix_mut(r1, c1, b.nrows(), b.ncols()).copy_from(b);
    out
}

/// [a; b] stacked by rows.
pub fn vstack(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> CMat {
    assert_eq!(a.ncols(), b.ncols());
    let mut out = Mat::<c64>::zeros(a.nrows() + b.nrows(), a.ncols());
    out.as_mut().submatrix_mut(0, 0, a.nrows(), a.ncols()).copy_from(a);
    out.as_mut().submatrix_mut(a.nrows(), 0, b.nrows(), b.ncols()).copy_from(b);
    out
}

pub fn frob(a: MatRef<'_, c64>) -> f64 {
    a.norm_l2()
}

/// ||a - b||_F / max(||a||_F, ||b||_F, floor).
pub fn rel_diff(a: MatRef<'_, c64>, b: MatRef<'_, c64>, floor: f64) -> f64 {
    let d = (a - b).norm_l2();
    d / a.norm_l2().max(b.norm_l2()).max(floor)
}

/// Smallest eigenvalue of the Hermitian part of `a`.
pub fn hermitian_min_eigenvalue(a: MatRef<'_, c64>) -> f64 {
    let h = Mat::<c64>::from_fn(a.nrows(), a.ncols(), |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5);
    let ev = h
        .self_adjoint_eigenvalues(Side::Lower)
        .expect("self-adjoint eigenvalue iteration did not converge");
    ev.into_iter().fold(f64::INFINITY, f64::min)
}

pub fn hermitian_eigenvalues(a: MatRef<'_, c64>) -> Vec<f64> {
    let h = Mat::<c64>::from_fn(a.nrows(), a.ncols(), |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5);
    h.self_adjoint_eigenvalues(Side::Lower)
        .expect("self-adjoint eigenvalue iteration did not converge")
}

/// Singular values, nonincreasing.
pub fn singular_values(a: MatRef<'_, c64>) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    a.singular_values().expect("SVD did not converge")
}

/// Orthogonal projector onto the range of `a` (numerical rank with relative cutoff `rtol`).
pub fn range_projector(a: MatRef<'_, c64>, rtol: f64) -> CMat {
    let m = a.nrows();
    if m == 0 || a.ncols() == 0 {
        return Mat::zeros(m, m);
    }
    let svd = a.thin_svd().expect("SVD did not converge");
    let s = svd.S().column_vector();
    let smax = if s.nrows() > 0 { s[0].re } else { 0.0 };
    let u = svd.U();
    let mut p = Mat::<c64>::zeros(m, m);
    for k in 0..s.nrows() {
        if s[k].re > rtol * smax && s[k].re > 0.0 {
            for j in 0..m {
                let uj = u[(j, k)].conj();
                for i in 0..m {
                    p[(i, j)] += u[(i, k)] * uj;
                }
            }
        }
    }
    p
}
