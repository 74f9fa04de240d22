//! Small dense linear-algebra helpers: SVD rank and subspaces, spectra,
//! least squares.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;

use nalgebra::{Complex, DMatrix, DVector};

/// Relative singular-value cutoff used for every rank decision.
pub const RANK_RTOL: f64 = 1e-10;

struct FullSvd {
    sigma: Vec<f64>,
    /// `n × n`; column `i` is the right singular vector of `sigma[i]`
    /// (missing singular values count as zero).
    v: DMatrix<f64>,
    /// `m × k` left singular vectors for the first `k` singular values.
    u: DMatrix<f64>,
}

fn full_svd(a: &DMatrix<f64>) -> FullSvd {
    let (m, n) = a.shape();
    if n == 0 {
        return FullSvd {
            sigma: Vec::new(),
            v: DMatrix::zeros(0, 0),
            u: DMatrix::zeros(m, 0),
        };
    }
    let padded = if m < n {
        let mut p = DMatrix::zeros(n, n);
        p.view_mut((0, 0), (m, n)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let (sigma, u, v) = jacobi_svd(padded);
    FullSvd {
        sigma,
        v,
        u: u.rows(0, m).into_owned(),
    }
}

/// One-sided Jacobi SVD of a tall matrix (`m ≥ n`): singular values in
/// descending order, `m × n` left vectors and the full `n × n` right factor.
fn jacobi_svd(mut a: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>, DMatrix<f64>) {
    let (m, n) = a.shape();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..80 {
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let alpha = a.column(i).norm_squared();
                let beta = a.column(j).norm_squared();
                let gamma = a.column(i).dot(&a.column(j));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for k in 0..m {
                    let (x, y) = (a[(k, i)], a[(k, j)]);
                    a[(k, i)] = c * x - s * y;
                    a[(k, j)] = s * x + c * y;
                }
                for k in 0..n {
                    let (x, y) = (v[(k, i)], v[(k, j)]);
                    v[(k, i)] = c * x - s * y;
                    v[(k, j)] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n).map(|i| a.column(i).norm()).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let sigma: Vec<f64> = order.iter().map(|&i| norms[i]).collect();
    let vs = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    // Left vectors; columns with zero singular value are completed to an
    // orthonormal set.
    let mut u = DMatrix::<f64>::zeros(m, n);
    let mut filled = 0;
    for (c, &i) in order.iter().enumerate() {
        if norms[i] > 0.0 {
            u.set_column(c, &(a.column(i) / norms[i]));
            filled = c + 1;
        }
    }
    let mut e = 0;
    for c in filled..n {
        while e < m {
            let mut cand = DVector::<f64>::zeros(m);
            cand[e] = 1.0;
            e += 1;
            for _ in 0..2 {
                for k in 0..c {
                    let p = u.column(k).dot(&cand);
                    cand -= u.column(k) * p;
                }
            }
            let nc = cand.norm();
            if nc > 1e-8 {
                u.set_column(c, &(cand / nc));
                break;
            }
        }
    }
    (sigma, u, vs)
}

/// Singular values in descending order.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    if a.nrows() >= a.ncols() {
        jacobi_svd(a.clone()).0
    } else {
        jacobi_svd(a.transpose()).0
    }
}

/// Nearest rotation matrix (polar factor with positive determinant).
pub fn nearest_rotation(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (_, u, v) = jacobi_svd(a.clone());
    let mut r = &u * v.transpose();
    if r.determinant() < 0.0 {
        let mut u = u;
        let k = u.ncols() - 1;
        u.column_mut(k).neg_mut();
        r = u * v.transpose();
    }
    r
}

fn cutoff(sigma: &[f64]) -> f64 {
    let max = sigma.iter().copied().fold(0.0, f64::max);
    RANK_RTOL * max
}

/// Copy of `a` with entries of magnitude at most `tol` set to zero.
pub fn chop(a: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    a.map(|v| if v.abs() <= tol { 0.0 } else { v })
}

/// Numerical rank with cutoff `RANK_RTOL · σ_max`.
pub fn rank(a: &DMatrix<f64>) -> usize {
    let s = full_svd(a);
    let tol = cutoff(&s.sigma);
    s.sigma.iter().filter(|&&x| x > tol).count()
}

/// Orthonormal basis (as columns) of the null space of `a`.
pub fn nullspace(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.ncols();
    let s = full_svd(a);
    let tol = cutoff(&s.sigma);
    let cols: Vec<DVector<f64>> = (0..n)
        .filter(|&i| s.sigma.get(i).is_none_or(|&x| x <= tol))
        .map(|i| s.v.column(i).into_owned())
        .collect();
    columns(n, &cols)
}

/// Orthonormal basis of the column space of `a`.
pub fn range(a: &DMatrix<f64>) -> DMatrix<f64> {
    let m = a.nrows();
    let s = full_svd(a);
    let tol = cutoff(&s.sigma);
    let cols: Vec<DVector<f64>> = (0..s.u.ncols())
        .filter(|&i| s.sigma[i] > tol)
        .map(|i| s.u.column(i).into_owned())
        .collect();
    columns(m, &cols)
}

/// Orthonormal basis of the orthogonal complement of the column space.
pub fn orthogonal_complement(a: &DMatrix<f64>) -> DMatrix<f64> {
    nullspace(&a.transpose())
}

/// Stacks vectors of length `n` as columns; yields an `n × 0` matrix when empty.
pub fn columns(n: usize, cols: &[DVector<f64>]) -> DMatrix<f64> {
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(cols)
    }
}

/// Horizontal concatenation.
pub fn hstack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows().max(b.nrows());
    let mut out = DMatrix::zeros(n, a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    out
}

/// Moore-Penrose pseudo-inverse with the rank cutoff.
pub fn pinv(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return DMatrix::zeros(n, m);
    }
    let tall = m >= n;
    let (sigma, u, v) = if tall { jacobi_svd(a.clone()) } else { jacobi_svd(a.transpose()) };
    let tol = cutoff(&sigma);
    // a = U Σ Vᵀ (tall) or aᵀ = U Σ Vᵀ.
    let mut p = DMatrix::zeros(v.nrows(), u.nrows());
    for (i, &x) in sigma.iter().enumerate() {
        if x > tol {
            p += v.column(i) * u.column(i).transpose() / x;
        }
    }
    if tall {
        p
    } else {
        p.transpose()
    }
}

/// Minimum-norm least-squares solution of `a x = b`.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    pinv(a) * b
}

/// 2-norm condition number; infinite when singular.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 1.0;
    }
    let sv = singular_values(a);
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn symmetric_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    let sym = (a + a.transpose()) * 0.5;
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Spectral norm of a symmetric matrix.
pub fn symmetric_norm(a: &DMatrix<f64>) -> f64 {
    symmetric_eigenvalues(a)
        .iter()
        .fold(0.0, |m, v| f64::max(m, v.abs()))
}

/// Eigenvalues of a general real square matrix.
pub fn eigenvalues(a: &DMatrix<f64>) -> Vec<Complex<f64>> {
    if a.is_empty() {
        return Vec::new();
    }
    let n = a.nrows();
    let scale = a.amax();
    if scale == 0.0 {
        return alloc::vec![Complex::new(0.0, 0.0); n];
    }
    let b = a / scale;
    for shift in [0.0, 0.318_309_886_183_790_7, -0.577_215_664_901_532_9] {
        let m = &b + DMatrix::identity(n, n) * shift;
        if let Some(schur) = nalgebra::linalg::Schur::try_new(m, f64::EPSILON, 100_000) {
            return schur
                .complex_eigenvalues()
                .iter()
                .map(|z| (z - shift) * scale)
                .collect();
        }
    }
    alloc::vec![Complex::new(f64::NAN, f64::NAN); n]
}

/// `Q = Bᵀ H B` for a basis stored as columns of `b`.
pub fn restrict(h: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let q = b.transpose() * h * b;
    (&q + q.transpose()) * 0.5
}

/// Orthonormalizes the columns of `b` (dropping dependent ones).
pub fn orthonormalize(b: &DMatrix<f64>) -> DMatrix<f64> {
    range(b)
}

/// Dimension of `span(a) ∩ span(b)`.
pub fn intersection_dim(a: &DMatrix<f64>, b: &DMatrix<f64>) -> usize {
    rank(a) + rank(b) - rank(&hstack(a, b))
}

/// Whether every column of `sub` lies in the column span of `span`.
pub fn contains(span: &DMatrix<f64>, sub: &DMatrix<f64>, tol: f64) -> bool {
    if sub.ncols() == 0 {
        return true;
    }
    let q = range(span);
    let resid = sub - &q * (q.transpose() * sub);
    resid.iter().all(|v| v.abs() <= tol * (1.0 + sub.amax()))
}
