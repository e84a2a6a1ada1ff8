//! Small dense linear algebra helpers shared across the crate: hermitian
//! eigenvalues, Kronecker products, and row reduction in both exact
//! rational and floating-point arithmetic.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{FromPrimitive, ToPrimitive, Zero};

pub type CMat = DMatrix<Complex64>;

/// Max entry magnitude of `m - m*`.
pub fn hermitian_residual(m: &CMat) -> f64 {
    let mut r = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            r = r.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    r
}

pub fn is_hermitian(m: &CMat, tol: f64) -> bool {
    m.nrows() == m.ncols() && hermitian_residual(m) <= tol
}

/// Eigenvalues of a hermitian matrix, ascending. The input is symmetrized
/// first so callers may pass matrices with roundoff-level asymmetry.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = nalgebra::SymmetricEigen::new(h);
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals
}

/// Smallest eigenvalue together with a corresponding unit eigenvector.
pub fn min_eig_pair(m: &CMat) -> (f64, Vec<Complex64>) {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = nalgebra::SymmetricEigen::new(h);
    let mut idx = 0;
    for i in 1..eig.eigenvalues.len() {
        if eig.eigenvalues[i] < eig.eigenvalues[idx] {
            idx = i;
        }
    }
    let v = eig.eigenvectors.column(idx);
    (eig.eigenvalues[idx], v.iter().copied().collect())
}

pub fn min_eigenvalue(m: &CMat) -> f64 {
    min_eig_pair(m).0
}

/// Projection of a hermitian matrix onto the PSD cone (negative eigenvalues
/// clipped to zero).
pub fn psd_projection(m: &CMat) -> CMat {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = nalgebra::SymmetricEigen::new(h);
    let n = eig.eigenvalues.len();
    let mut d = CMat::zeros(n, n);
    for i in 0..n {
        d[(i, i)] = Complex64::new(eig.eigenvalues[i].max(0.0), 0.0);
    }
    &eig.eigenvectors * d * eig.eigenvectors.adjoint()
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

/// Best rational approximation of `x` with denominator at most `max_den`,
/// by continued fractions. Returns `None` if no candidate reproduces `x`
/// within `tol`.
pub fn rational_approx(x: f64, max_den: u64, tol: f64) -> Option<BigRational> {
    if !x.is_finite() {
        return None;
    }
    let (mut p0, mut q0, mut p1, mut q1) = (0i128, 1i128, 1i128, 0i128);
    let mut v = x;
    for _ in 0..64 {
        let a = v.floor();
        if a.abs() > 1e18 {
            break;
        }
        let ai = a as i128;
        let (p2, q2) = (ai * p1 + p0, ai * q1 + q0);
        if q2.unsigned_abs() > max_den as u128 {
            break;
        }
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
        let frac = v - a;
        if frac.abs() < 1e-15 {
            break;
        }
        v = 1.0 / frac;
    }
    if q1 == 0 {
        return None;
    }
    let cand = p1 as f64 / q1 as f64;
    if (cand - x).abs() <= tol * (1.0 + x.abs()) {
        Some(BigRational::new(
            BigInt::from_i128(p1).unwrap(),
            BigInt::from_i128(q1).unwrap(),
        ))
    } else {
        None
    }
}

/// Reduced row echelon form over the rationals. Returns the nonzero rows of
/// the RREF and the pivot column of each.
pub fn rref_rational(rows: &[Vec<BigRational>]) -> (Vec<Vec<BigRational>>, Vec<usize>) {
    let mut m: Vec<Vec<BigRational>> = rows.to_vec();
    if m.is_empty() {
        return (vec![], vec![]);
    }
    let ncols = m[0].len();
    let mut pivots = Vec::new();
    let mut r = 0usize;
    for c in 0..ncols {
        let Some(pr) = (r..m.len()).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, pr);
        let inv = m[r][c].clone();
        for x in m[r].iter_mut() {
            *x = &*x / &inv;
        }
        for i in 0..m.len() {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                for j in 0..ncols {
                    let t = &m[r][j] * &f;
                    m[i][j] = &m[i][j] - &t;
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == m.len() {
            break;
        }
    }
    m.truncate(r);
    (m, pivots)
}

/// Reduced row echelon form in floating point with a pivot threshold.
pub fn rref_float(rows: &[Vec<f64>], tol: f64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut m: Vec<Vec<f64>> = rows.to_vec();
    if m.is_empty() {
        return (vec![], vec![]);
    }
    let ncols = m[0].len();
    let mut pivots = Vec::new();
    let mut r = 0usize;
    for c in 0..ncols {
        let Some(pr) = (r..m.len())
            .filter(|&i| m[i][c].abs() > tol)
            .max_by(|&a, &b| m[a][c].abs().partial_cmp(&m[b][c].abs()).unwrap())
        else {
            continue;
        };
        m.swap(r, pr);
        let inv = m[r][c];
        for x in m[r].iter_mut() {
            *x /= inv;
        }
        for i in 0..m.len() {
            if i != r && m[i][c].abs() > 0.0 {
                let f = m[i][c];
                for j in 0..ncols {
                    m[i][j] -= m[r][j] * f;
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == m.len() {
            break;
        }
    }
    m.truncate(r);
    (m, pivots)
}

/// Numerical rank of a real matrix given as rows, relative threshold
/// `tol` times the largest singular value.
pub fn rank_float(rows: &[Vec<f64>], tol: f64) -> usize {
    if rows.is_empty() || rows[0].is_empty() {
        return 0;
    }
    let nr = rows.len();
    let nc = rows[0].len();
    let m = DMatrix::from_fn(nr, nc, |i, j| rows[i][j]);
    let svd = m.svd(false, false);
    let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    if smax == 0.0 {
        return 0;
    }
    svd.singular_values.iter().filter(|&&s| s > tol * smax).count()
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN)
}

/// Numerical rank of a complex matrix stacked from row vectors.
pub fn rank_complex(rows: &[Vec<Complex64>], tol: f64) -> usize {
    if rows.is_empty() || rows[0].is_empty() {
        return 0;
    }
    let nr = rows.len();
    let nc = rows[0].len();
    let m = CMat::from_fn(nr, nc, |i, j| rows[i][j]);
    let svd = m.svd(false, false);
    let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    if smax == 0.0 {
        return 0;
    }
    svd.singular_values.iter().filter(|&&s| s > tol * smax).count()
}
