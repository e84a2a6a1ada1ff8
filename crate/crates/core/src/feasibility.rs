//! Conic feasibility engine: LP membership in finitely generated cones via
//! a bounded simplex with Bland's rule, PSD block decompositions by
//! alternating projections with Dykstra correction, and dense hermitian
//! eigenvalue checks.
//!
//! Every accept answer carries a certificate that re-verifies by an
//! independent reconstruction; every reject answer carries a separating
//! functional that re-verifies against the generators.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, min_eigenvalue, psd_projection, CMat};

/// Simplex iteration cap.
const LP_ITER_CAP: usize = 1_000_000;
/// Alternating-projection sweep cap.
const PSD_SWEEP_CAP: usize = 10_000;

/// Tolerances used throughout the oracles. Defaults sit two orders above
/// double-precision noise at desk-scale problem sizes.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Tolerances {
    pub accept_tol: f64,
    pub psd_tol: f64,
    pub rank_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { accept_tol: 1e-8, psd_tol: 1e-9, rank_tol: 1e-10 }
    }
}

#[derive(Debug, Error)]
pub enum FeasibilityError {
    #[error("vectors have inconsistent lengths")]
    DimensionMismatch,
    #[error("LP did not converge within {0} iterations")]
    NumericalFailure(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    Linear,
    PsdBlock,
}

/// Machine-checkable evidence of cone membership: either nonnegative
/// coefficients over the generators, or PSD matrices reconstructing the
/// target as a block combination.
#[derive(Debug, Clone)]
pub struct ConicCertificate {
    pub kind: CertificateKind,
    pub coefficients: Vec<f64>,
    pub blocks: Vec<CMat>,
    /// Infinity norm of the reconstruction error.
    pub residual: f64,
}

impl ConicCertificate {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "kind": self.kind,
            "coefficients": self.coefficients,
            "blocks": self.blocks.iter().map(cmat_to_json).collect::<Vec<_>>(),
            "residual": self.residual,
        })
    }
}

pub fn cmat_to_json(m: &CMat) -> serde_json::Value {
    let rows: Vec<Vec<[f64; 2]>> = (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect();
    serde_json::json!(rows)
}

/// A separating functional: nonnegative on every generator, strictly
/// negative on the rejected target.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Witness {
    pub functional: Vec<f64>,
    pub violation: f64,
}

#[derive(Debug, Clone)]
pub enum LpOutcome {
    Member(ConicCertificate),
    Separated(Witness),
}

/// Decide membership of `target` in the cone generated by `generators`
/// (all real vectors of equal length). Returns nonnegative coefficients or
/// an LP-duality separating functional.
pub fn lp_member(
    target: &[f64],
    generators: &[Vec<f64>],
    tol: f64,
) -> Result<LpOutcome, FeasibilityError> {
    let n = target.len();
    if generators.iter().any(|g| g.len() != n) {
        return Err(FeasibilityError::DimensionMismatch);
    }
    let m = generators.len();

    // Phase-1 simplex on {G c = t, c >= 0}: flip rows so b >= 0, add an
    // artificial identity basis, minimize the sum of artificials.
    let mut sign = vec![1.0f64; n];
    let mut b = vec![0.0f64; n];
    for i in 0..n {
        if target[i] < 0.0 {
            sign[i] = -1.0;
        }
        b[i] = target[i] * sign[i];
    }
    // Tableau: n rows, m structural + n artificial columns + rhs.
    let ncols = m + n;
    let mut tab = vec![vec![0.0f64; ncols + 1]; n];
    for i in 0..n {
        for j in 0..m {
            tab[i][j] = generators[j][i] * sign[i];
        }
        tab[i][m + i] = 1.0;
        tab[i][ncols] = b[i];
    }
    // Basis: artificials.
    let mut basis: Vec<usize> = (m..m + n).collect();
    // Reduced-cost row for phase-1 objective (minimize sum of artificials):
    // z_j - c_j where c = (0,...,0,1,...,1).
    let mut cost = vec![0.0f64; ncols + 1];
    for row in tab.iter() {
        for j in 0..=ncols {
            cost[j] += row[j];
        }
    }
    for j in m..ncols {
        cost[j] -= 1.0;
    }

    let pivot_tol = 1e-11;
    let mut iters = 0usize;
    loop {
        // Bland's rule: smallest index with positive reduced cost.
        let Some(enter) = (0..ncols).find(|&j| cost[j] > pivot_tol) else {
            break;
        };
        // Ratio test, ties broken by smallest basis index (Bland).
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for i in 0..n {
            if tab[i][enter] > pivot_tol {
                let ratio = tab[i][ncols] / tab[i][enter];
                let better = ratio < best - 1e-14
                    || ((ratio - best).abs() <= 1e-14
                        && leave.map_or(true, |l| basis[i] < basis[l]));
                if better {
                    best = ratio;
                    leave = Some(i);
                }
            }
        }
        let Some(leave) = leave else {
            // Phase-1 objective is bounded below by 0; an unbounded ray
            // here means numerical trouble.
            return Err(FeasibilityError::NumericalFailure(iters));
        };
        // Pivot.
        let piv = tab[leave][enter];
        for j in 0..=ncols {
            tab[leave][j] /= piv;
        }
        for i in 0..n {
            if i != leave && tab[i][enter].abs() > 0.0 {
                let f = tab[i][enter];
                for j in 0..=ncols {
                    tab[i][j] -= f * tab[leave][j];
                }
            }
        }
        let f = cost[enter];
        if f.abs() > 0.0 {
            for j in 0..=ncols {
                cost[j] -= f * tab[leave][j];
            }
        }
        basis[leave] = enter;
        iters += 1;
        if iters > LP_ITER_CAP {
            return Err(FeasibilityError::NumericalFailure(iters));
        }
    }

    let objective = cost[ncols];
    if objective <= tol.max(1e-9) {
        // Feasible: read off structural values.
        let mut c = vec![0.0f64; m];
        for i in 0..n {
            if basis[i] < m {
                c[basis[i]] = tab[i][ncols].max(0.0);
            }
        }
        let residual = reconstruction_residual(target, generators, &c);
        Ok(LpOutcome::Member(ConicCertificate {
            kind: CertificateKind::Linear,
            coefficients: c,
            blocks: vec![],
            residual,
        }))
    } else {
        // Farkas: the phase-1 duals y satisfy y.A_j <= 0 for structural
        // columns and y.b > 0; in original row signs, w = -y separates.
        // Reduced cost of artificial i is -cost[m+i]... recover y from the
        // artificial columns: y_i = cost[m+i] + 1 with our sign convention
        // (cost[j] = y.A_j - c_j, artificial column = e_i, c = 1).
        let mut w = vec![0.0f64; n];
        for i in 0..n {
            let y_i = cost[m + i] + 1.0;
            w[i] = -y_i * sign[i];
        }
        // Normalize.
        let scale = w.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if scale > 0.0 {
            for x in w.iter_mut() {
                *x /= scale;
            }
        }
        let violation = dot(&w, target);
        Ok(LpOutcome::Separated(Witness { functional: w, violation }))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn reconstruction_residual(target: &[f64], generators: &[Vec<f64>], c: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..target.len() {
        let mut acc = 0.0;
        for (j, g) in generators.iter().enumerate() {
            acc += c[j] * g[i];
        }
        worst = worst.max((acc - target[i]).abs());
    }
    worst
}

/// Independent check of a linear certificate: coefficients nonnegative and
/// reconstruction within `tol`.
pub fn verify_linear_certificate(
    target: &[f64],
    generators: &[Vec<f64>],
    cert: &ConicCertificate,
    tol: f64,
) -> bool {
    cert.kind == CertificateKind::Linear
        && cert.coefficients.iter().all(|&c| c >= -tol)
        && reconstruction_residual(target, generators, &cert.coefficients) <= tol
}

/// Independent check of a separating witness: nonnegative (within `tol`)
/// on every generator and strictly negative on the target.
pub fn verify_witness(target: &[f64], generators: &[Vec<f64>], w: &Witness, tol: f64) -> bool {
    generators.iter().all(|g| dot(&w.functional, g) >= -tol)
        && dot(&w.functional, target) < -tol
}

#[derive(Debug, Clone)]
pub enum PsdOutcome {
    Member(ConicCertificate),
    Unknown,
}

/// Search for PSD matrices `A_j` with `sum_j A_j (x) g_j = target`, the
/// level-n membership test for the max structure over level-1 generators.
///
/// `target` is given as `dim` coefficient matrices of size n x n;
/// `generators` as real coordinate vectors of length `dim`. Alternating
/// projections between the affine reconstruction constraint and the PSD
/// product cone, with Dykstra correction on the cone step. One-sided:
/// failure to find a decomposition within the sweep cap yields `Unknown`.
pub fn psd_block_decompose(
    target: &[CMat],
    generators: &[Vec<f64>],
    tols: &Tolerances,
    tol: f64,
) -> PsdOutcome {
    let dim = target.len();
    let m = generators.len();
    if m == 0 || dim == 0 {
        return PsdOutcome::Unknown;
    }
    let n = target[0].nrows();
    // G[k][j] = coordinate k of generator j; precompute the pseudo-inverse
    // for the affine projection A -> A + G^+ (T - G A), applied blockwise.
    let g = nalgebra::DMatrix::from_fn(dim, m, |k, j| generators[j][k]);
    let gp = g.clone().pseudo_inverse(1e-12).unwrap_or_else(|_| g.transpose());

    let affine_residual = |a: &[CMat]| -> f64 {
        let mut worst = 0.0f64;
        for k in 0..dim {
            let mut acc = CMat::zeros(n, n);
            for j in 0..m {
                acc += &a[j] * Complex64::new(g[(k, j)], 0.0);
            }
            worst = worst.max(linalg::max_abs(&(acc - &target[k])));
        }
        worst
    };
    let affine_project = |a: &mut [CMat]| {
        // defect_k = T_k - sum_j G[k][j] A_j ; A_j += sum_k G^+[j][k] defect_k
        let mut defect: Vec<CMat> = Vec::with_capacity(dim);
        for k in 0..dim {
            let mut acc = target[k].clone();
            for j in 0..m {
                acc -= &a[j] * Complex64::new(g[(k, j)], 0.0);
            }
            defect.push(acc);
        }
        for j in 0..m {
            for k in 0..dim {
                let w = gp[(j, k)];
                if w != 0.0 {
                    a[j] += &defect[k] * Complex64::new(w, 0.0);
                }
            }
        }
    };

    let mut a: Vec<CMat> = vec![CMat::zeros(n, n); m];
    affine_project(&mut a);
    let mut corr: Vec<CMat> = vec![CMat::zeros(n, n); m];

    for _ in 0..PSD_SWEEP_CAP {
        // Dykstra step onto the PSD product cone.
        let mut y: Vec<CMat> = Vec::with_capacity(m);
        for j in 0..m {
            y.push(psd_projection(&(&a[j] + &corr[j])));
        }
        for j in 0..m {
            corr[j] = &a[j] + &corr[j] - &y[j];
        }
        // Candidate: exactly PSD blocks; accept when reconstruction holds.
        let res = affine_residual(&y);
        if res <= tol {
            let min_block_eig =
                y.iter().map(|b| min_eigenvalue(b)).fold(f64::INFINITY, f64::min);
            if min_block_eig >= -tols.psd_tol {
                return PsdOutcome::Member(ConicCertificate {
                    kind: CertificateKind::PsdBlock,
                    coefficients: vec![],
                    blocks: y,
                    residual: res,
                });
            }
        }
        a = y;
        affine_project(&mut a);
        // Candidate on the affine side: accept when the blocks are PSD
        // within psd_tol at scale.
        let scale = a.iter().map(linalg::max_abs).fold(1.0f64, f64::max);
        let min_block_eig = a.iter().map(|b| min_eigenvalue(b)).fold(f64::INFINITY, f64::min);
        if min_block_eig >= -tols.psd_tol * scale {
            let res = affine_residual(&a);
            if res <= tol {
                let blocks: Vec<CMat> = a.iter().map(psd_projection).collect();
                let res2 = affine_residual(&blocks);
                if res2 <= tol {
                    return PsdOutcome::Member(ConicCertificate {
                        kind: CertificateKind::PsdBlock,
                        coefficients: vec![],
                        blocks,
                        residual: res2,
                    });
                }
            }
        }
    }
    PsdOutcome::Unknown
}

/// Independent re-verification of a PSD block certificate.
pub fn verify_psd_certificate(
    target: &[CMat],
    generators: &[Vec<f64>],
    cert: &ConicCertificate,
    tols: &Tolerances,
    tol: f64,
) -> bool {
    if cert.kind != CertificateKind::PsdBlock || cert.blocks.len() != generators.len() {
        return false;
    }
    let dim = target.len();
    let n = target[0].nrows();
    let scale = cert.blocks.iter().map(linalg::max_abs).fold(1.0f64, f64::max);
    if cert.blocks.iter().any(|b| min_eigenvalue(b) < -tols.psd_tol * scale) {
        return false;
    }
    let mut worst = 0.0f64;
    for k in 0..dim {
        let mut acc = CMat::zeros(n, n);
        for (j, g) in generators.iter().enumerate() {
            acc += &cert.blocks[j] * Complex64::new(g[k], 0.0);
        }
        worst = worst.max(linalg::max_abs(&(acc - &target[k])));
    }
    worst <= tol
}

/// Smallest eigenvalue of a hermitian matrix. Input asymmetry beyond 1e-12
/// is the caller's bug; the matrix is symmetrized regardless.
pub fn min_eig(h: &CMat) -> f64 {
    debug_assert!(linalg::hermitian_residual(h) <= 1e-12 * (1.0 + linalg::max_abs(h)));
    min_eigenvalue(h)
}
