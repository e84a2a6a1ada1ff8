//! The universal *-vector space `U_R = C^{N+1} / J_R` generated by a unit
//! `e` and elements `p_1..p_N` subject to real linear relations, plus the
//! universal linear map onto any concrete family satisfying the relations.

use num_complex::Complex64;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{
    self, rank_complex, rational_approx, rational_to_f64, rref_float, rref_rational, CMat,
};

/// Denominator bound used when deciding whether a relation matrix should be
/// reduced in exact rational arithmetic.
const RATIONAL_DEN_BOUND: u64 = 1_000_000;

#[derive(Debug, Error)]
pub enum RelSpaceError {
    #[error("relations force the unit e to be zero in the quotient")]
    DegenerateUnit,
    #[error("relation row {row} has {got} entries, expected {expected}")]
    BadRowLength { row: usize, got: usize, expected: usize },
    #[error("relation entries must be real and finite")]
    NonRealEntry,
    #[error("target matrices differ in size")]
    DimensionMismatch,
    #[error("targets violate the relations (max residual {residual:.3e} > tol {tol:.3e})")]
    RelationsViolated { residual: f64, tol: f64 },
    #[error("expected {expected} target matrices, got {got}")]
    WrongTargetCount { expected: usize, got: usize },
}

/// A set of real linear relations among `{e, p_1, ..., p_N}`, encoded as an
/// `l x (N+1)` matrix: column 0 carries the coefficient of `e`, column `i`
/// the coefficient of `p_i`, and each row asserts the combination is zero.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelationSet {
    #[serde(rename = "N")]
    pub num_generators: usize,
    pub rows: Vec<Vec<f64>>,
    #[serde(default)]
    pub names: Option<Vec<String>>,
}

impl RelationSet {
    pub fn new(num_generators: usize, rows: Vec<Vec<f64>>) -> Result<Self, RelSpaceError> {
        let r = RelationSet { num_generators, rows, names: None };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), RelSpaceError> {
        let expected = self.num_generators + 1;
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != expected {
                return Err(RelSpaceError::BadRowLength { row: i, got: row.len(), expected });
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(RelSpaceError::NonRealEntry);
            }
        }
        Ok(())
    }

    /// Single relation `e - sum_i p_i = 0`.
    pub fn resolution_of_identity(n: usize) -> Self {
        let mut row = vec![-1.0; n + 1];
        row[0] = 1.0;
        RelationSet { num_generators: n, rows: vec![row], names: None }
    }
}

/// Basis and coordinates for the quotient `C^{N+1} / J_R`.
///
/// The quotient basis is the set of canonical generators at the non-pivot
/// columns of the reduced row echelon form of the relation matrix;
/// `reduction` expresses every canonical generator in those coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UniversalSpace {
    pub num_generators: usize,
    pub dim: usize,
    /// Canonical coordinate indices (into `0..=N`) forming the quotient basis.
    pub basis_selector: Vec<usize>,
    /// `(N+1) x dim`: row `i` gives the quotient coordinates of canonical
    /// generator `i` (0 = e, i = p_i).
    pub reduction: Vec<Vec<f64>>,
    /// Canonical generator indices whose image in the quotient is zero.
    pub degenerate_generators: Vec<usize>,
    pub relations: RelationSet,
}

/// An element of the quotient space, in quotient-basis coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Element {
    pub coords: Vec<Complex64>,
}

impl Element {
    pub fn zero(dim: usize) -> Self {
        Element { coords: vec![Complex64::default(); dim] }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Involution: coordinatewise conjugation in the real quotient basis.
    pub fn star(&self) -> Element {
        Element { coords: self.coords.iter().map(|z| z.conj()).collect() }
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.coords.iter().all(|z| z.im.abs() <= tol)
    }

    pub fn real_coords(&self) -> Vec<f64> {
        self.coords.iter().map(|z| z.re).collect()
    }

    pub fn scale(&self, s: f64) -> Element {
        Element { coords: self.coords.iter().map(|z| z * s).collect() }
    }

    pub fn add(&self, other: &Element) -> Element {
        Element {
            coords: self.coords.iter().zip(&other.coords).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Element) -> Element {
        Element {
            coords: self.coords.iter().zip(&other.coords).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.coords.iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }
}

impl UniversalSpace {
    pub fn unit(&self) -> Element {
        self.generator(0)
    }

    /// Quotient coordinates of canonical generator `i` (0 is the unit).
    pub fn generator(&self, i: usize) -> Element {
        Element {
            coords: self.reduction[i].iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        }
    }

    pub fn complement(&self, i: usize) -> Element {
        self.unit().sub(&self.generator(i))
    }

    pub fn is_degenerate(&self) -> bool {
        !self.degenerate_generators.is_empty()
    }

    /// Evaluate a relation row on the quotient coordinates of the
    /// generators; must vanish for every row of the relation matrix.
    pub fn evaluate_relation_row(&self, row: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.dim];
        for (i, &c) in row.iter().enumerate() {
            for (j, &r) in self.reduction[i].iter().enumerate() {
                acc[j] += c * r;
            }
        }
        acc
    }
}

/// Build the quotient space from a relation set.
///
/// When every entry of the relation matrix is (within 1e-12) a rational
/// with denominator at most 10^6, the row reduction runs in exact rational
/// arithmetic, so dimensions are exact integers. Otherwise a floating-point
/// reduction with pivot threshold `rank_tol` is used.
pub fn build_space(r: &RelationSet, rank_tol: f64) -> Result<UniversalSpace, RelSpaceError> {
    r.validate()?;
    let ncols = r.num_generators + 1;

    let rational: Option<Vec<Vec<BigRational>>> = r
        .rows
        .iter()
        .map(|row| {
            row.iter()
                .map(|&x| rational_approx(x, RATIONAL_DEN_BOUND, 1e-12))
                .collect::<Option<Vec<_>>>()
        })
        .collect();

    let (rref, pivots): (Vec<Vec<f64>>, Vec<usize>) = match rational {
        Some(rows) => {
            let (rr, piv) = rref_rational(&rows);
            (
                rr.iter()
                    .map(|row| row.iter().map(rational_to_f64).collect())
                    .collect(),
                piv,
            )
        }
        None => rref_float(&r.rows, rank_tol),
    };

    let rank = pivots.len();
    let dim = ncols - rank;
    let basis_selector: Vec<usize> = (0..ncols).filter(|c| !pivots.contains(c)).collect();

    // Canonical generator i in quotient coordinates: free columns map to
    // unit vectors; a pivot column p with RREF row (e_p + sum c_j e_j) maps
    // to -c_j on the free columns.
    let mut reduction = vec![vec![0.0; dim]; ncols];
    for (j, &c) in basis_selector.iter().enumerate() {
        reduction[c][j] = 1.0;
    }
    for (ri, &p) in pivots.iter().enumerate() {
        for (j, &c) in basis_selector.iter().enumerate() {
            reduction[p][j] = -rref[ri][c];
        }
    }

    let mut degenerate = Vec::new();
    for i in 0..ncols {
        if reduction[i].iter().all(|&x| x.abs() <= rank_tol) {
            degenerate.push(i);
        }
    }
    if degenerate.contains(&0) {
        return Err(RelSpaceError::DegenerateUnit);
    }

    Ok(UniversalSpace {
        num_generators: r.num_generators,
        dim,
        basis_selector,
        reduction,
        degenerate_generators: degenerate,
        relations: r.clone(),
    })
}

/// True iff every relation row evaluates to a matrix of max-entry magnitude
/// at most `tol` on the given targets (`targets[0]` plays the role of `e`).
pub fn check_relations(
    targets: &[CMat],
    r: &RelationSet,
    tol: f64,
) -> Result<bool, RelSpaceError> {
    if targets.len() != r.num_generators + 1 {
        return Err(RelSpaceError::WrongTargetCount {
            expected: r.num_generators + 1,
            got: targets.len(),
        });
    }
    let d = targets[0].nrows();
    if targets.iter().any(|t| t.nrows() != d || t.ncols() != d) {
        return Err(RelSpaceError::DimensionMismatch);
    }
    Ok(relation_residual(targets, r) <= tol)
}

pub fn relation_residual(targets: &[CMat], r: &RelationSet) -> f64 {
    let d = targets[0].nrows();
    let mut worst = 0.0f64;
    for row in &r.rows {
        let mut acc = CMat::zeros(d, d);
        for (i, &c) in row.iter().enumerate() {
            acc += &targets[i] * Complex64::new(c, 0.0);
        }
        worst = worst.max(linalg::max_abs(&acc));
    }
    worst
}

/// The universal linear map `phi` with `phi(e) = targets[0]` and
/// `phi(p_i) = targets[i]`, represented by the images of the quotient basis.
#[derive(Debug, Clone)]
pub struct LinearMap {
    pub dim: usize,
    pub target_size: usize,
    /// Image of each quotient basis vector.
    pub basis_images: Vec<CMat>,
    pub injective: bool,
}

impl LinearMap {
    pub fn apply(&self, x: &Element) -> CMat {
        let d = self.target_size;
        let mut acc = CMat::zeros(d, d);
        for (j, img) in self.basis_images.iter().enumerate() {
            acc += img * x.coords[j];
        }
        acc
    }
}

pub fn universal_map(
    u: &UniversalSpace,
    targets: &[CMat],
    tol: f64,
) -> Result<LinearMap, RelSpaceError> {
    if !check_relations(targets, &u.relations, tol)? {
        let residual = relation_residual(targets, &u.relations);
        return Err(RelSpaceError::RelationsViolated { residual, tol });
    }
    let basis_images: Vec<CMat> =
        u.basis_selector.iter().map(|&c| targets[c].clone()).collect();
    let rows: Vec<Vec<Complex64>> = basis_images
        .iter()
        .map(|m| m.iter().copied().collect())
        .collect();
    let injective = rank_complex(&rows, 1e-10) == u.dim;
    Ok(LinearMap {
        dim: u.dim,
        target_size: targets[0].nrows(),
        basis_images,
        injective,
    })
}
