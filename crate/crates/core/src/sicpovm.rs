//! SIC-POVM and MUB instantiations of the universal construction: the
//! presentation spaces, desk-scale ground-truth SICs for d = 2, 3, the
//! commuting block witness, the abstract Gram inner product, and the
//! complete-positivity necessary condition for SIC existence.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use thiserror::Error;

use crate::cones::{base_cone, ConeOracle, MatElem};
use crate::feasibility::Tolerances;
use crate::linalg::{self, identity, CMat};
use crate::relspace::{build_space, Element, RelationSet, UniversalSpace};

#[derive(Debug, Error)]
pub enum SicError {
    #[error("no ground-truth SIC is embedded for dimension {0} (supported: 2, 3)")]
    UnsupportedDimension(usize),
    #[error("embedded ground truth failed its verification gate: {0}")]
    VerificationFailed(String),
    #[error("commuting witness span rank {reached} < {needed} within the partition budget")]
    RankDeficient { reached: usize, needed: usize },
    #[error("presentation build failed: {0}")]
    Space(#[from] crate::relspace::RelSpaceError),
}

/// Which form of the resolution relation to impose. The identity
/// `sum P_i = d I` satisfied by actual SICs corresponds to `DTimesUnit`;
/// the other normalization is exposed for comparison runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SicNormalization {
    /// `sum_{i=1}^{d^2} p_i = d e`
    DTimesUnit,
    /// `sum_{i=1}^{d^2} p_i = e`
    Unit,
}

/// The universal space for the SIC relation plus the abstract Gram matrix
/// `<p_i, p_j> = 1/d` (i = j), `1/(d(d+1))` (i != j), indexed by the
/// quotient basis (which is exactly `p_1..p_{d^2}`).
#[derive(Debug, Clone)]
pub struct SicPresentation {
    pub d: usize,
    pub space: UniversalSpace,
    pub gram: DMatrix<f64>,
    pub normalization: SicNormalization,
}

pub fn build_sic_presentation(d: usize) -> Result<SicPresentation, SicError> {
    build_sic_presentation_with(d, SicNormalization::DTimesUnit)
}

pub fn build_sic_presentation_with(
    d: usize,
    normalization: SicNormalization,
) -> Result<SicPresentation, SicError> {
    assert!(d >= 2);
    let n = d * d;
    let unit_coeff = match normalization {
        SicNormalization::DTimesUnit => d as f64,
        SicNormalization::Unit => 1.0,
    };
    let mut row = vec![-1.0; n + 1];
    row[0] = unit_coeff;
    let rels = RelationSet::new(n, vec![row])?;
    let space = build_space(&rels, Tolerances::default().rank_tol)?;
    let gram = sic_gram(d);
    Ok(SicPresentation { d, space, gram, normalization })
}

/// `G = a I + b J` with `a = 1/(d+1)` (in the sense `G_ii - G_ij`) — the
/// explicit entries of the theorem's case formula.
pub fn sic_gram(d: usize) -> DMatrix<f64> {
    let n = d * d;
    let off = 1.0 / (d as f64 * (d + 1) as f64);
    DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 / d as f64 } else { off })
}

/// Eigenvalues of the abstract Gram matrix (closed form: 1 with
/// multiplicity one, 1/(d+1) with multiplicity d^2 - 1).
pub fn sic_gram_spectrum(d: usize) -> (f64, f64) {
    (1.0, 1.0 / (d + 1) as f64)
}

/// Ground-truth SICs: the Bloch tetrahedron for d = 2, the
/// Weyl-Heisenberg orbit of the fiducial (0, 1, -1)/sqrt(2) for d = 3.
/// Both pass through `verify_sic` at 1e-10 before being returned.
pub fn construct_sic(d: usize) -> Result<Vec<CMat>, SicError> {
    let ps = match d {
        2 => {
            let s3 = 1.0 / 3.0f64.sqrt();
            let dirs = [
                [s3, s3, s3],
                [s3, -s3, -s3],
                [-s3, s3, -s3],
                [-s3, -s3, s3],
            ];
            dirs.iter()
                .map(|v| {
                    // (I + v . sigma) / 2
                    let mut m = CMat::zeros(2, 2);
                    m[(0, 0)] = Complex64::new(0.5 * (1.0 + v[2]), 0.0);
                    m[(1, 1)] = Complex64::new(0.5 * (1.0 - v[2]), 0.0);
                    m[(0, 1)] = Complex64::new(0.5 * v[0], -0.5 * v[1]);
                    m[(1, 0)] = Complex64::new(0.5 * v[0], 0.5 * v[1]);
                    m
                })
                .collect::<Vec<_>>()
        }
        3 => {
            let f = [
                Complex64::default(),
                Complex64::new(1.0 / 2.0f64.sqrt(), 0.0),
                Complex64::new(-1.0 / 2.0f64.sqrt(), 0.0),
            ];
            let omega = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
            let mut out = Vec::with_capacity(9);
            for j in 0..3usize {
                for k in 0..3usize {
                    // v = X^j Z^k f, entries v[(i + j) mod 3] = omega^(k i) f[i]
                    let mut v = [Complex64::default(); 3];
                    for (i, &fi) in f.iter().enumerate() {
                        v[(i + j) % 3] = omega.powu((k * i) as u32) * fi;
                    }
                    let p = CMat::from_fn(3, 3, |r, c| v[r] * v[c].conj());
                    out.push(p);
                }
            }
            out
        }
        _ => return Err(SicError::UnsupportedDimension(d)),
    };
    let (ok, res) = verify_sic(&ps, 1e-10);
    if !ok {
        return Err(SicError::VerificationFailed(format!("{res:?}")));
    }
    Ok(ps)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SicResiduals {
    /// max ||P^2 - P||
    pub projection: f64,
    /// max |Tr P - 1|
    pub trace_one: f64,
    /// ||sum P_i - d I||
    pub resolution: f64,
    /// max |Tr(P_i P_j) - 1/(d+1)| over i != j
    pub pairwise: f64,
}

pub fn verify_sic(ps: &[CMat], tol: f64) -> (bool, SicResiduals) {
    let mut res = SicResiduals::default();
    if ps.is_empty() {
        return (false, res);
    }
    let d = ps[0].nrows();
    if ps.len() != d * d || ps.iter().any(|p| p.nrows() != d || p.ncols() != d) {
        return (false, res);
    }
    let mut sum = CMat::zeros(d, d);
    for p in ps {
        res.projection = res.projection.max(linalg::max_abs(&(p * p - p)));
        res.trace_one = res.trace_one.max((p.trace().re - 1.0).abs().max(p.trace().im.abs()));
        sum += p;
    }
    res.resolution = linalg::max_abs(&(sum - identity(d) * Complex64::new(d as f64, 0.0)));
    let expect = 1.0 / (d + 1) as f64;
    for i in 0..ps.len() {
        for j in 0..ps.len() {
            if i != j {
                let t = (&ps[i] * &ps[j]).trace();
                res.pairwise = res.pairwise.max((t.re - expect).abs().max(t.im.abs()));
            }
        }
    }
    let ok = res.projection <= tol
        && res.trace_one <= tol
        && res.resolution <= tol
        && res.pairwise <= tol;
    (ok, res)
}

/// Commuting diagonal projections `q_1..q_{d^2}` built from partitions of
/// `[d^2]` into d-subsets: each partition contributes a size-d diagonal
/// block, and `q_i` carries a 1 at the block position of the subset
/// containing i. The full permutation direct sum of the lemma is reduced
/// to just enough partitions that the `q_i` span has rank d^2.
#[derive(Debug, Clone)]
pub struct CommutingWitness {
    pub d: usize,
    /// Diagonals of the q_i over the assembled block space (entries 0/1).
    pub diagonals: Vec<Vec<f64>>,
    pub partitions: Vec<Vec<Vec<usize>>>,
    pub span_rank: usize,
}

impl CommutingWitness {
    pub fn matrices(&self) -> Vec<CMat> {
        self.diagonals
            .iter()
            .map(|diag| {
                CMat::from_fn(diag.len(), diag.len(), |i, j| {
                    if i == j {
                        Complex64::new(diag[i], 0.0)
                    } else {
                        Complex64::default()
                    }
                })
            })
            .collect()
    }
}

pub fn commuting_witness(d: usize, extra_partitions: usize) -> Result<CommutingWitness, SicError> {
    assert!(d >= 2);
    let n = d * d;
    // Index i = u + v d. Deterministic partitions: rows (fixed v), columns
    // (fixed u), and the affine families u = j + c v (mod d).
    let mut partitions: Vec<Vec<Vec<usize>>> = Vec::new();
    partitions.push((0..d).map(|v| (0..d).map(|u| u + v * d).collect()).collect());
    partitions.push((0..d).map(|u| (0..d).map(|v| u + v * d).collect()).collect());
    for c in 1..d {
        partitions.push(
            (0..d)
                .map(|j| (0..d).map(|v| ((j + c * v) % d) + v * d).collect())
                .collect(),
        );
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(d as u64);
    for _ in 0..extra_partitions {
        let mut idx: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            idx.swap(i, rng.gen_range(0..=i));
        }
        partitions.push(idx.chunks(d).map(|c| c.to_vec()).collect());
    }

    let assemble = |parts: &[Vec<Vec<usize>>]| -> Vec<Vec<f64>> {
        let total = d * parts.len();
        let mut diagonals = vec![vec![0.0; total]; n];
        for (s, part) in parts.iter().enumerate() {
            for (j, block) in part.iter().enumerate() {
                for &i in block {
                    diagonals[i][s * d + j] = 1.0;
                }
            }
        }
        diagonals
    };

    // Grow the partition prefix until the span certifies rank d^2.
    let det = d + 1;
    for used in det..=partitions.len() {
        let diagonals = assemble(&partitions[..used]);
        let rank = linalg::rank_float(&diagonals, 1e-10);
        if rank == n {
            return Ok(CommutingWitness {
                d,
                diagonals,
                partitions: partitions[..used].to_vec(),
                span_rank: rank,
            });
        }
    }
    let diagonals = assemble(&partitions);
    let rank = linalg::rank_float(&diagonals, 1e-10);
    Err(SicError::RankDeficient { reached: rank, needed: n })
}

/// Abstract inner product on quotient coordinates through a Gram matrix
/// whose index set is the quotient basis.
pub fn gram_inner(gram: &DMatrix<f64>, x: &Element, y: &Element) -> f64 {
    let mut acc = Complex64::default();
    for k in 0..x.dim() {
        for l in 0..y.dim() {
            acc += x.coords[k].conj() * y.coords[l] * gram[(k, l)];
        }
    }
    acc.re
}

/// Level-n extension: `<A (x) x, B (x) y>_n = <A, B>_HS <x, y>`, extended
/// bilinearly over the coefficient tensors.
pub fn gram_inner_n(gram: &DMatrix<f64>, x: &MatElem, y: &MatElem) -> f64 {
    let mut acc = Complex64::default();
    for k in 0..x.dim() {
        for l in 0..y.dim() {
            let hs = (x.coeffs[k].adjoint() * &y.coeffs[l]).trace();
            acc += hs * gram[(k, l)];
        }
    }
    acc.re
}

#[derive(Debug, Clone)]
pub enum CpCheckOutcome {
    Pass { pairs: usize },
    /// Two elements with membership certificates but a negative Gram
    /// pairing — a SIC-nonexistence witness for this dimension.
    Fail { value: f64, x: MatElem, y: MatElem },
    Unknown,
}

/// Necessary condition for SIC existence: the Gram inner product must be
/// nonnegative on pairs of certified cone members at every level. Pairs
/// are drawn from generator paddings, PSD-coefficient combinations, and
/// compressions, all gated through the oracle's Accept.
pub fn gram_cp_check(
    space: &UniversalSpace,
    gram: &DMatrix<f64>,
    oracle: &dyn ConeOracle,
    level: usize,
    samples: usize,
    tol: f64,
    seed: u64,
) -> CpCheckOutcome {
    let Ok(cone) = base_cone(space) else {
        return CpCheckOutcome::Unknown;
    };
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    fn random_psd(rng: &mut rand_chacha::ChaCha8Rng, n: usize) -> CMat {
        let mut a = CMat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        &a * a.adjoint()
    }
    let mut pool: Vec<MatElem> = Vec::new();
    let mut candidates: Vec<MatElem> = Vec::new();
    for e in &cone.elements {
        candidates.push(MatElem::unit_like(e, level));
    }
    while candidates.len() < samples {
        let e = &cone.elements[rng.gen_range(0..cone.elements.len())];
        // Mix in compressions of two-term combinations.
        if candidates.len() % 3 == 2 && level > 1 {
            let e2 = &cone.elements[rng.gen_range(0..cone.elements.len())];
            let a1 = random_psd(&mut rng, level + 1);
            let a2 = random_psd(&mut rng, level + 1);
            let big = MatElem::tensor(&a1, e).add(&MatElem::tensor(&a2, e2));
            let mut alpha = CMat::zeros(level + 1, level);
            for i in 0..level + 1 {
                for j in 0..level {
                    let s = if i == j { 1.0 } else { 0.3 };
                    alpha[(i, j)] = Complex64::new(s * rng.gen_range(-1.0..1.0), 0.0);
                }
            }
            candidates.push(big.compress(&alpha));
        } else {
            let a = random_psd(&mut rng, level);
            candidates.push(MatElem::tensor(&a, e));
        }
    }
    for c in candidates.into_iter().take(samples) {
        if oracle.decide(&c, 1e-9).is_accept() {
            pool.push(c);
        }
    }
    if pool.len() < 2 {
        return CpCheckOutcome::Unknown;
    }
    let mut pairs = 0usize;
    for i in 0..pool.len() {
        for j in i..pool.len() {
            pairs += 1;
            let v = gram_inner_n(gram, &pool[i], &pool[j]);
            let scale = pool[i].max_abs().max(1.0) * pool[j].max_abs().max(1.0);
            if v < -tol * scale {
                return CpCheckOutcome::Fail { value: v, x: pool[i].clone(), y: pool[j].clone() };
            }
        }
    }
    CpCheckOutcome::Pass { pairs }
}

/// Self-duality gap probe: hermitian samples that pass the nonnegative
/// pairing screen against every certified element yet obtain neither an
/// Accept nor a Reject from the oracle. Heuristic evidence only.
#[derive(Debug, Clone, Default)]
pub struct SelfDualReport {
    pub samples: usize,
    pub screened_out: usize,
    pub decided: usize,
    pub gap_candidates: Vec<Element>,
}

pub fn self_dual_probe(
    space: &UniversalSpace,
    gram: &DMatrix<f64>,
    oracle: &dyn ConeOracle,
    samples: usize,
    tol: f64,
    seed: u64,
) -> SelfDualReport {
    let mut report = SelfDualReport::default();
    let Ok(cone) = base_cone(space) else {
        return report;
    };
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let dim = space.dim;
    let mut pool: Vec<Element> = cone.elements.clone();
    // Extra certified screen elements: random conic combinations.
    for _ in 0..20 {
        let mut acc = Element::zero(dim);
        for e in &cone.elements {
            acc = acc.add(&e.scale(rng.gen_range(0.0..1.0)));
        }
        pool.push(acc);
    }
    let mut candidates: Vec<Element> = cone.elements.clone();
    candidates.push(space.unit().scale(-1.0));
    while candidates.len() < samples {
        let coords = (0..dim)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), 0.0))
            .collect();
        candidates.push(Element { coords });
    }
    for x in candidates.into_iter().take(samples) {
        report.samples += 1;
        let screen_ok = pool.iter().all(|y| gram_inner(gram, &x, y) >= -tol);
        if !screen_ok {
            report.screened_out += 1;
            continue;
        }
        match oracle.decide(&MatElem::from_element(&x), 1e-8) {
            crate::cones::Verdict::Unknown => report.gap_candidates.push(x),
            _ => report.decided += 1,
        }
    }
    report
}

/// The universal space for d+1 resolutions `sum_a p_{x,a} = e` together
/// with the Tr-based Gram case formula of the MUB remark.
#[derive(Debug, Clone)]
pub struct MubPresentation {
    pub d: usize,
    pub space: UniversalSpace,
    /// Gram over the quotient basis (extracted from the canonical case
    /// formula at the basis selector columns).
    pub gram: DMatrix<f64>,
}

impl MubPresentation {
    /// Canonical generator index of p_{x,a}; x in [d+1], a in [d].
    pub fn index(&self, x: usize, a: usize) -> usize {
        1 + x * self.d + a
    }
}

/// Canonical (d(d+1)) x (d(d+1)) Gram of the MUB trace conditions:
/// `Tr(P_{x,a} P_{y,b})` is 1/d for x != y, 1 for (x,a) = (y,b), 0 for
/// x = y, a != b.
pub fn mub_gram(d: usize) -> DMatrix<f64> {
    let n = d * (d + 1);
    DMatrix::from_fn(n, n, |i, j| {
        let (x, a) = (i / d, i % d);
        let (y, b) = (j / d, j % d);
        if x != y {
            1.0 / d as f64
        } else if a == b {
            1.0
        } else {
            0.0
        }
    })
}

pub fn build_mub_presentation(d: usize) -> Result<MubPresentation, SicError> {
    assert!(d >= 2);
    let n = d * (d + 1);
    let mut rows = Vec::with_capacity(d + 1);
    for x in 0..=d {
        let mut row = vec![0.0; n + 1];
        row[0] = 1.0;
        for a in 0..d {
            row[1 + x * d + a] = -1.0;
        }
        rows.push(row);
    }
    let rels = RelationSet::new(n, rows)?;
    let space = build_space(&rels, Tolerances::default().rank_tol)?;
    let canonical = mub_gram(d);
    let gram = DMatrix::from_fn(space.dim, space.dim, |i, j| {
        let ci = space.basis_selector[i];
        let cj = space.basis_selector[j];
        assert!(ci >= 1 && cj >= 1, "unit column cannot be a quotient basis vector here");
        canonical[(ci - 1, cj - 1)]
    });
    Ok(MubPresentation { d, space, gram })
}
