//! Cone constructions on a universal space: the base contraction cone, its
//! Archimedean membership test, the max matrix ordering, the
//! projectivization operator and its round-robin iterates, inductive-limit
//! membership over a finite truncation, k-minimal membership, and a
//! properness probe.
//!
//! Verdict semantics are one-sided throughout: `Accept` is backed by a
//! certificate, `Reject` by a separating witness, and `Unknown` is the
//! honest third verdict for anything the finite truncations cannot settle.

use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::feasibility::{
    self, lp_member, psd_block_decompose, ConicCertificate, LpOutcome, PsdOutcome, Tolerances,
    Witness,
};
use crate::linalg::{self, identity, kron, min_eig_pair, min_eigenvalue, CMat};
use crate::relspace::{Element, UniversalSpace};

#[derive(Debug, Error)]
pub enum ConeError {
    #[error("universal space is degenerate (generators {0:?} vanish in the quotient)")]
    DegenerateSpace(Vec<usize>),
    #[error("p is not a certified contraction (0 <= p <= e failed on the {0} side)")]
    InvalidContraction(&'static str),
    #[error("element level {got} does not match expected level {expected}")]
    LevelMismatch { got: usize, expected: usize },
}

/// An n x n matrix over the universal space, stored as one n x n complex
/// coefficient matrix per quotient basis vector.
#[derive(Debug, Clone, PartialEq)]
pub struct MatElem {
    pub level: usize,
    pub coeffs: Vec<CMat>,
}

impl MatElem {
    pub fn zero(dim: usize, level: usize) -> Self {
        MatElem { level, coeffs: vec![CMat::zeros(level, level); dim] }
    }

    pub fn from_element(e: &Element) -> Self {
        MatElem {
            level: 1,
            coeffs: e.coords.iter().map(|&z| CMat::from_element(1, 1, z)).collect(),
        }
    }

    /// `a (x) e` for a scalar matrix `a` and space element `e`.
    pub fn tensor(a: &CMat, e: &Element) -> Self {
        MatElem {
            level: a.nrows(),
            coeffs: e.coords.iter().map(|&z| a * z).collect(),
        }
    }

    /// `I_n (x) e`.
    pub fn unit_like(e: &Element, n: usize) -> Self {
        Self::tensor(&identity(n), e)
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn add(&self, other: &MatElem) -> MatElem {
        MatElem {
            level: self.level,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> MatElem {
        MatElem {
            level: self.level,
            coeffs: self.coeffs.iter().map(|c| c * Complex64::new(s, 0.0)).collect(),
        }
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.coeffs.iter().all(|c| linalg::hermitian_residual(c) <= tol)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(linalg::max_abs).fold(0.0, f64::max)
    }

    /// `x (x) J_2` as a level-2n element: each coefficient becomes
    /// `J_2 (x) X_k` in outer-block ordering.
    pub fn block_j2(&self) -> MatElem {
        let j2 = CMat::from_element(2, 2, Complex64::new(1.0, 0.0));
        MatElem {
            level: 2 * self.level,
            coeffs: self.coeffs.iter().map(|c| kron(&j2, c)).collect(),
        }
    }

    /// `(a (+) b) (x) I_n` as a level-2n element (outer 2 x 2 diagonal of
    /// n x n scalar blocks).
    pub fn diag_pair(a: &Element, b: &Element, n: usize) -> MatElem {
        let dim = a.dim();
        let eye = identity(n);
        let mut d11 = CMat::zeros(2, 2);
        d11[(0, 0)] = Complex64::new(1.0, 0.0);
        let mut d22 = CMat::zeros(2, 2);
        d22[(1, 1)] = Complex64::new(1.0, 0.0);
        let coeffs = (0..dim)
            .map(|k| kron(&(&d11 * a.coords[k] + &d22 * b.coords[k]), &eye))
            .collect();
        MatElem { level: 2 * n, coeffs }
    }

    /// Compression `alpha* x alpha`, landing at level `alpha.ncols()`.
    pub fn compress(&self, alpha: &CMat) -> MatElem {
        MatElem {
            level: alpha.ncols(),
            coeffs: self.coeffs.iter().map(|c| alpha.adjoint() * c * alpha).collect(),
        }
    }

    /// Embed at a higher level by zero padding.
    pub fn pad_to(&self, level: usize) -> MatElem {
        assert!(level >= self.level);
        let coeffs = self
            .coeffs
            .iter()
            .map(|c| {
                let mut m = CMat::zeros(level, level);
                m.view_mut((0, 0), (self.level, self.level)).copy_from(c);
                m
            })
            .collect();
        MatElem { level, coeffs }
    }

    /// Real flattening (re and im of every coefficient entry), a linear
    /// coordinate system suitable for LP membership.
    pub fn flatten_real(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.coeffs.len() * self.level * self.level * 2);
        for c in &self.coeffs {
            for z in c.iter() {
                v.push(z.re);
                v.push(z.im);
            }
        }
        v
    }

    /// Extract the level-1 element when `level == 1`.
    pub fn as_element(&self) -> Element {
        assert_eq!(self.level, 1);
        Element { coords: self.coeffs.iter().map(|c| c[(0, 0)]).collect() }
    }
}

/// A finitely generated cone at a fixed matrix level.
#[derive(Debug, Clone)]
pub struct GeneratedCone {
    pub level: usize,
    pub generators: Vec<MatElem>,
    /// The underlying level-1 elements when the generators are level-1 (the
    /// base cone case); used for LP coordinates.
    pub elements: Vec<Element>,
    pub unit: Element,
}

impl GeneratedCone {
    pub fn generator_coords(&self) -> Vec<Vec<f64>> {
        self.elements.iter().map(|e| e.real_coords()).collect()
    }
}

/// Level-1 cone generated by `{e, p_i, p_i^perp}`.
pub fn base_cone(u: &UniversalSpace) -> Result<GeneratedCone, ConeError> {
    if u.is_degenerate() {
        return Err(ConeError::DegenerateSpace(u.degenerate_generators.clone()));
    }
    let mut elements = vec![u.unit()];
    for i in 1..=u.num_generators {
        elements.push(u.generator(i));
    }
    for i in 1..=u.num_generators {
        elements.push(u.complement(i));
    }
    let generators = elements.iter().map(MatElem::from_element).collect();
    Ok(GeneratedCone { level: 1, generators, elements, unit: u.unit() })
}

/// Certificate chain for an `Accept`, mirroring the oracle construction
/// that produced it so it can be re-verified independently.
#[derive(Debug, Clone)]
pub enum Certificate {
    Linear(ConicCertificate),
    PsdBlock(ConicCertificate),
    /// Concrete PSD cone membership; the certificate is the eigenvalue
    /// bound itself, re-verified by re-assembly.
    Eigen { min_eig: f64 },
    /// Accepted through the projectivization at the recorded `t`.
    Projectivized { t: f64, inner: Box<Certificate> },
}

/// Witness chain for a `Reject`.
#[derive(Debug, Clone)]
pub enum WitnessData {
    /// Separating functional on the real flattening of the decided level.
    Functional(Witness),
    /// Rank-one eigenvector witness on an assembled concrete matrix.
    EigVector(Vec<Complex64>),
    /// Witness valid for the projectivized element uniformly in t.
    Projectivized { inner: Box<WitnessData> },
}

#[derive(Debug, Clone)]
pub enum Verdict {
    Accept(Certificate),
    Reject(WitnessData),
    Unknown,
}

impl Verdict {
    pub fn is_accept(&self) -> bool {
        matches!(self, Verdict::Accept(_))
    }
    pub fn is_reject(&self) -> bool {
        matches!(self, Verdict::Reject(_))
    }
}

/// Knobs for the finite truncations of the Archimedean limits.
#[derive(Debug, Clone, Copy)]
pub struct OracleConfig {
    pub t_max: f64,
    pub t_steps: usize,
    pub bisect_steps: usize,
    pub tols: Tolerances,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            t_max: 1e6,
            t_steps: 40,
            bisect_steps: 30,
            tols: Tolerances::default(),
        }
    }
}

/// A membership-decision interface producing acceptance certificates or
/// rejection witnesses. Oracles are immutable once constructed and
/// `decide` is pure.
pub trait ConeOracle: Send + Sync {
    fn decide(&self, x: &MatElem, eps: f64) -> Verdict;
    /// Independent re-verification of a previously returned verdict.
    fn verify(&self, x: &MatElem, eps: f64, verdict: &Verdict) -> bool;
    /// Construction trace (which operators were applied, iteration depth).
    fn describe(&self) -> String;
    /// Evaluate a reject witness as a linear functional on an element of
    /// this oracle's cone, when the representation permits it.
    fn eval_witness(&self, _w: &WitnessData, _z: &MatElem) -> Option<f64> {
        None
    }
    fn depth(&self) -> usize {
        0
    }
    fn unit(&self) -> &Element;
}

/// Decide `x + eps e` membership in the conic hull of a level-1 generated
/// cone by LP; `Reject` carries the LP dual witness.
pub fn arch_member(cone: &GeneratedCone, x: &Element, eps: f64) -> Verdict {
    let shifted = x.add(&cone.unit.scale(eps));
    let target = shifted.real_coords();
    let gens = cone.generator_coords();
    match lp_member(&target, &gens, 1e-9) {
        Ok(LpOutcome::Member(c)) => Verdict::Accept(Certificate::Linear(c)),
        Ok(LpOutcome::Separated(w)) => Verdict::Reject(WitnessData::Functional(w)),
        Err(_) => Verdict::Unknown,
    }
}

/// Oracle for the max matrix ordering over a level-1 cone: level-n
/// membership is a PSD block decomposition over the level-1 generators.
/// Level 1 falls back to the LP, which can also reject.
pub struct MaxOracle {
    pub cone: GeneratedCone,
    pub cfg: OracleConfig,
}

impl MaxOracle {
    pub fn new(cone: GeneratedCone, cfg: OracleConfig) -> Self {
        MaxOracle { cone, cfg }
    }

    fn shifted(&self, x: &MatElem, eps: f64) -> MatElem {
        x.add(&MatElem::unit_like(&self.cone.unit, x.level).scale(eps))
    }
}

impl ConeOracle for MaxOracle {
    fn decide(&self, x: &MatElem, eps: f64) -> Verdict {
        let y = self.shifted(x, eps);
        if x.level == 1 {
            return arch_member(&self.cone, &y.as_element(), 0.0);
        }
        let gens = self.cone.generator_coords();
        match psd_block_decompose(&y.coeffs, &gens, &self.cfg.tols, self.cfg.tols.accept_tol) {
            PsdOutcome::Member(c) => Verdict::Accept(Certificate::PsdBlock(c)),
            PsdOutcome::Unknown => Verdict::Unknown,
        }
    }

    fn verify(&self, x: &MatElem, eps: f64, verdict: &Verdict) -> bool {
        let y = self.shifted(x, eps);
        let gens = self.cone.generator_coords();
        match verdict {
            Verdict::Accept(Certificate::Linear(c)) => feasibility::verify_linear_certificate(
                &y.as_element().real_coords(),
                &gens,
                c,
                self.cfg.tols.accept_tol.max(10.0 * c.residual),
            ),
            Verdict::Accept(Certificate::PsdBlock(c)) => feasibility::verify_psd_certificate(
                &y.coeffs,
                &gens,
                c,
                &self.cfg.tols,
                self.cfg.tols.accept_tol.max(10.0 * c.residual),
            ),
            Verdict::Reject(WitnessData::Functional(w)) => feasibility::verify_witness(
                &y.as_element().real_coords(),
                &gens,
                w,
                self.cfg.tols.psd_tol,
            ),
            Verdict::Unknown => true,
            _ => false,
        }
    }

    fn describe(&self) -> String {
        format!("max[{} generators]", self.cone.generators.len())
    }

    fn eval_witness(&self, w: &WitnessData, z: &MatElem) -> Option<f64> {
        match w {
            WitnessData::Functional(f) if z.level == 1 => {
                Some(feasibility::dot(&f.functional, &z.as_element().real_coords()))
            }
            _ => None,
        }
    }

    fn unit(&self) -> &Element {
        &self.cone.unit
    }
}

/// Oracle for the PSD cone of a concrete matrix span: elements assemble as
/// `sum_k X_k (x) B_k` for a fixed basis `B_k`, and membership is an
/// eigenvalue bound.
pub struct PsdConeOracle {
    pub basis: Vec<CMat>,
    pub unit_element: Element,
    pub tols: Tolerances,
}

impl PsdConeOracle {
    /// Oracle for all of `M_d` in its hermitian matrix-unit basis. The
    /// basis is chosen so that real coordinates describe hermitian
    /// matrices: E_ii, (E_ij + E_ji), i(E_ij - E_ji).
    pub fn full_matrix_algebra(d: usize, tols: Tolerances) -> Self {
        let mut basis = Vec::new();
        let mut unit = Vec::new();
        for i in 0..d {
            let mut m = CMat::zeros(d, d);
            m[(i, i)] = Complex64::new(1.0, 0.0);
            basis.push(m);
            unit.push(Complex64::new(1.0, 0.0));
        }
        for i in 0..d {
            for j in (i + 1)..d {
                let mut s = CMat::zeros(d, d);
                s[(i, j)] = Complex64::new(1.0, 0.0);
                s[(j, i)] = Complex64::new(1.0, 0.0);
                basis.push(s);
                unit.push(Complex64::default());
                let mut a = CMat::zeros(d, d);
                a[(i, j)] = Complex64::new(0.0, 1.0);
                a[(j, i)] = Complex64::new(0.0, -1.0);
                basis.push(a);
                unit.push(Complex64::default());
            }
        }
        PsdConeOracle { basis, unit_element: Element { coords: unit }, tols }
    }

    /// Coordinates of a concrete hermitian matrix in the basis above.
    pub fn coords_of(&self, m: &CMat) -> Element {
        let d = m.nrows();
        let mut coords = Vec::with_capacity(self.basis.len());
        for i in 0..d {
            coords.push(Complex64::new(m[(i, i)].re, 0.0));
        }
        for i in 0..d {
            for j in (i + 1)..d {
                coords.push(Complex64::new(m[(i, j)].re, 0.0));
                coords.push(Complex64::new(m[(i, j)].im, 0.0));
            }
        }
        Element { coords }
    }

    pub fn assemble(&self, x: &MatElem) -> CMat {
        let d = self.basis[0].nrows();
        let n = x.level;
        let mut acc = CMat::zeros(n * d, n * d);
        for (k, b) in self.basis.iter().enumerate() {
            acc += kron(&x.coeffs[k], b);
        }
        acc
    }
}

impl ConeOracle for PsdConeOracle {
    fn decide(&self, x: &MatElem, eps: f64) -> Verdict {
        let y = x.add(&MatElem::unit_like(&self.unit_element, x.level).scale(eps));
        let m = self.assemble(&y);
        let scale = linalg::max_abs(&m).max(1.0);
        let (lam, vec) = min_eig_pair(&m);
        if lam >= -self.tols.psd_tol * scale {
            Verdict::Accept(Certificate::Eigen { min_eig: lam })
        } else {
            Verdict::Reject(WitnessData::EigVector(vec))
        }
    }

    fn verify(&self, x: &MatElem, eps: f64, verdict: &Verdict) -> bool {
        let y = x.add(&MatElem::unit_like(&self.unit_element, x.level).scale(eps));
        let m = self.assemble(&y);
        let scale = linalg::max_abs(&m).max(1.0);
        match verdict {
            Verdict::Accept(Certificate::Eigen { .. }) => {
                min_eigenvalue(&m) >= -self.tols.psd_tol * scale
            }
            Verdict::Reject(WitnessData::EigVector(v)) => {
                rayleigh(&m, v) < -self.tols.psd_tol * scale
            }
            Verdict::Unknown => true,
            _ => false,
        }
    }

    fn describe(&self) -> String {
        format!("psd[M_{}]", self.basis[0].nrows())
    }

    fn eval_witness(&self, w: &WitnessData, z: &MatElem) -> Option<f64> {
        match w {
            WitnessData::EigVector(v) => Some(rayleigh(&self.assemble(z), v)),
            _ => None,
        }
    }

    fn unit(&self) -> &Element {
        &self.unit_element
    }
}

fn rayleigh(m: &CMat, v: &[Complex64]) -> f64 {
    let n = m.nrows();
    let mut acc = Complex64::default();
    let mut norm = 0.0f64;
    for i in 0..n {
        norm += v[i].norm_sqr();
        for j in 0..n {
            acc += v[i].conj() * m[(i, j)] * v[j];
        }
    }
    if norm == 0.0 {
        0.0
    } else {
        acc.re / norm
    }
}

/// Oracle for `C(p)` (equivalently `C[p]` at the fixed level): decides by
/// searching the Archimedean slack `t` over a geometric grid and asking
/// the inner oracle at doubled level.
pub struct CpOracle {
    pub inner: Arc<dyn ConeOracle>,
    pub p: Element,
    pub p_perp: Element,
    pub cfg: OracleConfig,
    depth: usize,
}

impl CpOracle {
    /// Builds the oracle, certifying `0 <= p <= e` against `contraction
    /// check` cone first (the base cone is always a sound checker since
    /// every iterate contains it).
    pub fn new(
        inner: Arc<dyn ConeOracle>,
        p: Element,
        check: &GeneratedCone,
        cfg: OracleConfig,
    ) -> Result<Self, ConeError> {
        let unit = inner.unit().clone();
        let p_perp = unit.sub(&p);
        if !arch_member(check, &p, cfg.tols.accept_tol).is_accept() {
            return Err(ConeError::InvalidContraction("p >= 0"));
        }
        if !arch_member(check, &p_perp, cfg.tols.accept_tol).is_accept() {
            return Err(ConeError::InvalidContraction("p <= e"));
        }
        let depth = inner.depth() + 1;
        Ok(CpOracle { inner, p, p_perp, cfg, depth })
    }

    /// `x (x) J_2 + eps I (x) (p (+) p_perp) + t I (x) (p_perp (+) p)`.
    pub fn projectivized(&self, x: &MatElem, eps: f64, t: f64) -> MatElem {
        let n = x.level;
        x.block_j2()
            .add(&MatElem::diag_pair(&self.p, &self.p_perp, n).scale(eps))
            .add(&MatElem::diag_pair(&self.p_perp, &self.p, n).scale(t))
    }

    fn t_grid(&self, eps: f64) -> Vec<f64> {
        let lo = (eps.max(1e-9)).min(self.cfg.t_max);
        let hi = self.cfg.t_max;
        let steps = self.cfg.t_steps.max(2);
        let mut grid: Vec<f64> = (0..steps)
            .map(|i| lo * (hi / lo).powf(i as f64 / (steps - 1) as f64))
            .collect();
        // The t = eps point realizes the inclusion of the inner cone.
        if grid[0] > eps && eps > 0.0 {
            grid.insert(0, eps);
        }
        grid
    }
}

impl ConeOracle for CpOracle {
    fn decide(&self, x: &MatElem, eps: f64) -> Verdict {
        let grid = self.t_grid(eps);
        let mut last_reject: Option<WitnessData> = None;
        let mut all_reject = true;
        let mut accept_at: Option<(usize, Certificate)> = None;
        for (i, &t) in grid.iter().enumerate() {
            let y = self.projectivized(x, eps, t);
            match self.inner.decide(&y, eps) {
                Verdict::Accept(c) => {
                    accept_at = Some((i, c));
                    break;
                }
                Verdict::Reject(w) => last_reject = Some(w),
                Verdict::Unknown => all_reject = false,
            }
        }
        if let Some((i, cert)) = accept_at {
            // Bisection refinement of the minimal accepting t.
            let mut t_hi = grid[i];
            let mut cert = cert;
            if i > 0 {
                let mut t_lo = grid[i - 1];
                for _ in 0..self.cfg.bisect_steps {
                    if (t_hi - t_lo) <= 1e-6 * t_hi {
                        break;
                    }
                    let mid = (t_lo * t_hi).sqrt();
                    let y = self.projectivized(x, eps, mid);
                    match self.inner.decide(&y, eps) {
                        Verdict::Accept(c) => {
                            t_hi = mid;
                            cert = c;
                        }
                        _ => t_lo = mid,
                    }
                }
            }
            return Verdict::Accept(Certificate::Projectivized { t: t_hi, inner: Box::new(cert) });
        }
        // Reject only with a witness valid uniformly in t: nonincreasing
        // along the t direction and negative on the whole grid.
        if all_reject {
            if let Some(w) = last_reject {
                let t_dir = MatElem::diag_pair(&self.p_perp, &self.p, x.level);
                let dir_val = self.eval_witness(&w, &t_dir);
                let tol = self.cfg.tols.psd_tol;
                if let Some(dv) = dir_val {
                    if dv.abs() <= 1e-5 {
                        let all_neg = grid.iter().all(|&t| {
                            self.eval_witness(&w, &self.projectivized(x, eps, t))
                                .is_some_and(|v| v < -tol)
                        });
                        if all_neg {
                            return Verdict::Reject(WitnessData::Projectivized {
                                inner: Box::new(w),
                            });
                        }
                    }
                }
            }
        }
        Verdict::Unknown
    }

    fn verify(&self, x: &MatElem, eps: f64, verdict: &Verdict) -> bool {
        match verdict {
            Verdict::Accept(Certificate::Projectivized { t, inner }) => {
                let y = self.projectivized(x, eps, *t);
                self.inner.verify(&y, eps, &Verdict::Accept((**inner).clone()))
            }
            Verdict::Reject(WitnessData::Projectivized { inner }) => {
                let tol = self.cfg.tols.psd_tol;
                let t_dir = MatElem::diag_pair(&self.p_perp, &self.p, x.level);
                let Some(dv) = self.eval_witness(inner, &t_dir) else {
                    return false;
                };
                dv.abs() <= 1e-5
                    && self.t_grid(eps).iter().all(|&t| {
                        self.eval_witness(inner, &self.projectivized(x, eps, t))
                            .is_some_and(|v| v < -tol)
                    })
            }
            Verdict::Unknown => true,
            _ => false,
        }
    }

    fn describe(&self) -> String {
        format!("proj(depth {}) over {}", self.depth, self.inner.describe())
    }

    fn eval_witness(&self, w: &WitnessData, z: &MatElem) -> Option<f64> {
        self.inner.eval_witness(w, z)
    }

    fn depth(&self) -> usize {
        self.depth
    }

    fn unit(&self) -> &Element {
        self.inner.unit()
    }
}

/// Build the nested oracles `E^0..E^T` with `E^j = E^{j-1}(p_i)`,
/// round-robin over the generator indices in `order`.
pub fn iterate_proj(
    u: &UniversalSpace,
    base: &GeneratedCone,
    c0: Arc<dyn ConeOracle>,
    order: &[usize],
    t_levels: usize,
    cfg: OracleConfig,
) -> Result<Vec<Arc<dyn ConeOracle>>, ConeError> {
    let mut out: Vec<Arc<dyn ConeOracle>> = vec![c0];
    if order.is_empty() {
        return Ok(out);
    }
    for j in 1..=t_levels {
        let idx = order[(j - 1) % order.len()];
        let p = u.generator(idx);
        let prev = out.last().unwrap().clone();
        let oracle = CpOracle::new(prev, p, base, cfg)?;
        out.push(Arc::new(oracle));
    }
    Ok(out)
}

/// First level whose oracle accepts `x` at `eps`; `None` is the honest
/// outcome for a finite truncation of the inductive limit.
pub fn limit_member(
    iterates: &[Arc<dyn ConeOracle>],
    x: &MatElem,
    eps: f64,
) -> (Option<usize>, Verdict) {
    for (level, oracle) in iterates.iter().enumerate() {
        let v = oracle.decide(x, eps);
        if v.is_accept() {
            return (Some(level), v);
        }
    }
    (None, Verdict::Unknown)
}

/// k-minimal membership at level n, by the unital k-positive map
/// characterization. `Accept` only through sound routes (a max-structure
/// certificate over the level-1 generators, or an LP certificate at the
/// padded level when n <= k); `Reject` through an independently re-verified
/// k-positive witness map; `Unknown` otherwise.
pub fn kmin_member(
    cone1: &GeneratedCone,
    k: usize,
    x: &MatElem,
    samples: usize,
    opt_steps: usize,
    seed: u64,
    tols: &Tolerances,
) -> Verdict {
    use rand::{Rng, SeedableRng};
    let n = x.level;
    let dim = x.dim();

    // Sound accept route 1: max-structure membership (inner approximation
    // of every operator system structure, in particular k-min).
    let max_oracle = MaxOracle::new(cone1.clone(), OracleConfig { tols: *tols, ..Default::default() });
    let v = max_oracle.decide(x, 0.0);
    if v.is_accept() {
        return v;
    }

    // Sound accept route 2: for n <= k, a conic certificate of the padded
    // element over the padded generators I_k (x) g.
    if n <= k {
        let padded = x.pad_to(k);
        let gens: Vec<Vec<f64>> = cone1
            .elements
            .iter()
            .map(|e| MatElem::unit_like(e, k).flatten_real())
            .collect();
        // Also the corner paddings g (+) 0 are certified members.
        let mut all_gens = gens;
        for e in &cone1.elements {
            all_gens.push(MatElem::from_element(e).pad_to(k).flatten_real());
        }
        if let Ok(LpOutcome::Member(c)) = lp_member(&padded.flatten_real(), &all_gens, 1e-9) {
            if c.residual <= tols.accept_tol {
                return Verdict::Accept(Certificate::Linear(c));
            }
        }
    }

    // Witness search: unital maps phi: V -> M_k, k-positive on the cone
    // (equivalently phi(g) PSD for every level-1 generator), driving
    // lambda_min(phi_n(x)) negative by projected gradient descent.
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let unit = &cone1.unit;
    let gen_coords: Vec<Vec<f64>> = cone1.elements.iter().map(|e| e.real_coords()).collect();
    let phi_of = |f: &[CMat], coords: &[f64]| -> CMat {
        let mut acc = CMat::zeros(k, k);
        for (l, m) in f.iter().enumerate() {
            acc += m * Complex64::new(coords[l], 0.0);
        }
        acc
    };
    let phi_n = |f: &[CMat], x: &MatElem| -> CMat {
        let mut acc = CMat::zeros(n * k, n * k);
        for l in 0..dim {
            acc += kron(&x.coeffs[l], &f[l]);
        }
        acc
    };
    let unit_coords = unit.real_coords();
    let unit_norm2: f64 = unit_coords.iter().map(|c| c * c).sum();
    let project_unital = |f: &mut Vec<CMat>| {
        let defect = identity(k) - phi_of(f, &unit_coords);
        for (l, &c) in unit_coords.iter().enumerate() {
            if c != 0.0 {
                f[l] += &defect * Complex64::new(c / unit_norm2, 0.0);
            }
        }
    };
    let herm = |m: &CMat| (m + m.adjoint()) * Complex64::new(0.5, 0.0);

    for _ in 0..samples.max(1) {
        // Random hermitian initialization, then repair feasibility.
        let mut f: Vec<CMat> = (0..dim)
            .map(|_| {
                let m = CMat::from_fn(k, k, |_, _| {
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                });
                herm(&m)
            })
            .collect();
        let repair = |f: &mut Vec<CMat>| {
            for _ in 0..200 {
                project_unital(f);
                let mut worst = 0.0f64;
                for gc in &gen_coords {
                    let m = phi_of(f, gc);
                    let lam = min_eigenvalue(&m);
                    if lam < -tols.psd_tol {
                        worst = worst.min(lam);
                        // Push phi(g) toward PSD by least squares through
                        // the coordinates of g.
                        let corr = linalg::psd_projection(&m) - &m;
                        let g2: f64 = gc.iter().map(|c| c * c).sum();
                        if g2 > 0.0 {
                            for (l, &c) in gc.iter().enumerate() {
                                f[l] += &corr * Complex64::new(c / g2, 0.0);
                            }
                        }
                    }
                }
                if worst >= -tols.psd_tol {
                    return true;
                }
            }
            false
        };
        if !repair(&mut f) {
            continue;
        }
        let mut best = f.clone();
        let mut best_lam = min_eigenvalue(&phi_n(&best, x));
        for step in 0..opt_steps {
            let m = phi_n(&f, x);
            let (lam, v) = min_eig_pair(&m);
            if lam < best_lam {
                best_lam = lam;
                best = f.clone();
            }
            if lam < -1e-4 {
                break;
            }
            // Gradient of lambda_min w.r.t. each F_l.
            let mut grads: Vec<CMat> = Vec::with_capacity(dim);
            for l in 0..dim {
                let mut w = CMat::zeros(k, k);
                for a in 0..k {
                    for b in 0..k {
                        let mut acc = Complex64::default();
                        for s in 0..n {
                            for t in 0..n {
                                acc += v[s * k + a].conj() * x.coeffs[l][(s, t)] * v[t * k + b];
                            }
                        }
                        w[(a, b)] = acc;
                    }
                }
                grads.push(herm(&w));
            }
            let gnorm = grads.iter().map(linalg::max_abs).fold(0.0, f64::max).max(1e-12);
            let eta = 0.2 / gnorm * (1.0 - step as f64 / opt_steps as f64).max(0.05);
            for l in 0..dim {
                f[l] -= &grads[l] * Complex64::new(eta, 0.0);
            }
            if !repair(&mut f) {
                break;
            }
        }
        // Independent re-verification of the best candidate.
        let lam = min_eigenvalue(&phi_n(&best, x));
        if lam < -10.0 * tols.psd_tol {
            let unital_ok =
                linalg::max_abs(&(phi_of(&best, &unit_coords) - identity(k))) <= tols.accept_tol;
            let kpos_ok = gen_coords
                .iter()
                .all(|gc| min_eigenvalue(&phi_of(&best, gc)) >= -10.0 * tols.psd_tol);
            if unital_ok && kpos_ok {
                let flat: Vec<f64> = best
                    .iter()
                    .flat_map(|m| m.iter().flat_map(|z| [z.re, z.im]))
                    .collect();
                return Verdict::Reject(WitnessData::Functional(Witness {
                    functional: flat,
                    violation: lam,
                }));
            }
        }
    }
    Verdict::Unknown
}

/// Re-verify a `kmin_member` reject witness: unpack the map, check
/// unitality, k-positivity on the generators, and the violation.
pub fn verify_kmin_witness(
    cone1: &GeneratedCone,
    k: usize,
    x: &MatElem,
    w: &Witness,
    tols: &Tolerances,
) -> bool {
    let dim = x.dim();
    if w.functional.len() != dim * k * k * 2 {
        return false;
    }
    let f: Vec<CMat> = (0..dim)
        .map(|l| {
            CMat::from_fn(k, k, |i, j| {
                let base = l * k * k * 2 + (j * k + i) * 2;
                Complex64::new(w.functional[base], w.functional[base + 1])
            })
        })
        .collect();
    let phi_of = |coords: &[f64]| -> CMat {
        let mut acc = CMat::zeros(k, k);
        for (l, m) in f.iter().enumerate() {
            acc += m * Complex64::new(coords[l], 0.0);
        }
        acc
    };
    if linalg::max_abs(&(phi_of(&cone1.unit.real_coords()) - identity(k))) > 1e-6 {
        return false;
    }
    if cone1
        .elements
        .iter()
        .any(|g| min_eigenvalue(&phi_of(&g.real_coords())) < -100.0 * tols.psd_tol)
    {
        return false;
    }
    let n = x.level;
    let mut acc = CMat::zeros(n * k, n * k);
    for l in 0..dim {
        acc += kron(&x.coeffs[l], &f[l]);
    }
    min_eigenvalue(&acc) < -10.0 * tols.psd_tol
}

/// Properness probe: samples hermitian elements and reports any x != 0
/// with both x and -x accepted. An empty report is evidence, not proof.
#[derive(Debug, Clone, Default)]
pub struct PropernessReport {
    pub samples_tested: usize,
    pub violations: Vec<Element>,
}

pub fn properness_probe(
    oracle: &dyn ConeOracle,
    dim: usize,
    eps: f64,
    samples: usize,
    seed: u64,
) -> PropernessReport {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut report = PropernessReport::default();
    let mut candidates: Vec<Element> = Vec::new();
    for i in 0..dim {
        let mut c = vec![Complex64::default(); dim];
        c[i] = Complex64::new(1.0, 0.0);
        candidates.push(Element { coords: c });
    }
    while candidates.len() < samples {
        let coords = (0..dim)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), 0.0))
            .collect();
        candidates.push(Element { coords });
    }
    candidates.truncate(samples.max(dim));
    for x in candidates {
        if x.max_abs() == 0.0 {
            continue;
        }
        report.samples_tested += 1;
        let xm = MatElem::from_element(&x);
        let neg = MatElem::from_element(&x.scale(-1.0));
        if oracle.decide(&xm, eps).is_accept() && oracle.decide(&neg, eps).is_accept() {
            report.violations.push(x);
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relspace::{build_space, RelationSet};

    fn space_n1() -> UniversalSpace {
        // One free generator, no relations: dim 2.
        build_space(&RelationSet::new(1, vec![]).unwrap(), 1e-10).unwrap()
    }

    fn light_cfg() -> OracleConfig {
        OracleConfig { t_steps: 12, bisect_steps: 8, ..Default::default() }
    }

    #[test]
    fn base_cone_counts() {
        let u = space_n1();
        let c = base_cone(&u).unwrap();
        assert_eq!(c.generators.len(), 3); // e, p1, e - p1

        let sic = crate::sicpovm::build_sic_presentation(2).unwrap();
        let c = base_cone(&sic.space).unwrap();
        assert_eq!(c.generators.len(), 9);

        let ns = crate::correlations::build_ns_space(2, 2).unwrap();
        let c = base_cone(&ns.space).unwrap();
        assert_eq!(c.generators.len(), 33);
    }

    #[test]
    fn degenerate_space_refused() {
        let r = RelationSet::new(2, vec![vec![0.0, 1.0, 0.0]]).unwrap();
        let u = build_space(&r, 1e-10).unwrap();
        assert!(matches!(base_cone(&u), Err(ConeError::DegenerateSpace(_))));
    }

    #[test]
    fn arch_member_generator_and_negative_unit() {
        let u = space_n1();
        let c = base_cone(&u).unwrap();
        let p1 = u.generator(1);
        assert!(arch_member(&c, &p1, 0.0).is_accept());
        assert!(arch_member(&c, &p1, 0.5).is_accept());
        let neg_e = u.unit().scale(-1.0);
        let v = arch_member(&c, &neg_e, 0.5);
        assert!(v.is_reject());
        // At eps >= 1 the shifted element is back in the cone.
        assert!(arch_member(&c, &neg_e, 1.0 + 1e-9).is_accept());
    }

    #[test]
    fn arch_member_relation_collapses() {
        // e - sum p_i is zero in the quotient for the resolution relation.
        let r = RelationSet::resolution_of_identity(3);
        let u = build_space(&r, 1e-10).unwrap();
        let c = base_cone(&u).unwrap();
        let mut x = u.unit();
        for i in 1..=3 {
            x = x.sub(&u.generator(i));
        }
        assert!(x.max_abs() < 1e-12);
        assert!(arch_member(&c, &x, 0.0).is_accept());
    }

    #[test]
    fn max_oracle_unit_and_blocks() {
        let u = space_n1();
        let c = base_cone(&u).unwrap();
        let oracle = MaxOracle::new(c.clone(), light_cfg());
        // I_2 (x) g for each generator.
        for e in &c.elements {
            let x = MatElem::unit_like(e, 2);
            let v = oracle.decide(&x, 0.0);
            assert!(v.is_accept(), "generator not accepted at level 2");
            assert!(oracle.verify(&x, 0.0, &v));
        }
    }

    #[test]
    fn max_oracle_negative_never_accepts() {
        let u = space_n1();
        let c = base_cone(&u).unwrap();
        let oracle = MaxOracle::new(c, light_cfg());
        // A (x) e with lambda_min(A) = -1 at eps = 0.5.
        let mut a = identity(2);
        a[(1, 1)] = Complex64::new(-1.0, 0.0);
        let x = MatElem::tensor(&a, &u.unit());
        let v = oracle.decide(&x, 0.5);
        assert!(!v.is_accept());
    }

    #[test]
    fn max_oracle_two_block_certificate() {
        let u = space_n1();
        let c = base_cone(&u).unwrap();
        let oracle = MaxOracle::new(c, light_cfg());
        // B (x) p1 + B' (x) p1_perp, both PSD.
        let mut b = identity(2);
        b[(0, 1)] = Complex64::new(0.3, 0.0);
        b[(1, 0)] = Complex64::new(0.3, 0.0);
        let bp = identity(2).scale(2.0);
        let x = MatElem::tensor(&b, &u.generator(1)).add(&MatElem::tensor(&bp, &u.complement(1)));
        let v = oracle.decide(&x, 0.0);
        assert!(v.is_accept());
        assert!(oracle.verify(&x, 0.0, &v));
    }

    #[test]
    fn psd_oracle_fixed_point_projection() {
        // In M_3 with p = diag(1,1,0): cp acceptance must match PSD-ness.
        let tols = Tolerances::default();
        let psd = Arc::new(PsdConeOracle::full_matrix_algebra(3, tols));
        let mut pm = CMat::zeros(3, 3);
        pm[(0, 0)] = Complex64::new(1.0, 0.0);
        pm[(1, 1)] = Complex64::new(1.0, 0.0);
        let p = psd.coords_of(&pm);
        // Contraction check cone: generators e, p, e-p in the concrete space.
        let unit = psd.unit_element.clone();
        let elements = vec![unit.clone(), p.clone(), unit.sub(&p)];
        let check = GeneratedCone {
            level: 1,
            generators: elements.iter().map(MatElem::from_element).collect(),
            elements,
            unit: unit.clone(),
        };
        let cp = CpOracle::new(psd.clone(), p, &check, light_cfg()).unwrap();

        // PSD sample accepts.
        let mut good = identity(3);
        good[(0, 2)] = Complex64::new(0.4, 0.2);
        good[(2, 0)] = Complex64::new(0.4, -0.2);
        let xg = MatElem::from_element(&psd.coords_of(&good));
        let v = cp.decide(&xg, 1e-6);
        assert!(v.is_accept());
        assert!(cp.verify(&xg, 1e-6, &v));

        // Indefinite sample must not accept, and should reject.
        let mut bad = identity(3);
        bad[(2, 2)] = Complex64::new(-0.5, 0.0);
        let xb = MatElem::from_element(&psd.coords_of(&bad));
        let v = cp.decide(&xb, 1e-6);
        assert!(!v.is_accept());
        assert!(v.is_reject());
        assert!(cp.verify(&xb, 1e-6, &v));
    }

    #[test]
    fn cp_oracle_rejects_bad_contraction() {
        let u = space_n1();
        let c = base_cone(&u).unwrap();
        let oracle: Arc<dyn ConeOracle> = Arc::new(MaxOracle::new(c.clone(), light_cfg()));
        // 2e is not a contraction.
        let bad = u.unit().scale(2.0);
        assert!(matches!(
            CpOracle::new(oracle, bad, &c, light_cfg()),
            Err(ConeError::InvalidContraction(_))
        ));
    }

    #[test]
    fn iterate_nesting_on_generators() {
        let u = space_n1();
        let c = base_cone(&u).unwrap();
        let c0: Arc<dyn ConeOracle> = Arc::new(MaxOracle::new(c.clone(), light_cfg()));
        let iterates = iterate_proj(&u, &c, c0, &[1], 2, light_cfg()).unwrap();
        assert_eq!(iterates.len(), 3);
        let p1 = MatElem::from_element(&u.generator(1));
        for oracle in &iterates {
            assert!(oracle.decide(&p1, 1e-6).is_accept());
        }
        // T = 0 returns the inner oracle unchanged.
        let c0b: Arc<dyn ConeOracle> = Arc::new(MaxOracle::new(c.clone(), light_cfg()));
        let only = iterate_proj(&u, &c, c0b, &[1], 0, light_cfg()).unwrap();
        assert_eq!(only.len(), 1);
    }

    #[test]
    fn limit_member_levels() {
        let u = space_n1();
        let c = base_cone(&u).unwrap();
        let c0: Arc<dyn ConeOracle> = Arc::new(MaxOracle::new(c.clone(), light_cfg()));
        let iterates = iterate_proj(&u, &c, c0, &[1], 1, light_cfg()).unwrap();
        let p1 = MatElem::from_element(&u.generator(1));
        let (level, v) = limit_member(&iterates, &p1, 1e-6);
        assert_eq!(level, Some(0));
        assert!(v.is_accept());
        let neg = MatElem::from_element(&u.unit().scale(-1.0));
        let (level, _) = limit_member(&iterates, &neg, 1e-6);
        assert_eq!(level, None);
    }

    #[test]
    fn kmin_unit_accept_and_negative_reject() {
        let sic = crate::sicpovm::build_sic_presentation(2).unwrap();
        let c = base_cone(&sic.space).unwrap();
        let tols = Tolerances::default();
        let unit2 = MatElem::unit_like(&c.unit, 2);
        assert!(kmin_member(&c, 2, &unit2, 8, 60, 7, &tols).is_accept());

        let neg = unit2.scale(-1.0);
        let v = kmin_member(&c, 2, &neg, 8, 60, 7, &tols);
        match &v {
            Verdict::Reject(WitnessData::Functional(w)) => {
                assert!(verify_kmin_witness(&c, 2, &neg, w, &tols));
            }
            other => panic!("expected reject, got {other:?}"),
        }

        // A generator at n = 1 accepts directly.
        let p1 = MatElem::from_element(&sic.space.generator(1));
        assert!(kmin_member(&c, 2, &p1, 8, 60, 7, &tols).is_accept());
    }

    #[test]
    fn properness_psd_cone_empty_report() {
        let tols = Tolerances::default();
        let psd = PsdConeOracle::full_matrix_algebra(3, tols);
        let report = properness_probe(&psd, 9, 1e-8, 40, 1);
        assert!(report.violations.is_empty());
        assert!(report.samples_tested > 0);
    }

    #[test]
    fn monotone_in_eps() {
        let u = space_n1();
        let c = base_cone(&u).unwrap();
        // x slightly outside: p1 - 0.05 e accepted at eps 0.1, and then
        // accepted at every larger eps.
        let x = u.generator(1).sub(&u.unit().scale(0.05));
        assert!(arch_member(&c, &x, 0.1).is_accept());
        assert!(arch_member(&c, &x, 0.2).is_accept());
        assert!(arch_member(&c, &x, 1.0).is_accept());
    }

    #[test]
    fn compression_stability() {
        let u = space_n1();
        let c = base_cone(&u).unwrap();
        let oracle = MaxOracle::new(c, light_cfg());
        let x = MatElem::unit_like(&u.generator(1), 3);
        assert!(oracle.decide(&x, 0.0).is_accept());
        // Contraction alpha in M_{3,2}.
        let alpha = CMat::from_fn(3, 2, |i, j| {
            Complex64::new(if i == j { 0.8 } else { 0.1 }, 0.0)
        });
        let xc = x.compress(&alpha);
        assert!(oracle.decide(&xc, 1e-8).is_accept());
    }
}
