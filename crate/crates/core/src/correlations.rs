//! Correlation boxes with n inputs and m outputs: exact nonsignalling and
//! local-polytope tests, the universal nonsignalling space, and the dual
//! cone hierarchy tests evaluated through box functionals.

use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cones::{self, base_cone, ConeOracle, MatElem, MaxOracle, OracleConfig};
use crate::feasibility::{lp_member, ConicCertificate, LpOutcome, Tolerances, Witness};
use crate::linalg::CMat;
use crate::relspace::{build_space, Element, RelationSet, UniversalSpace};

pub const DEFAULT_VERTEX_CAP: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum CorrError {
    #[error("box tensor shape does not match n = {n}, m = {m}")]
    BadShape { n: usize, m: usize },
    #[error("deterministic vertex count {0} exceeds the configured cap {1}")]
    SizeLimit(usize, usize),
    #[error("box is signalling (marginal residual {0:.3e}); functional ill-defined on the quotient")]
    NotNonsignalling(f64),
    #[error("LP failed: {0}")]
    Lp(#[from] crate::feasibility::FeasibilityError),
    #[error("cone construction failed: {0}")]
    Cone(#[from] cones::ConeError),
}

/// A correlation p(a,b|x,y), indexed `p[x][y][a][b]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Box {
    pub n: usize,
    pub m: usize,
    pub p: Vec<Vec<Vec<Vec<f64>>>>,
}

impl Box {
    pub fn uniform(n: usize, m: usize) -> Box {
        let v = 1.0 / (m * m) as f64;
        Box { n, m, p: vec![vec![vec![vec![v; m]; m]; n]; n] }
    }

    /// The deterministic box given by response functions a = f_a(x),
    /// b = f_b(y).
    pub fn deterministic(n: usize, m: usize, fa: &[usize], fb: &[usize]) -> Box {
        let mut b = Box { n, m, p: vec![vec![vec![vec![0.0; m]; m]; n]; n] };
        for x in 0..n {
            for y in 0..n {
                b.p[x][y][fa[x]][fb[y]] = 1.0;
            }
        }
        b
    }

    /// PR box: p(a,b|x,y) = 1/2 iff a xor b = x and y.
    pub fn pr() -> Box {
        let mut b = Box { n: 2, m: 2, p: vec![vec![vec![vec![0.0; 2]; 2]; 2]; 2] };
        for x in 0..2 {
            for y in 0..2 {
                for a in 0..2 {
                    for bb in 0..2 {
                        if (a ^ bb) == (x & y) {
                            b.p[x][y][a][bb] = 0.5;
                        }
                    }
                }
            }
        }
        b
    }

    /// Quantum box from the optimal CHSH qubit strategy at measurement
    /// angles (0, pi/4) for A and (pi/8, -pi/8) for B:
    /// p(a,b|x,y) = (1 + (-1)^(a+b) cos 2(alpha_x - beta_y)) / 4.
    pub fn tsirelson() -> Box {
        let alphas = [0.0, std::f64::consts::FRAC_PI_4];
        let betas = [std::f64::consts::FRAC_PI_8, -std::f64::consts::FRAC_PI_8];
        let mut b = Box { n: 2, m: 2, p: vec![vec![vec![vec![0.0; 2]; 2]; 2]; 2] };
        for x in 0..2 {
            for y in 0..2 {
                let c = (2.0 * (alphas[x] - betas[y])).cos();
                for a in 0..2 {
                    for bb in 0..2 {
                        let sign = if (a + bb) % 2 == 0 { 1.0 } else { -1.0 };
                        b.p[x][y][a][bb] = (1.0 + sign * c) / 4.0;
                    }
                }
            }
        }
        b
    }

    /// Isotropic mixture v * PR + (1 - v) * uniform.
    pub fn isotropic(v: f64) -> Box {
        Box::pr().mix(&Box::uniform(2, 2), v)
    }

    /// `w * self + (1 - w) * other`.
    pub fn mix(&self, other: &Box, w: f64) -> Box {
        let mut out = self.clone();
        for x in 0..self.n {
            for y in 0..self.n {
                for a in 0..self.m {
                    for b in 0..self.m {
                        out.p[x][y][a][b] =
                            w * self.p[x][y][a][b] + (1.0 - w) * other.p[x][y][a][b];
                    }
                }
            }
        }
        out
    }

    pub fn validate_shape(&self) -> Result<(), CorrError> {
        let ok = self.p.len() == self.n
            && self.p.iter().all(|py| {
                py.len() == self.n
                    && py.iter().all(|pa| {
                        pa.len() == self.m && pa.iter().all(|pb| pb.len() == self.m)
                    })
            });
        if ok {
            Ok(())
        } else {
            Err(CorrError::BadShape { n: self.n, m: self.m })
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n * self.n * self.m * self.m);
        for x in 0..self.n {
            for y in 0..self.n {
                for a in 0..self.m {
                    for b in 0..self.m {
                        v.push(self.p[x][y][a][b]);
                    }
                }
            }
        }
        v
    }

    pub fn is_correlation(&self, tol: f64) -> (bool, f64) {
        let mut residual = 0.0f64;
        for x in 0..self.n {
            for y in 0..self.n {
                let mut sum = 0.0;
                for a in 0..self.m {
                    for b in 0..self.m {
                        let v = self.p[x][y][a][b];
                        residual = residual.max((-v).max(0.0));
                        sum += v;
                    }
                }
                residual = residual.max((sum - 1.0).abs());
            }
        }
        (residual <= tol, residual)
    }

    /// Marginal p_A(a|x) computed with the other input fixed to `y`.
    fn a_marginal(&self, a: usize, x: usize, y: usize) -> f64 {
        (0..self.m).map(|b| self.p[x][y][a][b]).sum()
    }

    fn b_marginal(&self, b: usize, y: usize, x: usize) -> f64 {
        (0..self.m).map(|a| self.p[x][y][a][b]).sum()
    }

    pub fn is_nonsignalling(&self, tol: f64) -> (bool, f64) {
        let mut residual = 0.0f64;
        for a in 0..self.m {
            for x in 0..self.n {
                let base = self.a_marginal(a, x, 0);
                for y in 1..self.n {
                    residual = residual.max((self.a_marginal(a, x, y) - base).abs());
                }
            }
        }
        for b in 0..self.m {
            for y in 0..self.n {
                let base = self.b_marginal(b, y, 0);
                for x in 1..self.n {
                    residual = residual.max((self.b_marginal(b, y, x) - base).abs());
                }
            }
        }
        (residual <= tol, residual)
    }

    /// CHSH value E(0,0) + E(0,1) + E(1,0) - E(1,1) for (2,2) boxes.
    pub fn chsh_value(&self) -> f64 {
        assert_eq!((self.n, self.m), (2, 2));
        let e = |x: usize, y: usize| -> f64 {
            let mut acc = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    let sign = if (a + b) % 2 == 0 { 1.0 } else { -1.0 };
                    acc += sign * self.p[x][y][a][b];
                }
            }
            acc
        };
        e(0, 0) + e(0, 1) + e(1, 0) - e(1, 1)
    }
}

/// All m^n * m^n deterministic boxes, in (fa, fb) lexicographic order.
pub fn deterministic_boxes(n: usize, m: usize, cap: usize) -> Result<Vec<Box>, CorrError> {
    let per_side = (m as u64).checked_pow(n as u32).ok_or(CorrError::SizeLimit(usize::MAX, cap))?;
    let total = per_side
        .checked_mul(per_side)
        .filter(|&t| t <= cap as u64)
        .ok_or(CorrError::SizeLimit(usize::MAX, cap))? as usize;
    let decode = |mut idx: u64| -> Vec<usize> {
        let mut f = vec![0usize; n];
        for slot in f.iter_mut() {
            *slot = (idx % m as u64) as usize;
            idx /= m as u64;
        }
        f
    };
    let mut out = Vec::with_capacity(total);
    for ia in 0..per_side {
        let fa = decode(ia);
        for ib in 0..per_side {
            let fb = decode(ib);
            out.push(Box::deterministic(n, m, &fa, &fb));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub enum LocalVerdict {
    /// Convex weights over the deterministic vertices, same order as
    /// `deterministic_boxes`.
    Local(ConicCertificate),
    /// Bell functional separating the box from the local polytope, with
    /// its maximum over deterministic boxes and its value on the input.
    Nonlocal { functional: Vec<f64>, local_bound: f64, value: f64, witness: Witness },
}

/// LP membership of the box in the convex hull of the deterministic
/// vertices (unit-sum coordinate appended to enforce convexity).
pub fn is_local(b: &Box, cap: usize, tol: f64) -> Result<LocalVerdict, CorrError> {
    b.validate_shape()?;
    let vertices = deterministic_boxes(b.n, b.m, cap)?;
    let mut target = b.flatten();
    target.push(1.0);
    let gens: Vec<Vec<f64>> = vertices
        .iter()
        .map(|v| {
            let mut g = v.flatten();
            g.push(1.0);
            g
        })
        .collect();
    match lp_member(&target, &gens, tol)? {
        LpOutcome::Member(c) => Ok(LocalVerdict::Local(c)),
        LpOutcome::Separated(w) => {
            // w is >= 0 on every (vertex, 1) and < 0 on (box, 1); the Bell
            // functional is the box part, its bound the max over vertices.
            let dim = target.len() - 1;
            let bell: Vec<f64> = w.functional[..dim].iter().map(|v| -v).collect();
            let local_bound = gens
                .iter()
                .map(|g| crate::feasibility::dot(&bell, &g[..dim]))
                .fold(f64::NEG_INFINITY, f64::max);
            let value = crate::feasibility::dot(&bell, &target[..dim]);
            Ok(LocalVerdict::Nonlocal { functional: bell, local_bound, value, witness: w })
        }
    }
}

/// Bisect the locality threshold of the mixture curve `mix(v)` (local for
/// small v, nonlocal for large v), to absolute tolerance `tol`.
pub fn locality_threshold<F: Fn(f64) -> Box>(
    mix: F,
    cap: usize,
    tol: f64,
) -> Result<f64, CorrError> {
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    if matches!(is_local(&mix(1.0), cap, 1e-9)?, LocalVerdict::Local(_)) {
        return Ok(1.0);
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        match is_local(&mix(mid), cap, 1e-9)? {
            LocalVerdict::Local(_) => lo = mid,
            LocalVerdict::Nonlocal { .. } => hi = mid,
        }
    }
    Ok(0.5 * (lo + hi))
}

/// The universal nonsignalling space: generators P(a,b|x,y) subject to
/// the unit resolutions and both marginal-consistency families.
#[derive(Debug, Clone)]
pub struct NsSpace {
    pub n: usize,
    pub m: usize,
    pub space: UniversalSpace,
}

impl NsSpace {
    /// Canonical generator index (1-based; 0 is the unit) of P(a,b|x,y).
    pub fn index(&self, x: usize, y: usize, a: usize, b: usize) -> usize {
        1 + ((x * self.n + y) * self.m + a) * self.m + b
    }

    pub fn generator(&self, x: usize, y: usize, a: usize, b: usize) -> Element {
        self.space.generator(self.index(x, y, a, b))
    }
}

pub fn build_ns_space(n: usize, m: usize) -> Result<NsSpace, CorrError> {
    assert!(n >= 2 && m >= 2);
    let num_gens = n * n * m * m;
    let idx = |x: usize, y: usize, a: usize, b: usize| ((x * n + y) * m + a) * m + b + 1;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    // r1: e - sum_{a,b} P(a,b|x,y) = 0 for every input pair.
    for x in 0..n {
        for y in 0..n {
            let mut row = vec![0.0; num_gens + 1];
            row[0] = 1.0;
            for a in 0..m {
                for b in 0..m {
                    row[idx(x, y, a, b)] = -1.0;
                }
            }
            rows.push(row);
        }
    }
    // r2: A-marginals agree across consecutive B inputs.
    for a in 0..m {
        for x in 0..n {
            for y in 0..n - 1 {
                let mut row = vec![0.0; num_gens + 1];
                for b in 0..m {
                    row[idx(x, y, a, b)] += 1.0;
                    row[idx(x, y + 1, a, b)] -= 1.0;
                }
                rows.push(row);
            }
        }
    }
    // r3: B-marginals agree across consecutive A inputs.
    for b in 0..m {
        for y in 0..n {
            for x in 0..n - 1 {
                let mut row = vec![0.0; num_gens + 1];
                for a in 0..m {
                    row[idx(x, y, a, b)] += 1.0;
                    row[idx(x + 1, y, a, b)] -= 1.0;
                }
                rows.push(row);
            }
        }
    }
    let rels = RelationSet::new(num_gens, rows).expect("ns relation rows are well-formed");
    let space = build_space(&rels, Tolerances::default().rank_tol)
        .expect("ns relations never collapse the unit");
    Ok(NsSpace { n, m, space })
}

/// A unital linear functional on the quotient, stored as real weights on
/// the quotient coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoxFunctional {
    pub weights: Vec<f64>,
}

impl BoxFunctional {
    pub fn eval(&self, x: &Element) -> f64 {
        x.coords.iter().zip(&self.weights).map(|(z, w)| z.re * w).sum()
    }

    /// phi_k applied entrywise to a level-k element.
    pub fn eval_mat(&self, x: &MatElem) -> CMat {
        let mut acc = CMat::zeros(x.level, x.level);
        for (c, &w) in x.coeffs.iter().zip(&self.weights) {
            acc += c * Complex64::new(w, 0.0);
        }
        acc
    }
}

/// The functional phi with phi(e) = 1 and phi(P(a,b|x,y)) = p(a,b|x,y).
/// Well-definedness on the quotient is checked explicitly and fails
/// exactly when the box signals beyond `tol`.
pub fn box_functional(s: &NsSpace, b: &Box, tol: f64) -> Result<BoxFunctional, CorrError> {
    b.validate_shape()?;
    if (b.n, b.m) != (s.n, s.m) {
        return Err(CorrError::BadShape { n: s.n, m: s.m });
    }
    // Raw values on the canonical generators.
    let num = s.n * s.n * s.m * s.m;
    let mut raw = vec![0.0f64; num + 1];
    raw[0] = 1.0;
    for x in 0..s.n {
        for y in 0..s.n {
            for a in 0..s.m {
                for bb in 0..s.m {
                    raw[s.index(x, y, a, bb)] = b.p[x][y][a][bb];
                }
            }
        }
    }
    // Weights live on the quotient basis columns; well-definedness means
    // the weights reproduce raw on *every* canonical generator.
    let weights: Vec<f64> =
        s.space.basis_selector.iter().map(|&i| raw[i]).collect();
    let f = BoxFunctional { weights };
    let mut residual = 0.0f64;
    for (i, &r) in raw.iter().enumerate() {
        let through = f.eval(&s.space.generator(i));
        residual = residual.max((through - r).abs());
    }
    if residual > tol {
        return Err(CorrError::NotNonsignalling(residual));
    }
    Ok(f)
}

/// Theorem item (4) test: phi >= 0 on every generator of the base cone.
/// Returns false when the functional is ill-defined (signalling box).
pub fn dns_test(s: &NsSpace, b: &Box, tol: f64) -> bool {
    let Ok(f) = box_functional(s, b, tol) else {
        return false;
    };
    let Ok(cone) = base_cone(&s.space) else {
        return false;
    };
    cone.elements.iter().all(|g| f.eval(g) >= -tol)
}

#[derive(Debug, Clone)]
pub enum HierarchyOutcome {
    Pass,
    /// Violation in the noise band (-10 eps, -eps]; reported, not failed.
    Marginal { level: usize, value: f64 },
    Fail { level: usize, value: f64, element: Element },
    Unknown,
}

#[derive(Debug, Clone, Copy)]
pub struct HierarchyConfig {
    /// Iterate levels beyond this depth reuse the previous certified set
    /// (still sound: the sets are nested by construction).
    pub enrich_depth: usize,
    pub candidates_per_level: usize,
    pub seed: u64,
    pub oracle: OracleConfig,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        HierarchyConfig {
            enrich_depth: 2,
            candidates_per_level: 6,
            seed: 0,
            oracle: OracleConfig { t_steps: 10, bisect_steps: 0, ..Default::default() },
        }
    }
}

/// Certified generator sets of the iterates `E^0..E^T` at matrix size k:
/// level 0 starts from the base generators, later levels add candidates
/// whose membership the level oracle certifies. Sets are nondecreasing in
/// the level, mirroring the nesting of the iterates.
pub struct CertifiedHierarchy {
    pub k: usize,
    pub levels: Vec<Vec<MatElem>>,
    pub oracles: Vec<Arc<dyn ConeOracle>>,
}

pub fn certified_hierarchy(
    s: &NsSpace,
    k: usize,
    t_levels: usize,
    cfg: &HierarchyConfig,
) -> Result<CertifiedHierarchy, CorrError> {
    use rand::SeedableRng;
    let cone = base_cone(&s.space)?;
    let c0: Arc<dyn ConeOracle> = Arc::new(MaxOracle::new(cone.clone(), cfg.oracle));
    let order: Vec<usize> = (1..=s.space.num_generators).collect();
    let oracles = cones::iterate_proj(&s.space, &cone, c0, &order, t_levels, cfg.oracle)?;

    let base_set: Vec<MatElem> = if k == 1 {
        cone.generators.clone()
    } else {
        cone.elements.iter().map(|e| MatElem::unit_like(e, k)).collect()
    };
    let mut levels: Vec<Vec<MatElem>> = vec![base_set];
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
    let dim = s.space.dim;
    for j in 1..=t_levels {
        let mut set = levels[j - 1].clone();
        if j <= cfg.enrich_depth {
            for _ in 0..cfg.candidates_per_level {
                // Random hermitian candidate near the cone: a conic-ish
                // combination of base generators plus a perturbation.
                let mut cand = MatElem::zero(dim, k);
                for g in &levels[0] {
                    cand = cand.add(&g.scale(rng.gen_range(0.0..1.0)));
                }
                let mut pert = Element::zero(dim);
                for c in pert.coords.iter_mut() {
                    *c = Complex64::new(rng.gen_range(-0.2..0.2), 0.0);
                }
                cand = cand.add(&MatElem::unit_like(&pert, k));
                if oracles[j].decide(&cand, cfg.oracle.tols.accept_tol).is_accept() {
                    set.push(cand);
                }
            }
        }
        levels.push(set);
    }
    Ok(CertifiedHierarchy { k, levels, oracles })
}

/// Hierarchy necessary-condition test: phi >= -eps on the compressions of
/// every certified element of each level. Pass never certifies membership
/// in the corresponding correlation set; Fail is sound.
pub fn hierarchy_test(
    s: &NsSpace,
    b: &Box,
    k: usize,
    t_levels: usize,
    eps: f64,
    cfg: &HierarchyConfig,
) -> Result<HierarchyOutcome, CorrError> {
    let f = match box_functional(s, b, 10.0 * eps) {
        Ok(f) => f,
        Err(CorrError::NotNonsignalling(r)) => return Err(CorrError::NotNonsignalling(r)),
        Err(e) => return Err(e),
    };
    let h = certified_hierarchy(s, k, t_levels, cfg)?;
    let mut marginal: Option<(usize, f64)> = None;
    for (level, set) in h.levels.iter().enumerate() {
        for x in set {
            // Level-1 members from the certified level-k element: the
            // diagonal compressions by the standard basis of C^k.
            for c in 0..k {
                let mut alpha = CMat::zeros(k, 1);
                alpha[(c, 0)] = Complex64::new(1.0, 0.0);
                let y = if k == 1 { x.clone() } else { x.compress(&alpha) };
                let value = f.eval(&y.as_element());
                let norm = y.max_abs().max(1.0);
                let v = value / norm;
                if v < -10.0 * eps {
                    return Ok(HierarchyOutcome::Fail {
                        level,
                        value,
                        element: y.as_element(),
                    });
                }
                if v < -eps && marginal.is_none() {
                    marginal = Some((level, value));
                }
            }
        }
    }
    if let Some((level, value)) = marginal {
        return Ok(HierarchyOutcome::Marginal { level, value });
    }
    Ok(HierarchyOutcome::Pass)
}

/// Aggregate classification report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassReport {
    pub correlation: bool,
    pub correlation_residual: f64,
    pub nonsignalling: bool,
    pub ns_residual: f64,
    pub local: Option<bool>,
    pub chsh: Option<f64>,
    pub bell_bound: Option<f64>,
    pub bell_value: Option<f64>,
    pub dns: Option<bool>,
    pub hierarchy: Option<String>,
    pub hierarchy_level: Option<usize>,
    pub elapsed_ms: u128,
}

#[derive(Debug, Clone, Copy)]
pub struct ClassifyConfig {
    pub tol: f64,
    pub vertex_cap: usize,
    pub k: usize,
    pub t_levels: usize,
    pub eps: f64,
    pub hierarchy: HierarchyConfig,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            tol: 1e-9,
            vertex_cap: DEFAULT_VERTEX_CAP,
            k: 1,
            t_levels: 4,
            eps: 1e-7,
            hierarchy: HierarchyConfig::default(),
        }
    }
}

pub fn classify(b: &Box, cfg: &ClassifyConfig) -> Result<ClassReport, CorrError> {
    b.validate_shape()?;
    let start = Instant::now();
    let (correlation, correlation_residual) = b.is_correlation(cfg.tol.max(1e-9));
    let (nonsignalling, ns_residual) = b.is_nonsignalling(cfg.tol.max(1e-9));
    let mut report = ClassReport {
        correlation,
        correlation_residual,
        nonsignalling,
        ns_residual,
        local: None,
        chsh: if (b.n, b.m) == (2, 2) { Some(b.chsh_value()) } else { None },
        bell_bound: None,
        bell_value: None,
        dns: None,
        hierarchy: None,
        hierarchy_level: None,
        elapsed_ms: 0,
    };
    if correlation {
        match is_local(b, cfg.vertex_cap, cfg.tol.max(1e-9)) {
            Ok(LocalVerdict::Local(_)) => report.local = Some(true),
            Ok(LocalVerdict::Nonlocal { local_bound, value, .. }) => {
                report.local = Some(false);
                report.bell_bound = Some(local_bound);
                report.bell_value = Some(value);
            }
            Err(CorrError::SizeLimit(..)) => {}
            Err(e) => return Err(e),
        }
        let s = build_ns_space(b.n, b.m)?;
        report.dns = Some(dns_test(&s, b, cfg.tol.max(1e-7)));
        if nonsignalling {
            match hierarchy_test(&s, b, cfg.k, cfg.t_levels, cfg.eps, &cfg.hierarchy)? {
                HierarchyOutcome::Pass => report.hierarchy = Some("pass".into()),
                HierarchyOutcome::Marginal { level, .. } => {
                    report.hierarchy = Some("marginal".into());
                    report.hierarchy_level = Some(level);
                }
                HierarchyOutcome::Fail { level, .. } => {
                    report.hierarchy = Some("fail".into());
                    report.hierarchy_level = Some(level);
                }
                HierarchyOutcome::Unknown => report.hierarchy = Some("unknown".into()),
            }
        }
    }
    report.elapsed_ms = start.elapsed().as_millis();
    Ok(report)
}

/// Random convex mixture of deterministic boxes (always local and
/// nonsignalling); Dirichlet(1) weights.
pub fn random_local_box<R: Rng>(n: usize, m: usize, rng: &mut R) -> Box {
    let vertices = deterministic_boxes(n, m, DEFAULT_VERTEX_CAP).unwrap();
    let mut weights: Vec<f64> = vertices.iter().map(|_| -rng.gen::<f64>().max(1e-12).ln()).collect();
    let total: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= total;
    }
    let mut p = vec![vec![vec![vec![0.0; m]; m]; n]; n];
    for (v, w) in vertices.iter().zip(&weights) {
        for x in 0..n {
            for y in 0..n {
                for a in 0..m {
                    for b in 0..m {
                        p[x][y][a][b] += w * v.p[x][y][a][b];
                    }
                }
            }
        }
    }
    Box { n, m, p }
}

/// Random nonsignalling box: for (2,2), a mixture of deterministic boxes
/// and the eight PR-type extreme points; otherwise a deterministic
/// mixture (interior sampling of the local part of the NS polytope).
pub fn random_ns_box<R: Rng>(n: usize, m: usize, rng: &mut R) -> Box {
    let local = random_local_box(n, m, rng);
    if (n, m) != (2, 2) {
        return local;
    }
    // PR variants: a xor b = xy xor alpha x xor beta y xor gamma.
    let mut pr_variants = Vec::new();
    for alpha in 0..2usize {
        for beta in 0..2usize {
            for gamma in 0..2usize {
                let mut b = Box { n: 2, m: 2, p: vec![vec![vec![vec![0.0; 2]; 2]; 2]; 2] };
                for x in 0..2 {
                    for y in 0..2 {
                        for a in 0..2 {
                            for bb in 0..2 {
                                let rhs = (x & y) ^ (alpha & x) ^ (beta & y) ^ gamma;
                                if (a ^ bb) == rhs {
                                    b.p[x][y][a][bb] = 0.5;
                                }
                            }
                        }
                    }
                }
                pr_variants.push(b);
            }
        }
    }
    let pr = &pr_variants[rng.gen_range(0..pr_variants.len())];
    let w = rng.gen_range(0.0..1.0);
    local.mix(pr, 1.0 - w)
}

/// Perturb entries and renormalize per input pair; generically signalling.
pub fn perturbed_box<R: Rng>(b: &Box, magnitude: f64, rng: &mut R) -> Box {
    let mut out = b.clone();
    for x in 0..b.n {
        for y in 0..b.n {
            let mut sum = 0.0;
            for a in 0..b.m {
                for bb in 0..b.m {
                    let v = (b.p[x][y][a][bb] + rng.gen_range(-magnitude..magnitude)).max(0.0);
                    out.p[x][y][a][bb] = v;
                    sum += v;
                }
            }
            if sum > 0.0 {
                for a in 0..b.m {
                    for bb in 0..b.m {
                        out.p[x][y][a][bb] /= sum;
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    #[test]
    fn uniform_and_pr_are_nonsignalling() {
        let u = Box::uniform(2, 2);
        assert!(u.is_correlation(1e-12).0);
        assert!(u.is_nonsignalling(1e-12).0);
        let pr = Box::pr();
        assert!(pr.is_correlation(1e-12).0);
        assert!(pr.is_nonsignalling(1e-12).0);
    }

    #[test]
    fn signalling_box_detected() {
        // p(a,b|x,y) = [a = x] [b = 1]: A-marginal depends on x only, which
        // is fine for A but x-dependence shows in B's view? No: this box
        // signals from A's input to nothing; its A-marginal given (x, y)
        // is [a = x], independent of y, so the signalling is B-ward:
        // p_B(b|y) = [b = 1] independent of x. Construct a genuinely
        // signalling box instead: B's output copies A's input.
        let mut b = Box { n: 2, m: 2, p: vec![vec![vec![vec![0.0; 2]; 2]; 2]; 2] };
        for x in 0..2 {
            for y in 0..2 {
                b.p[x][y][0][x] = 1.0;
            }
        }
        assert!(b.is_correlation(1e-12).0);
        let (ns, residual) = b.is_nonsignalling(1e-9);
        assert!(!ns);
        assert!(residual > 0.9);
    }

    #[test]
    fn deterministic_box_count_and_locality() {
        let boxes = deterministic_boxes(2, 2, DEFAULT_VERTEX_CAP).unwrap();
        assert_eq!(boxes.len(), 16);
        for b in &boxes {
            assert!(matches!(
                is_local(b, DEFAULT_VERTEX_CAP, 1e-9).unwrap(),
                LocalVerdict::Local(_)
            ));
        }
        assert!(matches!(
            deterministic_boxes(4, 10, 1000),
            Err(CorrError::SizeLimit(..))
        ));
    }

    #[test]
    fn uniform_box_barycenter_certificate() {
        // The all-1/16 weight vector is a valid certificate for the
        // uniform box over the 16 deterministic vertices.
        let u = Box::uniform(2, 2);
        let vertices = deterministic_boxes(2, 2, DEFAULT_VERTEX_CAP).unwrap();
        let mut target = u.flatten();
        target.push(1.0);
        let gens: Vec<Vec<f64>> = vertices
            .iter()
            .map(|v| {
                let mut g = v.flatten();
                g.push(1.0);
                g
            })
            .collect();
        let coeffs = vec![1.0 / 16.0; 16];
        assert!(crate::feasibility::reconstruction_residual(&target, &gens, &coeffs) < 1e-12);
        // And the LP itself accepts.
        assert!(matches!(
            is_local(&u, DEFAULT_VERTEX_CAP, 1e-9).unwrap(),
            LocalVerdict::Local(_)
        ));
    }

    #[test]
    fn pr_box_chsh_witness() {
        let pr = Box::pr();
        assert_relative_eq!(pr.chsh_value(), 4.0, epsilon = 1e-12);
        match is_local(&pr, DEFAULT_VERTEX_CAP, 1e-9).unwrap() {
            LocalVerdict::Nonlocal { local_bound, value, .. } => {
                assert!(value > local_bound + 1e-6);
            }
            LocalVerdict::Local(_) => panic!("PR box must be nonlocal"),
        }
    }

    #[test]
    fn tsirelson_chsh_value() {
        let t = Box::tsirelson();
        assert!(t.is_nonsignalling(1e-12).0);
        assert_relative_eq!(t.chsh_value(), 2.0 * std::f64::consts::SQRT_2, epsilon = 1e-12);
        assert!(matches!(
            is_local(&t, DEFAULT_VERTEX_CAP, 1e-9).unwrap(),
            LocalVerdict::Nonlocal { .. }
        ));
    }

    #[test]
    fn ns_space_dimensions() {
        assert_eq!(build_ns_space(2, 2).unwrap().space.dim, 9);
        assert_eq!(build_ns_space(3, 2).unwrap().space.dim, 16);
        assert_eq!(build_ns_space(2, 3).unwrap().space.dim, 25);
    }

    #[test]
    fn functional_values() {
        let s = build_ns_space(2, 2).unwrap();
        let u = Box::uniform(2, 2);
        let f = box_functional(&s, &u, 1e-9).unwrap();
        assert_relative_eq!(f.eval(&s.space.unit()), 1.0, epsilon = 1e-12);
        assert_relative_eq!(f.eval(&s.generator(0, 1, 1, 0)), 0.25, epsilon = 1e-12);

        let d = Box::deterministic(2, 2, &[0, 1], &[1, 1]);
        let f = box_functional(&s, &d, 1e-9).unwrap();
        for x in 0..2 {
            for y in 0..2 {
                for a in 0..2 {
                    for b in 0..2 {
                        let v = f.eval(&s.generator(x, y, a, b));
                        assert!((v - d.p[x][y][a][b]).abs() < 1e-12);
                    }
                }
            }
        }

        let t = Box::tsirelson();
        let f = box_functional(&s, &t, 1e-9).unwrap();
        assert_relative_eq!(
            f.eval(&s.generator(0, 0, 0, 0)),
            t.p[0][0][0][0],
            epsilon = 1e-12
        );
    }

    #[test]
    fn functional_rejects_signalling() {
        let s = build_ns_space(2, 2).unwrap();
        let mut b = Box { n: 2, m: 2, p: vec![vec![vec![vec![0.0; 2]; 2]; 2]; 2] };
        for x in 0..2 {
            for y in 0..2 {
                b.p[x][y][0][x] = 1.0;
            }
        }
        assert!(matches!(
            box_functional(&s, &b, 1e-9),
            Err(CorrError::NotNonsignalling(_))
        ));
    }

    #[test]
    fn dns_matches_nonsignalling() {
        let s = build_ns_space(2, 2).unwrap();
        assert!(dns_test(&s, &Box::uniform(2, 2), 1e-9));
        assert!(dns_test(&s, &Box::pr(), 1e-9));
        let mut bad = Box::uniform(2, 2);
        bad.p[0][0][0][0] = -0.1;
        bad.p[0][0][1][1] = 0.6;
        assert!(!dns_test(&s, &bad, 1e-9));
        // Seeded random equivalence, NS and signalling mixed.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for i in 0..30 {
            let b = if i % 3 == 0 {
                perturbed_box(&random_ns_box(2, 2, &mut rng), 0.05, &mut rng)
            } else {
                random_ns_box(2, 2, &mut rng)
            };
            let tol = 1e-7;
            assert_eq!(dns_test(&s, &b, tol), b.is_nonsignalling(tol).0, "box {i}");
        }
    }

    #[test]
    fn hierarchy_soundness_small() {
        let s = build_ns_space(2, 2).unwrap();
        let cfg = HierarchyConfig::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let b = random_local_box(2, 2, &mut rng);
            let out = hierarchy_test(&s, &b, 1, 3, 1e-7, &cfg).unwrap();
            assert!(matches!(out, HierarchyOutcome::Pass), "local box must pass: {out:?}");
        }
        // Deterministic box passes at larger T.
        let d = Box::deterministic(2, 2, &[0, 0], &[1, 0]);
        assert!(matches!(
            hierarchy_test(&s, &d, 1, 8, 1e-7, &cfg).unwrap(),
            HierarchyOutcome::Pass
        ));
        // A nonsignalling pseudo box with a negative entry fails dns and
        // therefore fails the hierarchy at level 0.
        let mut neg = Box::uniform(2, 2);
        for x in 0..2 {
            for y in 0..2 {
                neg.p[x][y][0][0] = -0.1;
                neg.p[x][y][0][1] = 0.35;
                neg.p[x][y][1][0] = 0.35;
                neg.p[x][y][1][1] = 0.4;
            }
        }
        assert!(neg.is_nonsignalling(1e-9).0);
        match hierarchy_test(&s, &neg, 1, 2, 1e-7, &cfg).unwrap() {
            HierarchyOutcome::Fail { level, .. } => assert_eq!(level, 0),
            other => panic!("expected level-0 fail, got {other:?}"),
        }
    }

    #[test]
    fn classify_reports() {
        let cfg = ClassifyConfig { t_levels: 2, ..Default::default() };
        let r = classify(&Box::pr(), &cfg).unwrap();
        assert!(r.correlation && r.nonsignalling);
        assert_eq!(r.local, Some(false));
        assert_eq!(r.dns, Some(true));

        let r = classify(&Box::uniform(2, 2), &cfg).unwrap();
        assert!(r.correlation && r.nonsignalling);
        assert_eq!(r.local, Some(true));
        assert_eq!(r.dns, Some(true));
        assert_eq!(r.hierarchy.as_deref(), Some("pass"));

        let mut b = Box { n: 2, m: 2, p: vec![vec![vec![vec![0.0; 2]; 2]; 2]; 2] };
        for x in 0..2 {
            for y in 0..2 {
                b.p[x][y][0][x] = 1.0;
            }
        }
        let r = classify(&b, &cfg).unwrap();
        assert!(!r.nonsignalling);
        assert_eq!(r.dns, Some(false));
    }

    #[test]
    fn isotropic_threshold_is_half() {
        let v = locality_threshold(Box::isotropic, DEFAULT_VERTEX_CAP, 1e-7).unwrap();
        assert!((v - 0.5).abs() < 1e-6, "threshold {v}");
    }

    #[test]
    fn box_json_round_trip() {
        let pr = Box::pr();
        let s = serde_json::to_string(&pr).unwrap();
        let back: Box = serde_json::from_str(&s).unwrap();
        assert_eq!(back.n, 2);
        assert_eq!(back.p, pr.p);
    }
}
