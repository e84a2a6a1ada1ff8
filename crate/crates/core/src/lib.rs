//! Universal operator systems spanned by projections satisfying linear
//! relations, with certificate-based cone membership oracles.
//!
//! The crate is organized around five subsystems:
//!
//! - [`relspace`]: the universal *-vector space obtained by quotienting
//!   `C^{N+1}` by a set of real linear relations among a unit `e` and
//!   generators `p_1..p_N`, together with the universal linear map onto any
//!   concrete family satisfying the same relations.
//! - [`feasibility`]: the numeric engine — LP membership in finitely
//!   generated cones (simplex with Farkas dual witnesses), PSD block
//!   decompositions by alternating projections, and dense hermitian
//!   eigenvalues. Everything it returns is a re-verifiable certificate.
//! - [`cones`]: base cones, Archimedean membership, the max matrix
//!   ordering, the projectivization operator `C(p)` and its iterates, the
//!   k-minimal membership test, and properness probing.
//! - [`correlations`]: nonsignalling correlation boxes, the local-polytope
//!   LP, the universal nonsignalling space, and the dual cone hierarchy
//!   tests cross-validated against the exact oracles.
//! - [`sicpovm`]: SIC-POVM and MUB presentations, explicit ground-truth
//!   SICs for d = 2, 3, the commuting block witness, and the Gram
//!   complete-positivity necessary condition.

pub mod cones;
pub mod correlations;
pub mod feasibility;
pub mod linalg;
pub mod relspace;
pub mod sicpovm;

pub use cones::{ConeOracle, GeneratedCone, MatElem, Verdict};
pub use correlations::{Box, ClassReport, NsSpace};
pub use feasibility::{ConicCertificate, Witness};
pub use relspace::{Element, RelationSet, UniversalSpace};
