//! Numerical toolkit for detecting and quantifying bipartite quantum
//! entanglement through pure bosonic extension.
//!
//! The central object is a lower bound on the relative entropy of
//! entanglement (REE): for a target state `rho_AB`, we minimize
//! `S(rho || sigma(p))` where `sigma(p)` is the two-body marginal of a pure
//! state on `A (x) Sym_n(B)`, parameterized by complex coefficients over the
//! Dicke basis. Because the k-bosonic extendible sets contain the separable
//! set and shrink towards it as k grows, the minimum is a certified lower
//! bound on the true REE and a practical entanglement witness, including for
//! PPT bound entangled states where the partial-transpose criterion is blind.
//!
//! Modules:
//! - [`qstate`]: complex Hermitian linear algebra, spectral functions,
//!   partial transpose/trace, the Gell-Mann basis, random states.
//! - [`dicke`]: symmetric-subspace enumeration and the closed-form
//!   partial-trace tensor that makes marginals cheap.
//! - [`opt`]: the REE objective, its analytic gradient, and an L-BFGS
//!   driver with restarts.
//! - [`models`]: Werner, isotropic, UPB bound entangled states, and
//!   separable reference families with known behavior.
//! - [`geometry`]: ray-based boundary computations (beta_DM, beta_PPT,
//!   beta_CHA, beta_PureB), plane scans, random-direction surveys.
//! - [`circuit`]: the symmetric variational circuit realization of the
//!   same ansatz in the compressed space (qubit case).

pub mod circuit;
pub mod dicke;
pub mod geometry;
pub mod models;
pub mod opt;
pub mod qstate;

pub use qstate::{ComplexMatrix, DensityMatrix, GellMannBasis, QstateError, StateVector};
