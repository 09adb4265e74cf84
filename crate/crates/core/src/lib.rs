//! Certified upper bounds on the quantum violation of two-party, two-outcome
//! Bell inequalities.
//!
//! The pipeline: a Bell functional in correlator form ([`bell`]) is relaxed to
//! a level-`k` NPA moment-matrix SDP ([`npa`]), the SDP is dualized so that
//! *every* dual-feasible point certifies an upper bound ([`sdp`]), and a
//! feasible point is found by travelling far along the dual objective and
//! projecting back onto the feasible spectrahedron with L-BFGS-accelerated
//! alternating projections ([`solver`], [`projection`]). An optional geometric
//! refinement loop walks the certified bound down toward the dual optimum.
//!
//! Bounds reported by [`solver::SolveReport`] are rigorous even when the inner
//! iteration has not fully converged: the slack matrix is shifted onto the PSD
//! cone through the diagonal constraints, at a known objective cost.
//!
//! With the default `parallel` feature the dense kernels and brute-force
//! enumerations fan out over rayon; disabling it gives a bit-identical
//! sequential build.

pub mod bell;
pub mod error;
pub mod npa;
pub mod projection;
pub mod sdp;
pub mod solver;

mod gram;
mod par;

pub use error::{Error, Result};
