//! Inner convex approximation for nonconvex semidefinite programs with
//! bilinear matrix inequality constraints.
//!
//! The crate is organised bottom-up:
//!
//! - [`linalg`]: dense matrices, symmetric eigenvalues (cyclic Jacobi),
//!   general eigenvalues (Hessenberg + Francis QR), Lyapunov solves and the
//!   `svec`/`smat` isometry.
//! - [`lmi`]: decision variables, affine matrix expressions and block LMI
//!   problems.
//! - [`sdp`]: a dense primal-dual interior-point solver (HKM direction,
//!   Mehrotra predictor-corrector) for block LMI problems.
//! - [`overestimate`]: psd-convex overestimators of bilinear matrix forms and
//!   their Schur-complement lifting.
//! - [`icp`]: the outer inner-convex-approximation loop with stopping rules,
//!   KKT residuals and runtime invariant checks.
//! - [`sof`]: static output feedback problems (spectral abscissa, H-infinity,
//!   mixed H2/H-infinity) with Phase-1 starting points.
//! - [`analysis`]: independent closed-loop oracles (spectral abscissa,
//!   H-infinity norm by Hamiltonian bisection, H2 norm by Lyapunov).
//! - [`bench`]: plant files, the random plant generator, batch tables and the
//!   command-line front end used by the `bmi` binary.

pub mod analysis;
pub mod bench;
pub mod error;
pub mod icp;
pub mod linalg;
pub mod lmi;
pub mod overestimate;
pub mod sdp;
pub mod sof;

pub use error::{Error, Result};
