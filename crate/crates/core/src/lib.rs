//! Randomized SVD and range-preserving regularized solvers for discrete
//! linear inverse problems.

pub mod diagnostics;
pub mod dual;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod problems;
pub mod rsvd;
pub mod smoothing;
pub mod solvers;

pub use diagnostics::{AlphaGrid, BoundCheck, BoundId, ErrorReport};
pub use error::{Error, Result};
pub use linalg::{DenseMatrix, SvdTriple};
pub use problems::{InverseProblem, NoiseSpec, ProblemName};
pub use rsvd::{LinearOperator, RankKApprox, RsvdConfig};
pub use smoothing::{PenaltyKind, SmoothingOperator, WeightedPinv};
pub use solvers::{Method, ResolventForm, SolverResult};
