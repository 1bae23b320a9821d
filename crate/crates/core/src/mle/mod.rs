//! Approximate selective maximum-likelihood inference after one query.

pub mod barrier;
pub mod bound;
pub mod estimate;
pub mod exact;
pub mod implied;
pub mod joint;
pub mod solve;

pub use barrier::{BarrierKind, BarrierSpec};
pub use estimate::{
    approx_loglik, fisher_info, infer, inner_optimum, selective_mle, FisherInfo, MleDiagnostics, MleResult,
};
pub use implied::{implied_from_parts, implied_params, Canonical, ImpliedParams};
pub use solve::{minimize_barrier_quadratic, solve_barrier, BarrierSolution};
pub use joint::{joint_approx_loglik, joint_inner, JointSolution, QueryTerm};
