//! Entropic optimal transport: Sinkhorn scaling and a Newton method on the
//! dual potentials with a preconditioned CG inner solver.
//!
//! ```
//! use sinkhorn_newton::{gibbs_kernel, newton_solve, CostMatrix, Histogram, SolveConfig, SolverKind};
//! use ndarray::array;
//!
//! let a = Histogram::new(array![0.5, 0.5]).unwrap();
//! let cost = CostMatrix::new(array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
//! let kernel = gibbs_kernel(&cost, 1.0).unwrap();
//! let config = SolveConfig::new(1.0, SolverKind::NewtonPrimal);
//! let out = newton_solve(&kernel, &a, &a, &config, None).unwrap();
//! assert!(out.record.converged);
//! assert!((out.plan.entries()[[0, 0]] - 0.5 / (1.0 + (-1.0f64).exp())).abs() < 1e-10);
//! ```

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod error;
pub mod linsolve;
pub mod newton;
pub mod problems;
pub mod record;
pub mod sinkhorn;
pub mod solver;
pub mod transport;

pub use analysis::{
    convergence_order, convergence_order_of, omega_bound, remark_identity_check, shifted_saddle_matrix,
    varah_certificate, OmegaCertificate,
};
pub use error::{Error, Result};
pub use linsolve::{
    jacobi_preconditioner, pcg_solve, pcg_solve_with, project_kernel_complement, CgReport, DualVector, LinearOperator,
    PcgOptions,
};
pub use newton::{
    jacobian_apply, newton_rhs, newton_solve, newton_step_dual, newton_step_primal, Iterate, JacobianOperator,
    NewtonOutcome, NewtonState, ReferenceMetrics, StepInfo,
};
pub use problems::{
    blob_pair, bump_pair_1d, gaussian_pair_2d, image_histogram, load_histogram_csv, load_image_pgm, median_cost_scale,
    squared_euclidean_cost, GridSpec,
};
pub use record::{ConvergenceRecord, IterationRecord, CSV_HEADER};
pub use sinkhorn::{parallel_update_step, sinkhorn_solve, sinkhorn_step, ScalingVectors, SinkhornOutcome};
pub use solver::{solve, Solution};
pub use transport::{
    entropic_objective, gibbs_kernel, marginals, plan_from_duals, residual, transport_cost, CostMatrix, DualPotentials,
    GibbsKernel, Histogram, Residual, SolveConfig, SolverKind, TransportPlan,
};
