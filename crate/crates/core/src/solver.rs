//! Single entry point over the three solvers.

use crate::error::Result;
use crate::newton::{newton_solve, ReferenceMetrics};
use crate::record::ConvergenceRecord;
use crate::sinkhorn::sinkhorn_solve;
use crate::transport::{GibbsKernel, Histogram, SolveConfig, SolverKind, TransportPlan};

#[derive(Clone, Debug)]
pub struct Solution {
    pub plan: TransportPlan,
    pub record: ConvergenceRecord,
}

impl Solution {
    pub fn converged(&self) -> bool {
        self.record.converged
    }
}

/// Runs the solver selected by `config.solver_kind`.
pub fn solve(
    kernel: &GibbsKernel,
    a: &Histogram,
    b: &Histogram,
    config: &SolveConfig,
    metrics: Option<ReferenceMetrics<'_>>,
) -> Result<Solution> {
    match config.solver_kind {
        SolverKind::Sinkhorn => {
            let out = sinkhorn_solve(kernel, a, b, config, None, metrics)?;
            Ok(Solution {
                plan: out.plan,
                record: out.record,
            })
        }
        SolverKind::NewtonPrimal | SolverKind::NewtonDual => {
            let out = newton_solve(kernel, a, b, config, metrics)?;
            Ok(Solution {
                plan: out.plan,
                record: out.record,
            })
        }
    }
}
