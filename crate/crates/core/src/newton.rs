//! Sinkhorn-Newton: Newton's method on the marginal defect in the log-domain
//! dual variables `(f, g)`.
//!
//! With `P = diag(exp(-f/eps)) K diag(exp(-g/eps))`, the residual is
//! `F(f, g) = (a - P 1, b - P^T 1)` and its Jacobian is
//!
//! ```text
//! J = (1/eps) [ diag(P 1)   P          ]
//!             [ P^T         diag(P^T 1) ]
//! ```
//!
//! Each step solves `J (df, dg) = (P 1 - a, P^T 1 - b)` with preconditioned CG
//! and then either rescales the plan directly (primal form) or updates the
//! potentials (dual form, never materializing `P`).

use std::time::{Duration, Instant};

use ndarray::{Array1, Array2, ArrayView2, Zip};

use crate::error::{Error, Result};
use crate::linsolve::{
    jacobi_preconditioner_from_marginals, pcg_solve_with, CgReport, DualVector, LinearOperator, PcgOptions,
};
use crate::record::{ConvergenceRecord, IterationRecord};
use crate::transport::{
    marginals_of, plan_from_duals, scale_rows_cols, CostMatrix, DualPotentials, GibbsKernel, Histogram, Residual,
    SolveConfig, SolverKind, TransportPlan,
};

/// The Newton matrix at the current iterate, applied matrix-free.
#[derive(Clone, Debug)]
pub enum JacobianOperator<'a> {
    Primal {
        plan: ArrayView2<'a, f64>,
        rows: Array1<f64>,
        cols: Array1<f64>,
        epsilon: f64,
    },
    /// `P` is represented by `K` and the scalings `u = exp(-f/eps)`,
    /// `v = exp(-g/eps)`.
    Dual {
        kernel: ArrayView2<'a, f64>,
        u: Array1<f64>,
        v: Array1<f64>,
        rows: Array1<f64>,
        cols: Array1<f64>,
        epsilon: f64,
    },
}

impl<'a> JacobianOperator<'a> {
    pub fn primal(plan: &'a TransportPlan, epsilon: f64) -> Self {
        let (rows, cols) = marginals_of(plan.view());
        JacobianOperator::Primal {
            plan: plan.view(),
            rows,
            cols,
            epsilon,
        }
    }

    pub fn dual(kernel: &'a GibbsKernel, duals: &DualPotentials) -> Result<Self> {
        let (n, m) = kernel.shape();
        if duals.f.len() != n || duals.g.len() != m {
            return Err(Error::shape(
                "JacobianOperator::dual",
                format!("({n}, {m})"),
                format!("({}, {})", duals.f.len(), duals.g.len()),
            ));
        }
        let epsilon = kernel.epsilon();
        let (u, v) = duals.scalings(epsilon);
        let (rows, cols) = dual_marginals(kernel.entries().view(), &u, &v);
        Ok(JacobianOperator::Dual {
            kernel: kernel.entries().view(),
            u,
            v,
            rows,
            cols,
            epsilon,
        })
    }

    /// Row and column sums of the plan this operator represents.
    pub fn marginals(&self) -> (&Array1<f64>, &Array1<f64>) {
        match self {
            JacobianOperator::Primal { rows, cols, .. } | JacobianOperator::Dual { rows, cols, .. } => (rows, cols),
        }
    }

    pub fn epsilon(&self) -> f64 {
        match self {
            JacobianOperator::Primal { epsilon, .. } | JacobianOperator::Dual { epsilon, .. } => *epsilon,
        }
    }
}

fn dual_marginals(kernel: ArrayView2<'_, f64>, u: &Array1<f64>, v: &Array1<f64>) -> (Array1<f64>, Array1<f64>) {
    (u * &kernel.dot(v), v * &kernel.t().dot(u))
}

impl LinearOperator for JacobianOperator<'_> {
    fn dims(&self) -> (usize, usize) {
        let (rows, cols) = self.marginals();
        (rows.len(), cols.len())
    }

    fn apply(&self, x: &DualVector) -> DualVector {
        let (rows, cols) = self.marginals();
        let inv_eps = 1.0 / self.epsilon();
        let (p_dg, pt_df) = match self {
            JacobianOperator::Primal { plan, .. } => (plan.dot(&x.g), plan.t().dot(&x.f)),
            JacobianOperator::Dual { kernel, u, v, .. } => {
                (u * &kernel.dot(&(v * &x.g)), v * &kernel.t().dot(&(u * &x.f)))
            }
        };
        let mut f = p_dg;
        Zip::from(&mut f)
            .and(rows)
            .and(&x.f)
            .for_each(|out, &r, &df| *out = (r * df + *out) * inv_eps);
        let mut g = pt_df;
        Zip::from(&mut g)
            .and(cols)
            .and(&x.g)
            .for_each(|out, &c, &dg| *out = (c * dg + *out) * inv_eps);
        DualVector::new(f, g)
    }
}

/// `(J x)` for the plan `P` at fixed `eps`. Convenience over
/// [`JacobianOperator::primal`].
pub fn jacobian_apply(
    op: &JacobianOperator<'_>,
    df: &Array1<f64>,
    dg: &Array1<f64>,
) -> Result<(Array1<f64>, Array1<f64>)> {
    let (n, m) = op.dims();
    if df.len() != n || dg.len() != m {
        return Err(Error::shape(
            "jacobian_apply",
            format!("({n}, {m})"),
            format!("({}, {})", df.len(), dg.len()),
        ));
    }
    let y = op.apply(&DualVector::new(df.clone(), dg.clone()));
    Ok((y.f, y.g))
}

/// Iterate of either Newton form.
#[derive(Clone, Debug, PartialEq)]
pub enum Iterate {
    Primal(TransportPlan),
    Dual(DualPotentials),
}

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonState {
    pub iterate: Iterate,
    pub iteration: usize,
    pub cumulative_cg_iters: usize,
}

impl NewtonState {
    /// `P^0 = K`.
    pub fn primal_start(kernel: &GibbsKernel) -> Self {
        NewtonState {
            iterate: Iterate::Primal(TransportPlan::from_solver(kernel.entries().clone()).expect("kernel is finite")),
            iteration: 0,
            cumulative_cg_iters: 0,
        }
    }

    /// `f^0 = g^0 = 0`.
    pub fn dual_start(kernel: &GibbsKernel) -> Self {
        let (n, m) = kernel.shape();
        NewtonState {
            iterate: Iterate::Dual(DualPotentials::zeros(n, m)),
            iteration: 0,
            cumulative_cg_iters: 0,
        }
    }

    /// The plan at this iterate; materialized for the dual form.
    pub fn plan(&self, kernel: &GibbsKernel) -> Result<TransportPlan> {
        match &self.iterate {
            Iterate::Primal(plan) => Ok(plan.clone()),
            Iterate::Dual(duals) => plan_from_duals(kernel, duals),
        }
    }

    fn operator<'a>(&'a self, kernel: &'a GibbsKernel) -> Result<JacobianOperator<'a>> {
        match &self.iterate {
            Iterate::Primal(plan) => Ok(JacobianOperator::primal(plan, kernel.epsilon())),
            Iterate::Dual(duals) => JacobianOperator::dual(kernel, duals),
        }
    }
}

/// Right-hand side `(a^k - a, b^k - b)` of the Newton system, i.e. `-F`.
pub fn newton_rhs(rows: &Array1<f64>, cols: &Array1<f64>, a: &Histogram, b: &Histogram) -> Result<DualVector> {
    if rows.len() != a.len() || cols.len() != b.len() {
        return Err(Error::shape(
            "newton_rhs",
            format!("({}, {})", rows.len(), cols.len()),
            format!("({}, {})", a.len(), b.len()),
        ));
    }
    Ok(DualVector::new(rows - a.values(), cols - b.values()))
}

/// Diagnostics of one Newton step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepInfo {
    pub cg: CgReport,
    /// The step was scaled down to `max_step_ratio * eps` in the inf-norm.
    pub clipped: bool,
    pub step_inf_norm: f64,
}

fn newton_direction(
    op: &JacobianOperator<'_>,
    a: &Histogram,
    b: &Histogram,
    config: &SolveConfig,
    iteration: usize,
) -> Result<(DualVector, StepInfo)> {
    let (rows, cols) = op.marginals();
    let rhs = newton_rhs(rows, cols, a, b)?;
    let precond = jacobi_preconditioner_from_marginals(rows, cols, config.epsilon)?;
    let (n, m) = op.dims();
    // sum(a^k) and sum(b^k) are rounded separately, so <rhs, q> is only zero
    // up to the rounding level of the plan mass.
    let mass = rows.sum() + cols.sum() + a.values().sum() + b.values().sum();
    let opts = PcgOptions {
        tol: config.cg_tol,
        max_iters: config.cg_max_iters,
        consistency_floor: 4.0 * (n + m) as f64 * f64::EPSILON * mass,
    };
    let (mut delta, cg) = pcg_solve_with(op, &rhs, &precond, opts).map_err(|e| match e {
        Error::InconsistentSystem { .. } => Error::NewtonStepFailed {
            iteration,
            reason: e.to_string(),
        },
        other => other,
    })?;
    if cg.breakdown && cg.iterations == 0 {
        return Err(Error::NewtonStepFailed {
            iteration,
            reason: format!("CG broke down immediately: {cg:?}"),
        });
    }

    let mut info = StepInfo {
        cg,
        clipped: false,
        step_inf_norm: delta.inf_norm(),
    };
    let limit = config.max_step_ratio * config.epsilon;
    if info.step_inf_norm > limit {
        delta = delta.scaled(limit / info.step_inf_norm);
        info.clipped = true;
        info.step_inf_norm = limit;
    }
    Ok((delta, info))
}

/// One step of the primal form: `P <- diag(exp(-df/eps)) P diag(exp(-dg/eps))`.
pub fn newton_step_primal(
    state: &NewtonState,
    a: &Histogram,
    b: &Histogram,
    config: &SolveConfig,
) -> Result<(NewtonState, StepInfo)> {
    let Iterate::Primal(plan) = &state.iterate else {
        return Err(Error::InvalidConfig("newton_step_primal needs a primal iterate".into()));
    };
    let op = JacobianOperator::primal(plan, config.epsilon);
    primal_update(state, plan, &op, a, b, config)
}

fn primal_update(
    state: &NewtonState,
    plan: &TransportPlan,
    op: &JacobianOperator<'_>,
    a: &Histogram,
    b: &Histogram,
    config: &SolveConfig,
) -> Result<(NewtonState, StepInfo)> {
    let iteration = state.iteration + 1;
    let (delta, info) = newton_direction(op, a, b, config, iteration)?;
    let eps = config.epsilon;
    let row_scale = delta.f.mapv(|d| (-d / eps).exp());
    let col_scale = delta.g.mapv(|d| (-d / eps).exp());
    let next = scale_rows_cols(plan.view(), row_scale.view(), col_scale.view());
    let next = TransportPlan::from_solver(next).map_err(|_| Error::StepOverflow { iteration })?;
    Ok((
        NewtonState {
            iterate: Iterate::Primal(next),
            iteration,
            cumulative_cg_iters: state.cumulative_cg_iters + info.cg.iterations,
        },
        info,
    ))
}

/// One step of the dual form: `f <- f + df`, `g <- g + dg`, using only
/// products with `K` and `K^T`.
pub fn newton_step_dual(
    state: &NewtonState,
    a: &Histogram,
    b: &Histogram,
    kernel: &GibbsKernel,
    config: &SolveConfig,
) -> Result<(NewtonState, StepInfo)> {
    let Iterate::Dual(duals) = &state.iterate else {
        return Err(Error::InvalidConfig("newton_step_dual needs a dual iterate".into()));
    };
    let op = JacobianOperator::dual(kernel, duals)?;
    dual_update(state, duals, &op, a, b, config)
}

fn dual_update(
    state: &NewtonState,
    duals: &DualPotentials,
    op: &JacobianOperator<'_>,
    a: &Histogram,
    b: &Histogram,
    config: &SolveConfig,
) -> Result<(NewtonState, StepInfo)> {
    let iteration = state.iteration + 1;
    let (delta, info) = newton_direction(op, a, b, config, iteration)?;
    let next =
        DualPotentials::new(&duals.f + &delta.f, &duals.g + &delta.g).map_err(|_| Error::StepOverflow { iteration })?;
    Ok((
        NewtonState {
            iterate: Iterate::Dual(next),
            iteration,
            cumulative_cg_iters: state.cumulative_cg_iters + info.cg.iterations,
        },
        info,
    ))
}

/// Cost and plan errors against a reference plan, logged per iteration.
#[derive(Clone, Copy, Debug)]
pub struct ReferenceMetrics<'a> {
    pub cost: &'a CostMatrix,
    pub reference: &'a TransportPlan,
}

impl ReferenceMetrics<'_> {
    /// `(|<C, P - P*>|, ||P - P*||_1)`.
    pub fn evaluate(&self, plan: ArrayView2<'_, f64>) -> (f64, f64) {
        let mut cost = 0.0;
        let mut l1 = 0.0;
        Zip::from(plan)
            .and(self.reference.entries())
            .and(self.cost.entries())
            .for_each(|&p, &r, &c| {
                cost += c * (p - r);
                l1 += (p - r).abs();
            });
        (cost.abs(), l1)
    }

    pub(crate) fn check_shape(&self, shape: (usize, usize)) -> Result<()> {
        if self.cost.shape() != shape || self.reference.shape() != shape {
            return Err(Error::shape(
                "reference metrics",
                format!("{shape:?}"),
                format!("cost {:?}, reference {:?}", self.cost.shape(), self.reference.shape()),
            ));
        }
        Ok(())
    }
}

/// Wall clock that can be paused around bookkeeping.
pub(crate) struct SolveClock {
    started: Instant,
    excluded: Duration,
}

impl SolveClock {
    pub(crate) fn start() -> Self {
        SolveClock {
            started: Instant::now(),
            excluded: Duration::ZERO,
        }
    }

    pub(crate) fn elapsed_s(&self) -> f64 {
        (self.started.elapsed().saturating_sub(self.excluded)).as_secs_f64()
    }

    pub(crate) fn exclude<T>(&mut self, f: impl FnOnce() -> T) -> T {
        let t0 = Instant::now();
        let out = f();
        self.excluded += t0.elapsed();
        out
    }
}

#[derive(Clone, Debug)]
pub struct NewtonOutcome {
    pub state: NewtonState,
    pub plan: TransportPlan,
    pub record: ConvergenceRecord,
}

/// Runs Newton steps until the violation drops below `config.outer_tol` or
/// `config.max_outer_iters` steps were taken. Non-convergence is reported in
/// the record, not as an error.
pub fn newton_solve(
    kernel: &GibbsKernel,
    a: &Histogram,
    b: &Histogram,
    config: &SolveConfig,
    metrics: Option<ReferenceMetrics<'_>>,
) -> Result<NewtonOutcome> {
    config.check_kernel(kernel)?;
    let (n, m) = kernel.shape();
    if a.len() != n || b.len() != m {
        return Err(Error::shape(
            "newton_solve",
            format!("histograms of length ({n}, {m})"),
            format!("({}, {})", a.len(), b.len()),
        ));
    }
    if let Some(mt) = &metrics {
        mt.check_shape((n, m))?;
    }
    kernel.check_nondegenerate()?;

    let mut state = match config.solver_kind {
        SolverKind::NewtonPrimal => NewtonState::primal_start(kernel),
        SolverKind::NewtonDual => NewtonState::dual_start(kernel),
        SolverKind::Sinkhorn => {
            return Err(Error::InvalidConfig(
                "newton_solve called with solver_kind = sinkhorn".into(),
            ))
        }
    };

    let mut record = ConvergenceRecord::default();
    let mut clock = SolveClock::start();
    loop {
        let op = state.operator(kernel)?;
        let (rows, cols) = op.marginals();
        let violation = Residual::from_marginals(a, b, rows, cols).violation();

        let (cost_error, plan_error_l1) = match &metrics {
            Some(mt) => clock.exclude(|| -> Result<_> {
                let (c, p) = match &state.iterate {
                    Iterate::Primal(plan) => mt.evaluate(plan.view()),
                    Iterate::Dual(_) => mt.evaluate(state.plan(kernel)?.view()),
                };
                Ok((Some(c), Some(p)))
            })?,
            None => (None, None),
        };
        record.rows.push(IterationRecord {
            outer_iter: state.iteration,
            cum_cg_iters: state.cumulative_cg_iters,
            wall_time_s: clock.elapsed_s(),
            violation_inf: violation,
            cost_error,
            plan_error_l1,
        });

        if violation < config.outer_tol {
            record.converged = true;
            break;
        }
        if state.iteration >= config.max_outer_iters {
            break;
        }

        let (next, info) = match &state.iterate {
            Iterate::Primal(plan) => primal_update(&state, plan, &op, a, b, config)?,
            Iterate::Dual(duals) => dual_update(&state, duals, &op, a, b, config)?,
        };
        record.clipped_steps += usize::from(info.clipped);
        record.capped_cg_solves += usize::from(info.cg.hit_cap);
        drop(op);
        state = next;
    }

    let plan = state.plan(kernel)?;
    Ok(NewtonOutcome { state, plan, record })
}

/// Dense `J` for small systems, used by certificates and tests.
pub fn jacobian_dense(plan: &TransportPlan, epsilon: f64) -> Array2<f64> {
    crate::linsolve::to_dense(&JacobianOperator::primal(plan, epsilon))
}
