//! Classical Sinkhorn-Knopp scaling, `u <- a / (K v)`, `v <- b / (K^T u)`.
//!
//! One sweep costs one product with `K` and one with `K^T`, the same as one
//! CG iteration of the Newton solver, so iteration counts of the two are
//! directly comparable.

use ndarray::{Array1, ArrayView2};

use crate::error::{Error, Result};
use crate::newton::{ReferenceMetrics, SolveClock};
use crate::record::{ConvergenceRecord, IterationRecord};
use crate::transport::{scale_rows_cols, GibbsKernel, Histogram, Residual, SolveConfig, SolverKind, TransportPlan};

/// Scalings `u = exp(-f/eps)`, `v = exp(-g/eps)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalingVectors {
    pub u: Array1<f64>,
    pub v: Array1<f64>,
}

impl ScalingVectors {
    pub fn new(u: Array1<f64>, v: Array1<f64>) -> Result<Self> {
        if u.iter().chain(v.iter()).any(|x| !(*x > 0.0) || !x.is_finite()) {
            return Err(Error::InvalidInput(
                "scaling vectors must be strictly positive and finite".into(),
            ));
        }
        Ok(ScalingVectors { u, v })
    }

    pub fn ones(n: usize, m: usize) -> Self {
        ScalingVectors {
            u: Array1::ones(n),
            v: Array1::ones(m),
        }
    }

    /// `diag(u) K diag(v)`.
    pub fn plan(&self, kernel: &GibbsKernel) -> Result<TransportPlan> {
        TransportPlan::from_solver(scale_rows_cols(kernel.entries().view(), self.u.view(), self.v.view()))
    }

    fn check_dims(&self, kernel: &GibbsKernel) -> Result<()> {
        let (n, m) = kernel.shape();
        if self.u.len() != n || self.v.len() != m {
            return Err(Error::shape(
                "scaling vectors",
                format!("({n}, {m})"),
                format!("({}, {})", self.u.len(), self.v.len()),
            ));
        }
        Ok(())
    }
}

/// `target / denom`, failing on a zero denominator.
fn divide(target: &Array1<f64>, denom: &Array1<f64>, which: &str) -> Result<Array1<f64>> {
    if let Some(i) = denom.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::DegenerateKernel(format!(
            "{which} entry {i} is zero; the kernel underflowed for this eps"
        )));
    }
    let out = target / denom;
    if out.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericOverflow(format!("{which} scaling overflowed")));
    }
    Ok(out)
}

fn check_inputs(kernel: &GibbsKernel, a: &Histogram, b: &Histogram, s: &ScalingVectors) -> Result<()> {
    let (n, m) = kernel.shape();
    if a.len() != n || b.len() != m {
        return Err(Error::shape(
            "sinkhorn",
            format!("histograms of length ({n}, {m})"),
            format!("({}, {})", a.len(), b.len()),
        ));
    }
    s.check_dims(kernel)
}

/// One full sweep of the alternating updates.
pub fn sinkhorn_step(kernel: &GibbsKernel, a: &Histogram, b: &Histogram, s: &ScalingVectors) -> Result<ScalingVectors> {
    check_inputs(kernel, a, b, s)?;
    let k = kernel.entries();
    let u = divide(a.values(), &k.dot(&s.v), "K v")?;
    let v = divide(b.values(), &k.t().dot(&u), "K^T u")?;
    Ok(ScalingVectors { u, v })
}

/// Both scalings updated from the old iterate, `v <- b / (K^T u_old)`.
///
/// Experimental: this Jacobi-style variant is a diagnostic only and does not
/// converge in general.
pub fn parallel_update_step(
    kernel: &GibbsKernel,
    a: &Histogram,
    b: &Histogram,
    s: &ScalingVectors,
) -> Result<ScalingVectors> {
    check_inputs(kernel, a, b, s)?;
    let k = kernel.entries();
    let u = divide(a.values(), &k.dot(&s.v), "K v")?;
    let v = divide(b.values(), &k.t().dot(&s.u), "K^T u")?;
    Ok(ScalingVectors { u, v })
}

#[derive(Clone, Debug)]
pub struct SinkhornOutcome {
    pub scalings: ScalingVectors,
    pub plan: TransportPlan,
    pub record: ConvergenceRecord,
}

/// Iterates sweeps from `init` (default `u = v = 1`) until the violation of
/// the induced plan drops below `config.outer_tol`.
pub fn sinkhorn_solve(
    kernel: &GibbsKernel,
    a: &Histogram,
    b: &Histogram,
    config: &SolveConfig,
    init: Option<ScalingVectors>,
    metrics: Option<ReferenceMetrics<'_>>,
) -> Result<SinkhornOutcome> {
    config.check_kernel(kernel)?;
    if config.solver_kind != SolverKind::Sinkhorn {
        return Err(Error::InvalidConfig(format!(
            "sinkhorn_solve called with solver_kind = {}",
            config.solver_kind
        )));
    }
    let (n, m) = kernel.shape();
    let mut s = init.unwrap_or_else(|| ScalingVectors::ones(n, m));
    check_inputs(kernel, a, b, &s)?;
    if let Some(mt) = &metrics {
        mt.check_shape((n, m))?;
    }
    let k: ArrayView2<'_, f64> = kernel.entries().view();

    let mut record = ConvergenceRecord::default();
    let mut clock = SolveClock::start();
    // K v for the current v; reused as the denominator of the next u-update.
    let mut kv = k.dot(&s.v);
    let mut ktu = k.t().dot(&s.u);
    let mut sweep = 0;
    loop {
        let rows = &s.u * &kv;
        let cols = &s.v * &ktu;
        let violation = Residual::from_marginals(a, b, &rows, &cols).violation();
        let (cost_error, plan_error_l1) = match &metrics {
            Some(mt) => clock.exclude(|| {
                let plan = scale_rows_cols(k, s.u.view(), s.v.view());
                let (c, p) = mt.evaluate(plan.view());
                (Some(c), Some(p))
            }),
            None => (None, None),
        };
        record.rows.push(IterationRecord {
            outer_iter: sweep,
            cum_cg_iters: sweep,
            wall_time_s: clock.elapsed_s(),
            violation_inf: violation,
            cost_error,
            plan_error_l1,
        });
        if violation < config.outer_tol {
            record.converged = true;
            break;
        }
        if sweep >= config.max_outer_iters {
            break;
        }

        s.u = divide(a.values(), &kv, "K v")?;
        ktu = k.t().dot(&s.u);
        s.v = divide(b.values(), &ktu, "K^T u")?;
        kv = k.dot(&s.v);
        sweep += 1;
    }

    let plan = s.plan(kernel)?;
    Ok(SinkhornOutcome {
        scalings: s,
        plan,
        record,
    })
}
