//! Domain types for discrete entropic optimal transport and the plan algebra
//! shared by every solver.
//!
//! Matrices are dense, row-major `ndarray` arrays of `f64`. A plan `P` is
//! linked to the dual potentials `(f, g)` by
//! `P = diag(exp(-f/eps)) K diag(exp(-g/eps))` with `K = exp(-C/eps)`.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};

use crate::error::{Error, Result};

/// Absolute tolerance on the unit-mass invariant of a [`Histogram`].
pub const MASS_TOLERANCE: f64 = 1e-12;

/// A point on the probability simplex.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram(Array1<f64>);

impl Histogram {
    /// Wraps `values`, which must be nonnegative, finite and sum to one.
    pub fn new(values: Array1<f64>) -> Result<Self> {
        check_nonnegative(values.iter(), "histogram")?;
        let mass = values.sum();
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidInput(format!(
                "histogram mass {mass} differs from 1 by more than {MASS_TOLERANCE:e}"
            )));
        }
        Ok(Histogram(values))
    }

    /// Divides nonnegative `values` by their sum.
    pub fn normalized(values: Array1<f64>) -> Result<Self> {
        check_nonnegative(values.iter(), "histogram")?;
        let mass = values.sum();
        if !(mass > 0.0) {
            return Err(Error::DegenerateHistogram(
                "values sum to zero, cannot normalize".into(),
            ));
        }
        Ok(Histogram(values / mass))
    }

    /// Uniform histogram with `n` bins.
    pub fn uniform(n: usize) -> Self {
        Histogram(Array1::from_elem(n, 1.0 / n as f64))
    }

    pub fn values(&self) -> &Array1<f64> {
        &self.0
    }

    pub fn view(&self) -> ArrayView1<'_, f64> {
        self.0.view()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.0.fold(f64::INFINITY, |acc, &x| acc.min(x))
    }

    pub fn into_inner(self) -> Array1<f64> {
        self.0
    }
}

/// Nonnegative, finite cost matrix `C`.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix(Array2<f64>);

impl CostMatrix {
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        check_nonnegative(entries.iter(), "cost matrix")?;
        Ok(CostMatrix(entries))
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.dim()
    }
}

/// The Gibbs kernel `K = exp(-C/eps)` together with its `eps`.
#[derive(Clone, Debug, PartialEq)]
pub struct GibbsKernel {
    entries: Array2<f64>,
    epsilon: f64,
}

impl GibbsKernel {
    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn shape(&self) -> (usize, usize) {
        self.entries.dim()
    }

    /// Fails if some row or column of `K` has no positive entry.
    pub fn check_nondegenerate(&self) -> Result<()> {
        let (rows, cols) = marginals_of(self.entries.view());
        if let Some(i) = rows.iter().position(|&s| !(s > 0.0)) {
            return Err(Error::DegenerateKernel(format!(
                "row {i} of the kernel underflowed to zero (eps = {:e})",
                self.epsilon
            )));
        }
        if let Some(j) = cols.iter().position(|&s| !(s > 0.0)) {
            return Err(Error::DegenerateKernel(format!(
                "column {j} of the kernel underflowed to zero (eps = {:e})",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Builds `K = exp(-C/eps)`. Entries below the double-precision range
/// underflow to exactly zero.
pub fn gibbs_kernel(cost: &CostMatrix, epsilon: f64) -> Result<GibbsKernel> {
    gibbs_kernel_with_floor(cost, epsilon, 0.0)
}

/// Like [`gibbs_kernel`] but clamps every entry from below at `floor`.
///
/// A positive floor keeps every plan entry strictly positive, which the
/// theory certificates in [`crate::analysis`] require.
pub fn gibbs_kernel_with_floor(cost: &CostMatrix, epsilon: f64, floor: f64) -> Result<GibbsKernel> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "epsilon must be positive and finite, got {epsilon}"
        )));
    }
    if !(0.0..=1.0).contains(&floor) {
        return Err(Error::InvalidConfig(format!(
            "kernel floor must lie in [0, 1], got {floor}"
        )));
    }
    let entries = cost.0.mapv(|c| (-c / epsilon).exp().max(floor));
    Ok(GibbsKernel { entries, epsilon })
}

/// Dual potentials `(f, g)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DualPotentials {
    pub f: Array1<f64>,
    pub g: Array1<f64>,
}

impl DualPotentials {
    pub fn new(f: Array1<f64>, g: Array1<f64>) -> Result<Self> {
        if f.iter().chain(g.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("dual potentials must be finite".into()));
        }
        Ok(DualPotentials { f, g })
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        DualPotentials {
            f: Array1::zeros(n),
            g: Array1::zeros(m),
        }
    }

    /// `(exp(-f/eps), exp(-g/eps))`.
    pub fn scalings(&self, epsilon: f64) -> (Array1<f64>, Array1<f64>) {
        (
            self.f.mapv(|x| (-x / epsilon).exp()),
            self.g.mapv(|x| (-x / epsilon).exp()),
        )
    }
}

/// A dense nonnegative coupling matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportPlan(Array2<f64>);

impl TransportPlan {
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        check_nonnegative(entries.iter(), "transport plan")?;
        Ok(TransportPlan(entries))
    }

    /// Solvers build plans from nonnegative factors; only finiteness is checked.
    pub(crate) fn from_solver(entries: Array2<f64>) -> Result<Self> {
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::NumericOverflow("plan entry is not finite".into()));
        }
        Ok(TransportPlan(entries))
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.dim()
    }

    pub fn mass(&self) -> f64 {
        self.0.sum()
    }

    pub fn min_entry(&self) -> f64 {
        self.0.fold(f64::INFINITY, |acc, &x| acc.min(x))
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }
}

/// `P = diag(exp(-f/eps)) K diag(exp(-g/eps))`.
pub fn plan_from_duals(kernel: &GibbsKernel, duals: &DualPotentials) -> Result<TransportPlan> {
    let (n, m) = kernel.shape();
    if duals.f.len() != n || duals.g.len() != m {
        return Err(Error::shape(
            "plan_from_duals",
            format!("duals of length ({n}, {m})"),
            format!("({}, {})", duals.f.len(), duals.g.len()),
        ));
    }
    let (u, v) = duals.scalings(kernel.epsilon);
    let plan = scale_rows_cols(kernel.entries.view(), u.view(), v.view());
    if plan.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericOverflow(
            "plan entry overflowed; dual potentials too negative for this eps".into(),
        ));
    }
    Ok(TransportPlan(plan))
}

/// `diag(u) M diag(v)`.
pub(crate) fn scale_rows_cols(
    matrix: ArrayView2<'_, f64>,
    u: ArrayView1<'_, f64>,
    v: ArrayView1<'_, f64>,
) -> Array2<f64> {
    let mut out = matrix.to_owned();
    Zip::from(out.rows_mut()).and(&u).for_each(|mut row, &ui| {
        Zip::from(&mut row).and(&v).for_each(|p, &vj| *p *= ui * vj);
    });
    out
}

pub(crate) fn marginals_of(matrix: ArrayView2<'_, f64>) -> (Array1<f64>, Array1<f64>) {
    (matrix.sum_axis(Axis(1)), matrix.sum_axis(Axis(0)))
}

/// Row sums `P 1_m` and column sums `P^T 1_n`.
pub fn marginals(plan: &TransportPlan) -> (Array1<f64>, Array1<f64>) {
    marginals_of(plan.0.view())
}

/// Marginal defects `(a - P 1_m, b - P^T 1_n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Residual {
    pub row_defect: Array1<f64>,
    pub col_defect: Array1<f64>,
}

impl Residual {
    /// `max(||row_defect||_inf, ||col_defect||_inf)`, the constraint violation.
    pub fn violation(&self) -> f64 {
        inf_norm(self.row_defect.view()).max(inf_norm(self.col_defect.view()))
    }

    pub(crate) fn from_marginals(a: &Histogram, b: &Histogram, rows: &Array1<f64>, cols: &Array1<f64>) -> Self {
        Residual {
            row_defect: a.values() - rows,
            col_defect: b.values() - cols,
        }
    }
}

pub fn residual(a: &Histogram, b: &Histogram, plan: &TransportPlan) -> Result<Residual> {
    let (n, m) = plan.shape();
    if a.len() != n || b.len() != m {
        return Err(Error::shape(
            "residual",
            format!("histograms of length ({n}, {m})"),
            format!("({}, {})", a.len(), b.len()),
        ));
    }
    let (rows, cols) = marginals(plan);
    Ok(Residual::from_marginals(a, b, &rows, &cols))
}

/// `<C, P>`, the unregularized transport cost of `P`.
pub fn transport_cost(cost: &CostMatrix, plan: &TransportPlan) -> Result<f64> {
    if cost.shape() != plan.shape() {
        return Err(Error::shape(
            "transport_cost",
            format!("{:?}", cost.shape()),
            format!("{:?}", plan.shape()),
        ));
    }
    Ok(Zip::from(&cost.0).and(&plan.0).fold(0.0, |acc, &c, &p| acc + c * p))
}

/// `<C, P> + eps * sum_ij P_ij (ln P_ij - 1)` with `0 ln 0 = 0`.
pub fn entropic_objective(cost: &CostMatrix, plan: &TransportPlan, epsilon: f64) -> Result<f64> {
    check_nonnegative(plan.0.iter(), "transport plan")?;
    let linear = transport_cost(cost, plan)?;
    let entropy = plan
        .0
        .fold(0.0, |acc, &p| if p > 0.0 { acc + p * (p.ln() - 1.0) } else { acc });
    Ok(linear + epsilon * entropy)
}

pub(crate) fn inf_norm(x: ArrayView1<'_, f64>) -> f64 {
    x.fold(0.0_f64, |acc, &v| acc.max(v.abs()))
}

fn check_nonnegative<'a>(values: impl Iterator<Item = &'a f64>, what: &str) -> Result<()> {
    for (idx, &x) in values.enumerate() {
        if !x.is_finite() {
            return Err(Error::InvalidInput(format!("{what} entry {idx} is not finite ({x})")));
        }
        if x < 0.0 {
            return Err(Error::InvalidInput(format!("{what} entry {idx} is negative ({x})")));
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverKind {
    Sinkhorn,
    NewtonPrimal,
    NewtonDual,
}

impl SolverKind {
    pub fn is_newton(self) -> bool {
        matches!(self, SolverKind::NewtonPrimal | SolverKind::NewtonDual)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::Sinkhorn => "sinkhorn",
            SolverKind::NewtonPrimal => "newton_primal",
            SolverKind::NewtonDual => "newton_dual",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sinkhorn" => Ok(SolverKind::Sinkhorn),
            "newton_primal" | "newton" => Ok(SolverKind::NewtonPrimal),
            "newton_dual" => Ok(SolverKind::NewtonDual),
            other => Err(Error::InvalidConfig(format!("unknown solver '{other}'"))),
        }
    }
}

/// Solver settings. Defaults follow the 2-D comparison experiment:
/// CG tolerance `1e-13` capped at 34 iterations, outer tolerance `1e-13`.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveConfig {
    pub epsilon: f64,
    /// Threshold on the infinity-norm constraint violation.
    pub outer_tol: f64,
    pub max_outer_iters: usize,
    pub cg_tol: f64,
    pub cg_max_iters: usize,
    pub solver_kind: SolverKind,
    /// Newton steps with `||delta||_inf / eps` above this are scaled down.
    pub max_step_ratio: f64,
}

impl SolveConfig {
    pub fn new(epsilon: f64, solver_kind: SolverKind) -> Self {
        let max_outer_iters = match solver_kind {
            SolverKind::Sinkhorn => 200_000,
            _ => 500,
        };
        SolveConfig {
            epsilon,
            outer_tol: 1e-13,
            max_outer_iters,
            cg_tol: 1e-13,
            cg_max_iters: 34,
            solver_kind,
            max_step_ratio: 50.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("epsilon", self.epsilon),
            ("outer_tol", self.outer_tol),
            ("cg_tol", self.cg_tol),
            ("max_step_ratio", self.max_step_ratio),
        ];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
        }
        if self.max_outer_iters == 0 || self.cg_max_iters == 0 {
            return Err(Error::InvalidConfig("iteration caps must be at least 1".into()));
        }
        Ok(())
    }

    pub(crate) fn check_kernel(&self, kernel: &GibbsKernel) -> Result<()> {
        self.validate()?;
        let rel = (self.epsilon - kernel.epsilon).abs() / kernel.epsilon;
        if rel > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "config epsilon {} does not match kernel epsilon {}",
                self.epsilon, kernel.epsilon
            )));
        }
        Ok(())
    }
}
