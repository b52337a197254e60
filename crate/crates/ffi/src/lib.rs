//! C interface to the `sinkhorn-newton` solvers.
//!
//! Problems and solutions are opaque handles owned by the caller and
//! released with the matching `*_free` function. Every fallible call returns
//! an [`SnStatus`]; on failure a message is available from
//! [`sn_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ndarray::{Array1, Array2};
use sinkhorn_newton::{
    gibbs_kernel, solve, CostMatrix, Error, GibbsKernel, Histogram, Solution, SolveConfig, SolverKind,
};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SnStatus {
    Ok = 0,
    /// The solver ran to its iteration cap; the solution handle is still set.
    NotConverged = 1,
    NullPointer = 2,
    InvalidArgument = 3,
    Numerical = 4,
    BufferTooSmall = 5,
    Internal = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SnSolver {
    Sinkhorn = 0,
    NewtonPrimal = 1,
    NewtonDual = 2,
}

/// Solver settings. Start from [`sn_options_default`].
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct SnOptions {
    pub solver: SnSolver,
    pub outer_tol: f64,
    pub max_outer_iters: usize,
    pub cg_tol: f64,
    pub cg_max_iters: usize,
    pub max_step_ratio: f64,
}

/// Marginals plus the Gibbs kernel for a fixed epsilon.
pub struct SnProblem {
    a: Histogram,
    b: Histogram,
    kernel: GibbsKernel,
}

pub struct SnSolution {
    inner: Solution,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = CString::new(text).ok());
}

fn status_of(err: &Error) -> SnStatus {
    match err {
        Error::InvalidConfig(_)
        | Error::InvalidInput(_)
        | Error::Shape { .. }
        | Error::DegenerateHistogram(_)
        | Error::Unsupported(_) => SnStatus::InvalidArgument,
        Error::NumericOverflow(_)
        | Error::DegenerateKernel(_)
        | Error::NewtonStepFailed { .. }
        | Error::StepOverflow { .. }
        | Error::InconsistentSystem { .. }
        | Error::InvalidPreconditioner(_)
        | Error::HypothesisViolated(_) => SnStatus::Numerical,
        _ => SnStatus::Internal,
    }
}

fn fail(err: Error) -> SnStatus {
    let status = status_of(&err);
    set_error(err.to_string());
    status
}

fn guarded(body: impl FnOnce() -> SnStatus) -> SnStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_error("panic inside the solver");
            SnStatus::Internal
        }
    }
}

/// Reads `len` doubles; a null pointer is only accepted for `len == 0`.
unsafe fn read_slice<'a>(data: *const f64, len: usize, name: &str) -> Result<&'a [f64], SnStatus> {
    if len == 0 {
        set_error(format!("{name} is empty"));
        return Err(SnStatus::InvalidArgument);
    }
    if data.is_null() {
        set_error(format!("{name} is null"));
        return Err(SnStatus::NullPointer);
    }
    Ok(std::slice::from_raw_parts(data, len))
}

fn write_out(values: impl ExactSizeIterator<Item = f64>, out: *mut f64, len: usize) -> SnStatus {
    if out.is_null() {
        set_error("output buffer is null");
        return SnStatus::NullPointer;
    }
    if len < values.len() {
        set_error(format!("output buffer holds {len} values, need {}", values.len()));
        return SnStatus::BufferTooSmall;
    }
    for (k, v) in values.enumerate() {
        unsafe { *out.add(k) = v };
    }
    SnStatus::Ok
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sn_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

#[no_mangle]
pub extern "C" fn sn_options_default(solver: SnSolver) -> SnOptions {
    let kind = match solver {
        SnSolver::Sinkhorn => SolverKind::Sinkhorn,
        SnSolver::NewtonPrimal => SolverKind::NewtonPrimal,
        SnSolver::NewtonDual => SolverKind::NewtonDual,
    };
    let cfg = SolveConfig::new(1.0, kind);
    SnOptions {
        solver,
        outer_tol: cfg.outer_tol,
        max_outer_iters: cfg.max_outer_iters,
        cg_tol: cfg.cg_tol,
        cg_max_iters: cfg.cg_max_iters,
        max_step_ratio: cfg.max_step_ratio,
    }
}

/// Builds a problem from marginals `a` (length `n`), `b` (length `m`) and a
/// row-major `n * m` cost matrix.
///
/// # Safety
/// The pointers must reference at least `n`, `m` and `n * m` doubles, and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sn_problem_new(
    a: *const f64,
    n: usize,
    b: *const f64,
    m: usize,
    cost: *const f64,
    epsilon: f64,
    out: *mut *mut SnProblem,
) -> SnStatus {
    guarded(|| {
        if out.is_null() {
            set_error("out is null");
            return SnStatus::NullPointer;
        }
        *out = ptr::null_mut();
        let Some(cells) = n.checked_mul(m) else {
            set_error("n * m overflows");
            return SnStatus::InvalidArgument;
        };
        let (a, b, cost) = match (
            read_slice(a, n, "a"),
            read_slice(b, m, "b"),
            read_slice(cost, cells, "cost"),
        ) {
            (Ok(a), Ok(b), Ok(c)) => (a, b, c),
            (Err(s), _, _) | (_, Err(s), _) | (_, _, Err(s)) => return s,
        };
        let built = (|| {
            let a = Histogram::new(Array1::from(a.to_vec()))?;
            let b = Histogram::new(Array1::from(b.to_vec()))?;
            let entries =
                Array2::from_shape_vec((n, m), cost.to_vec()).map_err(|e| Error::InvalidInput(e.to_string()))?;
            let kernel = gibbs_kernel(&CostMatrix::new(entries)?, epsilon)?;
            Ok::<_, Error>(SnProblem { a, b, kernel })
        })();
        match built {
            Ok(problem) => {
                *out = Box::into_raw(Box::new(problem));
                SnStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `problem` must come from [`sn_problem_new`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn sn_problem_free(problem: *mut SnProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Runs the selected solver. Returns `SN_STATUS_NOT_CONVERGED` with `*out`
/// set when the iteration cap was reached first.
///
/// # Safety
/// `problem` must be a live handle, `options` readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sn_solve(
    problem: *const SnProblem,
    options: *const SnOptions,
    out: *mut *mut SnSolution,
) -> SnStatus {
    guarded(|| {
        if problem.is_null() || options.is_null() || out.is_null() {
            set_error("null argument to sn_solve");
            return SnStatus::NullPointer;
        }
        *out = ptr::null_mut();
        let problem = &*problem;
        let opts = *options;
        let mut cfg = SolveConfig::new(
            problem.kernel.epsilon(),
            match opts.solver {
                SnSolver::Sinkhorn => SolverKind::Sinkhorn,
                SnSolver::NewtonPrimal => SolverKind::NewtonPrimal,
                SnSolver::NewtonDual => SolverKind::NewtonDual,
            },
        );
        cfg.outer_tol = opts.outer_tol;
        cfg.max_outer_iters = opts.max_outer_iters;
        cfg.cg_tol = opts.cg_tol;
        cfg.cg_max_iters = opts.cg_max_iters;
        cfg.max_step_ratio = opts.max_step_ratio;
        match solve(&problem.kernel, &problem.a, &problem.b, &cfg, None) {
            Ok(inner) => {
                let converged = inner.converged();
                *out = Box::into_raw(Box::new(SnSolution { inner }));
                if converged {
                    SnStatus::Ok
                } else {
                    set_error("iteration cap reached before the tolerance");
                    SnStatus::NotConverged
                }
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `solution` must come from [`sn_solve`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn sn_solution_free(solution: *mut SnSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// # Safety
/// `solution` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn sn_solution_converged(solution: *const SnSolution) -> bool {
    solution.as_ref().is_some_and(|s| s.inner.converged())
}

/// Outer iterations performed (Sinkhorn sweeps or Newton steps).
///
/// # Safety
/// `solution` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn sn_solution_iterations(solution: *const SnSolution) -> usize {
    solution.as_ref().map_or(0, |s| s.inner.record.iterations())
}

/// Cumulative inner CG iterations; equals the sweep count for Sinkhorn.
///
/// # Safety
/// `solution` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn sn_solution_total_cg_iters(solution: *const SnSolution) -> usize {
    solution.as_ref().map_or(0, |s| s.inner.record.total_cg_iters())
}

/// Final infinity-norm constraint violation, NaN for a null handle.
///
/// # Safety
/// `solution` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn sn_solution_final_violation(solution: *const SnSolution) -> f64 {
    solution
        .as_ref()
        .and_then(|s| s.inner.record.final_violation())
        .unwrap_or(f64::NAN)
}

/// Number of recorded violations, including the initial point.
///
/// # Safety
/// `solution` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn sn_solution_history_len(solution: *const SnSolution) -> usize {
    solution.as_ref().map_or(0, |s| s.inner.record.rows.len())
}

/// Copies the violation history into `out`.
///
/// # Safety
/// `solution` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sn_solution_violations(solution: *const SnSolution, out: *mut f64, len: usize) -> SnStatus {
    let Some(s) = solution.as_ref() else {
        set_error("solution is null");
        return SnStatus::NullPointer;
    };
    write_out(s.inner.record.violations().into_iter(), out, len)
}

/// Copies the `n * m` plan in row-major order into `out`.
///
/// # Safety
/// `solution` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sn_solution_plan(solution: *const SnSolution, out: *mut f64, len: usize) -> SnStatus {
    let Some(s) = solution.as_ref() else {
        set_error("solution is null");
        return SnStatus::NullPointer;
    };
    write_out(s.inner.plan.entries().iter().copied(), out, len)
}
