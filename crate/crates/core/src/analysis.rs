//! Convergence-theory certificates and convergence-order estimation.
//!
//! * [`omega_bound`] evaluates the affine-covariant Lipschitz bound for the
//!   Newton iteration in the inf-norm, and the matching lower bound
//!   `e^{1/eps} - 1`.
//! * [`remark_identity_check`] verifies the closed form of
//!   `J(y)^{-1} [J(y) - J(eta)] (y - eta)` for perturbations `y - eta = (phi, 0)`.
//! * [`varah_certificate`] and [`shifted_saddle_matrix`] reproduce the
//!   inverse estimate behind the bound.
//!
//! The bounds are stated for square plans (`m = n`) only.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linsolve::{jacobi_preconditioner, pcg_solve, DualVector, LinearOperator};
use crate::newton::JacobianOperator;
use crate::record::ConvergenceRecord;
use crate::transport::{marginals, TransportPlan};

/// Only violations below this enter the order fit.
pub const ORDER_FIT_CEILING: f64 = 1e-1;
/// Number of trailing points used by [`convergence_order`].
pub const ORDER_FIT_WINDOW: usize = 6;
/// Minimum number of points [`convergence_order`] accepts.
pub const ORDER_FIT_MIN_POINTS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OmegaCertificate {
    pub epsilon: f64,
    pub min_plan_entry: f64,
    pub max_row_sum: f64,
    pub max_col_sum: f64,
    /// `(e^{1/eps} - 1) (1 + 2 e^{1/eps} max(row, col) / min_ij P_ij)`.
    pub omega_upper: f64,
    /// `e^{1/eps} - 1`; no smaller constant can work.
    pub omega_lower: f64,
}

/// Upper and lower bounds on the Newton contraction constant at plan `P`.
///
/// The upper bound holds for perturbations with `||y - eta||_inf <= 1`;
/// that hypothesis is about future iterates and is not checked here.
pub fn omega_bound(plan: &TransportPlan, epsilon: f64) -> Result<OmegaCertificate> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidConfig(format!("epsilon must be positive, got {epsilon}")));
    }
    let min_plan_entry = plan.min_entry();
    if !(min_plan_entry > 0.0) {
        return Err(Error::HypothesisViolated(format!(
            "omega bound needs a strictly positive plan, min entry is {min_plan_entry:e}"
        )));
    }
    let (rows, cols) = marginals(plan);
    let max_row_sum = rows.fold(0.0_f64, |m, &x| m.max(x));
    let max_col_sum = cols.fold(0.0_f64, |m, &x| m.max(x));
    let growth = (1.0 / epsilon).exp();
    let omega_lower = (1.0 / epsilon).exp_m1();
    let omega_upper = omega_lower * (1.0 + 2.0 * growth * max_row_sum.max(max_col_sum) / min_plan_entry);
    Ok(OmegaCertificate {
        epsilon,
        min_plan_entry,
        max_row_sum,
        max_col_sum,
        omega_upper,
        omega_lower,
    })
}

/// Inf-norm deviation between `J(y)^{-1} [J(y) - J(eta)] (phi, 0)` and its
/// closed form `((1 - e^{phi/eps}) phi, 0)`, where `P` is the plan at `y` and
/// `eta = y - (phi, 0)`.
///
/// The linear solve is done with [`pcg_solve`]; the solution is fixed up to the
/// kernel direction, so it is normalized to a zero `g`-block before comparing.
pub fn remark_identity_check(
    plan: &TransportPlan,
    epsilon: f64,
    phi: &Array1<f64>,
    cg_tol: f64,
    cg_max_iters: usize,
) -> Result<f64> {
    let (n, m) = plan.shape();
    if n != m {
        return Err(Error::Unsupported(
            "the identity is checked for square plans only".into(),
        ));
    }
    if phi.len() != n {
        return Err(Error::shape("remark_identity_check", n, phi.len()));
    }
    if !(plan.min_entry() > 0.0) {
        return Err(Error::HypothesisViolated("plan must be strictly positive".into()));
    }
    let growth = phi.mapv(|x| (x / epsilon).exp());
    if growth.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericOverflow("exp(phi/eps) overflowed".into()));
    }

    // P(eta) = diag(e^{phi/eps}) P(y)
    let mut shifted = plan.entries().clone();
    for (mut row, &s) in shifted.rows_mut().into_iter().zip(growth.iter()) {
        row *= s;
    }
    let shifted = TransportPlan::new(shifted)?;

    let at_y = JacobianOperator::primal(plan, epsilon);
    let at_eta = JacobianOperator::primal(&shifted, epsilon);
    let direction = DualVector::new(phi.clone(), Array1::zeros(m));
    let mut rhs = at_y.apply(&direction);
    rhs -= &at_eta.apply(&direction);

    let precond = jacobi_preconditioner(plan, epsilon)?;
    let (mut x, _) = pcg_solve(&at_y, &rhs, cg_tol, cg_max_iters, &precond)?;
    let shift = x.g.mean().unwrap_or(0.0);
    x.f += shift;
    x.g -= shift;

    let expected = DualVector::new(
        phi.iter().zip(growth.iter()).map(|(&p, &s)| (1.0 - s) * p).collect(),
        Array1::zeros(m),
    );
    x -= &expected;
    Ok(x.inf_norm())
}

/// Varah's bound `||B^{-1}||_inf <= 1 / min_i (|B_ii| - sum_{j != i} |B_ij|)`
/// for strictly diagonally dominant `B`.
pub fn varah_certificate(matrix: &Array2<f64>) -> Result<f64> {
    let (rows, cols) = matrix.dim();
    if rows != cols || rows == 0 {
        return Err(Error::shape(
            "varah_certificate",
            "a nonempty square matrix",
            format!("{rows}x{cols}"),
        ));
    }
    let margin = matrix
        .rows()
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            let off: f64 = row
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, x)| x.abs())
                .sum();
            row[i].abs() - off
        })
        .fold(f64::INFINITY, f64::min);
    if !(margin > 0.0) {
        return Err(Error::HypothesisViolated(format!(
            "matrix is not strictly diagonally dominant (margin {margin:e})"
        )));
    }
    Ok(1.0 / margin)
}

/// `B = A + delta q q^T` with `A = [[diag(P 1), P], [P^T, diag(P^T 1)]]` and
/// `q = (1_n, -1_n)`.
///
/// For `delta = min_ij P_ij` every row of `B` has dominance margin `2 delta`.
pub fn shifted_saddle_matrix(plan: &TransportPlan, delta: f64) -> Result<Array2<f64>> {
    let (n, m) = plan.shape();
    if n != m {
        return Err(Error::Unsupported(format!(
            "shifted saddle matrix is defined for square plans, got {n}x{m}"
        )));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidInput(format!("delta must be positive, got {delta}")));
    }
    let p = plan.entries();
    let (rows, cols) = marginals(plan);
    let mut b = Array2::from_elem((2 * n, 2 * n), delta);
    for i in 0..n {
        for j in 0..n {
            b[[i, n + j]] = p[[i, j]] - delta;
            b[[n + j, i]] = p[[i, j]] - delta;
        }
        b[[i, i]] += rows[i];
        b[[n + i, n + i]] += cols[i];
    }
    Ok(b)
}

/// Slope of the least-squares line through `(log v_k, log v_{k+1})` over the
/// trailing violations below [`ORDER_FIT_CEILING`].
pub fn convergence_order(record: &ConvergenceRecord) -> Result<f64> {
    convergence_order_of(&record.violations())
}

pub fn convergence_order_of(violations: &[f64]) -> Result<f64> {
    let tail: Vec<f64> = violations
        .iter()
        .copied()
        .filter(|&v| v > 0.0 && v < ORDER_FIT_CEILING)
        .collect();
    if tail.len() < ORDER_FIT_MIN_POINTS {
        return Err(Error::NotEnoughPoints {
            needed: ORDER_FIT_MIN_POINTS,
            got: tail.len(),
        });
    }
    let window = &tail[tail.len().saturating_sub(ORDER_FIT_WINDOW)..];
    let logs: Vec<f64> = window.iter().map(|v| v.ln()).collect();
    let (xs, ys) = (&logs[..logs.len() - 1], &logs[1..]);
    let count = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / count;
    let mean_y = ys.iter().sum::<f64>() / count;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mean_x) * (y - mean_y)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mean_x).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::NotEnoughPoints {
            needed: ORDER_FIT_MIN_POINTS,
            got: 1,
        });
    }
    Ok(sxy / sxx)
}
