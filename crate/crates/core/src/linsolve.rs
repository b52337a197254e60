//! Preconditioned conjugate gradients for the singular Newton system.
//!
//! The Newton matrix is symmetric positive semi-definite with the
//! one-dimensional kernel spanned by `q = (1_n, -1_m)`. A consistent right-hand
//! side (orthogonal to `q`) has a unique solution in the orthogonal complement
//! of the kernel, which is what [`pcg_solve`] returns.

use std::ops::{AddAssign, SubAssign};

use ndarray::{Array1, ArrayView2, Zip};

use crate::error::{Error, Result};
use crate::transport::{inf_norm, marginals_of, TransportPlan};

/// Iterate drift along the kernel is removed this often.
pub const REPROJECT_EVERY: usize = 50;

/// Relative threshold on `|<rhs, q>|` below which the right-hand side is
/// considered consistent.
pub const CONSISTENCY_TOL: f64 = 1e-10;

/// A vector `(x_f, x_g)` of the dual space `R^n x R^m`.
#[derive(Clone, Debug, PartialEq)]
pub struct DualVector {
    pub f: Array1<f64>,
    pub g: Array1<f64>,
}

impl DualVector {
    pub fn new(f: Array1<f64>, g: Array1<f64>) -> Self {
        DualVector { f, g }
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        DualVector::new(Array1::zeros(n), Array1::zeros(m))
    }

    /// The kernel direction `(1_n, -1_m)`.
    pub fn kernel_direction(n: usize, m: usize) -> Self {
        DualVector::new(Array1::ones(n), -Array1::ones(m))
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.f.len(), self.g.len())
    }

    pub fn dot(&self, other: &DualVector) -> f64 {
        self.f.dot(&other.f) + self.g.dot(&other.g)
    }

    /// `<x, (1_n, -1_m)>`.
    pub fn kernel_component(&self) -> f64 {
        self.f.sum() - self.g.sum()
    }

    pub fn inf_norm(&self) -> f64 {
        inf_norm(self.f.view()).max(inf_norm(self.g.view()))
    }

    pub fn l1_norm(&self) -> f64 {
        self.f.iter().chain(self.g.iter()).map(|x| x.abs()).sum()
    }

    pub fn scaled(&self, s: f64) -> DualVector {
        DualVector::new(&self.f * s, &self.g * s)
    }

    /// `self += alpha * x`
    pub fn axpy(&mut self, alpha: f64, x: &DualVector) {
        self.f.scaled_add(alpha, &x.f);
        self.g.scaled_add(alpha, &x.g);
    }

    fn hadamard_div(&self, d: &DualVector) -> DualVector {
        DualVector::new(&self.f / &d.f, &self.g / &d.g)
    }
}

impl AddAssign<&DualVector> for DualVector {
    fn add_assign(&mut self, rhs: &DualVector) {
        self.axpy(1.0, rhs);
    }
}

impl SubAssign<&DualVector> for DualVector {
    fn sub_assign(&mut self, rhs: &DualVector) {
        self.axpy(-1.0, rhs);
    }
}

/// A symmetric linear map on the dual space.
pub trait LinearOperator {
    fn dims(&self) -> (usize, usize);
    fn apply(&self, x: &DualVector) -> DualVector;
}

/// Outcome of one CG solve.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    /// Preconditioned residual norm of the returned iterate relative to the
    /// initial one.
    pub final_relative_residual: f64,
    pub breakdown: bool,
    pub hit_cap: bool,
}

/// `x - (<x, q> / <q, q>) q` with `q = (1_n, -1_m)`.
pub fn project_kernel_complement(x: &DualVector) -> DualVector {
    let mut out = x.clone();
    project_in_place(&mut out);
    out
}

fn project_in_place(x: &mut DualVector) {
    let (n, m) = x.dims();
    if n + m == 0 {
        return;
    }
    let t = x.kernel_component() / (n + m) as f64;
    x.f -= t;
    x.g += t;
}

/// Diagonal of the Newton matrix, `(P 1_m, P^T 1_n) / eps`.
pub fn jacobi_preconditioner(plan: &TransportPlan, epsilon: f64) -> Result<DualVector> {
    let (rows, cols) = marginals_of(plan.view());
    jacobi_preconditioner_from_marginals(&rows, &cols, epsilon)
}

/// [`jacobi_preconditioner`] from precomputed row and column sums.
pub fn jacobi_preconditioner_from_marginals(
    rows: &Array1<f64>,
    cols: &Array1<f64>,
    epsilon: f64,
) -> Result<DualVector> {
    if let Some(i) = rows.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::DegenerateKernel(format!("plan row {i} has zero mass")));
    }
    if let Some(j) = cols.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::DegenerateKernel(format!("plan column {j} has zero mass")));
    }
    Ok(DualVector::new(rows / epsilon, cols / epsilon))
}

/// Knobs of [`pcg_solve_with`] beyond tolerance and cap.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PcgOptions {
    pub tol: f64,
    pub max_iters: usize,
    /// Absolute slack added to the consistency threshold. Callers whose
    /// right-hand side is a difference of separately rounded sums pass the
    /// rounding level of those sums here.
    pub consistency_floor: f64,
}

/// Solves `op x = rhs` by CG preconditioned with the diagonal `precond`,
/// starting from `x = 0`.
pub fn pcg_solve(
    op: &impl LinearOperator,
    rhs: &DualVector,
    tol: f64,
    max_iters: usize,
    precond: &DualVector,
) -> Result<(DualVector, CgReport)> {
    pcg_solve_with(
        op,
        rhs,
        precond,
        PcgOptions {
            tol,
            max_iters,
            consistency_floor: 0.0,
        },
    )
}

pub fn pcg_solve_with(
    op: &impl LinearOperator,
    rhs: &DualVector,
    precond: &DualVector,
    opts: PcgOptions,
) -> Result<(DualVector, CgReport)> {
    let (n, m) = op.dims();
    if rhs.dims() != (n, m) || precond.dims() != (n, m) {
        return Err(Error::shape(
            "pcg_solve",
            format!("vectors of dims ({n}, {m})"),
            format!("rhs {:?}, preconditioner {:?}", rhs.dims(), precond.dims()),
        ));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "cg tolerance must be positive, got {}",
            opts.tol
        )));
    }
    if let Some(bad) = precond
        .f
        .iter()
        .chain(precond.g.iter())
        .find(|d| !(**d > 0.0) || !d.is_finite())
    {
        return Err(Error::InvalidPreconditioner(format!(
            "diagonal entry {bad} is not strictly positive"
        )));
    }

    let defect = rhs.kernel_component().abs();
    let threshold = CONSISTENCY_TOL * rhs.inf_norm() + opts.consistency_floor;
    if defect > threshold {
        return Err(Error::InconsistentSystem { defect, threshold });
    }
    let mut residual = project_kernel_complement(rhs);

    let mut x = DualVector::zeros(n, m);
    let mut report = CgReport::default();
    let mut z = residual.hadamard_div(precond);
    let mut rz = residual.dot(&z);
    let rz0 = rz;
    if !(rz0 > 0.0) {
        return Ok((x, report));
    }

    let mut best = x.clone();
    let mut best_rel = 1.0;
    let mut p = z.clone();
    let mut converged = false;

    for k in 1..=opts.max_iters {
        let q = op.apply(&p);
        let curvature = p.dot(&q);
        if !(curvature > 0.0) {
            report.breakdown = true;
            break;
        }
        let alpha = rz / curvature;
        x.axpy(alpha, &p);
        residual.axpy(-alpha, &q);
        report.iterations = k;
        if k % REPROJECT_EVERY == 0 {
            project_in_place(&mut x);
        }

        z = residual.hadamard_div(precond);
        let rz_next = residual.dot(&z);
        let rel = (rz_next.max(0.0) / rz0).sqrt();
        if rel < best_rel {
            best_rel = rel;
            best.clone_from(&x);
        }
        if rel <= opts.tol {
            converged = true;
            break;
        }
        let beta = rz_next / rz;
        rz = rz_next;
        // p = z + beta p
        Zip::from(&mut p.f).and(&z.f).for_each(|p, &z| *p = z + beta * *p);
        Zip::from(&mut p.g).and(&z.g).for_each(|p, &z| *p = z + beta * *p);
    }

    let mut solution = if converged { x } else { best };
    report.hit_cap = !converged && !report.breakdown;
    report.final_relative_residual = best_rel;
    project_in_place(&mut solution);
    Ok((solution, report))
}

/// Dense view of an operator, column by column. Test and certificate helper
/// for small systems.
pub fn to_dense(op: &impl LinearOperator) -> ndarray::Array2<f64> {
    let (n, m) = op.dims();
    let size = n + m;
    let mut dense = ndarray::Array2::zeros((size, size));
    for col in 0..size {
        let mut e = DualVector::zeros(n, m);
        if col < n {
            e.f[col] = 1.0;
        } else {
            e.g[col - n] = 1.0;
        }
        let y = op.apply(&e);
        for (row, v) in y.f.iter().chain(y.g.iter()).enumerate() {
            dense[[row, col]] = *v;
        }
    }
    dense
}

/// A dense symmetric matrix acting on the stacked dual space.
pub struct DenseOperator<'a> {
    pub matrix: ArrayView2<'a, f64>,
    pub n: usize,
}

impl LinearOperator for DenseOperator<'_> {
    fn dims(&self) -> (usize, usize) {
        (self.n, self.matrix.nrows() - self.n)
    }

    fn apply(&self, x: &DualVector) -> DualVector {
        let stacked: Array1<f64> = x.f.iter().chain(x.g.iter()).copied().collect();
        let y = self.matrix.dot(&stacked);
        DualVector::new(
            y.slice(ndarray::s![..self.n]).to_owned(),
            y.slice(ndarray::s![self.n..]).to_owned(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};

    /// `(1/eps) [[diag(P1), P], [P^T, diag(P^T 1)]]`, assembled densely.
    fn saddle(plan: &Array2<f64>, eps: f64) -> Array2<f64> {
        let (n, m) = plan.dim();
        let mut a = Array2::zeros((n + m, n + m));
        for i in 0..n {
            for j in 0..m {
                a[[i, n + j]] = plan[[i, j]] / eps;
                a[[n + j, i]] = plan[[i, j]] / eps;
                a[[i, i]] += plan[[i, j]] / eps;
                a[[n + j, n + j]] += plan[[i, j]] / eps;
            }
        }
        a
    }

    #[test]
    fn projection_examples() {
        let q = DualVector::kernel_direction(2, 2);
        assert_abs_diff_eq!(project_kernel_complement(&q).inf_norm(), 0.0);

        let perp = DualVector::new(array![1.0, -1.0], array![2.0, -2.0]);
        assert_eq!(project_kernel_complement(&perp), perp);

        let x = DualVector::new(array![2.0, 0.0], array![0.0, 0.0]);
        let y = project_kernel_complement(&x);
        assert_eq!(y, DualVector::new(array![1.5, -0.5], array![0.5, 0.5]));
        assert_eq!(project_kernel_complement(&y), y);
    }

    #[test]
    fn preconditioner_examples() {
        let uniform = TransportPlan::new(Array2::from_elem((2, 2), 0.25)).unwrap();
        let d = jacobi_preconditioner(&uniform, 1.0).unwrap();
        assert_eq!(d, DualVector::new(array![0.5, 0.5], array![0.5, 0.5]));

        let p = TransportPlan::new(array![[0.1, 0.2], [0.3, 0.4]]).unwrap();
        let d = jacobi_preconditioner(&p, 0.5).unwrap();
        assert_abs_diff_eq!(d.f, array![0.6, 1.4], epsilon = 1e-15);
        assert_abs_diff_eq!(d.g, array![0.8, 1.2], epsilon = 1e-15);

        // equals the diagonal of the Newton matrix
        let dense = saddle(p.entries(), 0.5);
        for k in 0..2 {
            assert_abs_diff_eq!(dense[[k, k]], d.f[k], epsilon = 1e-15);
            assert_abs_diff_eq!(dense[[2 + k, 2 + k]], d.g[k], epsilon = 1e-15);
        }

        let hollow = TransportPlan::new(array![[0.0, 0.0], [0.3, 0.4]]).unwrap();
        assert!(matches!(
            jacobi_preconditioner(&hollow, 1.0),
            Err(Error::DegenerateKernel(_))
        ));
    }

    #[test]
    fn zero_rhs_takes_no_iterations() {
        let plan = Array2::from_elem((2, 2), 0.25);
        let a = saddle(&plan, 1.0);
        let op = DenseOperator { matrix: a.view(), n: 2 };
        let d = DualVector::new(array![0.5, 0.5], array![0.5, 0.5]);
        let (x, rep) = pcg_solve(&op, &DualVector::zeros(2, 2), 1e-12, 10, &d).unwrap();
        assert_eq!(x, DualVector::zeros(2, 2));
        assert_eq!(rep.iterations, 0);
        assert!(!rep.hit_cap && !rep.breakdown);
    }

    #[test]
    fn rejects_inconsistent_rhs_and_bad_preconditioner() {
        let plan = Array2::from_elem((2, 2), 0.25);
        let a = saddle(&plan, 1.0);
        let op = DenseOperator { matrix: a.view(), n: 2 };
        let d = DualVector::new(array![0.5, 0.5], array![0.5, 0.5]);
        let bad_rhs = DualVector::new(array![1.0, 0.0], array![0.0, 0.0]);
        assert!(matches!(
            pcg_solve(&op, &bad_rhs, 1e-12, 10, &d),
            Err(Error::InconsistentSystem { .. })
        ));
        let rhs = DualVector::new(array![1.0, 0.0], array![1.0, 0.0]);
        let bad_d = DualVector::new(array![0.5, 0.0], array![0.5, 0.5]);
        assert!(matches!(
            pcg_solve(&op, &rhs, 1e-12, 10, &bad_d),
            Err(Error::InvalidPreconditioner(_))
        ));
    }

    #[test]
    fn cap_is_reported() {
        let plan = array![[0.1, 0.05, 0.02], [0.2, 0.1, 0.03], [0.04, 0.3, 0.16]];
        let a = saddle(&plan, 1.0);
        let op = DenseOperator { matrix: a.view(), n: 3 };
        let d = jacobi_preconditioner(&TransportPlan::new(plan).unwrap(), 1.0).unwrap();
        let rhs = DualVector::new(array![1.0, -2.0, 0.5], array![0.25, 0.25, -1.0]);
        let (_, rep) = pcg_solve(&op, &rhs, 1e-15, 1, &d).unwrap();
        assert!(rep.hit_cap);
        assert_eq!(rep.iterations, 1);
        let (x, rep) = pcg_solve(&op, &rhs, 1e-13, 50, &d).unwrap();
        assert!(!rep.hit_cap);
        let back = op.apply(&x);
        let mut diff = back.clone();
        diff -= &rhs;
        assert!(diff.inf_norm() <= 10.0 * 1e-13 * rhs.inf_norm());
        assert!(x.kernel_component().abs() <= 1e-8 * x.l1_norm());
    }
}
