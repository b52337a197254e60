//! Acceptance gate: one test and one PASS/FAIL line per criterion.

mod common;

use std::f64::consts::E;
use std::time::Instant;

use common::*;
use ndarray::{array, Array2};
use rand::RngExt;
use sinkhorn_newton::linsolve::to_dense;
use sinkhorn_newton::*;

fn verdict(id: u32, title: &str, ok: bool, detail: &str) {
    println!(
        "criterion {id:>2} [{}] {title}: {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {id} failed: {detail}");
}

fn config(eps: f64, kind: SolverKind, tol: f64, cg_max: usize) -> SolveConfig {
    let mut cfg = SolveConfig::new(eps, kind);
    cfg.outer_tol = tol;
    cfg.cg_tol = 1e-13;
    cfg.cg_max_iters = cg_max;
    cfg
}

fn grid_kernel(grid: &GridSpec, eps: f64) -> (CostMatrix, GibbsKernel) {
    let cost = squared_euclidean_cost(grid, grid).unwrap();
    let kernel = gibbs_kernel(&cost, eps).unwrap();
    (cost, kernel)
}

#[test]
fn criterion_01_closed_form_oracle() {
    const TOL: f64 = 1e-10;
    const BUDGET_S: f64 = 0.1;
    let started = Instant::now();
    let a = Histogram::new(array![0.5, 0.5]).unwrap();
    let cost = CostMatrix::new(array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
    let kernel = gibbs_kernel(&cost, 1.0).unwrap();
    let p11 = 0.5 / (1.0 + (-1.0f64).exp());

    let mut worst: f64 = 0.0;
    let mut all_converged = true;
    let mut sinkhorn_sweeps = usize::MAX;
    for kind in [SolverKind::Sinkhorn, SolverKind::NewtonPrimal, SolverKind::NewtonDual] {
        let out = solve(&kernel, &a, &a, &config(1.0, kind, 1e-12, 34), None).unwrap();
        all_converged &= out.converged();
        worst = worst.max((out.plan.entries()[[0, 0]] - p11).abs());
        if kind == SolverKind::Sinkhorn {
            sinkhorn_sweeps = out.record.iterations();
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    let ok = all_converged && worst <= TOL && sinkhorn_sweeps == 1 && elapsed < BUDGET_S;
    verdict(
        1,
        "closed-form 2x2 oracle",
        ok,
        &format!(
            "max |P11 - 0.5/(1+e^-1)| = {worst:.2e} (<= {TOL:e}), sinkhorn sweeps = {sinkhorn_sweeps}, {elapsed:.4} s"
        ),
    );
}

#[test]
fn criterion_02_quadratic_vs_linear_order() {
    const NEWTON_MIN_ORDER: f64 = 1.5;
    const SINKHORN_ORDER: (f64, f64) = (0.9, 1.1);
    const CROSSING: f64 = 1e-10;
    const BUDGET_S: f64 = 30.0;
    let started = Instant::now();
    let eps = 1e-3;
    let (a, b, grid) = gaussian_pair_2d(20).unwrap();
    let (_, kernel) = grid_kernel(&grid, eps);
    let newton = solve(&kernel, &a, &b, &config(eps, SolverKind::NewtonPrimal, 1e-13, 34), None).unwrap();
    let sinkhorn = solve(&kernel, &a, &b, &config(eps, SolverKind::Sinkhorn, 1e-13, 34), None).unwrap();
    let elapsed = started.elapsed().as_secs_f64();

    let newton_order = convergence_order(&newton.record).unwrap();
    let sinkhorn_order = convergence_order(&sinkhorn.record).unwrap();
    let newton_cost = newton.record.first_below(CROSSING).map(|r| r.cum_cg_iters);
    let sinkhorn_cost = sinkhorn.record.first_below(CROSSING).map(|r| r.cum_cg_iters);
    let cheaper = matches!((newton_cost, sinkhorn_cost), (Some(n), Some(s)) if n < s);
    let ok = newton.converged()
        && sinkhorn.converged()
        && newton_order >= NEWTON_MIN_ORDER
        && (SINKHORN_ORDER.0..=SINKHORN_ORDER.1).contains(&sinkhorn_order)
        && cheaper
        && elapsed < BUDGET_S;
    verdict(
        2,
        "newton order vs sinkhorn order on the 20x20 Gaussian pair",
        ok,
        &format!(
            "newton order {newton_order:.3} (>= {NEWTON_MIN_ORDER}), sinkhorn order {sinkhorn_order:.3} (in [{}, {}]), \
             cost to {CROSSING:e}: newton {newton_cost:?} CG vs sinkhorn {sinkhorn_cost:?} sweeps, \
             newton {} outer / {} CG, {elapsed:.2} s",
            SINKHORN_ORDER.0,
            SINKHORN_ORDER.1,
            newton.record.iterations(),
            newton.record.total_cg_iters(),
        ),
    );
}

fn mesh_outer_iterations(n: usize) -> (usize, bool) {
    let eps = 1e-3;
    let (a, b, grid) = bump_pair_1d(n).unwrap();
    let (_, kernel) = grid_kernel(&grid, eps);
    let out = solve(
        &kernel,
        &a,
        &b,
        &config(eps, SolverKind::NewtonPrimal, 1e-10, n.div_ceil(12)),
        None,
    )
    .unwrap();
    (out.record.iterations(), out.converged())
}

#[test]
fn criterion_03_mesh_robustness() {
    const SPREAD: usize = 3;
    let counts: Vec<(usize, usize, bool)> = [250, 500, 1000]
        .into_iter()
        .map(|n| {
            let (k, c) = mesh_outer_iterations(n);
            (n, k, c)
        })
        .collect();
    let max = counts.iter().map(|c| c.1).max().unwrap();
    let min = counts.iter().map(|c| c.1).min().unwrap();
    let ok = counts.iter().all(|c| c.2) && max - min <= SPREAD;
    verdict(
        3,
        "outer Newton iterations across n = 250, 500, 1000",
        ok,
        &format!("(n, outer, converged) = {counts:?}, spread {} (<= {SPREAD})", max - min),
    );
}

#[test]
#[ignore = "full-scale mesh check takes minutes and about 0.5 GB at n = 8000"]
fn criterion_03_full_scale() {
    const WINDOW: i64 = 5;
    let reported = [(1000, 21), (2000, 22), (4000, 23), (8000, 23)];
    let rows: Vec<(usize, usize, i64)> = reported
        .iter()
        .map(|&(n, k)| {
            let (ours, converged) = mesh_outer_iterations(n);
            assert!(converged, "n = {n} did not converge");
            (n, ours, k)
        })
        .collect();
    let ok = rows.iter().all(|&(_, ours, k)| (ours as i64 - k).abs() <= WINDOW);
    verdict(
        3,
        "full-scale outer counts within 5 of 21, 22, 23, 23",
        ok,
        &format!("(n, ours, reported) = {rows:?}"),
    );
}

#[test]
fn criterion_04_median_pin() {
    const EXPECTED: &str = "0.2821";
    let grid = GridSpec::square(28).unwrap();
    let cost = squared_euclidean_cost(&grid, &grid).unwrap();
    let median = median_cost_scale(&cost).unwrap();
    let rounded = format!("{median:.4}");
    verdict(
        4,
        "median of the 28x28 self-grid cost",
        rounded == EXPECTED,
        &format!("median {median:.8} rounds to {rounded}, expected {EXPECTED}"),
    );
}

#[test]
fn criterion_05_jacobian_correctness() {
    const FD_TOL: f64 = 1e-5;
    const FORM_TOL: f64 = 1e-12;
    const KERNEL_TOL: f64 = 1e-12;
    let mut r = rng(5);
    let (mut fd_worst, mut form_worst, mut kernel_worst): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..20 {
        let n = r.random_range(1..=6);
        let m = r.random_range(1..=6);
        let eps = r.random_range(0.2..2.0);
        let cost = CostMatrix::new(Array2::from_shape_fn((n, m), |_| r.random_range(0.0..1.0))).unwrap();
        let kernel = gibbs_kernel(&cost, eps).unwrap();
        let a = random_histogram(&mut r, n);
        let b = random_histogram(&mut r, m);
        let f = random_vector(&mut r, n, 0.3);
        let g = random_vector(&mut r, m, 0.3);
        let plan = plan_from_duals(&kernel, &DualPotentials::new(f.clone(), g.clone()).unwrap()).unwrap();
        assert!(plan.min_entry() > 0.0);
        let op = JacobianOperator::primal(&plan, eps);

        let df = random_vector(&mut r, n, 1.0);
        let dg = random_vector(&mut r, m, 1.0);
        let h = 1e-6 * (1.0 + inf_norm(&f).max(inf_norm(&g)));
        let k = kernel.entries();
        let plus = residual_of_duals(k, eps, a.values(), b.values(), &(&f + &(&df * h)), &(&g + &(&dg * h)));
        let minus = residual_of_duals(k, eps, a.values(), b.values(), &(&f - &(&df * h)), &(&g - &(&dg * h)));
        let fd = (plus - minus) / (2.0 * h);
        let (jf, jg) = jacobian_apply(&op, &df, &dg).unwrap();
        let jv = stack(&DualVector::new(jf.clone(), jg.clone()));
        fd_worst = fd_worst.max(inf_norm(&(&fd - &jv)) / inf_norm(&jv));

        let p = plan.entries();
        let mut form = 0.0;
        for i in 0..n {
            for j in 0..m {
                form += p[[i, j]] * (df[i] + dg[j]).powi(2);
            }
        }
        form /= eps;
        let quad = df.dot(&jf) + dg.dot(&jg);
        form_worst = form_worst.max((quad - form).abs() / form);

        let jq = op.apply(&DualVector::kernel_direction(n, m));
        kernel_worst = kernel_worst.max(jq.inf_norm());
    }
    let ok = fd_worst <= FD_TOL && form_worst <= FORM_TOL && kernel_worst <= KERNEL_TOL;
    verdict(
        5,
        "Jacobian vs finite differences, quadratic form and kernel",
        ok,
        &format!(
            "20 instances: FD rel err {fd_worst:.2e} (<= {FD_TOL:e}), form rel err {form_worst:.2e} (<= {FORM_TOL:e}), \
             |J q|_inf {kernel_worst:.2e} (<= {KERNEL_TOL:e})"
        ),
    );
}

#[test]
fn criterion_06_singular_solve_oracle() {
    const TOL: f64 = 1e-8;
    let mut r = rng(6);
    let (mut diff_worst, mut ortho_worst): (f64, f64) = (0.0, 0.0);
    for _ in 0..50 {
        let size = r.random_range(2..=16);
        let n = r.random_range(1..size);
        let m = size - n;
        let eps = r.random_range(0.2..2.0);
        let plan = random_plan(&mut r, n, m, 0.05);
        let op = JacobianOperator::primal(&plan, eps);
        let rhs = project_kernel_complement(&DualVector::new(
            random_vector(&mut r, n, 1.0),
            random_vector(&mut r, m, 1.0),
        ));
        let precond = jacobi_preconditioner(&plan, eps).unwrap();
        let (delta, _) = pcg_solve(&op, &rhs, 1e-14, 500, &precond).unwrap();

        let pinv = spectral_pinv(&to_dense(&op), 1e-10);
        let oracle = pinv.dot(&stack(&rhs));
        diff_worst = diff_worst.max(inf_norm(&(&stack(&delta) - &oracle)));
        ortho_worst = ortho_worst.max(delta.kernel_component().abs() / delta.l1_norm());
    }
    let ok = diff_worst <= TOL && ortho_worst <= TOL;
    verdict(
        6,
        "PCG vs dense spectral pseudoinverse",
        ok,
        &format!("50 systems: max |delta - pinv rhs|_inf {diff_worst:.2e} (<= {TOL:e}), max |<delta, q>|/|delta|_1 {ortho_worst:.2e} (<= {TOL:e})"),
    );
}

#[test]
fn criterion_07_remark_identity() {
    const TOL: f64 = 1e-8;
    let mut r = rng(7);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let plan = random_plan(&mut r, 3, 3, 0.05);
        let phi = random_vector(&mut r, 3, 0.05);
        worst = worst.max(remark_identity_check(&plan, 1.0, &phi, 1e-14, 100).unwrap());
    }
    verdict(
        7,
        "closed form of J(y)^-1 [J(y) - J(eta)] (phi, 0)",
        worst <= TOL,
        &format!("20 plans: max deviation {worst:.2e} (<= {TOL:e})"),
    );
}

#[test]
fn criterion_08_varah_suite() {
    let mut r = rng(8);
    let mut violations = 0;
    let mut tightest: f64 = 0.0;
    for _ in 0..100 {
        let size = r.random_range(2..=16);
        let b = random_dominant(&mut r, size, 0.01);
        let bound = varah_certificate(&b).unwrap();
        let truth = matrix_inf_norm(&dense_inverse(&b));
        if truth > bound * (1.0 + 1e-12) {
            violations += 1;
        }
        tightest = tightest.max(truth / bound);
    }

    let b = array![[3.0, -1.0], [-1.0, 3.0]];
    let bound = varah_certificate(&b).unwrap();
    let truth = matrix_inf_norm(&dense_inverse(&b));
    let attained = (bound - 0.5).abs() <= 1e-15 && (truth - 0.5).abs() <= 1e-15;

    let mut chain_failures = 0;
    for _ in 0..20 {
        let n = r.random_range(1..=8);
        let plan = random_plan(&mut r, n, n, 0.05);
        let delta = plan.min_entry();
        let bound = varah_certificate(&shifted_saddle_matrix(&plan, delta).unwrap()).unwrap();
        // every row margin is exactly 2 delta, so allow rounding in the margin
        if bound > (1.0 + 1e-12) / (2.0 * delta) {
            chain_failures += 1;
        }
    }
    let ok = violations == 0 && attained && chain_failures == 0;
    verdict(
        8,
        "Varah bound and the shifted saddle chain",
        ok,
        &format!(
            "100 matrices: {violations} violations (max truth/bound {tightest:.4}); [[3,-1],[-1,3]]: bound {bound}, \
             truth {truth}; saddle chain: {chain_failures}/20 failures"
        ),
    );
}

#[test]
fn criterion_09_omega_certificate() {
    const UPPER: f64 = 20.399;
    const UPPER_TOL: f64 = 1e-3;
    const LOWER_TOL: f64 = 1e-12;
    let uniform = TransportPlan::new(Array2::from_elem((2, 2), 0.25)).unwrap();
    let cert = omega_bound(&uniform, 1.0).unwrap();
    let mut r = rng(9);
    let ordered = (0..20).all(|_| {
        let n = r.random_range(1..=6);
        let plan = random_plan(&mut r, n, n, 0.05);
        let c = omega_bound(&plan, r.random_range(0.5..2.0)).unwrap();
        c.omega_upper >= c.omega_lower
    }) && cert.omega_upper >= cert.omega_lower;
    let ok =
        (cert.omega_upper - UPPER).abs() <= UPPER_TOL && (cert.omega_lower - (E - 1.0)).abs() <= LOWER_TOL && ordered;
    verdict(
        9,
        "omega bound on the uniform 2x2 plan",
        ok,
        &format!(
            "upper {:.6} (expected {UPPER} +- {UPPER_TOL:e}; (e-1)(1+4e) = {:.6}), lower {:.12} (e - 1 = {:.12}), \
             upper >= lower on all plans: {ordered}",
            cert.omega_upper,
            (E - 1.0) * (1.0 + 4.0 * E),
            cert.omega_lower,
            E - 1.0
        ),
    );
}

#[test]
fn criterion_10_epsilon_sweep_monotonicity() {
    const FACTORS: [f64; 3] = [1.0, 0.1, 0.01];
    const GAMMA: f64 = 0.1;
    const TOL: f64 = 1e-12;
    const CG_MAX: usize = 66;
    let grid = GridSpec::square(28).unwrap();
    let cost = squared_euclidean_cost(&grid, &grid).unwrap();
    let q50 = median_cost_scale(&cost).unwrap();
    let mut ok = true;
    let mut lines = Vec::new();
    for seed in [0u64, 10, 20] {
        let (a, b, _) = blob_pair(seed, GAMMA).unwrap();
        let mut totals = Vec::new();
        for factor in FACTORS {
            let eps = factor * q50;
            let kernel = gibbs_kernel(&cost, eps).unwrap();
            let out = solve(
                &kernel,
                &a,
                &b,
                &config(eps, SolverKind::NewtonPrimal, TOL, CG_MAX),
                None,
            )
            .unwrap();
            ok &= out.converged();
            totals.push(out.record.total_cg_iters());
        }
        ok &= totals.windows(2).all(|w| w[0] <= w[1]);
        lines.push(format!("seed {seed}: {totals:?}"));
    }
    verdict(
        10,
        "total CG iterations nondecreasing as eps = q50 * {1, 0.1, 0.01}",
        ok,
        &format!(
            "blob pairs, gamma {GAMMA}, all converged and monotone: {}",
            lines.join("; ")
        ),
    );
}

#[test]
fn criterion_11_primal_dual_agreement() {
    const REL_TOL: f64 = 1e-9;
    let eps = 1e-3;
    let (a, b, grid) = gaussian_pair_2d(20).unwrap();
    let (_, kernel) = grid_kernel(&grid, eps);
    let primal = solve(&kernel, &a, &b, &config(eps, SolverKind::NewtonPrimal, 1e-13, 34), None).unwrap();
    let dual = solve(&kernel, &a, &b, &config(eps, SolverKind::NewtonDual, 1e-13, 34), None).unwrap();
    let vp = primal.record.violations();
    let vd = dual.record.violations();
    let rel: Vec<f64> = vp
        .iter()
        .zip(&vd)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()))
        .collect();
    let worst = rel.iter().copied().fold(0.0, f64::max);
    let first_bad = rel.iter().position(|&e| e > REL_TOL);
    let ok = vp.len() == vd.len() && worst <= REL_TOL;
    verdict(
        11,
        "primal and dual Newton forms give the same violations",
        ok,
        &format!(
            "{} vs {} rows, max relative difference {worst:.2e} (<= {REL_TOL:e}), first above tolerance at iteration {first_bad:?}",
            vp.len(),
            vd.len()
        ),
    );
}
