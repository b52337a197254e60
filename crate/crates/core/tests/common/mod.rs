//! Dense oracles and random instances shared by the integration tests.
#![allow(dead_code)]

use ndarray::{Array1, Array2};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sinkhorn_newton::{DualVector, Histogram, TransportPlan};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Strictly positive plan of unit mass with entries spread over `[lo, 1]`
/// before normalization.
pub fn random_plan(rng: &mut ChaCha8Rng, n: usize, m: usize, lo: f64) -> TransportPlan {
    let raw = Array2::from_shape_fn((n, m), |_| rng.random_range(lo..1.0));
    let mass = raw.sum();
    TransportPlan::new(raw / mass).unwrap()
}

pub fn random_histogram(rng: &mut ChaCha8Rng, n: usize) -> Histogram {
    Histogram::normalized((0..n).map(|_| rng.random_range(0.05..1.0)).collect()).unwrap()
}

pub fn random_vector(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Array1<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

pub fn stack(x: &DualVector) -> Array1<f64> {
    x.f.iter().chain(x.g.iter()).copied().collect()
}

pub fn unstack(x: &Array1<f64>, n: usize) -> DualVector {
    DualVector::new(
        x.slice(ndarray::s![..n]).to_owned(),
        x.slice(ndarray::s![n..]).to_owned(),
    )
}

pub fn inf_norm(x: &Array1<f64>) -> f64 {
    x.fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Cyclic Jacobi rotations; returns eigenvalues and eigenvectors as columns.
pub fn symmetric_eigen(a: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = a.nrows();
    let mut a = a.clone();
    let mut v = Array2::eye(n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[[i, j]].powi(2))
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[[p, q]].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * a[[p, q]]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    (a.diag().to_owned(), v)
}

/// Moore-Penrose pseudoinverse of a symmetric matrix, dropping eigenvalues
/// below `rel_cut` times the largest.
pub fn spectral_pinv(a: &Array2<f64>, rel_cut: f64) -> Array2<f64> {
    let (vals, vecs) = symmetric_eigen(a);
    let top = vals.fold(0.0_f64, |m, v| m.max(v.abs()));
    let n = a.nrows();
    let mut out = Array2::zeros((n, n));
    for (k, &lam) in vals.iter().enumerate() {
        if lam.abs() > rel_cut * top {
            let col = vecs.column(k);
            for i in 0..n {
                for j in 0..n {
                    out[[i, j]] += col[i] * col[j] / lam;
                }
            }
        }
    }
    out
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn dense_inverse(a: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut inv = Array2::eye(n);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[[i, col]].abs().total_cmp(&m[[j, col]].abs()))
            .unwrap();
        for k in 0..n {
            m.swap([col, k], [pivot, k]);
            inv.swap([col, k], [pivot, k]);
        }
        let d = m[[col, col]];
        assert!(d != 0.0, "singular matrix");
        for k in 0..n {
            m[[col, k]] /= d;
            inv[[col, k]] /= d;
        }
        for row in 0..n {
            if row != col {
                let f = m[[row, col]];
                if f != 0.0 {
                    for k in 0..n {
                        m[[row, k]] -= f * m[[col, k]];
                        inv[[row, k]] -= f * inv[[col, k]];
                    }
                }
            }
        }
    }
    inv
}

/// Induced infinity norm (maximum absolute row sum).
pub fn matrix_inf_norm(a: &Array2<f64>) -> f64 {
    a.rows()
        .into_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Random strictly diagonally dominant matrix with dominance margin at
/// least `margin` in every row.
pub fn random_dominant(rng: &mut ChaCha8Rng, size: usize, margin: f64) -> Array2<f64> {
    let mut b: Array2<f64> = Array2::from_shape_fn((size, size), |_| rng.random_range(-1.0..1.0));
    for i in 0..size {
        let off: f64 = (0..size).filter(|&j| j != i).map(|j| b[[i, j]].abs()).sum();
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        b[[i, i]] = sign * (off + margin + rng.random_range(0.0..1.0));
    }
    b
}

/// Residual `F(f, g) = (a - P 1, b - P^T 1)` with
/// `P = diag(e^{-f/eps}) K diag(e^{-g/eps})`, evaluated independently of the
/// library.
pub fn residual_of_duals(
    kernel: &Array2<f64>,
    eps: f64,
    a: &Array1<f64>,
    b: &Array1<f64>,
    f: &Array1<f64>,
    g: &Array1<f64>,
) -> Array1<f64> {
    let (n, m) = kernel.dim();
    let mut rows = Array1::<f64>::zeros(n);
    let mut cols = Array1::<f64>::zeros(m);
    for i in 0..n {
        for j in 0..m {
            let p = (-f[i] / eps).exp() * kernel[[i, j]] * (-g[j] / eps).exp();
            rows[i] += p;
            cols[j] += p;
        }
    }
    a.iter()
        .zip(rows.iter())
        .map(|(x, y)| x - y)
        .chain(b.iter().zip(cols.iter()).map(|(x, y)| x - y))
        .collect()
}
