//! Restarted Lanczos iteration for the lowest eigenpair of a symmetric
//! operator given only through its action on vectors.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub struct LanczosOptions {
    pub krylov_dim: usize,
    pub max_restarts: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            krylov_dim: 30,
            max_restarts: 400,
            tolerance: 1e-9,
            seed: 7,
        }
    }
}

/// Lowest eigenpair of the operator `apply(x, y)` (`y = A x`, `y` zeroed on
/// entry) by thick-restart Lanczos: each cycle extends an orthonormal basis
/// with Krylov vectors, solves the projected problem and restarts from the
/// lowest few Ritz vectors plus the residual direction. The residual
/// `||A v - E v||` is checked explicitly.
pub fn lowest_eigenpair<F>(dim: usize, apply: F, options: &LanczosOptions) -> Result<(f64, DVector<f64>)>
where
    F: Fn(&[f64], &mut [f64]),
{
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut start: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
    normalize(&mut start);
    let m = options.krylov_dim.min(dim).max(1);
    let keep = (m / 4).clamp(1, 8).min(m.saturating_sub(1)).max(if m > 1 { 1 } else { 0 });
    let mut w = vec![0.0; dim];
    let mut best = f64::INFINITY;
    let mut residual = f64::INFINITY;

    // basis vectors, the projected matrix on them, and how many have been
    // multiplied by A
    let mut basis: Vec<Vec<f64>> = vec![start];
    let mut h = DMatrix::<f64>::zeros(m, m);
    let mut applied = 0usize;

    for _ in 0..options.max_restarts {
        while applied < basis.len() {
            let j = applied;
            w.iter_mut().for_each(|x| *x = 0.0);
            apply(&basis[j], &mut w);
            applied += 1;
            for i in 0..=j {
                let c = dot(&w, &basis[i]);
                h[(i, j)] = c;
                h[(j, i)] = c;
            }
            if basis.len() == m {
                break;
            }
            for _ in 0..2 {
                for q in &basis {
                    let c = dot(&w, q);
                    axpy(-c, q, &mut w);
                }
            }
            let b = norm(&w);
            if b < 1e-14 {
                break;
            }
            basis.push(w.iter().map(|x| x / b).collect());
        }
        let k = applied;
        let eig = SymmetricEigen::new(h.view((0, 0), (k, k)).into_owned());
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let ritz_vector = |col: usize| {
            let y = eig.eigenvectors.column(col);
            let mut out = vec![0.0; dim];
            for (i, q) in basis.iter().enumerate().take(k) {
                axpy(y[i], q, &mut out);
            }
            out
        };
        let mut x = ritz_vector(order[0]);
        normalize(&mut x);
        w.iter_mut().for_each(|v| *v = 0.0);
        apply(&x, &mut w);
        let energy = dot(&w, &x);
        axpy(-energy, &x, &mut w);
        residual = norm(&w);
        best = energy;
        if residual < options.tolerance {
            return Ok((energy, DVector::from_vec(x)));
        }
        // thick restart: lowest Ritz vectors and the residual direction
        let p = keep.min(k);
        let mut kept: Vec<Vec<f64>> = Vec::with_capacity(m);
        kept.push(x);
        for &col in order.iter().skip(1).take(p.saturating_sub(1)) {
            kept.push(ritz_vector(col));
        }
        let mut r = w.clone();
        for _ in 0..2 {
            for q in &kept {
                let c = dot(&r, q);
                axpy(-c, q, &mut r);
            }
        }
        let rn = norm(&r);
        // Ritz vectors are not A-multiplied again: their projected block is
        // diagonal and their couplings to new vectors come from the dots
        h.fill(0.0);
        h[(0, 0)] = energy;
        for (i, &col) in order.iter().enumerate().skip(1).take(p.saturating_sub(1)) {
            h[(i, i)] = eig.eigenvalues[col];
        }
        let n_kept = kept.len();
        basis = kept;
        applied = n_kept;
        if rn > 1e-14 {
            basis.push(r.iter().map(|v| v / rn).collect());
        }
    }
    Err(Error::EigenSolver(format!(
        "Lanczos did not converge: E = {best}, residual {residual:.3e}"
    )))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn normalize(a: &mut [f64]) {
    let n = norm(a);
    a.iter_mut().for_each(|x| *x /= n);
}

fn axpy(c: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += c * xi);
}
