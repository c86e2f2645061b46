//! Box-constrained quasi-Newton minimization and Pulay extrapolation.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
}

/// Projected gradient: zero for components pinned at a bound with the
/// gradient pointing outward.
pub fn projected_gradient(x: &[f64], g: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(g)
        .enumerate()
        .map(|(i, (&xi, &gi))| {
            if (xi <= lower[i] && gi > 0.0) || (xi >= upper[i] && gi < 0.0) {
                0.0
            } else {
                gi
            }
        })
        .collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn clamp(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lower[i], upper[i]);
    }
}

/// Minimizes `fun` (value and gradient) inside the box `[lower, upper]`
/// by BFGS with a projected backtracking line search. Stops when the
/// projected gradient falls below `tol` or no descent is possible.
pub fn minimize_box<F>(x0: &[f64], lower: &[f64], upper: &[f64], tol: f64, max_iter: usize, mut fun: F) -> Minimum
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    clamp(&mut x, lower, upper);
    let Some((mut fx, mut g)) = fun(&x) else {
        return Minimum {
            x,
            value: f64::INFINITY,
            gradient: vec![f64::INFINITY; n],
            iterations: 0,
        };
    };
    let mut hinv = DMatrix::<f64>::identity(n, n);
    let mut iterations = 0;
    while iterations < max_iter {
        let pg = projected_gradient(&x, &g, lower, upper);
        if max_abs(&pg) < tol {
            break;
        }
        iterations += 1;
        let free: Vec<bool> = (0..n).map(|i| pg[i] != 0.0 || g[i] == 0.0).collect();
        let gv = DVector::from_fn(n, |i, _| if free[i] { g[i] } else { 0.0 });
        let mut d = -(&hinv * &gv);
        for i in 0..n {
            if !free[i] {
                d[i] = 0.0;
            }
        }
        if d.dot(&gv) >= 0.0 {
            hinv = DMatrix::identity(n, n);
            d = -gv.clone();
        }
        // backtracking on the projected path
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let mut trial: Vec<f64> = (0..n).map(|i| x[i] + step * d[i]).collect();
            clamp(&mut trial, lower, upper);
            let dx: f64 = (0..n).map(|i| (trial[i] - x[i]) * g[i]).sum();
            if let Some((ft, gt)) = fun(&trial) {
                if ft.is_finite() && ft <= fx + 1e-4 * dx.min(0.0) {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, fnew, gn)) = accepted else {
            if hinv != DMatrix::identity(n, n) {
                hinv = DMatrix::identity(n, n);
                continue;
            }
            break;
        };
        let s = DVector::from_fn(n, |i, _| xn[i] - x[i]);
        let y = DVector::from_fn(n, |i, _| gn[i] - g[i]);
        let sy = s.dot(&y);
        if sy > 1e-14 * s.norm() * y.norm() && sy > 0.0 {
            let rho = 1.0 / sy;
            let id = DMatrix::<f64>::identity(n, n);
            let a = &id - &s * y.transpose() * rho;
            let b = &id - &y * s.transpose() * rho;
            hinv = &a * &hinv * &b + &s * s.transpose() * rho;
        }
        let small = (fx - fnew).abs() < 1e-16 * fx.abs().max(1.0) && s.amax() < 1e-14;
        x = xn;
        fx = fnew;
        g = gn;
        if small {
            break;
        }
    }
    Minimum {
        x,
        value: fx,
        gradient: g,
        iterations,
    }
}

/// Pulay extrapolation on the commutator residual.
#[derive(Debug, Clone)]
pub struct Diis {
    depth: usize,
    focks: Vec<DMatrix<f64>>,
    errors: Vec<DMatrix<f64>>,
}

impl Diis {
    pub fn new(depth: usize) -> Self {
        Self {
            depth: depth.max(1),
            focks: Vec::new(),
            errors: Vec::new(),
        }
    }

    pub fn clear(&mut self) {
        self.focks.clear();
        self.errors.clear();
    }

    pub fn len(&self) -> usize {
        self.focks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.focks.is_empty()
    }

    pub fn push(&mut self, fock: DMatrix<f64>, error: DMatrix<f64>) {
        if self.focks.len() == self.depth {
            self.focks.remove(0);
            self.errors.remove(0);
        }
        self.focks.push(fock);
        self.errors.push(error);
    }

    /// Extrapolated Fock matrix, or the latest one when the subspace
    /// equations are singular.
    pub fn extrapolate(&mut self) -> DMatrix<f64> {
        loop {
            let m = self.focks.len();
            let last = self.focks.last().expect("non-empty history").clone();
            if m < 2 {
                return last;
            }
            let mut b = DMatrix::<f64>::zeros(m + 1, m + 1);
            for i in 0..m {
                for j in 0..m {
                    b[(i, j)] = self.errors[i].dot(&self.errors[j]);
                }
                b[(i, m)] = -1.0;
                b[(m, i)] = -1.0;
            }
            let scale = (0..m).map(|i| b[(i, i)]).fold(0.0, f64::max);
            if scale <= 0.0 {
                return last;
            }
            for i in 0..m {
                for j in 0..m {
                    b[(i, j)] /= scale;
                }
            }
            let mut rhs = DVector::<f64>::zeros(m + 1);
            rhs[m] = -1.0;
            let svd = b.clone().svd(true, true);
            let smin = svd.singular_values.min();
            let smax = svd.singular_values.max();
            if smin > 1e-12 * smax {
                if let Ok(c) = svd.solve(&rhs, 0.0) {
                    let mut f = DMatrix::zeros(last.nrows(), last.ncols());
                    for i in 0..m {
                        f += &self.focks[i] * c[i];
                    }
                    return f;
                }
            }
            self.focks.remove(0);
            self.errors.remove(0);
        }
    }
}
