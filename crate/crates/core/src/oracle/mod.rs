//! Exact diagonalization of electron-boson Hamiltonians on
//! (determinant basis) x (truncated Fock space per mode).

mod fermion;
mod lanczos;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub use fermion::DeterminantBasis;
pub use lanczos::{lowest_eigenpair, LanczosOptions};

use crate::entanglement::von_neumann_entropy;
use crate::error::{Error, Result};
use crate::model::ElectronBosonSystem;

pub const DEFAULT_DIMENSION_LIMIT: usize = 2_000_000;
/// Operators at or below this dimension are diagonalized densely.
pub const DENSE_THRESHOLD: usize = 1500;

/// Product space of an electronic basis and one truncated Fock space per
/// mode. Vectors are indexed `(e, n_0, n_1, ...)` with the last mode fastest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FockSpace {
    pub n_electronic: usize,
    pub boson_dims: Vec<usize>,
}

impl FockSpace {
    pub fn new(n_electronic: usize, boson_dims: Vec<usize>) -> Self {
        Self {
            n_electronic,
            boson_dims,
        }
    }

    pub fn boson_dim(&self) -> usize {
        self.boson_dims.iter().product()
    }

    pub fn dim(&self) -> usize {
        self.n_electronic * self.boson_dim()
    }

    /// Distance in the flat boson index between consecutive levels of `mode`.
    pub fn stride(&self, mode: usize) -> usize {
        self.boson_dims[mode + 1..].iter().product()
    }
}

/// Compressed sparse rows.
#[derive(Debug, Clone, Default)]
pub struct Csr {
    pub n: usize,
    pub row_start: Vec<usize>,
    pub cols: Vec<usize>,
    pub values: Vec<f64>,
}

impl Csr {
    pub fn from_dense(m: &DMatrix<f64>, drop: f64) -> Self {
        let n = m.nrows();
        let mut out = Csr {
            n,
            row_start: vec![0],
            ..Default::default()
        };
        for i in 0..n {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v.abs() > drop {
                    out.cols.push(j);
                    out.values.push(v);
                }
            }
            out.row_start.push(out.cols.len());
        }
        out
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_start[i]..self.row_start[i + 1];
        self.cols[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }
}

/// `H_e (x) 1 + 1 (x) diag + sum_a C_a (x) (b_a + b_a^+)`.
#[derive(Debug, Clone)]
pub struct KroneckerSum {
    pub electronic: Csr,
    /// Diagonal of the boson part over the flat boson index.
    pub boson_diagonal: Vec<f64>,
    /// Per mode: electronic factor of the bilinear coupling.
    pub couplings: Vec<Csr>,
}

#[derive(Debug, Clone)]
pub enum Storage {
    Dense(DMatrix<f64>),
    Factored(KroneckerSum),
}

/// An operator on a [`FockSpace`].
#[derive(Debug, Clone)]
pub struct FockSpaceOperator {
    pub space: FockSpace,
    pub storage: Storage,
}

impl FockSpaceOperator {
    pub fn dense(space: FockSpace, matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != space.dim() || matrix.ncols() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                found: matrix.nrows(),
            });
        }
        Ok(Self {
            space,
            storage: Storage::Dense(matrix),
        })
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// `y = H x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        match &self.storage {
            Storage::Dense(m) => {
                let xv = DVector::from_column_slice(x);
                let yv = m * xv;
                y.copy_from_slice(yv.as_slice());
            }
            Storage::Factored(k) => apply_factored(&self.space, k, x, y),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match &self.storage {
            Storage::Dense(m) => m.clone(),
            Storage::Factored(_) => {
                let n = self.dim();
                let mut out = DMatrix::zeros(n, n);
                let mut x = vec![0.0; n];
                let mut y = vec![0.0; n];
                for j in 0..n {
                    x[j] = 1.0;
                    self.apply(&x, &mut y);
                    out.set_column(j, &DVector::from_column_slice(&y));
                    x[j] = 0.0;
                }
                out
            }
        }
    }

    /// Largest `|H_ij - H_ji|`.
    pub fn asymmetry(&self) -> f64 {
        match &self.storage {
            Storage::Dense(m) => (m - m.transpose()).amax(),
            Storage::Factored(k) => {
                let mut worst = csr_asymmetry(&k.electronic);
                for c in &k.couplings {
                    worst = worst.max(csr_asymmetry(c));
                }
                worst
            }
        }
    }

    pub fn check_hermitian(&self) -> Result<()> {
        let asymmetry = self.asymmetry();
        if asymmetry > 1e-10 {
            return Err(Error::NotHermitian {
                what: "Fock-space operator".into(),
                asymmetry,
            });
        }
        Ok(())
    }
}

fn csr_asymmetry(c: &Csr) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..c.n {
        for (j, v) in c.row(i) {
            let back = c.row(j).find(|&(k, _)| k == i).map_or(0.0, |(_, w)| w);
            worst = worst.max((v - back).abs());
        }
    }
    worst
}

fn apply_factored(space: &FockSpace, k: &KroneckerSum, x: &[f64], y: &mut [f64]) {
    let nb = space.boson_dim();
    for i in 0..space.n_electronic {
        let yi = &mut y[i * nb..(i + 1) * nb];
        let xi = &x[i * nb..(i + 1) * nb];
        for ((yv, xv), d) in yi.iter_mut().zip(xi).zip(&k.boson_diagonal) {
            *yv = d * xv;
        }
        for (j, v) in k.electronic.row(i) {
            let xj = &x[j * nb..(j + 1) * nb];
            for (yv, xv) in yi.iter_mut().zip(xj) {
                *yv += v * xv;
            }
        }
        for (mode, c) in k.couplings.iter().enumerate() {
            let d = space.boson_dims[mode];
            let stride = space.stride(mode);
            for (j, v) in c.row(i) {
                let xj = &x[j * nb..(j + 1) * nb];
                apply_quadrature(xj, yi, d, stride, v);
            }
        }
    }
}

/// `y += v (b + b^+) x` on the mode with `d` levels and the given stride.
fn apply_quadrature(x: &[f64], y: &mut [f64], d: usize, stride: usize, v: f64) {
    let block = d * stride;
    for start in (0..x.len()).step_by(block) {
        for n in 1..d {
            let amp = v * (n as f64).sqrt();
            let lo = start + (n - 1) * stride;
            let hi = start + n * stride;
            for t in 0..stride {
                // <n-1| b |n> and <n| b^+ |n-1>
                y[lo + t] += amp * x[hi + t];
                y[hi + t] += amp * x[lo + t];
            }
        }
    }
}

/// Builds the untransformed Hamiltonian with `n_max` levels per mode:
/// electronic part (with dipole self-energy when enabled), `w (b^+ b + 1/2)`
/// (the 1/2 only when zero-point energy is included) and
/// `sqrt(w/2) D (b + b^+)`.
pub fn build_full_hamiltonian(system: &ElectronBosonSystem, n_max: usize) -> Result<FockSpaceOperator> {
    build_full_hamiltonian_limited(system, n_max, DEFAULT_DIMENSION_LIMIT)
}

pub fn build_full_hamiltonian_limited(
    system: &ElectronBosonSystem,
    n_max: usize,
    limit: usize,
) -> Result<FockSpaceOperator> {
    system.validate()?;
    if n_max < 1 {
        return Err(Error::Invalid("boson truncation needs n_max >= 1".into()));
    }
    let basis = DeterminantBasis::for_system(system);
    let space = FockSpace::new(basis.len(), vec![n_max + 1; system.modes.len()]);
    let dim = space
        .n_electronic.saturating_mul(space.boson_dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).unwrap_or(usize::MAX));
    if dim > limit {
        return Err(Error::DimensionLimit { dim, limit });
    }

    let mut h_e = basis.electronic_hamiltonian(system);
    let mut couplings = Vec::with_capacity(system.modes.len());
    for mode in &system.modes {
        let d = basis.one_body(&mode.coupling_matrix());
        if system.include_dse {
            h_e += &d * &d * 0.5;
        }
        couplings.push(Csr::from_dense(&(d * (0.5 * mode.omega).sqrt()), 0.0));
    }
    let zpe = system.zero_point_energy();
    let mut boson_diagonal = vec![zpe; space.boson_dim()];
    for (a, mode) in system.modes.iter().enumerate() {
        let stride = space.stride(a);
        let d = space.boson_dims[a];
        for (idx, value) in boson_diagonal.iter_mut().enumerate() {
            let n = (idx / stride) % d;
            *value += mode.omega * n as f64;
        }
    }
    let op = FockSpaceOperator {
        space,
        storage: Storage::Factored(KroneckerSum {
            electronic: Csr::from_dense(&h_e, 0.0),
            boson_diagonal,
            couplings,
        }),
    };
    op.check_hermitian()?;
    Ok(op)
}

/// Which eigensolver [`ground_state_with`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenPath {
    Auto,
    Dense,
    Lanczos,
}

pub fn ground_state(h: &FockSpaceOperator) -> Result<(f64, DVector<f64>)> {
    ground_state_with(h, EigenPath::Auto)
}

/// Lowest eigenpair with a verified residual `||H psi - E psi|| < 1e-9`.
pub fn ground_state_with(h: &FockSpaceOperator, path: EigenPath) -> Result<(f64, DVector<f64>)> {
    h.check_hermitian()?;
    let dim = h.dim();
    let dense = match path {
        EigenPath::Auto => dim <= DENSE_THRESHOLD,
        EigenPath::Dense => true,
        EigenPath::Lanczos => false,
    };
    let (energy, mut psi) = if dense {
        let m = h.to_dense();
        let eig = SymmetricEigen::new((&m + m.transpose()) * 0.5);
        let (idx, &e) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .ok_or_else(|| Error::EigenSolver("empty operator".into()))?;
        (e, eig.eigenvectors.column(idx).into_owned())
    } else {
        lowest_eigenpair(dim, |x, y| h.apply(x, y), &LanczosOptions::default())?
    };
    // fix the overall sign for reproducible output
    if let Some(pivot) = psi.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())) {
        if pivot < 0.0 {
            psi.neg_mut();
        }
    }
    let mut hpsi = vec![0.0; dim];
    h.apply(psi.as_slice(), &mut hpsi);
    let residual = hpsi
        .iter()
        .zip(psi.iter())
        .map(|(a, b)| (a - energy * b).powi(2))
        .sum::<f64>()
        .sqrt();
    if residual > 1e-9 * energy.abs().max(1.0) {
        return Err(Error::EigenSolver(format!("residual {residual:.3e} above tolerance")));
    }
    Ok((energy, psi))
}

fn check_normalized(psi: &DVector<f64>) -> Result<()> {
    let n2 = psi.norm_squared();
    if (n2 - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized(n2));
    }
    Ok(())
}

/// Reduced density matrix of one mode, tracing out the electrons and all
/// other modes.
pub fn exact_photon_rdm(psi: &DVector<f64>, space: &FockSpace, mode: usize) -> Result<DMatrix<f64>> {
    if psi.len() != space.dim() {
        return Err(Error::DimensionMismatch {
            expected: space.dim(),
            found: psi.len(),
        });
    }
    if mode >= space.boson_dims.len() {
        return Err(Error::Invalid(format!("mode {mode} out of range")));
    }
    check_normalized(psi)?;
    let d = space.boson_dims[mode];
    let stride = space.stride(mode);
    let block = d * stride;
    let mut rho = DMatrix::zeros(d, d);
    for start in (0..psi.len()).step_by(block) {
        for t in 0..stride {
            for m in 0..d {
                let a = psi[start + m * stride + t];
                if a == 0.0 {
                    continue;
                }
                for k in 0..d {
                    rho[(m, k)] += a * psi[start + k * stride + t];
                }
            }
        }
    }
    Ok(rho)
}

/// Von Neumann entropy (nats) of one mode's reduced density matrix.
pub fn exact_entropy(psi: &DVector<f64>, space: &FockSpace, mode: usize) -> Result<f64> {
    von_neumann_entropy(&exact_photon_rdm(psi, space, mode)?)
}

/// Entropy averaged over all modes.
pub fn exact_mean_entropy(psi: &DVector<f64>, space: &FockSpace) -> Result<f64> {
    let n = space.boson_dims.len();
    if n == 0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for mode in 0..n {
        total += exact_entropy(psi, space, mode)?;
    }
    Ok(total / n as f64)
}

/// Ground state of `system` at `n_max` and `n_max + step`; errors if the
/// energies differ by more than `tolerance`.
pub fn converged_ground_state(
    system: &ElectronBosonSystem,
    n_max: usize,
    step: usize,
    tolerance: f64,
) -> Result<(f64, DVector<f64>, FockSpace)> {
    let coarse = build_full_hamiltonian(system, n_max)?;
    let (e_coarse, _) = ground_state(&coarse)?;
    let fine = build_full_hamiltonian(system, n_max + step)?;
    let (e_fine, psi) = ground_state(&fine)?;
    let change = (e_coarse - e_fine).abs();
    if change > tolerance {
        return Err(Error::Truncation {
            quantity: "ground-state energy".into(),
            change,
            tolerance,
        });
    }
    Ok((e_fine, psi, fine.space))
}
