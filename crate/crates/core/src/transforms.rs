//! Similarity-transformed (dressed) Hamiltonians for every ansatz.
//!
//! Per mode the ansatz unitary is `U = D(zeta) S(r)` (or `S(r) D(zeta)` for the
//! squeeze-first orderings), where `zeta` is either a scalar or the electronic
//! operator `sum_p zeta_p n_p` in the dipole frame. Conjugating the
//! Hamiltonian gives, per mode,
//!
//! ```text
//! H_e(X) + e^{-r} sqrt(w/2) W (b + b^+) + W^2 / 2 - (1 - dse) D^2 / 2
//!        + w cosh(2r) (b^+ b + 1/2) - w sinh(2r) (b^2 + b^+2) / 2
//! ```
//!
//! with `c_p -> X_p c_p`, `X_p = exp[kappa_p (b - b^+)]`, and the residual
//! coupling `W = D - sqrt(2w) zeta` (squeeze-first: `D - sqrt(2w) e^{-r} zeta`).
//! A [`DressedHamiltonian`] stores exactly these coefficients.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::boson::{check_squeeze, displacement_matrix, squeeze_matrix_capped, TruncatedFockBasis, DEFAULT_SQUEEZE_CAP};
use crate::error::{Error, Result};
use crate::model::{dipole_eigenbasis, ElectronBosonSystem, Eri};
use crate::oracle::{build_full_hamiltonian_limited, DeterminantBasis, FockSpace, FockSpaceOperator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnsatzKind {
    /// Plain product of a determinant and the photon vacuum.
    HfBare,
    /// Coherent state `D(z)`.
    Cs,
    /// Variational displacement `D(f lambda.D / sqrt(2w))`.
    Vt,
    /// Squeezed vacuum `S(r)`.
    Sq,
    /// `S(r) D(z)`.
    Scs,
    /// `D(z) S(r)`.
    Css,
    /// `S(r) D(f ...)`.
    Sgs,
    /// `D(f ...) S(r)`.
    Gss,
}

impl AnsatzKind {
    pub const ALL: [AnsatzKind; 8] = [
        AnsatzKind::HfBare,
        AnsatzKind::Cs,
        AnsatzKind::Vt,
        AnsatzKind::Sq,
        AnsatzKind::Scs,
        AnsatzKind::Css,
        AnsatzKind::Sgs,
        AnsatzKind::Gss,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AnsatzKind::HfBare => "hf",
            AnsatzKind::Cs => "cs",
            AnsatzKind::Vt => "vt",
            AnsatzKind::Sq => "sq",
            AnsatzKind::Scs => "scs",
            AnsatzKind::Css => "css",
            AnsatzKind::Sgs => "sgs",
            AnsatzKind::Gss => "gss",
        }
    }

    pub fn has_f(self) -> bool {
        matches!(self, AnsatzKind::Vt | AnsatzKind::Sgs | AnsatzKind::Gss)
    }

    pub fn has_eta(self) -> bool {
        self.has_f()
    }

    pub fn has_r(self) -> bool {
        matches!(
            self,
            AnsatzKind::Sq | AnsatzKind::Scs | AnsatzKind::Css | AnsatzKind::Sgs | AnsatzKind::Gss
        )
    }

    pub fn has_z(self) -> bool {
        matches!(self, AnsatzKind::Cs | AnsatzKind::Scs | AnsatzKind::Css)
    }

    /// Squeeze acts before the displacement (`U = S D`).
    pub fn squeeze_first(self) -> bool {
        matches!(self, AnsatzKind::Scs | AnsatzKind::Sgs)
    }

    /// The displacement depends on the electronic configuration.
    pub fn needs_frame(self) -> bool {
        self.has_f()
    }
}

impl fmt::Display for AnsatzKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AnsatzKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        let key = match lower.as_str() {
            "hf-bare" | "qedhf" => "hf",
            "vsq" | "vsq-qedhf" => "gss",
            other => other,
        };
        AnsatzKind::ALL
            .iter()
            .copied()
            .find(|a| a.name() == key)
            .ok_or_else(|| Error::Invalid(format!("unknown ansatz `{s}`")))
    }
}

/// Variational parameters, one entry per mode; parameters an ansatz does
/// not carry are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct VariationalParams {
    pub f: Option<Vec<f64>>,
    pub r: Option<Vec<f64>>,
    pub z: Option<Vec<f64>>,
    /// Dipole-frame eigenvalue variables, per mode and orbital.
    pub eta: Option<Vec<Vec<f64>>>,
}

impl VariationalParams {
    /// Defaults for `ansatz`: `f = 0`, `r = 0`, `z = 0`, `eta = g_p`.
    pub fn initial(ansatz: AnsatzKind, frame: &DipoleFrame) -> Self {
        let m = frame.n_modes();
        Self {
            f: ansatz.has_f().then(|| vec![0.0; m]),
            r: ansatz.has_r().then(|| vec![0.0; m]),
            z: ansatz.has_z().then(|| vec![0.0; m]),
            eta: ansatz
                .has_eta()
                .then(|| frame.eigenvalues.iter().map(|v| v.as_slice().to_vec()).collect()),
        }
    }

    pub fn validate(&self, ansatz: AnsatzKind, n_modes: usize, n_orbitals: usize, cap: f64) -> Result<()> {
        let name = ansatz.name();
        let check = |present: bool, wanted: bool, parameter: &'static str, len: Option<usize>| -> Result<()> {
            if present != wanted {
                return Err(Error::WrongAnsatz { ansatz: name, parameter });
            }
            if let Some(len) = len {
                if len != n_modes {
                    return Err(Error::DimensionMismatch {
                        expected: n_modes,
                        found: len,
                    });
                }
            }
            Ok(())
        };
        check(self.f.is_some(), ansatz.has_f(), "f", self.f.as_ref().map(Vec::len))?;
        check(self.r.is_some(), ansatz.has_r(), "r", self.r.as_ref().map(Vec::len))?;
        check(self.z.is_some(), ansatz.has_z(), "z", self.z.as_ref().map(Vec::len))?;
        check(self.eta.is_some(), ansatz.has_eta(), "eta", self.eta.as_ref().map(Vec::len))?;
        for v in [&self.f, &self.r, &self.z].into_iter().flatten().flatten() {
            if !v.is_finite() {
                return Err(Error::Invalid("non-finite variational parameter".into()));
            }
        }
        if let Some(rs) = &self.r {
            for &r in rs {
                check_squeeze(r, cap)?;
            }
        }
        if let Some(etas) = &self.eta {
            for e in etas {
                if e.len() != n_orbitals {
                    return Err(Error::DimensionMismatch {
                        expected: n_orbitals,
                        found: e.len(),
                    });
                }
                if e.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Invalid("non-finite eta".into()));
                }
            }
        }
        Ok(())
    }

    fn get(v: &Option<Vec<f64>>, a: usize) -> f64 {
        v.as_ref().map_or(0.0, |x| x[a])
    }

    pub fn f_of(&self, a: usize) -> f64 {
        Self::get(&self.f, a)
    }

    pub fn r_of(&self, a: usize) -> f64 {
        Self::get(&self.r, a)
    }

    pub fn z_of(&self, a: usize) -> f64 {
        Self::get(&self.z, a)
    }
}

/// Orbital basis in which every coupling operator is diagonal.
#[derive(Debug, Clone)]
pub struct DipoleFrame {
    /// Columns are the frame orbitals in the original basis.
    pub rotation: DMatrix<f64>,
    /// The system expressed in the frame.
    pub system: ElectronBosonSystem,
    /// Diagonal of each mode's coupling matrix in the frame.
    pub eigenvalues: Vec<DVector<f64>>,
    /// Per mode, groups of orbitals with equal coupling eigenvalue.
    pub tie_groups: Vec<Vec<Vec<usize>>>,
    /// Whether all coupling matrices are diagonal in the frame.
    pub common: bool,
}

const FRAME_TOL: f64 = 1e-8;

impl DipoleFrame {
    pub fn new(system: &ElectronBosonSystem) -> Result<Self> {
        system.validate()?;
        let n = system.n_orbitals;
        let couplings = system.coupling_matrices();
        let off_diagonal = |m: &DMatrix<f64>| {
            let mut worst = 0.0f64;
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    if i != j {
                        worst = worst.max(m[(i, j)].abs());
                    }
                }
            }
            worst
        };
        let already_diagonal = couplings.iter().all(|m| off_diagonal(m) == 0.0);
        let rotation = if already_diagonal || couplings.is_empty() {
            DMatrix::identity(n, n)
        } else if couplings.len() == 1 {
            dipole_eigenbasis(&couplings[0])?.1
        } else {
            // a generic combination separates the joint eigenspaces
            let mut combo = DMatrix::zeros(n, n);
            for (a, m) in couplings.iter().enumerate() {
                combo += m * (1.0 / (1.0 + a as f64 * 0.618_033_988_749_895));
            }
            dipole_eigenbasis(&combo)?.1
        };
        let rotated = system.rotated(&rotation);
        let mut eigenvalues = Vec::new();
        let mut tie_groups = Vec::new();
        let mut common = true;
        for mode in &rotated.modes {
            let m = mode.coupling_matrix();
            let scale = 1.0 + m.amax();
            if off_diagonal(&m) > FRAME_TOL * scale {
                common = false;
            }
            let diag = m.diagonal();
            let mut groups: Vec<Vec<usize>> = Vec::new();
            for p in 0..n {
                match groups.iter_mut().find(|g| (diag[g[0]] - diag[p]).abs() <= 1e-10 * scale) {
                    Some(g) => g.push(p),
                    None => groups.push(vec![p]),
                }
            }
            eigenvalues.push(diag);
            tie_groups.push(groups);
        }
        Ok(Self {
            rotation,
            system: rotated,
            eigenvalues,
            tie_groups,
            common,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.system.modes.len()
    }

    pub fn n_orbitals(&self) -> usize {
        self.system.n_orbitals
    }

    pub fn require_common(&self, ansatz: AnsatzKind) -> Result<()> {
        if ansatz.needs_frame() && !self.common {
            return Err(Error::Invalid(format!(
                "ansatz {ansatz} needs coupling operators that share an eigenbasis"
            )));
        }
        Ok(())
    }

    /// Moves a frame-basis one-body matrix back to the original orbitals.
    pub fn to_original(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        &self.rotation * m * self.rotation.transpose()
    }
}

/// Dressing coefficients of one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct DressedMode {
    pub omega: f64,
    pub r: f64,
    /// Exponent of `X_p = exp[kappa_p (b - b^+)]` per frame orbital.
    pub kappa: DVector<f64>,
    /// One-body part of the residual coupling operator `W`.
    pub residual: DMatrix<f64>,
    /// Scalar part of `W`.
    pub shift: f64,
    /// Bare coupling matrix `lambda.D` (enters the `-(1 - dse) D^2 / 2` term).
    pub coupling: DMatrix<f64>,
    /// Multiplies `W (b + b^+)`.
    pub bilinear: f64,
    /// Multiplies `b^+ b + 1/2`.
    pub photon_diagonal: f64,
    /// Multiplies `b^2 + b^+2`.
    pub photon_pair: f64,
}

impl DressedMode {
    /// Residual coupling `(1 - f) g_p` at `eta = g`, as a vector of the
    /// diagonal of `W`.
    pub fn residual_diagonal(&self) -> DVector<f64> {
        self.residual.diagonal()
    }
}

/// Coefficient set of a transformed Hamiltonian in the dipole frame. The
/// Franck-Condon factors are kept separate from the bare integrals and are
/// generated from `kappa` on demand.
#[derive(Debug, Clone)]
pub struct DressedHamiltonian {
    pub ansatz: AnsatzKind,
    pub h: DMatrix<f64>,
    pub eri: Eri,
    pub n_electrons: usize,
    pub spin: crate::model::SpinSector,
    /// Core energy minus the zero-point energy when that is stripped.
    pub constant: f64,
    pub include_dse: bool,
    /// Whether the zero-point energy has been subtracted into `constant`.
    pub zpe_stripped: bool,
    pub modes: Vec<DressedMode>,
}

impl DressedHamiltonian {
    pub fn n_orbitals(&self) -> usize {
        self.h.nrows()
    }

    /// `G_pq = prod_a exp[-(kappa_p - kappa_q)^2 / 2]`.
    pub fn one_body_factors(&self) -> DMatrix<f64> {
        let n = self.n_orbitals();
        DMatrix::from_fn(n, n, |p, q| {
            let mut x = 0.0;
            for m in &self.modes {
                let d = m.kappa[p] - m.kappa[q];
                x += d * d;
            }
            (-0.5 * x).exp()
        })
    }

    /// Franck-Condon factor of the chemist-order integral `(pq|rs)`.
    pub fn two_body_factor(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        let mut x = 0.0;
        for m in &self.modes {
            let d = m.kappa[p] - m.kappa[q] + m.kappa[r] - m.kappa[s];
            x += d * d;
        }
        (-0.5 * x).exp()
    }

    /// One-body integrals with Franck-Condon factors folded in.
    pub fn dressed_h(&self) -> DMatrix<f64> {
        self.h.component_mul(&self.one_body_factors())
    }

    /// Two-body integrals with Franck-Condon factors folded in. The result
    /// has only the pair-exchange symmetry `(pq|rs) = (rs|pq)`.
    pub fn dressed_eri(&self) -> Vec<f64> {
        let n = self.n_orbitals();
        let mut out = vec![0.0; n * n * n * n];
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        let v = self.eri.get(p, q, r, s);
                        if v != 0.0 {
                            out[((p * n + q) * n + r) * n + s] = v * self.two_body_factor(p, q, r, s);
                        }
                    }
                }
            }
        }
        out
    }
}

/// Builds the dressed Hamiltonian of `ansatz` at `params` in `frame`.
pub fn dress(frame: &DipoleFrame, ansatz: AnsatzKind, params: &VariationalParams) -> Result<DressedHamiltonian> {
    dress_capped(frame, ansatz, params, DEFAULT_SQUEEZE_CAP)
}

pub fn dress_capped(
    frame: &DipoleFrame,
    ansatz: AnsatzKind,
    params: &VariationalParams,
    cap: f64,
) -> Result<DressedHamiltonian> {
    let sys = &frame.system;
    let n = sys.n_orbitals;
    params.validate(ansatz, frame.n_modes(), n, cap)?;
    frame.require_common(ansatz)?;
    let mut modes = Vec::with_capacity(sys.modes.len());
    for (a, mode) in sys.modes.iter().enumerate() {
        let omega = mode.omega;
        let root = (2.0 * omega).sqrt();
        let r = params.r_of(a);
        let coupling = mode.coupling_matrix();
        // electronic displacement zeta_p (per orbital) or scalar z
        let zeta: DVector<f64> = match &params.eta {
            Some(eta) => DVector::from_column_slice(&eta[a]) * (params.f_of(a) / root),
            None => DVector::zeros(n),
        };
        let z = params.z_of(a);
        let (kappa, residual_zeta, residual_z) = if ansatz.squeeze_first() {
            let damp = (-r).exp();
            (zeta.clone(), &zeta * damp, z * damp)
        } else {
            (&zeta * r.exp(), zeta.clone(), z)
        };
        let residual = &coupling - DMatrix::from_diagonal(&residual_zeta) * root;
        modes.push(DressedMode {
            omega,
            r,
            kappa,
            residual,
            shift: -root * residual_z,
            coupling,
            bilinear: (0.5 * omega).sqrt() * (-r).exp(),
            photon_diagonal: omega * (2.0 * r).cosh(),
            photon_pair: -0.5 * omega * (2.0 * r).sinh(),
        });
    }
    let zpe_strip: f64 = if sys.include_zpe {
        0.0
    } else {
        sys.modes.iter().map(|m| 0.5 * m.omega).sum()
    };
    Ok(DressedHamiltonian {
        ansatz,
        h: sys.h.clone(),
        eri: sys.eri.clone(),
        n_electrons: sys.n_electrons,
        spin: sys.spin,
        constant: sys.core_energy - zpe_strip,
        include_dse: sys.include_dse,
        zpe_stripped: !sys.include_zpe,
        modes,
    })
}

fn all_modes(frame: &DipoleFrame, v: f64) -> Vec<f64> {
    vec![v; frame.n_modes()]
}

/// Coherent-state dressing with `z = <lambda.D> / sqrt(2w)` per mode.
pub fn dress_coherent(system: &ElectronBosonSystem, mean_dipole: &[f64]) -> Result<DressedHamiltonian> {
    let frame = DipoleFrame::new(system)?;
    if mean_dipole.len() != frame.n_modes() {
        return Err(Error::DimensionMismatch {
            expected: frame.n_modes(),
            found: mean_dipole.len(),
        });
    }
    let z = mean_dipole
        .iter()
        .zip(&frame.system.modes)
        .map(|(d, m)| d / (2.0 * m.omega).sqrt())
        .collect();
    let params = VariationalParams {
        z: Some(z),
        ..Default::default()
    };
    dress(&frame, AnsatzKind::Cs, &params)
}

fn with_f(frame: &DipoleFrame, ansatz: AnsatzKind, f: f64, r: f64) -> VariationalParams {
    let mut p = VariationalParams::initial(ansatz, frame);
    p.f = Some(all_modes(frame, f));
    if ansatz.has_r() {
        p.r = Some(all_modes(frame, r));
    }
    p
}

fn with_z(frame: &DipoleFrame, ansatz: AnsatzKind, z: f64, r: f64) -> VariationalParams {
    let mut p = VariationalParams::initial(ansatz, frame);
    p.z = Some(all_modes(frame, z));
    if ansatz.has_r() {
        p.r = Some(all_modes(frame, r));
    }
    p
}

pub fn dress_vt(system: &ElectronBosonSystem, f: f64) -> Result<DressedHamiltonian> {
    if !(0.0..=1.0).contains(&f) {
        log::warn!("displacement fraction f = {f} outside [0, 1]");
    }
    let frame = DipoleFrame::new(system)?;
    dress(&frame, AnsatzKind::Vt, &with_f(&frame, AnsatzKind::Vt, f, 0.0))
}

pub fn dress_squeeze(system: &ElectronBosonSystem, r: f64) -> Result<DressedHamiltonian> {
    let frame = DipoleFrame::new(system)?;
    let mut p = VariationalParams::initial(AnsatzKind::Sq, &frame);
    p.r = Some(all_modes(&frame, r));
    dress(&frame, AnsatzKind::Sq, &p)
}

pub fn dress_gss(system: &ElectronBosonSystem, f: f64, r: f64) -> Result<DressedHamiltonian> {
    let frame = DipoleFrame::new(system)?;
    dress(&frame, AnsatzKind::Gss, &with_f(&frame, AnsatzKind::Gss, f, r))
}

pub fn dress_sgs(system: &ElectronBosonSystem, f: f64, r: f64) -> Result<DressedHamiltonian> {
    let frame = DipoleFrame::new(system)?;
    dress(&frame, AnsatzKind::Sgs, &with_f(&frame, AnsatzKind::Sgs, f, r))
}

pub fn dress_scs(system: &ElectronBosonSystem, z: f64, r: f64) -> Result<DressedHamiltonian> {
    let frame = DipoleFrame::new(system)?;
    dress(&frame, AnsatzKind::Scs, &with_z(&frame, AnsatzKind::Scs, z, r))
}

pub fn dress_css(system: &ElectronBosonSystem, z: f64, r: f64) -> Result<DressedHamiltonian> {
    let frame = DipoleFrame::new(system)?;
    dress(&frame, AnsatzKind::Css, &with_z(&frame, AnsatzKind::Css, z, r))
}

fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// `1 (x) .. (x) op (x) .. (x) 1` on the boson factor.
fn embed_mode(op: &DMatrix<f64>, mode: usize, dims: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::identity(1, 1);
    for (a, &d) in dims.iter().enumerate() {
        out = if a == mode {
            kron(&out, op)
        } else {
            kron(&out, &DMatrix::identity(d, d))
        };
    }
    out
}

fn dense_space(frame: &DipoleFrame, n_max: usize) -> Result<(DeterminantBasis, FockSpace, TruncatedFockBasis)> {
    let basis = DeterminantBasis::for_system(&frame.system);
    let fock = TruncatedFockBasis::new(n_max)?;
    let space = FockSpace::new(basis.len(), vec![fock.dim(); frame.n_modes()]);
    if space.dim() > 20_000 {
        return Err(Error::DimensionLimit {
            dim: space.dim(),
            limit: 20_000,
        });
    }
    Ok((basis, space, fock))
}

/// Bare Hamiltonian of the frame system as a dense matrix.
pub fn assemble_bare(frame: &DipoleFrame, n_max: usize) -> Result<FockSpaceOperator> {
    let (_, space, _) = dense_space(frame, n_max)?;
    let op = build_full_hamiltonian_limited(&frame.system, n_max, 20_000)?;
    FockSpaceOperator::dense(space, op.to_dense())
}

/// Per-determinant sum of per-orbital values (both spins).
fn configuration_sums(basis: &DeterminantBasis, values: &DVector<f64>) -> Vec<f64> {
    (0..basis.len())
        .map(|i| {
            basis
                .occupations(i)
                .iter()
                .enumerate()
                .map(|(p, &n)| n as f64 * values[p])
                .sum()
        })
        .collect()
}

/// Dense matrix of a dressed Hamiltonian, assembled from its coefficients.
pub fn assemble(dressed: &DressedHamiltonian, frame: &DipoleFrame, n_max: usize) -> Result<FockSpaceOperator> {
    let (basis, space, fock) = dense_space(frame, n_max)?;
    let ne = basis.len();
    let nb = space.boson_dim();
    let dims = space.boson_dims.clone();

    let mut bare = frame.system.clone().with_modes(vec![])?;
    bare.core_energy = 0.0;
    let h_e = basis.electronic_hamiltonian(&bare);
    let shifts: Vec<Vec<f64>> = dressed.modes.iter().map(|m| configuration_sums(&basis, &m.kappa)).collect();

    let mut out = DMatrix::zeros(ne * nb, ne * nb);
    for i in 0..ne {
        for j in 0..ne {
            let v = h_e[(i, j)];
            if v == 0.0 {
                continue;
            }
            let mut block = DMatrix::identity(1, 1);
            for (a, s) in shifts.iter().enumerate() {
                let x = s[j] - s[i];
                let d = displacement_matrix(x, &fock);
                block = kron(&block, &d);
                debug_assert_eq!(d.nrows(), dims[a]);
            }
            let mut target = out.view_mut((i * nb, j * nb), (nb, nb));
            target += block * v;
        }
    }

    let q = fock.quadrature();
    let number = fock.number() + DMatrix::identity(fock.dim(), fock.dim()) * 0.5;
    let pair = fock.pair();
    let ident_e = DMatrix::<f64>::identity(ne, ne);
    let constant = dressed.constant;
    for (a, m) in dressed.modes.iter().enumerate() {
        let w = basis.one_body(&m.residual) + &ident_e * m.shift;
        let d = basis.one_body(&m.coupling);
        let mut quadratic = &w * &w * 0.5;
        if !dressed.include_dse {
            quadratic -= &d * &d * 0.5;
        }
        out += kron(&quadratic, &DMatrix::identity(nb, nb));
        out += kron(&(w * m.bilinear), &embed_mode(&q, a, &dims));
        let photon = &number * m.photon_diagonal + &pair * m.photon_pair;
        out += kron(&ident_e, &embed_mode(&photon, a, &dims));
    }
    for k in 0..ne * nb {
        out[(k, k)] += constant;
    }
    FockSpaceOperator::dense(space, out)
}

/// The ansatz unitary on the full space as a dense matrix: block diagonal
/// over determinants, each block a product over modes of
/// `D(zeta_I) S(r)` (or `S(r) D(zeta_I)`).
pub fn ansatz_unitary(
    frame: &DipoleFrame,
    ansatz: AnsatzKind,
    params: &VariationalParams,
    n_max: usize,
) -> Result<FockSpaceOperator> {
    params.validate(ansatz, frame.n_modes(), frame.n_orbitals(), DEFAULT_SQUEEZE_CAP)?;
    frame.require_common(ansatz)?;
    let (basis, space, fock) = dense_space(frame, n_max)?;
    let ne = basis.len();
    let nb = space.boson_dim();
    let mut per_mode_zeta = Vec::new();
    for (a, mode) in frame.system.modes.iter().enumerate() {
        let root = (2.0 * mode.omega).sqrt();
        let zeta = match &params.eta {
            Some(eta) => configuration_sums(&basis, &(DVector::from_column_slice(&eta[a]) * (params.f_of(a) / root))),
            None => vec![0.0; ne],
        };
        let z = params.z_of(a);
        per_mode_zeta.push(zeta.into_iter().map(|x| x + z).collect::<Vec<_>>());
    }
    let squeezes: Vec<DMatrix<f64>> = (0..frame.n_modes())
        .map(|a| squeeze_matrix_capped(params.r_of(a), &fock, DEFAULT_SQUEEZE_CAP))
        .collect::<Result<_>>()?;
    let mut out = DMatrix::zeros(ne * nb, ne * nb);
    for i in 0..ne {
        let mut block = DMatrix::identity(1, 1);
        for a in 0..frame.n_modes() {
            let d = displacement_matrix(per_mode_zeta[a][i], &fock);
            let u = if ansatz.squeeze_first() {
                &squeezes[a] * d
            } else {
                d * &squeezes[a]
            };
            block = kron(&block, &u);
        }
        out.view_mut((i * nb, i * nb), (nb, nb)).copy_from(&block);
    }
    FockSpaceOperator::dense(space, out)
}

/// `U^T H U` for dense operators on the same space.
pub fn numeric_similarity_transform(h: &FockSpaceOperator, u: &FockSpaceOperator) -> Result<FockSpaceOperator> {
    if h.space != u.space {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: u.dim(),
        });
    }
    let hm = h.to_dense();
    let um = u.to_dense();
    FockSpaceOperator::dense(h.space.clone(), um.transpose() * hm * um)
}

/// Restriction of a dense operator to basis states with at most `n_keep`
/// quanta in every mode.
pub fn restrict_bosons(op: &FockSpaceOperator, n_keep: usize) -> Result<DMatrix<f64>> {
    let space = &op.space;
    let nb = space.boson_dim();
    let keep: Vec<usize> = (0..space.dim())
        .filter(|&k| {
            let b = k % nb;
            (0..space.boson_dims.len()).all(|a| (b / space.stride(a)) % space.boson_dims[a] <= n_keep)
        })
        .collect();
    let m = op.to_dense();
    Ok(DMatrix::from_fn(keep.len(), keep.len(), |i, j| m[(keep[i], keep[j])]))
}

/// Lowest `k` eigenvalues of a dense operator, ascending.
pub fn lowest_eigenvalues(op: &FockSpaceOperator, k: usize) -> Vec<f64> {
    let m = op.to_dense();
    let mut vals: Vec<f64> = ((&m + m.transpose()) * 0.5).symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals.truncate(k);
    vals
}
