//! Mean-field energy of a dressed Hamiltonian in a single determinant times
//! the photon vacuum, its Fock matrix and its parameter derivatives.
//!
//! `rho` is the spatial one-particle density `C_occ C_occ^T`; `s` is the
//! number of electrons per occupied orbital (2 closed shell, 1 polarized).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transforms::{AnsatzKind, DipoleFrame, DressedHamiltonian, DressedMode, VariationalParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct EnergyDecomposition {
    /// Dressed one- and two-electron energy.
    pub electronic: f64,
    /// Residual coupling energy `<W^2>/2 - (1 - dse) <D^2>/2`.
    pub dse_residual: f64,
    /// `w cosh(2r) / 2` per mode (less `w/2` when zero-point energy is stripped).
    pub photon: f64,
    /// Core energy.
    pub constant: f64,
    pub total: f64,
}

fn check_shape(rho: &DMatrix<f64>, dressed: &DressedHamiltonian) -> Result<()> {
    let n = dressed.n_orbitals();
    if rho.nrows() != n || rho.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: rho.nrows(),
        });
    }
    Ok(())
}

fn degeneracy(dressed: &DressedHamiltonian) -> f64 {
    dressed.spin.degeneracy()
}

/// `sum_pq s h_pq G_pq rho_pq + 1/2 sum (pq|rs) G_pqrs (s^2 rho_pq rho_rs - s rho_ps rho_rq)`.
pub fn electronic_energy(rho: &DMatrix<f64>, dressed: &DressedHamiltonian) -> Result<f64> {
    check_shape(rho, dressed)?;
    let s = degeneracy(dressed);
    let n = dressed.n_orbitals();
    let one = s * dressed.dressed_h().component_mul(rho).sum();
    let v = dressed.dressed_eri();
    let mut two = 0.0;
    for p in 0..n {
        for q in 0..n {
            for r in 0..n {
                for t in 0..n {
                    let x = v[((p * n + q) * n + r) * n + t];
                    if x != 0.0 {
                        two += x * (s * s * rho[(p, q)] * rho[(r, t)] - s * rho[(p, t)] * rho[(r, q)]);
                    }
                }
            }
        }
    }
    Ok(one + 0.5 * two)
}

/// `<O^2>` for the one-body operator `O = sum m_pq E_pq + c` in the determinant.
fn square_expectation(m: &DMatrix<f64>, c: f64, rho: &DMatrix<f64>, s: f64) -> f64 {
    let mr = m * rho;
    let t = mr.trace();
    s * s * t * t + s * (m * &mr).trace() - s * (&mr * &mr).trace() + 2.0 * c * s * t + c * c
}

fn mode_energy(m: &DressedMode, rho: &DMatrix<f64>, s: f64, include_dse: bool) -> f64 {
    let mut e = 0.5 * square_expectation(&m.residual, m.shift, rho, s);
    if !include_dse {
        e -= 0.5 * square_expectation(&m.coupling, 0.0, rho, s);
    }
    e
}

pub fn total_energy(rho: &DMatrix<f64>, dressed: &DressedHamiltonian) -> Result<EnergyDecomposition> {
    let electronic = electronic_energy(rho, dressed)?;
    let s = degeneracy(dressed);
    let mut dse_residual = 0.0;
    let mut photon = 0.0;
    for m in &dressed.modes {
        dse_residual += mode_energy(m, rho, s, dressed.include_dse);
        photon += 0.5 * m.photon_diagonal;
    }
    // report the photon energy net of the stripped zero-point energy
    let zpe: f64 = dressed.modes.iter().map(|m| 0.5 * m.omega).sum();
    let (photon, constant) = if dressed.zpe_stripped {
        (photon - zpe, dressed.constant + zpe)
    } else {
        (photon, dressed.constant)
    };
    Ok(EnergyDecomposition {
        electronic,
        dse_residual,
        photon,
        constant,
        total: electronic + dse_residual + photon + constant,
    })
}

/// `F = (1/s) dE/d rho`.
pub fn fock_matrix(rho: &DMatrix<f64>, dressed: &DressedHamiltonian) -> Result<DMatrix<f64>> {
    check_shape(rho, dressed)?;
    let s = degeneracy(dressed);
    let n = dressed.n_orbitals();
    let mut f = dressed.dressed_h();
    let v = dressed.dressed_eri();
    for p in 0..n {
        for q in 0..n {
            for r in 0..n {
                for t in 0..n {
                    let x = v[((p * n + q) * n + r) * n + t];
                    if x != 0.0 {
                        f[(p, q)] += s * x * rho[(r, t)];
                        f[(p, t)] -= x * rho[(r, q)];
                    }
                }
            }
        }
    }
    for m in &dressed.modes {
        f += square_fock(&m.residual, m.shift, rho, s) * 0.5;
        if !dressed.include_dse {
            f -= square_fock(&m.coupling, 0.0, rho, s) * 0.5;
        }
    }
    Ok((&f + f.transpose()) * 0.5)
}

/// `(1/s) d<O^2>/d rho`.
fn square_fock(m: &DMatrix<f64>, c: f64, rho: &DMatrix<f64>, s: f64) -> DMatrix<f64> {
    let t = (m * rho).trace();
    m * (2.0 * s * t + 2.0 * c) + m * m - m * rho * m * 2.0
}

/// Derivatives of the energy with respect to the dressing coefficients.
#[derive(Debug, Clone)]
pub struct RawGradients {
    /// `dE/d kappa_{a,k}`.
    pub kappa: Vec<DVector<f64>>,
    /// `dE/d W_{a,kk}` (diagonal of the residual coupling).
    pub residual: Vec<DVector<f64>>,
    /// `dE/d c_a` (scalar shift of the residual coupling).
    pub shift: Vec<f64>,
    /// Explicit `dE/d r_a` of the photon energy.
    pub photon_r: Vec<f64>,
}

pub fn raw_gradients(rho: &DMatrix<f64>, dressed: &DressedHamiltonian) -> Result<RawGradients> {
    check_shape(rho, dressed)?;
    let s = degeneracy(dressed);
    let n = dressed.n_orbitals();
    let n_modes = dressed.modes.len();
    let mut kappa = vec![DVector::zeros(n); n_modes];

    let g1 = dressed.one_body_factors();
    for p in 0..n {
        for q in 0..n {
            let e = s * dressed.h[(p, q)] * rho[(p, q)] * g1[(p, q)];
            if e == 0.0 {
                continue;
            }
            for (a, m) in dressed.modes.iter().enumerate() {
                let d = m.kappa[p] - m.kappa[q];
                kappa[a][p] -= d * e;
                kappa[a][q] += d * e;
            }
        }
    }
    for p in 0..n {
        for q in 0..n {
            for r in 0..n {
                for t in 0..n {
                    let x = dressed.eri.get(p, q, r, t);
                    if x == 0.0 {
                        continue;
                    }
                    let e = 0.5
                        * x
                        * dressed.two_body_factor(p, q, r, t)
                        * (s * s * rho[(p, q)] * rho[(r, t)] - s * rho[(p, t)] * rho[(r, q)]);
                    for (a, m) in dressed.modes.iter().enumerate() {
                        let d = m.kappa[p] - m.kappa[q] + m.kappa[r] - m.kappa[t];
                        kappa[a][p] -= d * e;
                        kappa[a][q] += d * e;
                        kappa[a][r] -= d * e;
                        kappa[a][t] += d * e;
                    }
                }
            }
        }
    }

    let mut residual = Vec::with_capacity(n_modes);
    let mut shift = Vec::with_capacity(n_modes);
    let mut photon_r = Vec::with_capacity(n_modes);
    for m in &dressed.modes {
        let w = &m.residual;
        let t = (w * rho).trace();
        let wr = w * rho;
        let rw = rho * w;
        let rwr = rho * w * rho;
        residual.push(DVector::from_fn(n, |k, _| {
            s * s * t * rho[(k, k)] + 0.5 * s * (wr[(k, k)] + rw[(k, k)]) - s * rwr[(k, k)] + m.shift * s * rho[(k, k)]
        }));
        shift.push(s * t + m.shift);
        photon_r.push(m.omega * (2.0 * m.r).sinh());
    }
    Ok(RawGradients {
        kappa,
        residual,
        shift,
        photon_r,
    })
}

/// A free coordinate of the parameter optimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coord {
    F(usize),
    R(usize),
    Z(usize),
    /// Tie group `g` of mode `a`.
    Eta(usize, usize),
}

/// Which parameter families are held fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Frozen {
    pub f: bool,
    pub r: bool,
    pub z: bool,
    pub eta: bool,
}

/// Ordered list of free coordinates for an ansatz.
#[derive(Debug, Clone)]
pub struct ParamLayout {
    pub ansatz: AnsatzKind,
    pub coords: Vec<Coord>,
    pub tie_groups: Vec<Vec<Vec<usize>>>,
    pub omegas: Vec<f64>,
}

impl ParamLayout {
    pub fn new(ansatz: AnsatzKind, frame: &DipoleFrame, frozen: Frozen) -> Self {
        let mut coords = Vec::new();
        for a in 0..frame.n_modes() {
            if ansatz.has_f() && !frozen.f {
                coords.push(Coord::F(a));
            }
            if ansatz.has_r() && !frozen.r {
                coords.push(Coord::R(a));
            }
            if ansatz.has_z() && !frozen.z {
                coords.push(Coord::Z(a));
            }
            if ansatz.has_eta() && !frozen.eta {
                for g in 0..frame.tie_groups[a].len() {
                    coords.push(Coord::Eta(a, g));
                }
            }
        }
        Self {
            ansatz,
            coords,
            tie_groups: frame.tie_groups.clone(),
            omegas: frame.system.modes.iter().map(|m| m.omega).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn pack(&self, p: &VariationalParams) -> Vec<f64> {
        self.coords
            .iter()
            .map(|c| match *c {
                Coord::F(a) => p.f_of(a),
                Coord::R(a) => p.r_of(a),
                Coord::Z(a) => p.z_of(a),
                Coord::Eta(a, g) => {
                    let group = &self.tie_groups[a][g];
                    let eta = &p.eta.as_ref().expect("eta present")[a];
                    group.iter().map(|&k| eta[k]).sum::<f64>() / group.len() as f64
                }
            })
            .collect()
    }

    pub fn unpack(&self, x: &[f64], base: &VariationalParams) -> VariationalParams {
        let mut p = base.clone();
        for (c, &v) in self.coords.iter().zip(x) {
            match *c {
                Coord::F(a) => p.f.as_mut().expect("f present")[a] = v,
                Coord::R(a) => p.r.as_mut().expect("r present")[a] = v,
                Coord::Z(a) => p.z.as_mut().expect("z present")[a] = v,
                Coord::Eta(a, g) => {
                    let eta = &mut p.eta.as_mut().expect("eta present")[a];
                    for &k in &self.tie_groups[a][g] {
                        eta[k] = v;
                    }
                }
            }
        }
        p
    }

    pub fn bounds(&self, cap: f64, f_bounds: (f64, f64)) -> (Vec<f64>, Vec<f64>) {
        self.coords
            .iter()
            .map(|c| match c {
                Coord::F(_) => f_bounds,
                Coord::R(_) => (-cap, cap),
                Coord::Z(_) | Coord::Eta(..) => (f64::NEG_INFINITY, f64::INFINITY),
            })
            .unzip()
    }

    /// Gradient with respect to the free coordinates; tied `eta` entries
    /// are summed.
    pub fn gradient(&self, g: &ParamGradients) -> Vec<f64> {
        self.coords
            .iter()
            .map(|&c| match c {
                Coord::F(a) => g.f.as_ref().expect("f present")[a],
                Coord::R(a) => g.r.as_ref().expect("r present")[a],
                Coord::Z(a) => g.z.as_ref().expect("z present")[a],
                Coord::Eta(a, k) => {
                    let eta = &g.eta.as_ref().expect("eta present")[a];
                    self.tie_groups[a][k].iter().map(|&p| eta[p]).sum()
                }
            })
            .collect()
    }
}

/// Energy derivatives with respect to the variational parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGradients {
    pub f: Option<Vec<f64>>,
    pub r: Option<Vec<f64>>,
    pub z: Option<Vec<f64>>,
    pub eta: Option<Vec<Vec<f64>>>,
}

/// Chain rule from the dressing-coefficient derivatives to the parameters.
///
/// Displace-first: `kappa = f eta e^r / sqrt(2w)`, `W = D - f eta`, `c = -sqrt(2w) z`.
/// Squeeze-first: `kappa = f eta / sqrt(2w)`, `W = D - f e^{-r} eta`, `c = -sqrt(2w) e^{-r} z`.
pub fn param_gradients(
    rho: &DMatrix<f64>,
    params: &VariationalParams,
    dressed: &DressedHamiltonian,
) -> Result<ParamGradients> {
    let ansatz = dressed.ansatz;
    params.validate(ansatz, dressed.modes.len(), dressed.n_orbitals(), f64::INFINITY)?;
    let raw = raw_gradients(rho, dressed)?;
    let sf = ansatz.squeeze_first();
    let n = dressed.n_orbitals();
    let n_modes = dressed.modes.len();
    let mut f = vec![0.0; n_modes];
    let mut r = vec![0.0; n_modes];
    let mut z = vec![0.0; n_modes];
    let mut eta = vec![vec![0.0; n]; n_modes];
    for (a, m) in dressed.modes.iter().enumerate() {
        let root = (2.0 * m.omega).sqrt();
        let fa = params.f_of(a);
        let ra = params.r_of(a);
        let dk = &raw.kappa[a];
        let dw = &raw.residual[a];
        let (k_scale, w_scale) = if sf { (1.0, (-ra).exp()) } else { (ra.exp(), 1.0) };
        r[a] = raw.photon_r[a];
        if let Some(etas) = &params.eta {
            let e = &etas[a];
            for k in 0..n {
                f[a] += dk[k] * k_scale * e[k] / root - dw[k] * w_scale * e[k];
                eta[a][k] = dk[k] * fa * k_scale / root - dw[k] * fa * w_scale;
                r[a] += if sf {
                    dw[k] * fa * w_scale * e[k]
                } else {
                    dk[k] * fa * k_scale * e[k] / root
                };
            }
        }
        if ansatz.has_z() {
            let damp = if sf { (-ra).exp() } else { 1.0 };
            z[a] = -root * damp * raw.shift[a];
            if sf {
                r[a] -= m.shift * raw.shift[a];
            }
        }
    }
    Ok(ParamGradients {
        f: ansatz.has_f().then_some(f),
        r: ansatz.has_r().then_some(r),
        z: ansatz.has_z().then_some(z),
        eta: ansatz.has_eta().then_some(eta),
    })
}

fn require(ansatz: AnsatzKind, present: bool, parameter: &'static str) -> Result<()> {
    if present {
        Ok(())
    } else {
        Err(Error::WrongAnsatz {
            ansatz: ansatz.name(),
            parameter,
        })
    }
}

/// `dE/df` per mode.
pub fn grad_f(rho: &DMatrix<f64>, params: &VariationalParams, dressed: &DressedHamiltonian) -> Result<Vec<f64>> {
    require(dressed.ansatz, dressed.ansatz.has_f(), "f")?;
    Ok(param_gradients(rho, params, dressed)?.f.expect("f present"))
}

/// `dE/d eta_p` per mode and orbital.
pub fn grad_eta(
    rho: &DMatrix<f64>,
    params: &VariationalParams,
    dressed: &DressedHamiltonian,
) -> Result<Vec<Vec<f64>>> {
    require(dressed.ansatz, dressed.ansatz.has_eta(), "eta")?;
    Ok(param_gradients(rho, params, dressed)?.eta.expect("eta present"))
}

/// `dE/dz` per mode.
pub fn grad_z(rho: &DMatrix<f64>, params: &VariationalParams, dressed: &DressedHamiltonian) -> Result<Vec<f64>> {
    require(dressed.ansatz, dressed.ansatz.has_z(), "z")?;
    Ok(param_gradients(rho, params, dressed)?.z.expect("z present"))
}

/// `dE/dr` per mode written out directly from the Franck-Condon factors:
/// `w sinh(2r) - sum s h rho G a^2 xi^2 - ...` with `a^2 = f^2 e^{2r} / (2w)`
/// for the displace-first ansatz, plus the explicit `r` dependence of the
/// residual coupling for squeeze-first orderings.
pub fn grad_r(rho: &DMatrix<f64>, dressed: &DressedHamiltonian) -> Result<Vec<f64>> {
    let ansatz = dressed.ansatz;
    require(ansatz, ansatz.has_r(), "r")?;
    check_shape(rho, dressed)?;
    let s = degeneracy(dressed);
    let n = dressed.n_orbitals();
    let g1 = dressed.one_body_factors();
    let mut out = Vec::with_capacity(dressed.modes.len());
    for m in &dressed.modes {
        let mut g = m.omega * (2.0 * m.r).sinh();
        if ansatz.has_f() && !ansatz.squeeze_first() {
            // dG/dr = -(kappa_p - kappa_q)^2 G for kappa proportional to e^{r}
            for p in 0..n {
                for q in 0..n {
                    let d = m.kappa[p] - m.kappa[q];
                    g -= s * dressed.h[(p, q)] * rho[(p, q)] * g1[(p, q)] * d * d;
                }
            }
            for p in 0..n {
                for q in 0..n {
                    for r in 0..n {
                        for t in 0..n {
                            let x = dressed.eri.get(p, q, r, t);
                            if x == 0.0 {
                                continue;
                            }
                            let d = m.kappa[p] - m.kappa[q] + m.kappa[r] - m.kappa[t];
                            g -= 0.5
                                * x
                                * dressed.two_body_factor(p, q, r, t)
                                * d
                                * d
                                * (s * s * rho[(p, q)] * rho[(r, t)] - s * rho[(p, t)] * rho[(r, q)]);
                        }
                    }
                }
            }
        }
        if ansatz.squeeze_first() {
            // W = D - root e^{-r} zeta, c = -root e^{-r} z: dW/dr = (D - W), dc/dr = -c
            let dw = &m.coupling - &m.residual;
            let t = (&m.residual * rho).trace();
            let d_w2 = 2.0 * s * s * t * (&dw * rho).trace() + 2.0 * s * (&dw * &m.residual * rho).trace()
                - 2.0 * s * (&dw * rho * &m.residual * rho).trace()
                + 2.0 * m.shift * s * (&dw * rho).trace()
                + 2.0 * (-m.shift) * (s * t + m.shift);
            g += 0.5 * d_w2;
        }
        out.push(g);
    }
    Ok(out)
}
