//! Photon reduced density matrices and von Neumann entropies of mean-field
//! light-matter states `sum_mu C_mu |mu> |z_mu, r>`.

use log::warn;
use nalgebra::{DMatrix, SymmetricEigen};

use crate::boson::{closed_form_overlap, Ordering, SqueezedCoherentState, TruncatedFockBasis};
use crate::error::{Error, Result};
use crate::model::SpinSector;
use crate::scf::ScfResult;

/// Branches whose displacements differ by less than this are merged.
const MERGE_TOL: f64 = 1e-10;
/// Branches are kept until this much weight is accounted for.
pub const BRANCH_TRUNCATION: f64 = 1e-8;
const LOSS_WARN: f64 = 1e-8;
const LOSS_ERROR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    pub weight: f64,
    pub z: f64,
}

/// Photon-side content of a mean-field state for one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldPolaritonState {
    pub r: f64,
    pub ordering: Ordering,
    /// Sorted by decreasing weight.
    pub branches: Vec<Branch>,
    /// Weight dropped by the cumulative-weight truncation.
    pub discarded_weight: f64,
}

impl MeanFieldPolaritonState {
    /// Merges equal displacements, drops the lightest branches beyond a
    /// cumulative weight of `1 - 1e-8` and renormalizes.
    pub fn from_branches(raw: &[Branch], r: f64, ordering: Ordering) -> Result<Self> {
        let total: f64 = raw.iter().map(|b| b.weight).sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::NotNormalized(total));
        }
        let mut sorted: Vec<Branch> = raw.iter().copied().filter(|b| b.weight > 0.0).collect();
        sorted.sort_by(|a, b| a.z.total_cmp(&b.z));
        let mut merged: Vec<Branch> = Vec::new();
        for b in sorted {
            match merged.last_mut() {
                Some(last) if (last.z - b.z).abs() < MERGE_TOL => last.weight += b.weight,
                _ => merged.push(b),
            }
        }
        merged.sort_by(|a, b| b.weight.total_cmp(&a.weight).then(a.z.total_cmp(&b.z)));
        let mut kept = Vec::new();
        let mut acc = 0.0;
        for b in merged {
            if acc >= 1.0 - BRANCH_TRUNCATION {
                break;
            }
            acc += b.weight;
            kept.push(b);
        }
        for b in &mut kept {
            b.weight /= acc;
        }
        Ok(Self {
            r,
            ordering,
            branches: kept,
            discarded_weight: (total - acc).max(0.0),
        })
    }

    pub fn total_weight(&self) -> f64 {
        self.branches.iter().map(|b| b.weight).sum()
    }

    fn state(&self, b: &Branch) -> SqueezedCoherentState {
        SqueezedCoherentState::new(b.z, self.r, self.ordering)
    }

    /// Smallest truncation at which every branch keeps all but `1e-12` of
    /// its norm.
    pub fn sufficient_n_max(&self) -> Result<usize> {
        let mut n_max = 20;
        while n_max <= 400 {
            let basis = TruncatedFockBasis::new(n_max)?;
            let mut worst = 0.0f64;
            for b in &self.branches {
                worst = worst.max(self.state(b).amplitudes(&basis)?.1);
            }
            if worst < 1e-12 {
                return Ok(n_max);
            }
            n_max += 20;
        }
        Err(Error::Truncation {
            quantity: "branch states".into(),
            change: 1.0,
            tolerance: 1e-12,
        })
    }
}

/// `rho_ph = sum_mu w_mu |z_mu, r><z_mu, r|` on `n_max + 1` levels, with its
/// trace renormalized. Returns the matrix and the truncation loss.
pub fn photon_rdm(state: &MeanFieldPolaritonState, n_max: usize) -> Result<(DMatrix<f64>, f64)> {
    let basis = TruncatedFockBasis::new(n_max)?;
    let d = basis.dim();
    let mut rho = DMatrix::zeros(d, d);
    for b in &state.branches {
        let (amp, _) = state.state(b).amplitudes(&basis)?;
        rho.ger(b.weight, &amp, &amp, 1.0);
    }
    let trace = rho.trace();
    let loss = (1.0 - trace).abs();
    if loss > LOSS_ERROR {
        return Err(Error::Truncation {
            quantity: "photon density matrix trace".into(),
            change: loss,
            tolerance: LOSS_ERROR,
        });
    }
    if loss > LOSS_WARN {
        warn!("photon density matrix loses {loss:.2e} of its trace at n_max = {n_max}");
    }
    rho /= trace;
    Ok((rho, loss))
}

/// `S = -sum lambda ln lambda` over the eigenvalues of `rho` (nats);
/// eigenvalues below `1e-14` are dropped.
pub fn von_neumann_entropy(rho: &DMatrix<f64>) -> Result<f64> {
    if rho.nrows() != rho.ncols() {
        return Err(Error::DimensionMismatch {
            expected: rho.nrows(),
            found: rho.ncols(),
        });
    }
    let trace = rho.trace();
    if (trace - 1.0).abs() > 1e-8 {
        return Err(Error::Invalid(format!("density matrix has trace {trace}")));
    }
    let asymmetry = (rho - rho.transpose()).amax();
    if asymmetry > 1e-10 {
        return Err(Error::NotHermitian {
            what: "density matrix".into(),
            asymmetry,
        });
    }
    Ok(entropy_of_spectrum(SymmetricEigen::new(rho.clone()).eigenvalues.iter().copied()))
}

fn entropy_of_spectrum(values: impl Iterator<Item = f64>) -> f64 {
    let mut s = 0.0;
    for l in values {
        if l < -1e-12 {
            warn!("clipping negative density-matrix eigenvalue {l:.3e}");
        }
        if l > 1e-14 {
            s -= l * l.ln();
        }
    }
    s
}

/// Weighted Gram matrix `M_mn = sqrt(w_m w_n) <z_m|z_n>` from closed-form
/// overlaps; its nonzero spectrum equals that of the photon density matrix.
pub fn gram_matrix(state: &MeanFieldPolaritonState) -> Result<DMatrix<f64>> {
    let k = state.branches.len();
    let mut m = DMatrix::zeros(k, k);
    for (i, a) in state.branches.iter().enumerate() {
        for (j, b) in state.branches.iter().enumerate() {
            let overlap = closed_form_overlap(&state.state(a), &state.state(b))?;
            m[(i, j)] = (a.weight * b.weight).sqrt() * overlap;
        }
    }
    Ok(m)
}

pub fn gram_entropy(state: &MeanFieldPolaritonState) -> Result<f64> {
    let m = gram_matrix(state)?;
    Ok(entropy_of_spectrum(SymmetricEigen::new(m).eigenvalues.iter().copied()))
}

/// Entropy through the Fock-basis density matrix at an automatically chosen
/// truncation.
pub fn fock_entropy(state: &MeanFieldPolaritonState) -> Result<f64> {
    let n_max = state.sufficient_n_max()?;
    let (rho, _) = photon_rdm(state, n_max)?;
    von_neumann_entropy(&rho)
}

/// Both entropy routes; errors if they disagree by more than `1e-8`.
pub fn entropy_dual_route(state: &MeanFieldPolaritonState) -> Result<(f64, f64)> {
    let fock = fock_entropy(state)?;
    let gram = gram_entropy(state)?;
    if (fock - gram).abs() > 1e-8 {
        return Err(Error::Invalid(format!(
            "entropy routes disagree: Fock {fock:.12} vs Gram {gram:.12}"
        )));
    }
    Ok((fock, gram))
}

/// All `k`-subsets of `0..n` in lexicographic order.
fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        let mut i = k;
        while i > 0 && cur[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        cur[i - 1] += 1;
        for j in i..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// `(z, weight)` per spin-string: the squared expansion coefficient of the
/// occupied orbitals on the frame orbitals `I`, and `sum_{p in I} zeta_p`.
fn string_branches(c_occ: &DMatrix<f64>, zeta: &[f64]) -> Vec<(f64, f64)> {
    let (n, k) = c_occ.shape();
    subsets(n, k)
        .into_iter()
        .filter_map(|rows| {
            let m = DMatrix::from_fn(k, k, |i, j| c_occ[(rows[i], j)]);
            let w = m.determinant().powi(2);
            (w > 0.0).then(|| (rows.iter().map(|&p| zeta[p]).sum(), w))
        })
        .collect()
}

/// Photon branches of each mode of a converged mean-field solution. The
/// determinant is expanded over configurations of the frame orbitals; each
/// configuration carries the displacement `sum_p f eta_p / sqrt(2w)` over
/// its occupied spin orbitals, and configurations with equal displacement
/// are merged.
pub fn mean_field_wavefunction(scf: &ScfResult) -> Result<Vec<MeanFieldPolaritonState>> {
    scf.require_converged()?;
    let ansatz = scf.ansatz;
    let frame = &scf.frame;
    let sys = &frame.system;
    let ordering = if ansatz.squeeze_first() {
        Ordering::SqueezeDisplace
    } else {
        Ordering::DisplaceSqueeze
    };
    let c_occ = scf.coefficients.columns(0, scf.n_occupied()).into_owned();
    let closed = sys.spin == SpinSector::ClosedShell;
    let mut states = Vec::with_capacity(frame.n_modes());
    for (a, mode) in sys.modes.iter().enumerate() {
        let r = scf.params.r_of(a);
        let raw: Vec<Branch> = match &scf.params.eta {
            Some(eta) => {
                let scale = scf.params.f_of(a) / (2.0 * mode.omega).sqrt();
                let zeta: Vec<f64> = eta[a].iter().map(|e| e * scale).collect();
                let strings = string_branches(&c_occ, &zeta);
                if closed {
                    let mut out = Vec::with_capacity(strings.len() * strings.len());
                    for &(zu, wu) in &strings {
                        for &(zd, wd) in &strings {
                            out.push(Branch {
                                weight: wu * wd,
                                z: zu + zd,
                            });
                        }
                    }
                    out
                } else {
                    strings.into_iter().map(|(z, weight)| Branch { weight, z }).collect()
                }
            }
            None => vec![Branch {
                weight: 1.0,
                z: scf.params.z_of(a),
            }],
        };
        // the expansion weights sum to one up to rounding
        let total: f64 = raw.iter().map(|b| b.weight).sum();
        let raw: Vec<Branch> = raw
            .into_iter()
            .map(|b| Branch {
                weight: b.weight / total,
                z: b.z,
            })
            .collect();
        states.push(MeanFieldPolaritonState::from_branches(&raw, r, ordering)?);
    }
    Ok(states)
}

/// Photon entropy of every mode of a mean-field solution (Fock-basis route,
/// cross-checked against the Gram route) and their mean.
pub fn mean_field_entropies(scf: &ScfResult) -> Result<(Vec<f64>, f64)> {
    let per_mode: Vec<f64> = mean_field_wavefunction(scf)?
        .iter()
        .map(|s| entropy_dual_route(s).map(|(fock, _)| fock))
        .collect::<Result<_>>()?;
    let mean = if per_mode.is_empty() {
        0.0
    } else {
        per_mode.iter().sum::<f64>() / per_mode.len() as f64
    };
    Ok((per_mode, mean))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_branch(z1: f64, z2: f64, r: f64) -> MeanFieldPolaritonState {
        MeanFieldPolaritonState::from_branches(
            &[Branch { weight: 0.5, z: z1 }, Branch { weight: 0.5, z: z2 }],
            r,
            Ordering::DisplaceSqueeze,
        )
        .unwrap()
    }

    #[test]
    fn qubit_entropies() {
        let half = DMatrix::identity(2, 2) * 0.5;
        assert_relative_eq!(von_neumann_entropy(&half).unwrap(), 2f64.ln(), epsilon = 1e-15);
        let pure = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(von_neumann_entropy(&pure).unwrap(), 0.0);
        assert!(von_neumann_entropy(&(DMatrix::identity(2, 2) * 0.6)).is_err());
    }

    #[test]
    fn single_branch_is_pure() {
        let s = MeanFieldPolaritonState::from_branches(&[Branch { weight: 1.0, z: 0.7 }], 0.2, Ordering::DisplaceSqueeze)
            .unwrap();
        assert!(fock_entropy(&s).unwrap().abs() < 1e-10);
        assert!(gram_entropy(&s).unwrap().abs() < 1e-14);
    }

    #[test]
    fn equal_displacements_merge() {
        let s = two_branch(0.3, 0.3, 0.0);
        assert_eq!(s.branches.len(), 1);
        assert_relative_eq!(s.branches[0].weight, 1.0);
    }

    #[test]
    fn two_state_mixture_matches_closed_form() {
        let s = two_branch(0.0, 1.0, 0.0);
        // eigenvalues (1 +- e^{-1/2}) / 2
        let c = (-0.5f64).exp();
        let (p, q) = ((1.0 + c) / 2.0, (1.0 - c) / 2.0);
        let expected = -p * p.ln() - q * q.ln();
        let (fock, gram) = entropy_dual_route(&s).unwrap();
        assert_relative_eq!(fock, expected, epsilon = 1e-10);
        assert_relative_eq!(gram, expected, epsilon = 1e-14);
    }

    #[test]
    fn far_branches_approach_ln2() {
        let s = two_branch(-4.0, 4.0, 0.0);
        assert_relative_eq!(fock_entropy(&s).unwrap(), 2f64.ln(), epsilon = 1e-10);
    }

    #[test]
    fn truncation_drops_negligible_branches() {
        let raw = [
            Branch { weight: 1.0 - 1e-12, z: 0.0 },
            Branch { weight: 1e-12, z: 1.0 },
        ];
        let s = MeanFieldPolaritonState::from_branches(&raw, 0.0, Ordering::DisplaceSqueeze).unwrap();
        assert_eq!(s.branches.len(), 1);
        let short = [Branch { weight: 0.9, z: 0.0 }];
        assert!(MeanFieldPolaritonState::from_branches(&short, 0.0, Ordering::DisplaceSqueeze).is_err());
    }

    #[test]
    fn too_small_truncation_is_an_error() {
        let s = two_branch(0.0, 3.0, 0.0);
        assert!(matches!(photon_rdm(&s, 2), Err(Error::Truncation { .. })));
    }
}

