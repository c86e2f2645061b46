//! Displacement and squeeze operators on a truncated Fock space,
//! squeezed-coherent states and Franck-Condon factors.
//!
//! Conventions: `D(z) = exp[z (b - b^+)]`, so that `D^+ b D = b - z`, and
//! `S(r) = exp[r (b^2 - b^+2) / 2]`, so that `S^+ b S = cosh(r) b - sinh(r) b^+`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SQUEEZE_CAP: f64 = 5.0;

/// Extra levels used when building state vectors, so that the retained
/// amplitudes are those of the untruncated state.
const PAD: usize = 24;

/// Fock states `|0>..|n_max>` of one mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TruncatedFockBasis {
    n_max: usize,
}

impl TruncatedFockBasis {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::Invalid("boson truncation needs n_max >= 1".into()));
        }
        Ok(Self { n_max })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        self.n_max + 1
    }

    fn padded(&self) -> Self {
        Self {
            n_max: self.n_max + PAD.max(self.n_max / 2),
        }
    }

    pub fn annihilation(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, j| if j == i + 1 { (j as f64).sqrt() } else { 0.0 })
    }

    pub fn creation(&self) -> DMatrix<f64> {
        self.annihilation().transpose()
    }

    pub fn number(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_fn(self.dim(), |i, _| i as f64))
    }

    /// `b + b^+`.
    pub fn quadrature(&self) -> DMatrix<f64> {
        let b = self.annihilation();
        &b + b.transpose()
    }

    /// `b^2 + b^+2`.
    pub fn pair(&self) -> DMatrix<f64> {
        let b = self.annihilation();
        let b2 = &b * &b;
        &b2 + b2.transpose()
    }

}

/// Exact generator exponential in the given basis, without padding.
fn exp_generator(basis: &TruncatedFockBasis, generator: DMatrix<f64>) -> DMatrix<f64> {
    debug_assert_eq!(generator.nrows(), basis.dim());
    generator.exp()
}

/// `D(z)` as the exponential of the truncated generator; exactly orthogonal,
/// and faithful on levels well below `n_max`.
pub fn displacement_matrix(z: f64, basis: &TruncatedFockBasis) -> DMatrix<f64> {
    if z == 0.0 {
        return DMatrix::identity(basis.dim(), basis.dim());
    }
    let b = basis.annihilation();
    exp_generator(basis, (&b - b.transpose()) * z)
}

/// `S(r)` projected onto the retained levels; `|r|` must not exceed the
/// default cap.
pub fn squeeze_matrix(r: f64, basis: &TruncatedFockBasis) -> Result<DMatrix<f64>> {
    squeeze_matrix_capped(r, basis, DEFAULT_SQUEEZE_CAP)
}

pub fn squeeze_matrix_capped(r: f64, basis: &TruncatedFockBasis, cap: f64) -> Result<DMatrix<f64>> {
    check_squeeze(r, cap)?;
    if r == 0.0 {
        return Ok(DMatrix::identity(basis.dim(), basis.dim()));
    }
    let b = basis.annihilation();
    let b2 = &b * &b;
    Ok(exp_generator(basis, (&b2 - b2.transpose()) * (0.5 * r)))
}

pub fn check_squeeze(r: f64, cap: f64) -> Result<()> {
    if !r.is_finite() || r.abs() > cap {
        return Err(Error::SqueezeCap { r, cap });
    }
    Ok(())
}

/// Order in which displacement and squeeze act on the vacuum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Ordering {
    /// `D(z) S(r) |0>`
    DisplaceSqueeze,
    /// `S(r) D(z) |0>`
    SqueezeDisplace,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezedCoherentState {
    pub z: f64,
    pub r: f64,
    pub ordering: Ordering,
}

impl SqueezedCoherentState {
    pub fn new(z: f64, r: f64, ordering: Ordering) -> Self {
        Self { z, r, ordering }
    }

    /// Fock amplitudes on the retained levels together with the norm lost to
    /// truncation, `1 - sum |c_n|^2`.
    pub fn amplitudes(&self, basis: &TruncatedFockBasis) -> Result<(DVector<f64>, f64)> {
        let big = basis.padded();
        let d = displacement_matrix(self.z, &big);
        let s = squeeze_matrix(self.r, &big)?;
        let u = match self.ordering {
            Ordering::DisplaceSqueeze => d * s,
            Ordering::SqueezeDisplace => s * d,
        };
        let full = u.column(0).into_owned();
        let kept = full.rows(0, basis.dim()).into_owned();
        let loss = (1.0 - kept.norm_squared()).max(0.0);
        Ok((kept, loss))
    }
}

/// Closed-form overlap `<s1|s2>` for real parameters and shared squeeze.
pub fn closed_form_overlap(s1: &SqueezedCoherentState, s2: &SqueezedCoherentState) -> Result<f64> {
    check_compatible(s1, s2)?;
    let dz = s1.z - s2.z;
    Ok(match s1.ordering {
        Ordering::DisplaceSqueeze => (-(2.0 * s1.r).exp() * dz * dz / 2.0).exp(),
        Ordering::SqueezeDisplace => (-dz * dz / 2.0).exp(),
    })
}

fn check_compatible(s1: &SqueezedCoherentState, s2: &SqueezedCoherentState) -> Result<()> {
    if s1.r != s2.r || s1.ordering != s2.ordering {
        return Err(Error::Invalid(
            "overlap requires equal squeeze and ordering".into(),
        ));
    }
    Ok(())
}

/// Overlap computed from Fock amplitude vectors at `n_max` and `n_max + 10`;
/// the two must agree to `1e-10` and neither state may lose more than
/// `1e-10` of its norm to truncation.
pub fn overlap_squeezed_coherent(
    s1: &SqueezedCoherentState,
    s2: &SqueezedCoherentState,
    n_max: usize,
) -> Result<f64> {
    check_compatible(s1, s2)?;
    let inner = |n: usize| -> Result<f64> {
        let basis = TruncatedFockBasis::new(n)?;
        let (a, loss_a) = s1.amplitudes(&basis)?;
        let (b, loss_b) = s2.amplitudes(&basis)?;
        let loss = loss_a.max(loss_b);
        if loss > 1e-10 {
            return Err(Error::Truncation {
                quantity: "squeezed-coherent state norm".into(),
                change: loss,
                tolerance: 1e-10,
            });
        }
        Ok(a.dot(&b))
    };
    converged("squeezed-coherent overlap", inner(n_max)?, inner(n_max + 10)?, 1e-10)
}

fn converged(quantity: &str, coarse: f64, fine: f64, tolerance: f64) -> Result<f64> {
    let change = (coarse - fine).abs();
    if change > tolerance {
        return Err(Error::Truncation {
            quantity: quantity.into(),
            change,
            tolerance,
        });
    }
    Ok(fine)
}

fn check_omega(omega: f64) -> Result<()> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::Invalid(format!("frequency must be positive, got {omega}")));
    }
    Ok(())
}

/// Vacuum expectation of two squeeze-dressed displacements whose
/// displacement amplitudes differ by `f * xi / sqrt(2 w)`:
/// `exp[-f^2 xi^2 e^{2r} / (4 w)]`.
fn franck_condon(xi: f64, f: f64, r: f64, omega: f64) -> Result<f64> {
    check_omega(omega)?;
    let a = f * xi * r.exp();
    Ok((-a * a / (4.0 * omega)).exp())
}

/// `G_pq = <0| X_p^+ X_q |0>` with `X_p = S^+(r) D(f eta_p / sqrt(2w)) S(r)`.
pub fn franck_condon_one_body(eta_p: f64, eta_q: f64, f: f64, r: f64, omega: f64) -> Result<f64> {
    franck_condon(eta_p - eta_q, f, r, omega)
}

/// `<0| X_p^+ X_q^+ X_s X_r |0>`, which depends on
/// `xi = eta_p + eta_q - eta_r - eta_s`.
pub fn franck_condon_two_body(
    eta_p: f64,
    eta_q: f64,
    eta_r: f64,
    eta_s: f64,
    f: f64,
    r: f64,
    omega: f64,
) -> Result<f64> {
    franck_condon(eta_p + eta_q - eta_r - eta_s, f, r, omega)
}

/// Numerical counterpart of the Franck-Condon factors: builds every
/// `X_k = S^+ D(f eta_k / sqrt(2w)) S` as a matrix and takes the vacuum element
/// of `X_{c0}^+ X_{c1}^+ ... X_{a0} X_{a1} ...`.
pub fn franck_condon_numeric(
    created: &[f64],
    annihilated: &[f64],
    f: f64,
    r: f64,
    omega: f64,
    n_max: usize,
) -> Result<f64> {
    check_omega(omega)?;
    let at = |n: usize| -> Result<f64> {
        let basis = TruncatedFockBasis::new(n)?;
        let s = squeeze_matrix(r, &basis)?;
        let x = |eta: f64| {
            let d = displacement_matrix(f * eta / (2.0 * omega).sqrt(), &basis);
            s.transpose() * d * &s
        };
        let mut acc = DMatrix::identity(basis.dim(), basis.dim());
        for &eta in created {
            acc *= x(eta).transpose();
        }
        for &eta in annihilated {
            acc *= x(eta);
        }
        Ok(acc[(0, 0)])
    };
    converged("Franck-Condon factor", at(n_max)?, at(n_max + 10)?, 1e-10)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn lower_block(m: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
        m.view((0, 0), (k, k)).into_owned()
    }

    #[test]
    fn basis_rejects_zero() {
        assert!(TruncatedFockBasis::new(0).is_err());
        assert_eq!(TruncatedFockBasis::new(3).unwrap().dim(), 4);
    }

    #[test]
    fn zero_parameters_are_identity() {
        let basis = TruncatedFockBasis::new(10).unwrap();
        assert_eq!(displacement_matrix(0.0, &basis), DMatrix::identity(11, 11));
        assert_eq!(squeeze_matrix(0.0, &basis).unwrap(), DMatrix::identity(11, 11));
    }

    #[test]
    fn displacement_column_is_coherent_state() {
        let basis = TruncatedFockBasis::new(30).unwrap();
        let z = 0.8;
        let d = displacement_matrix(z, &basis);
        let mut factorial = 1.0;
        for n in 0..20 {
            if n > 0 {
                factorial *= n as f64;
            }
            let expected = (-z * z / 2.0).exp() * (-z).powi(n as i32) / factorial.sqrt();
            assert_relative_eq!(d[(n, 0)], expected, epsilon = 1e-13);
        }
    }

    #[test]
    fn displacement_shifts_annihilator() {
        let basis = TruncatedFockBasis::new(80).unwrap();
        let z = 1.3;
        let d = displacement_matrix(z, &basis);
        let b = basis.annihilation();
        let lhs = d.transpose() * &b * &d;
        let rhs = &b - DMatrix::identity(81, 81) * z;
        let err = (lower_block(&lhs, 20) - lower_block(&rhs, 20)).amax();
        assert!(err < 1e-8, "err={err}");
    }

    #[test]
    fn squeeze_bogoliubov_action() {
        let basis = TruncatedFockBasis::new(80).unwrap();
        let r = 0.4;
        let s = squeeze_matrix(r, &basis).unwrap();
        let b = basis.annihilation();
        let lhs = s.transpose() * &b * &s;
        let rhs = &b * r.cosh() - b.transpose() * r.sinh();
        let err = (lower_block(&lhs, 20) - lower_block(&rhs, 20)).amax();
        assert!(err < 1e-8, "err={err}");
    }

    #[test]
    fn squeezed_vacuum_amplitude() {
        let basis = TruncatedFockBasis::new(40).unwrap();
        for &r in &[-0.7, 0.2, 1.0] {
            let s = squeeze_matrix(r, &basis).unwrap();
            assert_relative_eq!(s[(0, 0)], 1.0 / r.cosh().sqrt(), epsilon = 1e-12);
            // Taylor series of the generator as an independent route
            let b = basis.annihilation();
            let b2 = &b * &b;
            let gen = (&b2 - b2.transpose()) * (0.5 * r);
            let mut term = DMatrix::<f64>::identity(41, 41);
            let mut sum = term.clone();
            for k in 1..80 {
                term = &term * &gen / k as f64;
                sum += &term;
            }
            assert_relative_eq!(s[(0, 0)], sum[(0, 0)], epsilon = 1e-10);
        }
    }

    #[test]
    fn unitarity_on_lower_block() {
        let basis = TruncatedFockBasis::new(40).unwrap();
        for &(z, r) in &[(2.0, 1.0), (-1.5, -0.8), (0.3, 0.5)] {
            for u in [displacement_matrix(z, &basis), squeeze_matrix(r, &basis).unwrap()] {
                let prod = u.transpose() * &u;
                let err = (lower_block(&prod, 20) - DMatrix::identity(20, 20)).amax();
                assert!(err < 1e-8, "z={z} r={r} err={err}");
            }
        }
    }

    #[test]
    fn squeeze_displace_rotation() {
        let basis = TruncatedFockBasis::new(80).unwrap();
        let (z, r) = (0.9, 0.35);
        let lhs = squeeze_matrix(r, &basis).unwrap() * displacement_matrix(z, &basis);
        let rhs = displacement_matrix((-r).exp() * z, &basis) * squeeze_matrix(r, &basis).unwrap();
        let err = (lower_block(&lhs, 20) - lower_block(&rhs, 20)).amax();
        assert!(err < 1e-8, "err={err}");
    }

    #[test]
    fn squeeze_cap_enforced() {
        let basis = TruncatedFockBasis::new(10).unwrap();
        assert!(matches!(squeeze_matrix(5.5, &basis), Err(Error::SqueezeCap { .. })));
        assert!(squeeze_matrix_capped(5.5, &basis, 6.0).is_ok());
    }

    #[test]
    fn overlaps() {
        let a = SqueezedCoherentState::new(0.0, 0.0, Ordering::DisplaceSqueeze);
        let b = SqueezedCoherentState::new(1.0, 0.0, Ordering::DisplaceSqueeze);
        assert_relative_eq!(overlap_squeezed_coherent(&a, &a, 30).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(overlap_squeezed_coherent(&a, &b, 30).unwrap(), (-0.5f64).exp(), epsilon = 1e-12);
        for ordering in [Ordering::DisplaceSqueeze, Ordering::SqueezeDisplace] {
            let a = SqueezedCoherentState::new(0.0, 0.3, ordering);
            let b = SqueezedCoherentState::new(1.0, 0.3, ordering);
            let numeric = overlap_squeezed_coherent(&a, &b, 30).unwrap();
            assert_relative_eq!(numeric, closed_form_overlap(&a, &b).unwrap(), epsilon = 1e-8);
        }
        let c = SqueezedCoherentState::new(1.0, 0.2, Ordering::DisplaceSqueeze);
        assert!(overlap_squeezed_coherent(&a, &c, 30).is_err());
    }

    #[test]
    fn overlap_truncation_detected() {
        let a = SqueezedCoherentState::new(0.0, 0.0, Ordering::DisplaceSqueeze);
        let b = SqueezedCoherentState::new(4.0, 0.0, Ordering::DisplaceSqueeze);
        assert!(matches!(overlap_squeezed_coherent(&a, &b, 2), Err(Error::Truncation { .. })));
    }

    #[test]
    fn franck_condon_closed_form_matches_numeric() {
        let g = franck_condon_one_body(1.0, 0.0, 1.0, 0.0, 1.0).unwrap();
        assert_relative_eq!(g, (-0.25f64).exp(), epsilon = 1e-15);
        let numeric = franck_condon_numeric(&[1.0], &[0.0], 1.0, 0.0, 1.0, 40).unwrap();
        assert_relative_eq!(g, numeric, epsilon = 1e-10);

        let g2 = franck_condon_two_body(1.0, 0.0, 0.0, 0.0, 0.7, 0.2, 1.0).unwrap();
        let numeric2 = franck_condon_numeric(&[1.0, 0.0], &[0.0, 0.0], 0.7, 0.2, 1.0, 40).unwrap();
        assert_relative_eq!(g2, numeric2, epsilon = 1e-10);
    }

    #[test]
    fn franck_condon_trivial_values() {
        assert_eq!(franck_condon_one_body(0.3, -1.0, 0.0, 0.4, 2.0).unwrap(), 1.0);
        assert_eq!(franck_condon_one_body(0.3, 0.3, 0.9, 0.4, 2.0).unwrap(), 1.0);
        assert_eq!(franck_condon_two_body(1.0, 2.0, 2.0, 1.0, 0.9, 0.4, 2.0).unwrap(), 1.0);
        assert!(franck_condon_one_body(1.0, 0.0, 1.0, 0.0, 0.0).is_err());
        assert!(franck_condon_two_body(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, -1.0).is_err());
    }
}
