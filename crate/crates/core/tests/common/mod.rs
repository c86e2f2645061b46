#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::DMatrix;
use qedhf::model::{
    build_hubbard_holstein, load_dipole_operators, load_fcidump, BosonMode, Boundary, ElectronBosonSystem, Filling,
    LatticeSpec, ModeLayout,
};
use qedhf::transforms::{AnsatzKind, DipoleFrame, VariationalParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn dimer(electrons: usize, g: f64) -> ElectronBosonSystem {
    let spec = LatticeSpec::new(2, 1.0, 1.0, g, 1.0)
        .filling(Filling::Electrons(electrons))
        .layout(ModeLayout::SingleCavity);
    build_hubbard_holstein(&spec).unwrap()
}

/// Open 4-site Hubbard-Holstein chain at half filling, one mode per site.
pub fn hh4(u: f64, g: f64, omega: f64) -> ElectronBosonSystem {
    hh(4, u, g, omega)
}

pub fn hh(n: usize, u: f64, g: f64, omega: f64) -> ElectronBosonSystem {
    let spec = LatticeSpec::new(n, 1.0, u, g, omega).boundary(Boundary::Open);
    build_hubbard_holstein(&spec).unwrap()
}

pub fn molecule(name: &str, lambda: f64, omega: f64) -> ElectronBosonSystem {
    let sys = load_fcidump(fixture(&format!("{name}_sto3g.fcidump"))).unwrap();
    let d = load_dipole_operators(fixture(&format!("{name}_sto3g.dipole")), sys.n_orbitals).unwrap();
    sys.with_modes(vec![BosonMode::new(omega, lambda, d[0].clone()).unwrap()])
        .unwrap()
        .with_dse(true)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random parameters: f in [0.1, 1], r in [-0.4, 0.4], z in [-1, 1],
/// eta = g + N(0, 0.2).
pub fn random_params(frame: &DipoleFrame, ansatz: AnsatzKind, rng: &mut ChaCha8Rng) -> VariationalParams {
    let mut p = VariationalParams::initial(ansatz, frame);
    for v in p.f.iter_mut().flatten() {
        *v = rng.random_range(0.1..1.0);
    }
    for v in p.r.iter_mut().flatten() {
        *v = rng.random_range(-0.4..0.4);
    }
    for v in p.z.iter_mut().flatten() {
        *v = rng.random_range(-1.0..1.0);
    }
    for v in p.eta.iter_mut().flatten().flatten() {
        *v += rng.random_range(-0.2..0.2);
    }
    p
}

/// Random symmetric matrix with entries in [-0.5, 0.5].
pub fn random_symmetric(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.5..0.5));
    (&m + m.transpose()) * 0.5
}

/// Central difference with step `h`.
pub fn central<F: FnMut(f64) -> f64>(x: f64, h: f64, mut f: F) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// `|a - b| <= rel * max(|a|, |b|)` with an absolute floor for values near zero.
pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-3)
}
