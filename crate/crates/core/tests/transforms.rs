use nalgebra::DMatrix;
use qedhf::model::{build_hubbard_holstein, load_dipole_operators, load_fcidump, BosonMode, ElectronBosonSystem, Filling, LatticeSpec, ModeLayout};
use qedhf::transforms::{
    ansatz_unitary, assemble, assemble_bare, dress, lowest_eigenvalues, numeric_similarity_transform,
    restrict_bosons, AnsatzKind, DipoleFrame, VariationalParams,
};

fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn dimer(electrons: usize, g: f64) -> ElectronBosonSystem {
    let spec = LatticeSpec::new(2, 1.0, 1.0, g, 1.0)
        .filling(Filling::Electrons(electrons))
        .layout(ModeLayout::SingleCavity);
    build_hubbard_holstein(&spec).unwrap()
}

fn h2(lambda: f64, omega: f64) -> ElectronBosonSystem {
    let sys = load_fcidump(fixture("h2_sto3g.fcidump")).unwrap();
    let d = load_dipole_operators(fixture("h2_sto3g.dipole"), sys.n_orbitals).unwrap();
    sys.with_modes(vec![BosonMode::new(omega, lambda, d[0].clone()).unwrap()]).unwrap()
}

fn params(frame: &DipoleFrame, ansatz: AnsatzKind, f: f64, r: f64, z: f64) -> VariationalParams {
    let mut p = VariationalParams::initial(ansatz, frame);
    if let Some(v) = p.f.as_mut() {
        v.iter_mut().for_each(|x| *x = f);
    }
    if let Some(v) = p.r.as_mut() {
        v.iter_mut().for_each(|x| *x = r);
    }
    if let Some(v) = p.z.as_mut() {
        v.iter_mut().for_each(|x| *x = z);
    }
    p
}

fn systems() -> Vec<ElectronBosonSystem> {
    vec![dimer(1, 0.5), dimer(2, 0.7), h2(0.3, 0.5)]
}

#[test]
fn numeric_similarity_matches_assembly() {
    for sys in systems() {
        let frame = DipoleFrame::new(&sys).unwrap();
        let bare = assemble_bare(&frame, 40).unwrap();
        for ansatz in AnsatzKind::ALL {
            let p = params(&frame, ansatz, 0.6, 0.2, 0.35);
            let u = ansatz_unitary(&frame, ansatz, &p, 40).unwrap();
            let numeric = numeric_similarity_transform(&bare, &u).unwrap();
            let dressed = assemble(&dress(&frame, ansatz, &p).unwrap(), &frame, 40).unwrap();
            let a = restrict_bosons(&numeric, 12).unwrap();
            let b = restrict_bosons(&dressed, 12).unwrap();
            let err = (a - b).amax();
            assert!(err < 1e-8, "{ansatz}: {err:.3e}");
        }
    }
}

#[test]
fn spectrum_invariance() {
    for sys in systems() {
        let frame = DipoleFrame::new(&sys).unwrap();
        let bare = lowest_eigenvalues(&assemble_bare(&frame, 30).unwrap(), 10);
        for ansatz in AnsatzKind::ALL {
            let p = params(&frame, ansatz, 0.8, -0.3, 0.4);
            let dressed = assemble(&dress(&frame, ansatz, &p).unwrap(), &frame, 30).unwrap();
            let vals = lowest_eigenvalues(&dressed, 10);
            let err = bare.iter().zip(&vals).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-7, "{ansatz}: {err:.3e}");
        }
    }
}

#[test]
fn doubled_pair_coefficient_breaks_spectrum() {
    let sys = dimer(2, 0.7);
    let frame = DipoleFrame::new(&sys).unwrap();
    let bare = lowest_eigenvalues(&assemble_bare(&frame, 30).unwrap(), 10);
    let p = params(&frame, AnsatzKind::Gss, 0.8, 0.3, 0.0);
    let mut d = dress(&frame, AnsatzKind::Gss, &p).unwrap();
    d.modes[0].photon_pair *= 2.0;
    let vals = lowest_eigenvalues(&assemble(&d, &frame, 30).unwrap(), 10);
    let err = bare.iter().zip(&vals).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err > 1e-3);
    let _ = DMatrix::<f64>::zeros(1, 1);
}
