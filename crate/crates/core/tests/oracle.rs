use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use qedhf::model::{build_hubbard_holstein, BosonMode, ElectronBosonSystem, Eri, LatticeSpec, ModeLayout};
use qedhf::oracle::{
    build_full_hamiltonian, build_full_hamiltonian_limited, exact_entropy, exact_photon_rdm, ground_state,
    ground_state_with, EigenPath, FockSpace, FockSpaceOperator,
};
use qedhf::Error;

fn displaced_oscillator(g: f64, omega: f64) -> ElectronBosonSystem {
    let h = DMatrix::zeros(1, 1);
    ElectronBosonSystem::electronic(h, Eri::zeros(1), 1, 0.0)
        .unwrap()
        .with_modes(vec![BosonMode::new(omega, g, DMatrix::identity(1, 1)).unwrap()])
        .unwrap()
        .with_dse(false)
}

#[test]
fn displaced_oscillator_energy() {
    for &g in &[0.1, 1.0, 3.0] {
        let sys = displaced_oscillator(g, 1.0);
        let h = build_full_hamiltonian(&sys, 60).unwrap();
        let (e, _) = ground_state(&h).unwrap();
        assert_relative_eq!(e, -g * g / 2.0 + 0.5, epsilon = 1e-9);
    }
}

#[test]
fn single_electron_dimer_without_coupling() {
    let spec = LatticeSpec::new(2, 1.0, 0.0, 0.0, 1.0)
        .filling(qedhf::model::Filling::Electrons(1))
        .layout(ModeLayout::SingleCavity);
    let sys = build_hubbard_holstein(&spec).unwrap();
    let (e, _) = ground_state(&build_full_hamiltonian(&sys, 4).unwrap()).unwrap();
    assert_relative_eq!(e, -1.0 + 0.5, epsilon = 1e-12);
}

#[test]
fn decoupled_bosons_add_zero_point_energy() {
    let spec = LatticeSpec::new(3, 1.0, 1.5, 0.0, 0.7).filling(qedhf::model::Filling::Electrons(2));
    let sys = build_hubbard_holstein(&spec).unwrap();
    let (e_full, psi) = ground_state(&build_full_hamiltonian(&sys, 2).unwrap()).unwrap();
    let electronic = sys.clone().with_modes(vec![]).unwrap();
    let (e_el, _) = ground_state(&build_full_hamiltonian(&electronic, 2).unwrap()).unwrap();
    assert_relative_eq!(e_full, e_el + 3.0 * 0.35, epsilon = 1e-10);
    let space = FockSpace::new(9, vec![3, 3, 3]);
    for mode in 0..3 {
        assert!(exact_entropy(&psi, &space, mode).unwrap().abs() < 1e-10);
    }
}

#[test]
fn dense_and_lanczos_agree() {
    let spec = LatticeSpec::new(2, 1.0, 1.0, 0.6, 1.0);
    let sys = build_hubbard_holstein(&spec).unwrap();
    let h = build_full_hamiltonian(&sys, 10).unwrap();
    assert_eq!(h.dim(), 4 * 121);
    let (e_dense, psi_dense) = ground_state_with(&h, EigenPath::Dense).unwrap();
    let (e_lanczos, psi_lanczos) = ground_state_with(&h, EigenPath::Lanczos).unwrap();
    assert_relative_eq!(e_dense, e_lanczos, epsilon = 1e-10);
    assert_relative_eq!(psi_dense.dot(&psi_lanczos).abs(), 1.0, epsilon = 1e-9);
}

#[test]
fn factored_matches_dense_assembly() {
    let spec = LatticeSpec::new(2, 1.0, 0.5, 0.4, 0.8);
    let sys = build_hubbard_holstein(&spec).unwrap();
    let h = build_full_hamiltonian(&sys, 3).unwrap();
    let dense = FockSpaceOperator::dense(h.space.clone(), h.to_dense()).unwrap();
    let x = DVector::from_fn(h.dim(), |i, _| ((i * 7 + 3) % 11) as f64 - 5.0);
    let mut y1 = vec![0.0; h.dim()];
    let mut y2 = vec![0.0; h.dim()];
    h.apply(x.as_slice(), &mut y1);
    dense.apply(x.as_slice(), &mut y2);
    for (a, b) in y1.iter().zip(&y2) {
        assert_relative_eq!(a, b, epsilon = 1e-12);
    }
    assert!(h.asymmetry() < 1e-14);
}

#[test]
fn dimension_limit() {
    let sys = build_hubbard_holstein(&LatticeSpec::new(4, 1.0, 1.0, 0.5, 1.0)).unwrap();
    assert!(matches!(
        build_full_hamiltonian_limited(&sys, 8, 1000),
        Err(Error::DimensionLimit { .. })
    ));
}

#[test]
fn photon_rdm_product_and_bell() {
    let space = FockSpace::new(2, vec![2]);
    let product = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
    let rho = exact_photon_rdm(&product, &space, 0).unwrap();
    assert_relative_eq!(rho.trace(), 1.0, epsilon = 1e-12);
    assert!(exact_entropy(&product, &space, 0).unwrap().abs() < 1e-14);
    let s = 0.5f64.sqrt();
    let bell = DVector::from_vec(vec![s, 0.0, 0.0, s]);
    assert_relative_eq!(exact_entropy(&bell, &space, 0).unwrap(), 2f64.ln(), epsilon = 1e-14);
    let unnormalized = DVector::from_vec(vec![1.0, 0.0, 0.0, 1.0]);
    assert!(matches!(exact_photon_rdm(&unnormalized, &space, 0), Err(Error::NotNormalized(_))));
}

#[test]
fn photon_rdm_traces_other_modes() {
    // electron (x) mode0 (x) mode1, with mode1 fastest
    let space = FockSpace::new(1, vec![2, 3]);
    let mut psi = DVector::zeros(6);
    psi[0] = 0.6; // |0,0>
    psi[5] = 0.8; // |1,2>
    let rho0 = exact_photon_rdm(&psi, &space, 0).unwrap();
    assert_relative_eq!(rho0[(0, 0)], 0.36, epsilon = 1e-15);
    assert_relative_eq!(rho0[(1, 1)], 0.64, epsilon = 1e-15);
    let rho1 = exact_photon_rdm(&psi, &space, 1).unwrap();
    assert_relative_eq!(rho1[(2, 2)], 0.64, epsilon = 1e-15);
    assert_eq!(rho1[(0, 2)], 0.0);
}

#[test]
fn weak_coupling_entropy_vanishes() {
    let mut prev = f64::INFINITY;
    for &g in &[0.2, 0.02, 0.002] {
        let sys = build_hubbard_holstein(&LatticeSpec::new(2, 1.0, 1.0, g, 1.0)).unwrap();
        let h = build_full_hamiltonian(&sys, 6).unwrap();
        let (_, psi) = ground_state(&h).unwrap();
        let s = exact_entropy(&psi, &h.space, 0).unwrap();
        assert!(s < prev);
        prev = s;
    }
    assert!(prev < 1e-4);
}

fn four_site(g: f64) -> ElectronBosonSystem {
    let spec = LatticeSpec::new(4, 1.0, 1.0, g, 1.0).boundary(qedhf::model::Boundary::Open);
    build_hubbard_holstein(&spec).unwrap()
}

#[test]
fn four_site_matches_independent_script() {
    // scripts/ed_reference.py: Jordan-Wigner + scipy eigsh, n_max = 8
    let h = build_full_hamiltonian(&four_site(0.5), 8).unwrap();
    let (e, _) = ground_state(&h).unwrap();
    assert_relative_eq!(e, -3.599998127685973, epsilon = 1e-9);
}

#[test]
fn four_site_truncation_convergence() {
    let sys = four_site(0.5);
    let h8 = build_full_hamiltonian(&sys, 8).unwrap();
    let h12 = build_full_hamiltonian(&sys, 12).unwrap();
    assert!(h12.asymmetry() < 1e-12);
    let (e8, psi8) = ground_state(&h8).unwrap();
    let (e12, psi12) = ground_state(&h12).unwrap();
    assert!((e8 - e12).abs() < 1e-8, "{e8} vs {e12}");
    let s8 = exact_entropy(&psi8, &h8.space, 0).unwrap();
    let s12 = exact_entropy(&psi12, &h12.space, 0).unwrap();
    assert!((s8 - s12).abs() < 1e-8, "{s8} vs {s12}");
}
