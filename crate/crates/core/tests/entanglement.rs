mod common;

use common::*;
use qedhf::boson::Ordering;
use qedhf::entanglement::{
    entropy_dual_route, mean_field_entropies, mean_field_wavefunction, Branch, MeanFieldPolaritonState,
};
use qedhf::model::{build_hubbard_holstein, Filling, LatticeSpec};
use qedhf::scf::{scf_solve, AnsatzKind, ScfOptions};
use qedhf::Error;
use rand::Rng;

#[test]
fn zero_displacement_gives_product_state() {
    let sys = hh4(1.0, 0.0, 1.0);
    for ansatz in [AnsatzKind::Gss, AnsatzKind::Vt, AnsatzKind::HfBare, AnsatzKind::Cs] {
        let res = scf_solve(&sys, ansatz, &ScfOptions::default()).unwrap();
        for state in mean_field_wavefunction(&res).unwrap() {
            assert_eq!(state.branches.len(), 1, "{ansatz}");
            assert!(state.branches[0].z.abs() < 1e-12);
            assert!((state.branches[0].weight - 1.0).abs() < 1e-12);
        }
        assert!(mean_field_entropies(&res).unwrap().1.abs() < 1e-12);
    }
}

#[test]
fn single_electron_dimer_has_two_branches() {
    let spec = LatticeSpec::new(2, 1.0, 0.0, 0.8, 1.0).filling(Filling::Electrons(1));
    let sys = build_hubbard_holstein(&spec).unwrap();
    let res = scf_solve(&sys, AnsatzKind::Gss, &ScfOptions::default()).unwrap();
    let c = res.coefficients.column(0);
    let states = mean_field_wavefunction(&res).unwrap();
    assert_eq!(states.len(), 2);
    for (a, state) in states.iter().enumerate() {
        assert_eq!(state.branches.len(), 2);
        // the branch displaced by this site's mode carries |C_a|^2
        let zeta = res.params.f_of(a) * res.params.eta.as_ref().unwrap()[a][a] / (2.0f64).sqrt();
        let displaced = state.branches.iter().find(|b| (b.z - zeta).abs() < 1e-12).unwrap();
        assert!((displaced.weight - c[a] * c[a]).abs() < 1e-12);
    }
}

#[test]
fn lattice_branch_weights_are_complete() {
    let sys = hh4(1.0, 1.0, 1.0);
    let res = scf_solve(&sys, AnsatzKind::Gss, &ScfOptions::default()).unwrap();
    for state in mean_field_wavefunction(&res).unwrap() {
        assert!((state.total_weight() - 1.0).abs() < 1e-10);
        assert!(state.discarded_weight < 1e-8);
        let (fock, gram) = entropy_dual_route(&state).unwrap();
        assert!((fock - gram).abs() < 1e-8);
        assert!(fock >= -1e-12 && fock <= (state.branches.len() as f64).ln() + 1e-12);
    }
}

#[test]
fn unconverged_input_is_rejected() {
    let sys = hh4(1.0, 1.0, 1.0);
    let opts = ScfOptions {
        max_iterations: 1,
        starts: 1,
        hierarchy: false,
        ..ScfOptions::default()
    };
    let res = scf_solve(&sys, AnsatzKind::Gss, &opts).unwrap();
    assert!(matches!(mean_field_wavefunction(&res), Err(Error::Unconverged)));
}

#[test]
fn randomized_branch_sets_agree_across_routes() {
    let mut r = rng(42);
    for _ in 0..25 {
        let k = r.random_range(1..6);
        let w: Vec<f64> = (0..k).map(|_| r.random_range(0.05..1.0)).collect();
        let total: f64 = w.iter().sum();
        let branches: Vec<Branch> = w
            .iter()
            .map(|x| Branch {
                weight: x / total,
                z: r.random_range(-1.5..1.5),
            })
            .collect();
        let sq: f64 = r.random_range(-0.5..0.5);
        for ordering in [Ordering::DisplaceSqueeze, Ordering::SqueezeDisplace] {
            let state = MeanFieldPolaritonState::from_branches(&branches, sq, ordering).unwrap();
            let (fock, gram) = entropy_dual_route(&state).unwrap();
            assert!((fock - gram).abs() < 1e-8);
            assert!(fock <= (state.branches.len() as f64).ln() + 1e-10);
        }
    }
}
