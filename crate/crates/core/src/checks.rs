//! Invariant suite shared by the `verify` command and the acceptance tests.
//! Every check returns an outcome instead of panicking so that a report can
//! list all failures at once.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::boson::{
    closed_form_overlap, displacement_matrix, franck_condon_numeric, franck_condon_one_body, squeeze_matrix,
    Ordering, SqueezedCoherentState, TruncatedFockBasis,
};
use crate::entanglement::{entropy_dual_route, Branch, MeanFieldPolaritonState};
use crate::error::Result;
use crate::model::{
    build_hubbard_holstein, load_dipole_operators, load_fcidump, BosonMode, Boundary, ElectronBosonSystem, Eri,
    Filling, LatticeSpec, ModeLayout,
};
use crate::oracle::{build_full_hamiltonian, ground_state};
use crate::scf::{
    fock_matrix, grad_r, param_gradients, scan_parameter, scf_solve, total_energy, AnsatzKind, ScanParam, ScfOptions,
    VariationalParams,
};
use crate::transforms::{
    ansatz_unitary, assemble, assemble_bare, dress, lowest_eigenvalues, numeric_similarity_transform, restrict_bosons,
    DipoleFrame,
};

/// Deliberate defects used to confirm that the checks can fail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Faults {
    /// Multiplies the `b^2 + b^+2` coefficient of every dressed mode.
    pub pair_scale: f64,
    /// Added to every analytic gradient, scaled by `1 + |g|`.
    pub gradient_offset: f64,
}

impl Default for Faults {
    fn default() -> Self {
        Self {
            pair_scale: 1.0,
            gradient_offset: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl CheckOutcome {
    fn from_result(name: &str, start: Instant, r: Result<(bool, String)>) -> Self {
        let (passed, detail) = match r {
            Ok(x) => x,
            Err(e) => (false, format!("error: {e}")),
        };
        Self {
            name: name.to_string(),
            passed,
            detail,
            elapsed: start.elapsed(),
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {} ({:.1} s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.elapsed.as_secs_f64(),
            self.detail
        )
    }
}

fn run(name: &str, f: impl FnOnce() -> Result<(bool, String)>) -> CheckOutcome {
    let start = Instant::now();
    CheckOutcome::from_result(name, start, f())
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A named system used by the checks.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: String,
    pub system: ElectronBosonSystem,
}

impl Fixture {
    pub fn new(name: impl Into<String>, system: ElectronBosonSystem) -> Self {
        Self {
            name: name.into(),
            system,
        }
    }
}

/// Two-site lattice with one cavity mode on the lattice dipole.
pub fn dimer(electrons: usize, u: f64, g: f64, omega: f64) -> Result<ElectronBosonSystem> {
    build_hubbard_holstein(
        &LatticeSpec::new(2, 1.0, u, g, omega)
            .filling(Filling::Electrons(electrons))
            .layout(ModeLayout::SingleCavity),
    )
}

/// Open Hubbard-Holstein chain at half filling with one mode per site.
pub fn open_chain(n_sites: usize, u: f64, g: f64, omega: f64) -> Result<ElectronBosonSystem> {
    build_hubbard_holstein(&LatticeSpec::new(n_sites, 1.0, u, g, omega).boundary(Boundary::Open))
}

/// One site, one electron, one mode: the displaced oscillator.
pub fn displaced_oscillator(g: f64, omega: f64) -> Result<ElectronBosonSystem> {
    Ok(
        ElectronBosonSystem::electronic(DMatrix::zeros(1, 1), Eri::zeros(1), 1, 0.0)?
            .with_modes(vec![BosonMode::new(omega, g, DMatrix::identity(1, 1))?])?
            .with_dse(false),
    )
}

/// Molecule from `<dir>/<name>_sto3g.{fcidump,dipole}` with one cavity mode
/// along the first dipole component, dipole self-energy included.
pub fn molecule(dir: &Path, name: &str, lambda: f64, omega: f64) -> Result<ElectronBosonSystem> {
    let sys = load_fcidump(dir.join(format!("{name}_sto3g.fcidump")))?;
    let d = load_dipole_operators(dir.join(format!("{name}_sto3g.dipole")), sys.n_orbitals)?;
    Ok(sys
        .with_modes(vec![BosonMode::new(omega, lambda, d[0].clone())?])?
        .with_dse(true))
}

/// Default fixture directory: `QEDHF_FIXTURES`, else the bundled one.
pub fn fixture_dir() -> PathBuf {
    std::env::var_os("QEDHF_FIXTURES")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures"))
}

/// Small single-mode systems on which dense assembly is affordable.
pub fn assembly_fixtures(dir: &Path) -> Result<Vec<Fixture>> {
    Ok(vec![
        Fixture::new("dimer-1e", dimer(1, 1.0, 0.5, 1.0)?),
        Fixture::new("dimer-2e", dimer(2, 1.0, 0.7, 1.0)?),
        Fixture::new("h2", molecule(dir, "h2", 0.3, 0.5)?),
    ])
}

/// Systems for the gradient and reduction checks.
pub fn mean_field_fixtures(dir: &Path) -> Result<Vec<Fixture>> {
    Ok(vec![
        Fixture::new("dimer-2e", dimer(2, 1.0, 0.7, 1.0)?),
        Fixture::new("polaron", dimer(1, 0.0, 0.5, 1.0)?),
        Fixture::new("chain-4", open_chain(4, 1.0, 1.0, 1.0)?),
        Fixture::new("h2", molecule(dir, "h2", 0.2, 0.4)?),
        Fixture::new("lih", molecule(dir, "lih", 0.1, 0.05)?),
    ])
}

fn random_params(frame: &DipoleFrame, ansatz: AnsatzKind, rng: &mut ChaCha8Rng) -> VariationalParams {
    let mut p = VariationalParams::initial(ansatz, frame);
    for v in p.f.iter_mut().flatten() {
        *v = rng.random_range(0.05..1.0);
    }
    for v in p.r.iter_mut().flatten() {
        *v = rng.random_range(-0.2..0.2);
    }
    for v in p.z.iter_mut().flatten() {
        *v = rng.random_range(-0.5..0.5);
    }
    for v in p.eta.iter_mut().flatten().flatten() {
        *v += rng.random_range(-0.2..0.2);
    }
    p
}

fn lower_block(m: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    m.view((0, 0), (k, k)).into_owned()
}

/// Displacement and squeeze unitarity, their ladder actions on the lowest
/// 12 states of an 80-quantum basis, the squeeze-displacement rotation, closed-form overlaps and Franck-Condon
/// factors against truncated matrices.
pub fn operator_algebra(seed: u64) -> CheckOutcome {
    run("operator algebra", || {
        let mut r = rng(seed);
        let small = TruncatedFockBasis::new(40)?;
        let big = TruncatedFockBasis::new(80)?;
        let b = big.annihilation();
        let id = DMatrix::<f64>::identity(big.dim(), big.dim());
        let mut worst = 0.0f64;
        for _ in 0..5 {
            let z: f64 = r.random_range(-1.0..1.0);
            let sq: f64 = r.random_range(-0.5..0.5);
            let d = displacement_matrix(z, &small);
            let s = squeeze_matrix(sq, &small)?;
            let n = small.dim();
            worst = worst.max((d.transpose() * &d - DMatrix::identity(n, n)).amax());
            worst = worst.max((s.transpose() * &s - DMatrix::identity(n, n)).amax());

            let d = displacement_matrix(z, &big);
            let s = squeeze_matrix(sq, &big)?;
            let shifted = d.transpose() * &b * &d - (&b - &id * z);
            worst = worst.max(lower_block(&shifted, 12).amax());
            let bog = s.transpose() * &b * &s - (&b * sq.cosh() - b.transpose() * sq.sinh());
            worst = worst.max(lower_block(&bog, 12).amax());
            let rot = &s * &d - displacement_matrix((-sq).exp() * z, &big) * &s;
            worst = worst.max(lower_block(&rot, 12).amax());

            let z2: f64 = r.random_range(-1.0..1.0);
            for ordering in [Ordering::DisplaceSqueeze, Ordering::SqueezeDisplace] {
                let a = SqueezedCoherentState::new(z, sq, ordering);
                let c = SqueezedCoherentState::new(z2, sq, ordering);
                let (va, _) = a.amplitudes(&big)?;
                let (vc, _) = c.amplitudes(&big)?;
                worst = worst.max((va.dot(&vc) - closed_form_overlap(&a, &c)?).abs());
            }

            let (e1, e2, f, w) = (r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(0.0..1.0), 0.7);
            let exact = franck_condon_one_body(e1, e2, f, sq, w)?;
            let numeric = franck_condon_numeric(&[e1], &[e2], f, sq, w, 60)?;
            worst = worst.max((exact - numeric).abs());
        }
        Ok((worst < 1e-8, format!("max deviation {worst:.2e} (tol 1e-8)")))
    })
}

/// Lowest `n_max / 3` eigenvalues of every dressed Hamiltonian agree with
/// the bare spectrum. Random points draw `|r| < 0.2` and `|z| < 0.5`; at
/// `n_max = 30` larger amplitudes leave truncation errors above `1e-7`.
pub fn spectrum_invariance(fixtures: &[Fixture], points: usize, n_max: usize, seed: u64, faults: Faults) -> CheckOutcome {
    run("spectrum invariance", || {
        let mut r = rng(seed);
        let k = n_max / 3;
        let mut worst = 0.0f64;
        let mut where_ = String::new();
        for fx in fixtures {
            let frame = DipoleFrame::new(&fx.system)?;
            let bare = lowest_eigenvalues(&assemble_bare(&frame, n_max)?, k);
            for ansatz in AnsatzKind::ALL {
                for _ in 0..points {
                    let p = random_params(&frame, ansatz, &mut r);
                    let mut d = dress(&frame, ansatz, &p)?;
                    for m in &mut d.modes {
                        m.photon_pair *= faults.pair_scale;
                    }
                    let vals = lowest_eigenvalues(&assemble(&d, &frame, n_max)?, k);
                    let err = bare.iter().zip(&vals).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    if err > worst {
                        worst = err;
                        where_ = format!("{} {ansatz}", fx.name);
                    }
                }
            }
        }
        Ok((
            worst < 1e-7,
            format!("max eigenvalue deviation {worst:.2e} at {where_} (tol 1e-7, {k} levels, n_max {n_max})"),
        ))
    })
}

/// The squeeze-first coherent dressing equals the displace-first one with
/// the displacement scaled by `e^{-r}`: coefficient sets and their dense
/// assemblies agree, and both match `U^T H U` with `U = D(e^{-r} z) S(r)`.
pub fn squeeze_displace_rotation(fixture: &Fixture, points: usize, seed: u64) -> CheckOutcome {
    run("squeeze-displacement rotation", || {
        let mut r = rng(seed);
        let frame = DipoleFrame::new(&fixture.system)?;
        let n_max = 100;
        let bare = assemble_bare(&frame, n_max)?;
        let mut worst = 0.0f64;
        let mut worst_numeric = 0.0f64;
        for _ in 0..points {
            let z: f64 = r.random_range(-1.0..1.0);
            let sq: f64 = r.random_range(-0.4..0.4);
            let scs = VariationalParams {
                r: Some(vec![sq]),
                z: Some(vec![z]),
                ..Default::default()
            };
            let css = VariationalParams {
                r: Some(vec![sq]),
                z: Some(vec![(-sq).exp() * z]),
                ..Default::default()
            };
            let a = assemble(&dress(&frame, AnsatzKind::Scs, &scs)?, &frame, n_max)?;
            let b = assemble(&dress(&frame, AnsatzKind::Css, &css)?, &frame, n_max)?;
            worst = worst.max((a.to_dense() - b.to_dense()).amax());
            let u = ansatz_unitary(&frame, AnsatzKind::Css, &css, n_max)?;
            let numeric = numeric_similarity_transform(&bare, &u)?;
            let err = (restrict_bosons(&numeric, 12)? - restrict_bosons(&a, 12)?).amax();
            worst_numeric = worst_numeric.max(err);
        }
        Ok((
            worst < 1e-9 && worst_numeric < 1e-9,
            format!("assembled {worst:.2e}, against U^T H U on 12 quanta {worst_numeric:.2e} (tol 1e-9)"),
        ))
    })
}

/// Scanning the squeeze of the displace-first coherent ansatz: the minimum
/// sits at `r = 0` and equals the coherent-state energy.
pub fn css_vacuum_neutrality(fixture: &Fixture, resolution: f64, half_width: usize, options: &ScfOptions) -> CheckOutcome {
    run("coherent-squeezed vacuum neutrality", || {
        let cs = scf_solve(&fixture.system, AnsatzKind::Cs, options)?;
        let grid: Vec<f64> = (-(half_width as i64)..=half_width as i64)
            .map(|i| i as f64 * resolution)
            .collect();
        let curve = scan_parameter(&fixture.system, AnsatzKind::Css, ScanParam::R, &grid, options)?;
        let mut best = (f64::NAN, f64::INFINITY);
        for p in &curve {
            let e = p.result.as_ref().map_err(|e| crate::Error::Invalid(e.to_string()))?.energy.total;
            if e < best.1 {
                best = (p.value, e);
            }
        }
        let diff = (best.1 - cs.energy.total).abs();
        Ok((
            best.0.abs() <= resolution && diff < 1e-9,
            format!("argmin r = {:.1e}, |E_min - E_CS| = {diff:.2e}", best.0),
        ))
    })
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
}

/// Analytic squeeze, `f`, `eta`, `z` gradients and the Fock matrix against
/// central differences (`h = 1e-5`) at random points.
pub fn gradient_suite(fixtures: &[Fixture], points: usize, seed: u64, faults: Faults) -> CheckOutcome {
    run("gradients", || {
        let h = 1e-5;
        let mut r = rng(seed);
        let mut worst = 0.0f64;
        let mut where_ = String::new();
        let perturb = |g: f64| g + faults.gradient_offset * (1.0 + g.abs());
        for fx in fixtures {
            let frame = DipoleFrame::new(&fx.system)?;
            let n = fx.system.n_orbitals;
            let s = fx.system.spin.degeneracy();
            for ansatz in [AnsatzKind::Gss, AnsatzKind::Sgs, AnsatzKind::Vt, AnsatzKind::Scs] {
                for _ in 0..points {
                    let p = random_params(&frame, ansatz, &mut r);
                    let m = DMatrix::from_fn(n, n, |_, _| r.random_range(-0.5..0.5));
                    let rho = (&m + m.transpose()) * 0.5;
                    let d = dress(&frame, ansatz, &p)?;
                    let energy = |q: &VariationalParams| -> Result<f64> { Ok(total_energy(&rho, &dress(&frame, ansatz, q)?)?.total) };
                    let mut record = |analytic: f64, fd: f64, what: &str| {
                        let e = rel_err(perturb(analytic), fd);
                        if e > worst {
                            worst = e;
                            where_ = format!("{} {ansatz} {what}", fx.name);
                        }
                    };
                    let g = param_gradients(&rho, &p, &d)?;
                    let direct_r = if ansatz.has_r() { Some(grad_r(&rho, &d)?) } else { None };
                    for a in 0..frame.n_modes() {
                        let fd = |set: &dyn Fn(&mut VariationalParams, f64), x0: f64| -> Result<f64> {
                            let mut hi = p.clone();
                            set(&mut hi, x0 + h);
                            let mut lo = p.clone();
                            set(&mut lo, x0 - h);
                            Ok((energy(&hi)? - energy(&lo)?) / (2.0 * h))
                        };
                        if let Some(gr) = &direct_r {
                            let v = fd(&|q, x| q.r.as_mut().expect("r")[a] = x, p.r_of(a))?;
                            record(gr[a], v, "r");
                        }
                        if let Some(gf) = &g.f {
                            let v = fd(&|q, x| q.f.as_mut().expect("f")[a] = x, p.f_of(a))?;
                            record(gf[a], v, "f");
                        }
                        if let Some(gz) = &g.z {
                            let v = fd(&|q, x| q.z.as_mut().expect("z")[a] = x, p.z_of(a))?;
                            record(gz[a], v, "z");
                        }
                        if let Some(ge) = &g.eta {
                            for k in 0..n {
                                let x0 = p.eta.as_ref().expect("eta")[a][k];
                                let v = fd(&|q, x| q.eta.as_mut().expect("eta")[a][k] = x, x0)?;
                                record(ge[a][k], v, "eta");
                            }
                        }
                    }
                    let f = fock_matrix(&rho, &d)?;
                    for i in 0..n {
                        for j in i..n {
                            let at = |x: f64| -> Result<f64> {
                                let mut m = rho.clone();
                                m[(i, j)] += x;
                                if i != j {
                                    m[(j, i)] += x;
                                }
                                Ok(total_energy(&m, &d)?.total)
                            };
                            let fd = (at(h)? - at(-h)?) / (2.0 * h);
                            let analytic = if i == j { s * f[(i, i)] } else { 2.0 * s * f[(i, j)] };
                            record(analytic, fd, "fock");
                        }
                    }
                }
            }
        }
        Ok((worst < 1e-6, format!("max relative deviation {worst:.2e} at {where_} (tol 1e-6)")))
    })
}

/// GSS with the squeeze pinned at zero reproduces VT.
pub fn reduction_identity(fixtures: &[Fixture], options: &ScfOptions) -> CheckOutcome {
    run("squeeze-free reduction", || {
        let mut worst = 0.0f64;
        let mut all_converged = true;
        for fx in fixtures {
            let vt = scf_solve(&fx.system, AnsatzKind::Vt, options)?;
            let pinned = options.clone().with_fixed(ScanParam::R, 0.0);
            let gss = scf_solve(&fx.system, AnsatzKind::Gss, &pinned)?;
            all_converged &= vt.converged && gss.converged;
            worst = worst.max((vt.energy.total - gss.energy.total).abs());
        }
        Ok((
            all_converged && worst < 1e-10,
            format!("max |E_GSS(r=0) - E_VT| = {worst:.2e} (tol 1e-10), converged: {all_converged}"),
        ))
    })
}

/// Exact ground energy of the displaced oscillator, `-g^2/2 + w/2`.
pub fn displaced_oscillator_exactness() -> CheckOutcome {
    run("displaced oscillator", || {
        let mut worst = 0.0f64;
        for g in [0.1, 1.0, 3.0] {
            let sys = displaced_oscillator(g, 1.0)?;
            let n_max = 80;
            let (e, _) = ground_state(&build_full_hamiltonian(&sys, n_max)?)?;
            worst = worst.max((e - (-g * g / 2.0 + 0.5)).abs());
        }
        Ok((worst < 1e-9, format!("max deviation {worst:.2e} (tol 1e-9)")))
    })
}

/// Fock-basis and Gram-matrix entropies of random branch sets.
pub fn entropy_routes(sets: usize, seed: u64) -> CheckOutcome {
    run("entropy dual route", || {
        let mut r = rng(seed);
        let mut worst = 0.0f64;
        for _ in 0..sets {
            let k = r.random_range(1..7);
            let w: Vec<f64> = (0..k).map(|_| r.random_range(0.02..1.0)).collect();
            let total: f64 = w.iter().sum();
            let branches: Vec<Branch> = w
                .iter()
                .map(|x| Branch {
                    weight: x / total,
                    z: r.random_range(-2.0..2.0),
                })
                .collect();
            let sq = r.random_range(-0.5..0.5);
            let ordering = if r.random_bool(0.5) {
                Ordering::DisplaceSqueeze
            } else {
                Ordering::SqueezeDisplace
            };
            let state = MeanFieldPolaritonState::from_branches(&branches, sq, ordering)?;
            let fock = crate::entanglement::fock_entropy(&state)?;
            let gram = crate::entanglement::gram_entropy(&state)?;
            worst = worst.max((fock - gram).abs());
            entropy_dual_route(&state)?;
        }
        Ok((worst < 1e-8, format!("max |S_Fock - S_Gram| = {worst:.2e} over {sets} sets (tol 1e-8)")))
    })
}

/// The default suite run by `verify`.
pub fn run_suite(dir: &Path, seed: u64, faults: Faults, options: &ScfOptions) -> Result<Vec<CheckOutcome>> {
    let assembly = assembly_fixtures(dir)?;
    let mean_field = mean_field_fixtures(dir)?;
    Ok(vec![
        operator_algebra(seed),
        spectrum_invariance(&assembly, 2, 30, seed, faults),
        squeeze_displace_rotation(&assembly[1], 4, seed),
        css_vacuum_neutrality(&assembly[1], 1e-3, 20, options),
        gradient_suite(&mean_field, 2, seed, faults),
        reduction_identity(&mean_field, options),
        displaced_oscillator_exactness(),
        entropy_routes(20, seed),
    ])
}
