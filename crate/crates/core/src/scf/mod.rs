//! Self-consistent optimization of the determinant and the dressing
//! parameters.
//!
//! Each macro-iteration first relaxes the parameters at fixed density
//! (projected BFGS), then takes a Roothaan step with Pulay extrapolation.
//! Different starting points (heuristic guess, the converged result of the
//! next smaller ansatz, seeded random points) are run independently and the
//! lowest converged energy is kept.

pub mod functional;
pub mod optimize;

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use functional::{
    electronic_energy, fock_matrix, grad_eta, grad_f, grad_r, grad_z, param_gradients, raw_gradients, total_energy,
    Coord, EnergyDecomposition, Frozen, ParamGradients, ParamLayout, RawGradients,
};
pub use crate::transforms::{AnsatzKind, VariationalParams};

use crate::boson::DEFAULT_SQUEEZE_CAP;
use crate::error::{Error, Result};
use crate::model::ElectronBosonSystem;
use crate::transforms::{dress_capped, DipoleFrame};
use optimize::{minimize_box, projected_gradient, Diis};

/// A parameter family that can be pinned to a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanParam {
    F,
    R,
    Z,
}

impl ScanParam {
    pub fn name(self) -> &'static str {
        match self {
            ScanParam::F => "f",
            ScanParam::R => "r",
            ScanParam::Z => "z",
        }
    }
}

impl std::str::FromStr for ScanParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "f" => Ok(ScanParam::F),
            "r" | "squeeze" => Ok(ScanParam::R),
            "z" => Ok(ScanParam::Z),
            other => Err(Error::Invalid(format!("parameter `{other}` cannot be scanned"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScfOptions {
    pub tol_energy: f64,
    pub tol_gradient: f64,
    pub max_iterations: usize,
    pub diis_depth: usize,
    pub squeeze_cap: f64,
    pub f_bounds: (f64, f64),
    /// Number of starting points besides the hierarchy warm start.
    pub starts: usize,
    pub seed: u64,
    /// Warm-start from the converged result of the next smaller ansatz.
    pub hierarchy: bool,
    pub optimize_eta: bool,
    pub fixed_f: Option<f64>,
    pub fixed_r: Option<f64>,
    pub fixed_z: Option<f64>,
    /// Explicit starting parameters, tried in addition to the others.
    pub initial: Option<VariationalParams>,
}

impl Default for ScfOptions {
    fn default() -> Self {
        Self {
            tol_energy: 1e-10,
            tol_gradient: 1e-7,
            max_iterations: 200,
            diis_depth: 8,
            squeeze_cap: DEFAULT_SQUEEZE_CAP,
            f_bounds: (-0.2, 1.2),
            starts: 3,
            seed: 0,
            hierarchy: true,
            optimize_eta: true,
            fixed_f: None,
            fixed_r: None,
            fixed_z: None,
            initial: None,
        }
    }
}

impl ScfOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, what: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Invalid(format!("{what} must be positive and finite, got {v}")))
            }
        };
        positive(self.tol_energy, "tol_energy")?;
        positive(self.tol_gradient, "tol_gradient")?;
        positive(self.squeeze_cap, "squeeze_cap")?;
        if self.max_iterations == 0 {
            return Err(Error::Invalid("max_iterations must be at least 1".into()));
        }
        let (lo, hi) = self.f_bounds;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Invalid(format!("invalid f bounds ({lo}, {hi})")));
        }
        for v in [self.fixed_f, self.fixed_r, self.fixed_z].into_iter().flatten() {
            if !v.is_finite() {
                return Err(Error::Invalid("fixed parameter values must be finite".into()));
            }
        }
        if let Some(r) = self.fixed_r {
            crate::boson::check_squeeze(r, self.squeeze_cap)?;
        }
        Ok(())
    }

    pub fn frozen(&self) -> Frozen {
        Frozen {
            f: self.fixed_f.is_some(),
            r: self.fixed_r.is_some(),
            z: self.fixed_z.is_some(),
            eta: !self.optimize_eta,
        }
    }

    pub fn with_fixed(mut self, param: ScanParam, value: f64) -> Self {
        match param {
            ScanParam::F => self.fixed_f = Some(value),
            ScanParam::R => self.fixed_r = Some(value),
            ScanParam::Z => self.fixed_z = Some(value),
        }
        self
    }

    /// Options for a warm-start run of a smaller ansatz: pins that do not
    /// apply to it are dropped.
    fn for_ansatz(&self, ansatz: AnsatzKind) -> Self {
        let mut o = self.clone();
        o.initial = None;
        if !ansatz.has_f() {
            o.fixed_f = None;
        }
        if !ansatz.has_r() {
            o.fixed_r = None;
        }
        if !ansatz.has_z() {
            o.fixed_z = None;
        }
        o
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub energy: f64,
    pub gradient_norm: f64,
    pub commutator_norm: f64,
}

#[derive(Debug, Clone)]
pub struct ScfResult {
    pub ansatz: AnsatzKind,
    /// Spatial density `C_occ C_occ^T` in the dipole frame.
    pub density: DMatrix<f64>,
    /// Orbital coefficients in the dipole frame, columns ordered by energy.
    pub coefficients: DMatrix<f64>,
    pub orbital_energies: DVector<f64>,
    pub params: VariationalParams,
    pub energy: EnergyDecomposition,
    pub trace: Vec<IterationRecord>,
    pub converged: bool,
    /// False when the energy rose after the third iteration.
    pub monotone: bool,
    /// Which starting point produced this result.
    pub start: StartKind,
    pub frame: DipoleFrame,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartKind {
    Explicit,
    Heuristic,
    Hierarchy,
    Seeded(usize),
}

impl ScfResult {
    pub fn total_energy(&self) -> f64 {
        self.energy.total
    }

    pub fn n_occupied(&self) -> usize {
        self.frame.system.n_occupied()
    }

    pub fn iterations(&self) -> usize {
        self.trace.len()
    }

    pub fn final_gradient_norm(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |t| t.gradient_norm)
    }

    pub fn final_commutator_norm(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |t| t.commutator_norm)
    }

    /// Density in the original orbital basis.
    pub fn density_original(&self) -> DMatrix<f64> {
        self.frame.to_original(&self.density)
    }

    pub fn coefficients_original(&self) -> DMatrix<f64> {
        &self.frame.rotation * &self.coefficients
    }

    /// `||rho rho - rho||_max`.
    pub fn idempotency_error(&self) -> f64 {
        (&self.density * &self.density - &self.density).amax()
    }

    pub fn require_converged(&self) -> Result<()> {
        if self.converged {
            Ok(())
        } else {
            Err(Error::Unconverged)
        }
    }
}

/// Occupied-orbital density and the eigen-decomposition of a Fock matrix.
fn aufbau(fock: &DMatrix<f64>, n_occ: usize) -> (DMatrix<f64>, DMatrix<f64>, DVector<f64>) {
    let eig = fock.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let n = fock.nrows();
    let mut c = DMatrix::zeros(n, n);
    let mut e = DVector::zeros(n);
    for (j, &k) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(k).clone_owned();
        let imax = col.iamax();
        if col[imax] < 0.0 {
            col = -col;
        }
        c.set_column(j, &col);
        e[j] = eig.eigenvalues[k];
    }
    let occ = c.columns(0, n_occ);
    let rho = occ * occ.transpose();
    (rho, c, e)
}

fn apply_fixed(p: &mut VariationalParams, ansatz: AnsatzKind, o: &ScfOptions) {
    let set = |v: &mut Option<Vec<f64>>, x: Option<f64>| {
        if let (Some(v), Some(x)) = (v.as_mut(), x) {
            v.iter_mut().for_each(|e| *e = x);
        }
    };
    if ansatz.has_f() {
        set(&mut p.f, o.fixed_f);
    }
    if ansatz.has_r() {
        set(&mut p.r, o.fixed_r);
    }
    if ansatz.has_z() {
        set(&mut p.z, o.fixed_z);
    }
}

/// The next smaller ansatz used for warm starts.
pub fn parent(ansatz: AnsatzKind) -> Option<AnsatzKind> {
    match ansatz {
        AnsatzKind::HfBare => None,
        AnsatzKind::Cs | AnsatzKind::Sq => Some(AnsatzKind::HfBare),
        AnsatzKind::Vt | AnsatzKind::Css | AnsatzKind::Scs => Some(AnsatzKind::Cs),
        AnsatzKind::Gss | AnsatzKind::Sgs => Some(AnsatzKind::Vt),
    }
}

/// Embeds converged parameters of `from` into `to` so that the energy is
/// unchanged: a scalar displacement `z` becomes `f = 1` with uniform
/// `eta = sqrt(2w) z / N`.
pub fn embed_params(
    frame: &DipoleFrame,
    from: AnsatzKind,
    p: &VariationalParams,
    to: AnsatzKind,
) -> VariationalParams {
    let mut out = VariationalParams::initial(to, frame);
    let n_modes = frame.n_modes();
    let n_el = frame.system.n_electrons.max(1) as f64;
    if to.has_r() {
        if let (Some(dst), true) = (out.r.as_mut(), from.has_r()) {
            dst.copy_from_slice(p.r.as_ref().expect("r present"));
        }
    }
    if to.has_z() && from.has_z() {
        out.z = p.z.clone();
    }
    if to.has_f() {
        if from.has_f() {
            out.f = p.f.clone();
            out.eta = p.eta.clone();
        } else if from.has_z() {
            let f = out.f.as_mut().expect("f present");
            let eta = out.eta.as_mut().expect("eta present");
            for a in 0..n_modes {
                let root = (2.0 * frame.system.modes[a].omega).sqrt();
                f[a] = 1.0;
                eta[a].iter_mut().for_each(|e| *e = root * p.z_of(a) / n_el);
            }
        }
    }
    out
}

/// Heuristic starting parameters: `f` from the spread of the coupling
/// eigenvalues relative to `w` times the one-body bandwidth, `z` from the
/// mean dipole of the core guess, `r = 0`, `eta = g`.
pub fn initial_guess(frame: &DipoleFrame, ansatz: AnsatzKind, rho: &DMatrix<f64>) -> VariationalParams {
    let mut p = VariationalParams::initial(ansatz, frame);
    let sys = &frame.system;
    let s = sys.spin.degeneracy();
    let bandwidth = {
        let e = sys.h.clone().symmetric_eigen().eigenvalues;
        (e.max() - e.min()).max(1e-12)
    };
    for (a, mode) in sys.modes.iter().enumerate() {
        let g = &frame.eigenvalues[a];
        if let Some(f) = p.f.as_mut() {
            let spread = g.max() - g.min();
            let x = spread * spread;
            f[a] = if x > 0.0 { (x / (x + mode.omega * bandwidth)).clamp(0.0, 1.0) } else { 0.0 };
        }
        if let Some(z) = p.z.as_mut() {
            let d = (mode.coupling_matrix() * rho).trace() * s;
            z[a] = d / (2.0 * mode.omega).sqrt();
        }
    }
    p
}

/// Seeded starting point: random parameters and a density from the core
/// Hamiltonian plus a random symmetric perturbation of half the one-body
/// bandwidth, which lets the solver leave symmetric saddle points.
fn seeded_guess(
    frame: &DipoleFrame,
    ansatz: AnsatzKind,
    base: &VariationalParams,
    seed: u64,
    k: usize,
) -> (VariationalParams, DMatrix<f64>) {
    // draws are made in a fixed order for every ansatz, so pinned runs of a
    // larger ansatz see the same starting points as the smaller one
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(k as u64));
    let mut p = base.clone();
    for a in 0..frame.n_modes() {
        let f: f64 = rng.random_range(0.0..1.0);
        let r: f64 = rng.random_range(-0.5..0.5);
        let dz: f64 = rng.random_range(-1.0..1.0);
        if ansatz.has_f() {
            p.f.as_mut().expect("f present")[a] = f;
        }
        if ansatz.has_r() {
            p.r.as_mut().expect("r present")[a] = r;
        }
        if ansatz.has_z() {
            p.z.as_mut().expect("z present")[a] += dz;
        }
    }
    let h = &frame.system.h;
    let n = h.nrows();
    let e = h.clone().symmetric_eigen().eigenvalues;
    let scale = 0.5 * (e.max() - e.min()).max(1.0);
    let noise = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let perturbed = h + (&noise + noise.transpose()) * (0.5 * scale);
    let (rho, _, _) = aufbau(&perturbed, frame.system.n_occupied());
    (p, rho)
}

struct Start {
    kind: StartKind,
    params: VariationalParams,
    density: Option<DMatrix<f64>>,
}

/// Solves the mean-field equations of `ansatz` for `system`.
pub fn scf_solve(system: &ElectronBosonSystem, ansatz: AnsatzKind, options: &ScfOptions) -> Result<ScfResult> {
    system.validate()?;
    options.validate()?;
    let frame = DipoleFrame::new(system)?;
    frame.require_common(ansatz)?;
    solve_in_frame(&frame, ansatz, options)
}

/// As [`scf_solve`] with a precomputed dipole frame.
pub fn solve_in_frame(frame: &DipoleFrame, ansatz: AnsatzKind, options: &ScfOptions) -> Result<ScfResult> {
    let sys = &frame.system;
    let n_occ = sys.n_occupied();
    let (core_rho, _, _) = aufbau(&sys.h, n_occ);
    let mut starts = Vec::new();
    if let Some(p) = &options.initial {
        p.validate(ansatz, frame.n_modes(), sys.n_orbitals, options.squeeze_cap)?;
        starts.push(Start {
            kind: StartKind::Explicit,
            params: p.clone(),
            density: None,
        });
    }
    let heuristic = initial_guess(frame, ansatz, &core_rho);
    starts.push(Start {
        kind: StartKind::Heuristic,
        params: heuristic.clone(),
        density: None,
    });
    if options.hierarchy {
        if let Some(up) = parent(ansatz) {
            let prev = solve_in_frame(frame, up, &options.for_ansatz(up))?;
            starts.push(Start {
                kind: StartKind::Hierarchy,
                params: embed_params(frame, up, &prev.params, ansatz),
                density: Some(prev.density),
            });
        }
    }
    for k in 1..options.starts {
        let (params, density) = seeded_guess(frame, ansatz, &heuristic, options.seed, k);
        starts.push(Start {
            kind: StartKind::Seeded(k),
            params,
            density: Some(density),
        });
    }

    let mut best: Option<ScfResult> = None;
    for mut start in starts {
        apply_fixed(&mut start.params, ansatz, options);
        let rho = start.density.unwrap_or_else(|| core_rho.clone());
        let result = run_single(frame, ansatz, options, start.params, rho, start.kind)?;
        debug!(
            "{ansatz} start {:?}: E = {:.12} converged = {} after {} iterations",
            result.start,
            result.energy.total,
            result.converged,
            result.iterations()
        );
        best = Some(match best {
            None => result,
            Some(b) => {
                let better = match (result.converged, b.converged) {
                    (true, false) => true,
                    (false, true) => false,
                    _ => result.energy.total < b.energy.total - 1e-12,
                };
                if better {
                    result
                } else {
                    b
                }
            }
        });
    }
    let best = best.expect("at least one start");
    if !best.converged {
        warn!("{ansatz} SCF did not converge (last |grad| {:.2e})", best.final_gradient_norm());
    }
    Ok(best)
}

fn run_single(
    frame: &DipoleFrame,
    ansatz: AnsatzKind,
    options: &ScfOptions,
    mut params: VariationalParams,
    mut rho: DMatrix<f64>,
    kind: StartKind,
) -> Result<ScfResult> {
    let sys = &frame.system;
    let n_occ = sys.n_occupied();
    let cap = options.squeeze_cap;
    let layout = ParamLayout::new(ansatz, frame, options.frozen());
    let (lower, upper) = layout.bounds(cap, options.f_bounds);
    // keep the starting point feasible
    {
        let mut x = layout.pack(&params);
        for i in 0..x.len() {
            x[i] = x[i].clamp(lower[i], upper[i]);
        }
        params = layout.unpack(&x, &params);
    }
    params.validate(ansatz, frame.n_modes(), sys.n_orbitals, cap)?;

    let mut diis = Diis::new(options.diis_depth);
    let mut trace: Vec<IterationRecord> = Vec::new();
    let mut coefficients = DMatrix::identity(sys.n_orbitals, sys.n_orbitals);
    let mut orbital_energies = DVector::zeros(sys.n_orbitals);
    let mut converged = false;
    let mut energy = EnergyDecomposition::default();

    for iteration in 1..=options.max_iterations {
        if !layout.is_empty() {
            let x0 = layout.pack(&params);
            let base = params.clone();
            let min = minimize_box(&x0, &lower, &upper, 0.1 * options.tol_gradient, 500, |x| {
                let p = layout.unpack(x, &base);
                let d = dress_capped(frame, ansatz, &p, cap).ok()?;
                let e = total_energy(&rho, &d).ok()?.total;
                let g = layout.gradient(&param_gradients(&rho, &p, &d).ok()?);
                Some((e, g))
            });
            params = layout.unpack(&min.x, &base);
        }
        let dressed = dress_capped(frame, ansatz, &params, cap)?;
        energy = total_energy(&rho, &dressed)?;
        let fock = fock_matrix(&rho, &dressed)?;
        let comm = &fock * &rho - &rho * &fock;
        let gradient_norm = if layout.is_empty() {
            0.0
        } else {
            let g = layout.gradient(&param_gradients(&rho, &params, &dressed)?);
            let x = layout.pack(&params);
            projected_gradient(&x, &g, &lower, &upper)
                .iter()
                .fold(0.0, |m: f64, v| m.max(v.abs()))
        };
        let commutator_norm = comm.amax();
        let previous = trace.last().map(|t| t.energy);
        trace.push(IterationRecord {
            iteration,
            energy: energy.total,
            gradient_norm,
            commutator_norm,
        });
        if let Some(prev) = previous {
            if (energy.total - prev).abs() < options.tol_energy
                && gradient_norm < options.tol_gradient
                && commutator_norm < options.tol_gradient
            {
                converged = true;
                break;
            }
        }
        diis.push(fock.clone(), comm);
        let extrapolated = if iteration >= 2 { diis.extrapolate() } else { fock.clone() };
        let (next, c, e) = descent_step(&extrapolated, &fock, &rho, &dressed, energy.total, n_occ, &mut diis)?;
        rho = next;
        coefficients = c;
        orbital_energies = e;
    }

    let monotone = trace
        .windows(2)
        .skip(2)
        .all(|w| w[1].energy <= w[0].energy + 1e-9 * w[0].energy.abs().max(1.0));
    if !monotone {
        warn!("{ansatz} SCF energy rose after the third iteration ({kind:?} start)");
    }
    if trace.len() == 1 || coefficients == DMatrix::identity(sys.n_orbitals, sys.n_orbitals) {
        // no Roothaan step was taken; report orbitals consistent with rho
        let dressed = dress_capped(frame, ansatz, &params, cap)?;
        let (_, c, e) = aufbau(&fock_matrix(&rho, &dressed)?, n_occ);
        coefficients = c;
        orbital_energies = e;
    }
    Ok(ScfResult {
        ansatz,
        density: rho,
        coefficients,
        orbital_energies,
        params,
        energy,
        trace,
        converged,
        monotone,
        start: kind,
        frame: frame.clone(),
    })
}

/// Roothaan step that does not raise the energy at fixed parameters: the
/// extrapolated Fock matrix is tried first, then the plain one, then
/// increasing virtual-level shifts. Falls back to the plain step when
/// nothing descends (at convergence the changes are at rounding level).
fn descent_step(
    extrapolated: &DMatrix<f64>,
    fock: &DMatrix<f64>,
    rho: &DMatrix<f64>,
    dressed: &crate::transforms::DressedHamiltonian,
    current: f64,
    n_occ: usize,
    diis: &mut Diis,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DVector<f64>)> {
    let slack = 1e-12 * current.abs().max(1.0);
    let candidate = aufbau(extrapolated, n_occ);
    if total_energy(&candidate.0, dressed)?.total <= current + slack {
        return Ok(candidate);
    }
    diis.clear();
    let plain = aufbau(fock, n_occ);
    if total_energy(&plain.0, dressed)?.total <= current + slack {
        return Ok(plain);
    }
    let n = fock.nrows();
    let virt = DMatrix::<f64>::identity(n, n) - rho;
    let mut shift = 0.25;
    for _ in 0..16 {
        let shifted = aufbau(&(fock + &virt * shift), n_occ);
        if total_energy(&shifted.0, dressed)?.total <= current + slack {
            debug!("level shift {shift} restored descent");
            return Ok(shifted);
        }
        shift *= 2.0;
    }
    Ok(plain)
}

/// One point of a parameter scan.
#[derive(Debug)]
pub struct ScanPoint {
    pub value: f64,
    pub result: Result<ScfResult>,
}

impl ScanPoint {
    pub fn energy(&self) -> Option<f64> {
        self.result.as_ref().ok().map(|r| r.energy.total)
    }
}

/// Solves with `param` pinned at each grid value.
pub fn scan_parameter(
    system: &ElectronBosonSystem,
    ansatz: AnsatzKind,
    param: ScanParam,
    grid: &[f64],
    options: &ScfOptions,
) -> Result<Vec<ScanPoint>> {
    let carries = match param {
        ScanParam::F => ansatz.has_f(),
        ScanParam::R => ansatz.has_r(),
        ScanParam::Z => ansatz.has_z(),
    };
    if !carries {
        return Err(Error::WrongAnsatz {
            ansatz: ansatz.name(),
            parameter: param.name(),
        });
    }
    if grid.is_empty() || grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("scan grid must be non-empty and finite".into()));
    }
    system.validate()?;
    let frame = DipoleFrame::new(system)?;
    frame.require_common(ansatz)?;
    Ok(grid
        .iter()
        .map(|&value| {
            let opts = options.clone().with_fixed(param, value);
            let result = opts.validate().and_then(|_| solve_in_frame(&frame, ansatz, &opts));
            ScanPoint { value, result }
        })
        .collect())
}
