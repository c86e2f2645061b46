//! Electron-boson Hamiltonians: lattice models, integral-file ingestion and
//! the dipole eigenbasis in which displacement operators act diagonally.
//!
//! All systems share one representation,
//!
//! ```text
//! H = sum_pq h_pq E_pq + 1/2 sum_pqrs (pq|rs) (E_pq E_rs - d_qr E_ps) + E_core
//!   + sum_a [ w_a (b_a^+ b_a + 1/2) + sqrt(w_a/2) D_a (b_a^+ + b_a) + 1/2 D_a^2 ]
//! ```
//!
//! with `D_a = sum_pq (d_a)_pq E_pq` the coupling operator of mode `a` and the
//! last (dipole self-energy) term present only when `include_dse` is set.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const HERMITIAN_TOL: f64 = 1e-10;

/// Two-electron integrals `(pq|rs)` in chemist notation, stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct Eri {
    n: usize,
    data: Vec<f64>,
}

impl Eri {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n * n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn offset(&self, p: usize, q: usize, r: usize, s: usize) -> usize {
        ((p * self.n + q) * self.n + r) * self.n + s
    }

    #[inline]
    pub fn get(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        self.data[self.offset(p, q, r, s)]
    }

    /// Sets `(pq|rs)` and its seven permutational partners.
    pub fn set_symmetric(&mut self, p: usize, q: usize, r: usize, s: usize, value: f64) {
        for (a, b, c, d) in [
            (p, q, r, s),
            (q, p, r, s),
            (p, q, s, r),
            (q, p, s, r),
            (r, s, p, q),
            (s, r, p, q),
            (r, s, q, p),
            (s, r, q, p),
        ] {
            let o = self.offset(a, b, c, d);
            self.data[o] = value;
        }
    }

    /// Adds `value` to `(pq|rs)` and its distinct permutational partners.
    pub fn add_symmetric(&mut self, p: usize, q: usize, r: usize, s: usize, value: f64) {
        let current = self.get(p, q, r, s);
        self.set_symmetric(p, q, r, s, current + value);
    }

    /// Largest violation of the 8-fold permutational symmetry.
    pub fn symmetry_violation(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        let v = self.get(p, q, r, s);
                        for w in [self.get(q, p, r, s), self.get(p, q, s, r), self.get(r, s, p, q)] {
                            worst = worst.max((v - w).abs());
                        }
                    }
                }
            }
        }
        worst
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    /// Four-index transformation `(pq|rs) -> sum C_ap C_bq C_cr C_ds (ab|cd)`.
    pub fn transform(&self, c: &DMatrix<f64>) -> Eri {
        let n = self.n;
        let m = c.ncols();
        // quarter transforms, one index at a time
        let mut a = vec![0.0; m * n * n * n];
        for p in 0..m {
            for j in 0..n {
                let cp = c[(j, p)];
                if cp == 0.0 {
                    continue;
                }
                for k in 0..n * n * n {
                    a[p * n * n * n + k] += cp * self.data[j * n * n * n + k];
                }
            }
        }
        let mut b = vec![0.0; m * m * n * n];
        for p in 0..m {
            for q in 0..m {
                for j in 0..n {
                    let cq = c[(j, q)];
                    if cq == 0.0 {
                        continue;
                    }
                    for k in 0..n * n {
                        b[(p * m + q) * n * n + k] += cq * a[(p * n + j) * n * n + k];
                    }
                }
            }
        }
        let mut d = vec![0.0; m * m * m * n];
        for pq in 0..m * m {
            for r in 0..m {
                for j in 0..n {
                    let cr = c[(j, r)];
                    if cr == 0.0 {
                        continue;
                    }
                    for s in 0..n {
                        d[(pq * m + r) * n + s] += cr * b[(pq * n + j) * n + s];
                    }
                }
            }
        }
        let mut out = vec![0.0; m * m * m * m];
        for pqr in 0..m * m * m {
            for s in 0..m {
                let mut acc = 0.0;
                for j in 0..n {
                    acc += c[(j, s)] * d[pqr * n + j];
                }
                out[pqr * m + s] = acc;
            }
        }
        Eri { n: m, data: out }
    }
}

/// Spin treatment of the electronic reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpinSector {
    /// Restricted closed shell: every occupied spatial orbital holds two electrons.
    ClosedShell,
    /// Fully spin-polarized: every electron carries the same spin.
    Polarized,
}

impl SpinSector {
    /// Number of electrons per occupied spatial orbital.
    pub fn degeneracy(self) -> f64 {
        match self {
            SpinSector::ClosedShell => 2.0,
            SpinSector::Polarized => 1.0,
        }
    }

    /// `(n_up, n_down)` for a given electron count.
    pub fn occupations(self, n_electrons: usize) -> (usize, usize) {
        match self {
            SpinSector::ClosedShell => (n_electrons / 2, n_electrons / 2),
            SpinSector::Polarized => (n_electrons, 0),
        }
    }

    /// The natural sector for an electron count: closed shell when even.
    pub fn for_electrons(n_electrons: usize) -> Self {
        if n_electrons.is_multiple_of(2) {
            SpinSector::ClosedShell
        } else {
            SpinSector::Polarized
        }
    }
}

/// How boson modes are attached to a lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ModeLayout {
    /// One Holstein mode per site coupled to the local density.
    #[default]
    PerSite,
    /// A single cavity mode coupled to the lattice dipole `sum_i x_i n_i`.
    SingleCavity,
}

/// A bosonic mode and the one-body electronic operator it couples to.
#[derive(Debug, Clone, PartialEq)]
pub struct BosonMode {
    pub omega: f64,
    /// Coupling strength (lambda for cavities, g for lattices).
    pub strength: f64,
    /// Unscaled coupling operator (`e . D` or `n_i`) in the orbital basis.
    pub operator: DMatrix<f64>,
}

impl BosonMode {
    pub fn new(omega: f64, strength: f64, operator: DMatrix<f64>) -> Result<Self> {
        let mode = Self {
            omega,
            strength,
            operator,
        };
        mode.validate()?;
        Ok(mode)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(Error::Invalid(format!(
                "mode frequency must be positive, got {}",
                self.omega
            )));
        }
        if !self.strength.is_finite() {
            return Err(Error::Invalid("mode strength must be finite".into()));
        }
        check_symmetric("coupling operator", &self.operator)
    }

    /// The coupling matrix `lambda . D` entering the Hamiltonian.
    pub fn coupling_matrix(&self) -> DMatrix<f64> {
        &self.operator * self.strength
    }
}

/// A complete electron-boson Hamiltonian.
#[derive(Debug, Clone)]
pub struct ElectronBosonSystem {
    pub n_orbitals: usize,
    pub n_electrons: usize,
    pub spin: SpinSector,
    pub h: DMatrix<f64>,
    pub eri: Eri,
    pub core_energy: f64,
    pub modes: Vec<BosonMode>,
    pub include_dse: bool,
    /// Adds `sum_a w_a / 2` to every reported energy.
    pub include_zpe: bool,
    pub layout: ModeLayout,
}

impl ElectronBosonSystem {
    /// A purely electronic system; modes are attached with [`Self::with_modes`].
    pub fn electronic(h: DMatrix<f64>, eri: Eri, n_electrons: usize, core_energy: f64) -> Result<Self> {
        let n = h.nrows();
        let system = Self {
            n_orbitals: n,
            n_electrons,
            spin: SpinSector::for_electrons(n_electrons),
            h,
            eri,
            core_energy,
            modes: Vec::new(),
            include_dse: true,
            include_zpe: true,
            layout: ModeLayout::SingleCavity,
        };
        system.validate()?;
        Ok(system)
    }

    pub fn with_modes(mut self, modes: Vec<BosonMode>) -> Result<Self> {
        self.modes = modes;
        self.validate()?;
        Ok(self)
    }

    pub fn with_dse(mut self, include_dse: bool) -> Self {
        self.include_dse = include_dse;
        self
    }

    pub fn with_zpe(mut self, include_zpe: bool) -> Self {
        self.include_zpe = include_zpe;
        self
    }

    pub fn with_spin(mut self, spin: SpinSector) -> Result<Self> {
        self.spin = spin;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_orbitals;
        if n == 0 {
            return Err(Error::Invalid("system has no orbitals".into()));
        }
        if self.h.nrows() != n || self.h.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.h.nrows(),
            });
        }
        if self.eri.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.eri.n(),
            });
        }
        check_symmetric("one-body integrals", &self.h)?;
        let violation = self.eri.symmetry_violation();
        if violation > HERMITIAN_TOL * (1.0 + self.h.amax()) {
            return Err(Error::NotHermitian {
                what: "two-body integrals".into(),
                asymmetry: violation,
            });
        }
        if self.n_electrons == 0 {
            return Err(Error::Invalid("system has no electrons".into()));
        }
        match self.spin {
            SpinSector::ClosedShell => {
                if !self.n_electrons.is_multiple_of(2) {
                    return Err(Error::Invalid(format!(
                        "closed-shell treatment needs an even electron count, got {}",
                        self.n_electrons
                    )));
                }
                if self.n_electrons > 2 * n {
                    return Err(Error::Invalid(format!(
                        "{} electrons do not fit in {} orbitals",
                        self.n_electrons, n
                    )));
                }
            }
            SpinSector::Polarized => {
                if self.n_electrons > n {
                    return Err(Error::Invalid(format!(
                        "{} polarized electrons do not fit in {} orbitals",
                        self.n_electrons, n
                    )));
                }
            }
        }
        for mode in &self.modes {
            mode.validate()?;
            if mode.operator.nrows() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: mode.operator.nrows(),
                });
            }
        }
        Ok(())
    }

    /// Number of occupied spatial orbitals in the mean-field reference.
    pub fn n_occupied(&self) -> usize {
        match self.spin {
            SpinSector::ClosedShell => self.n_electrons / 2,
            SpinSector::Polarized => self.n_electrons,
        }
    }

    pub fn zero_point_energy(&self) -> f64 {
        if self.include_zpe {
            self.modes.iter().map(|m| 0.5 * m.omega).sum()
        } else {
            0.0
        }
    }

    /// Coupling matrices `lambda_a . D` for every mode.
    pub fn coupling_matrices(&self) -> Vec<DMatrix<f64>> {
        self.modes.iter().map(BosonMode::coupling_matrix).collect()
    }

    /// Re-expresses every orbital quantity in the basis spanned by the
    /// columns of the orthogonal matrix `rotation`.
    pub fn rotated(&self, rotation: &DMatrix<f64>) -> Self {
        let rt = rotation.transpose();
        let mut out = self.clone();
        out.h = &rt * &self.h * rotation;
        out.eri = self.eri.transform(rotation);
        for mode in &mut out.modes {
            mode.operator = &rt * &mode.operator * rotation;
        }
        out
    }

    /// Replaces every mode's coupling strength.
    pub fn with_strength(mut self, strength: f64) -> Self {
        for mode in &mut self.modes {
            mode.strength = strength;
        }
        self
    }
}

fn check_symmetric(what: &str, m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    let asymmetry = (m - m.transpose()).amax();
    if asymmetry > HERMITIAN_TOL * (1.0 + m.amax()) {
        return Err(Error::NotHermitian {
            what: what.into(),
            asymmetry,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    #[default]
    Periodic,
    Open,
}

/// Which site pairs the density-density correlation acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CorrelationRange {
    OnSite,
    #[default]
    NearestNeighbor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Filling {
    #[default]
    Half,
    Electrons(usize),
}

/// One-dimensional Hubbard-Holstein-type lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub n_sites: usize,
    #[serde(default = "unit")]
    pub t: f64,
    #[serde(default)]
    pub u: f64,
    #[serde(default)]
    pub g: f64,
    #[serde(default = "unit")]
    pub omega: f64,
    #[serde(default)]
    pub boundary: Boundary,
    #[serde(default)]
    pub correlation_range: CorrelationRange,
    #[serde(default)]
    pub filling: Filling,
    #[serde(default)]
    pub layout: ModeLayout,
}

fn unit() -> f64 {
    1.0
}

impl LatticeSpec {
    pub fn new(n_sites: usize, t: f64, u: f64, g: f64, omega: f64) -> Self {
        Self {
            n_sites,
            t,
            u,
            g,
            omega,
            boundary: Boundary::Periodic,
            correlation_range: CorrelationRange::NearestNeighbor,
            filling: Filling::Half,
            layout: ModeLayout::PerSite,
        }
    }

    pub fn boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn correlation_range(mut self, range: CorrelationRange) -> Self {
        self.correlation_range = range;
        self
    }

    pub fn filling(mut self, filling: Filling) -> Self {
        self.filling = filling;
        self
    }

    pub fn layout(mut self, layout: ModeLayout) -> Self {
        self.layout = layout;
        self
    }

    pub fn n_electrons(&self) -> usize {
        match self.filling {
            Filling::Half => self.n_sites,
            Filling::Electrons(n) => n,
        }
    }

    /// Unordered nearest-neighbour bonds; a two-site ring has a single bond.
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        let n = self.n_sites;
        let mut bonds: Vec<(usize, usize)> = (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect();
        if self.boundary == Boundary::Periodic && n > 2 {
            bonds.push((n - 1, 0));
        }
        bonds
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites < 2 {
            return Err(Error::Invalid(format!(
                "lattice needs at least 2 sites, got {}",
                self.n_sites
            )));
        }
        if !(self.t.is_finite() && self.t > 0.0) {
            return Err(Error::Invalid(format!("hopping must be positive, got {}", self.t)));
        }
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(Error::Invalid(format!(
                "frequency must be positive, got {}",
                self.omega
            )));
        }
        if !self.u.is_finite() || !self.g.is_finite() {
            return Err(Error::Invalid("U and g must be finite".into()));
        }
        let ne = self.n_electrons();
        if ne == 0 || ne > 2 * self.n_sites {
            return Err(Error::Invalid(format!(
                "invalid filling: {} electrons on {} sites",
                ne, self.n_sites
            )));
        }
        if ne % 2 == 1 && ne > self.n_sites {
            return Err(Error::Invalid(format!(
                "invalid filling: odd electron count {} is treated spin-polarized and exceeds {} sites",
                ne, self.n_sites
            )));
        }
        Ok(())
    }
}

/// Builds the lattice Hamiltonian
///
/// ```text
/// -t sum_<ij> c_i^+ c_j + U/2 sum_(ij) (n_i - 1/2)(n_j - 1/2)
///   + sum_a [ w b_a^+ b_a + sqrt(w/2) g D_a (b_a^+ + b_a) ]
/// ```
///
/// with the correlation sum over ordered site pairs allowed by
/// `correlation_range`. The `-1/2` shifts are folded into the one-body
/// diagonal and the core energy. No dipole self-energy is included.
pub fn build_hubbard_holstein(spec: &LatticeSpec) -> Result<ElectronBosonSystem> {
    spec.validate()?;
    let n = spec.n_sites;
    let mut h = DMatrix::zeros(n, n);
    let bonds = spec.bonds();
    for &(i, j) in &bonds {
        h[(i, j)] -= spec.t;
        h[(j, i)] -= spec.t;
    }

    let pairs: Vec<(usize, usize)> = match spec.correlation_range {
        CorrelationRange::OnSite => (0..n).map(|i| (i, i)).collect(),
        CorrelationRange::NearestNeighbor => bonds.iter().flat_map(|&(i, j)| [(i, j), (j, i)]).collect(),
    };
    let mut eri = Eri::zeros(n);
    let u = spec.u;
    for &(i, j) in &pairs {
        // (ii|jj) = U per ordered pair; set_symmetric covers the (jj|ii) partner
        let current = eri.get(i, i, j, j);
        eri.set_symmetric(i, i, j, j, current + if i == j { u } else { 0.5 * u });
        // n_i n_i in chemist form drops the exchange-like -n_i; add it back
        if i == j {
            h[(i, i)] += 0.5 * u;
        }
        h[(i, i)] -= 0.25 * u;
        h[(j, j)] -= 0.25 * u;
    }
    let core = 0.125 * u * pairs.len() as f64;

    let modes = match spec.layout {
        ModeLayout::PerSite => (0..n)
            .map(|i| {
                let mut op = DMatrix::zeros(n, n);
                op[(i, i)] = 1.0;
                BosonMode::new(spec.omega, spec.g, op)
            })
            .collect::<Result<Vec<_>>>()?,
        ModeLayout::SingleCavity => {
            let centre = 0.5 * (n as f64 - 1.0);
            let op = DMatrix::from_diagonal(&DVector::from_fn(n, |i, _| i as f64 - centre));
            vec![BosonMode::new(spec.omega, spec.g, op)?]
        }
    };

    let n_electrons = spec.n_electrons();
    let system = ElectronBosonSystem {
        n_orbitals: n,
        n_electrons,
        spin: SpinSector::for_electrons(n_electrons),
        h,
        eri,
        core_energy: core,
        modes,
        include_dse: false,
        include_zpe: true,
        layout: spec.layout,
    };
    system.validate()?;
    Ok(system)
}

/// `U - g^2 f (2 - f)`: the on-site interaction left after a partial polaron
/// shift of strength `f`.
pub fn effective_correlation(u: f64, g: f64, f: f64) -> f64 {
    u - g * g * f * (2.0 - f)
}

/// Reads an FCIDUMP file (chemist notation, 1-based indices).
pub fn load_fcidump(path: impl AsRef<Path>) -> Result<ElectronBosonSystem> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_fcidump(&text, path)
}

pub fn parse_fcidump(text: &str, path: &Path) -> Result<ElectronBosonSystem> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut norb = None;
    let mut nelec = None;
    let mut ms2 = 0i64;
    let mut body_start = None;
    let mut header = String::new();
    for (idx, line) in text.lines().enumerate() {
        let upper = line.trim().to_ascii_uppercase();
        let end = upper.contains("&END") || upper == "/" || upper.ends_with('/');
        header.push_str(&upper.replace("&FCI", " ").replace("&END", " ").replace('/', " "));
        header.push(',');
        if end {
            body_start = Some(idx + 1);
            break;
        }
    }
    let body_start = body_start.ok_or_else(|| err(1, "header is not terminated by &END or /".into()))?;
    while header.contains("= ") || header.contains(" =") {
        header = header.replace("= ", "=").replace(" =", "=");
    }
    for token in header.split(|c: char| c == ',' || c.is_whitespace()) {
        let Some((key, value)) = token.split_once('=') else {
            continue;
        };
        let parse_int = |v: &str| {
            v.trim()
                .parse::<i64>()
                .map_err(|_| err(1, format!("header value {key}={v} is not an integer")))
        };
        match key.trim() {
            "NORB" => norb = Some(parse_int(value)?),
            "NELEC" => nelec = Some(parse_int(value)?),
            "MS2" => ms2 = parse_int(value)?,
            _ => {}
        }
    }
    let norb = norb.ok_or_else(|| err(1, "header lacks NORB".into()))?;
    let nelec = nelec.ok_or_else(|| err(1, "header lacks NELEC".into()))?;
    if norb <= 0 || nelec <= 0 {
        return Err(err(1, format!("NORB={norb} and NELEC={nelec} must be positive")));
    }
    let n = norb as usize;
    let n_electrons = nelec as usize;
    let spin = match ms2 {
        0 => SpinSector::ClosedShell,
        m if m == nelec => SpinSector::Polarized,
        m => return Err(err(1, format!("MS2={m} is neither 0 nor NELEC"))),
    };

    let mut h = DMatrix::zeros(n, n);
    let mut eri = Eri::zeros(n);
    let mut core = 0.0;
    for (idx, line) in text.lines().enumerate().skip(body_start) {
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(err(lineno, format!("expected `value i j k l`, found {trimmed:?}")));
        }
        let value: f64 = fields[0]
            .replace(['D', 'd'], "e")
            .parse()
            .map_err(|_| err(lineno, format!("cannot parse value {:?}", fields[0])))?;
        let mut idx4 = [0usize; 4];
        for (slot, field) in idx4.iter_mut().zip(&fields[1..]) {
            let v: usize = field
                .parse()
                .map_err(|_| err(lineno, format!("cannot parse index {field:?}")))?;
            if v > n {
                return Err(err(lineno, format!("index {v} exceeds NORB={n}")));
            }
            *slot = v;
        }
        match idx4 {
            [0, 0, 0, 0] => core = value,
            [i, j, 0, 0] if i > 0 && j > 0 => {
                h[(i - 1, j - 1)] = value;
                h[(j - 1, i - 1)] = value;
            }
            [i, j, k, l] if i > 0 && j > 0 && k > 0 && l > 0 => {
                eri.set_symmetric(i - 1, j - 1, k - 1, l - 1, value);
            }
            // orbital energies (i 0 0 0) carry no Hamiltonian information
            [_, 0, 0, 0] => {}
            other => return Err(err(lineno, format!("malformed index pattern {other:?}"))),
        }
    }

    let system = ElectronBosonSystem {
        n_orbitals: n,
        n_electrons,
        spin,
        h,
        eri,
        core_energy: core,
        modes: Vec::new(),
        include_dse: true,
        include_zpe: true,
        layout: ModeLayout::SingleCavity,
    };
    system.validate()?;
    Ok(system)
}

/// Reads polarization-projected dipole matrices `e_a . D`, one per mode.
///
/// Format: a header line `n_orbitals n_modes`, then `n_modes` row-major
/// `n_orbitals x n_orbitals` blocks of whitespace-separated numbers. Lines
/// starting with `#` are ignored.
pub fn load_dipole_operators(path: impl AsRef<Path>, n_orbitals: usize) -> Result<Vec<DMatrix<f64>>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut tokens = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim_start().starts_with('#'))
        .flat_map(|(i, l)| l.split_whitespace().map(move |t| (i + 1, t)));
    let mut next_usize = |what: &str| -> Result<usize> {
        let (line, tok) = tokens.next().ok_or_else(|| err(1, format!("missing {what}")))?;
        tok.parse().map_err(|_| err(line, format!("cannot parse {what} from {tok:?}")))
    };
    let n = next_usize("n_orbitals")?;
    let n_modes = next_usize("n_modes")?;
    if n != n_orbitals {
        return Err(err(1, format!("file has {n} orbitals, system has {n_orbitals}")));
    }
    let mut mats = Vec::with_capacity(n_modes);
    for _ in 0..n_modes {
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let (line, tok) = tokens
                    .next()
                    .ok_or_else(|| err(0, "file ends before all matrix elements were read".into()))?;
                m[(i, j)] = tok
                    .parse()
                    .map_err(|_| err(line, format!("cannot parse matrix element {tok:?}")))?;
            }
        }
        check_symmetric("dipole matrix", &m)?;
        mats.push(m);
    }
    if let Some((line, tok)) = tokens.next() {
        return Err(err(line, format!("unexpected trailing token {tok:?}")));
    }
    Ok(mats)
}

/// Eigen-decomposition of a coupling matrix with a deterministic layout:
/// eigenvalues ascending, each eigenvector's largest-magnitude component
/// positive (first such component on ties).
pub fn dipole_eigenbasis(coupling: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    check_symmetric("coupling matrix", coupling)?;
    let n = coupling.nrows();
    let sym = (coupling + coupling.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(k).clone_owned();
        let mut pivot = 0;
        for i in 1..n {
            if v[i].abs() > v[pivot].abs() + 1e-12 {
                pivot = i;
            }
        }
        if v[pivot] < 0.0 {
            v.neg_mut();
        }
        vectors.set_column(col, &v);
    }
    Ok((values, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn two_site_hopping_matrix() {
        let spec = LatticeSpec::new(2, 1.0, 0.0, 0.0, 1.0);
        let sys = build_hubbard_holstein(&spec).unwrap();
        assert_eq!(sys.h, DMatrix::from_row_slice(2, 2, &[0.0, -1.0, -1.0, 0.0]));
        assert!(sys.eri.is_zero());
        assert_eq!(sys.modes.len(), 2);
        assert!(!sys.include_dse);
    }

    #[test]
    fn nearest_neighbour_density_tensor() {
        let spec = LatticeSpec::new(4, 1.0, 2.0, 0.0, 1.0);
        let sys = build_hubbard_holstein(&spec).unwrap();
        let n = 4;
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        let v = sys.eri.get(p, q, r, s);
                        let density = p == q && r == s;
                        let neighbours = (p as i64 - r as i64).rem_euclid(4) == 1
                            || (r as i64 - p as i64).rem_euclid(4) == 1;
                        if density && neighbours {
                            assert_eq!(v, 2.0, "({p}{q}|{r}{s})");
                        } else {
                            assert_eq!(v, 0.0, "({p}{q}|{r}{s})");
                        }
                    }
                }
            }
        }
        // each site has two neighbours: -U/4 * 2 * 2
        for i in 0..n {
            assert_relative_eq!(sys.h[(i, i)], -2.0);
        }
        // |P| = 8 ordered pairs
        assert_relative_eq!(sys.core_energy, 2.0);
    }

    #[test]
    fn on_site_range_matches_hubbard_form() {
        let spec = LatticeSpec::new(3, 1.0, 4.0, 0.0, 1.0).correlation_range(CorrelationRange::OnSite);
        let sys = build_hubbard_holstein(&spec).unwrap();
        for i in 0..3 {
            assert_eq!(sys.eri.get(i, i, i, i), 4.0);
            assert_eq!(sys.h[(i, i)], 0.0);
        }
        assert_relative_eq!(sys.core_energy, 1.5);
    }

    #[test]
    fn lattice_errors() {
        assert!(build_hubbard_holstein(&LatticeSpec::new(1, 1.0, 0.0, 0.0, 1.0)).is_err());
        let bad = LatticeSpec::new(4, 1.0, 0.0, 0.0, 1.0).filling(Filling::Electrons(9));
        assert!(build_hubbard_holstein(&bad).is_err());
        let zero = LatticeSpec::new(4, 1.0, 0.0, 0.0, 1.0).filling(Filling::Electrons(0));
        assert!(build_hubbard_holstein(&zero).is_err());
    }

    #[test]
    fn single_cavity_layout_uses_lattice_dipole() {
        let spec = LatticeSpec::new(2, 1.0, 0.0, 0.3, 1.0).layout(ModeLayout::SingleCavity);
        let sys = build_hubbard_holstein(&spec).unwrap();
        assert_eq!(sys.modes.len(), 1);
        assert_eq!(sys.modes[0].coupling_matrix(), DMatrix::from_diagonal(&DVector::from_vec(vec![-0.15, 0.15])));
    }

    #[test]
    fn effective_correlation_values() {
        assert_eq!(effective_correlation(1.0, 0.5, 0.0), 1.0);
        assert_eq!(effective_correlation(1.0, 1.0, 1.0), 0.0);
        assert_eq!(effective_correlation(0.5, 1.0, 1.0), -0.5);
    }

    #[test]
    fn effective_correlation_monotone_in_f() {
        for &g in &[0.3, 1.0, 2.5] {
            let mut prev = f64::INFINITY;
            for k in 0..=100 {
                let f = k as f64 / 100.0;
                let v = effective_correlation(1.0, g, f);
                assert!(v <= prev + 1e-15);
                prev = v;
            }
        }
    }

    #[test]
    fn dipole_eigenbasis_diagonal_input() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![0.3, -0.1]));
        let (vals, a) = dipole_eigenbasis(&m).unwrap();
        assert_relative_eq!(vals[0], -0.1);
        assert_relative_eq!(vals[1], 0.3);
        assert_eq!(a, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
    }

    #[test]
    fn dipole_eigenbasis_pauli_x() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let (vals, a) = dipole_eigenbasis(&m).unwrap();
        assert_relative_eq!(vals[0], -1.0, epsilon = 1e-14);
        assert_relative_eq!(vals[1], 1.0, epsilon = 1e-14);
        let recon = &a * DMatrix::from_diagonal(&vals) * a.transpose();
        assert!((recon - m).amax() < 1e-12);
    }

    #[test]
    fn dipole_eigenbasis_rejects_asymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.5, 0.0]);
        assert!(matches!(dipole_eigenbasis(&m), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn eri_transform_identity_and_permutation() {
        let mut eri = Eri::zeros(2);
        eri.set_symmetric(0, 0, 1, 1, 0.7);
        eri.set_symmetric(0, 1, 0, 1, 0.2);
        eri.set_symmetric(0, 0, 0, 0, 1.1);
        let same = eri.transform(&DMatrix::identity(2, 2));
        assert_eq!(same, eri);
        let swap = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let t = eri.transform(&swap);
        assert_eq!(t.get(1, 1, 1, 1), 1.1);
        assert_eq!(t.get(1, 1, 0, 0), 0.7);
        assert_eq!(t.symmetry_violation(), 0.0);
    }

    #[test]
    fn fcidump_minimal_and_errors() {
        let text = "&FCI NORB=1,NELEC=1,MS2=1,\n&END\n -1.0 1 1 0 0\n 0.25 0 0 0 0\n";
        let sys = parse_fcidump(text, Path::new("mem")).unwrap();
        assert_eq!(sys.n_orbitals, 1);
        assert_eq!(sys.h[(0, 0)], -1.0);
        assert_eq!(sys.core_energy, 0.25);
        assert_eq!(sys.spin, SpinSector::Polarized);

        let bad = "&FCI NORB=1,NELEC=2,MS2=0,\n&END\n -1.0 1 1 0 0\nx y z\n";
        match parse_fcidump(bad, Path::new("mem")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
        let too_big = "&FCI NORB=1,NELEC=2,MS2=0,\n&END\n -1.0 2 1 0 0\n";
        assert!(matches!(parse_fcidump(too_big, Path::new("mem")), Err(Error::Parse { line: 3, .. })));
    }
}
