//! Run and verify configuration files (TOML, schema `version = 1`).

use std::path::{Path, PathBuf};

use qedhf::checks::Faults;
use qedhf::model::{
    build_hubbard_holstein, load_dipole_operators, load_fcidump, BosonMode, ElectronBosonSystem, LatticeSpec,
};
use qedhf::scf::{AnsatzKind, ScanParam, ScfOptions};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    pub omega: f64,
    /// Coupling strength lambda.
    pub strength: f64,
    /// Which dipole component the mode couples to.
    #[serde(default)]
    pub component: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoleculeSpec {
    pub fcidump: PathBuf,
    pub dipole: PathBuf,
    pub modes: Vec<ModeSpec>,
    #[serde(default = "yes")]
    pub dse: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub lattice: Option<LatticeSpec>,
    pub molecule: Option<MoleculeSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParameter {
    /// Lattice electron-boson coupling, or every mode's strength.
    G,
    U,
    T,
    /// Every mode's strength (alias of `g` for molecules).
    Lambda,
    Omega,
    /// Frozen variational parameters.
    F,
    R,
    Z,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            Self::G => "g",
            Self::U => "u",
            Self::T => "t",
            Self::Lambda => "lambda",
            Self::Omega => "omega",
            Self::F => "f",
            Self::R => "r",
            Self::Z => "z",
        }
    }

    fn frozen(self) -> Option<ScanParam> {
        match self {
            Self::F => Some(ScanParam::F),
            Self::R => Some(ScanParam::R),
            Self::Z => Some(ScanParam::Z),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub parameter: SweepParameter,
    pub grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    #[serde(default)]
    pub enable: bool,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
}

fn default_n_max() -> usize {
    8
}

impl Default for OracleSpec {
    fn default() -> Self {
        Self {
            enable: false,
            n_max: default_n_max(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub system: SystemSpec,
    pub ansatz: AnsatzKind,
    /// Optional second ansatz solved at every point; rows then carry
    /// `e_reference` and `e_total - e_reference`.
    pub reference: Option<AnsatzKind>,
    pub sweep: Sweep,
    #[serde(default)]
    pub oracle: OracleSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub solver: ScfOptions,
    #[serde(default)]
    pub seed: u64,
}

fn check_version(version: u32) -> Result<()> {
    if version != SCHEMA_VERSION {
        return Err(CliError::Config(format!(
            "unsupported config version {version} (expected {SCHEMA_VERSION})"
        )));
    }
    Ok(())
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        check_version(self.version)?;
        let bad = |m: String| Err(CliError::Config(m));
        match (&self.system.lattice, &self.system.molecule) {
            (Some(l), None) => {
                l.validate().map_err(|e| CliError::Config(e.to_string()))?;
                if self.sweep.parameter == SweepParameter::Lambda {
                    return bad("sweep parameter `lambda` needs a molecule system; use `g` for lattices".into());
                }
            }
            (None, Some(m)) => {
                if m.modes.is_empty() {
                    return bad("molecule needs at least one mode".into());
                }
                if matches!(self.sweep.parameter, SweepParameter::U | SweepParameter::T) {
                    return bad(format!("sweep parameter `{}` needs a lattice system", self.sweep.parameter.name()));
                }
            }
            _ => return bad("system needs exactly one of `lattice` or `molecule`".into()),
        }
        if self.sweep.grid.is_empty() {
            return bad("sweep grid is empty".into());
        }
        if let Some(v) = self.sweep.grid.iter().find(|v| !v.is_finite()) {
            return bad(format!("sweep grid contains non-finite value {v}"));
        }
        if let Some(p) = self.sweep.parameter.frozen() {
            let has = match p {
                ScanParam::F => self.ansatz.has_f(),
                ScanParam::R => self.ansatz.has_r(),
                ScanParam::Z => self.ansatz.has_z(),
            };
            if !has {
                return bad(format!("ansatz {} has no parameter `{}`", self.ansatz, p.name()));
            }
        }
        self.solver.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }

    /// Hex SHA-256 prefix of the canonical (re-serialized) configuration,
    /// leaving out the output block.
    pub fn hash(&self) -> String {
        let mut cfg = self.clone();
        cfg.output = OutputSpec::default();
        let canonical = toml::to_string(&cfg).expect("configuration serializes");
        hex::encode(&Sha256::digest(canonical.as_bytes())[..8])
    }

    /// Solver options at one grid point.
    pub fn options_at(&self, value: f64) -> ScfOptions {
        let mut o = self.solver.clone();
        o.seed = self.seed;
        match self.sweep.parameter.frozen() {
            Some(p) => o.with_fixed(p, value),
            None => o,
        }
    }

    /// System at one grid point; relative molecule paths resolve against
    /// `base` first, then the fixture directory.
    pub fn system_at(&self, value: f64, base: &Path, fixtures: &Path) -> qedhf::Result<ElectronBosonSystem> {
        if let Some(l) = &self.system.lattice {
            let mut spec = l.clone();
            match self.sweep.parameter {
                SweepParameter::G => spec.g = value,
                SweepParameter::U => spec.u = value,
                SweepParameter::T => spec.t = value,
                SweepParameter::Omega => spec.omega = value,
                _ => {}
            }
            return build_hubbard_holstein(&spec);
        }
        let m = self.system.molecule.as_ref().expect("validated");
        let find = |p: &Path| {
            if p.is_absolute() || base.join(p).exists() {
                base.join(p)
            } else {
                fixtures.join(p)
            }
        };
        let sys = load_fcidump(find(&m.fcidump))?;
        let dipoles = load_dipole_operators(find(&m.dipole), sys.n_orbitals)?;
        let mut modes = Vec::with_capacity(m.modes.len());
        for spec in &m.modes {
            let op = dipoles.get(spec.component).ok_or_else(|| {
                qedhf::Error::Invalid(format!(
                    "dipole component {} out of range ({} available)",
                    spec.component,
                    dipoles.len()
                ))
            })?;
            let (mut omega, mut strength) = (spec.omega, spec.strength);
            match self.sweep.parameter {
                SweepParameter::G | SweepParameter::Lambda => strength = value,
                SweepParameter::Omega => omega = value,
                _ => {}
            }
            modes.push(BosonMode::new(omega, strength, op.clone())?);
        }
        Ok(sys.with_modes(modes)?.with_dse(m.dse))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    pub fixtures: Option<PathBuf>,
    #[serde(default)]
    pub faults: Faults,
    #[serde(default)]
    pub solver: ScfOptions,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            version: SCHEMA_VERSION,
            seed: 0,
            fixtures: None,
            faults: Faults::default(),
            solver: ScfOptions::default(),
        }
    }
}

impl VerifyConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = toml::from_str(&read(path)?).map_err(|e| CliError::Config(e.to_string()))?;
        check_version(cfg.version)?;
        cfg.solver.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }
}
