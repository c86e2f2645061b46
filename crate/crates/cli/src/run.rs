//! Grid evaluation and row output.

use std::io::Write;
use std::path::Path;

use log::{info, warn};
use qedhf::entanglement::mean_field_entropies;
use qedhf::oracle::{build_full_hamiltonian, exact_mean_entropy, ground_state};
use qedhf::scf::{scf_solve, ScfResult};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Format, RunConfig};
use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Unconverged,
    Error,
}

/// One output row. Per-mode parameters are joined with `;`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub config_hash: String,
    pub index: usize,
    pub parameter: String,
    pub value: f64,
    pub ansatz: String,
    pub status: Status,
    pub converged: bool,
    pub iterations: Option<usize>,
    pub e_total: Option<f64>,
    pub e_electronic: Option<f64>,
    pub e_dse_residual: Option<f64>,
    pub e_photon: Option<f64>,
    pub e_constant: Option<f64>,
    pub f: String,
    pub r: String,
    pub z: String,
    pub s_mf: Option<f64>,
    pub reference: String,
    pub e_reference: Option<f64>,
    pub e_minus_reference: Option<f64>,
    pub e_ed: Option<f64>,
    pub s_ed: Option<f64>,
    pub message: String,
}

fn join(v: &Option<Vec<f64>>) -> String {
    v.as_ref()
        .map(|v| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";"))
        .unwrap_or_default()
}

impl Row {
    fn empty(cfg: &RunConfig, hash: &str, index: usize, value: f64) -> Self {
        Self {
            config_hash: hash.to_string(),
            index,
            parameter: cfg.sweep.parameter.name().to_string(),
            value,
            ansatz: cfg.ansatz.to_string(),
            status: Status::Error,
            converged: false,
            iterations: None,
            e_total: None,
            e_electronic: None,
            e_dse_residual: None,
            e_photon: None,
            e_constant: None,
            f: String::new(),
            r: String::new(),
            z: String::new(),
            s_mf: None,
            reference: cfg.reference.map(|a| a.to_string()).unwrap_or_default(),
            e_reference: None,
            e_minus_reference: None,
            e_ed: None,
            s_ed: None,
            message: String::new(),
        }
    }

    fn fill(&mut self, res: &ScfResult) {
        let e = &res.energy;
        self.status = if res.converged { Status::Ok } else { Status::Unconverged };
        self.converged = res.converged;
        self.iterations = Some(res.iterations());
        self.e_total = Some(e.total);
        self.e_electronic = Some(e.electronic);
        self.e_dse_residual = Some(e.dse_residual);
        self.e_photon = Some(e.photon);
        self.e_constant = Some(e.constant);
        self.f = join(&res.params.f);
        self.r = join(&res.params.r);
        self.z = join(&res.params.z);
    }

    pub fn failed(&self) -> bool {
        self.status != Status::Ok
    }
}

fn note(row: &mut Row, what: &str, err: impl std::fmt::Display) {
    if !row.message.is_empty() {
        row.message.push_str("; ");
    }
    row.message.push_str(&format!("{what}: {err}"));
}

fn evaluate(cfg: &RunConfig, hash: &str, base: &Path, fixtures: &Path, index: usize, value: f64) -> Row {
    let mut row = Row::empty(cfg, hash, index, value);
    let system = match cfg.system_at(value, base, fixtures) {
        Ok(s) => s,
        Err(e) => {
            note(&mut row, "system", e);
            return row;
        }
    };
    let options = cfg.options_at(value);
    match scf_solve(&system, cfg.ansatz, &options) {
        Ok(res) => {
            row.fill(&res);
            if res.converged {
                match mean_field_entropies(&res) {
                    Ok((_, mean)) => row.s_mf = Some(mean),
                    Err(e) => note(&mut row, "entropy", e),
                }
            } else {
                note(&mut row, "scf", "not converged");
            }
        }
        Err(e) => {
            note(&mut row, "scf", e);
            return row;
        }
    }
    if let Some(reference) = cfg.reference {
        let mut ref_options = cfg.solver.clone();
        ref_options.seed = cfg.seed;
        match scf_solve(&system, reference, &ref_options) {
            Ok(r) if r.converged => {
                row.e_reference = Some(r.energy.total);
                row.e_minus_reference = row.e_total.map(|e| e - r.energy.total);
            }
            Ok(_) => note(&mut row, "reference", "not converged"),
            Err(e) => note(&mut row, "reference", e),
        }
    }
    if cfg.oracle.enable {
        let exact = build_full_hamiltonian(&system, cfg.oracle.n_max).and_then(|h| {
            let (e, psi) = ground_state(&h)?;
            Ok((e, exact_mean_entropy(&psi, &h.space)?))
        });
        match exact {
            Ok((e, s)) => {
                row.e_ed = Some(e);
                row.s_ed = Some(s);
            }
            Err(e) => note(&mut row, "oracle", e),
        }
    }
    row
}

/// Evaluates every grid point on a pool of `jobs` threads; rows come back
/// in grid order.
pub fn run_grid(cfg: &RunConfig, base: &Path, fixtures: &Path, jobs: usize) -> Result<Vec<Row>> {
    let hash = cfg.hash();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))?;
    info!("{} grid points on {jobs} workers, config {hash}", cfg.sweep.grid.len());
    let rows: Vec<Row> = pool.install(|| {
        cfg.sweep
            .grid
            .par_iter()
            .enumerate()
            .map(|(i, &v)| evaluate(cfg, &hash, base, fixtures, i, v))
            .collect()
    });
    for r in rows.iter().filter(|r| r.failed()) {
        warn!("point {} ({} = {}): {}", r.index, r.parameter, r.value, r.message);
    }
    Ok(rows)
}

pub fn write_rows(rows: &[Row], format: Format, out: impl Write) -> Result<()> {
    let err = |e: &dyn std::fmt::Display| CliError::Output(e.to_string());
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for r in rows {
                w.serialize(r).map_err(|e| err(&e))?;
            }
            w.flush().map_err(|e| err(&e))?;
        }
        Format::Jsonl => {
            let mut out = out;
            for r in rows {
                serde_json::to_writer(&mut out, r).map_err(|e| err(&e))?;
                out.write_all(b"\n").map_err(|e| err(&e))?;
            }
            out.flush().map_err(|e| err(&e))?;
        }
    }
    Ok(())
}
