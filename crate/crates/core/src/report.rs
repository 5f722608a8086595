//! Tabular output and run manifests.
//!
//! Every table carries units in its header, written as powers of a length `L`
//! and a time `T` (energies are per unit depth). Numbers use the shortest
//! round-trip representation, so identical inputs give identical bytes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::besov::{csv_rows, StructureFunctionTable};
use crate::budget::BudgetRow;
use crate::error::{Error, Result};
use crate::limits::{KatoValue, RelativeEnergyReport, SweepRecord};
use crate::solver::EnergyLedger;

const ENERGY: &str = "L^4 T^-2";
const POWER: &str = "L^4 T^-3";
const SPEED: &str = "L T^-1";

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(cols: &[(&str, &str)]) -> Self {
        let header = cols
            .iter()
            .map(|(n, u)| {
                if u.is_empty() {
                    n.to_string()
                } else {
                    format!("{n} [{u}]")
                }
            })
            .collect();
        Self {
            header,
            rows: Vec::new(),
        }
    }

    /// NaN marks a quantity not sampled on that row and becomes an empty cell.
    fn push(&mut self, values: &[f64]) {
        self.rows.push(values.iter().map(|&v| number(v)).collect());
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }
}

/// Shortest round-trip text, switching to an exponent far from unity.
pub(crate) fn number(v: f64) -> String {
    let a = v.abs();
    if v.is_nan() {
        String::new()
    } else if a == 0.0 || (1e-4..1e15).contains(&a) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Write through a sibling temporary file and rename it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("not a file path: {}", path.display())))?
        .to_string_lossy();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn ledger_table(ledger: &EnergyLedger) -> Table {
    let mut t = Table::new(&[
        ("t", "T"),
        ("kinetic_energy", ENERGY),
        ("dissipation_rate", POWER),
        ("cumulative_dissipation", ENERGY),
        ("forcing_power", POWER),
        ("forcing_work", ENERGY),
        ("max_divergence", "T^-1"),
        ("pressure_gauge", "L^2 T^-2"),
    ]);
    for r in &ledger.rows {
        t.push(&[
            r.t,
            r.kinetic_energy,
            r.dissipation_rate,
            r.cumulative_dissipation,
            r.forcing_power,
            r.forcing_work,
            r.max_divergence,
            r.pressure_gauge,
        ]);
    }
    t
}

pub fn budget_table(rows: &[BudgetRow]) -> Table {
    let mut t = Table::new(&[
        ("t", "T"),
        ("ell", "L"),
        ("h", "L"),
        ("nu", "L^2 T^-1"),
        ("resolved_ke", ENERGY),
        ("pi_int", ENERGY),
        ("b_int", ENERGY),
        ("d_int", ENERGY),
        ("residual", ENERGY),
        ("wall_modulus_normal", SPEED),
        ("wall_modulus_full", SPEED),
    ]);
    for r in rows {
        t.push(&[
            r.t,
            r.ell,
            r.h,
            r.nu,
            r.resolved_ke,
            r.pi_int,
            r.b_int,
            r.d_int,
            r.residual,
            r.wall_modulus_normal,
            r.wall_modulus_full,
        ]);
    }
    t
}

/// One row per probe and snapshot; probes with an empty valid region are
/// left out.
pub fn structure_table(tables: &[StructureFunctionTable], sigma: f64) -> Table {
    let mut t = Table::new(&[
        ("t", "T"),
        ("r", "L"),
        ("direction", ""),
        ("p", "1"),
        ("S_p", "L^p T^-p"),
        ("norm_over_r_sigma", "L^(1+2/p-sigma) T^-1"),
    ]);
    for table in tables {
        t.rows
            .extend(csv_rows(table, sigma).into_iter().map(Vec::from));
    }
    t
}

pub fn kato_table(values: &[KatoValue]) -> Table {
    let mut t = Table::new(&[("a", "L"), ("strip_dissipation", ENERGY)]);
    for v in values {
        t.push(&[v.a, v.value]);
    }
    t
}

pub fn relative_energy_table(report: &RelativeEnergyReport) -> Table {
    let mut t = Table::new(&[
        ("t", "T"),
        ("measured", ENERGY),
        ("gronwall_bound", ENERGY),
        ("E1", ENERGY),
        ("E2", ENERGY),
        ("E3", ENERGY),
        ("E4", ENERGY),
    ]);
    for r in &report.rows {
        t.push(&[r.t, r.measured, r.gronwall_bound, r.e1, r.e2, r.e3, r.e4]);
    }
    t
}

pub fn sweep_table(records: &[SweepRecord]) -> Table {
    let mut t = Table::new(&[
        ("nu", "L^2 T^-1"),
        ("sigma", "1"),
        ("beta", "1"),
        ("h", "L"),
        ("ell", "L"),
        ("dt", "T"),
        ("steps", "1"),
        ("besov_seminorm", "L^(1+2/p-sigma) T^-1"),
        ("u_sup_l3", "L T^-2/3"),
        ("p_sup_l3_2", "L^2 T^-4/3"),
        ("u_sup_linf", SPEED),
        ("p_sup_l2", "L^2 T^-3/2"),
        ("equicontinuity", "L T^-2/3"),
        ("weak_modulus_l3", "L^2 T^-2/3"),
        ("kato_nu", ENERGY),
        ("kato_nu_beta", ENERGY),
        ("kato_normalized", "L^(4-2(1-beta)) T^(-2+(1-beta))"),
        ("total_dissipation", ENERGY),
        ("budget_residual", ENERGY),
        ("ke0", ENERGY),
    ]);
    for r in records {
        t.push(&[
            r.nu,
            r.sigma,
            r.beta,
            r.h,
            r.ell,
            r.dt,
            r.steps as f64,
            r.besov_seminorm,
            r.u_sup_l3,
            r.p_sup_l3_2,
            r.u_sup_linf,
            r.p_sup_l2,
            r.equicontinuity,
            r.weak_modulus_l3,
            r.kato_nu,
            r.kato_nu_beta,
            r.kato_normalized,
            r.total_dissipation,
            r.budget_residual,
            r.ke0,
        ]);
    }
    t
}

#[derive(Debug, Clone, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// Record of one command invocation, written last into the output directory.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub timings: Vec<StageTiming>,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        Self {
            tool: "wallflux".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            timings: Vec::new(),
        }
    }

    pub fn stage(&mut self, stage: &str, seconds: f64) {
        self.timings.push(StageTiming {
            stage: stage.into(),
            seconds,
        });
    }

    /// Check that every listed output exists, then write `manifest.json`.
    pub fn finish(&self, dir: &Path) -> Result<PathBuf> {
        if let Some(missing) = self.outputs.iter().find(|p| !p.exists()) {
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!(
                    "output {} listed in the manifest does not exist",
                    missing.display()
                ),
            )));
        }
        let path = dir.join("manifest.json");
        write_atomic(&path, &serde_json::to_vec_pretty(self)?)?;
        Ok(path)
    }
}
