//! Output writers and the run manifest.
//!
//! Grid quantities ship in two selectable layouts: one columnar text file per
//! stored z plane, or a single flat binary grid (little-endian f64 pairs
//! Re/Im, row-major over t then z) with a text sidecar header. Every file
//! carries the run identifier from the manifest.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::bloch::BlochTrajectory;
use crate::error::{Error, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Deterministic 64-bit FNV-1a, used for run identifiers.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for b in bytes {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Run identifier derived from the command name, config snapshot and tool
/// version; stable across reruns of the same configuration.
pub fn run_id(command: &str, config_json: &serde_json::Value) -> String {
    let canon = serde_json::to_string(config_json).unwrap_or_default();
    format!(
        "{:016x}",
        fnv1a64(format!("{TOOL_VERSION}|{command}|{canon}").as_bytes())
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridFormat {
    Columns,
    Binary,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputFileEntry {
    pub path: String,
    pub kind: String,
}

/// Scalar summary appended by trigger-stage runs.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TriggerSummary {
    pub max_fluence_j_m2: f64,
    pub z_of_max_um: f64,
    pub photons_per_shot: f64,
    pub manley_rowe_residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridMeta {
    pub n_t: usize,
    pub t_min_ns: f64,
    pub t_max_ns: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dz_um: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_z: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_stride: Option<usize>,
}

/// Everything needed to reproduce and audit a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub tool_version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub grid: GridMeta,
    pub duration_seconds: f64,
    pub invariants: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trigger_summary: Option<TriggerSummary>,
    pub outputs: Vec<OutputFileEntry>,
}

impl RunManifest {
    /// Writes `manifest.json`, first checking that every listed output exists.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        for entry in &self.outputs {
            let p = dir.join(&entry.path);
            if !p.exists() {
                return Err(Error::invalid(
                    "RunManifest",
                    format!("listed output `{}` does not exist", entry.path),
                ));
            }
        }
        let path = dir.join("manifest.json");
        let mut file = fs::File::create(&path)?;
        serde_json::to_writer_pretty(&mut file, self)
            .map_err(|e| Error::invalid("RunManifest", e.to_string()))?;
        file.write_all(b"\n")?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::config("manifest", e.to_string()))
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, bytes)?;
    Ok(())
}

/// Columnar trajectory export: time, populations, Re/Im/|rho13|, with the
/// parameter set in the header.
pub fn write_trajectory(
    path: &Path,
    traj: &BlochTrajectory,
    run_id: &str,
    header_params: &str,
) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "# run_id: {run_id}").ok();
    writeln!(out, "# {header_params}").ok();
    writeln!(
        out,
        "# columns: t_ns rho11 rho22 rho33 re_rho13 im_rho13 abs_rho13"
    )
    .ok();
    for (t, s) in traj.times_ns.iter().zip(&traj.states) {
        let r13 = s.rho13();
        writeln!(
            out,
            "{t:.9e} {:.12e} {:.12e} {:.12e} {:.12e} {:.12e} {:.12e}",
            s.population(0),
            s.population(1),
            s.population(2),
            r13.re,
            r13.im,
            r13.norm(),
        )
        .ok();
    }
    write_atomic(path, out.as_bytes())
}

/// One complex quantity on the stored (z, t) grid.
pub struct GridQuantity<'a> {
    pub name: &'a str,
    pub unit: &'a str,
    pub z_um: &'a [f64],
    pub t_ns: &'a [f64],
    pub rows: &'a [Vec<C64>],
}

/// Binary layout: header text sidecar (`<stem>.hdr.txt`) plus
/// `<stem>.bin` = [z values][t values][re, im pairs, t fastest].
pub fn write_grid_binary(
    dir: &Path,
    stem: &str,
    q: &GridQuantity<'_>,
    run_id: &str,
) -> Result<Vec<OutputFileEntry>> {
    let n_z = q.z_um.len();
    let n_t = q.t_ns.len();
    let mut bytes = Vec::with_capacity(8 * (n_z + n_t + 2 * n_z * n_t));
    for z in q.z_um {
        bytes.extend_from_slice(&z.to_le_bytes());
    }
    for t in q.t_ns {
        bytes.extend_from_slice(&t.to_le_bytes());
    }
    for row in q.rows {
        for v in row {
            bytes.extend_from_slice(&v.re.to_le_bytes());
            bytes.extend_from_slice(&v.im.to_le_bytes());
        }
    }
    let bin_name = format!("{stem}.bin");
    write_atomic(&dir.join(&bin_name), &bytes)?;

    let mut header = String::new();
    writeln!(header, "lambdaprop grid v1").ok();
    writeln!(header, "run_id: {run_id}").ok();
    writeln!(header, "quantity: {} [{}]", q.name, q.unit).ok();
    writeln!(
        header,
        "layout: f64le z[{n_z}] t[{n_t}] then re,im pairs row-major (t fastest)"
    )
    .ok();
    let hdr_name = format!("{stem}.hdr.txt");
    write_atomic(&dir.join(&hdr_name), header.as_bytes())?;
    Ok(vec![
        OutputFileEntry {
            path: bin_name,
            kind: format!("{} (binary grid)", q.name),
        },
        OutputFileEntry {
            path: hdr_name,
            kind: format!("{} (binary grid header)", q.name),
        },
    ])
}

/// Axes and complex samples of a (z, t) grid file.
pub type GridData = (Vec<f64>, Vec<f64>, Vec<Vec<C64>>);

/// Reads back a binary grid written by [`write_grid_binary`].
pub fn read_grid_binary(path: &Path, n_z: usize, n_t: usize) -> Result<GridData> {
    let bytes = fs::read(path)?;
    let expect = 8 * (n_z + n_t + 2 * n_z * n_t);
    if bytes.len() != expect {
        return Err(Error::invalid(
            "grid binary",
            format!("expected {expect} bytes, found {}", bytes.len()),
        ));
    }
    let mut f64s = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let z: Vec<f64> = (&mut f64s).take(n_z).collect();
    let t: Vec<f64> = (&mut f64s).take(n_t).collect();
    let mut rows = Vec::with_capacity(n_z);
    for _ in 0..n_z {
        let mut row = Vec::with_capacity(n_t);
        for _ in 0..n_t {
            let re = f64s.next().unwrap();
            let im = f64s.next().unwrap();
            row.push(C64::new(re, im));
        }
        rows.push(row);
    }
    Ok((z, t, rows))
}

/// Columnar layout: one text file per stored z plane plus an index file.
pub fn write_grid_columns(
    dir: &Path,
    stem: &str,
    q: &GridQuantity<'_>,
    run_id: &str,
) -> Result<Vec<OutputFileEntry>> {
    let mut entries = Vec::new();
    let mut index = String::new();
    writeln!(index, "# run_id: {run_id}").ok();
    writeln!(index, "# quantity: {} [{}]", q.name, q.unit).ok();
    writeln!(index, "# columns: slice_index z_um file").ok();
    for (zi, (z, row)) in q.z_um.iter().zip(q.rows).enumerate() {
        let name = format!("{stem}_z{zi:06}.tsv");
        let mut out = String::new();
        writeln!(out, "# run_id: {run_id}").ok();
        writeln!(out, "# quantity: {} [{}] at z = {z:.9e} um", q.name, q.unit).ok();
        writeln!(out, "# columns: t_ns re im").ok();
        for (t, v) in q.t_ns.iter().zip(row) {
            writeln!(out, "{t:.9e} {:.12e} {:.12e}", v.re, v.im).ok();
        }
        write_atomic(&dir.join(&name), out.as_bytes())?;
        writeln!(index, "{zi} {z:.9e} {name}").ok();
        entries.push(OutputFileEntry {
            path: name,
            kind: format!("{} (z slice)", q.name),
        });
    }
    let index_name = format!("{stem}_index.txt");
    write_atomic(&dir.join(&index_name), index.as_bytes())?;
    entries.push(OutputFileEntry {
        path: index_name,
        kind: format!("{} (slice index)", q.name),
    });
    Ok(entries)
}

pub fn write_grid(
    dir: &Path,
    stem: &str,
    q: &GridQuantity<'_>,
    run_id: &str,
    format: GridFormat,
) -> Result<Vec<OutputFileEntry>> {
    match format {
        GridFormat::Binary => write_grid_binary(dir, stem, q, run_id),
        GridFormat::Columns => write_grid_columns(dir, stem, q, run_id),
    }
}

/// Simple table writer with a run-id header; first line names the columns.
pub fn write_table(path: &Path, run_id: &str, columns: &str, rows: &[Vec<f64>]) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "# run_id: {run_id}").ok();
    writeln!(out, "# columns: {columns}").ok();
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.12e}")).collect();
        writeln!(out, "{}", line.join(" ")).ok();
    }
    write_atomic(path, out.as_bytes())
}
