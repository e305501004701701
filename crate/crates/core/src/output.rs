//! Output writers: CSV time series, VTK legacy snapshots, JSON summary.
//!
//! All writers are deterministic byte-for-byte for a fixed configuration:
//! numbers are formatted with 9 significant digits in plain decimal
//! notation and files use LF line endings.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use nalgebra::Vector3;
use serde::Serialize;
use thiserror::Error;

use crate::config::RunConfig;
use crate::mesh::{Mesh, Region};
use crate::protocol::{ScenarioResult, Simulation, TimeSeriesRecord};

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("i/o error writing {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("snapshot parse error at line {line}: {message}")]
    SnapshotParse { line: usize, message: String },
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

fn write_file(path: &Path, content: &str) -> Result<(), OutputError> {
    fs::write(path, content).map_err(|source| OutputError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Plain decimal notation with 9 significant digits (no exponent), the
/// fixed number format of all text outputs.
pub fn fmt_sig9(v: f64) -> String {
    if v == 0.0 {
        return "0.00000000".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (8 - magnitude).clamp(0, 17) as usize;
    format!("{v:.decimals$}")
}

pub const TIMESERIES_HEADER: &str = "day,max_dG_circ_pps,max_dG_merid_pps,mean_pps_thickness_mm,circ_fraction_pct,merid_fraction_pct,apex_disp_mm";

/// Render the record stream as CSV.
pub fn render_timeseries(records: &[TimeSeriesRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(TIMESERIES_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt_sig9(r.day),
            fmt_sig9(r.max_dg_circ_pps),
            fmt_sig9(r.max_dg_merid_pps),
            fmt_sig9(r.mean_pps_thickness_mm),
            fmt_sig9(r.circ_fraction_pct),
            fmt_sig9(r.merid_fraction_pct),
            fmt_sig9(r.apex_disp_mm),
        );
    }
    out
}

pub fn write_timeseries(path: &Path, records: &[TimeSeriesRecord]) -> Result<(), OutputError> {
    write_file(path, &render_timeseries(records))
}

/// Per-cell fields carried by a snapshot.
pub struct SnapshotFields {
    pub region_id: Vec<f64>,
    pub mean_dg_circ: Vec<f64>,
    pub mean_dg_merid: Vec<f64>,
    pub thickness_stretch: Vec<f64>,
    pub rho0_fc: Vec<f64>,
    pub rho0_fm: Vec<f64>,
    pub lambda_r_circ: Vec<f64>,
    pub lambda_r_merid: Vec<f64>,
}

/// Gather the snapshot cell fields from a live simulation.
pub fn snapshot_fields(sim: &Simulation) -> Result<SnapshotFields, crate::protocol::ProtocolError> {
    let mesh = sim.mesh();
    let stimuli = sim.stimulus_fields()?;
    let fs = sim.deformation_gradients();
    let n = mesh.elements.len();
    let mut fields = SnapshotFields {
        region_id: Vec::with_capacity(n),
        mean_dg_circ: Vec::with_capacity(n),
        mean_dg_merid: Vec::with_capacity(n),
        thickness_stretch: Vec::with_capacity(n),
        rho0_fc: Vec::with_capacity(n),
        rho0_fm: Vec::with_capacity(n),
        lambda_r_circ: Vec::with_capacity(n),
        lambda_r_merid: Vec::with_capacity(n),
    };
    for (ei, e) in mesh.elements.iter().enumerate() {
        let m = sim.states[ei].len() as f64;
        let mean = |f: &dyn Fn(usize) -> f64| (0..sim.states[ei].len()).map(f).sum::<f64>() / m;
        fields.region_id.push(match e.region {
            Region::Lc => 0.0,
            Region::Pps => 1.0,
            Region::Ps => 2.0,
        });
        fields
            .mean_dg_circ
            .push(mean(&|g| stimuli[ei][g].0));
        fields
            .mean_dg_merid
            .push(mean(&|g| stimuli[ei][g].1));
        fields
            .thickness_stretch
            .push(mean(&|g| (fs[ei][g] * sim.states[ei][g].a0_perp).norm()));
        fields.rho0_fc.push(mean(&|g| sim.states[ei][g].fiber_c.rho0));
        fields.rho0_fm.push(mean(&|g| sim.states[ei][g].fiber_m.rho0));
        fields
            .lambda_r_circ
            .push(mean(&|g| sim.states[ei][g].fiber_c.lambda_r));
        fields
            .lambda_r_merid
            .push(mean(&|g| sim.states[ei][g].fiber_m.lambda_r));
    }
    Ok(fields)
}

/// Render a VTK legacy ASCII UNSTRUCTURED_GRID snapshot with deformed
/// points, nodal displacements, and per-cell state fields.
pub fn render_snapshot(
    mesh: &Mesh,
    displacements: &[Vector3<f64>],
    fields: &SnapshotFields,
    day: f64,
) -> String {
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    let _ = writeln!(out, "G&R state at day {}", fmt_sig9(day));
    out.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(out, "POINTS {} double", mesh.nodes.len());
    for (x, u) in mesh.nodes.iter().zip(displacements) {
        let p = x + u;
        let _ = writeln!(out, "{} {} {}", fmt_sig9(p.x), fmt_sig9(p.y), fmt_sig9(p.z));
    }
    let total_indices: usize = mesh
        .elements
        .iter()
        .map(|e| e.kind.node_count() + 1)
        .sum();
    let _ = writeln!(out, "CELLS {} {}", mesh.elements.len(), total_indices);
    for e in &mesh.elements {
        let _ = write!(out, "{}", e.kind.node_count());
        for &node in &e.nodes {
            let _ = write!(out, " {node}");
        }
        out.push('\n');
    }
    let _ = writeln!(out, "CELL_TYPES {}", mesh.elements.len());
    for e in &mesh.elements {
        let _ = writeln!(out, "{}", e.kind.vtk_cell_type());
    }
    let _ = writeln!(out, "POINT_DATA {}", mesh.nodes.len());
    out.push_str("VECTORS displacement double\n");
    for u in displacements {
        let _ = writeln!(out, "{} {} {}", fmt_sig9(u.x), fmt_sig9(u.y), fmt_sig9(u.z));
    }
    let _ = writeln!(out, "CELL_DATA {}", mesh.elements.len());
    for (name, values) in [
        ("region_id", &fields.region_id),
        ("mean_dG_circ", &fields.mean_dg_circ),
        ("mean_dG_merid", &fields.mean_dg_merid),
        ("thickness_stretch", &fields.thickness_stretch),
        ("rho0_fc", &fields.rho0_fc),
        ("rho0_fm", &fields.rho0_fm),
        ("lambda_r_circ", &fields.lambda_r_circ),
        ("lambda_r_merid", &fields.lambda_r_merid),
    ] {
        let _ = writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for v in values {
            let _ = writeln!(out, "{}", fmt_sig9(*v));
        }
    }
    out
}

/// Write `snapshot_<day>.vtk` into `dir`.
pub fn write_snapshot(
    dir: &Path,
    mesh: &Mesh,
    displacements: &[Vector3<f64>],
    fields: &SnapshotFields,
    day: f64,
) -> Result<(), OutputError> {
    let path = dir.join(format!("snapshot_{day}.vtk"));
    write_file(&path, &render_snapshot(mesh, displacements, fields, day))
}

/// Minimal parsed view of a legacy VTK snapshot, used to validate format
/// conformance in tests.
pub struct ParsedSnapshot {
    pub points: Vec<[f64; 3]>,
    pub cells: Vec<Vec<usize>>,
    pub cell_types: Vec<u8>,
    pub point_vectors: Vec<(String, Vec<[f64; 3]>)>,
    pub cell_scalars: Vec<(String, Vec<f64>)>,
}

/// Parse a legacy ASCII VTK unstructured grid (only the constructs the
/// writer emits).
pub fn parse_snapshot(text: &str) -> Result<ParsedSnapshot, OutputError> {
    let lines: Vec<&str> = text.lines().collect();
    let err = |line: usize, message: &str| OutputError::SnapshotParse {
        line: line + 1,
        message: message.to_string(),
    };
    let mut snapshot = ParsedSnapshot {
        points: Vec::new(),
        cells: Vec::new(),
        cell_types: Vec::new(),
        point_vectors: Vec::new(),
        cell_scalars: Vec::new(),
    };
    if lines.len() < 5 || !lines[0].starts_with("# vtk DataFile") {
        return Err(err(0, "missing VTK header"));
    }
    if lines[2] != "ASCII" || lines[3] != "DATASET UNSTRUCTURED_GRID" {
        return Err(err(2, "expected ASCII UNSTRUCTURED_GRID"));
    }
    let mut i = 4;
    while i < lines.len() {
        let tokens: Vec<&str> = lines[i].split_whitespace().collect();
        match tokens.first().copied() {
            Some("POINTS") => {
                let count: usize = tokens[1].parse().map_err(|_| err(i, "bad POINTS count"))?;
                for k in 0..count {
                    let v: Vec<f64> = lines[i + 1 + k]
                        .split_whitespace()
                        .map(|t| t.parse().unwrap_or(f64::NAN))
                        .collect();
                    if v.len() != 3 || v.iter().any(|x| x.is_nan()) {
                        return Err(err(i + 1 + k, "bad point"));
                    }
                    snapshot.points.push([v[0], v[1], v[2]]);
                }
                i += 1 + count;
            }
            Some("CELLS") => {
                let count: usize = tokens[1].parse().map_err(|_| err(i, "bad CELLS count"))?;
                for k in 0..count {
                    let v: Vec<usize> = lines[i + 1 + k]
                        .split_whitespace()
                        .map(|t| t.parse().unwrap_or(usize::MAX))
                        .collect();
                    if v.is_empty() || v[0] + 1 != v.len() || v.contains(&usize::MAX) {
                        return Err(err(i + 1 + k, "bad cell row"));
                    }
                    snapshot.cells.push(v[1..].to_vec());
                }
                i += 1 + count;
            }
            Some("CELL_TYPES") => {
                let count: usize = tokens[1].parse().map_err(|_| err(i, "bad count"))?;
                for k in 0..count {
                    snapshot.cell_types.push(
                        lines[i + 1 + k]
                            .trim()
                            .parse()
                            .map_err(|_| err(i + 1 + k, "bad cell type"))?,
                    );
                }
                i += 1 + count;
            }
            Some("POINT_DATA") | Some("CELL_DATA") => i += 1,
            Some("VECTORS") => {
                let name = tokens[1].to_string();
                let count = snapshot.points.len();
                let mut vectors = Vec::with_capacity(count);
                for k in 0..count {
                    let v: Vec<f64> = lines[i + 1 + k]
                        .split_whitespace()
                        .map(|t| t.parse().unwrap_or(f64::NAN))
                        .collect();
                    if v.len() != 3 {
                        return Err(err(i + 1 + k, "bad vector"));
                    }
                    vectors.push([v[0], v[1], v[2]]);
                }
                snapshot.point_vectors.push((name, vectors));
                i += 1 + count;
            }
            Some("SCALARS") => {
                let name = tokens[1].to_string();
                if !lines[i + 1].starts_with("LOOKUP_TABLE") {
                    return Err(err(i + 1, "expected LOOKUP_TABLE"));
                }
                let count = snapshot.cells.len();
                let mut values = Vec::with_capacity(count);
                for k in 0..count {
                    values.push(
                        lines[i + 2 + k]
                            .trim()
                            .parse()
                            .map_err(|_| err(i + 2 + k, "bad scalar"))?,
                    );
                }
                snapshot.cell_scalars.push((name, values));
                i += 2 + count;
            }
            _ => return Err(err(i, "unexpected section")),
        }
    }
    Ok(snapshot)
}

/// Machine-readable end-of-run summary.
#[derive(Serialize)]
pub struct RunSummary<'a> {
    pub scenario: &'a crate::protocol::ScenarioSpec,
    pub classification: crate::protocol::Classification,
    /// Tipping day (unstable) or stabilization day (stable).
    pub event_day: f64,
    pub initial_thickness_mm: f64,
    pub final_thickness_mm: f64,
    pub thickness_reduction_pct: f64,
    pub final_circ_fraction_pct: f64,
    pub final_merid_fraction_pct: f64,
    pub solver: crate::protocol::SolverStats,
    /// Full effective configuration, echoed as the flat-key document.
    pub config: String,
}

pub fn render_summary(result: &ScenarioResult, config: &RunConfig) -> Result<String, OutputError> {
    let summary = RunSummary {
        scenario: &result.spec,
        classification: result.classification,
        event_day: result.event_day,
        initial_thickness_mm: round9(result.initial_thickness_mm),
        final_thickness_mm: round9(result.final_thickness_mm),
        thickness_reduction_pct: round9(result.thickness_reduction_pct),
        final_circ_fraction_pct: round9(result.final_circ_fraction_pct),
        final_merid_fraction_pct: round9(result.final_merid_fraction_pct),
        solver: result.solver,
        config: config.to_document(),
    };
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    Ok(text)
}

/// Round to 9 significant digits so JSON numbers match the CSV precision.
fn round9(v: f64) -> f64 {
    fmt_sig9(v).parse().unwrap_or(v)
}

pub fn write_summary(
    path: &Path,
    result: &ScenarioResult,
    config: &RunConfig,
) -> Result<(), OutputError> {
    write_file(path, &render_summary(result, config)?)
}
