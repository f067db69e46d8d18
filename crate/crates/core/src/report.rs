//! Text outputs of a run: nodal fields, quadrature-point states, iteration
//! history and a legacy VTK file.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fem::{ElementType, Mesh};
use crate::phase_space::{penalty_value, DataSet};
use crate::solver::SolveReport;

/// Identification echoed at the top of every output file.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportHeader {
    pub formulation: String,
    pub status: String,
    pub config_hash: String,
    pub mu0: Option<f64>,
}

impl ReportHeader {
    pub fn for_report(report: &SolveReport, config_hash: &str) -> Self {
        ReportHeader {
            formulation: report.formulation.to_string(),
            status: report.status.to_string(),
            config_hash: config_hash.to_string(),
            mu0: Some(report.mu0),
        }
    }

    pub fn line(&self) -> String {
        let mu0 = self.mu0.map_or_else(|| "none".to_string(), |m| format!("{m:e}"));
        format!(
            "# dd-report v1 formulation={} status={} config={} mu0={mu0}\n",
            self.formulation, self.status, self.config_hash
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EmitFlags {
    pub fields: bool,
    pub states: bool,
    pub history: bool,
    pub vtk: bool,
}

impl Default for EmitFlags {
    fn default() -> Self {
        EmitFlags {
            fields: true,
            states: true,
            history: true,
            vtk: false,
        }
    }
}

fn diagnostics_line(report: &SolveReport) -> String {
    let d = &report.diagnostics;
    format!(
        "# stop={} data_iterations={} penalty={:e} equilibrium_residual={:e} compatibility_gap={:e} max_asymmetry={:e}\n",
        report.stop_reason,
        report.data_iterations,
        report.penalty,
        d.equilibrium_residual,
        d.compatibility_gap,
        d.max_asymmetry
    )
}

fn push_row(out: &mut String, cols: impl IntoIterator<Item = String>) {
    let mut first = true;
    for c in cols {
        if !first {
            out.push('\t');
        }
        first = false;
        out.push_str(&c);
    }
    out.push('\n');
}

fn axis(i: usize) -> char {
    ['x', 'y', 'z'][i]
}

/// Per-node coordinates, displacements and (when given) multipliers.
pub fn format_fields(mesh: &Mesh, u: &[f64], lambda: Option<&[f64]>, header: &ReportHeader, extra: &str) -> String {
    let d = mesh.dim();
    let mut out = header.line();
    out.push_str(extra);
    let mut cols = vec!["node".to_string()];
    cols.extend((0..d).map(|i| axis(i).to_string()));
    cols.extend((0..d).map(|i| format!("u_{}", axis(i))));
    if lambda.is_some() {
        cols.extend((0..d).map(|i| format!("lambda_{}", axis(i))));
    }
    push_row(&mut out, cols);
    for n in 0..mesh.num_nodes() {
        let mut row = vec![n.to_string()];
        row.extend(mesh.node(n).iter().map(|v| format!("{v:e}")));
        row.extend((0..d).map(|i| format!("{:e}", u[n * d + i])));
        if let Some(l) = lambda {
            row.extend((0..d).map(|i| format!("{:e}", l[n * d + i])));
        }
        push_row(&mut out, row);
    }
    out
}

/// One row per quadrature point: strain, stress, assigned tuple, local penalty.
pub fn format_states(mesh: &Mesh, set: &DataSet, report: &SolveReport, header: &ReportHeader) -> String {
    let d = mesh.dim();
    let nq = mesh.element_type().quadrature().len();
    let mut out = header.line();
    out.push_str(&diagnostics_line(report));
    let mut cols: Vec<String> = ["qp", "element", "point", "weight"].iter().map(|s| s.to_string()).collect();
    for name in ["strain", "stress"] {
        for i in 0..d {
            for j in 0..d {
                cols.push(format!("{name}_{}{}", i + 1, j + 1));
            }
        }
    }
    cols.push("assigned".into());
    cols.push("penalty".into());
    push_row(&mut out, cols);
    for (k, (s, w)) in report.states.iter().zip(&report.weights).enumerate() {
        let mut row = vec![k.to_string(), (k / nq).to_string(), (k % nq).to_string(), format!("{w:e}")];
        row.extend(s.strain.as_slice().iter().chain(s.stress.as_slice()).map(|v| format!("{v:e}")));
        match s.assigned.and_then(|id| set.get(id)) {
            Some(t) => {
                row.push(t.id.to_string());
                row.push(format!("{:e}", penalty_value(&s.strain, &s.stress, t, report.mu0)));
            }
            None => {
                row.push("-".into());
                row.push("nan".into());
            }
        }
        push_row(&mut out, row);
    }
    out
}

pub fn format_history(report: &SolveReport, header: &ReportHeader) -> String {
    let mut out = header.line();
    out.push_str(&diagnostics_line(report));
    out.push_str("load_step\titeration\tpenalty\treassigned\tnewton_iterations\tresidual\n");
    for h in &report.history {
        let _ = writeln!(
            out,
            "{}\t{}\t{:e}\t{}\t{}\t{:e}",
            h.load_step, h.iteration, h.penalty, h.reassigned, h.newton_iterations, h.residual
        );
    }
    out
}

fn vtk_cell_type(t: ElementType) -> u8 {
    match t {
        ElementType::Line2 => 3,
        ElementType::Quad4 => 9,
        ElementType::Hex8 => 12,
    }
}

/// Legacy ASCII unstructured grid with nodal vectors and per-cell mean penalty.
pub fn format_vtk(mesh: &Mesh, u: &[f64], lambda: Option<&[f64]>, cell_penalty: Option<&[f64]>, title: &str) -> String {
    let d = mesh.dim();
    let mut out = String::new();
    let _ = writeln!(out, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(out, "POINTS {} double", mesh.num_nodes());
    let pad = |v: &[f64]| -> String {
        (0..3).map(|i| format!("{:e}", v.get(i).copied().unwrap_or(0.0))).collect::<Vec<_>>().join(" ")
    };
    for n in 0..mesh.num_nodes() {
        let _ = writeln!(out, "{}", pad(mesh.node(n)));
    }
    let npe = mesh.element_type().nodes_per_element();
    let ne = mesh.num_elements();
    let _ = writeln!(out, "CELLS {ne} {}", ne * (npe + 1));
    for e in 0..ne {
        let conn: Vec<String> = mesh.element(e).iter().map(|n| n.to_string()).collect();
        let _ = writeln!(out, "{npe} {}", conn.join(" "));
    }
    let _ = writeln!(out, "CELL_TYPES {ne}");
    for _ in 0..ne {
        let _ = writeln!(out, "{}", vtk_cell_type(mesh.element_type()));
    }
    let _ = writeln!(out, "POINT_DATA {}", mesh.num_nodes());
    let mut fields: Vec<(&str, &[f64])> = vec![("displacement", u)];
    if let Some(l) = lambda {
        fields.push(("multiplier", l));
    }
    for (name, f) in fields {
        let _ = writeln!(out, "VECTORS {name} double");
        for n in 0..mesh.num_nodes() {
            let _ = writeln!(out, "{}", pad(&f[n * d..(n + 1) * d]));
        }
    }
    if let Some(p) = cell_penalty {
        let _ = writeln!(out, "CELL_DATA {ne}\nSCALARS penalty double 1\nLOOKUP_TABLE default");
        for v in p {
            let _ = writeln!(out, "{v:e}");
        }
    }
    out
}

/// Volume-weighted mean of the local penalty in each element.
pub fn cell_penalties(mesh: &Mesh, set: &DataSet, report: &SolveReport) -> Vec<f64> {
    let nq = mesh.element_type().quadrature().len();
    report
        .states
        .chunks(nq)
        .zip(report.weights.chunks(nq))
        .map(|(st, w)| {
            let vol: f64 = w.iter().sum();
            let s: f64 = st
                .iter()
                .zip(w)
                .map(|(s, w)| {
                    let t = s.assigned.and_then(|id| set.get(id));
                    t.map_or(f64::NAN, |t| w * penalty_value(&s.strain, &s.stress, t, report.mu0))
                })
                .sum();
            s / vol
        })
        .collect()
}

fn write(dir: &Path, name: &str, text: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(())
}

/// Writes the selected outputs of a data-driven solve into `dir`.
pub fn emit_report(
    dir: &Path,
    mesh: &Mesh,
    set: &DataSet,
    report: &SolveReport,
    config_hash: &str,
    flags: EmitFlags,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let header = ReportHeader::for_report(report, config_hash);
    let mut written = Vec::new();
    if flags.fields {
        let text = format_fields(mesh, &report.u, Some(&report.lambda), &header, &diagnostics_line(report));
        write(dir, "fields.tsv", &text, &mut written)?;
    }
    if flags.states {
        write(dir, "states.tsv", &format_states(mesh, set, report, &header), &mut written)?;
    }
    if flags.history {
        write(dir, "history.tsv", &format_history(report, &header), &mut written)?;
    }
    if flags.vtk {
        let title = header.line().trim_start_matches("# ").trim_end().to_string();
        let pen = cell_penalties(mesh, set, report);
        let text = format_vtk(mesh, &report.u, Some(&report.lambda), Some(&pen), &title);
        write(dir, "solution.vtk", &text, &mut written)?;
    }
    Ok(written)
}

/// Writes the displacement field of a classical reference solve.
pub fn emit_reference(dir: &Path, mesh: &Mesh, u: &[f64], config_hash: &str, vtk: bool) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let header = ReportHeader {
        formulation: "reference".into(),
        status: "CONVERGED".into(),
        config_hash: config_hash.into(),
        mu0: None,
    };
    let mut written = Vec::new();
    write(dir, "fields.tsv", &format_fields(mesh, u, None, &header, ""), &mut written)?;
    if vtk {
        write(dir, "solution.vtk", &format_vtk(mesh, u, None, None, "dd-report reference"), &mut written)?;
    }
    Ok(written)
}
