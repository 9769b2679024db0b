//! Diagnostics CSV, convergence reports and legacy VTK field snapshots.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::dg::DgSpace;
use crate::diagnostics::DiagnosticsSeries;
use crate::error::{Error, Result};

pub const DIAGNOSTICS_HEADER: &str = "t,energy,mass,newton_iters,clamp_events";
pub const CONVERGENCE_HEADER: &str = "h_label,dof,l2_error,order";

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(contents.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Config {
        line,
        message: format!("csv: {e}"),
    }
}

fn csv_text<const N: usize>(header: &str, rows: impl Iterator<Item = [String; N]>) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header.split(',')).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii fields")
}

/// Rows in shortest round-trip scientific notation.
pub fn diagnostics_csv(series: &DiagnosticsSeries) -> String {
    csv_text(
        DIAGNOSTICS_HEADER,
        (0..series.len()).map(|i| {
            [
                format!("{:e}", series.times[i]),
                format!("{:e}", series.energy[i]),
                format!("{:e}", series.mass[i]),
                series.newton_iters[i].to_string(),
                series.clamp_events[i].to_string(),
            ]
        }),
    )
}

pub fn write_diagnostics_csv(series: &DiagnosticsSeries, path: &Path) -> Result<()> {
    if series.is_empty() {
        return Err(Error::InvalidArgument("empty diagnostics series".into()));
    }
    write_file(path, &diagnostics_csv(series))
}

pub fn parse_diagnostics_csv(text: &str) -> Result<DiagnosticsSeries> {
    let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = r.headers().map_err(csv_error)?;
    if header.iter().collect::<Vec<_>>().join(",") != DIAGNOSTICS_HEADER {
        return Err(Error::Config {
            line: 1,
            message: format!("expected header `{DIAGNOSTICS_HEADER}`"),
        });
    }
    let mut series = DiagnosticsSeries::default();
    for rec in r.deserialize::<(f64, f64, f64, usize, usize)>() {
        let (t, e, m, it, cl) = rec.map_err(csv_error)?;
        series.push(t, e, m, it, cl);
    }
    Ok(series)
}

pub fn read_diagnostics_csv(path: &Path) -> Result<DiagnosticsSeries> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_diagnostics_csv(&text)
}

/// One level of a mesh ladder.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub h_label: f64,
    pub dofs: usize,
    pub l2_error: f64,
    /// Observed order against the previous level; empty on the first.
    pub order: Option<f64>,
}

pub fn convergence_report(rows: &[ConvergenceRow]) -> String {
    csv_text(
        CONVERGENCE_HEADER,
        rows.iter().map(|r| {
            [
                format!("{:e}", r.h_label),
                r.dofs.to_string(),
                format!("{:e}", r.l2_error),
                r.order.map(|o| format!("{o:e}")).unwrap_or_default(),
            ]
        }),
    )
}

pub fn write_convergence_report(rows: &[ConvergenceRow], path: &Path) -> Result<()> {
    write_file(path, &convergence_report(rows))
}

/// Legacy ASCII VTK unstructured grid with the field sampled at the three
/// vertices of every triangle. Vertices are not shared between triangles,
/// so jumps of `u_h` stay visible.
pub fn field_snapshot_vtk(space: &DgSpace, xi: &[f64], t: f64) -> Result<String> {
    space.check_len(xi)?;
    let mesh = space.mesh();
    let nk = space.n_elements();
    let corners = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\n");
    s.push_str(&format!("u at t={t:e}\n"));
    s.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    s.push_str(&format!("POINTS {} double\n", 3 * nk));
    let mut values = Vec::with_capacity(3 * nk);
    for k in 0..nk {
        let map = mesh.map(k);
        for c in corners {
            let p = map.to_physical(c[0], c[1]);
            s.push_str(&format!("{:e} {:e} 0\n", p[0], p[1]));
            values.push(space.eval_field(xi, k, c)?.0);
        }
    }
    s.push_str(&format!("CELLS {} {}\n", nk, 4 * nk));
    for k in 0..nk {
        s.push_str(&format!("3 {} {} {}\n", 3 * k, 3 * k + 1, 3 * k + 2));
    }
    s.push_str(&format!("CELL_TYPES {nk}\n"));
    for _ in 0..nk {
        // VTK_TRIANGLE
        s.push_str("5\n");
    }
    s.push_str(&format!("POINT_DATA {}\nSCALARS u double 1\nLOOKUP_TABLE default\n", 3 * nk));
    for v in values {
        s.push_str(&format!("{v:e}\n"));
    }
    Ok(s)
}

pub fn write_field_snapshot(space: &DgSpace, xi: &[f64], t: f64, path: &Path) -> Result<()> {
    write_file(path, &field_snapshot_vtk(space, xi, t)?)
}
