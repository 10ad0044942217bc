//! Field snapshots as legacy VTK and time series as CSV.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::solver::Simulation;
use crate::Vec2;

/// Per-cell fields on the Cartesian grid, row-major with `i` fastest.
/// Solid cells carry zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSnapshot {
    pub nx: usize,
    pub ny: usize,
    pub origin: Vec2,
    pub spacing: Vec2,
    pub rho: Vec<f64>,
    pub u: Vec<Vec2>,
    pub temperature: Vec<f64>,
    pub pressure: Vec<f64>,
    pub cell_type: Vec<i32>,
}

impl FieldSnapshot {
    pub fn capture(sim: &Simulation) -> Self {
        let grid = &sim.grid;
        let n = grid.n_cells();
        let mut s = Self {
            nx: grid.nx,
            ny: grid.ny,
            origin: grid.center(0, 0),
            spacing: Vec2::new(grid.dx, grid.dy),
            rho: vec![0.0; n],
            u: vec![Vec2::zeros(); n],
            temperature: vec![0.0; n],
            pressure: vec![0.0; n],
            cell_type: vec![0; n],
        };
        for c in 0..n {
            s.cell_type[c] = sim.geometry().cells[c].cell_type.code();
            if let Some(m) = sim.cell_moments(c) {
                s.rho[c] = m.rho;
                s.u[c] = m.u;
                s.temperature[c] = m.temperature;
                s.pressure[c] = m.pressure;
            }
        }
        s
    }
}

fn scalars(
    out: &mut impl Write,
    name: &str,
    ty: &str,
    values: impl Iterator<Item = String>,
) -> std::io::Result<()> {
    writeln!(out, "SCALARS {name} {ty} 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for v in values {
        writeln!(out, "{v}")?;
    }
    Ok(())
}

/// Writes a legacy ASCII STRUCTURED_POINTS file with one point per cell
/// centre.
pub fn write_fields(snap: &FieldSnapshot, path: &Path) -> Result<()> {
    let io = |e| Error::io(path, e);
    let file = File::create(path).map_err(io)?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(out, "# vtk DataFile Version 3.0")?;
        writeln!(out, "cut-cell kinetic fields")?;
        writeln!(out, "ASCII")?;
        writeln!(out, "DATASET STRUCTURED_POINTS")?;
        writeln!(out, "DIMENSIONS {} {} 1", snap.nx, snap.ny)?;
        writeln!(out, "ORIGIN {:e} {:e} 0", snap.origin.x, snap.origin.y)?;
        writeln!(out, "SPACING {:e} {:e} 1", snap.spacing.x, snap.spacing.y)?;
        writeln!(out, "POINT_DATA {}", snap.nx * snap.ny)?;
        scalars(
            out,
            "rho",
            "double",
            snap.rho.iter().map(|v| format!("{v:.16e}")),
        )?;
        writeln!(out, "VECTORS u double")?;
        for u in &snap.u {
            writeln!(out, "{:.16e} {:.16e} 0", u.x, u.y)?;
        }
        scalars(
            out,
            "T",
            "double",
            snap.temperature.iter().map(|v| format!("{v:.16e}")),
        )?;
        scalars(
            out,
            "P",
            "double",
            snap.pressure.iter().map(|v| format!("{v:.16e}")),
        )?;
        scalars(
            out,
            "cell_type",
            "int",
            snap.cell_type.iter().map(|v| v.to_string()),
        )?;
        out.flush()
    };
    write(&mut out).map_err(io)
}

/// One row of the time series.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesRecord {
    pub t: f64,
    pub u_c: Vec2,
    pub theta: f64,
    pub theta_dot: f64,
    pub mass: f64,
    pub force: Vec2,
    pub torque: f64,
    pub probes: Vec<f64>,
}

impl TimeSeriesRecord {
    fn fields(&self) -> Vec<String> {
        let fixed = [
            self.t,
            self.u_c.x,
            self.u_c.y,
            self.theta,
            self.theta_dot,
            self.mass,
            self.force.x,
            self.force.y,
            self.torque,
        ];
        fixed
            .iter()
            .chain(&self.probes)
            .map(|v| format!("{v:.16e}"))
            .collect()
    }
}

pub const TIMESERIES_HEADER: [&str; 9] = [
    "t",
    "ux",
    "uy",
    "theta",
    "theta_dot",
    "mass",
    "Fx",
    "Fy",
    "torque",
];

/// Streaming CSV writer; the header is written on creation.
pub struct TimeSeriesWriter {
    inner: csv::Writer<File>,
    path: String,
    n_probes: usize,
    last_t: f64,
}

fn csv_err(path: &str, e: csv::Error) -> Error {
    Error::Io {
        path: path.to_string(),
        source: e.into(),
    }
}

impl TimeSeriesWriter {
    pub fn create(path: &Path, probe_names: &[String]) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut inner = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(file);
        let display = path.display().to_string();
        let header: Vec<&str> = TIMESERIES_HEADER
            .iter()
            .copied()
            .chain(probe_names.iter().map(String::as_str))
            .collect();
        inner
            .write_record(&header)
            .map_err(|e| csv_err(&display, e))?;
        inner.flush().map_err(|e| Error::io(path, e))?;
        Ok(Self {
            inner,
            path: display,
            n_probes: probe_names.len(),
            last_t: f64::NEG_INFINITY,
        })
    }

    pub fn push(&mut self, rec: &TimeSeriesRecord) -> Result<()> {
        if rec.probes.len() != self.n_probes {
            return Err(Error::config(format!(
                "time-series record has {} probes, header has {}",
                rec.probes.len(),
                self.n_probes
            )));
        }
        if rec.t < self.last_t {
            return Err(Error::config(
                "time-series records must have nondecreasing t",
            ));
        }
        self.last_t = rec.t;
        self.inner
            .write_record(rec.fields())
            .map_err(|e| csv_err(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush().map_err(|e| Error::Io {
            path: self.path.clone(),
            source: e,
        })
    }
}

pub fn write_timeseries(
    records: &[TimeSeriesRecord],
    probe_names: &[String],
    path: &Path,
) -> Result<()> {
    let mut w = TimeSeriesWriter::create(path, probe_names)?;
    for r in records {
        w.push(r)?;
    }
    w.finish()
}
