//! CSV and JSON writers for sweep tables.

use serde::Serialize;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use crate::error::Result;
use crate::sweep::{SweepOutput, SweepRow, SweepSpec};

/// Exact header of the emission table.
pub const EMISSION_HEADER: &str = "g,omega_d,i_out,g2,converged,n_fock,n_levels,refinements,wall_ms";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Serialize)]
struct CsvRow {
    g: f64,
    omega_d: Option<f64>,
    i_out: Option<f64>,
    g2: Option<f64>,
    converged: bool,
    n_fock: usize,
    n_levels: usize,
    refinements: usize,
    wall_ms: u64,
}

impl From<&SweepRow> for CsvRow {
    fn from(r: &SweepRow) -> Self {
        Self {
            g: r.g,
            omega_d: r.omega_d,
            i_out: r.i_out,
            g2: r.g2,
            converged: r.converged,
            n_fock: r.n_fock,
            n_levels: r.n_levels,
            refinements: r.refinements,
            wall_ms: r.wall_ms,
        }
    }
}

/// Emission rows as CSV; undefined values become empty fields.
pub fn write_emission_csv<W: Write>(rows: &[SweepRow], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    if rows.is_empty() {
        w.write_record(EMISSION_HEADER.split(','))?;
    }
    for row in rows {
        w.serialize(CsvRow::from(row))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Metadata<'a> {
    spec: &'a SweepSpec,
    version: &'static str,
    timestamp: u64,
}

#[derive(Serialize)]
struct JsonDoc<'a, R: Serialize> {
    metadata: Metadata<'a>,
    rows: &'a [R],
}

fn unix_seconds() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn write_json<W: Write, R: Serialize>(spec: &SweepSpec, rows: &[R], sink: W) -> Result<()> {
    let doc = JsonDoc {
        metadata: Metadata {
            spec,
            version: env!("CARGO_PKG_VERSION"),
            timestamp: unix_seconds(),
        },
        rows,
    };
    serde_json::to_writer_pretty(sink, &doc)?;
    Ok(())
}

fn write_table<W: Write, R: Serialize>(rows: &[R], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes any sweep output in the requested format.
pub fn write_output<W: Write>(spec: &SweepSpec, out: &SweepOutput, format: Format, sink: W) -> Result<()> {
    match (out, format) {
        (SweepOutput::Emission(r), Format::Csv) => write_emission_csv(&r.rows, sink),
        (SweepOutput::Emission(r), Format::Json) => write_json(spec, &r.rows, sink),
        (SweepOutput::Spectrum(r), Format::Csv) => write_table(r, sink),
        (SweepOutput::Spectrum(r), Format::Json) => write_json(spec, r, sink),
        (SweepOutput::Rates(r), Format::Csv) => write_table(r, sink),
        (SweepOutput::Rates(r), Format::Json) => write_json(spec, r, sink),
        (SweepOutput::Anharmonicity(r), Format::Csv) => write_table(r, sink),
        (SweepOutput::Anharmonicity(r), Format::Json) => write_json(spec, r, sink),
    }
}

pub fn write_output_file(spec: &SweepSpec, out: &SweepOutput, format: Format, path: &Path) -> Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_output(spec, out, format, file)
}
