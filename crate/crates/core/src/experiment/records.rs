//! CSV and JSON serialisation of sweep records.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::criticality::SweepRecord;
use crate::error::{Error, Result};
use crate::hamiltonian::Eta;

pub const CSV_COLUMNS: [&str; 13] = [
    "eta",
    "L",
    "N",
    "h",
    "qfi",
    "cfi",
    "gap",
    "energy0",
    "delta_h",
    "richardson_err",
    "residual",
    "valid",
    "wall_time",
];

/// Shortest decimal that parses back to the same `f64`.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:?}")
    }
}

fn format_opt(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

fn parse_float(s: &str, column: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad {column} value {s:?}")))
}

fn parse_opt(s: &str, column: &str) -> Result<Option<f64>> {
    if s.trim().is_empty() {
        Ok(None)
    } else {
        parse_float(s, column).map(Some)
    }
}

pub fn write_csv<W: Write>(out: W, records: &[SweepRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in records {
        w.write_record([
            r.eta.to_string(),
            r.sites.to_string(),
            r.excitations.to_string(),
            format_float(r.h),
            format_float(r.qfi),
            format_opt(r.cfi),
            format_opt(r.gap),
            format_float(r.energy0),
            format_float(r.delta_h),
            format_float(r.richardson_err),
            format_float(r.residual),
            r.valid.to_string(),
            format_float(r.wall_time),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<SweepRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let headers = rd.headers()?.clone();
    if headers.iter().ne(CSV_COLUMNS) {
        return Err(Error::Config(format!(
            "unexpected CSV header {:?}",
            headers.iter().collect::<Vec<_>>()
        )));
    }
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row?;
        let f = |i: usize| parse_float(&row[i], CSV_COLUMNS[i]);
        let u = |i: usize| {
            row[i]
                .trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("bad {} {:?}", CSV_COLUMNS[i], &row[i])))
        };
        out.push(SweepRecord {
            eta: row[0]
                .parse::<Eta>()
                .map_err(|e| Error::Config(e.to_string()))?,
            sites: u(1)?,
            excitations: u(2)?,
            h: f(3)?,
            qfi: f(4)?,
            cfi: parse_opt(&row[5], "cfi")?,
            gap: parse_opt(&row[6], "gap")?,
            energy0: f(7)?,
            delta_h: f(8)?,
            richardson_err: f(9)?,
            residual: f(10)?,
            valid: row[11]
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad valid {:?}", &row[11])))?,
            wall_time: f(12)?,
        });
    }
    Ok(out)
}

/// JSON row; non-finite numbers become `null`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct JsonRecord {
    eta: Eta,
    #[serde(rename = "L")]
    sites: usize,
    #[serde(rename = "N")]
    excitations: usize,
    h: f64,
    qfi: Option<f64>,
    cfi: Option<f64>,
    gap: Option<f64>,
    energy0: Option<f64>,
    delta_h: Option<f64>,
    richardson_err: Option<f64>,
    residual: Option<f64>,
    valid: bool,
    wall_time: f64,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl From<&SweepRecord> for JsonRecord {
    fn from(r: &SweepRecord) -> Self {
        Self {
            eta: r.eta,
            sites: r.sites,
            excitations: r.excitations,
            h: r.h,
            qfi: finite(r.qfi),
            cfi: r.cfi.and_then(finite),
            gap: r.gap.and_then(finite),
            energy0: finite(r.energy0),
            delta_h: finite(r.delta_h),
            richardson_err: finite(r.richardson_err),
            residual: finite(r.residual),
            valid: r.valid,
            wall_time: r.wall_time,
        }
    }
}

impl From<JsonRecord> for SweepRecord {
    fn from(r: JsonRecord) -> Self {
        let nan = |x: Option<f64>| x.unwrap_or(f64::NAN);
        Self {
            eta: r.eta,
            sites: r.sites,
            excitations: r.excitations,
            h: r.h,
            qfi: nan(r.qfi),
            cfi: r.cfi,
            gap: r.gap,
            energy0: nan(r.energy0),
            delta_h: nan(r.delta_h),
            richardson_err: nan(r.richardson_err),
            residual: nan(r.residual),
            valid: r.valid,
            wall_time: r.wall_time,
        }
    }
}

pub fn write_json<W: Write>(mut out: W, records: &[SweepRecord]) -> Result<()> {
    let rows: Vec<JsonRecord> = records.iter().map(JsonRecord::from).collect();
    serde_json::to_writer_pretty(&mut out, &rows)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn read_json<R: Read>(input: R) -> Result<Vec<SweepRecord>> {
    let rows: Vec<JsonRecord> = serde_json::from_reader(input)?;
    Ok(rows.into_iter().map(SweepRecord::from).collect())
}
