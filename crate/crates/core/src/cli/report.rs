//! CSV report rows and the mechanism-by-epsilon comparison layout.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const REPORT_HEADER: [&str; 11] = [
    "mechanism",
    "epsilon",
    "delta",
    "m",
    "estimand",
    "ci_kind",
    "coverage",
    "mean_width",
    "width_std_err",
    "N",
    "wall_time_s",
];

/// One (mechanism, epsilon) cell of a simulation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub mechanism: String,
    pub epsilon: f64,
    pub delta: Option<f64>,
    pub m: Option<u64>,
    pub estimand: String,
    pub ci_kind: String,
    pub coverage: f64,
    pub mean_width: f64,
    pub width_std_err: f64,
    #[serde(rename = "N")]
    pub n: u64,
    /// Left empty unless timing was requested, so reports stay reproducible.
    pub wall_time_s: Option<f64>,
}

pub fn write_rows<W: Write>(rows: &[ReportRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(REPORT_HEADER).map_err(io_err)?;
    for r in rows {
        w.serialize(r).map_err(io_err)?;
    }
    w.flush().map_err(|e| Error::Input(e.to_string()))
}

pub fn read_rows<R: Read>(input: R) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(io_err)?.clone();
    if header.iter().ne(REPORT_HEADER) {
        return Err(Error::Input(format!(
            "unexpected report header `{}`; expected `{}`",
            header.iter().collect::<Vec<_>>().join(","),
            REPORT_HEADER.join(",")
        )));
    }
    r.deserialize().map(|row| row.map_err(io_err)).collect()
}

fn io_err(e: csv::Error) -> Error {
    Error::Input(e.to_string())
}

/// Column label for an epsilon.
fn eps_label(eps: f64) -> String {
    if eps.is_infinite() {
        "inf".into()
    } else {
        format!("{eps}")
    }
}

/// Reshapes rows into a table with one coverage line and one width line per
/// (mechanism, estimand, CI kind), one column per epsilon, `-` where a
/// mechanism was not run at that epsilon.
pub fn merge_table<W: Write>(rows: &[ReportRow], out: W) -> Result<()> {
    let mut eps: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    eps.sort_by(f64::total_cmp);
    eps.dedup();
    // Blocks keep first-appearance order.
    let mut order: Vec<(String, String, String)> = Vec::new();
    let mut cells: BTreeMap<(String, String, String, u64), &ReportRow> = BTreeMap::new();
    for r in rows {
        let key = (r.mechanism.clone(), r.estimand.clone(), r.ci_kind.clone());
        if !order.contains(&key) {
            order.push(key.clone());
        }
        let k = (key.0, key.1, key.2, r.epsilon.to_bits());
        if cells.insert(k, r).is_some() {
            return Err(Error::Input(format!("duplicate cell for {} at epsilon {}", r.mechanism, r.epsilon)));
        }
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["mechanism".to_string(), "estimand".into(), "ci_kind".into(), "metric".into()];
    header.extend(eps.iter().map(|&e| format!("eps={}", eps_label(e))));
    w.write_record(&header).map_err(io_err)?;
    for (mech, est, kind) in &order {
        for metric in ["coverage", "width"] {
            let mut line = vec![mech.clone(), est.clone(), kind.clone(), metric.to_string()];
            for &e in &eps {
                let cell = cells.get(&(mech.clone(), est.clone(), kind.clone(), e.to_bits()));
                line.push(match (cell, metric) {
                    (None, _) => "-".into(),
                    (Some(r), "coverage") => format!("{:.3}", r.coverage),
                    (Some(r), _) => format!("{:.3e} ± {:.2e}", r.mean_width, r.width_std_err),
                });
            }
            w.write_record(&line).map_err(io_err)?;
        }
    }
    w.flush().map_err(|e| Error::Input(e.to_string()))
}
