//! Result CSV format.
//!
//! ```text
//! path_id,od,flow,expected_disutility,gap,class,value,seed
//! 1,1,1466.6,18.19,0,used,,7
//! ...
//! z_min,1,,,,,18.19,7
//! residual,,,,,,8.1e-9,7
//! iterations,,,,,,123,7
//! converged,,,,,,true,7
//! ```
//!
//! Path and OD indices are 1-based. Rows whose `path_id` is a summary key
//! carry their payload in `value`. Floats use the shortest representation
//! that round-trips exactly.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::equilibrium::{complementarity_report, EquilibriumResult};
use crate::error::{Error, Result};
use crate::network::Network;

pub const RESULT_HEADER: [&str; 8] = [
    "path_id",
    "od",
    "flow",
    "expected_disutility",
    "gap",
    "class",
    "value",
    "seed",
];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct Row {
    path_id: String,
    od: Option<usize>,
    flow: Option<f64>,
    expected_disutility: Option<f64>,
    gap: Option<f64>,
    class: Option<String>,
    value: Option<String>,
    seed: u64,
}

/// One path line of a result file.
#[derive(Debug, Clone, PartialEq)]
pub struct PathLine {
    /// 1-based path index.
    pub path_id: usize,
    /// 1-based OD index.
    pub od: usize,
    pub flow: f64,
    pub expected_disutility: f64,
    pub gap: f64,
    pub class: String,
}

/// Parsed content of a result file.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub paths: Vec<PathLine>,
    pub z_min: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub seed: u64,
}

/// Writes `result` for `net`; path classes use the given tolerances.
pub fn write_result_csv<W: Write>(
    out: W,
    net: &Network,
    result: &EquilibriumResult,
    seed: u64,
    tol_flow: f64,
    tol_gap: f64,
) -> Result<()> {
    let report = complementarity_report(result, net, tol_flow, tol_gap);
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(RESULT_HEADER)?;
    for (r, rec) in report.records.iter().enumerate() {
        w.serialize(Row {
            path_id: (r + 1).to_string(),
            od: Some(rec.od + 1),
            flow: Some(rec.flow),
            expected_disutility: Some(result.expected_disutility[r]),
            gap: Some(rec.gap),
            class: Some(rec.class.label().to_string()),
            value: None,
            seed,
        })?;
    }
    for (k, z) in result.z_min.iter().enumerate() {
        w.serialize(Row {
            path_id: "z_min".into(),
            od: Some(k + 1),
            value: Some(z.to_string()),
            seed,
            ..Row::default()
        })?;
    }
    let summary = [
        ("residual", result.residual.to_string()),
        ("iterations", result.iterations.to_string()),
        ("converged", result.converged.to_string()),
    ];
    for (key, value) in summary {
        w.serialize(Row {
            path_id: key.into(),
            value: Some(value),
            seed,
            ..Row::default()
        })?;
    }
    w.flush()?;
    Ok(())
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn need<T>(x: Option<T>, what: &str, line: usize) -> Result<T> {
    x.ok_or_else(|| bad(format!("line {line}: missing {what}")))
}

fn value(row: &Row, line: usize) -> Result<&str> {
    row.value.as_deref().ok_or_else(|| bad(format!("line {line}: missing value")))
}

/// Parses a file produced by [`write_result_csv`].
pub fn read_result_csv<R: Read>(input: R) -> Result<ResultTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = rdr.headers()?.clone();
    if header.iter().ne(RESULT_HEADER) {
        return Err(bad(format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
    }
    let mut paths = Vec::new();
    let mut z_min: Vec<Option<f64>> = Vec::new();
    let (mut residual, mut iterations, mut converged) = (None, None, None);
    let mut seed = None;
    for (i, row) in rdr.deserialize::<Row>().enumerate() {
        let line = i + 2;
        let row = row?;
        if *seed.get_or_insert(row.seed) != row.seed {
            return Err(bad(format!("line {line}: seed differs from earlier rows")));
        }
        match row.path_id.as_str() {
            "z_min" => {
                let k = need(row.od, "od", line)?;
                if k == 0 || k > 1 << 20 {
                    return Err(bad(format!("line {line}: OD index {k} out of range")));
                }
                let z: f64 = value(&row, line)?
                    .parse()
                    .map_err(|_| bad(format!("line {line}: bad z_min")))?;
                if z_min.len() < k {
                    z_min.resize(k, None);
                }
                if z_min[k - 1].replace(z).is_some() {
                    return Err(bad(format!("line {line}: duplicate z_min for OD {k}")));
                }
            }
            "residual" => {
                residual = Some(value(&row, line)?.parse().map_err(|_| bad(format!("line {line}: bad residual")))?)
            }
            "iterations" => {
                iterations = Some(value(&row, line)?.parse().map_err(|_| bad(format!("line {line}: bad iterations")))?)
            }
            "converged" => {
                converged = Some(value(&row, line)?.parse().map_err(|_| bad(format!("line {line}: bad converged")))?)
            }
            id => {
                let path_id: usize = id.parse().map_err(|_| bad(format!("line {line}: unknown row key {id:?}")))?;
                if path_id != paths.len() + 1 {
                    return Err(bad(format!("line {line}: path {path_id} out of order")));
                }
                let od = need(row.od, "od", line)?;
                if od == 0 {
                    return Err(bad(format!("line {line}: OD index must be 1-based")));
                }
                paths.push(PathLine {
                    path_id,
                    od,
                    flow: need(row.flow, "flow", line)?,
                    expected_disutility: need(row.expected_disutility, "expected_disutility", line)?,
                    gap: need(row.gap, "gap", line)?,
                    class: need(row.class, "class", line)?,
                });
            }
        }
    }
    let z_min = z_min
        .into_iter()
        .enumerate()
        .map(|(k, z)| z.ok_or_else(|| bad(format!("missing z_min for OD {}", k + 1))))
        .collect::<Result<Vec<_>>>()?;
    if let Some(p) = paths.iter().find(|p| p.od > z_min.len()) {
        return Err(bad(format!("path {} refers to OD {} without z_min", p.path_id, p.od)));
    }
    Ok(ResultTable {
        paths,
        z_min,
        residual: need(residual, "residual row", 0)?,
        iterations: need(iterations, "iterations row", 0)?,
        converged: need(converged, "converged row", 0)?,
        seed: need(seed, "rows", 0)?,
    })
}

/// Text form of [`write_result_csv`].
pub fn result_csv_string(
    net: &Network,
    result: &EquilibriumResult,
    seed: u64,
    tol_flow: f64,
    tol_gap: f64,
) -> Result<String> {
    let mut buf = Vec::new();
    write_result_csv(&mut buf, net, result, seed, tol_flow, tol_gap)?;
    String::from_utf8(buf).map_err(|e| bad(e.to_string()))
}
