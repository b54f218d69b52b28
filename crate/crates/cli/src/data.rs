//! CSV ingestion and reports.
//!
//! * series data: one column per series symbol, one row per time step,
//!   empty cell = missing; a `t` column is ignored.
//! * residual report: `t,series,y,f,Q,std_resid,logpdf`.
//! * flow masses: `path,mass[,t]` with `path` written `a>b>c` using actor
//!   labels or `z(l,j)`.

use std::collections::BTreeMap;

use elicit_core::flow::{FlowGraph, Mass, PathFlow};
use elicit_core::mdm::{MdmError, MdmSpec, Trajectory};
use serde::Serialize;

use crate::error::{CliError, Result};

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes())
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Csv(e.to_string())
}

/// Rows of observations in the spec's series order.
pub fn read_series(text: &str, spec: &MdmSpec) -> Result<Vec<Vec<Option<f64>>>> {
    let mut rdr = reader(text);
    let header = rdr.headers().map_err(csv_err)?.clone();
    let columns = spec
        .nodes
        .iter()
        .map(|n| header.iter().position(|h| h == n.id).ok_or_else(|| MdmError::MissingSeries(n.id.clone()).into()))
        .collect::<Result<Vec<usize>>>()?;
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let row = columns
            .iter()
            .map(|c| match record.get(*c).unwrap_or("") {
                "" => Ok(None),
                cell => cell
                    .parse::<f64>()
                    .map(Some)
                    .map_err(|_| CliError::Csv(format!("row {}, column {}: not a number: {cell}", i + 2, &header[*c]))),
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(MdmError::EmptyData.into());
    }
    Ok(rows)
}

pub fn write_series(spec: &MdmSpec, rows: &[Vec<Option<f64>>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(spec.nodes.iter().map(|n| n.id.as_str())).expect("in-memory write");
    for row in rows {
        w.write_record(row.iter().map(|x| x.map(|v| format!("{v:?}")).unwrap_or_default())).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf8")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualLine {
    pub t: usize,
    pub series: String,
    pub y: Option<f64>,
    pub f: f64,
    #[serde(rename = "Q")]
    pub q: f64,
    pub std_resid: Option<f64>,
    pub logpdf: Option<f64>,
    /// Forecast used a parent's marginal forecast in place of a missing
    /// observation.
    pub approximate: bool,
}

pub fn residual_lines(traj: &Trajectory) -> Vec<ResidualLine> {
    traj.forecasts
        .iter()
        .flat_map(|step| {
            step.series.iter().map(move |s| ResidualLine {
                t: step.t,
                series: s.series.clone(),
                y: s.y,
                f: s.f,
                q: s.q,
                std_resid: s.std_residual,
                logpdf: s.log_density,
                approximate: s.approximate,
            })
        })
        .collect()
}

pub fn write_residuals(lines: &[ResidualLine]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "series", "y", "f", "Q", "std_resid", "logpdf"]).expect("in-memory write");
    let num = |x: Option<f64>| x.map(|v| format!("{v:?}")).unwrap_or_default();
    for l in lines {
        w.write_record([l.t.to_string(), l.series.clone(), num(l.y), num(Some(l.f)), num(Some(l.q)), num(l.std_resid), num(l.logpdf)])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf8")
}

/// Parses `a>b>c` into one actor index per level.
pub fn parse_path(g: &FlowGraph, text: &str) -> Result<Vec<usize>> {
    let parts: Vec<&str> = text.split('>').map(str::trim).collect();
    if parts.len() != g.level_count() {
        return Err(CliError::Csv(format!("path {text} has {} actors, the graph has {} levels", parts.len(), g.level_count())));
    }
    let mut out = Vec::with_capacity(parts.len());
    for (level, name) in parts.iter().enumerate() {
        let a = g.resolve(name)?;
        if a.level != level {
            return Err(CliError::Csv(format!("{name} is on level {}, not {}", a.level + 1, level + 1)));
        }
        out.push(a.index);
    }
    if !g.is_path(&out) {
        return Err(CliError::Csv(format!("{text} is not a path of the graph")));
    }
    Ok(out)
}

pub fn path_text(g: &FlowGraph, path: &[usize]) -> String {
    g.path_labels(path).join(">")
}

/// Path masses grouped by time index (`None` when there is no `t` column).
pub fn read_masses(text: &str, g: &FlowGraph) -> Result<BTreeMap<Option<usize>, Vec<PathFlow>>> {
    let mut rdr = reader(text);
    let header = rdr.headers().map_err(csv_err)?.clone();
    let col = |name: &str| header.iter().position(|h| h == name);
    let path_col = col("path").ok_or_else(|| CliError::Csv("missing column path".into()))?;
    let mass_col = col("mass").ok_or_else(|| CliError::Csv("missing column mass".into()))?;
    let t_col = col("t");
    let mut out: BTreeMap<Option<usize>, Vec<PathFlow>> = BTreeMap::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let line = i + 2;
        let path = parse_path(g, record.get(path_col).unwrap_or(""))
            .map_err(|e| CliError::Csv(format!("row {line}: {e}")))?;
        let mass: Mass = record
            .get(mass_col)
            .unwrap_or("")
            .parse()
            .map_err(|_| CliError::Csv(format!("row {line}: bad mass {:?}", record.get(mass_col).unwrap_or(""))))?;
        let t = match t_col.map(|c| record.get(c).unwrap_or("")) {
            None | Some("") => None,
            Some(s) => Some(s.parse::<usize>().map_err(|_| CliError::Csv(format!("row {line}: bad time {s:?}")))?),
        };
        let flows = out.entry(t).or_default();
        if flows.iter().any(|f| f.actors == path) {
            return Err(CliError::Csv(format!("row {line}: path listed twice")));
        }
        flows.push(PathFlow::new(path, mass));
    }
    Ok(out)
}

pub fn write_masses(g: &FlowGraph, flows: &[PathFlow], t: Option<usize>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["path", "mass", "t"]).expect("in-memory write");
    for f in flows {
        w.write_record([path_text(g, &f.actors), f.mass.to_string(), t.map(|t| t.to_string()).unwrap_or_default()])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf8")
}
