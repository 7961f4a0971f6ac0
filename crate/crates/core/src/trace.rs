//! CSV trace files.
//!
//! Layout: `#`-prefixed header lines (format, scenario hash, seed, tool
//! version, run status), one column-name line, then one row per record.
//! Floats are written in their shortest round-trip form so a re-import is
//! bit-identical.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::mission::{RunStatus, SimulationTrace, TraceRecord};
use crate::power::PowerVector;
use crate::radio::Position;

pub const FORMAT: &str = "uavnet-trace 1";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// A trace with the provenance written to its header.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub scenario_hash: String,
    pub seed: u64,
    pub tool_version: String,
    pub trace: SimulationTrace,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io { path: path.display().to_string(), message: e.to_string() }
}

fn status_text(s: &RunStatus) -> String {
    match s {
        RunStatus::Converged => "converged".into(),
        RunStatus::IterationCap => "iteration_cap".into(),
        RunStatus::Failed { infeasible: true, message } => format!("infeasible: {message}"),
        RunStatus::Failed { infeasible: false, message } => format!("error: {message}"),
    }
}

fn parse_status(s: &str) -> Result<RunStatus> {
    Ok(match s {
        "converged" => RunStatus::Converged,
        "iteration_cap" => RunStatus::IterationCap,
        _ => {
            if let Some(m) = s.strip_prefix("infeasible: ") {
                RunStatus::Failed { infeasible: true, message: m.to_string() }
            } else if let Some(m) = s.strip_prefix("error: ") {
                RunStatus::Failed { infeasible: false, message: m.to_string() }
            } else {
                return Err(Error::Trace(format!("unknown status `{s}`")));
            }
        }
    })
}

fn columns(n_nodes: usize, n_interferers: usize) -> Vec<String> {
    let mut cols: Vec<String> = ["t", "flow_bps", "lambda2", "eta_bps"].map(String::from).to_vec();
    for (prefix, count) in [("node", n_nodes), ("intf", n_interferers)] {
        for k in 0..count {
            for f in ["x", "y", "z", "p_w"] {
                cols.push(format!("{prefix}{k}_{f}"));
            }
        }
    }
    cols.extend(["cap_slack_w", "qos_slack_bps", "cut_set", "cut_edges"].map(String::from));
    cols
}

fn row(r: &TraceRecord) -> Vec<String> {
    let mut out = vec![r.t.to_string(), r.flow_bps.to_string(), r.lambda2.to_string(), r.eta_bps.to_string()];
    for (pos, p) in r.nodes.iter().zip(&r.power.p).chain(r.interferers.iter().zip(&r.power.pj)) {
        out.extend([pos.x, pos.y, pos.z, *p].map(|v| v.to_string()));
    }
    out.push(r.cap_slack_w.to_string());
    out.push(r.qos_slack_bps.to_string());
    out.push(r.cut_set.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" "));
    out.push(r.cut_edges.iter().map(|(i, j)| format!("{i}-{j}")).collect::<Vec<_>>().join(" "));
    out
}

/// Writes the trace to any sink.
pub fn write_trace<W: Write>(file: &TraceFile, mut w: W) -> std::io::Result<()> {
    let (n, m) = file
        .trace
        .records
        .first()
        .map(|r| (r.nodes.len(), r.interferers.len()))
        .unwrap_or((0, 0));
    writeln!(w, "# format: {FORMAT}")?;
    writeln!(w, "# scenario_sha256: {}", file.scenario_hash)?;
    writeln!(w, "# seed: {}", file.seed)?;
    writeln!(w, "# tool_version: {}", file.tool_version)?;
    writeln!(w, "# nodes: {n}")?;
    writeln!(w, "# interferers: {m}")?;
    writeln!(w, "# status: {}", status_text(&file.trace.status))?;
    let mut csv = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    csv.write_record(columns(n, m))?;
    for r in &file.trace.records {
        csv.write_record(row(r))?;
    }
    csv.flush()
}

pub fn export_trace(file: &TraceFile, path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = std::io::BufWriter::new(f);
    write_trace(file, &mut w).map_err(|e| io_err(path, e))?;
    w.flush().map_err(|e| io_err(path, e))
}

pub fn trace_to_string(file: &TraceFile) -> String {
    let mut buf = Vec::new();
    write_trace(file, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("trace is UTF-8")
}

fn num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Trace(format!("cannot parse {what} from `{s}`")))
}

/// Reads a trace written by [`write_trace`].
pub fn read_trace<R: BufRead>(mut r: R) -> Result<TraceFile> {
    let mut header = std::collections::HashMap::new();
    let mut line = String::new();
    let mut rest = String::new();
    loop {
        line.clear();
        if r.read_line(&mut line).map_err(|e| Error::Trace(e.to_string()))? == 0 {
            break;
        }
        match line.strip_prefix("# ") {
            Some(h) => {
                let (k, v) = h
                    .trim_end_matches('\n')
                    .split_once(": ")
                    .ok_or_else(|| Error::Trace(format!("bad header line `{}`", line.trim_end())))?;
                header.insert(k.to_string(), v.to_string());
            }
            None => {
                rest.push_str(&line);
                r.read_to_string(&mut rest).map_err(|e| Error::Trace(e.to_string()))?;
                break;
            }
        }
    }
    let get = |k: &str| header.get(k).cloned().ok_or_else(|| Error::Trace(format!("missing header `{k}`")));
    if get("format")? != FORMAT {
        return Err(Error::Trace(format!("unsupported format `{}`", get("format")?)));
    }
    let n: usize = num(&get("nodes")?, "node count")?;
    let m: usize = num(&get("interferers")?, "interferer count")?;

    let mut csv = csv::ReaderBuilder::new().from_reader(rest.as_bytes());
    let expected = columns(n, m);
    let names: Vec<String> = csv
        .headers()
        .map_err(|e| Error::Trace(e.to_string()))?
        .iter()
        .map(String::from)
        .collect();
    if names != expected {
        return Err(Error::Trace("column header does not match node/interferer counts".into()));
    }
    let mut records = Vec::new();
    for rec in csv.records() {
        let rec = rec.map_err(|e| Error::Trace(e.to_string()))?;
        let f = |k: usize| -> Result<f64> { num(&rec[k], "number") };
        let mut nodes = Vec::with_capacity(n);
        let mut interferers = Vec::with_capacity(m);
        let mut power = PowerVector { p: Vec::with_capacity(n), pj: Vec::with_capacity(m) };
        let mut col = 4;
        for k in 0..(n + m) {
            let pos = Position::new(f(col)?, f(col + 1)?, f(col + 2)?);
            let p = f(col + 3)?;
            if k < n {
                nodes.push(pos);
                power.p.push(p);
            } else {
                interferers.push(pos);
                power.pj.push(p);
            }
            col += 4;
        }
        let cut_set = rec[col + 2]
            .split_whitespace()
            .map(|s| num(s, "cut node"))
            .collect::<Result<Vec<usize>>>()?;
        let cut_edges = rec[col + 3]
            .split_whitespace()
            .map(|s| {
                let (a, b) = s.split_once('-').ok_or_else(|| Error::Trace(format!("bad cut edge `{s}`")))?;
                Ok((num(a, "cut edge")?, num(b, "cut edge")?))
            })
            .collect::<Result<Vec<(usize, usize)>>>()?;
        records.push(TraceRecord {
            t: num(&rec[0], "t")?,
            flow_bps: f(1)?,
            lambda2: f(2)?,
            eta_bps: f(3)?,
            nodes,
            interferers,
            power,
            cap_slack_w: f(col)?,
            qos_slack_bps: f(col + 1)?,
            cut_set,
            cut_edges,
        });
    }
    Ok(TraceFile {
        scenario_hash: get("scenario_sha256")?,
        seed: num(&get("seed")?, "seed")?,
        tool_version: get("tool_version")?,
        trace: SimulationTrace { records, status: parse_status(&get("status")?)? },
    })
}

pub fn import_trace(path: &Path) -> Result<TraceFile> {
    let f = File::open(path).map_err(|e| io_err(path, e))?;
    read_trace(BufReader::new(f))
}
