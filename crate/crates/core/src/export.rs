//! Flat CSV exports of traces and metric series.
//!
//! * trace: `t,agent_id,role,behavior,x,u,in_c,accepted_value`, one row per
//!   agent per snapshot; `accepted_value` is empty when nothing is latched.
//! * messages: `t,sender,receiver,value`.
//! * metrics: `t,e,tau,V`; `tau` and `V` are filled on update instants only.
//!
//! Agent ids are 0-based. Floats use the shortest representation that
//! round-trips, so files are byte-stable for a given trace.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::engine::Trace;
use crate::error::{Error, Result};
use crate::metrics::MetricSeries;

pub const TRACE_HEADER: [&str; 8] = [
    "t",
    "agent_id",
    "role",
    "behavior",
    "x",
    "u",
    "in_c",
    "accepted_value",
];
pub const MESSAGES_HEADER: [&str; 4] = ["t", "sender", "receiver", "value"];
pub const METRICS_HEADER: [&str; 4] = ["t", "e", "tau", "V"];

pub fn write_trace<W: Write>(tr: &Trace, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TRACE_HEADER)?;
    let sc = &tr.scenario;
    let labels: Vec<(&str, &str)> = sc
        .graph
        .agents()
        .map(|a| (sc.role(a).as_str(), sc.behavior(a).tag()))
        .collect();
    for s in &tr.snapshots {
        for (i, (role, behavior)) in labels.iter().enumerate() {
            out.write_record([
                s.t.to_string(),
                i.to_string(),
                role.to_string(),
                behavior.to_string(),
                s.x[i].to_string(),
                s.u[i].to_string(),
                s.in_c[i].to_string(),
                s.accepted[i].map(|v| v.to_string()).unwrap_or_default(),
            ])?;
        }
    }
    out.flush().map_err(|e| Error::io("trace", e))?;
    Ok(())
}

pub fn write_messages<W: Write>(tr: &Trace, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(MESSAGES_HEADER)?;
    for m in tr.rounds.iter().flat_map(|r| &r.messages) {
        out.write_record([
            m.t.to_string(),
            m.sender.to_string(),
            m.receiver.to_string(),
            m.value.to_string(),
        ])?;
    }
    out.flush().map_err(|e| Error::io("messages", e))?;
    Ok(())
}

pub fn write_metrics<W: Write>(tr: &Trace, metrics: &MetricSeries, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(METRICS_HEADER)?;
    let eta = tr.scenario.params.eta as usize;
    for (k, (t, e)) in metrics.t.iter().zip(&metrics.e).enumerate() {
        let (tau, v) = if k % eta == 0 {
            metrics
                .v
                .get(k / eta)
                .map(|(tau, v)| (tau.to_string(), v.to_string()))
                .unwrap_or_default()
        } else {
            Default::default()
        };
        out.write_record([t.to_string(), e.to_string(), tau, v])?;
    }
    out.flush().map_err(|e| Error::io("metrics", e))?;
    Ok(())
}

#[derive(Clone, Debug)]
pub struct OutputPaths {
    pub trace: PathBuf,
    pub messages: PathBuf,
    pub metrics: PathBuf,
}

/// Writes `trace.csv`, `messages.csv` and `metrics.csv` under `dir`.
pub fn write_all(tr: &Trace, metrics: &MetricSeries, dir: &Path) -> Result<OutputPaths> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = OutputPaths {
        trace: dir.join("trace.csv"),
        messages: dir.join("messages.csv"),
        metrics: dir.join("metrics.csv"),
    };
    let create = |p: &Path| {
        fs::File::create(p)
            .map(std::io::BufWriter::new)
            .map_err(|e| Error::io(p, e))
    };
    write_trace(tr, create(&paths.trace)?)?;
    write_messages(tr, create(&paths.messages)?)?;
    write_metrics(tr, metrics, create(&paths.metrics)?)?;
    Ok(paths)
}
