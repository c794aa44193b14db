//! Run report, its file encodings and the human comparison table.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::actors::{MetricKind, RejectReason};
use crate::revocation::{CertificateId, ClusterId, MessageKind, RsuId};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizePoint {
    pub t_us: u64,
    pub entries: u64,
    pub bytes: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterReport {
    /// One point at start and one per change in list length.
    pub series: Vec<SizePoint>,
    pub final_entries: Vec<CertificateId>,
    pub final_epoch: u64,
    pub max_bytes: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageTally {
    /// Copies put on the air, one per recipient.
    pub sent: u64,
    pub lost: u64,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Detection {
    pub vehicle: CertificateId,
    pub rsu: RsuId,
    pub cluster: ClusterId,
    pub origin: ClusterId,
    pub hello_us: u64,
    /// Last delivery of the first member broadcast that lists the vehicle.
    pub broadcast_us: Option<u64>,
    pub latency_us: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct C2cTally {
    pub scripted: u64,
    pub accepted: u64,
    pub rejected: BTreeMap<RejectReason, u64>,
    pub unsent: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub crl_entries: u64,
    pub crl_run_entries: u64,
    pub crl_bytes: u64,
    pub crl_distribution_s: f64,
    pub lccl_max_bytes: u64,
    pub lccl_distribution_s: f64,
    pub byte_ratio: f64,
    pub lookup_costs: BTreeMap<u64, u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub events_applied: u64,
    pub last_event_us: u64,
    pub clusters: BTreeMap<ClusterId, ClusterReport>,
    pub messages: BTreeMap<MessageKind, MessageTally>,
    pub deliveries: u64,
    pub detections: Vec<Detection>,
    pub c2c: C2cTally,
    pub other_rejects: BTreeMap<RejectReason, u64>,
    pub lookup_costs: BTreeMap<u64, u64>,
    pub metrics: BTreeMap<MetricKind, u64>,
    pub baseline: BaselineReport,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(format!("unknown format {other:?}, expected json or csv")),
        }
    }
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn total_sent(&self) -> u64 {
        self.messages.values().map(|m| m.sent).sum()
    }

    pub fn total_lost(&self) -> u64 {
        self.messages.values().map(|m| m.lost).sum()
    }

    /// Every copy put on the air was either delivered or lost.
    pub fn conserves_messages(&self) -> bool {
        self.total_sent() == self.deliveries + self.total_lost()
    }
}

/// Flattens a JSON value into `path,value` pairs with dotted paths.
pub fn flatten(value: &Value) -> Vec<(String, String)> {
    fn walk(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
        let join = |k: &str| {
            if prefix.is_empty() {
                k.to_owned()
            } else {
                format!("{prefix}.{k}")
            }
        };
        match v {
            Value::Object(map) => {
                for (k, v) in map {
                    walk(&join(k), v, out);
                }
            }
            Value::Array(items) => {
                for (i, v) in items.iter().enumerate() {
                    walk(&join(&i.to_string()), v, out);
                }
            }
            Value::String(s) => out.push((prefix.to_owned(), s.clone())),
            Value::Null => out.push((prefix.to_owned(), String::new())),
            other => out.push((prefix.to_owned(), other.to_string())),
        }
    }
    let mut out = Vec::new();
    walk("", value, &mut out);
    out
}

pub fn summary_csv(report: &RunReport) -> Result<String, csv::Error> {
    let value = serde_json::to_value(report).expect("report serializes");
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["key", "value"])?;
    for (k, v) in flatten(&value) {
        w.write_record([k, v])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("utf-8"))
}

fn series_csv(report: &RunReport) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["cluster", "t_us", "entries", "bytes"])?;
    for (c, cr) in &report.clusters {
        for p in &cr.series {
            w.write_record([c.to_string(), p.t_us.to_string(), p.entries.to_string(), p.bytes.to_string()])?;
        }
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("utf-8"))
}

fn messages_csv(report: &RunReport) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["kind", "sent", "lost", "bytes"])?;
    for (k, m) in &report.messages {
        w.write_record([k.name().to_owned(), m.sent.to_string(), m.lost.to_string(), m.bytes.to_string()])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("utf-8"))
}

fn detections_csv(report: &RunReport) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["vehicle", "rsu", "cluster", "origin", "hello_us", "broadcast_us", "latency_us"])?;
    let opt = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_default();
    for d in &report.detections {
        w.write_record([
            d.vehicle.to_string(),
            d.rsu.to_string(),
            d.cluster.to_string(),
            d.origin.to_string(),
            d.hello_us.to_string(),
            opt(d.broadcast_us),
            opt(d.latency_us),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("utf-8"))
}

#[derive(Debug, thiserror::Error)]
pub enum EmitError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv encoding failed: {0}")]
    Csv(#[from] csv::Error),
}

fn write(path: PathBuf, body: &str) -> Result<PathBuf, EmitError> {
    fs::write(&path, body).map_err(|source| EmitError::Io { path: path.clone(), source })?;
    Ok(path)
}

/// Writes `report.json`, or `summary.csv` plus one CSV per series.
pub fn emit_report(report: &RunReport, format: ReportFormat, dir: &Path) -> Result<Vec<PathBuf>, EmitError> {
    fs::create_dir_all(dir).map_err(|source| EmitError::Io { path: dir.to_owned(), source })?;
    match format {
        ReportFormat::Json => Ok(vec![write(dir.join("report.json"), &report.to_json())?]),
        ReportFormat::Csv => Ok(vec![
            write(dir.join("summary.csv"), &summary_csv(report)?)?,
            write(dir.join("lccl_series.csv"), &series_csv(report)?)?,
            write(dir.join("messages.csv"), &messages_csv(report)?)?,
            write(dir.join("detections.csv"), &detections_csv(report)?)?,
        ]),
    }
}

/// Fixed-width summary contrasting the cluster lists with the global CRL.
pub fn emit_comparison(report: &RunReport) -> String {
    let b = &report.baseline;
    let mut s = String::new();
    let _ = writeln!(s, "scenario {} (seed {})", report.scenario, report.seed);
    let _ = writeln!(s, "{:<28} {:>16} {:>16}", "", "cluster lists", "global CRL");
    let _ = writeln!(s, "{:<28} {:>16} {:>16}", "max list bytes", b.lccl_max_bytes, b.crl_bytes);
    let _ = writeln!(
        s,
        "{:<28} {:>16.3} {:>16.3}",
        "distribution time (s)", b.lccl_distribution_s, b.crl_distribution_s
    );
    let _ = writeln!(s, "{:<28} {:>16.1}", "byte ratio (CRL / list)", b.byte_ratio);
    let lookups: u64 = report.lookup_costs.values().sum();
    let mean = |h: &BTreeMap<u64, u64>| {
        let n: u64 = h.values().sum();
        if n == 0 {
            0.0
        } else {
            h.iter().map(|(c, k)| c * k).sum::<u64>() as f64 / n as f64
        }
    };
    let _ = writeln!(
        s,
        "{:<28} {:>16.2} {:>16.2}",
        format!("mean lookup cost ({lookups})"),
        mean(&report.lookup_costs),
        mean(&b.lookup_costs)
    );
    if report.detections.is_empty() {
        let _ = writeln!(s, "no adversary detections");
    } else {
        let _ = writeln!(s, "{:<10} {:>8} {:>8} {:>8} {:>14}", "vehicle", "rsu", "from", "to", "latency (ms)");
        for d in &report.detections {
            let latency = d
                .latency_us
                .map(|l| format!("{:.3}", l as f64 / 1000.0))
                .unwrap_or_else(|| "-".into());
            let _ = writeln!(
                s,
                "{:<10} {:>8} {:>8} {:>8} {:>14}",
                d.vehicle.to_string(),
                d.rsu.to_string(),
                d.origin.to_string(),
                d.cluster.to_string(),
                latency
            );
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunReport {
        let mut r = RunReport {
            scenario: "t".into(),
            seed: 3,
            ..RunReport::default()
        };
        r.clusters.insert(
            ClusterId(1),
            ClusterReport {
                series: vec![SizePoint { t_us: 0, entries: 7, bytes: 716 }],
                final_entries: vec![CertificateId::new("V8").unwrap()],
                final_epoch: 0,
                max_bytes: 1016,
            },
        );
        r.messages.insert(MessageKind::AddRequest, MessageTally { sent: 3, lost: 0, bytes: 192 });
        r.baseline.crl_distribution_s = 625.0;
        r.baseline.lccl_distribution_s = 0.254;
        r
    }

    #[test]
    fn csv_and_json_carry_the_same_numbers() {
        let report = sample();
        let json: Value = serde_json::from_str(&report.to_json()).unwrap();
        let from_json: BTreeMap<String, String> = flatten(&json).into_iter().collect();
        let csv_text = summary_csv(&report).unwrap();
        let mut rd = csv::Reader::from_reader(csv_text.as_bytes());
        let from_csv: BTreeMap<String, String> = rd
            .records()
            .map(|r| {
                let r = r.unwrap();
                (r[0].to_owned(), r[1].to_owned())
            })
            .collect();
        assert_eq!(from_json, from_csv);
        assert_eq!(from_csv["baseline.lccl_distribution_s"], "0.254");
        assert_eq!(from_csv["messages.AddRequest.bytes"], "192");
    }

    #[test]
    fn json_round_trips() {
        let report = sample();
        let back: RunReport = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn emit_writes_files() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(&sample(), ReportFormat::Csv, dir.path()).unwrap();
        assert_eq!(files.len(), 4);
        let json = emit_report(&sample(), ReportFormat::Json, dir.path()).unwrap();
        assert!(json[0].ends_with("report.json"));
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        assert!(emit_report(&sample(), ReportFormat::Json, &blocker.join("sub")).is_err());
    }

    #[test]
    fn comparison_mentions_both_systems() {
        let text = emit_comparison(&sample());
        assert!(text.contains("global CRL"));
        assert!(text.contains("625.000"));
    }
}
