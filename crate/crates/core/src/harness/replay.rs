//! Rebuilds every report counter from a trace file alone.
//!
//! This deliberately shares no bookkeeping with the engine: it reads the
//! header and records and recounts.

use std::collections::BTreeMap;

use serde_json::Value;

use super::report::{ClusterReport, Detection, RunReport, SizePoint};
use crate::actors::{ActorId, BroadcastScope, MetricKind};
use crate::baseline::DistributionModel;
use crate::engine::trace::{parse_trace, ActionRecord, StateSummary, TraceRecord};
use crate::revocation::{ClusterId, MessageKind, ProtocolMessage};

struct Params {
    entry: u64,
    header: u64,
    crl_header: u64,
    crl_background: u64,
    model: DistributionModel,
}

impl Params {
    fn from_config(config: &Value, crl_initial: u64) -> Self {
        let num = |v: &Value, default: u64| v.as_u64().unwrap_or(default);
        let baseline = &config["baseline"];
        let model = DistributionModel {
            bandwidth_bytes_per_s: baseline["bandwidth_bytes_per_s"]
                .as_f64()
                .unwrap_or(DistributionModel::default().bandwidth_bytes_per_s),
            overhead_s: baseline["overhead_s"].as_f64().unwrap_or(0.0),
        };
        let initially_revoked: u64 = config["revoked"]
            .as_array()
            .map(|lists| lists.iter().map(|l| l["certs"].as_array().map_or(0, |c| c.len() as u64)).sum())
            .unwrap_or(0);
        Params {
            entry: num(&config["entry_size_bytes"], 100),
            header: num(&config["header_bytes"], 16),
            crl_header: num(&baseline["crl_header_bytes"], 0),
            crl_background: baseline["crl_total_entries"]
                .as_u64()
                .map_or(0, |t| t.saturating_sub(initially_revoked))
                .min(crl_initial),
            model,
        }
    }

    fn list_bytes(&self, n: u64) -> u64 {
        n * self.entry + self.header
    }
}

fn bump<K: Ord>(map: &mut BTreeMap<K, u64>, key: K, by: u64) {
    *map.entry(key).or_insert(0) += by;
}

pub fn replay(text: &str) -> Result<RunReport, String> {
    let (header, records) = parse_trace(text)?;
    let p = Params::from_config(&header.config, header.crl_len);

    let mut r = RunReport {
        scenario: header.scenario.clone(),
        seed: header.seed,
        ..RunReport::default()
    };
    for (c, init) in &header.initial {
        let n = init.entries.len() as u64;
        r.clusters.insert(
            *c,
            ClusterReport {
                series: vec![SizePoint { t_us: 0, entries: n, bytes: p.list_bytes(n) }],
                final_entries: init.entries.clone(),
                final_epoch: init.epoch,
                max_bytes: 0,
            },
        );
    }
    let mut crl_len = header.crl_len;

    for rec in &records {
        recount(&mut r, rec, &p)?;
        if let Some(n) = rec.details.crl_len {
            crl_len = n;
        }
    }
    r.events_applied = records.len() as u64;
    r.last_event_us = records.last().map_or(0, |rec| rec.time_us);

    let mut lccl_max = 0;
    for cr in r.clusters.values_mut() {
        cr.max_bytes = cr.series.iter().map(|s| s.bytes).max().unwrap_or(0);
        lccl_max = lccl_max.max(cr.max_bytes);
    }
    let b = &mut r.baseline;
    b.crl_entries = crl_len;
    b.crl_run_entries = crl_len - p.crl_background;
    b.crl_bytes = crl_len * p.entry + p.crl_header;
    b.crl_distribution_s = p.model.time_for_bytes(b.crl_bytes);
    b.lccl_max_bytes = lccl_max;
    b.lccl_distribution_s = p.model.time_for_bytes(lccl_max);
    b.byte_ratio = if lccl_max == 0 { 0.0 } else { b.crl_bytes as f64 / lccl_max as f64 };
    Ok(r)
}

fn recount(r: &mut RunReport, rec: &TraceRecord, p: &Params) -> Result<(), String> {
    let d = &rec.details;
    if rec.kind.starts_with("deliver:") {
        r.deliveries += 1;
    }
    if rec.kind == "script:c2c" {
        r.c2c.scripted += 1;
    }

    // the cluster an RSU reports into is where its Add goes
    let add_target = d.actions.iter().find_map(|a| match a {
        ActionRecord::Send { msg: MessageKind::AddRequest, delivery, .. } => match &delivery.to {
            ActorId::Lca(c) => Some(*c),
            _ => None,
        },
        _ => None,
    });

    for a in &d.actions {
        match a {
            ActionRecord::Send { msg, bytes, delivery } => {
                let t = r.messages.entry(*msg).or_default();
                t.sent += 1;
                t.bytes += bytes;
                t.lost += u64::from(delivery.at.is_none());
            }
            ActionRecord::Broadcast { scope, msg, bytes, deliveries } => {
                for dl in deliveries {
                    let t = r.messages.entry(*msg).or_default();
                    t.sent += 1;
                    t.bytes += bytes;
                    t.lost += u64::from(dl.at.is_none());
                }
                if let (BroadcastScope::ClusterMembers(c), MessageKind::LcclBroadcast) = (scope, msg) {
                    let listed = match &d.state {
                        StateSummary::Lca { entries, .. } => entries.clone(),
                        _ => return Err(format!("member broadcast at {} from a non-LCA", rec.time_us)),
                    };
                    let last = deliveries.iter().filter_map(|x| x.at).max().unwrap_or(rec.time_us);
                    for det in r.detections.iter_mut().filter(|det| det.cluster == *c && det.broadcast_us.is_none()) {
                        if listed.contains(&det.vehicle) {
                            det.broadcast_us = Some(last);
                            det.latency_us = Some(last - det.hello_us);
                        }
                    }
                }
            }
            ActionRecord::Timer { .. } => {}
            ActionRecord::Metric { kind, value, subject } => {
                bump(&mut r.metrics, *kind, 1);
                match kind {
                    MetricKind::LookupCost => bump(&mut r.lookup_costs, *value, 1),
                    MetricKind::BaselineLookupCost => bump(&mut r.baseline.lookup_costs, *value, 1),
                    MetricKind::C2cUnsent => r.c2c.unsent += value,
                    MetricKind::AdversaryReported => {
                        let (ActorId::Rsu(rsu), Some(vehicle), Some(cluster)) = (&rec.actor, subject, add_target) else {
                            return Err(format!("adversary report at {} without an Add", rec.time_us));
                        };
                        r.detections.push(Detection {
                            vehicle: vehicle.clone(),
                            rsu: rsu.clone(),
                            cluster,
                            origin: ClusterId(*value as u32),
                            hello_us: rec.time_us,
                            broadcast_us: None,
                            latency_us: None,
                        });
                    }
                    _ => {}
                }
            }
            ActionRecord::Accept { .. } => r.c2c.accepted += 1,
            ActionRecord::Reject { reason } => {
                if reason.is_c2c() {
                    bump(&mut r.c2c.rejected, *reason, 1);
                } else {
                    bump(&mut r.other_rejects, *reason, 1);
                }
            }
        }
    }

    if let (ActorId::Lca(c), StateSummary::Lca { entries, epoch, .. }) = (&rec.actor, &d.state) {
        let cr = r.clusters.get_mut(c).ok_or_else(|| format!("record for unknown cluster {c}"))?;
        let n = entries.len() as u64;
        if cr.series.last().map(|s| s.entries) != Some(n) {
            cr.series.push(SizePoint { t_us: rec.time_us, entries: n, bytes: p.list_bytes(n) });
        }
        cr.final_entries = entries.clone();
        cr.final_epoch = *epoch;
    }
    Ok(())
}

/// Input message of a delivery record, if it parses.
pub fn delivered_message(rec: &TraceRecord) -> Option<ProtocolMessage> {
    if !rec.kind.starts_with("deliver:") {
        return None;
    }
    serde_json::from_value(rec.details.input.clone()).ok()
}

/// Field-by-field differences between two reports, as dotted paths.
pub fn diff_reports(a: &RunReport, b: &RunReport) -> Vec<String> {
    let fa: BTreeMap<String, String> =
        super::report::flatten(&serde_json::to_value(a).expect("serializes")).into_iter().collect();
    let fb: BTreeMap<String, String> =
        super::report::flatten(&serde_json::to_value(b).expect("serializes")).into_iter().collect();
    let mut out = Vec::new();
    for (k, v) in &fa {
        match fb.get(k) {
            Some(w) if w == v => {}
            Some(w) => out.push(format!("{k}: {v} != {w}")),
            None => out.push(format!("{k}: {v} != (missing)")),
        }
    }
    for k in fb.keys().filter(|k| !fa.contains_key(*k)) {
        out.push(format!("{k}: (missing) != {}", fb[k]));
    }
    out
}
