//! Newline-delimited trace records. One header line, then one line per
//! applied event with fields in a fixed order.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::actors::{ActorId, BroadcastScope, MetricKind, RejectReason, TimerKind};
use crate::revocation::{CertificateId, ClusterId, MessageKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialCluster {
    pub entries: Vec<CertificateId>,
    pub epoch: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub record: String,
    pub scenario: String,
    pub seed: u64,
    pub config: Value,
    pub initial: BTreeMap<ClusterId, InitialCluster>,
    pub crl_len: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Delivery {
    pub to: ActorId,
    /// Delivery time; absent when the copy was lost.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum ActionRecord {
    Send {
        msg: MessageKind,
        bytes: u64,
        delivery: Delivery,
    },
    Broadcast {
        #[serde(flatten)]
        scope: BroadcastScope,
        msg: MessageKind,
        bytes: u64,
        deliveries: Vec<Delivery>,
    },
    Timer {
        timer: TimerKind,
        at: u64,
    },
    Metric {
        kind: MetricKind,
        value: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        subject: Option<CertificateId>,
    },
    Accept {
        payload: String,
    },
    Reject {
        reason: RejectReason,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "of", rename_all = "snake_case")]
pub enum StateSummary {
    Lca {
        entries: Vec<CertificateId>,
        pending: Vec<CertificateId>,
        version: u64,
        epoch: u64,
        next_broadcast_us: u64,
    },
    Rsu {
        local_version: u64,
        epoch: u64,
        nccl_versions: BTreeMap<ClusterId, u64>,
    },
    Vehicle {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cluster: Option<ClusterId>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        epoch: Option<u64>,
        lccl_len: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lccl_front: Option<CertificateId>,
        grey: bool,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Details {
    pub seq: u64,
    pub class: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<ActorId>,
    pub input: Value,
    pub actions: Vec<ActionRecord>,
    pub state: StateSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crl_len: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra: Option<Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub time_us: u64,
    pub actor: ActorId,
    pub kind: String,
    pub details: Details,
    pub rng_cursor: u64,
}

/// Parses a trace into its header and records.
pub fn parse_trace(text: &str) -> Result<(TraceHeader, Vec<TraceRecord>), String> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or("empty trace")?;
    let header: TraceHeader =
        serde_json::from_str(first).map_err(|e| format!("line 1: bad header: {e}"))?;
    if header.record != "header" {
        return Err("line 1: first record is not a header".into());
    }
    let records = lines
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| format!("line {}: {e}", i + 1)))
        .collect::<Result<Vec<TraceRecord>, String>>()?;
    Ok((header, records))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_fields_keep_their_order() {
        let rec = TraceRecord {
            time_us: 7,
            actor: ActorId::Lca(ClusterId(1)),
            kind: "timer:FlushAdds".into(),
            details: Details {
                seq: 3,
                class: 3,
                from: None,
                input: Value::Null,
                actions: vec![ActionRecord::Broadcast {
                    scope: BroadcastScope::ClusterMembers(ClusterId(1)),
                    msg: MessageKind::LcclBroadcast,
                    bytes: 1048,
                    deliveries: vec![Delivery {
                        to: ActorId::Rsu(crate::revocation::RsuId::new("RSU4")),
                        at: Some(17),
                    }],
                }],
                state: StateSummary::Lca {
                    entries: vec![],
                    pending: vec![],
                    version: 1,
                    epoch: 0,
                    next_broadcast_us: 60_000_007,
                },
                crl_len: None,
                extra: None,
            },
            rng_cursor: 0,
        };
        let line = serde_json::to_string(&rec).unwrap();
        let order: Vec<usize> = ["\"time_us\"", "\"actor\"", "\"kind\"", "\"details\"", "\"rng_cursor\""]
            .iter()
            .map(|k| line.find(k).unwrap())
            .collect();
        assert!(order.windows(2).all(|w| w[0] < w[1]), "{line}");
        let back: TraceRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(back, rec);
    }
}
