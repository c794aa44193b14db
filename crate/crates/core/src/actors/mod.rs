//! Protocol state machines for the Local Certificate Authority, the road-side
//! unit and the vehicle.
//!
//! Each transition takes the actor state, one input and the current time and
//! returns the actions it wants performed. Nothing here touches the clock, the
//! network or other actors; the engine turns actions into scheduled events.

mod lca;
mod rsu;
mod vehicle;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::revocation::{CertificateId, ClusterId, ProtocolMessage, RsuId};
use crate::time::SimTime;

pub use lca::LcaState;
pub use rsu::RsuState;
pub use vehicle::{SendError, VehicleState};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ActorId {
    Lca(ClusterId),
    Rsu(RsuId),
    Vehicle(CertificateId),
}

impl fmt::Display for ActorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActorId::Lca(c) => write!(f, "LCA{c}"),
            ActorId::Rsu(r) => write!(f, "{r}"),
            ActorId::Vehicle(v) => write!(f, "{v}"),
        }
    }
}

impl Serialize for ActorId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ActorId::Lca(c) => s.serialize_str(&format!("lca:{c}")),
            ActorId::Rsu(r) => s.serialize_str(&format!("rsu:{r}")),
            ActorId::Vehicle(v) => s.serialize_str(&format!("vehicle:{v}")),
        }
    }
}

impl FromStr for ActorId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, rest) = s.split_once(':').ok_or_else(|| format!("bad actor id {s:?}"))?;
        match kind {
            "lca" => rest
                .parse::<u32>()
                .map(|n| ActorId::Lca(ClusterId(n)))
                .map_err(|e| e.to_string()),
            "rsu" => Ok(ActorId::Rsu(RsuId::new(rest))),
            "vehicle" => CertificateId::new(rest)
                .map(ActorId::Vehicle)
                .map_err(|e| e.to_string()),
            _ => Err(format!("bad actor id {s:?}")),
        }
    }
}

impl<'de> Deserialize<'de> for ActorId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "scope", content = "cluster")]
pub enum BroadcastScope {
    /// Local RSUs plus provisioned vehicles inside the cluster's coverage.
    ClusterMembers(ClusterId),
    /// RSUs of other clusters that face this one.
    NeighborRsus(ClusterId),
    LocalRsus(ClusterId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimerKind {
    PeriodicBroadcast,
    /// Applies the Adds batched at one instant.
    FlushAdds,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MetricKind {
    AdversaryReported,
    ForeignReporter,
    DuplicateAdd,
    CrossClusterBroadcastDropped,
    StaleBroadcastDropped,
    StaleTimer,
    NeighborSnapshotRejected,
    LookupCost,
    BaselineLookupCost,
    C2cUnsent,
    MessageLost,
    ZeroListWindow,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricEvent {
    pub kind: MetricKind,
    pub value: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<CertificateId>,
}

impl MetricEvent {
    pub fn count(kind: MetricKind) -> Self {
        MetricEvent {
            kind,
            value: 1,
            subject: None,
        }
    }

    pub fn about(kind: MetricKind, value: u64, subject: CertificateId) -> Self {
        MetricEvent {
            kind,
            value,
            subject: Some(subject),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RejectReason {
    DecryptionFailure,
    BadClusterSignature,
    RevokedSender,
    MalformedHello,
    ForeignReporter,
    GreyAreaDenied,
}

impl RejectReason {
    /// The three outcomes of the car-to-car receive path.
    pub fn is_c2c(self) -> bool {
        matches!(
            self,
            RejectReason::DecryptionFailure
                | RejectReason::BadClusterSignature
                | RejectReason::RevokedSender
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action")]
pub enum Action {
    Send { to: ActorId, msg: ProtocolMessage },
    Broadcast { scope: BroadcastScope, msg: ProtocolMessage },
    SetTimer { at: SimTime, timer: TimerKind },
    Metric(MetricEvent),
    AcceptMessage { payload: String },
    RejectMessage { reason: RejectReason },
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn actor_ids_round_trip_as_strings() {
        for id in [
            ActorId::Lca(ClusterId(6)),
            ActorId::Rsu(RsuId::new("RSU4")),
            ActorId::Vehicle(CertificateId::new("V25").unwrap()),
        ] {
            let s = serde_json::to_string(&id).unwrap();
            let back: ActorId = serde_json::from_str(&s).unwrap();
            assert_eq!(back, id);
        }
        assert_eq!(ActorId::Lca(ClusterId(1)).to_string(), "LCA1");
    }
}
