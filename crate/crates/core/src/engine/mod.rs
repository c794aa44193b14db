//! Discrete-event engine: a totally ordered queue, a seeded channel and the
//! world that routes actor actions into new events and trace records.

mod channel;
mod queue;
mod sim;
pub mod trace;

use thiserror::Error;

use crate::actors::ActorId;
use crate::time::SimTime;
use crate::topology::TopologyError;

pub use channel::{link_for, Channel, ChannelModel, LinkClass, LinkParams, Outcome};
pub use queue::{Event, EventQueue, Payload, CLASS_ADD, CLASS_OTHER, CLASS_REMOVE, CLASS_TIMER};
pub use sim::{SimConfig, Simulation};

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("event scheduled at {at} but the clock is already at {now}")]
    ScheduledInPast { at: SimTime, now: SimTime },
    #[error("no actor {0}")]
    UnknownActor(ActorId),
    #[error("{actor} cannot handle {kind}")]
    UnexpectedMessage { actor: ActorId, kind: String },
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;
    use std::time::Duration;

    use super::trace::{parse_trace, ActionRecord};
    use super::*;
    use crate::actors::TimerKind;
    use crate::baseline::DistributionModel;
    use crate::revocation::{CertificateId, ClusterId, MessageSizes, ProtocolMessage, RsuId};
    use crate::topology::{build_grid, GridSpec, VehicleItinerary, Waypoint};

    fn cfg() -> SimConfig {
        SimConfig {
            scenario: "unit".into(),
            seed: 1,
            broadcast_period: Duration::from_secs(60),
            channel: ChannelModel::default(),
            sizes: MessageSizes::default(),
            crl_background: 0,
            crl_header_bytes: 0,
            distribution: DistributionModel::default(),
            config_echo: serde_json::Value::Null,
        }
    }

    fn c(n: &str) -> CertificateId {
        CertificateId::new(n).unwrap()
    }

    #[test]
    fn single_lca_fires_floor_of_t_end_over_period() {
        let grid = build_grid(&GridSpec::uniform(1, 1, 2000.0, 1)).unwrap();
        let mut sim = Simulation::new(grid, &BTreeMap::new(), vec![], cfg()).unwrap();
        sim.run_until(SimTime::from_secs(185)).unwrap();
        let (report, trace) = sim.finish();
        let fires = trace.iter().filter(|l| l.contains("\"timer:PeriodicBroadcast\"")).count();
        assert_eq!(fires, 3);
        assert_eq!(report.events_applied, 3);
        assert_eq!(report.total_sent(), 0);
    }

    #[test]
    fn empty_world_has_empty_trace() {
        let grid = build_grid(&GridSpec::uniform(1, 1, 2000.0, 1)).unwrap();
        let mut sim = Simulation::new(grid, &BTreeMap::new(), vec![], cfg()).unwrap();
        sim.run_until(SimTime::from_secs(10)).unwrap();
        let (_, trace) = sim.finish();
        assert_eq!(trace.len(), 1, "header only");
    }

    #[test]
    fn injected_remove_and_add_apply_add_first() {
        let grid = build_grid(&GridSpec::uniform(1, 2, 2000.0, 1)).unwrap();
        let initial = BTreeMap::from([(ClusterId(1), vec![c("V9")])]);
        let roster = vec![VehicleItinerary {
            vehicle: c("V9"),
            waypoints: vec![Waypoint::new(0.0, 500.0, 1000.0)],
            script: vec![],
        }];
        let mut sim = Simulation::new(grid, &initial, roster, cfg()).unwrap();
        let guard = sim.grid().guard_rsu(ClusterId(2), ClusterId(1), crate::topology::Point::new(2000.0, 1000.0)).unwrap().id.clone();
        let t = SimTime::from_secs(5);
        // Remove scheduled first, so it has the lower sequence number
        sim.inject(
            t,
            ActorId::Lca(ClusterId(1)),
            Payload::Deliver {
                from: ActorId::Rsu(guard.clone()),
                msg: ProtocolMessage::RemoveRequest { cert_id: c("V9"), reporter: guard.clone() },
            },
        )
        .unwrap();
        sim.inject(
            t,
            ActorId::Lca(ClusterId(2)),
            Payload::Deliver {
                from: ActorId::Rsu(guard.clone()),
                msg: ProtocolMessage::AddRequest { cert_id: c("V9"), reporter: guard },
            },
        )
        .unwrap();
        sim.run_until(SimTime::from_secs(6)).unwrap();
        let (report, trace) = sim.finish();
        let (_, records) = parse_trace(&trace.join("\n")).unwrap();
        let kinds: Vec<&str> = records.iter().filter(|r| r.time_us == 5_000_000).map(|r| r.kind.as_str()).collect();
        assert_eq!(&kinds[..2], &["deliver:AddRequest", "deliver:RemoveRequest"]);
        assert!(!report.metrics.contains_key(&crate::actors::MetricKind::ZeroListWindow));
        assert_eq!(report.clusters[&ClusterId(2)].final_entries, vec![c("V9")]);
        assert!(report.clusters[&ClusterId(1)].final_entries.is_empty());
        assert_eq!(report.clusters[&ClusterId(1)].final_epoch, 1);
    }

    #[test]
    fn unknown_target_is_fatal() {
        let grid = build_grid(&GridSpec::uniform(1, 1, 2000.0, 1)).unwrap();
        let mut sim = Simulation::new(grid, &BTreeMap::new(), vec![], cfg()).unwrap();
        sim.inject(SimTime::from_secs(1), ActorId::Rsu(RsuId::new("nope")), Payload::Timer(TimerKind::FlushAdds))
            .unwrap();
        assert!(matches!(sim.run_until(SimTime::from_secs(2)), Err(EngineError::UnknownActor(_))));
    }

    #[test]
    fn total_loss_is_accounted() {
        let grid = build_grid(&GridSpec::uniform(1, 2, 2000.0, 1)).unwrap();
        let mut conf = cfg();
        conf.channel.broadcast.loss = 1.0;
        let roster = (0..3)
            .map(|i| VehicleItinerary {
                vehicle: c(&format!("V{i}")),
                waypoints: vec![Waypoint::new(0.0, 1000.0, 1000.0)],
                script: vec![],
            })
            .collect();
        let mut sim = Simulation::new(grid, &BTreeMap::new(), roster, conf).unwrap();
        sim.run_until(SimTime::from_secs(61)).unwrap();
        let (report, trace) = sim.finish();
        assert!(report.conserves_messages());
        let (_, records) = parse_trace(&trace.join("\n")).unwrap();
        let periodic = records.iter().find(|r| r.kind == "timer:PeriodicBroadcast" && r.actor == ActorId::Lca(ClusterId(1))).unwrap();
        let lost_metrics = periodic
            .details
            .actions
            .iter()
            .filter(|a| matches!(a, ActionRecord::Metric { kind: crate::actors::MetricKind::MessageLost, .. }))
            .count();
        // 1 local RSU + 3 vehicles, and 1 facing RSU
        assert_eq!(lost_metrics, 5);
    }
}
