use std::collections::BTreeSet;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Action, BroadcastScope, MetricEvent, MetricKind, RejectReason, TimerKind};
use crate::revocation::{CertificateId, ClusterId, ClusterSignature, Lccl, ProtocolMessage, RsuId};
use crate::time::SimTime;

/// Local Certificate Authority of one cluster.
///
/// Adds arriving at the same instant are collected in `pending_adds` and
/// prepended as a single block by the `FlushAdds` timer, which the engine
/// orders after every delivery of that instant. A Remove or periodic timer
/// settles the batch first, so a same-instant Add is always applied before a
/// Remove of the same certificate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LcaState {
    pub cluster: ClusterId,
    pub lccl: Lccl,
    pub group_sig: ClusterSignature,
    pub broadcast_period: Duration,
    pub next_broadcast_at: SimTime,
    pub local_rsus: BTreeSet<RsuId>,
    pub neighbor_rsus: BTreeSet<RsuId>,
    pub member_vehicles: BTreeSet<CertificateId>,
    pub news: Vec<String>,
    pending_adds: Vec<CertificateId>,
    flush_scheduled: bool,
    dirty: bool,
}

impl LcaState {
    pub fn new(
        lccl: Lccl,
        broadcast_period: Duration,
        local_rsus: BTreeSet<RsuId>,
        neighbor_rsus: BTreeSet<RsuId>,
    ) -> Self {
        let cluster = lccl.cluster();
        LcaState {
            cluster,
            lccl,
            group_sig: ClusterSignature::genesis(cluster),
            broadcast_period,
            next_broadcast_at: SimTime::ZERO + broadcast_period,
            local_rsus,
            neighbor_rsus,
            member_vehicles: BTreeSet::new(),
            news: Vec::new(),
            pending_adds: Vec::new(),
            flush_scheduled: false,
            dirty: false,
        }
    }

    /// Listed now or waiting in the current batch.
    pub fn lists(&self, cert: &CertificateId) -> bool {
        self.lccl.contains(cert) || self.pending_adds.contains(cert)
    }

    pub fn pending_adds(&self) -> &[CertificateId] {
        &self.pending_adds
    }

    pub fn enroll(&mut self, vehicle: CertificateId) {
        self.member_vehicles.insert(vehicle);
    }

    pub fn release(&mut self, vehicle: &CertificateId) {
        self.member_vehicles.remove(vehicle);
    }

    /// The timer the engine must arm when the authority is created.
    pub fn initial_timer(&self) -> Action {
        Action::SetTimer {
            at: self.next_broadcast_at,
            timer: TimerKind::PeriodicBroadcast,
        }
    }

    pub fn on_add(&mut self, cert: &CertificateId, reporter: &RsuId, now: SimTime) -> Vec<Action> {
        if !self.local_rsus.contains(reporter) {
            return vec![
                Action::Metric(MetricEvent::about(MetricKind::ForeignReporter, 1, cert.clone())),
                Action::RejectMessage {
                    reason: RejectReason::ForeignReporter,
                },
            ];
        }
        if self.lists(cert) {
            return vec![Action::Metric(MetricEvent::about(
                MetricKind::DuplicateAdd,
                1,
                cert.clone(),
            ))];
        }
        self.pending_adds.push(cert.clone());
        if self.flush_scheduled {
            return Vec::new();
        }
        self.flush_scheduled = true;
        vec![Action::SetTimer {
            at: now,
            timer: TimerKind::FlushAdds,
        }]
    }

    pub fn on_remove(&mut self, cert: &CertificateId, now: SimTime) -> Vec<Action> {
        self.settle();
        if !self.lccl.remove(cert) {
            return Vec::new();
        }
        self.group_sig = self.group_sig.rotate();
        let mut actions = vec![Action::Broadcast {
            scope: BroadcastScope::ClusterMembers(self.cluster),
            msg: ProtocolMessage::SignatureRotation {
                cluster: self.cluster,
                new_epoch: self.group_sig.epoch,
            },
        }];
        actions.extend(self.broadcast_lccl(now));
        actions
    }

    pub fn on_timer(&mut self, timer: TimerKind, now: SimTime) -> Vec<Action> {
        match timer {
            TimerKind::FlushAdds => {
                self.flush_scheduled = false;
                self.settle();
                if self.dirty {
                    self.broadcast_lccl(now)
                } else {
                    Vec::new()
                }
            }
            TimerKind::PeriodicBroadcast => {
                if now != self.next_broadcast_at {
                    // superseded by a reset
                    return vec![Action::Metric(MetricEvent::count(MetricKind::StaleTimer))];
                }
                self.settle();
                self.broadcast_lccl(now)
            }
        }
    }

    /// Safety reports are queued in arrival order and pushed to every local RSU.
    pub fn on_safety_report(&mut self, body: &str) -> Vec<Action> {
        self.news.push(body.to_owned());
        vec![Action::Broadcast {
            scope: BroadcastScope::LocalRsus(self.cluster),
            msg: ProtocolMessage::SafetyReport {
                body: body.to_owned(),
            },
        }]
    }

    fn settle(&mut self) {
        if self.pending_adds.is_empty() {
            return;
        }
        let batch = std::mem::take(&mut self.pending_adds);
        if self.lccl.insert_front(&batch) {
            self.dirty = true;
        }
    }

    fn broadcast_lccl(&mut self, now: SimTime) -> Vec<Action> {
        self.dirty = false;
        self.next_broadcast_at = now + self.broadcast_period;
        let msg = ProtocolMessage::LcclBroadcast {
            lccl: self.lccl.clone(),
            epoch: self.group_sig.epoch,
        };
        vec![
            Action::Broadcast {
                scope: BroadcastScope::ClusterMembers(self.cluster),
                msg: msg.clone(),
            },
            Action::Broadcast {
                scope: BroadcastScope::NeighborRsus(self.cluster),
                msg,
            },
            Action::SetTimer {
                at: self.next_broadcast_at,
                timer: TimerKind::PeriodicBroadcast,
            },
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(n: &str) -> CertificateId {
        CertificateId::new(n).unwrap()
    }

    fn lca1() -> LcaState {
        let lccl = Lccl::with_entries(
            ClusterId(1),
            ["V11", "V16", "V19", "V15", "V12", "V2", "V3"].map(c),
        );
        LcaState::new(
            lccl,
            Duration::from_secs(60),
            ["RSU1", "RSU2", "RSU3", "RSU4", "RSU5"].map(RsuId::new).into_iter().collect(),
            BTreeSet::new(),
        )
    }

    fn broadcast_times(actions: &[Action]) -> Vec<SimTime> {
        actions
            .iter()
            .filter_map(|a| match a {
                Action::SetTimer { at, timer: TimerKind::PeriodicBroadcast } => Some(*at),
                _ => None,
            })
            .collect()
    }

    fn lccl_broadcasts(actions: &[Action]) -> Vec<&Lccl> {
        actions
            .iter()
            .filter_map(|a| match a {
                Action::Broadcast {
                    scope: BroadcastScope::ClusterMembers(_),
                    msg: ProtocolMessage::LcclBroadcast { lccl, .. },
                } => Some(lccl),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn same_instant_adds_batch_into_table_one() {
        let mut lca = lca1();
        let t = SimTime::from_secs(100);
        let mut actions = lca.on_add(&c("V8"), &RsuId::new("RSU2"), t);
        actions.extend(lca.on_add(&c("V25"), &RsuId::new("RSU4"), t));
        actions.extend(lca.on_add(&c("V5"), &RsuId::new("RSU5"), t));
        assert_eq!(
            actions,
            vec![Action::SetTimer { at: t, timer: TimerKind::FlushAdds }]
        );
        let flushed = lca.on_timer(TimerKind::FlushAdds, t);
        let lists = lccl_broadcasts(&flushed);
        assert_eq!(lists.len(), 1);
        let expected: Vec<CertificateId> =
            ["V8", "V25", "V5", "V11", "V16", "V19", "V15", "V12", "V2", "V3"].map(c).to_vec();
        assert_eq!(lists[0].entries(), expected.as_slice());
        assert_eq!(lca.lccl.entries(), expected.as_slice());
    }

    #[test]
    fn duplicate_add_changes_nothing() {
        let mut lca = lca1();
        let before = lca.clone();
        let actions = lca.on_add(&c("V16"), &RsuId::new("RSU2"), SimTime::from_secs(30));
        assert!(matches!(
            actions.as_slice(),
            [Action::Metric(MetricEvent { kind: MetricKind::DuplicateAdd, .. })]
        ));
        assert_eq!(lca, before);
    }

    #[test]
    fn add_resets_the_broadcast_timer() {
        let mut lca = lca1();
        let t = SimTime::from_secs(30);
        lca.on_add(&c("V8"), &RsuId::new("RSU2"), t);
        let actions = lca.on_timer(TimerKind::FlushAdds, t);
        assert_eq!(broadcast_times(&actions), vec![SimTime::from_secs(90)]);
        // the original t=60 timer is now stale
        let stale = lca.on_timer(TimerKind::PeriodicBroadcast, SimTime::from_secs(60));
        assert!(lccl_broadcasts(&stale).is_empty());
        let periodic = lca.on_timer(TimerKind::PeriodicBroadcast, SimTime::from_secs(90));
        assert_eq!(lccl_broadcasts(&periodic).len(), 1);
        assert_eq!(broadcast_times(&periodic), vec![SimTime::from_secs(150)]);
    }

    #[test]
    fn periodic_schedule_without_adds() {
        let mut lca = lca1();
        let mut fired = Vec::new();
        let mut next = lca.next_broadcast_at;
        while next <= SimTime::from_secs(185) {
            let actions = lca.on_timer(TimerKind::PeriodicBroadcast, next);
            assert_eq!(lccl_broadcasts(&actions).len(), 1);
            fired.push(next);
            next = broadcast_times(&actions)[0];
        }
        assert_eq!(fired, [60, 120, 180].map(SimTime::from_secs).to_vec());
    }

    #[test]
    fn event_broadcast_between_periodic_ones() {
        let mut lca = lca1();
        lca.on_timer(TimerKind::PeriodicBroadcast, SimTime::from_secs(60));
        let t = SimTime::from_secs(70);
        lca.on_add(&c("V8"), &RsuId::new("RSU2"), t);
        let actions = lca.on_timer(TimerKind::FlushAdds, t);
        assert_eq!(broadcast_times(&actions), vec![SimTime::from_secs(130)]);
    }

    #[test]
    fn empty_list_is_still_broadcast() {
        let mut lca = LcaState::new(
            Lccl::new(ClusterId(3)),
            Duration::from_secs(60),
            BTreeSet::new(),
            BTreeSet::new(),
        );
        let actions = lca.on_timer(TimerKind::PeriodicBroadcast, SimTime::from_secs(60));
        let lists = lccl_broadcasts(&actions);
        assert_eq!(lists.len(), 1);
        assert!(lists[0].is_empty());
    }

    #[test]
    fn foreign_reporter_is_rejected() {
        let mut lca = lca1();
        let actions = lca.on_add(&c("V8"), &RsuId::new("RSU99"), SimTime::from_secs(1));
        assert!(actions.contains(&Action::RejectMessage { reason: RejectReason::ForeignReporter }));
        assert!(!lca.lists(&c("V8")));
    }

    #[test]
    fn remove_rotates_and_broadcasts() {
        let mut lca6 = LcaState::new(
            Lccl::with_entries(ClusterId(6), [c("V25"), c("V9")]),
            Duration::from_secs(60),
            BTreeSet::new(),
            BTreeSet::new(),
        );
        let actions = lca6.on_remove(&c("V25"), SimTime::from_secs(100));
        assert_eq!(lca6.lccl.entries(), &[c("V9")]);
        assert_eq!(lca6.group_sig.epoch, 1);
        assert!(matches!(
            &actions[0],
            Action::Broadcast { msg: ProtocolMessage::SignatureRotation { new_epoch: 1, .. }, .. }
        ));
        assert_eq!(lccl_broadcasts(&actions).len(), 1);
        assert_eq!(broadcast_times(&actions), vec![SimTime::from_secs(160)]);
    }

    #[test]
    fn remove_of_absent_cert_is_silent() {
        let mut lca = lca1();
        let before = lca.clone();
        assert!(lca.on_remove(&c("V404"), SimTime::from_secs(5)).is_empty());
        assert_eq!(lca, before);
    }

    #[test]
    fn same_instant_add_then_remove_excludes_cert() {
        let mut lca = lca1();
        let t = SimTime::from_secs(10);
        lca.on_add(&c("V77"), &RsuId::new("RSU2"), t);
        let removed = lca.on_remove(&c("V77"), t);
        assert!(!lca.lists(&c("V77")));
        assert_eq!(lca.group_sig.epoch, 1);
        assert_eq!(lccl_broadcasts(&removed).len(), 1);
        // the batch was already settled and broadcast by the Remove
        assert!(lca.on_timer(TimerKind::FlushAdds, t).is_empty());
    }
}
