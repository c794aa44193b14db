use std::collections::{BTreeMap, BTreeSet};
use std::time::Duration;

use serde_json::{json, Value};

use super::channel::{link_for, Channel, ChannelModel, LinkClass};
use super::queue::{Event, EventQueue, Payload};
use super::trace::{ActionRecord, Delivery, Details, InitialCluster, StateSummary, TraceHeader, TraceRecord};
use super::EngineError;
use crate::actors::{
    Action, ActorId, BroadcastScope, LcaState, MetricEvent, MetricKind, RsuState, TimerKind, VehicleState,
};
use crate::baseline::{DistributionModel, GlobalCrl};
use crate::harness::report::{ClusterReport, Detection, RunReport, SizePoint};
use crate::revocation::{
    list_size_bytes, CertificateId, ClusterId, Lccl, MessageKind, MessageSizes, Nccl, ProtocolMessage, RsuId,
};
use crate::time::SimTime;
use crate::topology::{
    advance, initial_arrival, ClusterGrid, Location, MobilityEvent, Point, ScriptedAction, VehicleItinerary,
};

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub scenario: String,
    pub seed: u64,
    pub broadcast_period: Duration,
    pub channel: ChannelModel,
    pub sizes: MessageSizes,
    pub crl_background: usize,
    pub crl_header_bytes: u64,
    pub distribution: DistributionModel,
    /// Echoed into the trace header.
    pub config_echo: Value,
}

/// The world: every actor, the event queue, the channel and the baseline CRL
/// fed from the same revocation stream.
pub struct Simulation {
    cfg: SimConfig,
    grid: ClusterGrid,
    lcas: BTreeMap<ClusterId, LcaState>,
    rsus: BTreeMap<RsuId, RsuState>,
    vehicles: BTreeMap<CertificateId, VehicleState>,
    itineraries: BTreeMap<CertificateId, VehicleItinerary>,
    membership: BTreeMap<CertificateId, ClusterId>,
    pk_directory: BTreeMap<CertificateId, RsuId>,
    crl: GlobalCrl,
    channel: Channel,
    queue: EventQueue,
    trace: Vec<String>,
    report: RunReport,
    finished: bool,
}

struct Step {
    records: Vec<ActionRecord>,
}

impl Simulation {
    pub fn new(
        grid: ClusterGrid,
        initial: &BTreeMap<ClusterId, Vec<CertificateId>>,
        roster: Vec<VehicleItinerary>,
        cfg: SimConfig,
    ) -> Result<Self, EngineError> {
        let sizes = &cfg.sizes;
        let mut crl = GlobalCrl::with_background(cfg.crl_background, sizes.entry_size_bytes, cfg.crl_header_bytes);
        let mut lcas = BTreeMap::new();
        for c in grid.cluster_ids() {
            let certs = initial.get(&c).cloned().unwrap_or_default();
            for cert in &certs {
                crl.revoke(cert);
            }
            let lccl = Lccl::with_entries(c, certs);
            lcas.insert(
                c,
                LcaState::new(lccl, cfg.broadcast_period, grid.rsus_of(c), grid.rsus_facing(c)),
            );
        }
        if let Some(c) = initial.keys().find(|c| !lcas.contains_key(c)) {
            return Err(EngineError::UnknownActor(ActorId::Lca(*c)));
        }

        let mut rsus = BTreeMap::new();
        for p in grid.rsus() {
            let mut nccl = Nccl::new(p.id.clone(), p.faces());
            if let Some(faced) = p.faces() {
                nccl.absorb(&lcas[&faced].lccl)
                    .expect("guards face a neighbor cluster");
            }
            rsus.insert(p.id.clone(), RsuState::new(p.id.clone(), lcas[&p.cluster].lccl.clone(), nccl));
        }

        let listed: BTreeSet<&CertificateId> = initial.values().flatten().collect();
        let mut vehicles = BTreeMap::new();
        let mut itineraries = BTreeMap::new();
        for it in &roster {
            let mut v = VehicleState::new(it.vehicle.clone(), listed.contains(&it.vehicle));
            v.in_grey_area = matches!(grid.locate(it.start().pos), Ok(Location::GreyArea(_)));
            vehicles.insert(it.vehicle.clone(), v);
            itineraries.insert(it.vehicle.clone(), it.clone());
        }

        let mut report = RunReport {
            scenario: cfg.scenario.clone(),
            seed: cfg.seed,
            ..RunReport::default()
        };
        for (c, lca) in &lcas {
            let bytes = list_size_bytes(lca.lccl.len(), sizes.entry_size_bytes, sizes.header_bytes).unwrap_or(0);
            report.clusters.insert(
                *c,
                ClusterReport {
                    series: vec![SizePoint {
                        t_us: 0,
                        entries: lca.lccl.len() as u64,
                        bytes,
                    }],
                    ..ClusterReport::default()
                },
            );
        }

        let header = TraceHeader {
            record: "header".into(),
            scenario: cfg.scenario.clone(),
            seed: cfg.seed,
            config: cfg.config_echo.clone(),
            initial: lcas
                .iter()
                .map(|(c, l)| {
                    (
                        *c,
                        InitialCluster {
                            entries: l.lccl.entries().to_vec(),
                            epoch: l.group_sig.epoch,
                        },
                    )
                })
                .collect(),
            crl_len: crl.len() as u64,
        };

        let mut sim = Simulation {
            channel: Channel::new(cfg.channel, cfg.seed),
            cfg,
            grid,
            lcas,
            rsus,
            vehicles,
            itineraries,
            membership: BTreeMap::new(),
            pk_directory: BTreeMap::new(),
            crl,
            queue: EventQueue::new(),
            trace: vec![serde_json::to_string(&header).expect("header serializes")],
            report,
            finished: false,
        };

        let timers: Vec<(ClusterId, Action)> = sim.lcas.iter().map(|(c, l)| (*c, l.initial_timer())).collect();
        for (c, timer) in timers {
            if let Action::SetTimer { at, timer } = timer {
                sim.queue.schedule(at, ActorId::Lca(c), Payload::Timer(timer))?;
            }
        }
        for it in &roster {
            let target = ActorId::Vehicle(it.vehicle.clone());
            if let Some(arrival) = initial_arrival(&sim.grid, it) {
                sim.queue.schedule(arrival.at, target.clone(), Payload::Arrival(arrival))?;
            }
            for ev in advance(&sim.grid, it, SimTime::ZERO, SimTime::from_micros(u64::MAX))? {
                sim.queue.schedule(ev.at, target.clone(), Payload::Mobility(ev.event))?;
            }
        }
        Ok(sim)
    }

    pub fn grid(&self) -> &ClusterGrid {
        &self.grid
    }

    pub fn now(&self) -> SimTime {
        self.queue.now()
    }

    pub fn lca(&self, c: ClusterId) -> Option<&LcaState> {
        self.lcas.get(&c)
    }

    pub fn lcas(&self) -> impl Iterator<Item = &LcaState> {
        self.lcas.values()
    }

    pub fn rsu(&self, id: &RsuId) -> Option<&RsuState> {
        self.rsus.get(id)
    }

    pub fn vehicle(&self, id: &CertificateId) -> Option<&VehicleState> {
        self.vehicles.get(id)
    }

    pub fn crl(&self) -> &GlobalCrl {
        &self.crl
    }

    pub fn trace_lines(&self) -> &[String] {
        &self.trace
    }

    pub fn report(&self) -> &RunReport {
        &self.report
    }

    /// Schedules an extra event, e.g. a hand-made delivery in tests.
    pub fn inject(&mut self, at: SimTime, target: ActorId, payload: Payload) -> Result<u64, EngineError> {
        self.queue.schedule(at, target, payload)
    }

    /// Applies events up to and including `t`, leaving later ones queued so
    /// the run can continue.
    pub fn advance_to(&mut self, t: SimTime) -> Result<(), EngineError> {
        while let Some(at) = self.queue.peek_time() {
            if at > t {
                break;
            }
            let ev = self.queue.pop().expect("peeked");
            self.apply(ev)?;
        }
        Ok(())
    }

    /// Applies events up to and including `t_end`, then lets in-flight
    /// deliveries and pending flushes land so that the lists are quiescent.
    /// Later timers and movement are dropped.
    pub fn run_until(&mut self, t_end: SimTime) -> Result<(), EngineError> {
        self.advance_to(t_end)?;
        while let Some(ev) = self.queue.pop() {
            if matches!(ev.payload, Payload::Deliver { .. } | Payload::Timer(TimerKind::FlushAdds)) {
                self.apply(ev)?;
            }
        }
        self.finished = true;
        Ok(())
    }

    pub fn finish(mut self) -> (RunReport, Vec<String>) {
        let mut lccl_max = 0;
        for (c, lca) in &self.lcas {
            let cr = self.report.clusters.get_mut(c).expect("every cluster has a report");
            cr.final_entries = lca.lccl.entries().to_vec();
            cr.final_epoch = lca.group_sig.epoch;
            cr.max_bytes = cr.series.iter().map(|p| p.bytes).max().unwrap_or(0);
            lccl_max = lccl_max.max(cr.max_bytes);
        }
        let b = &mut self.report.baseline;
        b.crl_entries = self.crl.len() as u64;
        b.crl_run_entries = self.crl.revoked_in_run().count() as u64;
        b.crl_bytes = self.crl.size_bytes();
        b.crl_distribution_s = self.cfg.distribution.crl_distribution_time(&self.crl);
        b.lccl_max_bytes = lccl_max;
        b.lccl_distribution_s = self.cfg.distribution.time_for_bytes(lccl_max);
        b.byte_ratio = if lccl_max == 0 {
            0.0
        } else {
            b.crl_bytes as f64 / lccl_max as f64
        };
        (self.report, self.trace)
    }

    fn apply(&mut self, ev: Event) -> Result<(), EngineError> {
        let now = ev.at;
        let (actions, input, kind, extra, crl_changed) = self.transition(&ev, now)?;
        let mut step = Step { records: Vec::new() };
        self.execute(&ev.target, actions, now, &mut step)?;

        let state = self.summary(&ev.target);
        if let ActorId::Lca(c) = &ev.target {
            self.note_size(*c, now);
        }
        if matches!(ev.payload, Payload::Deliver { .. }) {
            self.report.deliveries += 1;
        }
        self.report.events_applied += 1;
        self.report.last_event_us = now.as_micros();

        let record = TraceRecord {
            time_us: now.as_micros(),
            actor: ev.target.clone(),
            kind,
            details: Details {
                seq: ev.seq,
                class: ev.priority_class,
                from: match &ev.payload {
                    Payload::Deliver { from, .. } => Some(from.clone()),
                    _ => None,
                },
                input,
                actions: step.records,
                state,
                crl_len: crl_changed.then_some(self.crl.len() as u64),
                extra,
            },
            rng_cursor: self.channel.cursor(),
        };
        self.trace.push(serde_json::to_string(&record).expect("records serialize"));
        Ok(())
    }

    fn note_size(&mut self, c: ClusterId, now: SimTime) {
        let sizes = &self.cfg.sizes;
        let len = self.lcas[&c].lccl.len() as u64;
        let series = &mut self.report.clusters.get_mut(&c).expect("cluster report").series;
        if series.last().map(|p| p.entries) != Some(len) {
            series.push(SizePoint {
                t_us: now.as_micros(),
                entries: len,
                bytes: list_size_bytes(len as usize, sizes.entry_size_bytes, sizes.header_bytes).unwrap_or(0),
            });
        }
    }

    #[allow(clippy::type_complexity)]
    fn transition(
        &mut self,
        ev: &Event,
        now: SimTime,
    ) -> Result<(Vec<Action>, Value, String, Option<Value>, bool), EngineError> {
        let unknown = || EngineError::UnknownActor(ev.target.clone());
        let unexpected = |msg: &ProtocolMessage| EngineError::UnexpectedMessage {
            actor: ev.target.clone(),
            kind: msg.kind().name().to_owned(),
        };
        let mut extra = None;
        let mut crl_changed = false;
        let (input, kind) = match &ev.payload {
            Payload::Deliver { msg, .. } => (
                serde_json::to_value(msg).expect("messages serialize"),
                format!("deliver:{}", msg.kind()),
            ),
            Payload::Timer(t) => (json!(t), format!("timer:{t:?}")),
            Payload::Mobility(m) => {
                let kind = match m {
                    MobilityEvent::BorderCrossing { .. } => "mobility:border_crossing".to_owned(),
                    MobilityEvent::EnterGreyArea { .. } => "mobility:enter_grey_area".to_owned(),
                    MobilityEvent::LeaveGreyArea { .. } => "mobility:leave_grey_area".to_owned(),
                    MobilityEvent::Scripted { action, .. } => match action {
                        ScriptedAction::C2c { .. } => "script:c2c".to_owned(),
                        ScriptedAction::SafetyReport { .. } => "script:safety".to_owned(),
                        ScriptedAction::GreyAreaRequest { .. } => "script:grey_request".to_owned(),
                    },
                };
                (serde_json::to_value(m).expect("events serialize"), kind)
            }
            Payload::Arrival(a) => (serde_json::to_value(a).expect("arrivals serialize"), "arrival".to_owned()),
        };

        let actions = match (&ev.target, &ev.payload) {
            (ActorId::Lca(c), payload) => {
                let lca = self.lcas.get_mut(c).ok_or_else(unknown)?;
                match payload {
                    Payload::Deliver { msg, .. } => match msg {
                        ProtocolMessage::AddRequest { cert_id, reporter } => {
                            let acts = lca.on_add(cert_id, reporter, now);
                            if lca.pending_adds().contains(cert_id) {
                                crl_changed = self.crl.revoke(cert_id);
                            }
                            acts
                        }
                        ProtocolMessage::RemoveRequest { cert_id, .. } => {
                            let mut acts = lca.on_remove(cert_id, now);
                            if !acts.is_empty() && !self.lcas.values().any(|l| l.lists(cert_id)) {
                                acts.push(Action::Metric(MetricEvent::about(
                                    MetricKind::ZeroListWindow,
                                    1,
                                    cert_id.clone(),
                                )));
                            }
                            acts
                        }
                        ProtocolMessage::SafetyReport { body } => lca.on_safety_report(body),
                        other => return Err(unexpected(other)),
                    },
                    Payload::Timer(t) => lca.on_timer(*t, now),
                    _ => return Err(unknown()),
                }
            }
            (ActorId::Rsu(r), Payload::Deliver { from, msg }) => {
                let rsu = self.rsus.get_mut(r).ok_or_else(unknown)?;
                match msg {
                    ProtocolMessage::VehicleHello { cert, pk } => {
                        let acts = rsu.on_vehicle_hello(cert, pk);
                        if !matches!(acts.first(), Some(Action::RejectMessage { .. })) {
                            let cluster = rsu.cluster;
                            let v = cert.id().clone();
                            self.pk_directory.insert(v.clone(), r.clone());
                            if let Some(old) = self.membership.insert(v.clone(), cluster) {
                                if old != cluster {
                                    self.lcas.get_mut(&old).expect("known cluster").release(&v);
                                }
                            }
                            self.lcas.get_mut(&cluster).expect("known cluster").enroll(v);
                        }
                        acts
                    }
                    ProtocolMessage::GreyAreaRequest { cert, pk } => {
                        let acts = rsu.on_grey_area_request(cert, pk);
                        if !matches!(
                            acts.first(),
                            Some(Action::RejectMessage { reason: crate::actors::RejectReason::MalformedHello })
                        ) {
                            self.pk_directory.insert(cert.id().clone(), r.clone());
                        }
                        acts
                    }
                    ProtocolMessage::PkRequest { target } => match from {
                        ActorId::Vehicle(requester) => rsu.on_pk_request(requester, target),
                        _ => return Err(unexpected(msg)),
                    },
                    ProtocolMessage::SafetyReport { body } => match from {
                        ActorId::Lca(_) => rsu.on_safety_news(body),
                        _ => rsu.on_safety_report(body),
                    },
                    ProtocolMessage::LcclBroadcast { lccl, epoch } => rsu.on_lccl_broadcast(lccl, *epoch),
                    ProtocolMessage::SignatureRotation { cluster, new_epoch } => {
                        rsu.on_signature_rotation(*cluster, *new_epoch)
                    }
                    other => return Err(unexpected(other)),
                }
            }
            (ActorId::Vehicle(v), payload) => {
                if !self.vehicles.contains_key(v) {
                    return Err(unknown());
                }
                match payload {
                    Payload::Deliver { msg, .. } => {
                        let (acts, x) = self.vehicle_receive(v, msg).map_err(|()| unexpected(msg))?;
                        extra = x;
                        acts
                    }
                    Payload::Arrival(a) => {
                        let hello = self.vehicles[v].hello();
                        vec![Action::Send {
                            to: ActorId::Rsu(a.rsu.clone()),
                            msg: hello,
                        }]
                    }
                    Payload::Mobility(m) => {
                        let (acts, x) = self.vehicle_move(v, m, now);
                        extra = x;
                        acts
                    }
                    Payload::Timer(_) => return Err(unknown()),
                }
            }
            _ => return Err(unknown()),
        };
        Ok((actions, input, kind, extra, crl_changed))
    }

    fn vehicle_receive(&mut self, v: &CertificateId, msg: &ProtocolMessage) -> Result<(Vec<Action>, Option<Value>), ()> {
        let vehicle = self.vehicles.get_mut(v).expect("checked");
        let acts = match msg {
            ProtocolMessage::LocalClusterNews { group_sig, lccl, news, .. } => {
                vehicle.on_local_cluster_news(*group_sig, lccl, news);
                Vec::new()
            }
            ProtocolMessage::LcclBroadcast { lccl, epoch } => vehicle.on_lccl_broadcast(lccl, *epoch),
            ProtocolMessage::SignatureRotation { cluster, new_epoch } => {
                vehicle.on_signature_rotation(*cluster, *new_epoch)
            }
            ProtocolMessage::PkResponse { target, target_pk, cluster } => {
                vehicle.on_pk_response(target, target_pk, *cluster)
            }
            ProtocolMessage::PkUnknown { target } => vehicle.on_pk_unknown(target),
            ProtocolMessage::GreyAreaGrant { group_sig, lccl } => {
                vehicle.on_grey_area_grant(*group_sig, lccl);
                Vec::new()
            }
            ProtocolMessage::C2C { envelope } => {
                let sig = envelope.group_sig_unchecked();
                let sender = envelope.sender_unchecked().id().clone();
                let before = json!({
                    "envelope_cluster": sig.cluster,
                    "envelope_epoch": sig.epoch,
                    "sender": sender,
                    "receiver_cluster": vehicle.group_sig.map(|s| s.cluster),
                    "receiver_epoch": vehicle.group_sig.map(|s| s.epoch),
                    "lca_epoch": self.lcas.get(&sig.cluster).map(|l| l.group_sig.epoch),
                });
                let mut acts = vehicle.receive_c2c(envelope);
                let searched = acts
                    .iter()
                    .any(|a| matches!(a, Action::Metric(m) if m.kind == MetricKind::LookupCost));
                if searched {
                    let cost = self.crl.lookup(&sender).cost;
                    acts.push(Action::Metric(MetricEvent::about(MetricKind::BaselineLookupCost, cost, sender)));
                }
                return Ok((acts, Some(before)));
            }
            _ => return Err(()),
        };
        Ok((acts, None))
    }

    fn vehicle_move(&mut self, v: &CertificateId, m: &MobilityEvent, now: SimTime) -> (Vec<Action>, Option<Value>) {
        let pos = self.itineraries[v].position_at(now);
        match m {
            MobilityEvent::BorderCrossing { from, to, rsu, .. } => {
                let listed = self.lcas.get(from).is_some_and(|l| l.lists(v));
                let vehicle = &self.vehicles[v];
                let extra = json!({
                    "listed_at_origin": listed,
                    "adversary": vehicle.is_adversary,
                    "to": to,
                    "rsu": rsu,
                });
                (
                    vec![Action::Send {
                        to: ActorId::Rsu(rsu.clone()),
                        msg: vehicle.hello(),
                    }],
                    Some(extra),
                )
            }
            MobilityEvent::EnterGreyArea { .. } => {
                self.vehicles.get_mut(v).expect("checked").in_grey_area = true;
                (Vec::new(), None)
            }
            MobilityEvent::LeaveGreyArea { cluster, .. } => {
                let vehicle = self.vehicles.get_mut(v).expect("checked");
                vehicle.in_grey_area = false;
                if vehicle.current_cluster == Some(*cluster) {
                    return (Vec::new(), None);
                }
                let acts = match self.grid.nearest_rsu(*cluster, pos) {
                    Some(r) => vec![Action::Send {
                        to: ActorId::Rsu(r.id.clone()),
                        msg: vehicle.hello(),
                    }],
                    None => Vec::new(),
                };
                (acts, None)
            }
            MobilityEvent::Scripted { action, .. } => (self.vehicle_script(v, action, pos), None),
        }
    }

    fn local_rsu(&self, v: &CertificateId, pos: Point) -> Option<RsuId> {
        let vehicle = &self.vehicles[v];
        vehicle
            .current_cluster
            .and_then(|c| self.grid.nearest_rsu(c, pos))
            .or_else(|| self.grid.nearest_rsu_anywhere(pos))
            .map(|p| p.id.clone())
    }

    fn vehicle_script(&mut self, v: &CertificateId, action: &ScriptedAction, pos: Point) -> Vec<Action> {
        match action {
            ScriptedAction::C2c { target, payload } => {
                self.report.c2c.scripted += 1;
                let directory = self.pk_directory.get(target).cloned();
                let rsu = directory.or_else(|| self.local_rsu(v, pos));
                let vehicle = self.vehicles.get_mut(v).expect("checked");
                match rsu {
                    Some(r) if self.itineraries.contains_key(target) => {
                        vehicle.queue_c2c(target.clone(), payload.clone());
                        vec![Action::Send {
                            to: ActorId::Rsu(r),
                            msg: ProtocolMessage::PkRequest { target: target.clone() },
                        }]
                    }
                    _ => vec![Action::Metric(MetricEvent::about(MetricKind::C2cUnsent, 1, target.clone()))],
                }
            }
            ScriptedAction::SafetyReport { body } => match self.local_rsu(v, pos) {
                Some(r) => vec![Action::Send {
                    to: ActorId::Rsu(r),
                    msg: ProtocolMessage::SafetyReport { body: body.clone() },
                }],
                None => Vec::new(),
            },
            ScriptedAction::GreyAreaRequest { cluster } => match self.grid.nearest_rsu(*cluster, pos) {
                Some(r) => vec![Action::Send {
                    to: ActorId::Rsu(r.id.clone()),
                    msg: self.vehicles[v].grey_area_request(),
                }],
                None => Vec::new(),
            },
        }
    }

    fn actor_exists(&self, id: &ActorId) -> bool {
        match id {
            ActorId::Lca(c) => self.lcas.contains_key(c),
            ActorId::Rsu(r) => self.rsus.contains_key(r),
            ActorId::Vehicle(v) => self.vehicles.contains_key(v),
        }
    }

    fn recipients(&self, scope: &BroadcastScope) -> Vec<ActorId> {
        let rsus = |set: &BTreeSet<RsuId>| set.iter().cloned().map(ActorId::Rsu).collect::<Vec<_>>();
        match scope {
            BroadcastScope::ClusterMembers(c) => {
                let Some(lca) = self.lcas.get(c) else {
                    return Vec::new();
                };
                let mut out = rsus(&lca.local_rsus);
                out.extend(
                    lca.member_vehicles
                        .iter()
                        .filter(|v| self.vehicles.get(*v).is_some_and(|s| !s.in_grey_area))
                        .cloned()
                        .map(ActorId::Vehicle),
                );
                out
            }
            BroadcastScope::NeighborRsus(c) => self.lcas.get(c).map(|l| rsus(&l.neighbor_rsus)).unwrap_or_default(),
            BroadcastScope::LocalRsus(c) => self.lcas.get(c).map(|l| rsus(&l.local_rsus)).unwrap_or_default(),
        }
    }

    fn tally_sent(&mut self, kind: MessageKind, bytes: u64, lost: bool) {
        let t = self.report.messages.entry(kind).or_default();
        t.sent += 1;
        t.bytes += bytes;
        if lost {
            t.lost += 1;
        }
    }

    fn metric(&mut self, from: &ActorId, m: &MetricEvent, now: SimTime, step: &mut Step) {
        *self.report.metrics.entry(m.kind).or_default() += 1;
        match m.kind {
            MetricKind::LookupCost => *self.report.lookup_costs.entry(m.value).or_default() += 1,
            MetricKind::BaselineLookupCost => *self.report.baseline.lookup_costs.entry(m.value).or_default() += 1,
            MetricKind::C2cUnsent => self.report.c2c.unsent += m.value,
            MetricKind::AdversaryReported => {
                if let (ActorId::Rsu(r), Some(v)) = (from, &m.subject) {
                    self.report.detections.push(Detection {
                        vehicle: v.clone(),
                        rsu: r.clone(),
                        cluster: self.rsus[r].cluster,
                        origin: ClusterId(m.value as u32),
                        hello_us: now.as_micros(),
                        broadcast_us: None,
                        latency_us: None,
                    });
                }
            }
            _ => {}
        }
        step.records.push(ActionRecord::Metric {
            kind: m.kind,
            value: m.value,
            subject: m.subject.clone(),
        });
    }

    fn execute(&mut self, from: &ActorId, actions: Vec<Action>, now: SimTime, step: &mut Step) -> Result<(), EngineError> {
        for action in actions {
            match action {
                Action::Send { to, msg } => {
                    if !self.actor_exists(&to) {
                        return Err(EngineError::UnknownActor(to));
                    }
                    let bytes = self.cfg.sizes.size_of(&msg);
                    let kind = msg.kind();
                    let at = self.channel.transmit(link_for(from, &to)).map(|d| now + d);
                    self.tally_sent(kind, bytes, at.is_none());
                    if let Some(at) = at {
                        self.queue.schedule(
                            at,
                            to.clone(),
                            Payload::Deliver {
                                from: from.clone(),
                                msg,
                            },
                        )?;
                    }
                    step.records.push(ActionRecord::Send {
                        msg: kind,
                        bytes,
                        delivery: Delivery {
                            to,
                            at: at.map(SimTime::as_micros),
                        },
                    });
                    if at.is_none() {
                        self.metric(from, &MetricEvent::count(MetricKind::MessageLost), now, step);
                    }
                }
                Action::Broadcast { scope, msg } => {
                    let recipients = self.recipients(&scope);
                    let outcomes = self.channel.deliver(LinkClass::Broadcast, &recipients, now);
                    let bytes = self.cfg.sizes.size_of(&msg);
                    let kind = msg.kind();
                    let mut deliveries = Vec::with_capacity(outcomes.len());
                    let mut lost = 0;
                    for o in outcomes {
                        self.tally_sent(kind, bytes, o.at.is_none());
                        match o.at {
                            Some(at) => self.queue.schedule(
                                at,
                                o.to.clone(),
                                Payload::Deliver {
                                    from: from.clone(),
                                    msg: msg.clone(),
                                },
                            )?,
                            None => {
                                lost += 1;
                                0
                            }
                        };
                        deliveries.push(Delivery {
                            to: o.to,
                            at: o.at.map(SimTime::as_micros),
                        });
                    }
                    if let (BroadcastScope::ClusterMembers(c), ProtocolMessage::LcclBroadcast { lccl, .. }) =
                        (&scope, &msg)
                    {
                        let last = deliveries.iter().filter_map(|d| d.at).max().unwrap_or(now.as_micros());
                        for d in self.report.detections.iter_mut() {
                            if d.cluster == *c && d.broadcast_us.is_none() && lccl.contains(&d.vehicle) {
                                d.broadcast_us = Some(last);
                                d.latency_us = Some(last - d.hello_us);
                            }
                        }
                    }
                    step.records.push(ActionRecord::Broadcast {
                        scope,
                        msg: kind,
                        bytes,
                        deliveries,
                    });
                    for _ in 0..lost {
                        self.metric(from, &MetricEvent::count(MetricKind::MessageLost), now, step);
                    }
                }
                Action::SetTimer { at, timer } => {
                    self.queue.schedule(at, from.clone(), Payload::Timer(timer))?;
                    step.records.push(ActionRecord::Timer {
                        timer,
                        at: at.as_micros(),
                    });
                }
                Action::Metric(m) => self.metric(from, &m, now, step),
                Action::AcceptMessage { payload } => {
                    self.report.c2c.accepted += 1;
                    step.records.push(ActionRecord::Accept { payload });
                }
                Action::RejectMessage { reason } => {
                    if reason.is_c2c() {
                        *self.report.c2c.rejected.entry(reason).or_default() += 1;
                    } else {
                        *self.report.other_rejects.entry(reason).or_default() += 1;
                    }
                    step.records.push(ActionRecord::Reject { reason });
                }
            }
        }
        Ok(())
    }

    fn summary(&self, id: &ActorId) -> StateSummary {
        match id {
            ActorId::Lca(c) => {
                let l = &self.lcas[c];
                StateSummary::Lca {
                    entries: l.lccl.entries().to_vec(),
                    pending: l.pending_adds().to_vec(),
                    version: l.lccl.version(),
                    epoch: l.group_sig.epoch,
                    next_broadcast_us: l.next_broadcast_at.as_micros(),
                }
            }
            ActorId::Rsu(r) => {
                let s = &self.rsus[r];
                StateSummary::Rsu {
                    local_version: s.local_lccl.version(),
                    epoch: s.group_sig.epoch,
                    nccl_versions: s.nccl.snapshots().iter().map(|(c, l)| (*c, l.version())).collect(),
                }
            }
            ActorId::Vehicle(v) => {
                let s = &self.vehicles[v];
                StateSummary::Vehicle {
                    cluster: s.current_cluster,
                    epoch: s.group_sig.map(|g| g.epoch),
                    lccl_len: s.lccl.as_ref().map_or(0, Lccl::len),
                    lccl_front: s.lccl.as_ref().and_then(|l| l.entries().first().cloned()),
                    grey: s.in_grey_area,
                }
            }
        }
    }
}
