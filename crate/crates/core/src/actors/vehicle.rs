use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Action, ActorId, MetricEvent, MetricKind, RejectReason};
use crate::revocation::{
    seal_c2c, AuthorityId, C2CEnvelope, Certificate, CertificateId, ClusterId, ClusterSignature,
    KeyPair, Lccl, ProtocolMessage, PublicKeyId,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SendError {
    /// The vehicle holds no signature for the receiving cluster; from a grey
    /// area it has to ask that cluster's RSU for a grant first.
    #[error("no group signature held for cluster {0}")]
    NoClusterSignature(ClusterId),
    #[error("tamper-proof device keys do not match the certificate")]
    KeyMismatch,
}

/// On-board unit state. `is_adversary` is workload ground truth for metrics;
/// no transition reads it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VehicleState {
    pub cert: Certificate,
    pub keys: KeyPair,
    pub lccl: Option<Lccl>,
    pub group_sig: Option<ClusterSignature>,
    pub current_cluster: Option<ClusterId>,
    pub in_grey_area: bool,
    /// Signatures of clusters other than the current one: ones held before
    /// moving on, and grey-area grants.
    pub held_signatures: BTreeMap<ClusterId, ClusterSignature>,
    pub granted_lccls: BTreeMap<ClusterId, Lccl>,
    pub news: Vec<String>,
    pub is_adversary: bool,
    outbox: BTreeMap<CertificateId, Vec<String>>,
}

impl VehicleState {
    pub fn new(id: CertificateId, is_adversary: bool) -> Self {
        let keys = KeyPair::provision(id.as_str());
        VehicleState {
            cert: Certificate::issue(id, keys.public.clone(), AuthorityId::central()),
            keys,
            lccl: None,
            group_sig: None,
            current_cluster: None,
            in_grey_area: false,
            held_signatures: BTreeMap::new(),
            granted_lccls: BTreeMap::new(),
            news: Vec::new(),
            is_adversary,
            outbox: BTreeMap::new(),
        }
    }

    pub fn id(&self) -> &CertificateId {
        self.cert.id()
    }

    pub fn hello(&self) -> ProtocolMessage {
        ProtocolMessage::VehicleHello {
            cert: self.cert.clone(),
            pk: self.keys.public.clone(),
        }
    }

    pub fn grey_area_request(&self) -> ProtocolMessage {
        ProtocolMessage::GreyAreaRequest {
            cert: self.cert.clone(),
            pk: self.keys.public.clone(),
        }
    }

    /// Provisioning at a cluster guard. The previous cluster's signature stays
    /// in the device.
    pub fn on_local_cluster_news(&mut self, group_sig: ClusterSignature, lccl: &Lccl, news: &[String]) {
        if let Some(old) = self.group_sig {
            if old.cluster != group_sig.cluster {
                self.held_signatures.insert(old.cluster, old);
            }
        }
        self.held_signatures.remove(&group_sig.cluster);
        self.current_cluster = Some(group_sig.cluster);
        self.group_sig = Some(group_sig);
        self.lccl = Some(lccl.clone());
        self.news = news.to_vec();
    }

    pub fn on_lccl_broadcast(&mut self, lccl: &Lccl, epoch: u64) -> Vec<Action> {
        if self.current_cluster != Some(lccl.cluster()) {
            return vec![Action::Metric(MetricEvent::count(
                MetricKind::CrossClusterBroadcastDropped,
            ))];
        }
        if let Some(sig) = self.group_sig.as_mut() {
            if epoch > sig.epoch {
                sig.epoch = epoch;
            }
        }
        match &self.lccl {
            Some(held) if held.version() >= lccl.version() => {
                vec![Action::Metric(MetricEvent::count(MetricKind::StaleBroadcastDropped))]
            }
            _ => {
                self.lccl = Some(lccl.clone());
                Vec::new()
            }
        }
    }

    pub fn on_signature_rotation(&mut self, cluster: ClusterId, new_epoch: u64) -> Vec<Action> {
        match self.group_sig.as_mut() {
            Some(sig) if sig.cluster == cluster => {
                if new_epoch > sig.epoch {
                    sig.epoch = new_epoch;
                }
                Vec::new()
            }
            _ => vec![Action::Metric(MetricEvent::count(
                MetricKind::CrossClusterBroadcastDropped,
            ))],
        }
    }

    pub fn on_grey_area_grant(&mut self, group_sig: ClusterSignature, lccl: &Lccl) {
        if self.current_cluster == Some(group_sig.cluster) {
            self.group_sig = Some(group_sig);
        } else {
            self.held_signatures.insert(group_sig.cluster, group_sig);
        }
        self.granted_lccls.insert(group_sig.cluster, lccl.clone());
    }

    /// The signature this vehicle would present to members of `cluster`.
    pub fn signature_for(&self, cluster: ClusterId) -> Option<ClusterSignature> {
        if self.current_cluster == Some(cluster) {
            return self.group_sig;
        }
        self.held_signatures.get(&cluster).copied()
    }

    pub fn send_c2c(
        &self,
        target_pk: &PublicKeyId,
        target_cluster: ClusterId,
        payload: &str,
    ) -> Result<ProtocolMessage, SendError> {
        let group_sig = self
            .signature_for(target_cluster)
            .ok_or(SendError::NoClusterSignature(target_cluster))?;
        let envelope = seal_c2c(payload, &self.keys, &self.cert, group_sig, target_pk)
            .map_err(|_| SendError::KeyMismatch)?;
        Ok(ProtocolMessage::C2C { envelope })
    }

    /// Holds a payload until the target's key arrives from an RSU.
    pub fn queue_c2c(&mut self, target: CertificateId, payload: String) {
        self.outbox.entry(target).or_default().push(payload);
    }

    pub fn queued(&self) -> usize {
        self.outbox.values().map(Vec::len).sum()
    }

    pub fn on_pk_response(
        &mut self,
        target: &CertificateId,
        target_pk: &PublicKeyId,
        cluster: ClusterId,
    ) -> Vec<Action> {
        let payloads = self.outbox.remove(target).unwrap_or_default();
        payloads
            .into_iter()
            .map(|payload| match self.send_c2c(target_pk, cluster, &payload) {
                Ok(msg) => Action::Send {
                    to: ActorId::Vehicle(target.clone()),
                    msg,
                },
                Err(_) => Action::Metric(MetricEvent::about(MetricKind::C2cUnsent, 1, target.clone())),
            })
            .collect()
    }

    pub fn on_pk_unknown(&mut self, target: &CertificateId) -> Vec<Action> {
        let payloads = self.outbox.remove(target).unwrap_or_default();
        payloads
            .iter()
            .map(|_| Action::Metric(MetricEvent::about(MetricKind::C2cUnsent, 1, target.clone())))
            .collect()
    }

    /// Receive path in fixed order: open, cluster signature, LCCL search with
    /// move-to-front. Emits a `LookupCost` metric when the search runs.
    pub fn receive_c2c(&mut self, envelope: &C2CEnvelope) -> Vec<Action> {
        let body = match envelope.open(&self.keys.private) {
            Ok(body) => body,
            Err(_) => {
                return vec![Action::RejectMessage {
                    reason: RejectReason::DecryptionFailure,
                }]
            }
        };
        let signature_ok = self
            .group_sig
            .is_some_and(|current| body.group_sig.verifies_against(&current));
        if !signature_ok {
            return vec![Action::RejectMessage {
                reason: RejectReason::BadClusterSignature,
            }];
        }
        let sender = body.sender_cert.id().clone();
        let lookup = match self.lccl.as_mut() {
            Some(list) => list.lookup_promote(&sender),
            None => crate::revocation::Lookup { found: false, cost: 0 },
        };
        let metric = Action::Metric(MetricEvent::about(MetricKind::LookupCost, lookup.cost, sender));
        let verdict = if lookup.found {
            Action::RejectMessage {
                reason: RejectReason::RevokedSender,
            }
        } else {
            Action::AcceptMessage {
                payload: body.payload.clone(),
            }
        };
        vec![metric, verdict]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(n: &str) -> CertificateId {
        CertificateId::new(n).unwrap()
    }

    fn provisioned(name: &str, cluster: u32, listed: &[&str]) -> VehicleState {
        let mut v = VehicleState::new(c(name), false);
        let lccl = Lccl::with_entries(ClusterId(cluster), listed.iter().map(|n| c(n)));
        v.on_local_cluster_news(ClusterSignature::genesis(ClusterId(cluster)), &lccl, &[]);
        v
    }

    fn envelope(msg: ProtocolMessage) -> C2CEnvelope {
        match msg {
            ProtocolMessage::C2C { envelope } => envelope,
            other => panic!("not c2c: {other:?}"),
        }
    }

    fn verdict(actions: &[Action]) -> &Action {
        actions.last().unwrap()
    }

    #[test]
    fn member_to_member_is_accepted() {
        let sender = provisioned("V40", 1, &[]);
        let mut receiver = provisioned("V42", 1, &["V11"]);
        let msg = sender.send_c2c(&receiver.keys.public, ClusterId(1), "hi").unwrap();
        let actions = receiver.receive_c2c(&envelope(msg));
        assert_eq!(verdict(&actions), &Action::AcceptMessage { payload: "hi".into() });
    }

    #[test]
    fn loopback_is_accepted() {
        let mut v = provisioned("V40", 1, &[]);
        let msg = v.send_c2c(&v.keys.public.clone(), ClusterId(1), "me").unwrap();
        assert!(matches!(verdict(&v.receive_c2c(&envelope(msg))), Action::AcceptMessage { .. }));
    }

    #[test]
    fn wrong_recipient_fails_first() {
        let sender = provisioned("V40", 1, &[]);
        let mut bystander = provisioned("V43", 2, &["V40"]);
        let target = provisioned("V42", 1, &[]);
        let msg = sender.send_c2c(&target.keys.public, ClusterId(1), "x").unwrap();
        let actions = bystander.receive_c2c(&envelope(msg));
        assert_eq!(actions, vec![Action::RejectMessage { reason: RejectReason::DecryptionFailure }]);
    }

    #[test]
    fn revoked_sender_is_rejected_and_promoted() {
        let sender = provisioned("V25", 1, &[]);
        let mut receiver = provisioned("V40", 1, &["V1", "V2", "V3", "V4", "V5", "V25", "V6"]);
        let msg = sender.send_c2c(&receiver.keys.public, ClusterId(1), "x").unwrap();
        let actions = receiver.receive_c2c(&envelope(msg.clone()));
        assert_eq!(
            actions[0],
            Action::Metric(MetricEvent::about(MetricKind::LookupCost, 6, c("V25")))
        );
        assert_eq!(verdict(&actions), &Action::RejectMessage { reason: RejectReason::RevokedSender });
        assert_eq!(receiver.lccl.as_ref().unwrap().position(&c("V25")), Some(0));
        let again = receiver.receive_c2c(&envelope(msg));
        assert_eq!(again[0], Action::Metric(MetricEvent::about(MetricKind::LookupCost, 1, c("V25"))));
    }

    #[test]
    fn stale_epoch_is_fenced_after_rotation() {
        let mut adversary = provisioned("V25", 6, &[]);
        let mut member = provisioned("V41", 6, &[]);
        member.on_signature_rotation(ClusterId(6), 1);
        // adversary moved on to cluster 1, keeping the old cluster 6 signature
        adversary.on_local_cluster_news(ClusterSignature::genesis(ClusterId(1)), &Lccl::new(ClusterId(1)), &[]);
        assert_eq!(adversary.signature_for(ClusterId(6)), Some(ClusterSignature::genesis(ClusterId(6))));
        let msg = adversary.send_c2c(&member.keys.public, ClusterId(6), "x").unwrap();
        assert_eq!(
            member.receive_c2c(&envelope(msg)),
            vec![Action::RejectMessage { reason: RejectReason::BadClusterSignature }]
        );
    }

    #[test]
    fn broadcast_versions_and_rotation() {
        let mut v = provisioned("V40", 1, &[]);
        let mut l = Lccl::new(ClusterId(1));
        l.insert_front(&[c("V8")]);
        let v1 = l.clone();
        l.insert_front(&[c("V9")]);
        let v2 = l.clone();
        assert!(v.on_lccl_broadcast(&v2, 0).is_empty());
        assert_eq!(v.lccl.as_ref().unwrap().version(), 2);
        let dropped = v.on_lccl_broadcast(&v1, 0);
        assert!(matches!(dropped.as_slice(), [Action::Metric(MetricEvent { kind: MetricKind::StaleBroadcastDropped, .. })]));
        assert_eq!(v.lccl.as_ref().unwrap().version(), 2);
        v.on_lccl_broadcast(&v2, 1);
        assert_eq!(v.group_sig.unwrap().epoch, 1);
        let foreign = v.on_lccl_broadcast(&Lccl::new(ClusterId(2)), 0);
        assert!(matches!(foreign.as_slice(), [Action::Metric(MetricEvent { kind: MetricKind::CrossClusterBroadcastDropped, .. })]));
    }

    #[test]
    fn grey_area_vehicle_needs_a_grant() {
        let mut parked = VehicleState::new(c("V44"), false);
        parked.in_grey_area = true;
        let target = provisioned("V45", 5, &[]);
        assert_eq!(
            parked.send_c2c(&target.keys.public, ClusterId(5), "x"),
            Err(SendError::NoClusterSignature(ClusterId(5)))
        );
        parked.on_grey_area_grant(ClusterSignature::genesis(ClusterId(5)), &Lccl::new(ClusterId(5)));
        let mut target = target;
        let msg = parked.send_c2c(&target.keys.public, ClusterId(5), "x").unwrap();
        assert!(matches!(verdict(&target.receive_c2c(&envelope(msg))), Action::AcceptMessage { .. }));
    }

    #[test]
    fn outbox_drains_on_pk_answer() {
        let mut v = provisioned("V40", 1, &[]);
        v.queue_c2c(c("V42"), "a".into());
        v.queue_c2c(c("V42"), "b".into());
        v.queue_c2c(c("V50"), "c".into());
        let pk = KeyPair::provision("V42").public;
        let sent = v.on_pk_response(&c("V42"), &pk, ClusterId(1));
        assert_eq!(sent.len(), 2);
        assert!(sent.iter().all(|a| matches!(a, Action::Send { .. })));
        let unsent = v.on_pk_unknown(&c("V50"));
        assert_eq!(unsent.len(), 1);
        assert_eq!(v.queued(), 0);
    }
}
