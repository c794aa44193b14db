use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Action, ActorId, MetricEvent, MetricKind, RejectReason};
use crate::revocation::{
    Certificate, CertificateId, ClusterId, ClusterSignature, KeyPair, Lccl, Nccl, ProtocolMessage,
    PublicKeyId, RsuId,
};

/// A road-side unit: the cluster guard that provisions incoming vehicles and
/// checks them against its neighbor lists.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RsuState {
    pub id: RsuId,
    pub cluster: ClusterId,
    pub own_keys: KeyPair,
    pub local_lccl: Lccl,
    pub nccl: Nccl,
    pub group_sig: ClusterSignature,
    pub known_vehicle_pks: BTreeMap<CertificateId, PublicKeyId>,
    pub news: Vec<String>,
}

impl RsuState {
    pub fn new(id: RsuId, local_lccl: Lccl, nccl: Nccl) -> Self {
        let cluster = local_lccl.cluster();
        RsuState {
            own_keys: KeyPair::provision(id.as_str()),
            group_sig: ClusterSignature::genesis(cluster),
            id,
            cluster,
            local_lccl,
            nccl,
            known_vehicle_pks: BTreeMap::new(),
            news: Vec::new(),
        }
    }

    /// Border handshake: record the credential, provision the vehicle with
    /// this cluster's key, signature, list and news, then search the NCCL.
    /// On a hit the Add to the own LCA is emitted before the Remove to the
    /// origin LCA.
    pub fn on_vehicle_hello(&mut self, cert: &Certificate, pk: &PublicKeyId) -> Vec<Action> {
        if cert.holder_pk() != pk {
            return vec![Action::RejectMessage {
                reason: RejectReason::MalformedHello,
            }];
        }
        self.known_vehicle_pks.insert(cert.id().clone(), pk.clone());
        let mut actions = vec![Action::Send {
            to: ActorId::Vehicle(cert.id().clone()),
            msg: ProtocolMessage::LocalClusterNews {
                rsu_pk: self.own_keys.public.clone(),
                group_sig: self.group_sig,
                lccl: self.local_lccl.clone(),
                news: self.news.clone(),
            },
        }];
        if let Some(origin) = self.nccl.contains(cert.id()) {
            actions.extend(self.report(cert.id(), origin));
        }
        actions
    }

    fn report(&self, cert: &CertificateId, origin: ClusterId) -> Vec<Action> {
        vec![
            Action::Metric(MetricEvent::about(
                MetricKind::AdversaryReported,
                u64::from(origin.0),
                cert.clone(),
            )),
            Action::Send {
                to: ActorId::Lca(self.cluster),
                msg: ProtocolMessage::AddRequest {
                    cert_id: cert.clone(),
                    reporter: self.id.clone(),
                },
            },
            Action::Send {
                to: ActorId::Lca(origin),
                msg: ProtocolMessage::RemoveRequest {
                    cert_id: cert.clone(),
                    reporter: self.id.clone(),
                },
            },
        ]
    }

    /// Answers from the handshake records; revocation status is not consulted
    /// here, the receiver checks it.
    pub fn on_pk_request(&self, requester: &CertificateId, target: &CertificateId) -> Vec<Action> {
        let msg = match self.known_vehicle_pks.get(target) {
            Some(pk) => ProtocolMessage::PkResponse {
                target: target.clone(),
                target_pk: pk.clone(),
                cluster: self.cluster,
            },
            None => ProtocolMessage::PkUnknown {
                target: target.clone(),
            },
        };
        vec![Action::Send {
            to: ActorId::Vehicle(requester.clone()),
            msg,
        }]
    }

    pub fn on_grey_area_request(&mut self, cert: &Certificate, pk: &PublicKeyId) -> Vec<Action> {
        if cert.holder_pk() != pk {
            return vec![Action::RejectMessage {
                reason: RejectReason::MalformedHello,
            }];
        }
        self.known_vehicle_pks.insert(cert.id().clone(), pk.clone());
        match self.nccl.contains(cert.id()) {
            None => vec![Action::Send {
                to: ActorId::Vehicle(cert.id().clone()),
                msg: ProtocolMessage::GreyAreaGrant {
                    group_sig: self.group_sig,
                    lccl: self.local_lccl.clone(),
                },
            }],
            Some(origin) => {
                let mut actions = vec![Action::RejectMessage {
                    reason: RejectReason::GreyAreaDenied,
                }];
                actions.extend(self.report(cert.id(), origin));
                actions
            }
        }
    }

    /// A vehicle's report goes straight to the LCA, which orders and fans it out.
    pub fn on_safety_report(&self, body: &str) -> Vec<Action> {
        vec![Action::Send {
            to: ActorId::Lca(self.cluster),
            msg: ProtocolMessage::SafetyReport {
                body: body.to_owned(),
            },
        }]
    }

    /// News relayed by the own LCA.
    pub fn on_safety_news(&mut self, body: &str) -> Vec<Action> {
        self.news.push(body.to_owned());
        Vec::new()
    }

    pub fn on_lccl_broadcast(&mut self, lccl: &Lccl, epoch: u64) -> Vec<Action> {
        if lccl.cluster() == self.cluster {
            if lccl.version() > self.local_lccl.version() {
                self.local_lccl = lccl.clone();
            }
            if epoch > self.group_sig.epoch {
                self.group_sig.epoch = epoch;
            }
            return Vec::new();
        }
        match self.nccl.absorb(lccl) {
            Ok(true) => Vec::new(),
            Ok(false) => vec![Action::Metric(MetricEvent::count(MetricKind::StaleBroadcastDropped))],
            Err(_) => vec![Action::Metric(MetricEvent::count(MetricKind::NeighborSnapshotRejected))],
        }
    }

    pub fn on_signature_rotation(&mut self, cluster: ClusterId, new_epoch: u64) -> Vec<Action> {
        if cluster == self.cluster && new_epoch > self.group_sig.epoch {
            self.group_sig.epoch = new_epoch;
        }
        Vec::new()
    }
}
