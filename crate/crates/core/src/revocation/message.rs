use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::crypto::{C2CEnvelope, ClusterSignature, PublicKeyId};
use super::ids::{Certificate, CertificateId, ClusterId, RsuId};
use super::lccl::{list_size_bytes, Lccl};

/// Every exchange on the simulated air interface or backhaul.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum ProtocolMessage {
    VehicleHello {
        cert: Certificate,
        pk: PublicKeyId,
    },
    AddRequest {
        cert_id: CertificateId,
        reporter: RsuId,
    },
    RemoveRequest {
        cert_id: CertificateId,
        reporter: RsuId,
    },
    LcclBroadcast {
        lccl: Lccl,
        epoch: u64,
    },
    SignatureRotation {
        cluster: ClusterId,
        new_epoch: u64,
    },
    PkRequest {
        target: CertificateId,
    },
    /// `cluster` is the cluster of the answering RSU, where the target was
    /// provisioned.
    PkResponse {
        target: CertificateId,
        target_pk: PublicKeyId,
        cluster: ClusterId,
    },
    PkUnknown {
        target: CertificateId,
    },
    C2C {
        envelope: C2CEnvelope,
    },
    SafetyReport {
        body: String,
    },
    /// Handshake reply at a cluster guard: RSU key, cluster signature, the
    /// cluster's LCCL and any safety news.
    LocalClusterNews {
        rsu_pk: PublicKeyId,
        group_sig: ClusterSignature,
        lccl: Lccl,
        news: Vec<String>,
    },
    GreyAreaRequest {
        cert: Certificate,
        pk: PublicKeyId,
    },
    GreyAreaGrant {
        group_sig: ClusterSignature,
        lccl: Lccl,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MessageKind {
    VehicleHello,
    AddRequest,
    RemoveRequest,
    LcclBroadcast,
    SignatureRotation,
    PkRequest,
    PkResponse,
    PkUnknown,
    C2C,
    SafetyReport,
    LocalClusterNews,
    GreyAreaRequest,
    GreyAreaGrant,
}

impl MessageKind {
    pub const ALL: [MessageKind; 13] = [
        MessageKind::VehicleHello,
        MessageKind::AddRequest,
        MessageKind::RemoveRequest,
        MessageKind::LcclBroadcast,
        MessageKind::SignatureRotation,
        MessageKind::PkRequest,
        MessageKind::PkResponse,
        MessageKind::PkUnknown,
        MessageKind::C2C,
        MessageKind::SafetyReport,
        MessageKind::LocalClusterNews,
        MessageKind::GreyAreaRequest,
        MessageKind::GreyAreaGrant,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MessageKind::VehicleHello => "VehicleHello",
            MessageKind::AddRequest => "AddRequest",
            MessageKind::RemoveRequest => "RemoveRequest",
            MessageKind::LcclBroadcast => "LcclBroadcast",
            MessageKind::SignatureRotation => "SignatureRotation",
            MessageKind::PkRequest => "PkRequest",
            MessageKind::PkResponse => "PkResponse",
            MessageKind::PkUnknown => "PkUnknown",
            MessageKind::C2C => "C2C",
            MessageKind::SafetyReport => "SafetyReport",
            MessageKind::LocalClusterNews => "LocalClusterNews",
            MessageKind::GreyAreaRequest => "GreyAreaRequest",
            MessageKind::GreyAreaGrant => "GreyAreaGrant",
        }
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl ProtocolMessage {
    pub fn kind(&self) -> MessageKind {
        match self {
            ProtocolMessage::VehicleHello { .. } => MessageKind::VehicleHello,
            ProtocolMessage::AddRequest { .. } => MessageKind::AddRequest,
            ProtocolMessage::RemoveRequest { .. } => MessageKind::RemoveRequest,
            ProtocolMessage::LcclBroadcast { .. } => MessageKind::LcclBroadcast,
            ProtocolMessage::SignatureRotation { .. } => MessageKind::SignatureRotation,
            ProtocolMessage::PkRequest { .. } => MessageKind::PkRequest,
            ProtocolMessage::PkResponse { .. } => MessageKind::PkResponse,
            ProtocolMessage::PkUnknown { .. } => MessageKind::PkUnknown,
            ProtocolMessage::C2C { .. } => MessageKind::C2C,
            ProtocolMessage::SafetyReport { .. } => MessageKind::SafetyReport,
            ProtocolMessage::LocalClusterNews { .. } => MessageKind::LocalClusterNews,
            ProtocolMessage::GreyAreaRequest { .. } => MessageKind::GreyAreaRequest,
            ProtocolMessage::GreyAreaGrant { .. } => MessageKind::GreyAreaGrant,
        }
    }

    /// The list carried by the message, if any.
    pub fn carried_lccl(&self) -> Option<&Lccl> {
        match self {
            ProtocolMessage::LcclBroadcast { lccl, .. }
            | ProtocolMessage::LocalClusterNews { lccl, .. }
            | ProtocolMessage::GreyAreaGrant { lccl, .. } => Some(lccl),
            _ => None,
        }
    }

    /// Canonical single-line text form used in traces and golden files.
    pub fn to_canonical(&self) -> String {
        serde_json::to_string(self).expect("protocol messages always serialize")
    }
}

/// Configured wire sizes used for byte accounting. Messages that carry an LCCL
/// add `entries × entry_size_bytes + header_bytes` on top of their fixed size.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MessageSizes {
    pub fixed: BTreeMap<MessageKind, u64>,
    pub entry_size_bytes: u64,
    pub header_bytes: u64,
}

impl Default for MessageSizes {
    fn default() -> Self {
        let fixed = [
            (MessageKind::VehicleHello, 200),
            (MessageKind::AddRequest, 64),
            (MessageKind::RemoveRequest, 64),
            (MessageKind::LcclBroadcast, 32),
            (MessageKind::SignatureRotation, 48),
            (MessageKind::PkRequest, 32),
            (MessageKind::PkResponse, 64),
            (MessageKind::PkUnknown, 32),
            (MessageKind::C2C, 300),
            (MessageKind::SafetyReport, 128),
            (MessageKind::LocalClusterNews, 160),
            (MessageKind::GreyAreaRequest, 200),
            (MessageKind::GreyAreaGrant, 96),
        ]
        .into_iter()
        .collect();
        MessageSizes {
            fixed,
            entry_size_bytes: 100,
            header_bytes: 16,
        }
    }
}

impl MessageSizes {
    pub fn size_of(&self, msg: &ProtocolMessage) -> u64 {
        let fixed = self.fixed.get(&msg.kind()).copied().unwrap_or(0);
        let list = msg
            .carried_lccl()
            .and_then(|l| list_size_bytes(l.len(), self.entry_size_bytes, self.header_bytes).ok())
            .unwrap_or(0);
        fixed + list
    }
}
