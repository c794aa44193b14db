//! Certificates, keys, revocation lists and the wire messages that carry them.

mod crypto;
mod ids;
mod lccl;
mod message;
mod nccl;

pub use crypto::{
    seal_c2c, sign, verify, C2CBody, C2CEnvelope, ClusterSignature, KeyPair, PrivateKeyId,
    PublicKeyId, Signature,
};
pub use ids::{AuthorityId, Certificate, CertificateId, ClusterId, RsuId};
pub use lccl::{list_size_bytes, Lccl, Lookup};
pub use message::{MessageKind, MessageSizes, ProtocolMessage};
pub use nccl::Nccl;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RevocationError {
    #[error("certificate id must not be empty")]
    EmptyCertificateId,
    #[error("entry size must be positive")]
    ZeroEntrySize,
    #[error("{rsu} does not face cluster {cluster}")]
    NotAdjacent { rsu: RsuId, cluster: ClusterId },
    #[error("envelope cannot be opened with this key")]
    DecryptionFailure,
    #[error("private key does not match the certificate's public key")]
    KeyMismatch,
}
