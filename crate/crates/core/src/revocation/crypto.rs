//! Deterministic stand-in for the asymmetric primitives the protocol relies on.
//!
//! Keys are opaque labels. A private key pairs with exactly one public key (same
//! owner tag); signatures are SHA-256 digests bound to the signer's tag, and
//! "encryption" records the recipient key and refuses to open for anyone else.
//! Nothing here is secure. It only has to be exact and reproducible.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ids::{Certificate, ClusterId};
use super::RevocationError;

const PK_PREFIX: &str = "pk:";
const SK_PREFIX: &str = "sk:";

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PublicKeyId(String);

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PrivateKeyId(String);

impl PublicKeyId {
    pub fn new(value: impl Into<String>) -> Self {
        PublicKeyId(value.into())
    }

    fn tag(&self) -> &str {
        self.0.strip_prefix(PK_PREFIX).unwrap_or(&self.0)
    }
}

impl PrivateKeyId {
    pub fn new(value: impl Into<String>) -> Self {
        PrivateKeyId(value.into())
    }

    fn tag(&self) -> &str {
        self.0.strip_prefix(SK_PREFIX).unwrap_or(&self.0)
    }

    /// True iff this private key is the partner of `pk`.
    pub fn pairs_with(&self, pk: &PublicKeyId) -> bool {
        self.tag() == pk.tag()
    }
}

impl fmt::Display for PublicKeyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyPair {
    pub public: PublicKeyId,
    pub private: PrivateKeyId,
}

impl KeyPair {
    /// Key material the central authority writes into an owner's TPD.
    pub fn provision(owner: &str) -> Self {
        KeyPair {
            public: PublicKeyId(format!("{PK_PREFIX}{owner}")),
            private: PrivateKeyId(format!("{SK_PREFIX}{owner}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    digest: String,
}

fn digest(tag: &str, message: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(tag.as_bytes());
    hasher.update([0u8]);
    hasher.update(message);
    hex::encode(hasher.finalize())
}

pub fn sign(message: &[u8], sk: &PrivateKeyId) -> Signature {
    Signature {
        digest: digest(sk.tag(), message),
    }
}

pub fn verify(message: &[u8], signature: &Signature, pk: &PublicKeyId) -> bool {
    signature.digest == digest(pk.tag(), message)
}

/// Group credential of one cluster at one epoch (SignG).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClusterSignature {
    pub cluster: ClusterId,
    pub epoch: u64,
}

impl ClusterSignature {
    pub fn genesis(cluster: ClusterId) -> Self {
        ClusterSignature { cluster, epoch: 0 }
    }

    /// Same cluster, epoch + 1.
    pub fn rotate(self) -> Self {
        ClusterSignature {
            cluster: self.cluster,
            epoch: self.epoch + 1,
        }
    }

    /// A presented signature is valid only for the holder's current epoch.
    pub fn verifies_against(&self, current: &ClusterSignature) -> bool {
        self == current
    }
}

/// The plaintext carried inside a car-to-car envelope.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct C2CBody {
    pub payload: String,
    pub sender_pk: PublicKeyId,
    pub sender_sig: Signature,
    pub sender_cert: Certificate,
    pub group_sig: ClusterSignature,
}

impl C2CBody {
    fn signed_bytes(payload: &str, cert: &Certificate, group: &ClusterSignature) -> Vec<u8> {
        format!(
            "{}|{}|{}|{}",
            payload,
            cert.id(),
            group.cluster,
            group.epoch
        )
        .into_bytes()
    }

    /// Checks SignV against the key the envelope claims for its sender.
    pub fn sender_signature_valid(&self) -> bool {
        let bytes = Self::signed_bytes(&self.payload, &self.sender_cert, &self.group_sig);
        verify(&bytes, &self.sender_sig, &self.sender_pk)
    }
}

/// `PKR { M, PKS, SignV, Cert, SignG }`, sealed for one recipient.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct C2CEnvelope {
    pub recipient_pk: PublicKeyId,
    sealed: C2CBody,
}

impl C2CEnvelope {
    pub fn open(&self, sk: &PrivateKeyId) -> Result<&C2CBody, RevocationError> {
        if sk.pairs_with(&self.recipient_pk) {
            Ok(&self.sealed)
        } else {
            Err(RevocationError::DecryptionFailure)
        }
    }

    /// The group signature in the clear, for trace summaries only.
    pub fn group_sig_unchecked(&self) -> ClusterSignature {
        self.sealed.group_sig
    }

    pub fn sender_unchecked(&self) -> &Certificate {
        &self.sealed.sender_cert
    }
}

pub fn seal_c2c(
    payload: impl Into<String>,
    sender_keys: &KeyPair,
    sender_cert: &Certificate,
    group_sig: ClusterSignature,
    recipient_pk: &PublicKeyId,
) -> Result<C2CEnvelope, RevocationError> {
    if !sender_keys.private.pairs_with(sender_cert.holder_pk()) {
        return Err(RevocationError::KeyMismatch);
    }
    let payload = payload.into();
    let bytes = C2CBody::signed_bytes(&payload, sender_cert, &group_sig);
    Ok(C2CEnvelope {
        recipient_pk: recipient_pk.clone(),
        sealed: C2CBody {
            payload,
            sender_pk: sender_keys.public.clone(),
            sender_sig: sign(&bytes, &sender_keys.private),
            sender_cert: sender_cert.clone(),
            group_sig,
        },
    })
}
