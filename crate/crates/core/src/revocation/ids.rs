use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::crypto::PublicKeyId;
use super::RevocationError;

/// Opaque identifier of a vehicle credential, e.g. `V25`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct CertificateId(String);

impl CertificateId {
    pub fn new(value: impl Into<String>) -> Result<Self, RevocationError> {
        let value = value.into();
        if value.trim().is_empty() {
            return Err(RevocationError::EmptyCertificateId);
        }
        Ok(CertificateId(value))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for CertificateId {
    type Error = RevocationError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        CertificateId::new(value)
    }
}

impl From<CertificateId> for String {
    fn from(id: CertificateId) -> String {
        id.0
    }
}

impl FromStr for CertificateId {
    type Err = RevocationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CertificateId::new(s)
    }
}

impl fmt::Display for CertificateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Numeric cluster label. One LCA serves each cluster.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct ClusterId(pub u32);

// Accepts the string form too: JSON object keys are always strings.
impl<'de> Deserialize<'de> for ClusterId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl serde::de::Visitor<'_> for V {
            type Value = ClusterId;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a cluster number")
            }

            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<ClusterId, E> {
                u32::try_from(v).map(ClusterId).map_err(E::custom)
            }

            fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<ClusterId, E> {
                u32::try_from(v).map(ClusterId).map_err(E::custom)
            }

            fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<ClusterId, E> {
                v.parse().map(ClusterId).map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}

impl fmt::Display for ClusterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Road-side unit name, e.g. `RSU4`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RsuId(String);

impl RsuId {
    pub fn new(value: impl Into<String>) -> Self {
        RsuId(value.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for RsuId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Issuer of a certificate. Only the central authority issues in this model.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AuthorityId(String);

impl AuthorityId {
    pub fn new(value: impl Into<String>) -> Self {
        AuthorityId(value.into())
    }

    pub fn central() -> Self {
        AuthorityId("CCA".to_owned())
    }
}

/// A vehicle credential as held in its tamper-proof device.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    id: CertificateId,
    holder_pk: PublicKeyId,
    issuer: AuthorityId,
}

impl Certificate {
    pub fn issue(id: CertificateId, holder_pk: PublicKeyId, issuer: AuthorityId) -> Self {
        Certificate {
            id,
            holder_pk,
            issuer,
        }
    }

    pub fn id(&self) -> &CertificateId {
        &self.id
    }

    pub fn holder_pk(&self) -> &PublicKeyId {
        &self.holder_pk
    }

    pub fn issuer(&self) -> &AuthorityId {
        &self.issuer
    }
}
