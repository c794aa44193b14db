use serde::{Deserialize, Serialize};

use super::ids::{CertificateId, ClusterId};
use super::RevocationError;

/// Outcome of a linear scan. `cost` counts entries inspected: `index + 1` on a
/// hit, the full length on a miss.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lookup {
    pub found: bool,
    pub cost: u64,
}

/// Local Cluster Certificate List: the revoked certificates of one cluster,
/// front first.
///
/// `version` tracks membership changes. Moving a hit to the front reorders a
/// local copy without changing which certificates are listed, so it leaves the
/// version alone; otherwise a promoted snapshot would shadow the authority's
/// next broadcast of the same content version.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lccl {
    cluster: ClusterId,
    entries: Vec<CertificateId>,
    version: u64,
}

impl Lccl {
    pub fn new(cluster: ClusterId) -> Self {
        Lccl {
            cluster,
            entries: Vec::new(),
            version: 0,
        }
    }

    /// Builds an initial list, dropping repeated ids. Version starts at 0.
    pub fn with_entries(cluster: ClusterId, entries: impl IntoIterator<Item = CertificateId>) -> Self {
        let mut out: Vec<CertificateId> = Vec::new();
        for cert in entries {
            if !out.contains(&cert) {
                out.push(cert);
            }
        }
        Lccl {
            cluster,
            entries: out,
            version: 0,
        }
    }

    pub fn cluster(&self) -> ClusterId {
        self.cluster
    }

    pub fn entries(&self) -> &[CertificateId] {
        &self.entries
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, cert: &CertificateId) -> bool {
        self.entries.contains(cert)
    }

    pub fn position(&self, cert: &CertificateId) -> Option<usize> {
        self.entries.iter().position(|c| c == cert)
    }

    /// Prepends the certificates not yet listed as one block, keeping batch
    /// order (the first of the batch ends up at index 0). Returns whether the
    /// list changed.
    pub fn insert_front(&mut self, certs: &[CertificateId]) -> bool {
        let mut block: Vec<CertificateId> = Vec::with_capacity(certs.len());
        for cert in certs {
            if !self.entries.contains(cert) && !block.contains(cert) {
                block.push(cert.clone());
            }
        }
        if block.is_empty() {
            return false;
        }
        block.append(&mut self.entries);
        self.entries = block;
        self.version += 1;
        true
    }

    pub fn remove(&mut self, cert: &CertificateId) -> bool {
        match self.position(cert) {
            Some(idx) => {
                self.entries.remove(idx);
                self.version += 1;
                true
            }
            None => false,
        }
    }

    /// Move-to-front search.
    pub fn lookup_promote(&mut self, cert: &CertificateId) -> Lookup {
        match self.position(cert) {
            Some(idx) => {
                if idx > 0 {
                    let hit = self.entries.remove(idx);
                    self.entries.insert(0, hit);
                }
                Lookup {
                    found: true,
                    cost: idx as u64 + 1,
                }
            }
            None => Lookup {
                found: false,
                cost: self.entries.len() as u64,
            },
        }
    }

    pub fn size_bytes(&self, entry_size_bytes: u64, header_bytes: u64) -> Result<u64, RevocationError> {
        list_size_bytes(self.entries.len(), entry_size_bytes, header_bytes)
    }
}

/// `entries × entry_size + header`, shared by every list model.
pub fn list_size_bytes(entries: usize, entry_size_bytes: u64, header_bytes: u64) -> Result<u64, RevocationError> {
    if entry_size_bytes == 0 {
        return Err(RevocationError::ZeroEntrySize);
    }
    Ok(entries as u64 * entry_size_bytes + header_bytes)
}
