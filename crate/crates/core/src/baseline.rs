//! Single global CRL used as the comparison system.

use indexmap::IndexSet;
use serde::{Deserialize, Serialize};

use crate::revocation::{CertificateId, Lookup};

/// Prefix of synthetic entries used to bring the CRL up to a configured size.
pub const BACKGROUND_PREFIX: &str = "CRL-BG-";

/// Append-only revocation list. Entries are never removed; a cert moving
/// between clusters is the same revocation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GlobalCrl {
    entries: IndexSet<CertificateId>,
    entry_size_bytes: u64,
    header_bytes: u64,
    version: u64,
    background: usize,
}

impl GlobalCrl {
    pub fn new(entry_size_bytes: u64, header_bytes: u64) -> Self {
        GlobalCrl {
            entries: IndexSet::new(),
            entry_size_bytes,
            header_bytes,
            version: 0,
            background: 0,
        }
    }

    /// A CRL that already holds `count` revocations from outside the run.
    /// They sit ahead of anything revoked later.
    pub fn with_background(count: usize, entry_size_bytes: u64, header_bytes: u64) -> Self {
        let mut crl = Self::new(entry_size_bytes, header_bytes);
        crl.entries = (1..=count)
            .map(|i| CertificateId::new(format!("{BACKGROUND_PREFIX}{i:05}")).expect("non-empty"))
            .collect();
        crl.background = count;
        crl
    }

    pub fn revoke(&mut self, cert: &CertificateId) -> bool {
        let added = self.entries.insert(cert.clone());
        if added {
            self.version += 1;
        }
        added
    }

    /// Linear scan from the front with no reordering.
    pub fn lookup(&self, cert: &CertificateId) -> Lookup {
        match self.entries.get_index_of(cert) {
            Some(i) => Lookup {
                found: true,
                cost: i as u64 + 1,
            },
            None => Lookup {
                found: false,
                cost: self.entries.len() as u64,
            },
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn contains(&self, cert: &CertificateId) -> bool {
        self.entries.contains(cert)
    }

    pub fn entries(&self) -> impl Iterator<Item = &CertificateId> {
        self.entries.iter()
    }

    pub fn background_len(&self) -> usize {
        self.background
    }

    /// Entries added by revocations observed in this run.
    pub fn revoked_in_run(&self) -> impl Iterator<Item = &CertificateId> {
        self.entries.iter().skip(self.background)
    }

    pub fn size_bytes(&self) -> u64 {
        self.entries.len() as u64 * self.entry_size_bytes + self.header_bytes
    }
}

fn default_bandwidth() -> f64 {
    4000.0
}

/// Effective per-vehicle download rate. The default is a calibration that
/// puts a 25000-entry list at about ten minutes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionModel {
    #[serde(default = "default_bandwidth")]
    pub bandwidth_bytes_per_s: f64,
    #[serde(default)]
    pub overhead_s: f64,
}

impl Default for DistributionModel {
    fn default() -> Self {
        DistributionModel {
            bandwidth_bytes_per_s: default_bandwidth(),
            overhead_s: 0.0,
        }
    }
}

impl DistributionModel {
    pub fn is_valid(&self) -> bool {
        self.bandwidth_bytes_per_s > 0.0 && self.overhead_s >= 0.0
    }

    pub fn time_for_bytes(&self, bytes: u64) -> f64 {
        bytes as f64 / self.bandwidth_bytes_per_s + self.overhead_s
    }

    pub fn crl_distribution_time(&self, crl: &GlobalCrl) -> f64 {
        self.time_for_bytes(crl.size_bytes())
    }
}
