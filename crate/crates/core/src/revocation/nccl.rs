use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::ids::{CertificateId, ClusterId, RsuId};
use super::lccl::Lccl;
use super::RevocationError;

/// Neighbor Cluster Certificate List held by one RSU: the latest LCCL snapshot
/// of every cluster it faces, kept per origin.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Nccl {
    rsu: RsuId,
    faced: BTreeSet<ClusterId>,
    per_neighbor: BTreeMap<ClusterId, Lccl>,
}

impl Nccl {
    pub fn new(rsu: RsuId, faced: impl IntoIterator<Item = ClusterId>) -> Self {
        Nccl {
            rsu,
            faced: faced.into_iter().collect(),
            per_neighbor: BTreeMap::new(),
        }
    }

    pub fn rsu(&self) -> &RsuId {
        &self.rsu
    }

    pub fn faced(&self) -> &BTreeSet<ClusterId> {
        &self.faced
    }

    pub fn snapshots(&self) -> &BTreeMap<ClusterId, Lccl> {
        &self.per_neighbor
    }

    pub fn snapshot(&self, cluster: ClusterId) -> Option<&Lccl> {
        self.per_neighbor.get(&cluster)
    }

    /// Stores `lccl` as the snapshot of its cluster unless a strictly newer
    /// version is already held. Returns whether the snapshot was replaced.
    pub fn absorb(&mut self, lccl: &Lccl) -> Result<bool, RevocationError> {
        let neighbor = lccl.cluster();
        if !self.faced.contains(&neighbor) {
            return Err(RevocationError::NotAdjacent {
                rsu: self.rsu.clone(),
                cluster: neighbor,
            });
        }
        match self.per_neighbor.get(&neighbor) {
            Some(held) if held.version() > lccl.version() => Ok(false),
            _ => {
                self.per_neighbor.insert(neighbor, lccl.clone());
                Ok(true)
            }
        }
    }

    /// Origin cluster of `cert`. The lowest cluster id wins when several
    /// snapshots list it.
    pub fn contains(&self, cert: &CertificateId) -> Option<ClusterId> {
        self.per_neighbor
            .iter()
            .find(|(_, snap)| snap.contains(cert))
            .map(|(cluster, _)| *cluster)
    }
}


#[cfg(test)]
mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn contains_matches_union_of_snapshots(
            lists in prop::collection::vec(prop::collection::vec(0u8..25, 0..8), 1..5),
            probe in 0u8..25,
        ) {
            let clusters: Vec<ClusterId> = (0..lists.len() as u32).map(|i| ClusterId(i + 10)).collect();
            let mut n = Nccl::new(RsuId::new("R"), clusters.iter().copied());
            for (cluster, entries) in clusters.iter().zip(&lists) {
                let l = Lccl::with_entries(*cluster, entries.iter().map(|e| CertificateId::new(format!("V{e}")).unwrap()));
                n.absorb(&l).unwrap();
            }
            let probe_id = CertificateId::new(format!("V{probe}")).unwrap();
            let brute: Option<ClusterId> = clusters
                .iter()
                .zip(&lists)
                .filter(|(_, entries)| entries.contains(&probe))
                .map(|(c, _)| *c)
                .min();
            prop_assert_eq!(n.contains(&probe_id), brute);
        }
    }
}
