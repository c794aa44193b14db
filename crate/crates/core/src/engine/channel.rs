use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::actors::ActorId;
use crate::time::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinkClass {
    VehicleRsu,
    RsuLca,
    Broadcast,
    V2V,
}

/// Link class of a point-to-point send. Broadcasts always use
/// [`LinkClass::Broadcast`].
pub fn link_for(from: &ActorId, to: &ActorId) -> LinkClass {
    use ActorId::*;
    match (from, to) {
        (Vehicle(_), Vehicle(_)) => LinkClass::V2V,
        (Vehicle(_), _) | (_, Vehicle(_)) => LinkClass::VehicleRsu,
        _ => LinkClass::RsuLca,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkParams {
    pub latency_ms: f64,
    #[serde(default)]
    pub jitter_ms: f64,
    #[serde(default)]
    pub loss: f64,
}

impl LinkParams {
    pub const fn fixed(latency_ms: f64) -> Self {
        LinkParams {
            latency_ms,
            jitter_ms: 0.0,
            loss: 0.0,
        }
    }

    pub fn check(&self) -> Result<(), String> {
        if !(self.latency_ms.is_finite() && self.latency_ms >= 0.0) {
            return Err("latency_ms must be a non-negative number".into());
        }
        if !(self.jitter_ms.is_finite() && self.jitter_ms >= 0.0) {
            return Err("jitter_ms must be a non-negative number".into());
        }
        if !(0.0..=1.0).contains(&self.loss) {
            return Err("loss must be within [0, 1]".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelModel {
    pub vehicle_rsu: LinkParams,
    pub rsu_lca: LinkParams,
    pub broadcast: LinkParams,
    pub v2v: LinkParams,
}

impl Default for ChannelModel {
    fn default() -> Self {
        ChannelModel {
            vehicle_rsu: LinkParams::fixed(2.0),
            rsu_lca: LinkParams::fixed(5.0),
            broadcast: LinkParams::fixed(10.0),
            v2v: LinkParams::fixed(2.0),
        }
    }
}

impl ChannelModel {
    pub fn params(&self, link: LinkClass) -> &LinkParams {
        match link {
            LinkClass::VehicleRsu => &self.vehicle_rsu,
            LinkClass::RsuLca => &self.rsu_lca,
            LinkClass::Broadcast => &self.broadcast,
            LinkClass::V2V => &self.v2v,
        }
    }

    pub fn check(&self) -> Result<(), String> {
        for (name, p) in [
            ("vehicle_rsu", &self.vehicle_rsu),
            ("rsu_lca", &self.rsu_lca),
            ("broadcast", &self.broadcast),
            ("v2v", &self.v2v),
        ] {
            p.check().map_err(|e| format!("{name}.{e}"))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub to: ActorId,
    /// None when the copy was lost.
    pub at: Option<SimTime>,
}

/// Seeded channel. Random draws happen only for links with jitter or a
/// fractional loss rate; `cursor` counts them.
pub struct Channel {
    model: ChannelModel,
    rng: ChaCha8Rng,
    cursor: u64,
}

impl Channel {
    pub fn new(model: ChannelModel, seed: u64) -> Self {
        Channel {
            model,
            rng: ChaCha8Rng::seed_from_u64(seed),
            cursor: 0,
        }
    }

    pub fn cursor(&self) -> u64 {
        self.cursor
    }

    pub fn model(&self) -> &ChannelModel {
        &self.model
    }

    /// Delay of one copy, or None if it is dropped.
    pub fn transmit(&mut self, link: LinkClass) -> Option<Duration> {
        let p = *self.model.params(link);
        let lost = if p.loss >= 1.0 {
            true
        } else if p.loss > 0.0 {
            self.cursor += 1;
            self.rng.random_bool(p.loss)
        } else {
            false
        };
        if lost {
            return None;
        }
        let mut ms = p.latency_ms;
        if p.jitter_ms > 0.0 {
            self.cursor += 1;
            ms += self.rng.random_range(0.0..=p.jitter_ms);
        }
        Some(Duration::from_micros((ms * 1000.0).round() as u64))
    }

    /// One outcome per recipient, each with its own draw.
    pub fn deliver(&mut self, link: LinkClass, recipients: &[ActorId], now: SimTime) -> Vec<Outcome> {
        recipients
            .iter()
            .map(|to| Outcome {
                to: to.clone(),
                at: self.transmit(link).map(|d| now + d),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::revocation::{CertificateId, ClusterId, RsuId};

    fn vehicles(n: usize) -> Vec<ActorId> {
        (0..n)
            .map(|i| ActorId::Vehicle(CertificateId::new(format!("V{i}")).unwrap()))
            .collect()
    }

    #[test]
    fn fixed_latency_send() {
        let mut ch = Channel::new(ChannelModel::default(), 1);
        let from = ActorId::Rsu(RsuId::new("RSU4"));
        let to = ActorId::Lca(ClusterId(1));
        let link = link_for(&from, &to);
        assert_eq!(link, LinkClass::RsuLca);
        let out = ch.deliver(link, &[to], SimTime::from_secs(100));
        assert_eq!(out[0].at, Some(SimTime::from_micros(100_005_000)));
        assert_eq!(ch.cursor(), 0);
    }

    #[test]
    fn broadcast_fans_out() {
        let mut ch = Channel::new(ChannelModel::default(), 1);
        let out = ch.deliver(LinkClass::Broadcast, &vehicles(10), SimTime::ZERO);
        assert_eq!(out.len(), 10);
        assert!(out.iter().all(|o| o.at == Some(SimTime::from_millis(10))));
    }

    #[test]
    fn total_loss_drops_everything() {
        let model = ChannelModel {
            broadcast: LinkParams { latency_ms: 10.0, jitter_ms: 0.0, loss: 1.0 },
            ..ChannelModel::default()
        };
        let mut ch = Channel::new(model, 1);
        let out = ch.deliver(LinkClass::Broadcast, &vehicles(10), SimTime::ZERO);
        assert!(out.iter().all(|o| o.at.is_none()));
    }

    #[test]
    fn jitter_is_seeded_and_bounded() {
        let model = ChannelModel {
            v2v: LinkParams { latency_ms: 2.0, jitter_ms: 3.0, loss: 0.25 },
            ..ChannelModel::default()
        };
        let run = |seed| {
            let mut ch = Channel::new(model, seed);
            let out = ch.deliver(LinkClass::V2V, &vehicles(50), SimTime::ZERO);
            (out, ch.cursor())
        };
        let (a, cursor) = run(7);
        assert_eq!(a, run(7).0);
        assert_ne!(a, run(8).0);
        assert!(cursor >= 50);
        for o in a.iter().filter_map(|o| o.at) {
            assert!(o >= SimTime::from_millis(2) && o <= SimTime::from_millis(5));
        }
    }

    #[test]
    fn rejects_bad_params() {
        assert!(LinkParams { latency_ms: 1.0, jitter_ms: 0.0, loss: 1.5 }.check().is_err());
        assert!(LinkParams::fixed(-1.0).check().is_err());
        assert!(ChannelModel::default().check().is_ok());
    }
}
