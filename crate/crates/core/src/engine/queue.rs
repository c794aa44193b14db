use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::EngineError;
use crate::actors::{ActorId, TimerKind};
use crate::revocation::ProtocolMessage;
use crate::time::SimTime;
use crate::topology::{Arrival, MobilityEvent};

pub const CLASS_ADD: u8 = 0;
pub const CLASS_REMOVE: u8 = 1;
pub const CLASS_OTHER: u8 = 2;
pub const CLASS_TIMER: u8 = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Payload {
    Deliver { from: ActorId, msg: ProtocolMessage },
    Timer(TimerKind),
    Mobility(MobilityEvent),
    Arrival(Arrival),
}

impl Payload {
    pub fn priority_class(&self) -> u8 {
        match self {
            Payload::Deliver { msg: ProtocolMessage::AddRequest { .. }, .. } => CLASS_ADD,
            Payload::Deliver { msg: ProtocolMessage::RemoveRequest { .. }, .. } => CLASS_REMOVE,
            Payload::Timer(_) => CLASS_TIMER,
            _ => CLASS_OTHER,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Event {
    pub at: SimTime,
    pub priority_class: u8,
    pub seq: u64,
    pub target: ActorId,
    pub payload: Payload,
}

impl Event {
    fn key(&self) -> (SimTime, u8, u64) {
        (self.at, self.priority_class, self.seq)
    }
}

struct Queued(Event);

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.0.key() == other.0.key()
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.key().cmp(&other.0.key())
    }
}

/// Pops in `(at, priority_class, seq)` order. `seq` is handed out at
/// scheduling time, so same-class events at one instant keep emission order.
#[derive(Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<Queued>>,
    next_seq: u64,
    now: SimTime,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn schedule(&mut self, at: SimTime, target: ActorId, payload: Payload) -> Result<u64, EngineError> {
        if at < self.now {
            return Err(EngineError::ScheduledInPast { at, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(Queued(Event {
            at,
            priority_class: payload.priority_class(),
            seq,
            target,
            payload,
        })));
        Ok(seq)
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|Reverse(q)| q.0.at)
    }

    pub fn pop(&mut self) -> Option<Event> {
        let Reverse(Queued(event)) = self.heap.pop()?;
        self.now = event.at;
        Some(event)
    }
}


#[cfg(test)]
mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn pops_are_totally_ordered(items in prop::collection::vec((0u64..50, 0u8..4), 0..200)) {
            let mut q = EventQueue::new();
            for (t, class) in &items {
                let payload = match class {
                    0 => Payload::Deliver {
                        from: ActorId::Rsu(crate::revocation::RsuId::new("R")),
                        msg: ProtocolMessage::AddRequest {
                            cert_id: crate::revocation::CertificateId::new("V1").unwrap(),
                            reporter: crate::revocation::RsuId::new("R"),
                        },
                    },
                    1 => Payload::Deliver {
                        from: ActorId::Rsu(crate::revocation::RsuId::new("R")),
                        msg: ProtocolMessage::RemoveRequest {
                            cert_id: crate::revocation::CertificateId::new("V1").unwrap(),
                            reporter: crate::revocation::RsuId::new("R"),
                        },
                    },
                    2 => Payload::Deliver {
                        from: ActorId::Rsu(crate::revocation::RsuId::new("R")),
                        msg: ProtocolMessage::SafetyReport { body: String::new() },
                    },
                    _ => Payload::Timer(TimerKind::FlushAdds),
                };
                q.schedule(SimTime::from_micros(*t), ActorId::Lca(crate::revocation::ClusterId(1)), payload).unwrap();
            }
            let mut keys = Vec::new();
            while let Some(e) = q.pop() {
                keys.push((e.at, e.priority_class, e.seq));
            }
            prop_assert_eq!(keys.len(), items.len());
            prop_assert!(keys.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
