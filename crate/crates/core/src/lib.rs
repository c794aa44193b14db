//! Cluster-scoped certificate revocation for urban vehicular networks.
//!
//! Each cluster authority keeps a short list of the revoked vehicles that are
//! currently inside its area. Lists follow the vehicles as they cross borders.
//! The crate holds the protocol actors, a deterministic discrete-event
//! simulator, a global CRL baseline for comparison, and the scenario harness.

pub mod actors;
pub mod baseline;
pub mod engine;
pub mod harness;
pub mod revocation;
pub mod time;
pub mod topology;

pub use actors::{Action, ActorId, BroadcastScope, MetricKind, RejectReason, TimerKind};
pub use baseline::{DistributionModel, GlobalCrl};
pub use engine::{EngineError, SimConfig, Simulation};
pub use harness::replay::replay;
pub use harness::report::{ReportFormat, RunReport};
pub use harness::run::{run_scenario, RunError, RunOutput};
pub use harness::scenario::{load_scenario, parse_scenario, ScenarioConfig, ScenarioError};
pub use revocation::{CertificateId, ClusterId, Lccl, MessageKind, ProtocolMessage, RsuId};
pub use time::SimTime;
