//! Scenario files (TOML) and their validation.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baseline::{DistributionModel, BACKGROUND_PREFIX};
use crate::engine::{ChannelModel, SimConfig};
use crate::revocation::{CertificateId, ClusterId, MessageKind, MessageSizes};
use crate::topology::{build_grid, ClusterGrid, GridSpec, ScriptedAction, ScriptedEvent, VehicleItinerary, Waypoint};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{origin}: {message}")]
    Parse { origin: String, message: String },
    #[error("{field}: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

fn default_period() -> f64 {
    60.0
}
fn default_entry() -> u64 {
    100
}
fn default_header() -> u64 {
    16
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    /// Pads the CRL with revocations from outside the run up to this many
    /// entries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crl_total_entries: Option<usize>,
    #[serde(default)]
    pub crl_header_bytes: u64,
    #[serde(flatten)]
    pub distribution: DistributionModel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RevokedList {
    pub cluster: u32,
    pub certs: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleEntry {
    pub id: String,
    /// `[t_s, x_m, y_m]` triples.
    pub waypoints: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<String>,
}

/// The file as written. Every field not marked optional must be present.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub seed: u64,
    pub t_end_s: f64,
    #[serde(default = "default_period")]
    pub broadcast_period_s: f64,
    #[serde(default = "default_entry")]
    pub entry_size_bytes: u64,
    #[serde(default = "default_header")]
    pub header_bytes: u64,
    pub grid: GridSpec,
    #[serde(default)]
    pub channel: ChannelModel,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub message_sizes: BTreeMap<MessageKind, u64>,
    #[serde(default)]
    pub baseline: BaselineConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub revoked: Vec<RevokedList>,
    #[serde(default, rename = "vehicle", skip_serializing_if = "Vec::is_empty")]
    pub vehicles: Vec<VehicleEntry>,
}

/// A validated scenario with every cross-reference resolved.
#[derive(Clone, Debug)]
pub struct ScenarioConfig {
    pub file: ScenarioFile,
    pub grid: ClusterGrid,
    pub initial: BTreeMap<ClusterId, Vec<CertificateId>>,
    pub roster: Vec<VehicleItinerary>,
}

pub fn parse_scenario(text: &str, origin: &str) -> Result<ScenarioConfig, ScenarioError> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| ScenarioError::Parse {
        origin: origin.to_owned(),
        message: e.to_string(),
    })?;
    ScenarioConfig::from_file(file)
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_scenario(&text, &path.display().to_string())
}

impl ScenarioConfig {
    pub fn from_file(file: ScenarioFile) -> Result<Self, ScenarioError> {
        if !(file.t_end_s.is_finite() && file.t_end_s >= 0.0) {
            return Err(invalid("t_end_s", "must be a non-negative number of seconds"));
        }
        if !(file.broadcast_period_s.is_finite() && file.broadcast_period_s > 0.0) {
            return Err(invalid("broadcast_period_s", "must be positive"));
        }
        if file.entry_size_bytes == 0 {
            return Err(invalid("entry_size_bytes", "must be positive"));
        }
        file.channel.check().map_err(|e| invalid(format!("channel.{}", e.split('.').next().unwrap_or("")), e))?;
        if !file.baseline.distribution.is_valid() {
            return Err(invalid(
                "baseline.bandwidth_bytes_per_s",
                "bandwidth must be positive and overhead non-negative",
            ));
        }
        let grid = build_grid(&file.grid).map_err(|e| invalid("grid", e.to_string()))?;

        let mut ids = BTreeSet::new();
        let mut roster = Vec::with_capacity(file.vehicles.len());
        for (i, v) in file.vehicles.iter().enumerate() {
            let field = format!("vehicle[{i}]");
            let id = CertificateId::new(v.id.clone()).map_err(|e| invalid(format!("{field}.id"), e.to_string()))?;
            if v.id.starts_with(BACKGROUND_PREFIX) {
                return Err(invalid(format!("{field}.id"), format!("ids starting with {BACKGROUND_PREFIX} are reserved")));
            }
            if !ids.insert(id.clone()) {
                return Err(invalid(format!("{field}.id"), format!("duplicate vehicle {id}")));
            }
            let script = v
                .events
                .iter()
                .enumerate()
                .map(|(j, e)| e.parse::<ScriptedEvent>().map_err(|r| invalid(format!("{field}.events[{j}]"), r)))
                .collect::<Result<Vec<_>, _>>()?;
            let it = VehicleItinerary {
                vehicle: id,
                waypoints: v.waypoints.iter().map(|w| Waypoint::new(w[0], w[1], w[2])).collect(),
                script,
            };
            it.validate(&grid).map_err(|e| invalid(format!("{field}.waypoints"), e.to_string()))?;
            roster.push(it);
        }
        for (i, it) in roster.iter().enumerate() {
            for (j, ev) in it.script.iter().enumerate() {
                let field = format!("vehicle[{i}].events[{j}]");
                match &ev.action {
                    ScriptedAction::C2c { target, .. } if !ids.contains(target) => {
                        return Err(invalid(field, format!("unknown target vehicle {target}")));
                    }
                    ScriptedAction::GreyAreaRequest { cluster } if grid.cluster(*cluster).is_none() => {
                        return Err(invalid(field, format!("unknown cluster {cluster}")));
                    }
                    _ => {}
                }
            }
        }

        let mut initial: BTreeMap<ClusterId, Vec<CertificateId>> = BTreeMap::new();
        let mut seen = BTreeSet::new();
        for (i, r) in file.revoked.iter().enumerate() {
            let cluster = ClusterId(r.cluster);
            if grid.cluster(cluster).is_none() {
                return Err(invalid(format!("revoked[{i}].cluster"), format!("unknown cluster {cluster}")));
            }
            for (j, c) in r.certs.iter().enumerate() {
                let field = format!("revoked[{i}].certs[{j}]");
                let id = CertificateId::new(c.clone()).map_err(|e| invalid(&field, e.to_string()))?;
                if !ids.contains(&id) {
                    return Err(invalid(field, format!("unknown vehicle {id}")));
                }
                if !seen.insert(id.clone()) {
                    return Err(invalid(field, format!("{id} is listed more than once")));
                }
                initial.entry(cluster).or_default().push(id);
            }
        }
        if let Some(total) = file.baseline.crl_total_entries {
            if total < seen.len() {
                return Err(invalid(
                    "baseline.crl_total_entries",
                    format!("smaller than the {} initially revoked certificates", seen.len()),
                ));
            }
        }
        Ok(ScenarioConfig {
            file,
            grid,
            initial,
            roster,
        })
    }

    pub fn name(&self) -> &str {
        &self.file.name
    }

    pub fn seed(&self) -> u64 {
        self.file.seed
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.file.seed = seed;
        self
    }

    pub fn with_t_end(mut self, t_end_s: f64) -> Result<Self, ScenarioError> {
        self.file.t_end_s = t_end_s;
        Self::from_file(self.file)
    }

    pub fn message_sizes(&self) -> MessageSizes {
        let mut sizes = MessageSizes {
            entry_size_bytes: self.file.entry_size_bytes,
            header_bytes: self.file.header_bytes,
            ..MessageSizes::default()
        };
        sizes.fixed.extend(self.file.message_sizes.iter().map(|(k, v)| (*k, *v)));
        sizes
    }

    pub fn initially_revoked(&self) -> usize {
        self.initial.values().map(Vec::len).sum()
    }

    pub fn sim_config(&self) -> SimConfig {
        let f = &self.file;
        SimConfig {
            scenario: f.name.clone(),
            seed: f.seed,
            broadcast_period: Duration::from_micros((f.broadcast_period_s * 1e6).round() as u64),
            channel: f.channel,
            sizes: self.message_sizes(),
            crl_background: f
                .baseline
                .crl_total_entries
                .map_or(0, |t| t.saturating_sub(self.initially_revoked())),
            crl_header_bytes: f.baseline.crl_header_bytes,
            distribution: f.baseline.distribution,
            config_echo: serde_json::to_value(f).expect("scenario serializes"),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.file).expect("scenario serializes")
    }
}
