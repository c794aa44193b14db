use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::report::RunReport;
use super::scenario::ScenarioConfig;
use crate::engine::{EngineError, Simulation};
use crate::time::SimTime;

#[derive(Debug, Error)]
pub enum RunError {
    /// The trace written before the failure is kept for diagnosis.
    #[error("engine failure after {} trace lines: {error}", trace_prefix.len())]
    Engine {
        error: EngineError,
        trace_prefix: Vec<String>,
    },
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: RunReport,
    pub trace: Vec<String>,
}

impl RunOutput {
    pub fn trace_text(&self) -> String {
        let mut s = self.trace.join("\n");
        s.push('\n');
        s
    }

    pub fn trace_digest(&self) -> String {
        hex::encode(Sha256::digest(self.trace_text().as_bytes()))
    }

    pub fn write_trace(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.trace_text())
    }
}

pub fn build_simulation(cfg: &ScenarioConfig) -> Result<Simulation, RunError> {
    Simulation::new(cfg.grid.clone(), &cfg.initial, cfg.roster.clone(), cfg.sim_config()).map_err(|error| {
        RunError::Engine {
            error,
            trace_prefix: Vec::new(),
        }
    })
}

/// Runs a prepared simulation to the scenario's end time.
pub fn drive(mut sim: Simulation, cfg: &ScenarioConfig) -> Result<RunOutput, RunError> {
    match sim.run_until(SimTime::from_secs_f64(cfg.file.t_end_s)) {
        Ok(()) => {
            let (report, trace) = sim.finish();
            Ok(RunOutput { report, trace })
        }
        Err(error) => Err(RunError::Engine {
            error,
            trace_prefix: sim.trace_lines().to_vec(),
        }),
    }
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutput, RunError> {
    drive(build_simulation(cfg)?, cfg)
}
