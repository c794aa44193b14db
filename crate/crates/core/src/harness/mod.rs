//! Scenario files, run orchestration, reports and the trace recount.

pub mod bundled;
pub mod generator;
pub mod replay;
pub mod report;
pub mod run;
pub mod scenario;
