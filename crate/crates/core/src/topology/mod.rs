//! Square cluster grid, RSU placement and vehicle movement.
//!
//! Coordinates are meters with the origin at the south-west corner of the
//! grid; row 0 is the southern row.

mod grid;
mod mobility;

use thiserror::Error;

pub use grid::{
    build_grid, BoundingBox, ClusterCell, ClusterGrid, Corner, GreyAreaRegion, GridSpec, Location,
    Point, RsuPlacement, RsuRole,
};
pub use mobility::{
    advance, initial_arrival, random_road_itinerary, Arrival, MobilityEvent, ScriptedAction,
    ScriptedEvent, TimedEvent, VehicleItinerary, Waypoint, MAX_SPEED_MPS,
};

#[derive(Debug, Error, PartialEq)]
pub enum TopologyError {
    #[error("bad grid: {0}")]
    BadDimensions(String),
    #[error("point ({x}, {y}) is outside the grid")]
    OutOfBounds { x: f64, y: f64 },
    #[error("itinerary of {vehicle}: {reason}")]
    BadItinerary { vehicle: String, reason: String },
}
