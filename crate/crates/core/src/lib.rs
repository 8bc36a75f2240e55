//! Grand-canonical hard-plate model on the continuum: plates of size
//! `1 × k^α × k` in six axis-aligned orientations, Monte Carlo sampling,
//! coarse-grained contour analysis and low-density expansions.

pub mod coarsegrain;
pub mod configuration;
pub mod error;
pub mod expansion;
pub mod gcmc;
pub mod geometry;
pub mod stats;

pub use configuration::{BoundaryMode, PlateHandle, PlateSet, SimBox};
pub use error::{Error, Result};
pub use geometry::{ModelParams, Orientation, Plate, PlateType, ScalingClass};
