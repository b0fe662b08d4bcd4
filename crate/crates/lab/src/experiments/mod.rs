//! Experiment orchestration over the core trainer and solvers.

mod additivity;
mod geometry;
mod sweep;
mod tiling;

pub use additivity::{
    additivity_check, AdditivityError, AdditivityOptions, AdditivityReport, PartLoss,
};
pub use geometry::{
    decoder_geometry, random_median_baseline, random_unit_columns, GeometryError, GeometryReport,
    Histogram, HIGH_SIMILARITY,
};
pub use sweep::{run_sweep, SweepError, SweepOptions, SweepPoint, SweepResult};
pub use tiling::{analyze_arcs, circle_tiling, ArcReport, LatentArc, ARC_GRID};
