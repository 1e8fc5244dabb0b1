//! Neuro-inspired SLAM pipeline.
//!
//! Column-profile visual odometry and view templates feed a rate-based
//! pose-cell attractor network with path integration and loop-closure
//! injection. Experiences are linked into a map that is relaxed after the run.

mod expmap;
mod pipeline;
mod posecells;
mod rawseq;
mod vision;
mod world;

pub use expmap::{expmap_relax, expmap_update, wrap_angle, EdgeKind, Experience, ExperienceEdge, ExperienceMap, Observation, Pose};
pub use pipeline::{
    edges_csv, nodes_csv, path_csv, run_sequence, run_slam, OpCounts, PathRow, SlamConfig, SlamInput, SlamMetrics, SlamRun,
    CHIP_OPS_PER_JOULE, CHIP_POWER_MW, PATH_CSV_HEADER,
};
pub use posecells::{
    can_step, inject, packet_centroid, path_integrate, ring_delta, rotate_heading, ExcitationKernel, HeadDirectionRing,
    PoseCellGrid,
};
pub use vision::{
    best_shift, profile, shifted_difference, template_match, vo_estimate, IntensityImage, OdometryEstimate,
    TemplateMatch, ViewTemplate, VoConfig,
};
pub use rawseq::{load_raw_sequence, save_raw_sequence, MANIFEST};
pub use world::SyntheticWorld;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SlamError {
    #[error("invalid image: {0}")]
    Image(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("pose-cell activity vanished")]
    DeadNetwork,
    #[error("experience {0} does not exist")]
    DanglingExperience(usize),
    #[error("i/o: {0}")]
    Io(String),
    #[error("line {line}: {msg}")]
    World { line: usize, msg: String },
}
