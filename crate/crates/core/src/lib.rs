//! Range-view LiDAR super-resolution toolkit.
//!
//! Low-resolution (16-row) scans are projected into range images,
//! upsampled to 64 rows by an unrolled half-quadratic-splitting solver
//! with a pluggable denoiser prior, segmented into ground and obstacle
//! instances, and back-projected to labeled point clouds. The
//! [`pipeline`] module runs that chain as a staged real-time dataflow
//! with file and JSON-stream outputs.

pub mod config;
pub mod eval;
pub mod io;
pub mod pipeline;
pub mod rangeview;
pub mod sampling;
pub mod segment;
pub mod solver;

pub use config::RunConfig;
pub use rangeview::{Point, PointCloud, ProjectionConfig, RangeImage};
pub use sampling::RowSelection;
pub use segment::{LabelImage, LabeledCloud, SegmenterConfig};
pub use solver::{DenoiserPrior, SolverConfig};
