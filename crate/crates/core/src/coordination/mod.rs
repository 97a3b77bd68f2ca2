//! Eye-body coordination statistics: cosine-similarity tables, lag sweeps,
//! gaze-in-head distributions, clustering and rank correlations.

mod field;
mod kmeans;
mod lag;
mod stats;
mod tables;

pub use field::{
    gaze_in_head_angles, gaze_in_head_series, smoothed_distribution, GazeFieldGrid, GridConfig,
    DEFAULT_WORLD_UP,
};
pub use kmeans::{kmeans, KMeansResult};
pub use lag::{amplitude_lag_correlation, head_lag_curve, lag_sweep, motion_lag_curve, LagCurve};
pub use stats::{amplitude_series, spearman};
pub use tables::{
    bodypart_summary, cosine_similarity, gaze_motion_table, gaze_orientation_table,
    interbody_direction_table, CorrelationTable, DirectionSequence, PartSummary,
};
