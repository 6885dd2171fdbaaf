//! Closed-loop rollouts and the error and correlation metrics used to score them.

mod csv_out;
mod metrics;
mod rollout;

pub use csv_out::{write_columns_csv, write_correlation_csv, write_frame_series_csv, write_scalar_csv};
pub use metrics::{
    correlation_ensemble_stats, frame_residue, frame_residues, nearest_subvideo_distance,
    nearest_subvideo_distance_traj, pearson_lags, residue_norms, temporal_correlation, CorrelationSeries,
    ResidueNorm,
};
pub use rollout::{autoregressive_rollout, full_pipeline_rollout, RolloutResult};
