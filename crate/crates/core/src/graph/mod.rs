//! Multi-region graph built over the ROI pulse signals, MAP smoothing on it,
//! and learning of the metric blend weights.

mod denoise;
mod metrics;
mod weights;

pub use denoise::{build_adjacency, laplacian, map_denoise, map_energy, GraphModel, DEFAULT_LAMBDA};
pub use metrics::{
    d_metric, node_quality, q_metric, quality_weight, r_metric, regional_correlation, GraphMetrics, NodeQuality,
    CONSISTENCY_STEP_S, CONSISTENCY_WINDOW_S, HIGH_QUALITY_WEIGHT, LOW_QUALITY_WEIGHT, Q_ANY_LOW, Q_CROSS_REGION_HIGH,
    Q_SAME_REGION_HIGH,
};
pub use weights::{map_objective, optimize_weights, softmax, OptimizerParams, WeightFit};
