//! Registration quality metrics, degradations, synthetic scenes and the
//! sweep harness that ties them together.

mod degrade;
mod experiment;
mod metrics;
mod scene;

pub use degrade::{degrade, DegradationKind, DegradationSpec};
pub use experiment::{
    format_sig, run_experiment, ExperimentConfig, ExperimentReport, ExperimentRow, Method,
    CSV_HEADER,
};
pub use metrics::{cloud_to_cloud, rms_error, MetricReport, DEFAULT_METRIC_CAP};
pub use scene::{synth_scene, SceneParams, SyntheticScene};
