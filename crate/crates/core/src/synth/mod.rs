//! Desk-scale light-field synthesis: plane-sweep disparity, Lambertian
//! warping of the center view and a residual fitted under a chosen loss.

pub mod adam;
pub mod disparity;
pub mod experiment;
pub mod optimize;
pub mod scene;
pub mod warp;

pub use adam::{Adam, AdamParams};
pub use disparity::{plane_sweep_disparity, DisparityMap, SweepParams};
pub use experiment::{
    kfold_partition, prepare, run_experiment, scene_rng, ExperimentResult, ExperimentSetup,
    FoldReport, PipelineParams, Prepared, SceneOutcome,
};
pub use optimize::{optimize_residual, EpochRecord, SynthRun};
pub use scene::{occlusion_scene, SceneParams};
pub use warp::{warp_synthesize, warp_view};
