//! End-to-end comparison of loss configurations.
//!
//! Every scene is cut into sub-lightfields of `window × window` views. From
//! each sub-lightfield the center and corner views are fed to the plane
//! sweep, the center view is warped to an `(2·output_radius + 1)²` light
//! field, and the residual is optimized against the central views of the
//! sub-lightfield once per loss configuration.

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::lightfield::{AngularIndex, LightField, ViewSet};
use crate::losses::{LossSpec, RieParams};
use crate::metrics::{aggregate, quality_report, Aggregate, QualityReport};
use crate::refocus::Boundary;

use super::adam::AdamParams;
use super::disparity::{plane_sweep_disparity, DisparityMap, SweepParams};
use super::optimize::{optimize_residual, EpochRecord};
use super::warp::warp_synthesize;

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineParams {
    /// Side of the extracted sub-lightfields.
    pub window: usize,
    /// Angular radius of the synthesized light field.
    pub output_radius: usize,
    pub sweep: SweepParams,
    pub warp_boundary: Boundary,
    pub adam: AdamParams,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            window: 5,
            output_radius: 1,
            sweep: SweepParams::default(),
            warp_boundary: Boundary::Clamp,
            adam: AdamParams::default(),
        }
    }
}

/// Everything the optimizer needs for one sub-lightfield.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub inputs: ViewSet,
    pub disparity: DisparityMap,
    pub initial: LightField,
    pub target: LightField,
    /// Views of `target` that are not inputs.
    pub synthesized: Vec<AngularIndex>,
}

pub fn prepare(sub: &LightField, params: &PipelineParams) -> Result<Prepared> {
    if params.output_radius > sub.radius() {
        return Err(invalid(format!(
            "output radius {} exceeds sub-lightfield radius {}",
            params.output_radius,
            sub.radius()
        )));
    }
    let inputs = sub.sample_inputs()?;
    let disparity = plane_sweep_disparity(&inputs, &params.sweep)?;
    let center = &inputs
        .center()
        .expect("sample_inputs includes the center")
        .view;
    let initial = warp_synthesize(
        center,
        &disparity,
        params.output_radius,
        params.warp_boundary,
    )?;
    let target = sub.central(params.output_radius)?;
    let given = inputs.indices();
    let synthesized = crate::lightfield::angular_indices(params.output_radius)
        .filter(|u| !given.contains(u))
        .collect();
    Ok(Prepared {
        inputs,
        disparity,
        initial,
        target,
        synthesized,
    })
}

/// Contiguous folds; the first `n % k` folds get one extra scene.
pub fn kfold_partition(n: usize, k: usize) -> Result<Vec<Range<usize>>> {
    if k == 0 || k > n {
        return Err(invalid(format!("cannot split {n} scenes into {k} folds")));
    }
    let (base, extra) = (n / k, n % k);
    let mut start = 0;
    Ok((0..k)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect())
}

/// Per-scene RNG derived from the master seed and the scene index.
pub fn scene_rng(master_seed: u64, scene: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(scene as u64 + 1);
    rng
}

#[derive(Clone, Debug)]
pub struct ExperimentSetup {
    pub configs: Vec<LossSpec>,
    /// Refocus parameters of the report sweep.
    pub r_sweep: Vec<f64>,
    /// Engine and defaults used to refocus in reports.
    pub report_rie: RieParams,
    pub kfold: Option<usize>,
    pub pipeline: PipelineParams,
}

/// Result of one configuration on one scene (averaged over its sub-lightfields).
#[derive(Clone, Debug)]
pub struct SceneOutcome {
    pub scene: usize,
    pub config: String,
    pub report: QualityReport,
    /// Loss history of every sub-lightfield, in extraction order.
    pub histories: Vec<Vec<EpochRecord>>,
}

#[derive(Clone, Debug)]
pub struct FoldReport {
    pub fold: usize,
    pub scenes: Range<usize>,
    /// One scene-mean report per configuration, in configuration order.
    pub reports: Vec<QualityReport>,
}

#[derive(Clone, Debug, Default)]
pub struct ExperimentResult {
    /// Successful runs ordered by scene, then configuration.
    pub outcomes: Vec<SceneOutcome>,
    /// `(scene, message)` for every scene that failed.
    pub failures: Vec<(usize, String)>,
    pub folds: Vec<FoldReport>,
}

impl ExperimentResult {
    pub fn scene_reports(&self, config: &str) -> Vec<&QualityReport> {
        self.outcomes
            .iter()
            .filter(|o| o.config == config)
            .map(|o| &o.report)
            .collect()
    }

    /// Combined report per configuration over all successful scenes.
    pub fn summary(&self, configs: &[LossSpec], mode: Aggregate) -> Result<Vec<QualityReport>> {
        configs
            .iter()
            .map(|c| {
                let reports: Vec<QualityReport> = self
                    .scene_reports(&c.label())
                    .into_iter()
                    .cloned()
                    .collect();
                aggregate(&reports, mode)
            })
            .collect()
    }
}

/// Report and per-sub-lightfield histories of one configuration on one scene.
type ConfigRun = (QualityReport, Vec<Vec<EpochRecord>>);

fn run_scene(scene: &LightField, setup: &ExperimentSetup) -> Result<Vec<ConfigRun>> {
    let subs = scene.extract_sublightfields(setup.pipeline.window)?;
    let prepared = subs
        .iter()
        .map(|s| prepare(s, &setup.pipeline))
        .collect::<Result<Vec<_>>>()?;
    setup
        .configs
        .iter()
        .map(|spec| {
            let mut reports = Vec::with_capacity(prepared.len());
            let mut histories = Vec::with_capacity(prepared.len());
            for p in &prepared {
                let run = optimize_residual(&p.initial, &p.target, spec, &setup.pipeline.adam)?;
                let report = quality_report(
                    &run.prediction,
                    &p.target,
                    &p.synthesized,
                    &setup.report_rie,
                    &setup.r_sweep,
                )?
                .labeled(spec.label());
                reports.push(report);
                histories.push(run.history);
            }
            Ok((aggregate(&reports, Aggregate::SceneMean)?, histories))
        })
        .collect()
}

pub fn run_experiment(dataset: &[LightField], setup: &ExperimentSetup) -> Result<ExperimentResult> {
    if dataset.is_empty() {
        return Err(invalid("experiment needs at least one scene"));
    }
    if setup.configs.is_empty() {
        return Err(invalid("experiment needs at least one loss configuration"));
    }
    for c in &setup.configs {
        c.validate()?;
    }
    let folds = setup
        .kfold
        .map(|k| kfold_partition(dataset.len(), k))
        .transpose()?;

    let per_scene: Vec<Result<Vec<ConfigRun>>> = dataset
        .par_iter()
        .map(|scene| run_scene(scene, setup))
        .collect();

    let mut result = ExperimentResult::default();
    for (i, outcome) in per_scene.into_iter().enumerate() {
        match outcome {
            Ok(rows) => {
                for (spec, (report, histories)) in setup.configs.iter().zip(rows) {
                    result.outcomes.push(SceneOutcome {
                        scene: i,
                        config: spec.label(),
                        report,
                        histories,
                    });
                }
            }
            Err(e) => result.failures.push((i, e.to_string())),
        }
    }

    for (f, range) in folds.into_iter().flatten().enumerate() {
        let mut reports = Vec::with_capacity(setup.configs.len());
        for spec in &setup.configs {
            let label = spec.label();
            let members: Vec<QualityReport> = result
                .outcomes
                .iter()
                .filter(|o| range.contains(&o.scene) && o.config == label)
                .map(|o| o.report.clone())
                .collect();
            if !members.is_empty() {
                reports.push(aggregate(&members, Aggregate::SceneMean)?);
            }
        }
        result.folds.push(FoldReport {
            fold: f,
            scenes: range,
            reports,
        });
    }
    Ok(result)
}
