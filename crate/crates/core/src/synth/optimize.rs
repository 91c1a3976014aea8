//! Residual optimization: prediction = `L0 + θ`, `θ` fitted with Adam.

use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::lightfield::{LightField, ViewSet};
use crate::losses::{value_and_gradient, LossSpec};

use super::adam::{Adam, AdamParams};

/// Loss terms evaluated at the start of an epoch, before the update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub vwe_term: f64,
    pub rie_term: f64,
}

#[derive(Clone, Debug)]
pub struct SynthRun {
    /// Input views, when the run came from the full pipeline.
    pub inputs: Option<ViewSet>,
    pub spec: LossSpec,
    pub adam: AdamParams,
    pub history: Vec<EpochRecord>,
    pub prediction: LightField,
    pub elapsed: Duration,
}

impl SynthRun {
    pub fn initial_loss(&self) -> Option<f64> {
        self.history.first().map(|r| r.loss)
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.history.last().map(|r| r.loss)
    }

    /// `epoch,loss,vwe_term,rie_term` with a header line.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("epoch,loss,vwe_term,rie_term\n");
        for r in &self.history {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.epoch, r.loss, r.vwe_term, r.rie_term
            ));
        }
        out
    }
}

pub fn optimize_residual(
    l0: &LightField,
    gt: &LightField,
    spec: &LossSpec,
    adam: &AdamParams,
) -> Result<SynthRun> {
    l0.check_same_shape(gt)?;
    spec.validate()?;
    let start = Instant::now();
    let mut opt = Adam::new(*adam, l0.samples().count())?;
    let mut theta = vec![0.0; l0.samples().count()];
    let mut pred = l0.clone();
    let mut history = Vec::with_capacity(adam.epochs);
    for epoch in 0..adam.epochs {
        let (value, grad) = value_and_gradient(&pred, gt, spec)?;
        if !value.total.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                value: value.total,
            });
        }
        history.push(EpochRecord {
            epoch,
            loss: value.total,
            vwe_term: value.vwe_term,
            rie_term: value.refocus_term,
        });
        let g: Vec<f64> = grad.samples().collect();
        opt.step(&mut theta, &g);
        for ((p, base), t) in pred.samples_mut().zip(l0.samples()).zip(&theta) {
            *p = base + t;
        }
    }
    Ok(SynthRun {
        inputs: None,
        spec: *spec,
        adam: *adam,
        history,
        prediction: pred,
        elapsed: start.elapsed(),
    })
}
