//! Numerical self-checks shared by the command line and the test suites.

use rand::Rng;

use crate::error::Result;
use crate::lightfield::{LightField, View};
use crate::losses::{combined_loss, loss_gradient, LossSpec, Norm};

/// `|value − reference| / |reference|`, or `|value|` when the reference is zero.
pub fn relative_error(value: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        value.abs()
    } else {
        (value - reference).abs() / reference.abs()
    }
}

/// Uniform random light field in `[0, 1)`.
pub fn random_lightfield<R: Rng>(
    rng: &mut R,
    radius: usize,
    h: usize,
    w: usize,
    c: usize,
) -> Result<LightField> {
    LightField::from_fn(radius, |_| View::from_fn(h, w, c, |_, _, _| rng.gen()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradientCheck {
    /// `max |analytic − numeric| / max |numeric|` over compared samples.
    pub max_rel_err: f64,
    pub compared: usize,
    /// Samples skipped because a kink of the loss lies within `±h`.
    pub excluded: usize,
}

/// Compares [`loss_gradient`] with central differences of step `h` on every
/// sample. For the L1 norm, samples whose one-sided differences disagree are
/// treated as kinks and skipped.
pub fn gradient_check(
    lhat: &LightField,
    l: &LightField,
    spec: &LossSpec,
    h: f64,
) -> Result<GradientCheck> {
    let analytic: Vec<f64> = loss_gradient(lhat, l, spec)?.samples().collect();
    let f0 = combined_loss(lhat, l, spec)?;
    let mut probe = lhat.clone();
    let n = analytic.len();
    let mut numeric = Vec::with_capacity(n);
    let mut one_sided_gap = Vec::with_capacity(n);
    for i in 0..n {
        let orig = probe.samples().nth(i).expect("index in range");
        set_sample(&mut probe, i, orig + h);
        let fp = combined_loss(&probe, l, spec)?;
        set_sample(&mut probe, i, orig - h);
        let fm = combined_loss(&probe, l, spec)?;
        set_sample(&mut probe, i, orig);
        numeric.push((fp - fm) / (2.0 * h));
        one_sided_gap.push(((fp - f0) / h - (f0 - fm) / h).abs());
    }
    let scale = numeric.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut worst = 0.0f64;
    let mut compared = 0;
    let mut excluded = 0;
    for i in 0..n {
        if spec.norm == Norm::L1 && one_sided_gap[i] > 1e-6 * scale {
            excluded += 1;
            continue;
        }
        compared += 1;
        worst = worst.max((analytic[i] - numeric[i]).abs());
    }
    Ok(GradientCheck {
        max_rel_err: if scale == 0.0 { worst } else { worst / scale },
        compared,
        excluded,
    })
}

fn set_sample(lf: &mut LightField, i: usize, value: f64) {
    *lf.samples_mut().nth(i).expect("index in range") = value;
}
