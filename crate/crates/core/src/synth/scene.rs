//! Procedural scenes with two depth layers.
//!
//! A textured background plane sits behind a textured square. View `u` sees
//! each layer translated by its own disparity, `L_u(x) = layer(x + d·u)`, and
//! the square hides the background wherever it lands, so the views contain
//! occlusion boundaries that a single-disparity warp cannot reproduce.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{invalid, Result};
use crate::lightfield::{LightField, View};

/// Smooth random texture `(y, x, channel) -> [0.05, 0.95]`.
pub fn texture<R: Rng>(rng: &mut R, channels: usize) -> impl Fn(f64, f64, usize) -> f64 {
    const WAVES: usize = 4;
    let waves: Vec<[f64; 4]> = (0..channels * WAVES)
        .map(|_| {
            let freq = rng.gen_range(0.25..0.9);
            let angle = rng.gen_range(0.0..PI);
            let phase = rng.gen_range(0.0..2.0 * PI);
            let amp = rng.gen_range(0.5..1.0);
            [freq * angle.sin(), freq * angle.cos(), phase, amp]
        })
        .collect();
    move |y: f64, x: f64, c: usize| {
        let set = &waves[c * WAVES..(c + 1) * WAVES];
        let norm: f64 = set.iter().map(|w| w[3]).sum();
        let v: f64 = set
            .iter()
            .map(|w| w[3] * (w[0] * y + w[1] * x + w[2]).sin())
            .sum::<f64>()
            / norm;
        0.5 + 0.45 * v
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SceneParams {
    pub radius: usize,
    pub size: usize,
    pub channels: usize,
    pub background_disparity: f64,
    pub foreground_disparity: f64,
    /// Side of the foreground square as a fraction of `size`.
    pub foreground_extent: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            radius: 2,
            size: 32,
            channels: 3,
            background_disparity: -0.5,
            foreground_disparity: 1.0,
            foreground_extent: 0.4,
        }
    }
}

/// Renders one scene; the square's position and both textures come from `rng`.
pub fn occlusion_scene<R: Rng>(rng: &mut R, params: &SceneParams) -> Result<LightField> {
    if params.size == 0 || !(params.channels == 1 || params.channels == 3) {
        return Err(invalid(format!("bad scene parameters {params:?}")));
    }
    if !(0.0..1.0).contains(&params.foreground_extent) {
        return Err(invalid("foreground extent must be in [0, 1)"));
    }
    let back = texture(rng, params.channels);
    let front = texture(rng, params.channels);
    let n = params.size as f64;
    let side = params.foreground_extent * n;
    let y0 = rng.gen_range(0.2 * n..(0.8 * n - side).max(0.2 * n + 1.0));
    let x0 = rng.gen_range(0.2 * n..(0.8 * n - side).max(0.2 * n + 1.0));
    let inside = |y: f64, x: f64| y >= y0 && y < y0 + side && x >= x0 && x < x0 + side;
    let (db, df) = (params.background_disparity, params.foreground_disparity);
    LightField::from_fn(params.radius, |a| {
        let (s, t) = a.as_f64();
        View::from_fn(params.size, params.size, params.channels, |y, x, c| {
            let (fy, fx) = (y as f64 + df * t, x as f64 + df * s);
            if inside(fy, fx) {
                front(fy, fx, c)
            } else {
                back(y as f64 + db * t, x as f64 + db * s, c)
            }
        })
    })
}
