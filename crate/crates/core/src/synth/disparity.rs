//! Plane-sweep disparity estimation.

use crate::error::{invalid, Result};
use crate::lightfield::{View, ViewSet};
use crate::refocus::{shift_view, Boundary, ShiftEngine};

/// Per-pixel disparity in pixels per unit angular step.
#[derive(Clone, Debug, PartialEq)]
pub struct DisparityMap {
    values: View,
    pub d_min: f64,
    pub d_max: f64,
    pub d_step: f64,
}

impl DisparityMap {
    pub fn constant(height: usize, width: usize, d: f64) -> Self {
        Self {
            values: View::filled(height, width, 1, d),
            d_min: d,
            d_max: d,
            d_step: 0.0,
        }
    }

    pub fn from_view(values: View, d_min: f64, d_max: f64, d_step: f64) -> Result<Self> {
        if values.channels() != 1 {
            return Err(invalid("disparity map must be single-channel"));
        }
        Ok(Self {
            values,
            d_min,
            d_max,
            d_step,
        })
    }

    pub fn height(&self) -> usize {
        self.values.height()
    }

    pub fn width(&self) -> usize {
        self.values.width()
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.values.get(y, x, 0)
    }

    pub fn as_view(&self) -> &View {
        &self.values
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepParams {
    pub d_min: f64,
    pub d_max: f64,
    pub d_step: f64,
    /// Odd side of the square SAD window.
    pub window: usize,
}

impl Default for SweepParams {
    fn default() -> Self {
        Self {
            d_min: -2.0,
            d_max: 2.0,
            d_step: 0.1,
            window: 7,
        }
    }
}

impl SweepParams {
    /// Candidate disparities ordered by `|d|`, then by value.
    pub fn candidates(&self) -> Result<Vec<f64>> {
        if !(self.d_step > 0.0) || !self.d_step.is_finite() {
            return Err(invalid(format!(
                "disparity step must be positive, got {}",
                self.d_step
            )));
        }
        if !(self.d_min <= self.d_max) {
            return Err(invalid(format!(
                "empty disparity range [{}, {}]",
                self.d_min, self.d_max
            )));
        }
        if self.window.is_multiple_of(2) {
            return Err(invalid(format!(
                "SAD window must be odd, got {}",
                self.window
            )));
        }
        let n = ((self.d_max - self.d_min) / self.d_step + 1e-9).floor() as usize;
        let snap = |d: f64| if d.abs() < 1e-9 * self.d_step { 0.0 } else { d };
        let mut out: Vec<f64> = (0..=n)
            .map(|k| snap(self.d_min + self.d_step * k as f64))
            .collect();
        out.sort_by(|a, b| a.abs().total_cmp(&b.abs()).then(a.total_cmp(b)));
        Ok(out)
    }
}

/// Mean absolute difference over a square window, clipped at the borders.
fn box_mean(cost: &[f64], h: usize, w: usize, window: usize) -> Vec<f64> {
    let r = (window / 2) as isize;
    let (hi, wi) = (h as isize, w as isize);
    let mut out = vec![0.0; h * w];
    for y in 0..hi {
        for x in 0..wi {
            let (y0, y1) = ((y - r).max(0), (y + r).min(hi - 1));
            let (x0, x1) = ((x - r).max(0), (x + r).min(wi - 1));
            let mut acc = 0.0;
            for yy in y0..=y1 {
                for xx in x0..=x1 {
                    acc += cost[(yy * wi + xx) as usize];
                }
            }
            out[(y * wi + x) as usize] = acc / ((y1 - y0 + 1) * (x1 - x0 + 1)) as f64;
        }
    }
    out
}

/// Scores every candidate `d` by aligning each non-center view onto the
/// center view and keeps the cheapest per pixel.
///
/// View `u` is modeled as `center(x + d·u)`, so it is aligned by translating
/// its content by `+d·u`.
pub fn plane_sweep_disparity(views: &ViewSet, params: &SweepParams) -> Result<DisparityMap> {
    let candidates = params.candidates()?;
    if views.len() < 2 {
        return Err(invalid("plane sweep needs at least two views"));
    }
    let center = views
        .center()
        .ok_or_else(|| invalid("plane sweep needs the center view"))?;
    let (h, w, c) = center.view.dims();
    let engine = ShiftEngine::bilinear(Boundary::Clamp);

    let mut best = View::zeros(h, w, 1);
    let mut best_cost = vec![f64::INFINITY; h * w];
    for &d in &candidates {
        let mut cost = vec![0.0; h * w];
        for sample in views.iter().filter(|s| s.index != center.index) {
            let (s, t) = sample.index.as_f64();
            let aligned = shift_view(&sample.view, (d * s, d * t), engine);
            for (i, px) in cost.iter_mut().enumerate() {
                for ch in 0..c {
                    *px += (aligned.data()[i * c + ch] - center.view.data()[i * c + ch]).abs();
                }
            }
        }
        let cost = box_mean(&cost, h, w, params.window);
        for (i, &v) in cost.iter().enumerate() {
            if v < best_cost[i] - 1e-12 * (1.0 + best_cost[i].abs()) || best_cost[i].is_infinite() {
                best_cost[i] = v;
                best.data_mut()[i] = d;
            }
        }
    }
    DisparityMap::from_view(best, params.d_min, params.d_max, params.d_step)
}
