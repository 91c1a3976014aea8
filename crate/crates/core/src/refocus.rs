//! Sub-pixel view shifting and shift-and-add refocusing.
//!
//! Sign conventions, since they are easy to get backwards:
//!
//! * [`shift_view`] with `delta = (dx, dy)` *moves content* by `+delta`:
//!   `out(x) = in(x - delta)`. On a 1D row `[0, 1, 0]` a shift of `+0.5`
//!   gives `[0, 0.5, 0.5]`.
//! * Refocusing at `r` samples every view at `x + r·s`:
//!
//! ```text
//!   R(L, r)(x) = 1/(2N+1)² Σ_s L_s(x + r·s)
//!
//!   view s = (+1, 0), r = 1:   L_s content  . . A . .
//!                              after shift   . A . . .   (moved by -r·s)
//! ```
//!
//!   which is [`shift_view`] with `delta = -r·s`.
//!
//! The spectral engine multiplies by `e^{-jω'·delta}` on the grid described
//! in [`crate::fft`]; it is an exact circular translation except on the
//! self-conjugate Nyquist bins of even-sized axes, which are scaled by
//! `cos(ω'·delta)`.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::error::{invalid, shape_mismatch, Result};
use crate::fft::{shift_multiplier, Fft2, FrequencyGrid};
use crate::lightfield::{angular_indices, LightField, View};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ShiftMode {
    SpatialBilinear,
    SpectralPhase,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Boundary {
    /// Edge replication.
    Clamp,
    /// Periodic wrap-around.
    Circular,
}

/// Interpolation scheme plus boundary policy for fractional shifts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ShiftEngine {
    mode: ShiftMode,
    boundary: Boundary,
}

impl ShiftEngine {
    pub fn new(mode: ShiftMode, boundary: Boundary) -> Result<Self> {
        if mode == ShiftMode::SpectralPhase && boundary != Boundary::Circular {
            return Err(invalid("spectral-phase shifting is inherently circular"));
        }
        Ok(Self { mode, boundary })
    }

    pub const fn spectral() -> Self {
        Self {
            mode: ShiftMode::SpectralPhase,
            boundary: Boundary::Circular,
        }
    }

    pub const fn bilinear(boundary: Boundary) -> Self {
        Self {
            mode: ShiftMode::SpatialBilinear,
            boundary,
        }
    }

    pub fn mode(&self) -> ShiftMode {
        self.mode
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Short name used in manifests and on the command line.
    pub fn name(&self) -> &'static str {
        match (self.mode, self.boundary) {
            (ShiftMode::SpectralPhase, _) => "spectral",
            (ShiftMode::SpatialBilinear, Boundary::Clamp) => "spatial",
            (ShiftMode::SpatialBilinear, Boundary::Circular) => "spatial-circular",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "spectral" | "spectral-phase" => Ok(Self::spectral()),
            "spatial" | "spatial-clamp" | "spatial-bilinear" | "bilinear" => {
                Ok(Self::bilinear(Boundary::Clamp))
            }
            "spatial-circular" => Ok(Self::bilinear(Boundary::Circular)),
            other => Err(invalid(format!("unknown shift engine `{other}`"))),
        }
    }
}

impl Default for ShiftEngine {
    fn default() -> Self {
        Self::spectral()
    }
}

impl std::fmt::Display for ShiftEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Refocus parameter plus the engine used to realize fractional shifts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefocusSpec {
    pub r: f64,
    pub engine: ShiftEngine,
}

impl RefocusSpec {
    pub fn new(r: f64, engine: ShiftEngine) -> Result<Self> {
        if !r.is_finite() {
            return Err(invalid(format!(
                "refocus parameter must be finite, got {r}"
            )));
        }
        Ok(Self { r, engine })
    }
}

/// Translates the content of `v` by `delta = (dx, dy)` pixels.
pub fn shift_view(v: &View, delta: (f64, f64), engine: ShiftEngine) -> View {
    match engine.mode {
        ShiftMode::SpatialBilinear => bilinear_shift(v, delta, engine.boundary, false),
        ShiftMode::SpectralPhase => spectral_shift(v, delta),
    }
}

/// Transpose of [`shift_view`] for the same `delta`.
pub fn shift_view_adjoint(g: &View, delta: (f64, f64), engine: ShiftEngine) -> View {
    match engine.mode {
        ShiftMode::SpatialBilinear => bilinear_shift(g, delta, engine.boundary, true),
        ShiftMode::SpectralPhase => spectral_shift(g, (-delta.0, -delta.1)),
    }
}

/// Source taps for one axis: `(i0, i1, frac)` per output coordinate.
fn axis_taps(n: usize, d: f64, boundary: Boundary) -> (Vec<(usize, usize)>, f64) {
    let base = (-d).floor();
    let frac = -d - base;
    let offset = base as i64;
    let wrap = |i: i64| -> usize {
        match boundary {
            Boundary::Clamp => i.clamp(0, n as i64 - 1) as usize,
            Boundary::Circular => i.rem_euclid(n as i64) as usize,
        }
    };
    let taps = (0..n as i64)
        .map(|x| (wrap(x + offset), wrap(x + offset + 1)))
        .collect();
    (taps, frac)
}

fn bilinear_shift(v: &View, (dx, dy): (f64, f64), boundary: Boundary, transpose: bool) -> View {
    let (h, w, c) = v.dims();
    let (xt, fx) = axis_taps(w, dx, boundary);
    let (yt, fy) = axis_taps(h, dy, boundary);
    let weights = [
        (1.0 - fy) * (1.0 - fx),
        (1.0 - fy) * fx,
        fy * (1.0 - fx),
        fy * fx,
    ];
    let src = v.data();
    let mut out = View::zeros(h, w, c);
    let dst = out.data_mut();
    for (y, &(y0, y1)) in yt.iter().enumerate() {
        for (x, &(x0, x1)) in xt.iter().enumerate() {
            let taps = [(y0, x0), (y0, x1), (y1, x0), (y1, x1)];
            let o = (y * w + x) * c;
            if transpose {
                for (&(ty, tx), &wt) in taps.iter().zip(&weights) {
                    let i = (ty * w + tx) * c;
                    for ch in 0..c {
                        dst[i + ch] += wt * src[o + ch];
                    }
                }
            } else {
                for ch in 0..c {
                    let mut acc = 0.0;
                    for (&(ty, tx), &wt) in taps.iter().zip(&weights) {
                        acc += wt * src[(ty * w + tx) * c + ch];
                    }
                    dst[o + ch] = acc;
                }
            }
        }
    }
    out
}

fn spectral_shift(v: &View, (dx, dy): (f64, f64)) -> View {
    let (h, w, c) = v.dims();
    let plan = Fft2::plan(h, w);
    let grid = plan.grid();
    let mut out = View::zeros(h, w, c);
    for ch in 0..c {
        let mut buf = plan.forward_real_channel(v.data(), c, ch);
        for (bin, z) in buf.iter_mut().enumerate() {
            *z *= shift_multiplier(grid, bin, dx, dy);
        }
        plan.inverse(&mut buf);
        write_real_channel(&mut out, &buf, ch);
    }
    out
}

fn write_real_channel(out: &mut View, buf: &[Complex64], ch: usize) {
    let c = out.channels();
    let data = out.data_mut();
    for (i, z) in buf.iter().enumerate() {
        debug_assert!(
            z.im.abs() < 1e-9,
            "imaginary residue {} after inverse transform",
            z.im
        );
        data[i * c + ch] = z.re;
    }
}

/// Refocuses `lf` at `spec.r` by shift-and-add.
pub fn shift_and_add(lf: &LightField, spec: &RefocusSpec) -> View {
    Refocuser::new(lf, spec.engine).refocus(spec.r)
}

/// Per-`r` separable phase tables for the spectral engine.
struct PhaseTables {
    x: Vec<Complex64>,
    y: Vec<Complex64>,
    nx: usize,
    ny: usize,
    radius: i32,
}

impl PhaseTables {
    /// Tables of `e^{j r ω s}` for every angular offset and axis frequency,
    /// i.e. the multiplier of a shift by `-r·s`.
    fn new(grid: &FrequencyGrid, radius: usize, r: f64) -> Self {
        let n = radius as i32;
        let build = |values: &[f64]| -> Vec<Complex64> {
            (-n..=n)
                .flat_map(|s| {
                    values
                        .iter()
                        .map(move |&w| Complex64::from_polar(1.0, r * w * s as f64))
                })
                .collect()
        };
        Self {
            x: build(grid.wx_values()),
            y: build(grid.wy_values()),
            nx: grid.wx_values().len(),
            ny: grid.wy_values().len(),
            radius: n,
        }
    }

    #[inline]
    fn multiplier(&self, grid: &FrequencyGrid, bin: usize, s: i32, t: i32) -> Complex64 {
        let (iy, ix) = grid.axis_indices(bin);
        let m = self.x[(s + self.radius) as usize * self.nx + ix]
            * self.y[(t + self.radius) as usize * self.ny + iy];
        if grid.is_self_conjugate(bin) {
            Complex64::new(m.re, 0.0)
        } else {
            m
        }
    }
}

/// Shift-and-add evaluator that can be queried at many `r` values.
///
/// The spectral engine transforms every view once and combines spectra per
/// query, so a quadrature over thousands of nodes costs one inverse transform
/// per node and channel.
pub struct Refocuser<'a> {
    field: &'a LightField,
    engine: ShiftEngine,
    spectra: Vec<Vec<Complex64>>,
}

impl<'a> Refocuser<'a> {
    pub fn new(field: &'a LightField, engine: ShiftEngine) -> Self {
        let spectra = match engine.mode {
            ShiftMode::SpatialBilinear => Vec::new(),
            ShiftMode::SpectralPhase => {
                let (h, w, c) = field.view_dims();
                let plan = Fft2::plan(h, w);
                field
                    .views()
                    .iter()
                    .map(|v| {
                        (0..c)
                            .flat_map(|ch| plan.forward_real_channel(v.data(), c, ch))
                            .collect()
                    })
                    .collect()
            }
        };
        Self {
            field,
            engine,
            spectra,
        }
    }

    pub fn engine(&self) -> ShiftEngine {
        self.engine
    }

    pub fn refocus(&self, r: f64) -> View {
        match self.engine.mode {
            ShiftMode::SpatialBilinear => self.refocus_spatial(r),
            ShiftMode::SpectralPhase => self.refocus_spectral(r),
        }
    }

    fn refocus_spatial(&self, r: f64) -> View {
        let (h, w, c) = self.field.view_dims();
        let mut acc = View::zeros(h, w, c);
        for (idx, v) in self.field.iter() {
            let (s, t) = idx.as_f64();
            let shifted = shift_view(v, (-r * s, -r * t), self.engine);
            acc.axpy(1.0, &shifted);
        }
        let inv = 1.0 / self.field.view_count() as f64;
        acc.map(|x| x * inv)
    }

    fn refocus_spectral(&self, r: f64) -> View {
        let (h, w, c) = self.field.view_dims();
        let plan = Fft2::plan(h, w);
        let grid = plan.grid();
        let hw = h * w;
        let tables = PhaseTables::new(grid, self.field.radius(), r);
        let mut acc = vec![Complex64::default(); hw * c];
        for (idx, spec) in angular_indices(self.field.radius()).zip(&self.spectra) {
            for bin in 0..hw {
                let m = tables.multiplier(grid, bin, idx.s, idx.t);
                for ch in 0..c {
                    acc[ch * hw + bin] += m * spec[ch * hw + bin];
                }
            }
        }
        let inv = 1.0 / self.field.view_count() as f64;
        let mut out = View::zeros(h, w, c);
        for ch in 0..c {
            let buf = &mut acc[ch * hw..(ch + 1) * hw];
            plan.inverse(buf);
            for z in buf.iter_mut() {
                *z *= inv;
            }
            write_real_channel(&mut out, buf, ch);
        }
        out
    }
}

/// Accumulates `Σ_k weight_k · Rᵀ(g_k, r_k)` for a fixed angular radius.
pub struct AdjointAccumulator {
    radius: usize,
    dims: (usize, usize, usize),
    engine: ShiftEngine,
    spatial: Option<LightField>,
    spectral: Vec<Vec<Complex64>>,
}

impl AdjointAccumulator {
    pub fn new(radius: usize, dims: (usize, usize, usize), engine: ShiftEngine) -> Self {
        let (h, w, c) = dims;
        let side = 2 * radius + 1;
        let (spatial, spectral) = match engine.mode {
            ShiftMode::SpatialBilinear => {
                (Some(LightField::constant(radius, h, w, c, 0.0)), Vec::new())
            }
            ShiftMode::SpectralPhase => (
                None,
                vec![vec![Complex64::default(); h * w * c]; side * side],
            ),
        };
        Self {
            radius,
            dims,
            engine,
            spatial,
            spectral,
        }
    }

    /// Adds `weight · Rᵀ(g, r)`.
    pub fn add(&mut self, g: &View, r: f64, weight: f64) -> Result<()> {
        if g.dims() != self.dims {
            return Err(shape_mismatch(format!(
                "gradient image {:?} does not match refocused image {:?}",
                g.dims(),
                self.dims
            )));
        }
        let scale = weight / ((2 * self.radius + 1) * (2 * self.radius + 1)) as f64;
        if let Some(field) = self.spatial.as_mut() {
            for (idx, view) in angular_indices(self.radius).zip(field.views_mut()) {
                let (s, t) = idx.as_f64();
                let back = shift_view_adjoint(g, (-r * s, -r * t), self.engine);
                view.axpy(scale, &back);
            }
            return Ok(());
        }
        let (h, w, c) = self.dims;
        let hw = h * w;
        let plan = Fft2::plan(h, w);
        let grid = plan.grid();
        let tables = PhaseTables::new(grid, self.radius, r);
        let spectra: Vec<Vec<Complex64>> = (0..c)
            .map(|ch| plan.forward_real_channel(g.data(), c, ch))
            .collect();
        for (idx, acc) in angular_indices(self.radius).zip(self.spectral.iter_mut()) {
            for bin in 0..hw {
                let m = tables.multiplier(grid, bin, idx.s, idx.t).conj() * scale;
                for (ch, spec) in spectra.iter().enumerate() {
                    acc[ch * hw + bin] += m * spec[bin];
                }
            }
        }
        Ok(())
    }

    /// Adds another accumulator of the same shape and engine.
    pub fn merge(&mut self, other: AdjointAccumulator) {
        match (self.spatial.as_mut(), other.spatial) {
            (Some(a), Some(b)) => a.axpy(1.0, &b),
            _ => {
                for (a, b) in self.spectral.iter_mut().zip(other.spectral) {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += y;
                    }
                }
            }
        }
    }

    pub fn finish(self) -> LightField {
        if let Some(field) = self.spatial {
            return field;
        }
        let (h, w, c) = self.dims;
        let hw = h * w;
        let plan = Fft2::plan(h, w);
        let views = self
            .spectral
            .into_iter()
            .map(|mut acc| {
                let mut out = View::zeros(h, w, c);
                for ch in 0..c {
                    let buf = &mut acc[ch * hw..(ch + 1) * hw];
                    plan.inverse(buf);
                    write_real_channel(&mut out, buf, ch);
                }
                out
            })
            .collect();
        LightField::new(self.radius, views).expect("accumulator shape is consistent")
    }
}

/// `Rᵀ g`: the adjoint of refocusing at `spec.r`, for a light field of
/// angular radius `radius`.
pub fn refocus_adjoint(g: &View, spec: &RefocusSpec, radius: usize) -> Result<LightField> {
    let mut acc = AdjointAccumulator::new(radius, g.dims(), spec.engine);
    acc.add(g, spec.r, 1.0)?;
    Ok(acc.finish())
}

/// Refocused images over an increasing grid of `r`.
#[derive(Clone, Debug, PartialEq)]
pub struct FocalStack {
    pub engine: ShiftEngine,
    pub slices: Vec<(f64, View)>,
}

impl FocalStack {
    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }
}

/// `r = r_min + k·step` for every `k` with `r ≤ r_max` (plus a small
/// tolerance so that `r_max` itself is included when it lies on the grid).
pub fn r_grid(r_min: f64, r_max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(invalid(format!("step must be positive, got {step}")));
    }
    if !(r_min <= r_max) {
        return Err(invalid(format!("r_min {r_min} exceeds r_max {r_max}")));
    }
    let count = ((r_max - r_min) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| r_min + k as f64 * step).collect())
}

pub fn focal_stack(
    lf: &LightField,
    r_min: f64,
    r_max: f64,
    step: f64,
    engine: ShiftEngine,
) -> Result<FocalStack> {
    let rs = r_grid(r_min, r_max, step)?;
    let refocuser = Refocuser::new(lf, engine);
    let slices = rs.par_iter().map(|&r| (r, refocuser.refocus(r))).collect();
    Ok(FocalStack { engine, slices })
}
