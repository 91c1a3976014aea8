//! Light-field data model.
//!
//! A light field with angular radius `N` holds `(2N+1)²` views. Angular
//! coordinates are centered: `s` runs along the horizontal axis (paired with
//! pixel column `x`) and `t` along the vertical axis (paired with pixel row
//! `y`), both in `-N..=N`. Views are stored row-major over the angular grid,
//! `t` outer and `s` inner, which is the same order as the `view_{row}_{col}`
//! files on disk (`row = t + N`, `col = s + N`).
//!
//! Samples are `f64`. Ingested data is in `[0, 1]`; fields produced by
//! arithmetic (residuals, gradients, predictions) may leave that range and
//! can be checked with [`LightField::is_unit_range`].

use crate::error::{invalid, shape_mismatch, Error, Result};

/// Centered angular coordinate of a view.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AngularIndex {
    /// Horizontal angular coordinate.
    pub s: i32,
    /// Vertical angular coordinate.
    pub t: i32,
}

impl AngularIndex {
    pub const CENTER: AngularIndex = AngularIndex { s: 0, t: 0 };

    pub const fn new(s: i32, t: i32) -> Self {
        Self { s, t }
    }

    pub fn as_f64(self) -> (f64, f64) {
        (self.s as f64, self.t as f64)
    }
}

impl std::fmt::Display for AngularIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.s, self.t)
    }
}

/// A single sub-aperture image, `height × width × channels`, interleaved.
#[derive(Clone, Debug, PartialEq)]
pub struct View {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl View {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(invalid("view dimensions must be non-zero"));
        }
        if channels != 1 && channels != 3 {
            return Err(invalid(format!("channels must be 1 or 3, got {channels}")));
        }
        if data.len() != height * width * channels {
            return Err(shape_mismatch(format!(
                "expected {} samples for {height}x{width}x{channels}, got {}",
                height * width * channels,
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self::filled(height, width, channels, 0.0)
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Self {
        Self {
            height,
            width,
            channels,
            data: vec![value; height * width * channels],
        }
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(y, x, c));
                }
            }
        }
        Self {
            height,
            width,
            channels,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Number of samples, `H·W·C`.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, value: f64) {
        self.data[(y * self.width + x) * self.channels + c] = value;
    }

    pub fn same_shape(&self, other: &View) -> bool {
        self.dims() == other.dims()
    }

    pub(crate) fn check_same_shape(&self, other: &View) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(shape_mismatch(format!(
                "views {}x{}x{} and {}x{}x{}",
                self.height, self.width, self.channels, other.height, other.width, other.channels
            )))
        }
    }

    /// Extracts one channel as a single-channel view.
    pub fn channel(&self, c: usize) -> View {
        View {
            height: self.height,
            width: self.width,
            channels: 1,
            data: self
                .data
                .iter()
                .skip(c)
                .step_by(self.channels)
                .copied()
                .collect(),
        }
    }

    /// Gray-scale conversion with ITU-R BT.601 weights. Single-channel views
    /// are returned unchanged.
    pub fn to_luma(&self) -> View {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(3)
            .map(|px| 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2])
            .collect();
        View {
            height: self.height,
            width: self.width,
            channels: 1,
            data,
        }
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn dot(&self, other: &View) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn sub(&self, other: &View) -> Result<View> {
        self.check_same_shape(other)?;
        Ok(self.zip_map(other, |a, b| a - b))
    }

    pub(crate) fn zip_map(&self, other: &View, f: impl Fn(f64, f64) -> f64) -> View {
        View {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> View {
        View {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &View) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// A 4D light field: `(2N+1)²` views of identical shape.
#[derive(Clone, Debug, PartialEq)]
pub struct LightField {
    radius: usize,
    views: Vec<View>,
}

impl LightField {
    /// Builds a light field from views in row-major angular order
    /// (`t` outer, `s` inner).
    pub fn new(radius: usize, views: Vec<View>) -> Result<Self> {
        let side = 2 * radius + 1;
        if views.len() != side * side {
            return Err(Error::InvalidLightField(format!(
                "angular radius {radius} needs {} views, got {}",
                side * side,
                views.len()
            )));
        }
        let dims = views[0].dims();
        if let Some(bad) = views.iter().position(|v| v.dims() != dims) {
            return Err(Error::InvalidLightField(format!(
                "view {bad} has dimensions {:?}, expected {:?}",
                views[bad].dims(),
                dims
            )));
        }
        if views.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidLightField("non-finite sample".into()));
        }
        Ok(Self { radius, views })
    }

    pub fn from_fn(radius: usize, mut f: impl FnMut(AngularIndex) -> View) -> Result<Self> {
        let views = angular_indices(radius).map(&mut f).collect();
        Self::new(radius, views)
    }

    pub fn constant(
        radius: usize,
        height: usize,
        width: usize,
        channels: usize,
        value: f64,
    ) -> Self {
        let side = 2 * radius + 1;
        Self {
            radius,
            views: vec![View::filled(height, width, channels, value); side * side],
        }
    }

    pub fn zeros_like(&self) -> Self {
        let (h, w, c) = self.view_dims();
        Self::constant(self.radius, h, w, c, 0.0)
    }

    /// Angular radius `N`.
    pub fn radius(&self) -> usize {
        self.radius
    }

    /// Angular side length `2N+1`.
    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    pub fn view_count(&self) -> usize {
        self.views.len()
    }

    pub fn height(&self) -> usize {
        self.views[0].height
    }

    pub fn width(&self) -> usize {
        self.views[0].width
    }

    pub fn channels(&self) -> usize {
        self.views[0].channels
    }

    pub fn view_dims(&self) -> (usize, usize, usize) {
        self.views[0].dims()
    }

    /// Samples per view, `M = H·W·C`.
    pub fn samples_per_view(&self) -> usize {
        self.views[0].len()
    }

    pub fn views(&self) -> &[View] {
        &self.views
    }

    pub fn views_mut(&mut self) -> &mut [View] {
        &mut self.views
    }

    pub fn into_views(self) -> Vec<View> {
        self.views
    }

    /// Position of an angular index in storage order.
    pub fn linear_index(&self, idx: AngularIndex) -> Option<usize> {
        let n = self.radius as i32;
        if idx.s.abs() > n || idx.t.abs() > n {
            return None;
        }
        Some(((idx.t + n) * (2 * n + 1) + (idx.s + n)) as usize)
    }

    pub fn view(&self, idx: AngularIndex) -> Option<&View> {
        self.linear_index(idx).map(|i| &self.views[i])
    }

    pub fn view_mut(&mut self, idx: AngularIndex) -> Option<&mut View> {
        self.linear_index(idx).map(move |i| &mut self.views[i])
    }

    pub fn indices(&self) -> impl Iterator<Item = AngularIndex> {
        angular_indices(self.radius)
    }

    pub fn iter(&self) -> impl Iterator<Item = (AngularIndex, &View)> {
        angular_indices(self.radius).zip(self.views.iter())
    }

    pub fn same_shape(&self, other: &LightField) -> bool {
        self.radius == other.radius && self.view_dims() == other.view_dims()
    }

    pub fn check_same_shape(&self, other: &LightField) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            let (h, w, c) = self.view_dims();
            let (h2, w2, c2) = other.view_dims();
            Err(shape_mismatch(format!(
                "light fields {s1}x{s1}x{h}x{w}x{c} and {s2}x{s2}x{h2}x{w2}x{c2}",
                s1 = self.side(),
                s2 = other.side(),
            )))
        }
    }

    /// True when every sample lies in `[0, 1]`.
    pub fn is_unit_range(&self) -> bool {
        self.views
            .iter()
            .all(|v| v.data.iter().all(|x| (0.0..=1.0).contains(x)))
    }

    pub fn sub(&self, other: &LightField) -> Result<LightField> {
        self.check_same_shape(other)?;
        Ok(self.zip_map(other, |a, b| a - b))
    }

    pub fn add(&self, other: &LightField) -> Result<LightField> {
        self.check_same_shape(other)?;
        Ok(self.zip_map(other, |a, b| a + b))
    }

    pub(crate) fn zip_map(&self, other: &LightField, f: impl Fn(f64, f64) -> f64 + Copy) -> Self {
        Self {
            radius: self.radius,
            views: self
                .views
                .iter()
                .zip(&other.views)
                .map(|(a, b)| a.zip_map(b, f))
                .collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Copy) -> Self {
        Self {
            radius: self.radius,
            views: self.views.iter().map(|v| v.map(f)).collect(),
        }
    }

    pub fn scale(&self, alpha: f64) -> Self {
        self.map(|v| alpha * v)
    }

    /// Euclidean inner product over every sample.
    pub fn dot(&self, other: &LightField) -> f64 {
        self.views
            .iter()
            .zip(&other.views)
            .map(|(a, b)| a.dot(b))
            .sum()
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &LightField) {
        for (a, b) in self.views.iter_mut().zip(&other.views) {
            a.axpy(alpha, b);
        }
    }

    pub fn samples(&self) -> impl Iterator<Item = f64> + '_ {
        self.views.iter().flat_map(|v| v.data.iter().copied())
    }

    pub fn samples_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.views.iter_mut().flat_map(|v| v.data.iter_mut())
    }

    /// Every `window × window` angular sub-grid, each re-centered and copied.
    ///
    /// Sub-lightfields are returned in row-major order of their top-left
    /// position in the source grid.
    pub fn extract_sublightfields(&self, window: usize) -> Result<Vec<LightField>> {
        if window.is_multiple_of(2) {
            return Err(invalid(format!("window must be odd, got {window}")));
        }
        let side = self.side();
        if window > side {
            return Err(invalid(format!(
                "window {window} exceeds angular grid {side}"
            )));
        }
        let sub_radius = window / 2;
        let positions = side + 1 - window;
        let mut out = Vec::with_capacity(positions * positions);
        for row0 in 0..positions {
            for col0 in 0..positions {
                let mut views = Vec::with_capacity(window * window);
                for row in row0..row0 + window {
                    for col in col0..col0 + window {
                        views.push(self.views[row * side + col].clone());
                    }
                }
                out.push(LightField {
                    radius: sub_radius,
                    views,
                });
            }
        }
        Ok(out)
    }

    /// The centered `(2r+1)²` sub-grid.
    pub fn central(&self, radius: usize) -> Result<LightField> {
        if radius > self.radius {
            return Err(invalid(format!(
                "central radius {radius} exceeds angular radius {}",
                self.radius
            )));
        }
        LightField::from_fn(radius, |idx| self.view(idx).unwrap().clone())
    }

    /// Central view plus the four corner views.
    pub fn sample_inputs(&self) -> Result<ViewSet> {
        if self.radius == 0 {
            return Err(invalid(
                "angular radius 0 has no corner views distinct from the center",
            ));
        }
        let n = self.radius as i32;
        let mut set = ViewSet::default();
        set.push(
            AngularIndex::CENTER,
            self.view(AngularIndex::CENTER).unwrap().clone(),
            ViewRole::Center,
        )?;
        for (s, t) in [(-n, -n), (-n, n), (n, -n), (n, n)] {
            let idx = AngularIndex::new(s, t);
            set.push(idx, self.view(idx).unwrap().clone(), ViewRole::Corner)?;
        }
        Ok(set)
    }
}

/// Iterates the angular grid of radius `n` in storage order.
pub fn angular_indices(radius: usize) -> impl Iterator<Item = AngularIndex> {
    let n = radius as i32;
    (-n..=n).flat_map(move |t| (-n..=n).map(move |s| AngularIndex::new(s, t)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViewRole {
    Center,
    Corner,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ViewSample {
    pub index: AngularIndex,
    pub view: View,
    pub role: ViewRole,
}

/// Ordered input views fed to the synthesizer.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ViewSet {
    samples: Vec<ViewSample>,
}

impl ViewSet {
    pub fn push(&mut self, index: AngularIndex, view: View, role: ViewRole) -> Result<()> {
        if self.samples.iter().any(|s| s.index == index) {
            return Err(invalid(format!("duplicate angular index {index}")));
        }
        if let Some(first) = self.samples.first() {
            first.view.check_same_shape(&view)?;
        }
        self.samples.push(ViewSample { index, view, role });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ViewSample> {
        self.samples.iter()
    }

    pub fn center(&self) -> Option<&ViewSample> {
        self.samples
            .iter()
            .find(|s| s.index == AngularIndex::CENTER)
    }

    pub fn indices(&self) -> Vec<AngularIndex> {
        self.samples.iter().map(|s| s.index).collect()
    }
}
