//! 2D DFT plumbing and the signed frequency grid.
//!
//! Forward transforms are non-unitary (`F(ω) = Σ_x f(x) e^{-jω·x}`); inverse
//! transforms carry the `1/(H·W)` factor so that `ifft(fft(f)) = f`.
//!
//! Every bin `(ky, kx)` is assigned a representative frequency `ω'` in
//! radians per pixel. Away from the Nyquist row/column this is the usual
//! centered frequency. Nyquist bins that have a distinct conjugate partner
//! get `±π` chosen so that partners carry exactly opposite frequencies, which
//! keeps `e^{-jω'·d}` a Hermitian multiplier. The remaining bins (both
//! coordinates in `{0, Nyquist}`) are their own conjugate partners; a real
//! translation can only scale them by `cos(ω'·d)`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Planned row/column transforms for one `H × W` size.
pub struct Fft2 {
    height: usize,
    width: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    grid: FrequencyGrid,
}

type PlanCache = HashMap<(usize, usize), Arc<Fft2>>;

impl Fft2 {
    fn new(height: usize, width: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            height,
            width,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
            grid: FrequencyGrid::new(height, width),
        }
    }

    /// Cached plan for the given size.
    pub fn plan(height: usize, width: usize) -> Arc<Fft2> {
        static CACHE: OnceLock<Mutex<PlanCache>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
        guard
            .entry((height, width))
            .or_insert_with(|| Arc::new(Fft2::new(height, width)))
            .clone()
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    /// In-place forward transform of a row-major `H × W` buffer.
    pub fn forward(&self, buf: &mut [Complex64]) {
        self.transform(buf, &self.row_fwd, &self.col_fwd);
    }

    /// In-place inverse transform, normalized by `1/(H·W)`.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.transform(buf, &self.row_inv, &self.col_inv);
        let scale = 1.0 / self.len() as f64;
        for v in buf.iter_mut() {
            *v *= scale;
        }
    }

    fn transform(&self, buf: &mut [Complex64], rows: &Arc<dyn Fft<f64>>, cols: &Arc<dyn Fft<f64>>) {
        assert_eq!(buf.len(), self.len(), "buffer does not match plan size");
        let (h, w) = (self.height, self.width);
        rows.process(buf);
        if h > 1 {
            let mut column = vec![Complex64::default(); h];
            for x in 0..w {
                for y in 0..h {
                    column[y] = buf[y * w + x];
                }
                cols.process(&mut column);
                for y in 0..h {
                    buf[y * w + x] = column[y];
                }
            }
        }
    }

    /// Forward transform of one channel of an interleaved real buffer.
    pub fn forward_real_channel(&self, data: &[f64], channels: usize, c: usize) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = data
            .iter()
            .skip(c)
            .step_by(channels)
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        self.forward(&mut buf);
        buf
    }
}

/// Signed frequency value for index `k` of an `n`-point DFT, in cycles
/// (not yet multiplied by `2π/n`). Nyquist maps to `-n/2`.
pub fn signed_index(k: usize, n: usize) -> i64 {
    let (k, n) = (k as i64, n as i64);
    if 2 * k < n {
        k
    } else {
        k - n
    }
}

fn is_self_conjugate_index(k: usize, n: usize) -> bool {
    k == 0 || (n.is_multiple_of(2) && 2 * k == n)
}

/// Representative frequencies of every bin of an `H × W` DFT.
#[derive(Clone, Debug)]
pub struct FrequencyGrid {
    height: usize,
    width: usize,
    /// Distinct vertical frequencies; index `height` holds `+π` for even sizes.
    wy_values: Vec<f64>,
    wx_values: Vec<f64>,
    iy: Vec<u32>,
    ix: Vec<u32>,
    self_conjugate: Vec<bool>,
}

impl FrequencyGrid {
    pub fn new(height: usize, width: usize) -> Self {
        let axis = |n: usize| -> Vec<f64> {
            let mut v: Vec<f64> = (0..n)
                .map(|k| 2.0 * PI * signed_index(k, n) as f64 / n as f64)
                .collect();
            v.push(PI);
            v
        };
        let wy_values = axis(height);
        let wx_values = axis(width);
        let mut iy = Vec::with_capacity(height * width);
        let mut ix = Vec::with_capacity(height * width);
        let mut self_conjugate = Vec::with_capacity(height * width);
        for ky in 0..height {
            for kx in 0..width {
                let y_sc = is_self_conjugate_index(ky, height);
                let x_sc = is_self_conjugate_index(kx, width);
                let y_nyq = height.is_multiple_of(2) && 2 * ky == height;
                let x_nyq = width.is_multiple_of(2) && 2 * kx == width;
                let mut jy = ky as u32;
                let mut jx = kx as u32;
                if y_nyq && !x_sc && signed_index(kx, width) < 0 {
                    jy = height as u32;
                }
                if x_nyq && !y_sc && signed_index(ky, height) < 0 {
                    jx = width as u32;
                }
                iy.push(jy);
                ix.push(jx);
                self_conjugate.push(y_sc && x_sc);
            }
        }
        Self {
            height,
            width,
            wy_values,
            wx_values,
            iy,
            ix,
            self_conjugate,
        }
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(ω'_y, ω'_x)` of bin `b` (row-major).
    #[inline]
    pub fn omega(&self, bin: usize) -> (f64, f64) {
        (
            self.wy_values[self.iy[bin] as usize],
            self.wx_values[self.ix[bin] as usize],
        )
    }

    #[inline]
    pub fn is_self_conjugate(&self, bin: usize) -> bool {
        self.self_conjugate[bin]
    }

    pub(crate) fn wy_values(&self) -> &[f64] {
        &self.wy_values
    }

    pub(crate) fn wx_values(&self) -> &[f64] {
        &self.wx_values
    }

    #[inline]
    pub(crate) fn axis_indices(&self, bin: usize) -> (usize, usize) {
        (self.iy[bin] as usize, self.ix[bin] as usize)
    }

    /// Index of the conjugate partner of bin `b`, i.e. the bin at `-k`.
    pub fn partner(&self, bin: usize) -> usize {
        let (ky, kx) = (bin / self.width, bin % self.width);
        let py = (self.height - ky) % self.height;
        let px = (self.width - kx) % self.width;
        py * self.width + px
    }
}

/// Multiplier that translates content by `(dx, dy)` pixels at bin `b`:
/// `e^{-jω'·d}`, or its real part on self-conjugate bins.
#[inline]
pub fn shift_multiplier(grid: &FrequencyGrid, bin: usize, dx: f64, dy: f64) -> Complex64 {
    let (wy, wx) = grid.omega(bin);
    let phase = -(wx * dx + wy * dy);
    if grid.is_self_conjugate(bin) {
        Complex64::new(phase.cos(), 0.0)
    } else {
        Complex64::from_polar(1.0, phase)
    }
}
