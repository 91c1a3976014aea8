//! Image quality metrics and per-configuration quality reports.
//!
//! MAE, MSE and PSNR use every channel. SSIM and GMSD expect single-channel
//! images; reports convert with [`View::to_luma`] first.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{invalid, shape_mismatch, Result};
use crate::lightfield::{AngularIndex, LightField, View};
use crate::losses::{base_error, Norm, RieParams};
use crate::refocus::{r_grid, Refocuser};

pub fn mae(x: &View, y: &View) -> Result<f64> {
    base_error(x, y, Norm::L1)
}

pub fn mse(x: &View, y: &View) -> Result<f64> {
    base_error(x, y, Norm::L2)
}

/// `10·log10(peak² / mse)`; `+∞` when `mse == 0`.
pub fn psnr_from_mse(mse: f64, peak: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (peak * peak / mse).log10()
    }
}

pub fn psnr(x: &View, y: &View, peak: f64) -> Result<f64> {
    if !(peak > 0.0) {
        return Err(invalid(format!("peak must be positive, got {peak}")));
    }
    Ok(psnr_from_mse(mse(x, y)?, peak))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SsimParams {
    /// Odd width of the Gaussian window.
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub peak: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            peak: 1.0,
        }
    }
}

impl SsimParams {
    pub fn c1(&self) -> f64 {
        (self.k1 * self.peak).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.peak).powi(2)
    }

    pub fn c3(&self) -> f64 {
        self.c2() / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.window.is_multiple_of(2) {
            return Err(invalid(format!(
                "SSIM window must be odd, got {}",
                self.window
            )));
        }
        if !(self.sigma > 0.0 && self.k1 > 0.0 && self.k2 > 0.0 && self.peak > 0.0) {
            return Err(invalid(format!(
                "SSIM constants must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    /// Normalized 1D Gaussian taps; the 2D window is their outer product.
    pub fn taps(&self) -> Vec<f64> {
        let c = (self.window / 2) as f64;
        let g: Vec<f64> = (0..self.window)
            .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * self.sigma * self.sigma)).exp())
            .collect();
        let sum: f64 = g.iter().sum();
        g.into_iter().map(|v| v / sum).collect()
    }
}

fn require_gray(x: &View, y: &View, what: &str) -> Result<()> {
    x.check_same_shape(y)?;
    if x.channels() != 1 {
        return Err(invalid(format!(
            "{what} needs single-channel input, got {} channels",
            x.channels()
        )));
    }
    Ok(())
}

/// Separable correlation over valid positions only.
fn filter_valid(img: &[f64], h: usize, w: usize, taps: &[f64]) -> Vec<f64> {
    let k = taps.len();
    let (oh, ow) = (h + 1 - k, w + 1 - k);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        let src = &img[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = taps.iter().zip(&src[x..x + k]).map(|(t, v)| t * v).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = taps
                .iter()
                .enumerate()
                .map(|(i, t)| t * rows[(y + i) * ow + x])
                .sum();
        }
    }
    out
}

/// Mean SSIM over all valid window positions.
///
/// With `C₃ = C₂/2` and unit exponents, `c·s` collapses to
/// `(2σ_xy + C₂)/(σ_x² + σ_y² + C₂)`, so the product is evaluated in that form.
pub fn ssim(x: &View, y: &View, params: &SsimParams) -> Result<f64> {
    params.validate()?;
    require_gray(x, y, "SSIM")?;
    let (h, w) = (x.height(), x.width());
    if h < params.window || w < params.window {
        return Err(invalid(format!(
            "image {h}x{w} is smaller than the {}x{} SSIM window",
            params.window, params.window
        )));
    }
    let taps = params.taps();
    let (a, b) = (x.data(), y.data());
    let prod = |f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> {
        a.iter().zip(b).map(|(&p, &q)| f(p, q)).collect()
    };
    let mu_x = filter_valid(a, h, w, &taps);
    let mu_y = filter_valid(b, h, w, &taps);
    let e_xx = filter_valid(&prod(&|p, _| p * p), h, w, &taps);
    let e_yy = filter_valid(&prod(&|_, q| q * q), h, w, &taps);
    let e_xy = filter_valid(&prod(&|p, q| p * q), h, w, &taps);
    let (c1, c2) = (params.c1(), params.c2());
    let total: f64 = (0..mu_x.len())
        .map(|i| {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let vx = e_xx[i] - mx * mx;
            let vy = e_yy[i] - my * my;
            let cov = e_xy[i] - mx * my;
            let l = (2.0 * mx * my + c1) / (mx * mx + my * my + c1);
            l * (2.0 * cov + c2) / (vx + vy + c2)
        })
        .sum();
    Ok(total / mu_x.len() as f64)
}

pub const GMSD_C: f64 = 0.0026;

/// Prewitt gradient magnitude with edge replication.
fn gradient_magnitude(v: &View) -> Vec<f64> {
    let (h, w) = (v.height() as isize, v.width() as isize);
    let at = |y: isize, x: isize| v.get(y.clamp(0, h - 1) as usize, x.clamp(0, w - 1) as usize, 0);
    let mut out = Vec::with_capacity((h * w) as usize);
    for y in 0..h {
        for x in 0..w {
            let mut gx = 0.0;
            let mut gy = 0.0;
            for d in -1..=1 {
                gx += at(y + d, x - 1) - at(y + d, x + 1);
                gy += at(y - 1, x + d) - at(y + 1, x + d);
            }
            gx /= 3.0;
            gy /= 3.0;
            out.push((gx * gx + gy * gy).sqrt());
        }
    }
    out
}

/// Per-pixel gradient magnitude similarity map.
pub fn gms_map(x: &View, y: &View, c: f64) -> Result<Vec<f64>> {
    require_gray(x, y, "GMSD")?;
    if !(c > 0.0) {
        return Err(invalid(format!("GMSD constant must be positive, got {c}")));
    }
    let mr = gradient_magnitude(x);
    let md = gradient_magnitude(y);
    Ok(mr
        .iter()
        .zip(&md)
        .map(|(&a, &b)| (2.0 * a * b + c) / (a * a + b * b + c))
        .collect())
}

/// Population standard deviation of the GMS map.
pub fn gmsd(x: &View, y: &View, c: f64) -> Result<f64> {
    let gms = gms_map(x, y, c)?;
    let n = gms.len() as f64;
    let mean = gms.iter().sum::<f64>() / n;
    Ok((gms.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / n).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Domain {
    View,
    Refocus,
}

impl Domain {
    pub fn name(self) -> &'static str {
        match self {
            Domain::View => "view",
            Domain::Refocus => "refocus",
        }
    }
}

/// One CSV row. `r`, `ssim` and `gmsd` are absent for view-domain rows.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricRow {
    pub domain: Domain,
    pub r: Option<f64>,
    pub mae: f64,
    pub mse: f64,
    pub psnr: f64,
    pub ssim: Option<f64>,
    pub gmsd: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QualityReport {
    pub config: String,
    /// Scores of each synthesized view, in the order given.
    pub per_view: Vec<(AngularIndex, MetricRow)>,
    /// Means over the synthesized views.
    pub view: MetricRow,
    /// One row per refocus parameter, in sweep order.
    pub refocus: Vec<MetricRow>,
}

/// The default sweep `−D, −D + s, …, D`.
pub fn default_sweep(rie: &RieParams) -> Result<Vec<f64>> {
    r_grid(-rie.d, rie.d, rie.step)
}

pub fn quality_report(
    pred: &LightField,
    gt: &LightField,
    synthesized: &[AngularIndex],
    rie: &RieParams,
    r_sweep: &[f64],
) -> Result<QualityReport> {
    pred.check_same_shape(gt)?;
    if synthesized.is_empty() {
        return Err(invalid(
            "quality report needs at least one synthesized view",
        ));
    }
    let per_view = synthesized
        .iter()
        .map(|&idx| {
            let (p, g) = match (pred.view(idx), gt.view(idx)) {
                (Some(p), Some(g)) => (p, g),
                _ => {
                    return Err(shape_mismatch(format!(
                        "view {idx} outside radius {}",
                        pred.radius()
                    )))
                }
            };
            let e2 = mse(p, g)?;
            Ok((
                idx,
                MetricRow {
                    domain: Domain::View,
                    r: None,
                    mae: mae(p, g)?,
                    mse: e2,
                    psnr: psnr_from_mse(e2, 1.0),
                    ssim: None,
                    gmsd: None,
                },
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = per_view.len() as f64;
    let mean = |f: fn(&MetricRow) -> f64| per_view.iter().map(|(_, row)| f(row)).sum::<f64>() / n;
    let view = MetricRow {
        domain: Domain::View,
        r: None,
        mae: mean(|r| r.mae),
        mse: mean(|r| r.mse),
        psnr: mean(|r| r.psnr),
        ssim: None,
        gmsd: None,
    };

    let pred_ref = Refocuser::new(pred, rie.engine);
    let gt_ref = Refocuser::new(gt, rie.engine);
    let ssim_params = SsimParams::default();
    let refocus = r_sweep
        .par_iter()
        .map(|&r| {
            let p = pred_ref.refocus(r);
            let g = gt_ref.refocus(r);
            let e2 = mse(&p, &g)?;
            let (pl, gl) = (p.to_luma(), g.to_luma());
            Ok(MetricRow {
                domain: Domain::Refocus,
                r: Some(r),
                mae: mae(&p, &g)?,
                mse: e2,
                psnr: psnr_from_mse(e2, 1.0),
                ssim: Some(ssim(&pl, &gl, &ssim_params)?),
                gmsd: Some(gmsd(&pl, &gl, GMSD_C)?),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(QualityReport {
        config: String::new(),
        per_view,
        view,
        refocus,
    })
}

impl QualityReport {
    pub fn labeled(mut self, config: impl Into<String>) -> Self {
        self.config = config.into();
        self
    }

    /// The refocus row at `r`, if the sweep contains it.
    pub fn refocus_at(&self, r: f64) -> Option<&MetricRow> {
        self.refocus
            .iter()
            .find(|row| row.r.is_some_and(|v| (v - r).abs() < 1e-12))
    }

    pub fn rows(&self) -> impl Iterator<Item = &MetricRow> {
        std::iter::once(&self.view).chain(&self.refocus)
    }
}

/// How per-scene reports are combined.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Aggregate {
    /// Arithmetic mean of every column, PSNR included.
    SceneMean,
    /// Means of MAE/MSE/SSIM/GMSD; PSNR recomputed from the pooled MSE.
    Pooled,
}

impl Aggregate {
    pub fn name(self) -> &'static str {
        match self {
            Aggregate::SceneMean => "scene-mean",
            Aggregate::Pooled => "pooled",
        }
    }
}

/// Combines reports of the same configuration over several scenes.
pub fn aggregate(reports: &[QualityReport], mode: Aggregate) -> Result<QualityReport> {
    let first = reports
        .first()
        .ok_or_else(|| invalid("nothing to aggregate"))?;
    if reports
        .iter()
        .any(|r| r.refocus.len() != first.refocus.len() || r.config != first.config)
    {
        return Err(shape_mismatch("reports differ in configuration or sweep"));
    }
    let n = reports.len() as f64;
    let combine = |rows: Vec<&MetricRow>| -> MetricRow {
        let mean = |f: &dyn Fn(&MetricRow) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / n;
        let opt = |f: &dyn Fn(&MetricRow) -> Option<f64>| {
            rows.iter()
                .map(|r| f(r))
                .sum::<Option<f64>>()
                .map(|s| s / n)
        };
        let mse = mean(&|r| r.mse);
        MetricRow {
            domain: rows[0].domain,
            r: rows[0].r,
            mae: mean(&|r| r.mae),
            mse,
            psnr: match mode {
                Aggregate::SceneMean => mean(&|r| r.psnr),
                Aggregate::Pooled => psnr_from_mse(mse, 1.0),
            },
            ssim: opt(&|r| r.ssim),
            gmsd: opt(&|r| r.gmsd),
        }
    };
    let view = combine(reports.iter().map(|r| &r.view).collect());
    let refocus = (0..first.refocus.len())
        .map(|i| combine(reports.iter().map(|r| &r.refocus[i]).collect()))
        .collect();
    Ok(QualityReport {
        config: first.config.clone(),
        per_view: Vec::new(),
        view,
        refocus,
    })
}

pub const CSV_HEADER: &str = "config,domain,r,mae,mse,psnr,ssim,gmsd";

fn fmt_value(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_string()
    } else {
        format!("{v}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), fmt_value)
}

/// Writes the header followed by every row of every report.
pub fn write_csv<W: Write>(out: &mut W, reports: &[QualityReport]) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for report in reports {
        for row in report.rows() {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                report.config,
                row.domain.name(),
                fmt_opt(row.r),
                fmt_value(row.mae),
                fmt_value(row.mse),
                fmt_value(row.psnr),
                fmt_opt(row.ssim),
                fmt_opt(row.gmsd),
            )?;
        }
    }
    Ok(())
}

pub fn csv_string(reports: &[QualityReport]) -> String {
    let mut buf = Vec::new();
    write_csv(&mut buf, reports).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("CSV is UTF-8")
}
