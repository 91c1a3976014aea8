//! PNG directory ingestion and export.
//!
//! A light field on disk is a directory of `view_{row}_{col}.png` files with
//! zero-based grid coordinates, origin top-left. Grid position `(row, col)`
//! maps to angular index `(s, t) = (col − N, row − N)`, so file `(0, 0)` is
//! view `(−N, −N)`. An optional `manifest.txt` with `grid=RxC` and
//! `pattern=...` lines overrides the defaults.

use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, Luma, Rgb};

use crate::error::{Error, Result};
use crate::lightfield::{LightField, View};

pub const DEFAULT_PATTERN: &str = "view_{row}_{col}.png";
pub const MANIFEST_NAME: &str = "manifest.txt";

/// Where and how the views of one light field are stored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetLayout {
    pub dir: PathBuf,
    /// Filename template with `{row}` and `{col}` placeholders.
    pub pattern: String,
    /// `(rows, cols)` of the angular grid.
    pub grid: (usize, usize),
}

impl DatasetLayout {
    pub fn new(dir: impl Into<PathBuf>, grid: (usize, usize)) -> Self {
        Self {
            dir: dir.into(),
            pattern: DEFAULT_PATTERN.to_string(),
            grid,
        }
    }

    /// Layout of an existing directory: the manifest if present, otherwise
    /// the grid size inferred from the default filename pattern.
    pub fn discover(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        let manifest = dir.join(MANIFEST_NAME);
        if manifest.is_file() {
            let text = fs::read_to_string(&manifest)?;
            return Self::from_manifest(dir, &text);
        }
        let mut rows = 0;
        let mut cols = 0;
        for entry in fs::read_dir(&dir)? {
            let name = entry?.file_name();
            if let Some((r, c)) = parse_default_name(&name.to_string_lossy()) {
                rows = rows.max(r + 1);
                cols = cols.max(c + 1);
            }
        }
        if rows == 0 {
            return Err(Error::InvalidLightField(format!(
                "no files matching {DEFAULT_PATTERN} in {}",
                dir.display()
            )));
        }
        Ok(Self::new(dir, (rows, cols)))
    }

    fn from_manifest(dir: PathBuf, text: &str) -> Result<Self> {
        let mut layout = Self::new(dir, (0, 0));
        let mut grid = None;
        for line in text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
        {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_err(format!("line `{line}`")))?;
            match key.trim() {
                "grid" => {
                    let (r, c) = value
                        .trim()
                        .split_once('x')
                        .ok_or_else(|| parse_err(format!("grid `{value}`")))?;
                    let r = r
                        .trim()
                        .parse()
                        .map_err(|_| parse_err(format!("grid `{value}`")))?;
                    let c = c
                        .trim()
                        .parse()
                        .map_err(|_| parse_err(format!("grid `{value}`")))?;
                    grid = Some((r, c));
                }
                "pattern" => layout.pattern = value.trim().to_string(),
                other => return Err(parse_err(format!("unknown key `{other}`"))),
            }
        }
        layout.grid = grid.ok_or_else(|| parse_err("missing `grid`".into()))?;
        if !layout.pattern.contains("{row}") || !layout.pattern.contains("{col}") {
            return Err(parse_err(format!(
                "pattern `{}` lacks {{row}} or {{col}}",
                layout.pattern
            )));
        }
        Ok(layout)
    }

    pub fn path_for(&self, row: usize, col: usize) -> PathBuf {
        let name = self
            .pattern
            .replace("{row}", &row.to_string())
            .replace("{col}", &col.to_string());
        self.dir.join(name)
    }

    /// Angular radius implied by the grid.
    pub fn radius(&self) -> Result<usize> {
        let (rows, cols) = self.grid;
        if rows != cols || rows % 2 == 0 {
            return Err(Error::EvenGrid { rows, cols });
        }
        Ok(rows / 2)
    }

    pub fn manifest_text(&self) -> String {
        format!(
            "grid={}x{}\npattern={}\n",
            self.grid.0, self.grid.1, self.pattern
        )
    }
}

fn parse_err(reason: String) -> Error {
    Error::Parse {
        what: MANIFEST_NAME.into(),
        reason,
    }
}

fn parse_default_name(name: &str) -> Option<(usize, usize)> {
    let rest = name.strip_prefix("view_")?.strip_suffix(".png")?;
    let (r, c) = rest.split_once('_')?;
    Some((r.parse().ok()?, c.parse().ok()?))
}

/// Loads every view of `layout` and normalizes samples to `[0, 1]`.
pub fn load_lightfield(layout: &DatasetLayout) -> Result<LightField> {
    let n = layout.radius()?;
    let side = 2 * n + 1;
    let mut views = Vec::with_capacity(side * side);
    for row in 0..side {
        for col in 0..side {
            let path = layout.path_for(row, col);
            if !path.is_file() {
                return Err(Error::MissingView { path, row, col });
            }
            let view = load_view_png(&path)?;
            if let Some(first) = views.first() {
                if !view.same_shape(first) {
                    return Err(Error::ShapeMismatch(format!(
                        "{} is {:?}, expected {:?}",
                        path.display(),
                        view.dims(),
                        first.dims()
                    )));
                }
            }
            views.push(view);
        }
    }
    LightField::new(n, views)
}

/// Decodes an 8- or 16-bit grayscale or RGB PNG.
pub fn load_view_png(path: &Path) -> Result<View> {
    let img = image::open(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let unsupported = |reason: &str| Error::UnsupportedImage {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let (channels, data): (usize, Vec<f64>) = match img {
        DynamicImage::ImageLuma8(b) => {
            (1, b.into_raw().iter().map(|&v| v as f64 / 255.0).collect())
        }
        DynamicImage::ImageRgb8(b) => (3, b.into_raw().iter().map(|&v| v as f64 / 255.0).collect()),
        DynamicImage::ImageLuma16(b) => (
            1,
            b.into_raw().iter().map(|&v| v as f64 / 65535.0).collect(),
        ),
        DynamicImage::ImageRgb16(b) => (
            3,
            b.into_raw().iter().map(|&v| v as f64 / 65535.0).collect(),
        ),
        DynamicImage::ImageLumaA8(_)
        | DynamicImage::ImageLumaA16(_)
        | DynamicImage::ImageRgba8(_)
        | DynamicImage::ImageRgba16(_) => return Err(unsupported("alpha channel")),
        _ => return Err(unsupported("expected 8- or 16-bit gray or RGB")),
    };
    View::new(h, w, channels, data)
}

/// Sample depth used when writing PNGs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum BitDepth {
    #[default]
    Eight,
    Sixteen,
}

/// Writes one view, clamping samples to `[0, 1]`. Returns the number of
/// clamped samples.
pub fn save_view_png(view: &View, path: &Path, depth: BitDepth) -> Result<usize> {
    let (h, w, c) = view.dims();
    let mut clamped = 0;
    let mut quantize = |v: f64, max: f64| -> f64 {
        if !(0.0..=1.0).contains(&v) {
            clamped += 1;
        }
        (v.clamp(0.0, 1.0) * max).round()
    };
    let (w32, h32) = (w as u32, h as u32);
    let img = match depth {
        BitDepth::Eight => {
            let raw: Vec<u8> = view
                .data()
                .iter()
                .map(|&v| quantize(v, 255.0) as u8)
                .collect();
            if c == 1 {
                DynamicImage::ImageLuma8(
                    ImageBuffer::<Luma<u8>, _>::from_raw(w32, h32, raw).expect("buffer size"),
                )
            } else {
                DynamicImage::ImageRgb8(
                    ImageBuffer::<Rgb<u8>, _>::from_raw(w32, h32, raw).expect("buffer size"),
                )
            }
        }
        BitDepth::Sixteen => {
            let raw: Vec<u16> = view
                .data()
                .iter()
                .map(|&v| quantize(v, 65535.0) as u16)
                .collect();
            if c == 1 {
                DynamicImage::ImageLuma16(
                    ImageBuffer::<Luma<u16>, _>::from_raw(w32, h32, raw).expect("buffer size"),
                )
            } else {
                DynamicImage::ImageRgb16(
                    ImageBuffer::<Rgb<u16>, _>::from_raw(w32, h32, raw).expect("buffer size"),
                )
            }
        }
    };
    img.save_with_format(path, image::ImageFormat::Png)?;
    Ok(clamped)
}

/// Writes all views with the default pattern plus a manifest.
pub fn save_lightfield(lf: &LightField, dir: &Path, depth: BitDepth) -> Result<DatasetLayout> {
    fs::create_dir_all(dir)?;
    let side = lf.side();
    let layout = DatasetLayout::new(dir, (side, side));
    for (i, view) in lf.views().iter().enumerate() {
        save_view_png(view, &layout.path_for(i / side, i % side), depth)?;
    }
    fs::write(dir.join(MANIFEST_NAME), layout.manifest_text())?;
    Ok(layout)
}
