//! Feature pool: HOG plus five convolutional-layer slots, patch sampling and
//! the color mask applied to training samples.

mod channel_map;
mod color;
mod hog;
mod synth;

use std::fmt;
use std::str::FromStr;

use image::RgbImage;

pub use channel_map::{load_channel_map, resample_bilinear, ChannelMapFile, KindLayout};
pub use color::{color_mask, color_mask_for_patch, ColorMask};
pub use hog::{extract_hog, hog_features, HOG_CHANNELS};
pub use synth::{synth_features, synth_patch_features, SynthLayer};

use crate::dcf::FeatureStack;
use crate::error::{invalid, Error, Result};

/// One slot of the feature pool. The derived ordering is the pool order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FeatureKind {
    Hog,
    L5,
    L10,
    L19,
    L28,
    L37,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 6] = [
        FeatureKind::Hog,
        FeatureKind::L5,
        FeatureKind::L10,
        FeatureKind::L19,
        FeatureKind::L28,
        FeatureKind::L37,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<FeatureKind> {
        Self::ALL.get(i).copied()
    }

    pub fn tag(self) -> &'static str {
        match self {
            FeatureKind::Hog => "HOG",
            FeatureKind::L5 => "L5",
            FeatureKind::L10 => "L10",
            FeatureKind::L19 => "L19",
            FeatureKind::L28 => "L28",
            FeatureKind::L37 => "L37",
        }
    }

    /// VGG-19 layer a deep slot stands for.
    pub fn layer_name(self) -> Option<&'static str> {
        match self {
            FeatureKind::Hog => None,
            FeatureKind::L5 => Some("conv1_2"),
            FeatureKind::L10 => Some("conv2_2"),
            FeatureKind::L19 => Some("conv3_4"),
            FeatureKind::L28 => Some("conv4_4"),
            FeatureKind::L37 => Some("conv5_4"),
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureKind::ALL
            .into_iter()
            .find(|k| k.tag().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown feature kind '{s}'")))
    }
}

/// Image region to sample: `width x height` pixels times `scale`, around `(cx, cy)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchSpec {
    pub cx: f64,
    pub cy: f64,
    pub width: f64,
    pub height: f64,
    pub scale: f64,
}

impl PatchSpec {
    pub fn new(cx: f64, cy: f64, width: f64, height: f64, scale: f64) -> Result<Self> {
        let p = PatchSpec {
            cx,
            cy,
            width,
            height,
            scale,
        };
        if !(cx.is_finite() && cy.is_finite()) {
            return invalid("patch center must be finite");
        }
        if !(scale > 0.0) || !(width * scale >= 1.0) || !(height * scale >= 1.0) {
            return invalid(format!("patch must be at least 1x1 after scaling: {p:?}"));
        }
        Ok(p)
    }

    /// Padded search region around a target of size `w x h`.
    pub fn around(cx: f64, cy: f64, w: f64, h: f64, padding: f64) -> Result<Self> {
        if !(padding > 1.0) {
            return invalid(format!("padding factor must exceed 1, got {padding}"));
        }
        Self::new(cx, cy, w * padding, h * padding, 1.0)
    }

    pub fn region_width(&self) -> f64 {
        self.width * self.scale
    }

    pub fn region_height(&self) -> f64 {
        self.height * self.scale
    }

    /// Native pixel size of the region, at least 1x1.
    pub fn native_size(&self) -> (usize, usize) {
        (
            (self.region_width().round() as usize).max(1),
            (self.region_height().round() as usize).max(1),
        )
    }
}

/// RGB samples in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePatch {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[f64; 3]>,
}

impl ImagePatch {
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> [f64; 3]) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        ImagePatch {
            width,
            height,
            pixels,
        }
    }

    pub fn at(&self, x: usize, y: usize) -> [f64; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn gray(&self) -> Vec<f64> {
        self.pixels
            .iter()
            .map(|p| (p[0] + p[1] + p[2]) / 3.0)
            .collect()
    }
}

/// Bilinear lookup at array coordinates with edge replication.
fn sample_rgb(image: &RgbImage, x: f64, y: f64) -> [f64; 3] {
    let (w, h) = image.dimensions();
    let xc = x.clamp(0.0, f64::from(w - 1));
    let yc = y.clamp(0.0, f64::from(h - 1));
    let x0 = xc.floor() as u32;
    let y0 = yc.floor() as u32;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = xc - f64::from(x0);
    let fy = yc - f64::from(y0);
    let p00 = image.get_pixel(x0, y0).0;
    let p10 = image.get_pixel(x1, y0).0;
    let p01 = image.get_pixel(x0, y1).0;
    let p11 = image.get_pixel(x1, y1).0;
    let mut out = [0.0; 3];
    for c in 0..3 {
        let top = f64::from(p00[c]) * (1.0 - fx) + f64::from(p10[c]) * fx;
        let bottom = f64::from(p01[c]) * (1.0 - fx) + f64::from(p11[c]) * fx;
        out[c] = (top * (1.0 - fy) + bottom * fy) / 255.0;
    }
    out
}

/// Resamples the region of `spec` onto an `out_w x out_h` pixel grid.
///
/// Box coordinates are continuous with pixel `i` covering `[i, i + 1)`.
pub fn extract_patch(
    image: &RgbImage,
    spec: &PatchSpec,
    out_w: usize,
    out_h: usize,
) -> Result<ImagePatch> {
    let (iw, ih) = image.dimensions();
    if iw == 0 || ih == 0 {
        return invalid("empty image");
    }
    if out_w == 0 || out_h == 0 {
        return invalid("empty patch");
    }
    let sx = spec.region_width() / out_w as f64;
    let sy = spec.region_height() / out_h as f64;
    let x0 = spec.cx - spec.region_width() / 2.0;
    let y0 = spec.cy - spec.region_height() / 2.0;
    Ok(ImagePatch::from_fn(out_w, out_h, |u, v| {
        let x = x0 + (u as f64 + 0.5) * sx - 0.5;
        let y = y0 + (v as f64 + 0.5) * sy - 0.5;
        sample_rgb(image, x, y)
    }))
}

/// Averages a `height x width` plane over `cell x cell` blocks.
pub(crate) fn pool_cells(
    plane: &[f64],
    width: usize,
    height: usize,
    cell: usize,
) -> (usize, usize, Vec<f64>) {
    let rows = height / cell;
    let cols = width / cell;
    let mut out = vec![0.0; rows * cols];
    let norm = 1.0 / (cell * cell) as f64;
    for r in 0..rows {
        for c in 0..cols {
            let mut s = 0.0;
            for y in r * cell..(r + 1) * cell {
                s += plane[y * width + c * cell..y * width + (c + 1) * cell]
                    .iter()
                    .sum::<f64>();
            }
            out[r * cols + c] = s * norm;
        }
    }
    (rows, cols, out)
}

/// Where a tracker gets its per-kind features from.
pub trait FeatureSource: Send + Sync {
    /// Features of `kind` for `patch`, a resampling of `region` in frame
    /// `frame_index`, on the `(patch.height / cell) x (patch.width / cell)` grid.
    fn features(
        &self,
        frame_index: usize,
        patch: &ImagePatch,
        region: &PatchSpec,
        kind: FeatureKind,
        cell: usize,
    ) -> Result<FeatureStack>;
}

/// HOG for the HOG slot, deterministic box-filter pyramids for the deep slots.
#[derive(Debug, Clone, Copy, Default)]
pub struct SyntheticFeatures;

impl FeatureSource for SyntheticFeatures {
    fn features(
        &self,
        _frame_index: usize,
        patch: &ImagePatch,
        _region: &PatchSpec,
        kind: FeatureKind,
        cell: usize,
    ) -> Result<FeatureStack> {
        synth_patch_features(patch, kind, cell)
    }
}

/// HOG computed on the fly; deep slots cropped from precomputed whole-frame maps.
#[derive(Debug, Clone)]
pub struct ChannelFileFeatures {
    file: ChannelMapFile,
    frame_width: u32,
    frame_height: u32,
}

impl ChannelFileFeatures {
    /// `frame_width x frame_height` is the image size the stored maps cover.
    pub fn new(file: ChannelMapFile, frame_width: u32, frame_height: u32) -> Result<Self> {
        for kind in FeatureKind::ALL.into_iter().skip(1) {
            if file.layout(kind).is_none() {
                return Err(Error::NotFound(format!("channel file has no {kind} maps")));
            }
        }
        Ok(ChannelFileFeatures {
            file,
            frame_width,
            frame_height,
        })
    }

    pub fn file(&self) -> &ChannelMapFile {
        &self.file
    }
}

impl FeatureSource for ChannelFileFeatures {
    fn features(
        &self,
        frame_index: usize,
        patch: &ImagePatch,
        region: &PatchSpec,
        kind: FeatureKind,
        cell: usize,
    ) -> Result<FeatureStack> {
        if kind == FeatureKind::Hog {
            return hog_features(patch, cell);
        }
        let native = load_channel_map(&self.file, kind, frame_index, None)?;
        let rows = patch.height / cell;
        let cols = patch.width / cell;
        if rows == 0 || cols == 0 {
            return invalid("patch smaller than one cell");
        }
        let (mr, mc) = (native.rows() as f64, native.cols() as f64);
        let to_map_x = mc / f64::from(self.frame_width);
        let to_map_y = mr / f64::from(self.frame_height);
        let x0 = region.cx - region.region_width() / 2.0;
        let y0 = region.cy - region.region_height() / 2.0;
        let step_x = region.region_width() / cols as f64;
        let step_y = region.region_height() / rows as f64;
        let mut data = Vec::with_capacity(native.channel_count() * rows * cols);
        for d in 0..native.channel_count() {
            let plane = native.channel(d);
            for r in 0..rows {
                let y = (y0 + (r as f64 + 0.5) * step_y) * to_map_y - 0.5;
                for c in 0..cols {
                    let x = (x0 + (c as f64 + 0.5) * step_x) * to_map_x - 0.5;
                    data.push(channel_map::bilinear_at(
                        plane,
                        native.cols(),
                        native.rows(),
                        x,
                        y,
                    ));
                }
            }
        }
        FeatureStack::from_flat(rows, cols, native.channel_count(), data)
    }
}
