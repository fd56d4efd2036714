//! Deterministic stand-ins for the convolutional slots: box-filtered intensity
//! and color planes whose blur radius grows with layer depth.

use image::RgbImage;

use super::{extract_patch, hog_features, pool_cells, FeatureKind, ImagePatch, PatchSpec};
use crate::dcf::FeatureStack;
use crate::error::{invalid, Result};

/// Blur radius in patch pixels and channel count of one synthetic layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthLayer {
    pub radius: usize,
    pub channels: usize,
}

impl SynthLayer {
    /// `None` for HOG, which is not synthesized.
    pub fn of(kind: FeatureKind) -> Option<SynthLayer> {
        let (radius, channels) = match kind {
            FeatureKind::Hog => return None,
            FeatureKind::L5 => (1, 3),
            FeatureKind::L10 => (2, 4),
            FeatureKind::L19 => (3, 5),
            FeatureKind::L28 => (5, 6),
            FeatureKind::L37 => (8, 8),
        };
        Some(SynthLayer { radius, channels })
    }
}

/// Native-resolution features of `kind` for the region `patch` of `image`,
/// on a 4-pixel cell grid.
pub fn synth_features(
    image: &RgbImage,
    patch: &PatchSpec,
    kind: FeatureKind,
) -> Result<FeatureStack> {
    let (w, h) = patch.native_size();
    let pixels = extract_patch(image, patch, w, h)?;
    synth_patch_features(&pixels, kind, 4)
}

/// Features of `kind` on the `cell`-pixel grid of a sampled patch.
pub fn synth_patch_features(
    patch: &ImagePatch,
    kind: FeatureKind,
    cell: usize,
) -> Result<FeatureStack> {
    let Some(layer) = SynthLayer::of(kind) else {
        return hog_features(patch, cell);
    };
    if cell == 0 || patch.width < cell || patch.height < cell {
        return invalid("patch smaller than one cell");
    }
    let (w, h) = (patch.width, patch.height);
    let gray = patch.gray();
    let plane = |c: usize| -> Vec<f64> { patch.pixels.iter().map(|p| p[c]).collect() };
    let r = layer.radius;
    let blurred = box_blur(&gray, w, h, r);
    let mut planes = vec![
        blurred.clone(),
        box_blur(&plane(0), w, h, r),
        box_blur(&plane(2), w, h, r),
    ];
    if layer.channels > 3 {
        let (dx, dy) = derivatives(&blurred, w, h);
        planes.push(dx);
        if layer.channels > 4 {
            planes.push(dy);
        }
    }
    if layer.channels > 5 {
        planes.push(box_blur(&plane(1), w, h, r));
    }
    if layer.channels > 6 {
        let coarse = box_blur(&blurred, w, h, 2 * r + 1);
        planes.push(blurred.iter().zip(&coarse).map(|(a, b)| a - b).collect());
        let (dx, dy) = derivatives(&blurred, w, h);
        planes.push(dx.iter().zip(&dy).map(|(a, b)| a.abs() + b.abs()).collect());
    }
    planes.truncate(layer.channels);

    let mut channels = Vec::with_capacity(planes.len());
    let (mut rows, mut cols) = (0, 0);
    for p in &planes {
        let (pr, pc, mut pooled) = pool_cells(p, w, h, cell);
        rows = pr;
        cols = pc;
        let mean = pooled.iter().sum::<f64>() / pooled.len() as f64;
        for v in &mut pooled {
            *v -= mean;
        }
        channels.push(pooled);
    }
    FeatureStack::new(rows, cols, channels)
}

/// Separable mean filter of width `2r + 1` with edge replication.
pub(crate) fn box_blur(plane: &[f64], w: usize, h: usize, r: usize) -> Vec<f64> {
    if r == 0 {
        return plane.to_vec();
    }
    let norm = 1.0 / (2 * r + 1) as f64;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for x in 0..w {
            let mut s = 0.0;
            for k in 0..=2 * r {
                let xi = (x + k).saturating_sub(r).min(w - 1);
                s += row[xi];
            }
            tmp[y * w + x] = s * norm;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut s = 0.0;
            for k in 0..=2 * r {
                let yi = (y + k).saturating_sub(r).min(h - 1);
                s += tmp[yi * w + x];
            }
            out[y * w + x] = s * norm;
        }
    }
    out
}

fn derivatives(plane: &[f64], w: usize, h: usize) -> (Vec<f64>, Vec<f64>) {
    let mut dx = vec![0.0; w * h];
    let mut dy = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let xl = x.saturating_sub(1);
            let xr = (x + 1).min(w - 1);
            let yu = y.saturating_sub(1);
            let yd = (y + 1).min(h - 1);
            dx[y * w + x] = (plane[y * w + xr] - plane[y * w + xl]) * 0.5;
            dy[y * w + x] = (plane[yd * w + x] - plane[yu * w + x]) * 0.5;
        }
    }
    (dx, dy)
}
