use image::RgbImage;

use super::{extract_patch, pool_cells, ImagePatch, PatchSpec};
use crate::error::{invalid, Result};
use crate::geometry::BoundingBox;

/// Per-cell foreground likelihood in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorMask {
    pub rows: usize,
    pub cols: usize,
    pub grid: Vec<f64>,
}

/// Color mask of the region `patch` of `image`, with `fg_box` in image coordinates.
pub fn color_mask(
    image: &RgbImage,
    patch: &PatchSpec,
    fg_box: &BoundingBox,
    bins: usize,
    cell: usize,
) -> Result<ColorMask> {
    let (w, h) = patch.native_size();
    let pixels = extract_patch(image, patch, w, h)?;
    let sx = w as f64 / patch.region_width();
    let sy = h as f64 / patch.region_height();
    let left = patch.cx - patch.region_width() / 2.0;
    let top = patch.cy - patch.region_height() / 2.0;
    let local = BoundingBox {
        cx: (fg_box.cx - left) * sx,
        cy: (fg_box.cy - top) * sy,
        w: fg_box.w * sx,
        h: fg_box.h * sy,
    };
    color_mask_for_patch(&pixels, &local, bins, cell)
}

fn bin_of(p: [f64; 3], bins: usize) -> usize {
    let q = |v: f64| ((v.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1);
    (q(p[0]) * bins + q(p[1])) * bins + q(p[2])
}

/// Per-pixel foreground posterior of the pixel's joint RGB bin, averaged over
/// `cell x cell` blocks.
///
/// Background counts are rescaled to the foreground pixel total (equal
/// priors) and the posterior is smoothed by one pseudo-count per class:
/// `(n_fg + 1) / (n_fg + n_bg' + 2)`. A pixel is foreground when its center
/// lies inside `fg` (patch pixel units).
pub fn color_mask_for_patch(
    patch: &ImagePatch,
    fg: &BoundingBox,
    bins: usize,
    cell: usize,
) -> Result<ColorMask> {
    if bins < 2 {
        return invalid(format!(
            "need at least 2 color bins per channel, got {bins}"
        ));
    }
    if cell == 0 || patch.width < cell || patch.height < cell {
        return invalid("patch smaller than one cell");
    }
    let inside = |x: usize, y: usize| {
        let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
        px >= fg.left() && px < fg.right() && py >= fg.top() && py < fg.bottom()
    };
    let total_bins = bins * bins * bins;
    let mut fg_hist = vec![0u32; total_bins];
    let mut bg_hist = vec![0u32; total_bins];
    let (mut n_fg, mut n_bg) = (0u64, 0u64);
    let mut bin_ids = Vec::with_capacity(patch.pixels.len());
    for y in 0..patch.height {
        for x in 0..patch.width {
            let b = bin_of(patch.at(x, y), bins);
            bin_ids.push(b);
            if inside(x, y) {
                fg_hist[b] += 1;
                n_fg += 1;
            } else {
                bg_hist[b] += 1;
                n_bg += 1;
            }
        }
    }
    if n_fg == 0 {
        return invalid(format!("foreground box {fg:?} covers no patch pixel"));
    }
    let bg_scale = if n_bg > 0 {
        n_fg as f64 / n_bg as f64
    } else {
        0.0
    };
    let posterior: Vec<f64> = bin_ids
        .iter()
        .map(|&b| {
            let f = f64::from(fg_hist[b]);
            let g = f64::from(bg_hist[b]) * bg_scale;
            (f + 1.0) / (f + g + 2.0)
        })
        .collect();
    let (rows, cols, grid) = pool_cells(&posterior, patch.width, patch.height, cell);
    Ok(ColorMask { rows, cols, grid })
}
