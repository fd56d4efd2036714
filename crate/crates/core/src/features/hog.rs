//! 31-channel Felzenszwalb HOG: 18 contrast-sensitive orientations,
//! 9 contrast-insensitive orientations and 4 texture (gradient energy) channels.

use image::RgbImage;

use super::{extract_patch, ImagePatch, PatchSpec};
use crate::dcf::FeatureStack;
use crate::error::{invalid, Result};

pub const HOG_CHANNELS: usize = 31;

const ORIENTATIONS: usize = 9;
const TRUNCATION: f64 = 0.2;
const NORM_EPS: f64 = 1e-4;
const TEXTURE_SCALE: f64 = 0.2357;

/// HOG of the native-resolution patch `patch` cut from `image`.
pub fn extract_hog(image: &RgbImage, patch: &PatchSpec, cell_size: usize) -> Result<FeatureStack> {
    let (w, h) = patch.native_size();
    let pixels = extract_patch(image, patch, w, h)?;
    hog_features(&pixels, cell_size)
}

/// HOG over `floor(h / cell) x floor(w / cell)` cells of an already sampled patch.
pub fn hog_features(patch: &ImagePatch, cell: usize) -> Result<FeatureStack> {
    if cell == 0 {
        return invalid("cell size must be at least 1");
    }
    let rows = patch.height / cell;
    let cols = patch.width / cell;
    if rows == 0 || cols == 0 {
        return invalid(format!(
            "patch {}x{} is smaller than one {cell}px cell",
            patch.width, patch.height
        ));
    }
    let hist = cell_histograms(patch, cell, rows, cols);
    Ok(normalize(&hist, rows, cols))
}

fn orientation_basis() -> [(f64, f64); ORIENTATIONS] {
    let mut basis = [(0.0, 0.0); ORIENTATIONS];
    for (o, b) in basis.iter_mut().enumerate() {
        let theta = o as f64 * std::f64::consts::PI / ORIENTATIONS as f64;
        *b = (theta.cos(), theta.sin());
    }
    basis
}

/// Gradient of the strongest color channel, central differences, replicated borders.
fn gradient(patch: &ImagePatch, x: usize, y: usize) -> (f64, f64) {
    let xl = x.saturating_sub(1);
    let xr = (x + 1).min(patch.width - 1);
    let yu = y.saturating_sub(1);
    let yd = (y + 1).min(patch.height - 1);
    let (mut best_dx, mut best_dy, mut best) = (0.0, 0.0, -1.0);
    for c in 0..3 {
        let dx = (patch.at(xr, y)[c] - patch.at(xl, y)[c]) * 255.0;
        let dy = (patch.at(x, yd)[c] - patch.at(x, yu)[c]) * 255.0;
        let mag = dx * dx + dy * dy;
        if mag > best {
            best = mag;
            best_dx = dx;
            best_dy = dy;
        }
    }
    (best_dx, best_dy)
}

/// Contrast-sensitive bin in `0..18` snapped by maximal projection.
pub(crate) fn orientation_bin(dx: f64, dy: f64, basis: &[(f64, f64); ORIENTATIONS]) -> usize {
    let mut best_dot = 0.0;
    let mut best_o = 0;
    for (o, &(u, v)) in basis.iter().enumerate() {
        let dot = u * dx + v * dy;
        if dot > best_dot {
            best_dot = dot;
            best_o = o;
        } else if -dot > best_dot {
            best_dot = -dot;
            best_o = o + ORIENTATIONS;
        }
    }
    best_o
}

fn cell_histograms(patch: &ImagePatch, cell: usize, rows: usize, cols: usize) -> Vec<f64> {
    let bins = 2 * ORIENTATIONS;
    let basis = orientation_basis();
    let mut hist = vec![0.0; rows * cols * bins];
    let inv = 1.0 / cell as f64;
    for y in 0..rows * cell {
        let yp = (y as f64 + 0.5) * inv - 0.5;
        let iyp = yp.floor() as isize;
        let vy0 = yp - iyp as f64;
        let vy1 = 1.0 - vy0;
        for x in 0..cols * cell {
            let (dx, dy) = gradient(patch, x, y);
            let mag = (dx * dx + dy * dy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let o = orientation_bin(dx, dy, &basis);
            let xp = (x as f64 + 0.5) * inv - 0.5;
            let ixp = xp.floor() as isize;
            let vx0 = xp - ixp as f64;
            let vx1 = 1.0 - vx0;
            let mut add = |r: isize, c: isize, weight: f64| {
                if r >= 0 && c >= 0 && (r as usize) < rows && (c as usize) < cols {
                    hist[(r as usize * cols + c as usize) * bins + o] += weight * mag;
                }
            };
            add(iyp, ixp, vy1 * vx1);
            add(iyp, ixp + 1, vy1 * vx0);
            add(iyp + 1, ixp, vy0 * vx1);
            add(iyp + 1, ixp + 1, vy0 * vx0);
        }
    }
    hist
}

fn normalize(hist: &[f64], rows: usize, cols: usize) -> FeatureStack {
    let bins = 2 * ORIENTATIONS;
    let energy: Vec<f64> = hist
        .chunks_exact(bins)
        .map(|h| {
            (0..ORIENTATIONS)
                .map(|o| {
                    let s = h[o] + h[o + ORIENTATIONS];
                    s * s
                })
                .sum()
        })
        .collect();
    let e = |r: isize, c: isize| {
        let r = r.clamp(0, rows as isize - 1) as usize;
        let c = c.clamp(0, cols as isize - 1) as usize;
        energy[r * cols + c]
    };
    let plane = rows * cols;
    let mut out = vec![0.0; HOG_CHANNELS * plane];
    for r in 0..rows {
        for c in 0..cols {
            let (ri, ci) = (r as isize, c as isize);
            let block = |dr: isize, dc: isize| {
                let s = e(ri + dr, ci + dc)
                    + e(ri + dr, ci + dc + 1)
                    + e(ri + dr + 1, ci + dc)
                    + e(ri + dr + 1, ci + dc + 1);
                1.0 / (s + NORM_EPS).sqrt()
            };
            let norms = [block(0, 0), block(-1, 0), block(0, -1), block(-1, -1)];
            let h = &hist[(r * cols + c) * bins..(r * cols + c + 1) * bins];
            let at = r * cols + c;
            let mut texture = [0.0; 4];
            for o in 0..bins {
                let mut sum = 0.0;
                for (t, n) in texture.iter_mut().zip(norms) {
                    let v = (h[o] * n).min(TRUNCATION);
                    sum += v;
                    *t += v;
                }
                out[o * plane + at] = 0.5 * sum;
            }
            for o in 0..ORIENTATIONS {
                let s = h[o] + h[o + ORIENTATIONS];
                let sum: f64 = norms.iter().map(|n| (s * n).min(TRUNCATION)).sum();
                out[(bins + o) * plane + at] = 0.5 * sum;
            }
            for (i, t) in texture.iter().enumerate() {
                out[(bins + ORIENTATIONS + i) * plane + at] = TEXTURE_SCALE * t;
            }
        }
    }
    FeatureStack::from_flat(rows, cols, HOG_CHANNELS, out).expect("hog output is finite")
}
