//! Synthetic sequences: a textured rectangle moving and zooming over a
//! background, described by `key = value` lines.
//!
//! | key        | meaning                                          | default |
//! |------------|--------------------------------------------------|---------|
//! | name       | sequence name                                    | synth   |
//! | frames     | frame count                                      | 50      |
//! | width      | image width in px                                | 320     |
//! | height     | image height in px                               | 240     |
//! | target_w   | target width at frame 0                          | 40      |
//! | target_h   | target height at frame 0                         | 40      |
//! | start_x    | target center x at frame 0 (0-indexed px)        | 80      |
//! | start_y    | target center y at frame 0                       | 120     |
//! | dx, dy     | center displacement per frame                    | 0       |
//! | zoom       | size multiplier per frame                        | 1       |
//! | seed       | texture and noise seed                           | 0       |
//! | occlusion  | inclusive frame range `a-b` hiding half the target | none  |
//! | background | `noise` or `flat`                                | noise   |
//!
//! Blank lines and lines starting with `#` are ignored.

use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use image::{Rgb, RgbImage};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{format_ground_truth, FrameSource, SequenceSpec};
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

/// Texture lattice resolution across the target.
const TEXTURE_CELLS: usize = 8;
/// Background lattice spacing in pixels.
const BACKGROUND_SPACING: f64 = 16.0;
/// Per-frame pixel noise amplitude, in 8-bit levels.
const FRAME_NOISE: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Background {
    Noise,
    Flat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthScript {
    pub name: String,
    pub frames: usize,
    pub width: u32,
    pub height: u32,
    pub target_w: f64,
    pub target_h: f64,
    pub start_x: f64,
    pub start_y: f64,
    pub dx: f64,
    pub dy: f64,
    pub zoom: f64,
    pub seed: u64,
    pub occlusion: Option<(usize, usize)>,
    pub background: Background,
}

impl Default for SynthScript {
    fn default() -> Self {
        SynthScript {
            name: "synth".into(),
            frames: 50,
            width: 320,
            height: 240,
            target_w: 40.0,
            target_h: 40.0,
            start_x: 80.0,
            start_y: 120.0,
            dx: 0.0,
            dy: 0.0,
            zoom: 1.0,
            seed: 0,
            occlusion: None,
            background: Background::Noise,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("synth script: bad value {value:?} for {key}")))
}

impl FromStr for SynthScript {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut s = SynthScript::default();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("synth script: expected key = value, got {line:?}"))
            })?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "name" => s.name = value.to_owned(),
                "frames" => s.frames = parse_value(key, value)?,
                "width" => s.width = parse_value(key, value)?,
                "height" => s.height = parse_value(key, value)?,
                "target_w" => s.target_w = parse_value(key, value)?,
                "target_h" => s.target_h = parse_value(key, value)?,
                "start_x" => s.start_x = parse_value(key, value)?,
                "start_y" => s.start_y = parse_value(key, value)?,
                "dx" => s.dx = parse_value(key, value)?,
                "dy" => s.dy = parse_value(key, value)?,
                "zoom" => s.zoom = parse_value(key, value)?,
                "seed" => s.seed = parse_value(key, value)?,
                "occlusion" => {
                    s.occlusion = if value == "none" {
                        None
                    } else {
                        let (a, b) = value.split_once('-').ok_or_else(|| {
                            Error::Config(format!(
                                "synth script: occlusion must be a-b, got {value:?}"
                            ))
                        })?;
                        Some((parse_value(key, a.trim())?, parse_value(key, b.trim())?))
                    }
                }
                "background" => {
                    s.background = match value {
                        "noise" => Background::Noise,
                        "flat" => Background::Flat,
                        _ => {
                            return Err(Error::Config(format!(
                                "synth script: unknown background {value:?}"
                            )))
                        }
                    }
                }
                _ => return Err(Error::Config(format!("synth script: unknown key {key:?}"))),
            }
        }
        s.validate()?;
        Ok(s)
    }
}

impl SynthScript {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("synth script: {msg}")));
        if self.frames == 0 {
            return bad("frames must be positive".into());
        }
        if self.width < 8 || self.height < 8 {
            return bad(format!("image {}x{} is too small", self.width, self.height));
        }
        for (k, v) in [
            ("target_w", self.target_w),
            ("target_h", self.target_h),
            ("zoom", self.zoom),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{k} must be positive, got {v}"));
            }
        }
        for (k, v) in [
            ("start_x", self.start_x),
            ("start_y", self.start_y),
            ("dx", self.dx),
            ("dy", self.dy),
        ] {
            if !v.is_finite() {
                return bad(format!("{k} must be finite"));
            }
        }
        if let Some((a, b)) = self.occlusion {
            if a > b {
                return bad(format!("occlusion range {a}-{b} is reversed"));
            }
        }
        for t in 0..self.frames {
            self.box_at(t)
                .map_err(|e| Error::Config(format!("synth script: frame {t}: {e}")))?;
        }
        Ok(())
    }

    /// Exact ground truth at frame `t`.
    pub fn box_at(&self, t: usize) -> Result<BoundingBox> {
        let s = self.zoom.powi(t as i32);
        BoundingBox::new(
            self.start_x + self.dx * t as f64,
            self.start_y + self.dy * t as f64,
            self.target_w * s,
            self.target_h * s,
        )
    }
}

fn lattice(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Vec<[f64; 3]> {
    (0..w * h)
        .map(|_| [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()])
        .collect()
}

fn bilinear(lat: &[[f64; 3]], lw: usize, lh: usize, u: f64, v: f64) -> [f64; 3] {
    let u = u.clamp(0.0, (lw - 1) as f64);
    let v = v.clamp(0.0, (lh - 1) as f64);
    let (x0, y0) = (u.floor() as usize, v.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(lw - 1), (y0 + 1).min(lh - 1));
    let (fx, fy) = (u - x0 as f64, v - y0 as f64);
    let mut out = [0.0; 3];
    for (c, o) in out.iter_mut().enumerate() {
        let top = lat[y0 * lw + x0][c] * (1.0 - fx) + lat[y0 * lw + x1][c] * fx;
        let bottom = lat[y1 * lw + x0][c] * (1.0 - fx) + lat[y1 * lw + x1][c] * fx;
        *o = top * (1.0 - fy) + bottom * fy;
    }
    out
}

/// Renders every frame in memory. Same script, same pixels.
pub fn synth_sequence(script: &SynthScript) -> Result<SequenceSpec> {
    script.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(script.seed);
    let tex_n = TEXTURE_CELLS + 1;
    let texture = lattice(&mut rng, tex_n, tex_n);
    let bg_w = (script.width as f64 / BACKGROUND_SPACING).ceil() as usize + 2;
    let bg_h = (script.height as f64 / BACKGROUND_SPACING).ceil() as usize + 2;
    let background = lattice(&mut rng, bg_w, bg_h);

    let mut frames = Vec::with_capacity(script.frames);
    let mut ground_truth = Vec::with_capacity(script.frames);
    for t in 0..script.frames {
        let target = script.box_at(t)?;
        let mut noise = ChaCha8Rng::seed_from_u64(script.seed ^ ((t as u64 + 1) << 32));
        let occluded = script.occlusion.is_some_and(|(a, b)| (a..=b).contains(&t));
        let img = RgbImage::from_fn(script.width, script.height, |x, y| {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let u = (px - target.left()) / target.w;
            let v = (py - target.top()) / target.h;
            let inside = (0.0..1.0).contains(&u) && (0.0..1.0).contains(&v);
            let rgb = if inside && !(occluded && u < 0.5) {
                let c = bilinear(
                    &texture,
                    tex_n,
                    tex_n,
                    u * TEXTURE_CELLS as f64,
                    v * TEXTURE_CELLS as f64,
                );
                [
                    150.0 + 100.0 * c[0],
                    30.0 + 120.0 * c[1],
                    20.0 + 60.0 * c[2],
                ]
            } else if inside {
                [128.0, 128.0, 128.0]
            } else {
                match script.background {
                    Background::Flat => [40.0, 60.0, 110.0],
                    Background::Noise => {
                        let c = bilinear(
                            &background,
                            bg_w,
                            bg_h,
                            px / BACKGROUND_SPACING,
                            py / BACKGROUND_SPACING,
                        );
                        [20.0 + 50.0 * c[0], 40.0 + 60.0 * c[1], 90.0 + 90.0 * c[2]]
                    }
                }
            };
            let jitter = FRAME_NOISE * (2.0 * noise.gen::<f64>() - 1.0);
            Rgb(rgb.map(|c| (c + jitter).round().clamp(0.0, 255.0) as u8))
        });
        frames.push(FrameSource::Memory(Arc::new(img)));
        ground_truth.push(target);
    }
    let attributes = {
        let mut a = Vec::new();
        if script.zoom != 1.0 {
            a.push("SV".to_owned());
        }
        if script.occlusion.is_some() {
            a.push("OCC".to_owned());
        }
        a
    };
    SequenceSpec::new(script.name.clone(), frames, ground_truth, attributes)
}

/// Writes `seq` in OTB layout: `img/NNNN.png`, `groundtruth_rect.txt` and,
/// when tagged, `attributes.txt`.
pub fn write_sequence(seq: &SequenceSpec, dir: &Path) -> Result<()> {
    let img_dir = dir.join("img");
    fs::create_dir_all(&img_dir).map_err(|e| Error::io(&img_dir, e))?;
    for i in 0..seq.len() {
        let frame = seq.frame(i)?;
        let path = img_dir.join(format!("{:04}.png", i + 1));
        frame.save(&path).map_err(|e| Error::Image {
            frame: i,
            path: path.clone(),
            message: e.to_string(),
        })?;
    }
    let gt_path = dir.join("groundtruth_rect.txt");
    fs::write(&gt_path, format_ground_truth(seq.ground_truth()))
        .map_err(|e| Error::io(&gt_path, e))?;
    if !seq.attributes().is_empty() {
        let path = dir.join("attributes.txt");
        fs::write(&path, seq.attributes().join(",") + "\n").map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
