//! Image sequences in OTB directory layout and synthetic sequences with exact
//! ground truth.

mod synth;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use image::RgbImage;

pub use synth::{synth_sequence, write_sequence, Background, SynthScript};

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

/// Attribute tags of the OTB and TempleColor benchmarks.
pub const ATTRIBUTE_TAGS: [&str; 11] = [
    "IV", "SV", "OCC", "DEF", "MB", "FM", "IPR", "OPR", "OV", "BC", "LR",
];

const IMAGE_EXTENSIONS: [&str; 4] = ["jpg", "jpeg", "png", "bmp"];

/// Where a frame's pixels come from.
#[derive(Debug, Clone)]
pub enum FrameSource {
    File(PathBuf),
    Memory(Arc<RgbImage>),
}

/// An ordered frame list with one ground-truth box per frame.
#[derive(Debug, Clone)]
pub struct SequenceSpec {
    name: String,
    frames: Vec<FrameSource>,
    ground_truth: Vec<BoundingBox>,
    attributes: Vec<String>,
}

impl SequenceSpec {
    pub fn new(
        name: impl Into<String>,
        frames: Vec<FrameSource>,
        ground_truth: Vec<BoundingBox>,
        attributes: Vec<String>,
    ) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::Format("sequence has no frames".into()));
        }
        if frames.len() != ground_truth.len() {
            return Err(Error::Format(format!(
                "{} frames but {} ground-truth boxes",
                frames.len(),
                ground_truth.len()
            )));
        }
        for (i, b) in ground_truth.iter().enumerate() {
            BoundingBox::new(b.cx, b.cy, b.w, b.h)
                .map_err(|e| Error::Format(format!("ground-truth box {}: {e}", i + 1)))?;
        }
        for tag in &attributes {
            if !ATTRIBUTE_TAGS.contains(&tag.as_str()) {
                return Err(Error::Format(format!("unknown attribute tag {tag:?}")));
            }
        }
        Ok(SequenceSpec {
            name: name.into(),
            frames,
            ground_truth,
            attributes,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[FrameSource] {
        &self.frames
    }

    pub fn ground_truth(&self) -> &[BoundingBox] {
        &self.ground_truth
    }

    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    /// Decodes frame `index` as RGB; grayscale frames are replicated to three channels.
    pub fn frame(&self, index: usize) -> Result<Arc<RgbImage>> {
        match self.frames.get(index) {
            None => Err(Error::InvalidArgument(format!(
                "frame {index} out of range for {} frames",
                self.frames.len()
            ))),
            Some(FrameSource::Memory(img)) => Ok(Arc::clone(img)),
            Some(FrameSource::File(path)) => image::open(path)
                .map(|img| Arc::new(img.to_rgb8()))
                .map_err(|e| Error::Image {
                    frame: index,
                    path: path.clone(),
                    message: e.to_string(),
                }),
        }
    }
}

/// Parses one box per non-empty line as `x,y,w,h` (commas, tabs or spaces),
/// top-left origin, 1-indexed pixels.
pub fn parse_ground_truth(text: &str) -> Result<Vec<BoundingBox>> {
    let mut boxes = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        if fields.len() != 4 {
            return Err(Error::Format(format!(
                "ground-truth line {} has {} fields, expected 4",
                n + 1,
                fields.len()
            )));
        }
        let mut v = [0.0; 4];
        for (slot, field) in v.iter_mut().zip(&fields) {
            *slot = field.parse().map_err(|_| {
                Error::Format(format!("ground-truth line {}: bad number {field:?}", n + 1))
            })?;
        }
        let b = BoundingBox::from_top_left(v[0] - 1.0, v[1] - 1.0, v[2], v[3])
            .map_err(|e| Error::Format(format!("ground-truth line {}: {e}", n + 1)))?;
        boxes.push(b);
    }
    Ok(boxes)
}

fn round6(v: f64) -> f64 {
    let r = (v * 1e6).round() / 1e6;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Inverse of [`parse_ground_truth`], comma-separated, rounded to 1e-6 px.
pub fn format_ground_truth(boxes: &[BoundingBox]) -> String {
    let mut out = String::new();
    for b in boxes {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            round6(b.left() + 1.0),
            round6(b.top() + 1.0),
            round6(b.w),
            round6(b.h)
        );
    }
    out
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        .unwrap_or(false)
}

/// Loads `dir/img/*` (sorted by file name) and `dir/groundtruth_rect.txt`.
/// An optional `dir/attributes.txt` lists attribute tags.
pub fn load_sequence(dir: &Path) -> Result<SequenceSpec> {
    let img_dir = dir.join("img");
    let entries = fs::read_dir(&img_dir).map_err(|e| Error::io(&img_dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(&img_dir, e))?.path();
        if path.is_file() && is_image(&path) {
            paths.push(path);
        }
    }
    paths.sort();

    let gt_path = dir.join("groundtruth_rect.txt");
    let text = fs::read_to_string(&gt_path).map_err(|e| Error::io(&gt_path, e))?;
    let ground_truth = parse_ground_truth(&text)?;
    if paths.len() != ground_truth.len() {
        return Err(Error::Format(format!(
            "{} has {} images but {} has {} boxes",
            img_dir.display(),
            paths.len(),
            gt_path.display(),
            ground_truth.len()
        )));
    }

    let mut size = None;
    for (frame, path) in paths.iter().enumerate() {
        let dims = image::image_dimensions(path).map_err(|e| Error::Image {
            frame,
            path: path.clone(),
            message: e.to_string(),
        })?;
        match size {
            None => size = Some(dims),
            Some(s) if s != dims => {
                return Err(Error::Format(format!(
                    "frame {frame} is {}x{}, earlier frames are {}x{}",
                    dims.0, dims.1, s.0, s.1
                )))
            }
            _ => {}
        }
    }

    let attr_path = dir.join("attributes.txt");
    let attributes = if attr_path.exists() {
        fs::read_to_string(&attr_path)
            .map_err(|e| Error::io(&attr_path, e))?
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(str::to_owned)
            .collect()
    } else {
        Vec::new()
    };

    let name = dir
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("sequence")
        .to_owned();
    SequenceSpec::new(
        name,
        paths.into_iter().map(FrameSource::File).collect(),
        ground_truth,
        attributes,
    )
}
