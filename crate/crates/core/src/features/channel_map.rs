//! Precomputed whole-frame channel maps.
//!
//! Little-endian layout:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "FACF"
//! 4       4     version (u32) = 1
//! 8       4     frame_count (u32)
//! 12      72    6 x (channels u32, rows u32, cols u32), kinds in pool order
//!               HOG, L5, L10, L19, L28, L37; channels = rows = cols = 0 marks
//!               an absent kind
//! 84      ...   payload: for each frame, for each present kind in pool order,
//!               channels x rows x cols f32 values (channel-major, row-major)
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::FeatureKind;
use crate::dcf::FeatureStack;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"FACF";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 12 + 6 * 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KindLayout {
    pub channels: usize,
    pub rows: usize,
    pub cols: usize,
}

impl KindLayout {
    fn len(&self) -> usize {
        self.channels * self.rows * self.cols
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMapFile {
    frame_count: usize,
    layouts: [Option<KindLayout>; 6],
    payload: Vec<f32>,
}

impl ChannelMapFile {
    /// Zero-filled file with the given per-kind layouts.
    pub fn new(frame_count: usize, layouts: [Option<KindLayout>; 6]) -> Result<Self> {
        for l in layouts.iter().flatten() {
            if l.channels == 0 || l.rows == 0 || l.cols == 0 {
                return Err(Error::InvalidArgument(format!("empty layout {l:?}")));
            }
        }
        let per_frame: usize = layouts.iter().flatten().map(KindLayout::len).sum();
        Ok(ChannelMapFile {
            frame_count,
            layouts,
            payload: vec![0.0; per_frame * frame_count],
        })
    }

    pub fn frame_count(&self) -> usize {
        self.frame_count
    }

    pub fn layout(&self, kind: FeatureKind) -> Option<KindLayout> {
        self.layouts[kind.index()]
    }

    fn per_frame(&self) -> usize {
        self.layouts.iter().flatten().map(KindLayout::len).sum()
    }

    fn offset(&self, kind: FeatureKind, frame: usize) -> Result<(usize, KindLayout)> {
        let layout = self
            .layout(kind)
            .ok_or_else(|| Error::NotFound(format!("kind {kind} not present in channel file")))?;
        if frame >= self.frame_count {
            return Err(Error::NotFound(format!(
                "frame {frame} out of range (file has {} frames)",
                self.frame_count
            )));
        }
        let within: usize = self.layouts[..kind.index()]
            .iter()
            .flatten()
            .map(KindLayout::len)
            .sum();
        Ok((frame * self.per_frame() + within, layout))
    }

    /// Stores `stack` (narrowed to f32) as the `kind` maps of `frame`.
    pub fn set(&mut self, kind: FeatureKind, frame: usize, stack: &FeatureStack) -> Result<()> {
        let (start, layout) = self.offset(kind, frame)?;
        if (stack.channel_count(), stack.rows(), stack.cols())
            != (layout.channels, layout.rows, layout.cols)
        {
            return Err(Error::InvalidArgument(format!(
                "stack shape does not match the {kind} layout {layout:?}"
            )));
        }
        for (dst, src) in self.payload[start..start + layout.len()]
            .iter_mut()
            .zip(stack.as_slice())
        {
            *dst = *src as f32;
        }
        Ok(())
    }

    pub fn native(&self, kind: FeatureKind, frame: usize) -> Result<FeatureStack> {
        let (start, l) = self.offset(kind, frame)?;
        let data = self.payload[start..start + l.len()]
            .iter()
            .map(|&v| f64::from(v))
            .collect();
        FeatureStack::from_flat(l.rows, l.cols, l.channels, data)
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        let mut header = Vec::with_capacity(HEADER_LEN);
        header.extend_from_slice(MAGIC);
        header.extend_from_slice(&VERSION.to_le_bytes());
        header.extend_from_slice(&(self.frame_count as u32).to_le_bytes());
        for layout in &self.layouts {
            let (c, r, k) = layout.map_or((0, 0, 0), |l| (l.channels, l.rows, l.cols));
            for v in [c, r, k] {
                header.extend_from_slice(&(v as u32).to_le_bytes());
            }
        }
        w.write_all(&header)?;
        let mut body = Vec::with_capacity(self.payload.len() * 4);
        for v in &self.payload {
            body.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&body)?;
        w.flush()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out)
            .expect("writing to a Vec cannot fail");
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Format(format!(
                "channel file truncated: {} bytes, header needs {HEADER_LEN}",
                bytes.len()
            )));
        }
        if &bytes[0..4] != MAGIC {
            return Err(Error::Format("bad channel file magic".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
        let version = word(4);
        if version != VERSION as usize {
            return Err(Error::Format(format!(
                "unsupported channel file version {version}"
            )));
        }
        let frame_count = word(8);
        let mut layouts = [None; 6];
        for (k, slot) in layouts.iter_mut().enumerate() {
            let base = 12 + k * 12;
            let (c, r, n) = (word(base), word(base + 4), word(base + 8));
            match (c, r, n) {
                (0, 0, 0) => {}
                (c, r, n) if c > 0 && r > 0 && n > 0 => {
                    *slot = Some(KindLayout {
                        channels: c,
                        rows: r,
                        cols: n,
                    })
                }
                _ => {
                    return Err(Error::Format(format!(
                        "inconsistent layout for kind {k}: {c}x{r}x{n}"
                    )))
                }
            }
        }
        let per_frame: usize = layouts.iter().flatten().map(KindLayout::len).sum();
        let expected = per_frame
            .checked_mul(frame_count)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::Format("channel file header overflows".into()))?;
        let body = &bytes[HEADER_LEN..];
        if body.len() != expected {
            return Err(Error::Format(format!(
                "payload is {} bytes, header implies {expected}",
                body.len()
            )));
        }
        let payload: Vec<f32> = body
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        if payload.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format(
                "channel file contains non-finite values".into(),
            ));
        }
        Ok(ChannelMapFile {
            frame_count,
            layouts,
            payload,
        })
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)
            .map_err(|e| Error::io("<channel stream>", e))?;
        Self::from_bytes(&bytes)
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Stored maps of `kind` for `frame_index`, bilinearly resampled to `grid`
/// (`rows, cols`) when given.
pub fn load_channel_map(
    file: &ChannelMapFile,
    kind: FeatureKind,
    frame_index: usize,
    grid: Option<(usize, usize)>,
) -> Result<FeatureStack> {
    let native = file.native(kind, frame_index)?;
    match grid {
        None => Ok(native),
        Some((rows, cols)) if (rows, cols) == (native.rows(), native.cols()) => Ok(native),
        Some((rows, cols)) => resample_bilinear(&native, rows, cols),
    }
}

/// Bilinear sample of a `rows x cols` plane at array coordinates, edges replicated.
pub(crate) fn bilinear_at(plane: &[f64], cols: usize, rows: usize, x: f64, y: f64) -> f64 {
    let xc = x.clamp(0.0, (cols - 1) as f64);
    let yc = y.clamp(0.0, (rows - 1) as f64);
    let x0 = xc.floor() as usize;
    let y0 = yc.floor() as usize;
    let x1 = (x0 + 1).min(cols - 1);
    let y1 = (y0 + 1).min(rows - 1);
    let fx = xc - x0 as f64;
    let fy = yc - y0 as f64;
    let top = plane[y0 * cols + x0] * (1.0 - fx) + plane[y0 * cols + x1] * fx;
    let bottom = plane[y1 * cols + x0] * (1.0 - fx) + plane[y1 * cols + x1] * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Half-pixel-aligned bilinear resampling of every channel.
pub fn resample_bilinear(stack: &FeatureStack, rows: usize, cols: usize) -> Result<FeatureStack> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidArgument(
            "resample target must be non-empty".into(),
        ));
    }
    let (sr, sc) = (stack.rows(), stack.cols());
    let fy = sr as f64 / rows as f64;
    let fx = sc as f64 / cols as f64;
    let mut data = Vec::with_capacity(stack.channel_count() * rows * cols);
    for d in 0..stack.channel_count() {
        let plane = stack.channel(d);
        for r in 0..rows {
            let y = (r as f64 + 0.5) * fy - 0.5;
            for c in 0..cols {
                let x = (c as f64 + 0.5) * fx - 0.5;
                data.push(bilinear_at(plane, sc, sr, x, y));
            }
        }
    }
    FeatureStack::from_flat(rows, cols, stack.channel_count(), data)
}
