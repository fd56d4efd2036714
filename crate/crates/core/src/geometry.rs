//! Axis-aligned target boxes in 0-indexed, center-based pixel coordinates.

use crate::error::{invalid, Result};

/// Minimum side length a box is clamped to.
pub const MIN_BOX_SIDE: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        let b = BoundingBox { cx, cy, w, h };
        if !(cx.is_finite() && cy.is_finite() && w.is_finite() && h.is_finite()) {
            return invalid(format!("non-finite box {b:?}"));
        }
        if w <= 0.0 || h <= 0.0 {
            return invalid(format!("box must have positive area: {b:?}"));
        }
        Ok(b)
    }

    /// Box from a top-left corner given in 0-indexed pixels.
    pub fn from_top_left(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        Self::new(x + w / 2.0, y + h / 2.0, w, h)
    }

    pub fn left(&self) -> f64 {
        self.cx - self.w / 2.0
    }

    pub fn top(&self) -> f64 {
        self.cy - self.h / 2.0
    }

    pub fn right(&self) -> f64 {
        self.cx + self.w / 2.0
    }

    pub fn bottom(&self) -> f64 {
        self.cy + self.h / 2.0
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (self.cx, self.cy)
    }

    pub fn intersection_area(&self, other: &BoundingBox) -> f64 {
        let iw = (self.right().min(other.right()) - self.left().max(other.left())).max(0.0);
        let ih = (self.bottom().min(other.bottom()) - self.top().max(other.top())).max(0.0);
        iw * ih
    }

    /// Intersection over union; 0 for disjoint boxes.
    pub fn iou(&self, other: &BoundingBox) -> f64 {
        let inter = self.intersection_area(other);
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            (inter / union).clamp(0.0, 1.0)
        }
    }

    pub fn center_distance(&self, other: &BoundingBox) -> f64 {
        (self.cx - other.cx).hypot(self.cy - other.cy)
    }

    /// Keeps the center inside the image and the size within `[MIN_BOX_SIDE, image size]`.
    pub fn clamped_to(&self, width: u32, height: u32) -> BoundingBox {
        let (iw, ih) = (f64::from(width.max(1)), f64::from(height.max(1)));
        let w = self.w.clamp(MIN_BOX_SIDE, iw.max(MIN_BOX_SIDE));
        let h = self.h.clamp(MIN_BOX_SIDE, ih.max(MIN_BOX_SIDE));
        BoundingBox {
            cx: self.cx.clamp(0.0, iw - 1.0),
            cy: self.cy.clamp(0.0, ih - 1.0),
            w,
            h,
        }
    }
}
