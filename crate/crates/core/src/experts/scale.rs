//! One-dimensional correlation filter over a pyramid of scale samples.
//!
//! Each of the `S` samples is the HOG vector of the target region resized by
//! `a^s`, `s ∈ -⌊S/2⌋..=⌊S/2⌋`, brought to a fixed model size. The samples
//! form a `1 x S` grid with one channel per HOG dimension, so the translation
//! machinery of [`crate::dcf`] applies unchanged: a response peak at shift `k`
//! means the target grew by `a^k`.

use image::RgbImage;

use crate::dcf::{hann, make_gaussian_label, FeatureStack, FilterModel, FrameTerms, GaussianLabel};
use crate::error::{invalid, Result};
use crate::features::{extract_patch, hog_features, PatchSpec};

use super::spectra::FeatureSpectra;

const SCALE_CELL: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleParams {
    /// Number of candidate scales, odd.
    pub count: usize,
    /// Ratio between neighbouring candidates.
    pub step: f64,
    /// Learning rate of the scale model.
    pub eta: f64,
    pub lambda: f64,
    /// Label width as a fraction of `sqrt(count)`.
    pub sigma_factor: f64,
    /// Upper bound on the pixel area of a resized scale sample.
    pub model_max_area: f64,
}

impl Default for ScaleParams {
    fn default() -> Self {
        ScaleParams {
            count: 33,
            step: 1.02,
            eta: 0.025,
            lambda: 1e-2,
            sigma_factor: 0.25,
            model_max_area: 512.0,
        }
    }
}

impl ScaleParams {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 || self.count.is_multiple_of(2) {
            return invalid(format!("scale count must be odd, got {}", self.count));
        }
        if !(self.step > 1.0) {
            return invalid(format!("scale step must exceed 1, got {}", self.step));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return invalid(format!(
                "scale learning rate must lie in (0, 1], got {}",
                self.eta
            ));
        }
        if !(self.lambda >= 0.0) || !(self.sigma_factor > 0.0) || !(self.model_max_area >= 64.0) {
            return invalid("invalid scale filter regularization, label width or model area");
        }
        Ok(())
    }

    /// Scale factor of candidate index `i`.
    pub fn factor(&self, i: usize) -> f64 {
        self.step.powf(i as f64 - (self.count / 2) as f64)
    }
}

/// Fixed sampling geometry shared by every expert of one tracker.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleSampler {
    params: ScaleParams,
    model_w: usize,
    model_h: usize,
    window: Vec<f64>,
    label: GaussianLabel,
}

impl ScaleSampler {
    /// Geometry for a target first seen at `init_w x init_h` pixels.
    pub fn new(params: ScaleParams, init_w: f64, init_h: f64) -> Result<Self> {
        params.validate()?;
        let area = init_w * init_h;
        let factor = if area > params.model_max_area {
            (params.model_max_area / area).sqrt()
        } else {
            1.0
        };
        let min_side = (2 * SCALE_CELL) as f64;
        let model_w = (init_w * factor).floor().max(min_side) as usize;
        let model_h = (init_h * factor).floor().max(min_side) as usize;
        let label = make_gaussian_label(
            1,
            params.count,
            1.0,
            params.count as f64,
            params.sigma_factor,
        )?;
        Ok(ScaleSampler {
            params,
            model_w,
            model_h,
            window: hann(params.count),
            label,
        })
    }

    pub fn params(&self) -> &ScaleParams {
        &self.params
    }

    pub fn label(&self) -> &GaussianLabel {
        &self.label
    }

    pub fn model_size(&self) -> (usize, usize) {
        (self.model_w, self.model_h)
    }

    /// `1 x S` stack of windowed HOG vectors around `(cx, cy)` for a target
    /// currently `base_w x base_h` pixels.
    pub fn sample(
        &self,
        image: &RgbImage,
        cx: f64,
        cy: f64,
        base_w: f64,
        base_h: f64,
    ) -> Result<FeatureStack> {
        let s = self.params.count;
        let mut columns = Vec::with_capacity(s);
        for i in 0..s {
            let spec = PatchSpec::new(cx, cy, base_w, base_h, self.params.factor(i))?;
            let patch = extract_patch(image, &spec, self.model_w, self.model_h)?;
            let hog = hog_features(&patch, SCALE_CELL)?;
            columns.push(hog.into_vec());
        }
        let dims = columns[0].len();
        let mut data = vec![0.0; dims * s];
        for (i, col) in columns.iter().enumerate() {
            let w = self.window[i];
            for (d, v) in col.iter().enumerate() {
                data[d * s + i] = v * w;
            }
        }
        FeatureStack::from_flat(1, s, dims, data)
    }
}

/// Scale model of one expert.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleFilter {
    model: FilterModel,
}

impl ScaleFilter {
    pub fn train(sampler: &ScaleSampler, terms: &FrameTerms) -> Result<Self> {
        Ok(ScaleFilter {
            model: terms.to_model(sampler.params.lambda)?,
        })
    }

    pub fn update(&mut self, sampler: &ScaleSampler, terms: &FrameTerms) -> Result<()> {
        self.model.update_with(terms, sampler.params.eta)
    }

    pub fn model(&self) -> &FilterModel {
        &self.model
    }

    /// Multiplier `a^k` for the sub-step refined response peak `k`.
    pub fn estimate(&self, sampler: &ScaleSampler, candidate: &FeatureSpectra) -> Result<f64> {
        if sampler.params.count == 1 {
            return Ok(1.0);
        }
        let response = candidate.respond(&self.model)?;
        let (_, shift) = response.displacement();
        Ok(sampler.params.step.powf(shift))
    }
}
