//! The initial expert pool: one correlation-filter tracker per non-empty
//! subset of the feature pool.

mod scale;
mod spectra;

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use image::RgbImage;

pub use scale::{ScaleFilter, ScaleParams, ScaleSampler};
pub use spectra::FeatureSpectra;

use crate::dcf::{
    apply_hann, make_gaussian_label, FilterModel, FrameTerms, GaussianLabel, ResponseMap,
};
use crate::error::{invalid, Error, Result};
use crate::features::{color_mask_for_patch, extract_patch, FeatureKind, FeatureSource, PatchSpec};
use crate::geometry::BoundingBox;

/// Number of experts in the full pool.
pub const POOL_SIZE: usize = 63;

/// Non-empty subset of the six feature kinds; bit `i` is `FeatureKind::ALL[i]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExpertId(u8);

impl ExpertId {
    pub fn new(mask: u8) -> Result<Self> {
        if mask == 0 || mask > 0b11_1111 {
            return invalid(format!("expert mask must be in 1..=63, got {mask}"));
        }
        Ok(ExpertId(mask))
    }

    pub fn from_kinds(kinds: &[FeatureKind]) -> Result<Self> {
        Self::new(kinds.iter().fold(0u8, |m, k| m | 1 << k.index()))
    }

    pub fn mask(self) -> u8 {
        self.0
    }

    pub fn contains(self, kind: FeatureKind) -> bool {
        self.0 & (1 << kind.index()) != 0
    }

    pub fn members(self) -> impl Iterator<Item = FeatureKind> {
        FeatureKind::ALL
            .into_iter()
            .filter(move |&k| self.contains(k))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        false
    }
}

impl fmt::Display for ExpertId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tags: Vec<&str> = self.members().map(FeatureKind::tag).collect();
        f.write_str(&tags.join("+"))
    }
}

impl FromStr for ExpertId {
    type Err = Error;

    /// Accepts a decimal mask (`"33"`) or `+`-joined tags (`"HOG+L37"`).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Ok(mask) = s.parse::<u8>() {
            return ExpertId::new(mask);
        }
        let kinds = s
            .split('+')
            .map(str::parse)
            .collect::<Result<Vec<FeatureKind>>>()?;
        ExpertId::from_kinds(&kinds)
    }
}

/// All 63 experts in ascending mask order.
pub fn enumerate_pool() -> Vec<ExpertId> {
    (1..=POOL_SIZE as u8).map(ExpertId).collect()
}

/// Convex combination of equally sized response maps.
pub fn fuse_responses(maps: &[ResponseMap], weights: &[f64]) -> Result<ResponseMap> {
    let Some(first) = maps.first() else {
        return invalid("no response maps to fuse");
    };
    if maps.len() != weights.len() {
        return invalid(format!("{} maps but {} weights", maps.len(), weights.len()));
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return invalid("fusion weights must be finite and non-negative");
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return invalid("at least one fusion weight must be positive");
    }
    let (rows, cols) = (first.rows(), first.cols());
    if maps.iter().any(|m| m.rows() != rows || m.cols() != cols) {
        return invalid("response maps differ in size");
    }
    let mut grid = vec![0.0; rows * cols];
    for (m, w) in maps.iter().zip(weights) {
        let w = w / total;
        for (g, v) in grid.iter_mut().zip(m.grid()) {
            *g += w * v;
        }
    }
    ResponseMap::from_grid(rows, cols, grid)
}

/// Hyper-parameters of every expert's translation and scale filters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpertParams {
    pub lambda: f64,
    pub eta: f64,
    pub sigma_factor: f64,
    pub padding: f64,
    pub cell_size: usize,
    /// Cap on the template pixel area; larger search regions are downsampled.
    pub max_template_area: f64,
    pub color_mask: bool,
    pub color_bins: usize,
    pub scale: ScaleParams,
}

impl Default for ExpertParams {
    fn default() -> Self {
        ExpertParams {
            lambda: 1e-4,
            eta: 0.01,
            sigma_factor: 0.1,
            padding: 2.0,
            cell_size: 4,
            max_template_area: 160.0 * 160.0,
            color_mask: true,
            color_bins: 32,
            scale: ScaleParams::default(),
        }
    }
}

impl ExpertParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return invalid(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return invalid(format!("eta must lie in (0, 1], got {}", self.eta));
        }
        if !(self.sigma_factor > 0.0) {
            return invalid(format!(
                "sigma_factor must be positive, got {}",
                self.sigma_factor
            ));
        }
        if !(self.padding > 1.0) {
            return invalid(format!("padding must exceed 1, got {}", self.padding));
        }
        if self.cell_size == 0 {
            return invalid("cell_size must be at least 1");
        }
        if !(self.max_template_area >= (self.cell_size * self.cell_size) as f64) {
            return invalid("max_template_area must hold at least one cell");
        }
        if self.color_bins < 2 {
            return invalid("color_bins must be at least 2");
        }
        self.scale.validate()
    }
}

/// Template geometry fixed at initialization and shared by all experts.
#[derive(Debug, Clone)]
pub struct SearchGeometry {
    params: ExpertParams,
    template_w: usize,
    template_h: usize,
    rows: usize,
    cols: usize,
    label: GaussianLabel,
    scale: ScaleSampler,
}

impl SearchGeometry {
    pub fn new(init: &BoundingBox, params: ExpertParams) -> Result<Self> {
        params.validate()?;
        let cell = params.cell_size;
        let window_w = init.w * params.padding;
        let window_h = init.h * params.padding;
        let shrink = (params.max_template_area / (window_w * window_h))
            .sqrt()
            .min(1.0);
        let cols = ((window_w * shrink) as usize / cell).max(1);
        let rows = ((window_h * shrink) as usize / cell).max(1);
        // target extent in cells sets the label width
        let target_w = init.w * shrink / cell as f64;
        let target_h = init.h * shrink / cell as f64;
        let label = make_gaussian_label(rows, cols, target_h, target_w, params.sigma_factor)?;
        let scale = ScaleSampler::new(params.scale, init.w, init.h)?;
        Ok(SearchGeometry {
            params,
            template_w: cols * cell,
            template_h: rows * cell,
            rows,
            cols,
            label,
            scale,
        })
    }

    pub fn params(&self) -> &ExpertParams {
        &self.params
    }

    pub fn grid(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn template_size(&self) -> (usize, usize) {
        (self.template_w, self.template_h)
    }

    pub fn label(&self) -> &GaussianLabel {
        &self.label
    }

    pub fn scale_sampler(&self) -> &ScaleSampler {
        &self.scale
    }

    /// Padded search region around `target`.
    pub fn region(&self, target: &BoundingBox) -> Result<PatchSpec> {
        PatchSpec::around(
            target.cx,
            target.cy,
            target.w,
            target.h,
            self.params.padding,
        )
    }

    fn windowed_features(
        &self,
        source: &dyn FeatureSource,
        frame_index: usize,
        image: &RgbImage,
        target: &BoundingBox,
        kinds: &[FeatureKind],
        with_mask: bool,
    ) -> Result<(PatchSpec, Vec<(FeatureKind, crate::dcf::FeatureStack)>)> {
        let region = self.region(target)?;
        let patch = extract_patch(image, &region, self.template_w, self.template_h)?;
        let mask = if with_mask {
            let sx = self.template_w as f64 / region.region_width();
            let sy = self.template_h as f64 / region.region_height();
            let fg = BoundingBox {
                cx: self.template_w as f64 / 2.0,
                cy: self.template_h as f64 / 2.0,
                w: target.w * sx,
                h: target.h * sy,
            };
            Some(color_mask_for_patch(
                &patch,
                &fg,
                self.params.color_bins,
                self.params.cell_size,
            )?)
        } else {
            None
        };
        let mut out = Vec::with_capacity(kinds.len());
        for &kind in kinds {
            let mut f =
                source.features(frame_index, &patch, &region, kind, self.params.cell_size)?;
            if (f.rows(), f.cols()) != (self.rows, self.cols) {
                return Err(Error::Invariant(format!(
                    "{kind} features are {}x{}, template grid is {}x{}",
                    f.rows(),
                    f.cols(),
                    self.rows,
                    self.cols
                )));
            }
            if let Some(mask) = &mask {
                f = f.masked(&mask.grid)?;
            }
            out.push((kind, apply_hann(&f)));
        }
        Ok((region, out))
    }

    /// Candidate transforms at `prev_box` for every kind in `kinds`.
    pub fn observe(
        &self,
        source: &dyn FeatureSource,
        frame_index: usize,
        image: &RgbImage,
        prev_box: &BoundingBox,
        kinds: &[FeatureKind],
    ) -> Result<FrameObservation> {
        let (region, stacks) =
            self.windowed_features(source, frame_index, image, prev_box, kinds, false)?;
        let mut spectra: [Option<FeatureSpectra>; 6] = Default::default();
        for (kind, stack) in stacks {
            spectra[kind.index()] = Some(FeatureSpectra::of(&stack));
        }
        Ok(FrameObservation {
            frame_index,
            region,
            prev_box: *prev_box,
            image_size: image.dimensions(),
            spectra,
            scale_samples: Mutex::new(HashMap::new()),
        })
    }

    /// Training transforms at `target` for every kind in `kinds`, plus the scale sample.
    pub fn training_sample(
        &self,
        source: &dyn FeatureSource,
        frame_index: usize,
        image: &RgbImage,
        target: &BoundingBox,
        kinds: &[FeatureKind],
    ) -> Result<TrainingSample> {
        let (_, stacks) = self.windowed_features(
            source,
            frame_index,
            image,
            target,
            kinds,
            self.params.color_mask,
        )?;
        let mut terms: [Option<FrameTerms>; 6] = Default::default();
        for (kind, stack) in stacks {
            terms[kind.index()] = Some(FrameTerms::new(&stack, &self.label)?);
        }
        let scale_stack = self
            .scale
            .sample(image, target.cx, target.cy, target.w, target.h)?;
        let scale = FrameTerms::new(&scale_stack, self.scale.label())?;
        Ok(TrainingSample {
            frame_index,
            terms,
            scale,
        })
    }
}

/// Shared detection-side data for one frame, searched around the previous result.
#[derive(Debug)]
pub struct FrameObservation {
    frame_index: usize,
    region: PatchSpec,
    prev_box: BoundingBox,
    image_size: (u32, u32),
    spectra: [Option<FeatureSpectra>; 6],
    scale_samples: Mutex<HashMap<(i64, i64), Arc<FeatureSpectra>>>,
}

impl FrameObservation {
    pub fn frame_index(&self) -> usize {
        self.frame_index
    }

    pub fn prev_box(&self) -> &BoundingBox {
        &self.prev_box
    }

    /// Scale pyramid at the pixel nearest `(cx, cy)`, computed once per pixel.
    fn scale_sample(
        &self,
        geometry: &SearchGeometry,
        image: &RgbImage,
        cx: f64,
        cy: f64,
    ) -> Result<Arc<FeatureSpectra>> {
        let key = (cx.round() as i64, cy.round() as i64);
        if let Some(s) = self
            .scale_samples
            .lock()
            .expect("scale cache poisoned")
            .get(&key)
        {
            return Ok(Arc::clone(s));
        }
        let stack = geometry.scale.sample(
            image,
            key.0 as f64,
            key.1 as f64,
            self.prev_box.w,
            self.prev_box.h,
        )?;
        let spectra = Arc::new(FeatureSpectra::of(&stack));
        let mut cache = self.scale_samples.lock().expect("scale cache poisoned");
        Ok(Arc::clone(cache.entry(key).or_insert(spectra)))
    }
}

/// Shared training-side data for one frame at the final target box.
#[derive(Debug, Clone)]
pub struct TrainingSample {
    frame_index: usize,
    terms: [Option<FrameTerms>; 6],
    scale: FrameTerms,
}

impl TrainingSample {
    pub fn frame_index(&self) -> usize {
        self.frame_index
    }
}

/// One tracker built on a fixed feature subset.
#[derive(Debug, Clone, PartialEq)]
pub struct Expert {
    id: ExpertId,
    models: Vec<(FeatureKind, FilterModel)>,
    scale: Option<ScaleFilter>,
    history: VecDeque<(usize, BoundingBox)>,
    history_capacity: usize,
    last_trained_frame: Option<usize>,
}

impl Expert {
    pub fn new(id: ExpertId, history_capacity: usize) -> Self {
        Expert {
            id,
            models: Vec::new(),
            scale: None,
            history: VecDeque::with_capacity(history_capacity.max(1)),
            history_capacity: history_capacity.max(1),
            last_trained_frame: None,
        }
    }

    pub fn id(&self) -> ExpertId {
        self.id
    }

    pub fn models(&self) -> &[(FeatureKind, FilterModel)] {
        &self.models
    }

    pub fn scale_filter(&self) -> Option<&ScaleFilter> {
        self.scale.as_ref()
    }

    pub fn is_trained(&self) -> bool {
        self.last_trained_frame.is_some()
    }

    pub fn last_trained_frame(&self) -> Option<usize> {
        self.last_trained_frame
    }

    /// Recent `(frame, box)` predictions, oldest first.
    pub fn history(&self) -> &VecDeque<(usize, BoundingBox)> {
        &self.history
    }

    pub fn record(&mut self, frame: usize, bbox: BoundingBox) {
        if self.history.len() == self.history_capacity {
            self.history.pop_front();
        }
        self.history.push_back((frame, bbox));
    }

    /// Fused-response translation followed by scale search, both anchored at
    /// the observation's previous box.
    pub fn predict(
        &self,
        geometry: &SearchGeometry,
        image: &RgbImage,
        obs: &FrameObservation,
    ) -> Result<BoundingBox> {
        if !self.is_trained() {
            return Err(Error::Invariant(format!(
                "expert {} predicts before training",
                self.id
            )));
        }
        let mut maps = Vec::with_capacity(self.models.len());
        for (kind, model) in &self.models {
            let spectra = obs.spectra[kind.index()].as_ref().ok_or_else(|| {
                Error::Invariant(format!("frame observation lacks {kind} features"))
            })?;
            maps.push(spectra.respond(model)?);
        }
        let weights = vec![1.0; maps.len()];
        let fused = fuse_responses(&maps, &weights)?;
        let (dr, dc) = fused.displacement();
        let cell = geometry.params.cell_size as f64;
        let px_x = obs.region.region_width() / geometry.template_w as f64;
        let px_y = obs.region.region_height() / geometry.template_h as f64;
        let prev = obs.prev_box;
        let (iw, ih) = obs.image_size;
        let moved = BoundingBox {
            cx: prev.cx + dc * cell * px_x,
            cy: prev.cy + dr * cell * px_y,
            ..prev
        }
        .clamped_to(iw, ih);
        if !(moved.cx.is_finite() && moved.cy.is_finite()) {
            return Err(Error::TrackingDegenerate(format!(
                "expert {} produced a non-finite position",
                self.id
            )));
        }
        let factor = match &self.scale {
            Some(filter) if geometry.scale.params().count > 1 => {
                let sample = obs.scale_sample(geometry, image, moved.cx, moved.cy)?;
                filter.estimate(&geometry.scale, &sample)?
            }
            _ => 1.0,
        };
        Ok(BoundingBox {
            w: prev.w * factor,
            h: prev.h * factor,
            ..moved
        }
        .clamped_to(iw, ih))
    }

    /// First call trains from scratch; later calls blend in with rate `eta`.
    pub fn train(&mut self, geometry: &SearchGeometry, sample: &TrainingSample) -> Result<()> {
        let params = &geometry.params;
        let term = |kind: FeatureKind| {
            sample.terms[kind.index()]
                .as_ref()
                .ok_or_else(|| Error::Invariant(format!("training sample lacks {kind} features")))
        };
        if self.models.is_empty() {
            self.models = self
                .id
                .members()
                .map(|kind| Ok((kind, term(kind)?.to_model(params.lambda)?)))
                .collect::<Result<_>>()?;
        } else {
            for (kind, model) in &mut self.models {
                model.update_with(term(*kind)?, params.eta)?;
            }
        }
        match &mut self.scale {
            None => self.scale = Some(ScaleFilter::train(&geometry.scale, &sample.scale)?),
            Some(filter) => filter.update(&geometry.scale, &sample.scale)?,
        }
        self.last_trained_frame = Some(sample.frame_index);
        Ok(())
    }

    /// Convenience form that extracts the training sample itself.
    pub fn train_on(
        &mut self,
        geometry: &SearchGeometry,
        source: &dyn FeatureSource,
        frame_index: usize,
        image: &RgbImage,
        target: &BoundingBox,
    ) -> Result<()> {
        let kinds: Vec<FeatureKind> = self.id.members().collect();
        let sample = geometry.training_sample(source, frame_index, image, target, &kinds)?;
        self.train(geometry, &sample)
    }
}
