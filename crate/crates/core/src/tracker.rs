//! Frame loop: select executives, predict, score, pick the final box, train.

use std::sync::Arc;
use std::time::{Duration, Instant};

use image::RgbImage;
use rayon::prelude::*;

use crate::config::{FeatureSourceSpec, RunConfig};
use crate::error::{Error, Result};
use crate::evaluation::{score_frame, FitnessBreakdown};
use crate::experts::{Expert, ExpertId, SearchGeometry};
use crate::features::{
    ChannelFileFeatures, ChannelMapFile, FeatureKind, FeatureSource, SyntheticFeatures,
};
use crate::geometry::BoundingBox;
use crate::ingestion::SequenceSpec;
use crate::selection::{
    pick_best, select_executives, selection_probabilities, selection_rng, FitnessLedger,
    SelectionConfig, SelectionRng,
};

/// What one tracked frame produced.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutcome {
    pub frame: usize,
    /// Pool indices of this frame's executives, ascending.
    pub executives: Vec<usize>,
    /// Each executive's prediction, aligned with `executives`.
    pub predictions: Vec<BoundingBox>,
    pub breakdowns: Vec<FitnessBreakdown>,
    /// Pool index of the winning expert.
    pub best: usize,
    pub bbox: BoundingBox,
}

/// Ensemble tracker over a pool of experts sharing one search geometry.
pub struct Tracker {
    selection: SelectionConfig,
    geometry: SearchGeometry,
    source: Arc<dyn FeatureSource>,
    experts: Vec<Expert>,
    ledger: FitnessLedger,
    rng: SelectionRng,
    frame: usize,
    prev_best: BoundingBox,
}

fn kinds_of<'a>(ids: impl Iterator<Item = &'a ExpertId>) -> Vec<FeatureKind> {
    let mask = ids.fold(0u8, |m, id| m | id.mask());
    FeatureKind::ALL
        .into_iter()
        .filter(|k| mask & (1 << k.index()) != 0)
        .collect()
}

impl Tracker {
    /// Trains every expert of the pool on frame 0 at `init`.
    pub fn new(
        config: &RunConfig,
        source: Arc<dyn FeatureSource>,
        first_frame: &RgbImage,
        init: BoundingBox,
    ) -> Result<Self> {
        config.validate()?;
        let pool = config.pool_ids();
        let selection = config.selection_config();
        let geometry = SearchGeometry::new(&init, config.expert_params())?;
        let mut experts: Vec<Expert> = pool
            .iter()
            .map(|&id| Expert::new(id, selection.delta_t))
            .collect();
        let kinds = kinds_of(pool.iter());
        let sample = geometry
            .training_sample(source.as_ref(), 0, first_frame, &init, &kinds)
            .map_err(|e| e.at_frame(0))?;
        experts
            .par_iter_mut()
            .try_for_each(|e| {
                e.train(&geometry, &sample)?;
                e.record(0, init);
                Ok::<_, Error>(())
            })
            .map_err(|e| e.at_frame(0))?;
        Ok(Tracker {
            ledger: FitnessLedger::new(&pool, selection.delta_t),
            rng: selection_rng(selection.rng_seed),
            selection,
            geometry,
            source,
            experts,
            frame: 0,
            prev_best: init,
        })
    }

    pub fn experts(&self) -> &[Expert] {
        &self.experts
    }

    pub fn ledger(&self) -> &FitnessLedger {
        &self.ledger
    }

    pub fn geometry(&self) -> &SearchGeometry {
        &self.geometry
    }

    pub fn selection(&self) -> &SelectionConfig {
        &self.selection
    }

    /// Index of the last processed frame.
    pub fn frame(&self) -> usize {
        self.frame
    }

    pub fn current_box(&self) -> BoundingBox {
        self.prev_best
    }

    /// All experts during the first `delta_t` frames, roulette afterwards.
    fn choose_executives(&mut self, frame: usize) -> Result<Vec<usize>> {
        let n = self.experts.len();
        if frame <= self.selection.delta_t || self.selection.k >= n {
            return Ok((0..n).collect());
        }
        let probs = selection_probabilities(&self.ledger)?;
        select_executives(&probs, self.selection.k, &mut self.rng)
    }

    /// Tracks the next frame.
    pub fn step(&mut self, image: &RgbImage) -> Result<FrameOutcome> {
        let frame = self.frame + 1;
        self.step_inner(frame, image).map_err(|e| e.at_frame(frame))
    }

    fn step_inner(&mut self, frame: usize, image: &RgbImage) -> Result<FrameOutcome> {
        let executives = self.choose_executives(frame)?;
        let ids: Vec<ExpertId> = executives.iter().map(|&n| self.experts[n].id()).collect();
        let kinds = kinds_of(ids.iter());
        let obs =
            self.geometry
                .observe(self.source.as_ref(), frame, image, &self.prev_best, &kinds)?;

        let predictions: Vec<BoundingBox> = executives
            .par_iter()
            .map(|&n| self.experts[n].predict(&self.geometry, image, &obs))
            .collect::<Result<_>>()?;
        let boxes: Vec<(usize, BoundingBox)> = executives
            .iter()
            .copied()
            .zip(predictions.iter().copied())
            .collect();

        let breakdowns = score_frame(
            &mut self.ledger,
            frame,
            &boxes,
            &self.prev_best,
            &self.selection,
        );
        let (best, bbox) = pick_best(&self.ledger, &boxes)?;

        for &(n, b) in &boxes {
            self.experts[n].record(frame, b);
        }
        let sample =
            self.geometry
                .training_sample(self.source.as_ref(), frame, image, &bbox, &kinds)?;
        let geometry = &self.geometry;
        let mut is_exec = vec![false; self.experts.len()];
        for &n in &executives {
            is_exec[n] = true;
        }
        self.experts
            .par_iter_mut()
            .zip(is_exec.par_iter())
            .filter(|(_, &on)| on)
            .try_for_each(|(e, _)| e.train(geometry, &sample))?;

        self.frame = frame;
        self.prev_best = bbox;
        Ok(FrameOutcome {
            frame,
            executives,
            predictions,
            breakdowns,
            best,
            bbox,
        })
    }
}

/// Per-frame output of a whole run.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub sequence: String,
    /// Final box per frame; frame 0 holds the initialization box.
    pub boxes: Vec<BoundingBox>,
    /// Executive experts per frame; frame 0 lists the whole trained pool.
    pub executives: Vec<Vec<ExpertId>>,
    /// Winning expert per frame; `None` at frame 0.
    pub winners: Vec<Option<ExpertId>>,
    /// Fitness intermediates of each frame's executives.
    pub fitness: Vec<Vec<FitnessBreakdown>>,
    pub seed: u64,
    pub config: RunConfig,
    pub frame_times: Vec<Duration>,
}

/// Equality over the tracking trajectory and seed; wall times and the
/// configuration snapshot are ignored.
impl PartialEq for RunRecord {
    fn eq(&self, other: &Self) -> bool {
        self.sequence == other.sequence
            && self.boxes == other.boxes
            && self.executives == other.executives
            && self.winners == other.winners
            && self.fitness == other.fitness
            && self.seed == other.seed
    }
}

impl RunRecord {
    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }
}

/// Builds the feature source named by the configuration for a sequence of
/// `frame_count` frames of `frame_size` pixels.
pub fn feature_source(
    config: &RunConfig,
    frame_size: (u32, u32),
    frame_count: usize,
) -> Result<Arc<dyn FeatureSource>> {
    Ok(match &config.features {
        FeatureSourceSpec::Synthetic => Arc::new(SyntheticFeatures),
        FeatureSourceSpec::ChannelFile(path) => {
            let file = ChannelMapFile::open(path)?;
            if file.frame_count() < frame_count {
                return Err(Error::Format(format!(
                    "channel file covers {} frames, sequence has {frame_count}",
                    file.frame_count()
                )));
            }
            Arc::new(ChannelFileFeatures::new(file, frame_size.0, frame_size.1)?)
        }
    })
}

/// One-pass run: initialize from the first ground-truth box, then track every
/// remaining frame without reset.
pub fn run_tracker(config: &RunConfig, sequence: &SequenceSpec) -> Result<RunRecord> {
    config.validate()?;
    let start = Instant::now();
    let first = sequence.frame(0)?;
    let source = feature_source(config, first.dimensions(), sequence.len())?;
    let init = sequence.ground_truth()[0];
    let mut tracker = Tracker::new(config, source, &first, init)?;

    let n = sequence.len();
    let mut record = RunRecord {
        sequence: sequence.name().to_owned(),
        boxes: Vec::with_capacity(n),
        executives: Vec::with_capacity(n),
        winners: Vec::with_capacity(n),
        fitness: Vec::with_capacity(n),
        seed: config.seed,
        config: config.clone(),
        frame_times: Vec::with_capacity(n),
    };
    record.boxes.push(init);
    record.executives.push(config.pool_ids());
    record.winners.push(None);
    record.fitness.push(Vec::new());
    record.frame_times.push(start.elapsed());

    for i in 1..n {
        let t0 = Instant::now();
        let image = sequence.frame(i)?;
        let out = tracker.step(&image)?;
        let pool = config.pool_ids();
        record.boxes.push(out.bbox);
        record
            .executives
            .push(out.executives.iter().map(|&k| pool[k]).collect());
        record.winners.push(Some(pool[out.best]));
        record.fitness.push(out.breakdowns);
        record.frame_times.push(t0.elapsed());
    }
    Ok(record)
}
