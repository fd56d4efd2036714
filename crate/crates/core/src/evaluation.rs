//! Fitness of executive experts: consistency with the other executives in the
//! current frame (pair score) and smoothness against the previous final box
//! (self score), each averaged over a short window with increasing weights.

use crate::experts::ExpertId;
use crate::geometry::BoundingBox;
use crate::selection::{FitnessLedger, SelectionConfig};

/// `exp(-(1 - IoU)^2)`, in `[e^-1, 1]`.
pub fn overlap(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let miss = 1.0 - a.iou(b);
    (-miss * miss).exp()
}

/// Arithmetic mean of one expert's overlaps with the executives.
pub fn mean_overlap(overlaps: &[f64]) -> f64 {
    if overlaps.is_empty() {
        return 1.0;
    }
    overlaps.iter().sum::<f64>() / overlaps.len() as f64
}

/// Root mean square deviation of the current overlaps from their window means.
pub fn fluctuation(current: &[f64], window_means: &[f64]) -> f64 {
    debug_assert_eq!(current.len(), window_means.len());
    if current.is_empty() {
        return 0.0;
    }
    let ss: f64 = current
        .iter()
        .zip(window_means)
        .map(|(o, m)| (o - m) * (o - m))
        .sum();
    (ss / current.len() as f64).sqrt()
}

/// Mean of `series` (oldest first) with weights `rho^0, rho^1, ...`, so the
/// most recent value weighs most. An empty series yields 0.
pub fn weighted_temporal_mean(series: &[f64], rho: f64) -> f64 {
    let mut weight = 1.0;
    let (mut num, mut den) = (0.0, 0.0);
    for v in series {
        num += weight * v;
        den += weight;
        weight *= rho;
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

pub fn pair_score(mean_overlap: f64, fluctuation: f64, eps: f64) -> f64 {
    mean_overlap / (fluctuation + eps)
}

/// Gaussian of the center shift from the previous final box, with
/// `σ = (w + h) / 2` of the current box.
pub fn smoothness(prev_best: &BoundingBox, current: &BoundingBox) -> f64 {
    let sigma = 0.5 * (current.w + current.h);
    let dx = prev_best.cx - current.cx;
    let dy = prev_best.cy - current.cy;
    (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()
}

pub fn self_score(smoothness_series: &[f64], rho: f64) -> f64 {
    weighted_temporal_mean(smoothness_series, rho)
}

pub fn combine_fitness(r_pair: f64, r_self: f64, mu: f64) -> f64 {
    mu * r_pair + (1.0 - mu) * r_self
}

/// Every intermediate of one expert's fitness in one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitnessBreakdown {
    pub expert: ExpertId,
    pub mean_overlap: f64,
    pub fluctuation: f64,
    pub weighted_mean_overlap: f64,
    pub weighted_fluctuation: f64,
    pub r_pair: f64,
    pub smoothness: f64,
    pub r_self: f64,
    pub fitness: f64,
}

/// Scores this frame's executives and writes their new fitness into `ledger`.
///
/// `executives` holds `(pool index, predicted box)` pairs. Non-executive
/// entries of the ledger are not touched. Windows cover each expert's most
/// recent `delta_t` executive frames; a pair's window mean uses the frames in
/// that window where the partner was also executive.
pub fn score_frame(
    ledger: &mut FitnessLedger,
    frame: usize,
    executives: &[(usize, BoundingBox)],
    prev_best: &BoundingBox,
    config: &SelectionConfig,
) -> Vec<FitnessBreakdown> {
    let ids: Vec<ExpertId> = executives.iter().map(|&(n, _)| ledger.id(n)).collect();
    let matrix: Vec<Vec<f64>> = executives
        .iter()
        .map(|(_, a)| executives.iter().map(|(_, b)| overlap(a, b)).collect())
        .collect();

    let mut out = Vec::with_capacity(executives.len());
    for (row, &(n, bbox)) in executives.iter().enumerate() {
        let partners: Vec<(ExpertId, f64)> = ids
            .iter()
            .zip(&matrix[row])
            .enumerate()
            .filter(|&(k, _)| config.include_self_overlap || k != row)
            .map(|(_, (&id, &o))| (id, o))
            .collect();
        let current: Vec<f64> = partners.iter().map(|&(_, o)| o).collect();
        let m = mean_overlap(&current);

        let record = ledger.record_mut(n);
        record.push_pairs(frame, partners.clone());
        let window_means: Vec<f64> = partners
            .iter()
            .map(|&(partner, o)| record.pair_window_mean(partner).unwrap_or(o))
            .collect();
        let v = fluctuation(&current, &window_means);
        let s = smoothness(prev_best, &bbox);
        record.push_scores(m, v, s);

        let m_bar = weighted_temporal_mean(record.mean_overlaps(), config.rho);
        let v_bar = weighted_temporal_mean(record.fluctuations(), config.rho);
        let r_pair = pair_score(m_bar, v_bar, config.epsilon);
        let r_self = self_score(record.smoothness(), config.rho);
        let fitness = combine_fitness(r_pair, r_self, config.mu);
        record.set_fitness(fitness, frame);
        out.push(FitnessBreakdown {
            expert: ids[row],
            mean_overlap: m,
            fluctuation: v,
            weighted_mean_overlap: m_bar,
            weighted_fluctuation: v_bar,
            r_pair,
            smoothness: s,
            r_self,
            fitness,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tl(x: f64, y: f64, w: f64, h: f64) -> BoundingBox {
        BoundingBox::from_top_left(x, y, w, h).unwrap()
    }

    #[test]
    fn overlap_extremes() {
        let a = tl(0.0, 0.0, 4.0, 4.0);
        assert_eq!(overlap(&a, &a), 1.0);
        let far = tl(100.0, 0.0, 4.0, 4.0);
        assert!((overlap(&a, &far) - (-1.0f64).exp()).abs() < 1e-15);
        // intersection 8, union 24
        let b = tl(2.0, 0.0, 4.0, 4.0);
        let expected = (-(1.0f64 - 1.0 / 3.0).powi(2)).exp();
        assert!((overlap(&a, &b) - expected).abs() < 1e-15);
    }

    #[test]
    fn mean_and_fluctuation_small_cases() {
        let e1 = (-1.0f64).exp();
        assert!((mean_overlap(&[1.0, e1]) - (1.0 + e1) / 2.0).abs() < 1e-15);
        assert_eq!(mean_overlap(&[1.0, 1.0, 1.0]), 1.0);
        assert_eq!(fluctuation(&[0.7, 0.4], &[0.7, 0.4]), 0.0);
        assert!((fluctuation(&[1.0], &[e1]) - (1.0 - e1)).abs() < 1e-15);
    }

    #[test]
    fn weighted_means() {
        assert!((weighted_temporal_mean(&[0.3; 5], 1.1) - 0.3).abs() < 1e-15);
        let s = [0.0, 0.0, 0.0, 0.0, 1.0];
        assert!((weighted_temporal_mean(&s, 2.0) - 16.0 / 31.0).abs() < 1e-15);
        let series = [0.2, 0.9, 0.4, 0.1, 0.6];
        let arith = series.iter().sum::<f64>() / 5.0;
        assert!((weighted_temporal_mean(&series, 1.0 + 1e-9) - arith).abs() < 1e-6);
        assert!((self_score(&[1.0, 1.0, 1.0, 1.0, 0.0], 2.0) - 15.0 / 31.0).abs() < 1e-15);
        assert_eq!(self_score(&[0.37], 1.1), 0.37);
        assert_eq!(self_score(&[1.0; 5], 1.1), 1.0);
    }

    #[test]
    fn scores_and_combination() {
        assert!((pair_score(1.0, 0.0, 1e-6) - 1e6).abs() < 1e-6);
        assert_eq!(pair_score(0.0, 0.3, 1e-6), 0.0);
        assert!((pair_score(0.8, 0.2, 1e-6) - 0.8 / (0.2 + 1e-6)).abs() < 1e-12);
        assert!((pair_score(0.8, 0.2, 1e-6) - 3.99998).abs() < 1e-5);
        assert_eq!(combine_fitness(2.0, 4.0, 1.0), 2.0);
        assert_eq!(combine_fitness(2.0, 4.0, 0.0), 4.0);
        assert_eq!(combine_fitness(2.0, 4.0, 0.5), 3.0);
    }

    #[test]
    fn smoothness_cases() {
        let a = BoundingBox::new(10.0, 10.0, 6.0, 4.0).unwrap();
        assert_eq!(smoothness(&a, &a), 1.0);
        let b = BoundingBox::new(13.0, 14.0, 6.0, 4.0).unwrap();
        assert!((smoothness(&a, &b) - (-0.5f64).exp()).abs() < 1e-15);
        // sigma comes from the current box
        let wide = BoundingBox::new(13.0, 14.0, 16.0, 4.0).unwrap();
        assert!((smoothness(&a, &wide) - (-25.0f64 / 200.0).exp()).abs() < 1e-15);
    }
}
