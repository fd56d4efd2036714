//! Fitness bookkeeping and roulette selection of the executive experts.

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::experts::ExpertId;
use crate::geometry::BoundingBox;

/// Generator behind every random draw: ChaCha8 seeded with `seed_from_u64`.
/// Each roulette draw consumes one `f64` (53 high bits of one `u64`), so a
/// seed fixes the whole selection trajectory on every platform.
pub type SelectionRng = ChaCha8Rng;

pub fn selection_rng(seed: u64) -> SelectionRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionConfig {
    /// Executive experts per frame.
    pub k: usize,
    /// Window length in executive frames.
    pub delta_t: usize,
    pub rho: f64,
    pub mu: f64,
    pub epsilon: f64,
    pub rng_seed: u64,
    /// Whether an expert's overlap with itself enters its mean and fluctuation.
    pub include_self_overlap: bool,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            k: 28,
            delta_t: 5,
            rho: 1.1,
            mu: 0.5,
            epsilon: 1e-6,
            rng_seed: 0,
            include_self_overlap: true,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self, pool_size: usize) -> Result<()> {
        if self.k == 0 || self.k > pool_size {
            return invalid(format!("K must lie in 1..={pool_size}, got {}", self.k));
        }
        if self.delta_t == 0 {
            return invalid("delta_t must be at least 1");
        }
        if !(self.rho > 1.0) || !self.rho.is_finite() {
            return invalid(format!("rho must exceed 1, got {}", self.rho));
        }
        if !(0.0..=1.0).contains(&self.mu) {
            return invalid(format!("mu must lie in [0, 1], got {}", self.mu));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return invalid(format!("epsilon must be positive, got {}", self.epsilon));
        }
        Ok(())
    }
}

/// Rolling evaluation state of one expert.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertRecord {
    id: ExpertId,
    fitness: f64,
    capacity: usize,
    pairs: VecDeque<(usize, Vec<(ExpertId, f64)>)>,
    mean_overlaps: Vec<f64>,
    fluctuations: Vec<f64>,
    smoothness: Vec<f64>,
    last_executive_frame: Option<usize>,
}

fn push_capped<T>(q: &mut VecDeque<T>, cap: usize, v: T) {
    if q.len() == cap {
        q.pop_front();
    }
    q.push_back(v);
}

fn push_capped_vec(q: &mut Vec<f64>, cap: usize, v: f64) {
    if q.len() == cap {
        q.remove(0);
    }
    q.push(v);
}

impl ExpertRecord {
    fn new(id: ExpertId, capacity: usize) -> Self {
        ExpertRecord {
            id,
            fitness: 1.0,
            capacity,
            pairs: VecDeque::with_capacity(capacity),
            mean_overlaps: Vec::with_capacity(capacity),
            fluctuations: Vec::with_capacity(capacity),
            smoothness: Vec::with_capacity(capacity),
            last_executive_frame: None,
        }
    }

    pub fn id(&self) -> ExpertId {
        self.id
    }

    pub fn fitness(&self) -> f64 {
        self.fitness
    }

    pub fn last_executive_frame(&self) -> Option<usize> {
        self.last_executive_frame
    }

    pub(crate) fn push_pairs(&mut self, frame: usize, overlaps: Vec<(ExpertId, f64)>) {
        push_capped(&mut self.pairs, self.capacity, (frame, overlaps));
    }

    /// Mean overlap with `partner` over the window frames where both were executive.
    pub fn pair_window_mean(&self, partner: ExpertId) -> Option<f64> {
        let values: Vec<f64> = self
            .pairs
            .iter()
            .filter_map(|(_, row)| row.iter().find(|(id, _)| *id == partner).map(|&(_, o)| o))
            .collect();
        if values.is_empty() {
            None
        } else {
            Some(values.iter().sum::<f64>() / values.len() as f64)
        }
    }

    pub(crate) fn push_scores(&mut self, mean_overlap: f64, fluctuation: f64, smoothness: f64) {
        push_capped_vec(&mut self.mean_overlaps, self.capacity, mean_overlap);
        push_capped_vec(&mut self.fluctuations, self.capacity, fluctuation);
        push_capped_vec(&mut self.smoothness, self.capacity, smoothness);
    }

    pub(crate) fn set_fitness(&mut self, fitness: f64, frame: usize) {
        self.fitness = fitness;
        self.last_executive_frame = Some(frame);
    }

    pub fn mean_overlaps(&self) -> &[f64] {
        &self.mean_overlaps
    }

    pub fn fluctuations(&self) -> &[f64] {
        &self.fluctuations
    }

    pub fn smoothness(&self) -> &[f64] {
        &self.smoothness
    }

    pub fn window_len(&self) -> usize {
        self.mean_overlaps.len()
    }
}

/// Fitness and evaluation histories for every expert of the pool, indexed by
/// pool position.
#[derive(Debug, Clone, PartialEq)]
pub struct FitnessLedger {
    records: Vec<ExpertRecord>,
}

impl FitnessLedger {
    /// Every expert starts with fitness 1.
    pub fn new(pool: &[ExpertId], delta_t: usize) -> Self {
        FitnessLedger {
            records: pool
                .iter()
                .map(|&id| ExpertRecord::new(id, delta_t.max(1)))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn id(&self, n: usize) -> ExpertId {
        self.records[n].id
    }

    pub fn fitness(&self, n: usize) -> f64 {
        self.records[n].fitness
    }

    pub fn fitness_values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.fitness).collect()
    }

    /// Overrides the fitness of entry `n` without touching its histories.
    pub fn set_fitness(&mut self, n: usize, fitness: f64) {
        self.records[n].fitness = fitness;
    }

    pub fn record(&self, n: usize) -> &ExpertRecord {
        &self.records[n]
    }

    pub(crate) fn record_mut(&mut self, n: usize) -> &mut ExpertRecord {
        &mut self.records[n]
    }
}

/// Fitness-proportional selection probabilities; all-zero fitness falls back
/// to uniform.
pub fn selection_probabilities(ledger: &FitnessLedger) -> Result<Vec<f64>> {
    probabilities_from(&ledger.fitness_values())
}

pub fn probabilities_from(fitness: &[f64]) -> Result<Vec<f64>> {
    if fitness.is_empty() {
        return invalid("empty expert pool");
    }
    if let Some((n, f)) = fitness
        .iter()
        .enumerate()
        .find(|(_, f)| !(**f >= 0.0) || !f.is_finite())
    {
        return Err(Error::Invariant(format!("fitness of entry {n} is {f}")));
    }
    let total: f64 = fitness.iter().sum();
    if total == 0.0 {
        return Ok(vec![1.0 / fitness.len() as f64; fitness.len()]);
    }
    Ok(fitness.iter().map(|f| f / total).collect())
}

/// `k` distinct indices by successive roulette draws without replacement,
/// returned in ascending order. The remaining mass is renormalized after each
/// draw; once it is exhausted the rest are drawn uniformly.
pub fn select_executives<R: Rng + ?Sized>(
    probs: &[f64],
    k: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if k > probs.len() {
        return invalid(format!("cannot select {k} of {} experts", probs.len()));
    }
    if probs.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
        return invalid("selection probabilities must be finite and non-negative");
    }
    if k == probs.len() {
        return Ok((0..k).collect());
    }
    let mut remaining: Vec<usize> = (0..probs.len()).collect();
    let mut chosen = Vec::with_capacity(k);
    for _ in 0..k {
        let mass: f64 = remaining.iter().map(|&i| probs[i]).sum();
        let pos = if mass > 0.0 {
            let target = rng.gen::<f64>() * mass;
            let mut acc = 0.0;
            let mut pick = None;
            for (pos, &i) in remaining.iter().enumerate() {
                if probs[i] <= 0.0 {
                    continue;
                }
                acc += probs[i];
                pick = Some(pos);
                if target < acc {
                    break;
                }
            }
            pick.expect("positive mass has a positive entry")
        } else {
            rng.gen_range(0..remaining.len())
        };
        chosen.push(remaining.remove(pos));
    }
    chosen.sort_unstable();
    Ok(chosen)
}

/// Executive with the highest fitness; ties go to the smaller expert mask.
pub fn pick_best(
    ledger: &FitnessLedger,
    boxes: &[(usize, BoundingBox)],
) -> Result<(usize, BoundingBox)> {
    let mut best: Option<(usize, BoundingBox)> = None;
    for &(n, b) in boxes {
        best = match best {
            None => Some((n, b)),
            Some((m, mb)) => {
                let (fn_, fm) = (ledger.fitness(n), ledger.fitness(m));
                if fn_ > fm || (fn_ == fm && ledger.id(n) < ledger.id(m)) {
                    Some((n, b))
                } else {
                    Some((m, mb))
                }
            }
        };
    }
    best.ok_or_else(|| Error::InvalidArgument("no executive experts to choose from".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experts::enumerate_pool;

    #[test]
    fn probabilities_follow_fitness() {
        let mut ledger = FitnessLedger::new(&enumerate_pool(), 5);
        let p = selection_probabilities(&ledger).unwrap();
        assert!(p.iter().all(|&v| (v - 1.0 / 63.0).abs() < 1e-15));
        for n in 0..63 {
            ledger.set_fitness(n, 0.0);
        }
        let p = selection_probabilities(&ledger).unwrap();
        assert!(p.iter().all(|&v| (v - 1.0 / 63.0).abs() < 1e-15));
        ledger.set_fitness(0, 2.0);
        ledger.set_fitness(1, 1.0);
        ledger.set_fitness(2, 1.0);
        let p = selection_probabilities(&ledger).unwrap();
        assert_eq!(&p[..4], &[0.5, 0.25, 0.25, 0.0]);
        ledger.set_fitness(5, -1.0);
        assert!(matches!(
            selection_probabilities(&ledger),
            Err(Error::Invariant(_))
        ));
    }

    #[test]
    fn exhaustive_and_degenerate_selection() {
        let mut rng = selection_rng(3);
        let mut probs = vec![0.0; 63];
        probs[17] = 1.0;
        assert_eq!(
            select_executives(&probs, 63, &mut rng).unwrap(),
            (0..63).collect::<Vec<_>>()
        );
        for _ in 0..100 {
            assert_eq!(select_executives(&probs, 1, &mut rng).unwrap(), vec![17]);
        }
        assert!(select_executives(&probs, 64, &mut rng).is_err());
        let picked = select_executives(&probs, 5, &mut rng).unwrap();
        assert_eq!(picked.len(), 5);
        assert!(picked.contains(&17));
        assert!(picked.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn selection_is_seed_deterministic() {
        let probs: Vec<f64> = (1..=63).map(|i| i as f64 / 2016.0).collect();
        let a: Vec<_> = {
            let mut rng = selection_rng(9);
            (0..20)
                .map(|_| select_executives(&probs, 28, &mut rng).unwrap())
                .collect()
        };
        let b: Vec<_> = {
            let mut rng = selection_rng(9);
            (0..20)
                .map(|_| select_executives(&probs, 28, &mut rng).unwrap())
                .collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn best_is_argmax_with_mask_tie_break() {
        let pool = enumerate_pool();
        let mut ledger = FitnessLedger::new(&pool, 5);
        let b = BoundingBox::new(5.0, 5.0, 2.0, 2.0).unwrap();
        assert_eq!(pick_best(&ledger, &[(7, b)]).unwrap().0, 7);
        ledger.set_fitness(3, 3.0);
        ledger.set_fitness(9, 2.9);
        assert_eq!(pick_best(&ledger, &[(9, b), (3, b)]).unwrap().0, 3);
        ledger.set_fitness(9, 3.0);
        assert_eq!(pick_best(&ledger, &[(9, b), (3, b)]).unwrap().0, 3);
        assert!(pick_best(&ledger, &[]).is_err());
    }

    #[test]
    fn config_validation() {
        let ok = SelectionConfig::default();
        assert!(ok.validate(63).is_ok());
        assert!(SelectionConfig { k: 64, ..ok }.validate(63).is_err());
        assert!(SelectionConfig { k: 0, ..ok }.validate(63).is_err());
        assert!(SelectionConfig { rho: 1.0, ..ok }.validate(63).is_err());
        assert!(SelectionConfig { mu: 1.5, ..ok }.validate(63).is_err());
        assert!(SelectionConfig { epsilon: 0.0, ..ok }.validate(63).is_err());
        assert!(SelectionConfig { delta_t: 0, ..ok }.validate(63).is_err());
    }
}
