use facf::evaluation::{
    combine_fitness, fluctuation, overlap, score_frame, weighted_temporal_mean,
};
use facf::experts::enumerate_pool;
use facf::geometry::BoundingBox;
use facf::selection::{FitnessLedger, SelectionConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn boxes() -> impl Strategy<Value = BoundingBox> {
    (0.0f64..100.0, 0.0f64..100.0, 2.0f64..60.0, 2.0f64..60.0)
        .prop_map(|(cx, cy, w, h)| BoundingBox::new(cx, cy, w, h).unwrap())
}

fn jittered(rng: &mut ChaCha8Rng, base: &BoundingBox) -> BoundingBox {
    BoundingBox::new(
        base.cx + rng.gen_range(-6.0..6.0),
        base.cy + rng.gen_range(-6.0..6.0),
        base.w * rng.gen_range(0.8..1.2),
        base.h * rng.gen_range(0.8..1.2),
    )
    .unwrap()
}

#[test]
fn mean_overlap_matches_direct_average() {
    let config = SelectionConfig::default();
    let mut ledger = FitnessLedger::new(&enumerate_pool(), config.delta_t);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let base = BoundingBox::new(50.0, 50.0, 30.0, 20.0).unwrap();
    let execs: Vec<(usize, BoundingBox)> = [2, 7, 11, 30, 62]
        .iter()
        .map(|&n| (n, jittered(&mut rng, &base)))
        .collect();
    let out = score_frame(&mut ledger, 1, &execs, &base, &config);
    for (i, row) in out.iter().enumerate() {
        let direct: f64 = execs
            .iter()
            .map(|(_, b)| overlap(&execs[i].1, b))
            .sum::<f64>()
            / execs.len() as f64;
        assert!((row.mean_overlap - direct).abs() <= 1e-12);
        // a single frame has no history to fluctuate against
        assert_eq!(row.fluctuation, 0.0);
    }
}

#[test]
fn fluctuation_matches_windowed_double_loop() {
    let config = SelectionConfig::default();
    let k = 4;
    let pool: Vec<usize> = vec![0, 5, 17, 40];
    let mut ledger = FitnessLedger::new(&enumerate_pool(), config.delta_t);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let base = BoundingBox::new(60.0, 40.0, 24.0, 24.0).unwrap();
    let mut history: Vec<Vec<BoundingBox>> = Vec::new();
    for frame in 1..=12 {
        let frame_boxes: Vec<BoundingBox> = (0..k).map(|_| jittered(&mut rng, &base)).collect();
        history.push(frame_boxes.clone());
        let execs: Vec<(usize, BoundingBox)> = pool
            .iter()
            .copied()
            .zip(frame_boxes.iter().copied())
            .collect();
        let out = score_frame(&mut ledger, frame, &execs, &base, &config);
        let start = history.len().saturating_sub(config.delta_t);
        for i in 0..k {
            let mut ss = 0.0;
            for j in 0..k {
                let mut window = 0.0;
                for past in &history[start..] {
                    window += overlap(&past[i], &past[j]);
                }
                window /= (history.len() - start) as f64;
                let now = overlap(&frame_boxes[i], &frame_boxes[j]);
                ss += (now - window) * (now - window);
            }
            let oracle = (ss / k as f64).sqrt();
            assert!(
                (out[i].fluctuation - oracle).abs() <= 1e-12,
                "frame {frame} expert {i}"
            );
        }
    }
}

#[test]
fn constant_overlaps_do_not_fluctuate() {
    assert_eq!(fluctuation(&[0.7, 0.4, 1.0], &[0.7, 0.4, 1.0]), 0.0);
    assert_eq!(fluctuation(&[], &[]), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn overlap_is_bounded_and_symmetric(a in boxes(), b in boxes()) {
        let o = overlap(&a, &b);
        prop_assert!(o >= (-1.0f64).exp() - 1e-15 && o <= 1.0);
        prop_assert_eq!(o, overlap(&b, &a));
        prop_assert!((overlap(&a, &a) - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn weighted_mean_lies_within_the_series(series in proptest::collection::vec(-5.0f64..5.0, 1..12), rho in 1.0001f64..3.0) {
        let m = weighted_temporal_mean(&series, rho);
        let lo = series.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = series.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(m >= lo - 1e-12 && m <= hi + 1e-12);
    }

    #[test]
    fn fitness_is_a_monotone_convex_combination(
        r_pair in 0.0f64..1e6,
        r_self in 0.0f64..1.0,
        mu in 0.0f64..1.0,
        bump in 0.0f64..10.0,
    ) {
        let f = combine_fitness(r_pair, r_self, mu);
        prop_assert!(f >= r_pair.min(r_self) - 1e-9 && f <= r_pair.max(r_self) + 1e-9);
        prop_assert!(combine_fitness(r_pair + bump, r_self, mu) >= f);
        prop_assert!(combine_fitness(r_pair, r_self + bump, mu) >= f);
    }
}
