use facf::dcf::ResponseMap;
use facf::experts::{
    enumerate_pool, fuse_responses, Expert, ExpertId, ExpertParams, ScaleParams, SearchGeometry,
};
use facf::features::{FeatureKind, SyntheticFeatures};
use facf::geometry::BoundingBox;
use facf::ingestion::{synth_sequence, SynthScript};
use image::{Rgb, RgbImage};
use proptest::prelude::*;

fn script(frames: usize, dx: f64, zoom: f64) -> SynthScript {
    SynthScript {
        frames,
        dx,
        zoom,
        ..SynthScript::default()
    }
}

fn trained(
    id: ExpertId,
    params: ExpertParams,
    image: &RgbImage,
    init: &BoundingBox,
) -> (SearchGeometry, Expert) {
    let geometry = SearchGeometry::new(init, params).unwrap();
    let mut expert = Expert::new(id, 5);
    expert
        .train_on(&geometry, &SyntheticFeatures, 0, image, init)
        .unwrap();
    (geometry, expert)
}

fn predict_on(
    geometry: &SearchGeometry,
    expert: &Expert,
    frame: usize,
    image: &RgbImage,
    prev: &BoundingBox,
) -> BoundingBox {
    let kinds: Vec<FeatureKind> = expert.id().members().collect();
    let obs = geometry
        .observe(&SyntheticFeatures, frame, image, prev, &kinds)
        .unwrap();
    expert.predict(geometry, image, &obs).unwrap()
}

#[test]
fn pool_masks_match_member_counts() {
    for id in enumerate_pool() {
        assert_eq!(id.members().count(), id.mask().count_ones() as usize);
        assert_eq!(id.to_string().parse::<ExpertId>().unwrap(), id);
    }
}

#[test]
fn every_expert_tracks_its_own_training_frame() {
    let seq = synth_sequence(&script(1, 0.0, 1.0)).unwrap();
    let img = seq.frame(0).unwrap();
    let init = seq.ground_truth()[0];
    let params = ExpertParams::default();
    for id in enumerate_pool().into_iter().step_by(5) {
        let (geometry, expert) = trained(id, params, &img, &init);
        assert_eq!(expert.models().len(), id.len());
        let b = predict_on(&geometry, &expert, 0, &img, &init);
        let stride = params.cell_size as f64;
        assert!(b.center_distance(&init) <= stride, "{id}: {b:?}");
        assert!((b.w / init.w - 1.0).abs() < 0.03, "{id}: {b:?}");
    }
}

#[test]
fn translation_is_recovered() {
    let seq = synth_sequence(&script(2, 8.0, 1.0)).unwrap();
    let init = seq.ground_truth()[0];
    let params = ExpertParams::default();
    for id in ["HOG", "L10", "HOG+L5+L37"] {
        let id: ExpertId = id.parse().unwrap();
        let (geometry, expert) = trained(id, params, &seq.frame(0).unwrap(), &init);
        let b = predict_on(&geometry, &expert, 1, &seq.frame(1).unwrap(), &init);
        let moved = b.cx - init.cx;
        assert!((moved - 8.0).abs() <= 2.0, "{id}: moved {moved}");
        assert!((b.cy - init.cy).abs() <= 2.0, "{id}: {b:?}");
    }
}

#[test]
fn static_target_keeps_its_scale() {
    let seq = synth_sequence(&script(3, 0.0, 1.0)).unwrap();
    let init = seq.ground_truth()[0];
    let (geometry, expert) = trained(
        "HOG".parse().unwrap(),
        ExpertParams::default(),
        &seq.frame(0).unwrap(),
        &init,
    );
    let b = predict_on(&geometry, &expert, 2, &seq.frame(2).unwrap(), &init);
    assert!((b.w / init.w - 1.0).abs() <= 0.02 + 1e-9, "{b:?}");

    let single = ExpertParams {
        scale: ScaleParams {
            count: 1,
            ..ScaleParams::default()
        },
        ..ExpertParams::default()
    };
    let (geometry, expert) = trained(
        "HOG".parse().unwrap(),
        single,
        &seq.frame(0).unwrap(),
        &init,
    );
    let b = predict_on(&geometry, &expert, 2, &seq.frame(2).unwrap(), &init);
    assert_eq!((b.w, b.h), (init.w, init.h));
}

#[test]
fn featureless_frame_yields_a_finite_box() {
    let flat = RgbImage::from_pixel(200, 160, Rgb([128, 128, 128]));
    let init = BoundingBox::new(100.0, 80.0, 30.0, 30.0).unwrap();
    let (geometry, expert) = trained(
        "HOG+L19".parse().unwrap(),
        ExpertParams::default(),
        &flat,
        &init,
    );
    let b = predict_on(&geometry, &expert, 1, &flat, &init);
    assert!(b.cx.is_finite() && b.cy.is_finite() && b.w.is_finite() && b.h.is_finite());
    assert!(b.cx >= 0.0 && b.cx <= 200.0 && b.cy >= 0.0 && b.cy <= 160.0);
}

#[test]
fn full_rate_retraining_equals_fresh_training() {
    let seq = synth_sequence(&script(2, 3.0, 1.0)).unwrap();
    let params = ExpertParams {
        eta: 1.0,
        scale: ScaleParams {
            eta: 1.0,
            ..ScaleParams::default()
        },
        ..ExpertParams::default()
    };
    let id: ExpertId = "HOG+L28".parse().unwrap();
    let b0 = seq.ground_truth()[0];
    let b1 = seq.ground_truth()[1];
    let (geometry, mut twice) = trained(id, params, &seq.frame(0).unwrap(), &b0);
    twice
        .train_on(
            &geometry,
            &SyntheticFeatures,
            1,
            &seq.frame(1).unwrap(),
            &b1,
        )
        .unwrap();
    let mut fresh = Expert::new(id, 5);
    fresh
        .train_on(
            &geometry,
            &SyntheticFeatures,
            1,
            &seq.frame(1).unwrap(),
            &b1,
        )
        .unwrap();
    for ((ka, ma), (kb, mb)) in twice.models().iter().zip(fresh.models()) {
        assert_eq!(ka, kb);
        for d in 0..ma.channel_count() {
            for (a, b) in ma.numerator(d).iter().zip(mb.numerator(d)) {
                assert!((a - b).norm() <= 1e-9 * (1.0 + b.norm()));
            }
        }
        for (a, b) in ma.denominator().iter().zip(mb.denominator()) {
            assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
        }
    }
    assert_eq!(twice.last_trained_frame(), Some(1));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fusion_ignores_weight_scale(
        grids in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 12), 1..5),
        raw in proptest::collection::vec(0.1f64..3.0, 5),
        k in 0.01f64..100.0,
    ) {
        let maps: Vec<ResponseMap> = grids.iter().map(|g| ResponseMap::from_grid(3, 4, g.clone()).unwrap()).collect();
        let w: Vec<f64> = raw[..maps.len()].to_vec();
        let scaled: Vec<f64> = w.iter().map(|v| v * k).collect();
        let a = fuse_responses(&maps, &w).unwrap();
        let b = fuse_responses(&maps, &scaled).unwrap();
        for (x, y) in a.grid().iter().zip(b.grid()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
        let total: f64 = w.iter().sum();
        for i in 0..12 {
            let direct: f64 = maps.iter().zip(&w).map(|(m, wi)| wi / total * m.grid()[i]).sum();
            prop_assert!((a.grid()[i] - direct).abs() <= 1e-12);
        }
    }
}
