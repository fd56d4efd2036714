use facf::dcf::FeatureStack;
use facf::error::Error;
use facf::features::{
    color_mask, color_mask_for_patch, extract_hog, hog_features, load_channel_map,
    resample_bilinear, synth_patch_features, ChannelMapFile, FeatureKind, ImagePatch, KindLayout,
    PatchSpec, SynthLayer, HOG_CHANNELS,
};
use facf::geometry::BoundingBox;
use image::{Rgb, RgbImage};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn noise_patch(seed: u64, w: usize, h: usize) -> ImagePatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let px: Vec<[f64; 3]> = (0..w * h)
        .map(|_| [rng.gen(), rng.gen(), rng.gen()])
        .collect();
    ImagePatch::from_fn(w, h, |x, y| px[y * w + x])
}

/// Contrast-sensitive orientation of a gradient, by angle: 18 bins of 20°
/// centred on multiples of 20°.
fn angle_bin(dx: f64, dy: f64) -> usize {
    let deg = dy.atan2(dx).to_degrees().rem_euclid(360.0);
    ((deg / 20.0).round() as usize) % 18
}

#[test]
fn step_edge_energy_sits_in_the_gradient_bin() {
    for (dark_left, expected_bin) in [(true, 0usize), (false, 9)] {
        let patch = ImagePatch::from_fn(32, 32, |x, _| {
            let bright = (x >= 16) == dark_left;
            let v = if bright { 0.8 } else { 0.2 };
            [v, v, v]
        });
        let hog = hog_features(&patch, 4).unwrap();
        // direct per-cell histogram: hard-binned gradient magnitude per cell
        let mut direct = vec![[0.0f64; 18]; 64];
        for y in 0..32usize {
            for x in 0..32usize {
                let g = |xx: usize| patch.at(xx, y)[0];
                let dx = (g((x + 1).min(31)) - g(x.saturating_sub(1))) * 255.0;
                if dx != 0.0 {
                    direct[(y / 4) * 8 + x / 4][angle_bin(dx, 0.0)] += dx.abs();
                }
            }
        }
        for (cell, hist) in direct.iter().enumerate() {
            let (r, c) = (cell / 8, cell % 8);
            let total: f64 = hist.iter().sum();
            if total == 0.0 {
                continue;
            }
            let oracle = (0..18)
                .max_by(|&a, &b| hist[a].total_cmp(&hist[b]))
                .unwrap();
            let ours = (0..18)
                .max_by(|&a, &b| hog.get(a, r, c).total_cmp(&hog.get(b, r, c)))
                .unwrap();
            assert_eq!(oracle, expected_bin);
            assert_eq!(ours, oracle, "cell ({r}, {c})");
        }
    }
}

#[test]
fn constant_patch_has_no_orientation_energy() {
    let patch = ImagePatch::from_fn(24, 16, |_, _| [0.3, 0.5, 0.7]);
    let hog = hog_features(&patch, 4).unwrap();
    for d in 0..27 {
        assert!(hog.channel(d).iter().all(|&v| v == 0.0));
    }
    for d in 27..HOG_CHANNELS {
        assert!(hog.channel(d).iter().all(|&v| v >= 0.0));
    }
}

#[test]
fn hog_from_image_region() {
    let img = RgbImage::from_fn(64, 48, |x, y| Rgb([(x * 4) as u8, (y * 5) as u8, 90]));
    let spec = PatchSpec::new(30.0, 20.0, 20.0, 13.0, 1.0).unwrap();
    let hog = extract_hog(&img, &spec, 4).unwrap();
    let (w, h) = spec.native_size();
    assert_eq!(
        (hog.rows(), hog.cols(), hog.channel_count()),
        (h / 4, w / 4, HOG_CHANNELS)
    );
}

#[test]
fn channel_file_round_trips_through_disk() {
    let layouts = [
        None,
        Some(KindLayout {
            channels: 2,
            rows: 3,
            cols: 4,
        }),
        Some(KindLayout {
            channels: 1,
            rows: 2,
            cols: 2,
        }),
        None,
        None,
        Some(KindLayout {
            channels: 3,
            rows: 1,
            cols: 5,
        }),
    ];
    let mut file = ChannelMapFile::new(2, layouts).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut written = Vec::new();
    for frame in 0..2 {
        for kind in FeatureKind::ALL {
            if let Some(l) = file.layout(kind) {
                let data: Vec<f64> = (0..l.channels * l.rows * l.cols)
                    .map(|_| rng.gen_range(-10.0f32..10.0) as f64)
                    .collect();
                let stack = FeatureStack::from_flat(l.rows, l.cols, l.channels, data).unwrap();
                file.set(kind, frame, &stack).unwrap();
                written.push((kind, frame, stack));
            }
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("maps.facf");
    file.save(&path).unwrap();
    let back = ChannelMapFile::open(&path).unwrap();
    for (kind, frame, stack) in written {
        let loaded = load_channel_map(&back, kind, frame, None).unwrap();
        let a: Vec<u64> = loaded.as_slice().iter().map(|v| v.to_bits()).collect();
        let b: Vec<u64> = stack.as_slice().iter().map(|v| v.to_bits()).collect();
        assert_eq!(a, b);
    }
    assert!(matches!(
        load_channel_map(&back, FeatureKind::L5, 2, None),
        Err(Error::NotFound(_))
    ));
    assert!(matches!(
        load_channel_map(&back, FeatureKind::L19, 0, None),
        Err(Error::NotFound(_))
    ));
    let mut bytes = file.to_bytes();
    bytes[0] = b'X';
    assert!(matches!(
        ChannelMapFile::from_bytes(&bytes),
        Err(Error::Format(_))
    ));
    let short = &file.to_bytes()[..100];
    assert!(matches!(
        ChannelMapFile::from_bytes(short),
        Err(Error::Format(_))
    ));
}

#[test]
fn bilinear_upsampling_reproduces_a_ramp() {
    let (rows, cols) = (4usize, 5usize);
    let ramp: Vec<f64> = (0..rows * cols)
        .map(|i| 2.0 * (i / cols) as f64 + 3.0 * (i % cols) as f64)
        .collect();
    let stack = FeatureStack::from_flat(rows, cols, 1, ramp).unwrap();
    let up = resample_bilinear(&stack, 2 * rows, 2 * cols).unwrap();
    for r in 0..2 * rows {
        for c in 0..2 * cols {
            // half-pixel alignment: output (r, c) samples source (r/2 - 1/4, c/2 - 1/4)
            let y = (r as f64 / 2.0 - 0.25).clamp(0.0, (rows - 1) as f64);
            let x = (c as f64 / 2.0 - 0.25).clamp(0.0, (cols - 1) as f64);
            assert!((up.get(0, r, c) - (2.0 * y + 3.0 * x)).abs() < 1e-12);
        }
    }
}

#[test]
fn two_color_mask_separates_foreground() {
    let img = RgbImage::from_fn(80, 80, |x, y| {
        if (30..50).contains(&x) && (30..50).contains(&y) {
            Rgb([230, 10, 10])
        } else {
            Rgb([10, 10, 230])
        }
    });
    let spec = PatchSpec::new(40.0, 40.0, 40.0, 40.0, 1.0).unwrap();
    let fg = BoundingBox::new(40.0, 40.0, 20.0, 20.0).unwrap();
    let mask = color_mask(&img, &spec, &fg, 32, 4).unwrap();
    assert_eq!((mask.rows, mask.cols), (10, 10));
    for r in 0..10 {
        for c in 0..10 {
            let v = mask.grid[r * 10 + c];
            // cells 2 and 7 straddle the square's edge
            if [r, c].iter().any(|&i| i == 2 || i == 7) {
                continue;
            }
            let inside = (3..7).contains(&r) && (3..7).contains(&c);
            if inside {
                assert!(v > 0.95, "({r}, {c}) = {v}");
            } else {
                assert!(v < 0.05, "({r}, {c}) = {v}");
            }
        }
    }
}

#[test]
fn synthetic_layers_share_the_hog_grid() {
    let patch = noise_patch(5, 40, 28);
    let hog = hog_features(&patch, 4).unwrap();
    let mut radius = 0;
    for kind in FeatureKind::ALL {
        let f = synth_patch_features(&patch, kind, 4).unwrap();
        assert_eq!((f.rows(), f.cols()), (hog.rows(), hog.cols()), "{kind}");
        assert_eq!(f, synth_patch_features(&patch, kind, 4).unwrap());
        match SynthLayer::of(kind) {
            None => assert_eq!(f, hog),
            Some(layer) => {
                assert!(layer.radius > radius);
                radius = layer.radius;
                assert_eq!(f.channel_count(), layer.channels);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn hog_shape_contract(w in 1usize..40, h in 1usize..40, cell in 1usize..8, seed in any::<u64>()) {
        let patch = noise_patch(seed, w, h);
        match hog_features(&patch, cell) {
            Ok(f) => {
                prop_assert_eq!((f.rows(), f.cols(), f.channel_count()), (h / cell, w / cell, HOG_CHANNELS));
                prop_assert!(f.as_slice().iter().all(|v| v.is_finite() && *v >= 0.0));
            }
            Err(_) => prop_assert!(w < cell || h < cell),
        }
    }

    #[test]
    fn mask_is_a_probability_and_never_amplifies(
        seed in any::<u64>(),
        bins in 2usize..16,
        fx in 4.0f64..20.0,
        fy in 4.0f64..20.0,
    ) {
        let patch = noise_patch(seed, 32, 24);
        let fg = BoundingBox::new(16.0, 12.0, fx, fy).unwrap();
        let mask = color_mask_for_patch(&patch, &fg, bins, 4).unwrap();
        prop_assert!(mask.grid.iter().all(|v| (0.0..=1.0).contains(v)));
        let feats = synth_patch_features(&patch, FeatureKind::L10, 4).unwrap();
        let masked = feats.masked(&mask.grid).unwrap();
        for (m, x) in masked.as_slice().iter().zip(feats.as_slice()) {
            prop_assert!(m.abs() <= x.abs());
        }
    }

    #[test]
    fn channel_bytes_round_trip(rows in 1usize..6, cols in 1usize..6, ch in 1usize..4, seed in any::<u64>()) {
        let mut layouts = [None; 6];
        layouts[3] = Some(KindLayout { channels: ch, rows, cols });
        let mut file = ChannelMapFile::new(1, layouts).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..ch * rows * cols).map(|_| rng.gen::<f32>() as f64).collect();
        let stack = FeatureStack::from_flat(rows, cols, ch, data).unwrap();
        file.set(FeatureKind::L19, 0, &stack).unwrap();
        let back = ChannelMapFile::from_bytes(&file.to_bytes()).unwrap();
        prop_assert_eq!(load_channel_map(&back, FeatureKind::L19, 0, None).unwrap(), stack);
    }
}
