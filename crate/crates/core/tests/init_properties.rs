// Copyright 2026 the Glyphforge Authors
// SPDX-License-Identifier: Apache-2.0

use glyphforge_core::encoder::{Encoder, OrientedEnergyEncoder};
use glyphforge_core::geometry::{Canvas, Point2, SketchSpec};
use glyphforge_core::init::{init_sketch, normalize_map, sample_starts, tangent_walk, ActivationMap, SamplerConfig};
use glyphforge_core::raster::RasterImage;
use proptest::prelude::*;

const CANVAS: Canvas = Canvas::new(224, 224);

fn bump(cx: f64, cy: f64, s: f64) -> ActivationMap {
    let data = (0..224 * 224)
        .map(|i| {
            let (r, c) = ((i / 224) as f64, (i % 224) as f64);
            (-((c - cx).powi(2) + (r - cy).powi(2)) / (2.0 * s * s)).exp()
        })
        .collect();
    ActivationMap::new(224, 224, data).unwrap()
}

/// A textured scene: two disks of different contrast over a soft gradient.
fn scene() -> RasterImage {
    let mut data = Vec::with_capacity(224 * 224 * 3);
    for r in 0..224 {
        for c in 0..224 {
            let (x, y) = (c as f64, r as f64);
            let mut v = 0.6 + 0.3 * (x / 224.0) + 0.05 * (y / 9.0).sin();
            if (x - 70.0).hypot(y - 80.0) < 30.0 {
                v = 0.15;
            }
            if (x - 150.0).hypot(y - 140.0) < 45.0 {
                v = 0.4 + 0.1 * (x / 7.0).cos();
            }
            data.extend([v.clamp(0.0, 1.0); 3]);
        }
    }
    RasterImage::new(224, 224, 3, data).unwrap()
}

#[test]
fn walk_follows_iso_contours_of_a_bump() {
    let map = bump(112.0, 112.0, 30.0);
    let cfg = SamplerConfig::default();
    let limit = 1.5 * cfg.window_side_for(CANVAS) / 2.0;
    for (i, angle) in [0.3f64, 1.4, 2.7, 4.0, 5.5].into_iter().enumerate() {
        let r0 = 25.0 + 5.0 * i as f64;
        let start = Point2::new(112.0 + r0 * angle.cos(), 112.0 + r0 * angle.sin());
        let stroke = tangent_walk(&map, start, 4, &cfg).unwrap();
        for p in stroke.points {
            let off = ((p.x - 112.0).hypot(p.y - 112.0) - r0).abs();
            assert!(off <= limit, "point ({}, {}) is {off} px off the ring {r0}", p.x, p.y);
        }
    }
}

#[test]
fn natural_map_init_respects_canvas_and_border() {
    let enc = OrientedEnergyEncoder::semantic();
    let map = enc.activation_map(&scene()).unwrap();
    let cfg = SamplerConfig::default();
    let margin = cfg.border_margin_for(CANVAS);
    let init = init_sketch(&map, &SketchSpec::default(), &cfg, 42).unwrap();
    assert_eq!(init.sketch.len(), 16);
    assert_eq!(init.starts.random_fill, 0);
    for s in init.sketch.strokes() {
        for p in s.points {
            assert!(CANVAS.contains(p));
        }
        let p0 = s.points[0];
        assert!(p0.x >= margin as f64 && p0.x <= (223 - margin) as f64);
        assert!(p0.y >= margin as f64 && p0.y <= (223 - margin) as f64);
    }
    let again = init_sketch(&map, &SketchSpec::default(), &cfg, 42).unwrap();
    assert_eq!(init, again);
}

fn arb_map() -> impl Strategy<Value = ActivationMap> {
    (8usize..40, 8usize..40)
        .prop_flat_map(|(h, w)| (Just(h), Just(w), prop::collection::vec(0.0..10.0f64, h * w)))
        .prop_map(|(h, w, data)| ActivationMap::new(h, w, data).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn probabilities_sum_to_one(map in arb_map(), tau in 0.05..2.0f64) {
        let p = normalize_map(&map, tau).unwrap();
        let total: f64 = p.data.iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-6);
        prop_assert!(p.data.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn starts_avoid_border_and_never_repeat(map in arb_map(), n in 1usize..12, seed in 0u64..1000) {
        let cfg = SamplerConfig { border_margin: Some(2), ..Default::default() };
        let p = normalize_map(&map, 0.3).unwrap();
        let starts = sample_starts(&p, n, &cfg, seed).unwrap();
        prop_assert_eq!(starts.points.len(), n);
        for s in &starts.points {
            prop_assert!(s.row >= 2 && s.row < map.height() - 2);
            prop_assert!(s.col >= 2 && s.col < map.width() - 2);
        }
        if starts.random_fill == 0 {
            let mut seen = starts.points.clone();
            seen.sort_by_key(|s| (s.row, s.col));
            seen.dedup();
            prop_assert_eq!(seen.len(), n);
        }
    }

    #[test]
    fn walks_stay_inside_canvas(map in arb_map(), fx in 0.0..1.0f64, fy in 0.0..1.0f64) {
        let canvas = map.canvas();
        let start = Point2::new(fx * (canvas.width - 1) as f64, fy * (canvas.height - 1) as f64);
        let stroke = tangent_walk(&map.min_max_normalized(), start, 4, &SamplerConfig::default()).unwrap();
        prop_assert_eq!(stroke.points[0], start);
        for p in stroke.points {
            prop_assert!(canvas.contains(p));
        }
    }
}
