// Copyright 2026 the Glyphforge Authors
// SPDX-License-Identifier: Apache-2.0

use glyphforge_core::geometry::{Canvas, CubicBezierStroke, Point2, VectorSketch};
use glyphforge_core::raster::{backward, gradcheck, render, PixelGrad, RasterConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CANVAS: Canvas = Canvas::new(224, 224);

fn random_sketch(seed: u64, n: usize) -> VectorSketch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    VectorSketch::random(&mut rng, CANVAS, n, 3.0).unwrap()
}

#[test]
fn gradients_match_finite_differences_on_random_sketches() {
    let cfg = RasterConfig::default();
    let mut checked = 0;
    let mut passed = 0;
    for seed in 0..20u64 {
        let n = 1 + (seed % 4) as usize;
        let report = gradcheck(&random_sketch(seed, n), &cfg, 1, seed).unwrap();
        checked += report.checked;
        passed += report.passed;
    }
    let fraction = passed as f64 / checked as f64;
    assert!(fraction >= 0.95, "pass fraction {fraction} over {checked}");
}

#[test]
fn gradcheck_hundred_trials_on_one_sketch() {
    let report = gradcheck(&random_sketch(77, 3), &RasterConfig::default(), 100, 5).unwrap();
    assert!(report.pass_fraction >= 0.95, "{report:?}");
}

#[test]
fn mirrored_sketch_renders_mirrored_image() {
    let cfg = RasterConfig::default();
    for seed in 0..5 {
        let s = random_sketch(100 + seed, 3);
        let w = (CANVAS.width - 1) as f64;
        let m = s.map_points(|p| Point2::new(w - p.x, p.y));
        let a = render(&s, &cfg).unwrap();
        let b = render(&m, &cfg).unwrap();
        for r in 0..CANVAS.height {
            for c in 0..CANVAS.width {
                let diff = (a.get(r, c, 0) - b.get(r, CANVAS.width - 1 - c, 0)).abs();
                assert!(diff <= 1e-9, "({r},{c}) differs by {diff}");
            }
        }
    }
}

#[test]
fn adding_a_stroke_never_brightens() {
    let cfg = RasterConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let n = rng.gen_range(1..4);
        let base = VectorSketch::random(&mut rng, CANVAS, n, 3.0).unwrap();
        let extra = VectorSketch::random(&mut rng, CANVAS, 1, 3.0).unwrap();
        let mut strokes = base.strokes().to_vec();
        strokes.push(extra.strokes()[0]);
        let more = VectorSketch::new(strokes, 3.0, CANVAS).unwrap();
        let a = render(&base, &cfg).unwrap();
        let b = render(&more, &cfg).unwrap();
        assert!(a.data().iter().zip(b.data()).all(|(x, y)| y <= x));
    }
}

#[test]
fn uncovered_pixels_are_exactly_white() {
    let cfg = RasterConfig::default();
    let s = random_sketch(3, 4);
    let img = render(&s, &cfg).unwrap();
    let polys: Vec<Vec<Point2>> = s.strokes().iter().map(|st| st.flatten(4096).unwrap()).collect();
    for r in (0..224).step_by(3) {
        for c in (0..224).step_by(3) {
            let p = Point2::new(c as f64, r as f64);
            let far = polys.iter().flatten().all(|q| (*q - p).length() >= 2.5 + 0.05);
            if far {
                assert_eq!(img.get(r, c, 0), 1.0);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn render_stays_in_unit_interval(pts in prop::collection::vec((-20.0..244.0f64, -20.0..244.0f64), 4..=16)) {
        let strokes: Vec<CubicBezierStroke> = pts
            .chunks_exact(4)
            .map(|c| CubicBezierStroke::new([
                Point2::new(c[0].0, c[0].1),
                Point2::new(c[1].0, c[1].1),
                Point2::new(c[2].0, c[2].1),
                Point2::new(c[3].0, c[3].1),
            ]).unwrap())
            .collect();
        let s = VectorSketch::new(strokes, 3.0, CANVAS).unwrap();
        let img = render(&s, &RasterConfig::default()).unwrap();
        prop_assert!(img.data().iter().all(|v| (0.0..=1.0).contains(v)));
        let g = backward(&s, &RasterConfig::default(), &PixelGrad {
            height: 224, width: 224, channels: 3, data: vec![0.25; 224 * 224 * 3],
        }).unwrap();
        prop_assert!(g.is_finite());
    }
}
