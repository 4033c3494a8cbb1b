// Copyright 2026 the Glyphforge Authors
// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;

use glyphforge::cache::{EmbeddingCache, CACHE_MAGIC};
use glyphforge::core::encoder::Embedding;
use glyphforge::core::geometry::{Canvas, VectorSketch};
use glyphforge::core::raster::{render, RasterConfig, RasterImage};
use glyphforge::corpus::{
    filter_records, load_manifest, manifest_to_string, parse_manifest, save_manifest, CorpusRecord, RecordFilter,
    RecordKind, WritingSystem,
};
use glyphforge::imageio::{load_image, save_png};
use glyphforge::svg::{from_svg, read_svg, to_svg, write_svg};
use glyphforge::tensor::Tensor;
use glyphforge::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sample_cache(seed: u64, n: usize, dim: usize) -> EmbeddingCache {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = EmbeddingCache::new("builtin-semantic", dim);
    for i in 0..n {
        c.push(
            format!("item_{i:03}"),
            (0..dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect(),
        )
        .unwrap();
    }
    c
}

fn bits(c: &EmbeddingCache) -> Vec<(String, Vec<u32>)> {
    c.records()
        .iter()
        .map(|r| (r.id.clone(), r.values.iter().map(|v| v.to_bits()).collect()))
        .collect()
}

#[test]
fn cache_file_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("emb.cache");
    let mut c = sample_cache(1, 30, 17);
    c.push(
        "edge",
        vec![
            -0.0,
            f32::MIN_POSITIVE,
            f32::MIN_POSITIVE / 4.0,
            f32::MAX,
            f32::MIN,
            f32::EPSILON,
            1.0 / 3.0,
            0.1,
            0.0,
            -1.0,
            7.0,
            1e-30,
            -1e30,
            0.5,
            0.25,
            2.0,
            3.0,
        ],
    )
    .unwrap();
    c.save(&path).unwrap();
    let back = EmbeddingCache::load(&path).unwrap();
    assert_eq!(back.dim(), 17);
    assert_eq!(bits(&back), bits(&c));
    assert_eq!(std::fs::read(&path).unwrap(), back.to_bytes());
}

#[test]
fn cache_preserves_f32_narrowing_of_embeddings() {
    let e: Vec<Embedding> = (0..3)
        .map(|i| Embedding::new(format!("e{i}"), vec![0.1 * i as f64, 1.0 / 3.0, -2.5]))
        .collect();
    let c = EmbeddingCache::from_embeddings("x", 3, &e).unwrap();
    let back = EmbeddingCache::from_bytes(&c.to_bytes()).unwrap().to_embeddings();
    for (a, b) in e.iter().zip(&back) {
        assert_eq!(a.id, b.id);
        let narrowed: Vec<f64> = a.values.iter().map(|&v| f64::from(v as f32)).collect();
        assert_eq!(b.values, narrowed);
    }
}

#[test]
fn cache_corruptions_are_reported() {
    let good = sample_cache(2, 4, 5).to_bytes();

    let mut magic = good.clone();
    magic[..4].copy_from_slice(b"EMB0");
    assert!(matches!(EmbeddingCache::from_bytes(&magic), Err(Error::Format(_))));

    let mut count = good.clone();
    count[4..8].copy_from_slice(&5u32.to_le_bytes());
    assert!(matches!(EmbeddingCache::from_bytes(&count), Err(Error::Length(_))));

    let mut fewer = good.clone();
    fewer[4..8].copy_from_slice(&3u32.to_le_bytes());
    assert!(matches!(EmbeddingCache::from_bytes(&fewer), Err(Error::Length(_))));

    let mut dim = good.clone();
    dim[8..12].copy_from_slice(&6u32.to_le_bytes());
    assert!(matches!(EmbeddingCache::from_bytes(&dim), Err(Error::Length(_))));

    for cut in [good.len() - 1, good.len() - 4, 13, 10] {
        assert!(
            matches!(EmbeddingCache::from_bytes(&good[..cut]), Err(Error::Length(_))),
            "cut at {cut}"
        );
    }

    let mut trailing = good.clone();
    trailing.push(0);
    assert!(matches!(EmbeddingCache::from_bytes(&trailing), Err(Error::Length(_))));

    let mut id_len = good;
    id_len[12..16].copy_from_slice(&u32::MAX.to_le_bytes());
    assert!(matches!(EmbeddingCache::from_bytes(&id_len), Err(Error::Length(_))));
    assert_eq!(&id_len[..4], &CACHE_MAGIC);
}

#[test]
fn duplicate_cache_ids_are_rejected() {
    let mut c = EmbeddingCache::new("", 1);
    c.push("a", vec![1.0]).unwrap();
    assert!(c.push("a", vec![2.0]).is_err());
    let mut bytes = c.to_bytes();
    bytes[4..8].copy_from_slice(&2u32.to_le_bytes());
    bytes.extend_from_slice(&1u32.to_le_bytes());
    bytes.push(b'a');
    bytes.extend_from_slice(&2.0f32.to_le_bytes());
    assert!(matches!(EmbeddingCache::from_bytes(&bytes), Err(Error::Format(_))));
}

fn records() -> Vec<CorpusRecord> {
    let rec = |path: &str, category: &str, kind, sketchability, system, sign_name: Option<&str>| CorpusRecord {
        path: path.into(),
        category: category.into(),
        kind,
        sketchability,
        system,
        sign_name: sign_name.map(Into::into),
    };
    vec![
        rec("images/bird_01.png", "bird", RecordKind::Image, Some(1), None, None),
        rec("images/fish_02.png", "fish", RecordKind::Image, Some(4), None, None),
        rec("sketches/bird_01.svg", "bird", RecordKind::Sketch, Some(1), None, None),
        rec(
            "glyphs/g1.png",
            "bird",
            RecordKind::Pictograph,
            None,
            Some(WritingSystem::Hieroglyph),
            None,
        ),
        rec(
            "glyphs/o7.png",
            "fish",
            RecordKind::Pictograph,
            None,
            Some(WritingSystem::Oracle),
            None,
        ),
        rec(
            "signs/pc_ku6.png",
            "fish",
            RecordKind::Pictograph,
            None,
            Some(WritingSystem::Protocuneiform),
            Some("KU6~a"),
        ),
        rec(
            "signs/pc_x1.png",
            "unknown",
            RecordKind::Pictograph,
            None,
            Some(WritingSystem::Protocuneiform),
            Some("|X×Y|"),
        ),
    ]
}

#[test]
fn manifest_file_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corpus.jsonl");
    let recs = records();
    save_manifest(&recs, &path).unwrap();
    let m = load_manifest(&path).unwrap();
    assert_eq!(m.records, recs);
    assert!(m.warnings.is_empty());
    assert_eq!(m.base_dir, dir.path());
    assert_eq!(m.resolve(&recs[0]), dir.path().join("images/bird_01.png"));
    assert_eq!(std::fs::read_to_string(&path).unwrap(), manifest_to_string(&m.records));
    assert_eq!(recs[5].id(), "pc_ku6");
}

#[test]
fn manifest_errors_name_the_line() {
    let ok = r#"{"path":"a.png","category":"bird","kind":"image"}"#;
    let cases = [
        r#"{"path":"b.png","category":"bird","kind":"image","sketchability":6}"#,
        r#"{"path":"b.png","category":"bird","kind":"image","sketchability":0}"#,
        r#"{"path":"b.png","category":"bird","kind":"pictograph","system":"protocuneiform"}"#,
        r#"{"path":"b.png","category":"bird","kind":"drawing"}"#,
        r#"{"path":"b.png","kind":"image"}"#,
        r#"{"path":"","category":"bird","kind":"image"}"#,
        r#"["not","an","object"]"#,
        r#"{"path":"b.png","#,
    ];
    for bad in cases {
        let text = format!("{ok}\n\n{bad}\n");
        match parse_manifest(&text) {
            Err(Error::Manifest { line, .. }) => assert_eq!(line, 3, "{bad}"),
            other => panic!("{bad}: expected a manifest error, got {other:?}"),
        }
    }
}

#[test]
fn unknown_manifest_fields_warn() {
    let m = parse_manifest(r#"{"path":"a.png","category":"bird","kind":"image","source":"web","rater":3}"#).unwrap();
    assert_eq!(m.records.len(), 1);
    assert_eq!(m.warnings.len(), 2);
    assert!(m.warnings[0].contains("line 1"));
}

fn filter_strategy() -> impl Strategy<Value = RecordFilter> {
    let cats = proptest::option::of(proptest::sample::subsequence(vec!["bird", "fish", "unknown"], 0..=3));
    let kinds = proptest::option::of(proptest::sample::subsequence(
        vec![RecordKind::Image, RecordKind::Sketch, RecordKind::Pictograph],
        0..=3,
    ));
    let systems = proptest::option::of(proptest::sample::subsequence(
        vec![
            WritingSystem::Hieroglyph,
            WritingSystem::Oracle,
            WritingSystem::Protocuneiform,
        ],
        0..=3,
    ));
    let prefixes = proptest::sample::subsequence(vec!["|", "KU", "X"], 0..=2);
    (
        cats,
        kinds,
        systems,
        proptest::option::of(1u8..=5),
        proptest::option::of(1u8..=5),
        prefixes,
    )
        .prop_map(|(c, k, s, lo, hi, p)| RecordFilter {
            categories: c.map(|v| v.into_iter().map(String::from).collect()),
            kinds: k.map(|v| v.into_iter().collect()),
            systems: s.map(|v| v.into_iter().collect()),
            min_sketchability: lo,
            max_sketchability: hi,
            exclude_prefixes: p.into_iter().map(String::from).collect(),
        })
}

fn both(a: &RecordFilter, b: &RecordFilter) -> RecordFilter {
    fn meet<T: Ord + Clone>(x: &Option<BTreeSet<T>>, y: &Option<BTreeSet<T>>) -> Option<BTreeSet<T>> {
        match (x, y) {
            (Some(x), Some(y)) => Some(x.intersection(y).cloned().collect()),
            (Some(x), None) | (None, Some(x)) => Some(x.clone()),
            (None, None) => None,
        }
    }
    RecordFilter {
        categories: meet(&a.categories, &b.categories),
        kinds: meet(&a.kinds, &b.kinds),
        systems: meet(&a.systems, &b.systems),
        min_sketchability: a.min_sketchability.max(b.min_sketchability),
        max_sketchability: match (a.max_sketchability, b.max_sketchability) {
            (Some(x), Some(y)) => Some(x.min(y)),
            (x, y) => x.or(y),
        },
        exclude_prefixes: a.exclude_prefixes.iter().chain(&b.exclude_prefixes).cloned().collect(),
    }
}

proptest! {
    #[test]
    fn filters_commute_and_compose(a in filter_strategy(), b in filter_strategy()) {
        let recs = records();
        let ab = filter_records(&filter_records(&recs, &a), &b);
        let ba = filter_records(&filter_records(&recs, &b), &a);
        prop_assert_eq!(&ab, &ba);
        prop_assert_eq!(&ab, &filter_records(&recs, &both(&a, &b)));
        prop_assert_eq!(filter_records(&ab, &a), ab.clone());
    }

    #[test]
    fn arbitrary_cache_values_round_trip(raw in proptest::collection::vec(any::<u32>(), 1..40)) {
        let values: Vec<f32> = raw.iter().map(|&b| f32::from_bits(b)).filter(|v| v.is_finite()).collect();
        prop_assume!(!values.is_empty());
        let mut c = EmbeddingCache::new("", values.len());
        c.push("x", values.clone()).unwrap();
        let back = EmbeddingCache::from_bytes(&c.to_bytes()).unwrap();
        let got: Vec<u32> = back.records()[0].values.iter().map(|v| v.to_bits()).collect();
        let want: Vec<u32> = values.iter().map(|v| v.to_bits()).collect();
        prop_assert_eq!(got, want);
    }
}

#[test]
fn unfiltered_records_pass_through() {
    let recs = records();
    assert_eq!(filter_records(&recs, &RecordFilter::default()), recs);
    let rated_only = RecordFilter {
        min_sketchability: Some(2),
        ..Default::default()
    };
    let kept = filter_records(&recs, &rated_only);
    assert_eq!(kept.len(), recs.len() - 2);
    assert!(kept.iter().all(|r| r.sketchability.is_none_or(|s| s >= 2)));
}

#[test]
fn svg_round_trip_preserves_geometry() {
    let canvas = Canvas::new(224, 240);
    let dir = tempfile::tempdir().unwrap();
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = VectorSketch::random(&mut rng, canvas, 1 + seed as usize, 1.5 + seed as f64).unwrap();
        let path = dir.path().join(format!("s{seed}.svg"));
        write_svg(&s, &path).unwrap();
        let back = read_svg(&path).unwrap();
        assert_eq!(back.canvas(), canvas);
        assert_eq!(back.stroke_width(), s.stroke_width());
        for (a, b) in s.coordinates().iter().zip(back.coordinates()) {
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
        assert_eq!(to_svg(&back), to_svg(&from_svg(&to_svg(&back)).unwrap()));
    }
}

#[test]
fn svg_reader_rejects_unsupported_paths() {
    let head = r#"<svg xmlns="http://www.w3.org/2000/svg" width="10" height="10">"#;
    for d in [
        "M 1 1 L 2 2",
        "m 1 1 c 1 1 2 2 3 3",
        "M 1 1 C 1 1 2 2 3 3 C 4 4 5 5 6 6",
        "C 1 1 2 2 3 3",
    ] {
        let text = format!(r#"{head}<path d="{d}" stroke-width="2"/></svg>"#);
        assert!(matches!(from_svg(&text), Err(Error::Svg(_))), "{d}");
    }
    assert!(from_svg("<svg").is_err());
}

#[test]
fn images_load_from_every_supported_format() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RasterConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let sketch = VectorSketch::random(&mut rng, Canvas::new(40, 50), 3, 2.0).unwrap();
    let rendered = render(&sketch, &cfg).unwrap();

    let svg = dir.path().join("s.svg");
    write_svg(&sketch, &svg).unwrap();
    let from_svg = load_image(&svg, &cfg).unwrap();
    for (a, b) in from_svg.data().iter().zip(rendered.data()) {
        assert!((a - b).abs() <= 1e-9);
    }

    let tensor = dir.path().join("s.tensor");
    Tensor::from_image(&rendered).write(&tensor).unwrap();
    let from_tensor = load_image(&tensor, &cfg).unwrap();
    for (a, b) in from_tensor.data().iter().zip(rendered.data()) {
        assert_eq!(*a, f64::from(*b as f32));
    }

    let png = dir.path().join("s.png");
    save_png(&rendered, &png).unwrap();
    let from_png = load_image(&png, &cfg).unwrap();
    assert_eq!((from_png.height(), from_png.width()), (40, 50));
    for (a, b) in from_png.data().iter().zip(rendered.data()) {
        assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
    }

    assert!(matches!(
        load_image(&dir.path().join("s.jpg"), &cfg),
        Err(Error::Image(_))
    ));
}

#[test]
fn tensor_truncation_is_a_length_error() {
    let img = RasterImage::filled(3, 4, 3, 0.25).unwrap();
    let bytes = Tensor::from_image(&img).to_bytes();
    assert_eq!(bytes.len(), 1 + 3 * 4 + 36 * 4);
    assert!(matches!(
        Tensor::from_bytes(&bytes[..bytes.len() - 2]),
        Err(Error::Length(_))
    ));
    let mut extra = bytes.clone();
    extra.push(9);
    assert!(matches!(Tensor::from_bytes(&extra), Err(Error::Length(_))));
    assert_eq!(
        Tensor::from_bytes(&bytes).unwrap().to_image().unwrap().data(),
        img.data()
    );
}
