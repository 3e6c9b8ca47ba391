//! End-to-end scoring checked against per-module brute-force oracles.

use std::fs;

use memmaps_core::grid::resize_bilinear;
use memmaps_core::io::save_png;
use memmaps_core::memorability::{ConstantScorer, SidecarScorer};
use memmaps_core::selection::score_frame;
use memmaps_core::{Criterion, FrameRef, GrayImage, PipelineConfig, Role, Thresholds};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SIDE: usize = 1135;

fn disk_entropy(img: &GrayImage, x: usize, y: usize) -> f64 {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let mut seen = [false; 256];
    for dy in -5i64..=5 {
        for dx in -5i64..=5 {
            let (px, py) = (x as i64 + dx, y as i64 + dy);
            if dx * dx + dy * dy <= 25 && (0..w).contains(&px) && (0..h).contains(&py) {
                seen[img.get(px as usize, py as usize) as usize] = true;
            }
        }
    }
    (seen.iter().filter(|&&s| s).count() as f64).log2()
}

#[test]
fn textured_frame_with_ten_percent_car() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.png");
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let img = GrayImage::from_fn(160, 120, |_, _| rng.gen_range(40..220));
    save_png(&img, &path).unwrap();
    // 50% wide × 20% tall = 10% of the frame
    fs::write(
        dir.path().join("f.png.detections.json"),
        r#"[{"class":"car","confidence":0.9,"bbox":[0.25,0.4,0.75,0.6]}]"#,
    )
    .unwrap();
    let scores = format!(r#"{{"grid":5,"scores":[{}]}}"#, vec!["0.8"; 25].join(","));
    fs::write(dir.path().join("f.png.memorability.json"), scores).unwrap();

    let frame = FrameRef::new("f", Role::Query, &path);
    let got = score_frame(
        &frame,
        &PipelineConfig::default(),
        &SidecarScorer::new(),
        &Thresholds::DEFAULT,
    )
    .unwrap();

    let working = resize_bilinear(&img, SIDE, SIDE).unwrap();
    let (mut static_px, mut masked_e) = (0usize, 0.0);
    for y in 0..SIDE {
        for x in 0..SIDE {
            let (cx, cy) = ((x as f64 + 0.5) / SIDE as f64, (y as f64 + 0.5) / SIDE as f64);
            let dynamic = (0.25..0.75).contains(&cx) && (0.4..0.6).contains(&cy);
            if !dynamic {
                static_px += 1;
                masked_e += disk_entropy(&working, x, y);
            }
        }
    }
    let n = (SIDE * SIDE) as f64;
    let (ss, ms, es) = (static_px as f64 / n, 0.8 * static_px as f64 / n, masked_e / (n * 8.0));
    assert!((got.ss - ss).abs() < 1e-12, "SS {} vs {ss}", got.ss);
    assert!((got.ss - 0.9).abs() < 1e-3);
    assert!((got.ms - ms).abs() < 1e-12, "MS {} vs {ms}", got.ms);
    assert!((got.ms - 0.72).abs() < 1e-3);
    assert!((got.es - es).abs() < 1e-9, "ES {} vs {es}", got.es);
    assert!(got.selected, "{got:?}");
}

#[test]
fn uniform_frame_without_sidecar_fails_entropy_only() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u.png");
    save_png(&GrayImage::filled(64, 48, 128), &path).unwrap();
    let frame = FrameRef::new("u", Role::Reference, &path);
    let got = score_frame(
        &frame,
        &PipelineConfig::default(),
        &ConstantScorer(0.9),
        &Thresholds::DEFAULT,
    )
    .unwrap();
    assert_eq!((got.ms, got.ss, got.es), (0.9, 1.0, 0.0));
    assert_eq!(
        got.failing_criteria.into_iter().collect::<Vec<_>>(),
        [Criterion::Entropy]
    );
}

#[test]
fn undecodable_frame_names_the_frame() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.png");
    fs::write(&path, b"not a png").unwrap();
    let frame = FrameRef::new("bad", Role::Query, &path);
    let err = score_frame(
        &frame,
        &PipelineConfig::default(),
        &ConstantScorer(0.5),
        &Thresholds::DEFAULT,
    )
    .unwrap_err();
    assert!(err.to_string().contains("bad"), "{err}");
    assert!(err.is_data_error());
}
