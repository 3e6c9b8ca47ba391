//! Deterministic synthetic dataset with planted confusing frames.
//!
//! Query and reference traversals share `frames` places. Most places are
//! well textured and match across traversals. The rest are confusing in the
//! ways the selection criteria target, and are built so the tiny-image
//! descriptor mismatches them:
//!
//! * `Uniform`: the query faces a blank wall (zero-variance descriptor).
//! * `Door`: flat two-tone frames; each query is identical to the reference
//!   of the next door in the sequence.
//! * `Natural`: smooth low-contrast fields with low memorability, aliased the
//!   same way as doors.
//! * `Occluded`: a striped vehicle covers half of the query, and the same
//!   vehicle appears in the reference two places later.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{upscale_grid_bilinear, GrayImage, ImageGrid};
use crate::io::{save_png, write_atomic, DatasetManifest, GroundTruthSpec, DETECTIONS_SUFFIX};
use crate::memorability::{MemorabilitySidecar, MEMORABILITY_SUFFIX};
use crate::staticity::{BBox, Detection};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameKind {
    Good,
    Uniform,
    Door,
    Natural,
    Occluded,
}

#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    pub dataset_id: String,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            frames: 60,
            width: 128,
            height: 96,
            seed: 2019,
            dataset_id: "synthetic-60".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub root: PathBuf,
    pub manifest_path: PathBuf,
    /// Kind of each place, in frame order.
    pub kinds: Vec<FrameKind>,
}

const CONFUSING: [FrameKind; 4] = [
    FrameKind::Uniform,
    FrameKind::Door,
    FrameKind::Natural,
    FrameKind::Occluded,
];

/// Place layout: every fourth place from index 2 is confusing, cycling
/// through the confusing kinds.
pub fn layout(frames: usize) -> Vec<FrameKind> {
    let mut next = 0;
    (0..frames)
        .map(|i| {
            if i % 4 == 2 {
                let k = CONFUSING[next % CONFUSING.len()];
                next += 1;
                k
            } else {
                FrameKind::Good
            }
        })
        .collect()
}

/// Vehicle box used for occluded frames: 60% × 85% of the frame.
pub const VEHICLE_BOX: BBox = BBox {
    x0: 0.0,
    y0: 0.1,
    x1: 0.6,
    y1: 0.95,
};

fn texture(seed: u64, w: usize, h: usize) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (cw, ch) = (w.div_ceil(10).max(2), h.div_ceil(10).max(2));
    let coarse: Vec<f64> = (0..cw * ch).map(|_| rng.gen_range(-70.0..70.0)).collect();
    let coarse = upscale_grid_bilinear(&ImageGrid::new(cw, ch, coarse).expect("sized"), w, h).expect("non-empty");
    let values = coarse.values();
    GrayImage::from_fn(w, h, |x, y| {
        let v = 128.0 + values[y * w + x] + rng.gen_range(-40.0..40.0);
        v.round().clamp(0.0, 255.0) as u8
    })
}

fn revisit(img: &GrayImage, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    GrayImage::from_fn(img.width(), img.height(), |x, y| {
        let v = 0.9 * f64::from(img.get(x, y)) + 15.0 + rng.gen_range(-6.0..6.0);
        v.round().clamp(0.0, 255.0) as u8
    })
}

fn door(edge: usize, w: usize, h: usize) -> GrayImage {
    GrayImage::from_fn(w, h, |x, _| if x < edge { 70 } else { 170 })
}

fn field(shift: f64, w: usize, h: usize) -> GrayImage {
    GrayImage::from_fn(w, h, |x, y| {
        let v = 110.0 + 12.0 * ((x as f64 + shift) / 9.0).sin() + 8.0 * (y as f64 / 7.0).cos();
        v.round() as u8
    })
}

fn with_vehicle(img: &GrayImage) -> GrayImage {
    let (w, h) = (img.width(), img.height());
    GrayImage::from_fn(w, h, |x, y| {
        if VEHICLE_BOX.covers_pixel(x, y, w, h) {
            if (x / 3 + y / 5) % 2 == 0 {
                20
            } else {
                235
            }
        } else {
            img.get(x, y)
        }
    })
}

fn memorability(base: f64, spread: f64, seed: u64) -> MemorabilitySidecar {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    MemorabilitySidecar {
        grid: 5,
        scores: (0..25).map(|_| base + rng.gen_range(0.0..spread)).collect(),
    }
}

struct Frame {
    image: GrayImage,
    detections: Vec<Detection>,
    memorability: MemorabilitySidecar,
}

fn write_frame(dir: &Path, index: usize, frame: &Frame) -> Result<()> {
    let path = dir.join(format!("{index:04}.png"));
    save_png(&frame.image, &path)?;
    let mut det = path.clone().into_os_string();
    det.push(DETECTIONS_SUFFIX);
    let det_json = serde_json::to_string_pretty(&frame.detections).expect("detections serialize");
    write_atomic(Path::new(&det), det_json.as_bytes())?;
    let mut mem = path.into_os_string();
    mem.push(MEMORABILITY_SUFFIX);
    let mem_json = serde_json::to_string(&frame.memorability).expect("sidecar serializes");
    write_atomic(Path::new(&mem), mem_json.as_bytes())
}

/// Writes the dataset (images, sidecars, `manifest.json`) under `root`.
pub fn generate(root: &Path, spec: &SyntheticSpec) -> Result<SyntheticDataset> {
    if spec.frames < 8 || spec.width < 16 || spec.height < 16 {
        return Err(Error::invalid("synthetic dataset needs >= 8 frames of at least 16x16"));
    }
    let (w, h) = (spec.width, spec.height);
    let kinds = layout(spec.frames);
    let ordinal = |kind: FrameKind| -> Vec<usize> {
        kinds
            .iter()
            .enumerate()
            .filter(|(_, k)| **k == kind)
            .map(|(i, _)| i)
            .collect()
    };
    let doors = ordinal(FrameKind::Door);
    let naturals = ordinal(FrameKind::Natural);
    let occluded = ordinal(FrameKind::Occluded);
    let door_edge = |j: usize| w / 8 + (j * 17) % (w * 3 / 4);
    let field_shift = |j: usize| 7.0 * j as f64 + 3.0;

    let qdir = root.join("query");
    let rdir = root.join("reference");
    for d in [&qdir, &rdir] {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }

    let seed = |i: usize, salt: u64| spec.seed.wrapping_mul(1_000_003).wrapping_add(i as u64 * 97 + salt);
    for (i, &kind) in kinds.iter().enumerate() {
        let place = texture(seed(i, 1), w, h);
        let good_mem = memorability(0.8, 0.15, seed(i, 2));
        let mut reference = Frame {
            image: place.clone(),
            detections: Vec::new(),
            memorability: memorability(0.8, 0.15, seed(i, 3)),
        };
        let query = match kind {
            FrameKind::Good => {
                let mut detections = Vec::new();
                if i % 7 == 0 {
                    // too small to count, and a static class
                    detections.push(Detection::new("person", 0.9, BBox::new(0.70, 0.60, 0.85, 0.80)));
                    detections.push(Detection::new("bench", 0.8, BBox::new(0.05, 0.55, 0.55, 0.95)));
                }
                Frame {
                    image: revisit(&place, seed(i, 4)),
                    detections,
                    memorability: good_mem,
                }
            }
            FrameKind::Uniform => Frame {
                image: GrayImage::filled(w, h, 140 + (i % 30) as u8),
                detections: Vec::new(),
                memorability: memorability(0.62, 0.06, seed(i, 5)),
            },
            FrameKind::Door => {
                let j = doors.iter().position(|&d| d == i).expect("door index");
                let prev = (j + doors.len() - 1) % doors.len();
                reference.image = door(door_edge(prev), w, h);
                reference.memorability = memorability(0.6, 0.05, seed(i, 6));
                Frame {
                    image: door(door_edge(j), w, h),
                    detections: Vec::new(),
                    memorability: memorability(0.58, 0.05, seed(i, 7)),
                }
            }
            FrameKind::Natural => {
                let j = naturals.iter().position(|&d| d == i).expect("natural index");
                let prev = (j + naturals.len() - 1) % naturals.len();
                reference.image = field(field_shift(prev), w, h);
                reference.memorability = memorability(0.22, 0.08, seed(i, 8));
                Frame {
                    image: field(field_shift(j), w, h),
                    detections: Vec::new(),
                    memorability: memorability(0.2, 0.1, seed(i, 9)),
                }
            }
            FrameKind::Occluded => Frame {
                image: with_vehicle(&revisit(&place, seed(i, 10))),
                detections: vec![Detection::new("car", 0.93, VEHICLE_BOX)],
                memorability: memorability(0.85, 0.1, seed(i, 11)),
            },
        };
        // the same vehicle parked two places after each occluded query
        if occluded.iter().any(|&o| o + 2 == i) {
            reference.image = with_vehicle(&place);
            reference.detections = vec![Detection::new("car", 0.9, VEHICLE_BOX)];
        }
        write_frame(&qdir, i, &query)?;
        write_frame(&rdir, i, &reference)?;
    }

    let manifest = DatasetManifest {
        dataset_id: spec.dataset_id.clone(),
        query_dir: "query".into(),
        reference_dir: "reference".into(),
        ground_truth: GroundTruthSpec {
            scheme: "window".into(),
            k: Some(1),
            path: None,
        },
    };
    let manifest_path = root.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_atomic(&manifest_path, text.as_bytes())?;
    Ok(SyntheticDataset {
        root: root.to_path_buf(),
        manifest_path,
        kinds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_cycles_confusing_kinds() {
        let k = layout(12);
        assert_eq!(k[2], FrameKind::Uniform);
        assert_eq!(k[6], FrameKind::Door);
        assert_eq!(k[10], FrameKind::Natural);
        assert_eq!(k.iter().filter(|&&k| k == FrameKind::Good).count(), 9);
        assert_eq!(layout(60).iter().filter(|&&k| k != FrameKind::Good).count(), 15);
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = SyntheticSpec {
            frames: 16,
            width: 32,
            height: 24,
            ..Default::default()
        };
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        generate(a.path(), &spec).unwrap();
        generate(b.path(), &spec).unwrap();
        for sub in ["query", "reference"] {
            let mut names: Vec<_> = std::fs::read_dir(a.path().join(sub))
                .unwrap()
                .map(|e| e.unwrap().file_name())
                .collect();
            names.sort();
            assert_eq!(names.len(), 16 * 3);
            for n in names {
                let x = std::fs::read(a.path().join(sub).join(&n)).unwrap();
                let y = std::fs::read(b.path().join(sub).join(&n)).unwrap();
                assert_eq!(x, y, "{n:?}");
            }
        }
    }
}
