//! Per-frame scoring and the memorable-map verdicts.

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entropy::{entropy_map, entropy_score, EntropyConfig};
use crate::error::{Error, Result};
use crate::frame::{FrameRef, FrameScores, Role, Thresholds};
use crate::grid::{resize_bilinear, GrayImage, ImageGrid};
use crate::io::{load_detections, load_gray};
use crate::memorability::{
    memorability_map, memorability_matrix, memorability_score, tile_resized, CropScorer, MemorabilityMatrix,
    TilingConfig,
};
use crate::staticity::{filter_detections, staticity_map, staticity_score, Detection, StaticityConfig};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub tiling: TilingConfig,
    pub entropy: EntropyConfig,
    pub staticity: StaticityConfig,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.tiling.validate()?;
        self.entropy.validate()?;
        self.staticity.validate()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorPolicy {
    /// Record the failure and continue with the remaining frames.
    Skip,
    #[default]
    Abort,
}

/// The three per-pixel maps of one frame at working resolution.
#[derive(Debug, Clone)]
pub struct FrameMaps {
    pub staticity: ImageGrid,
    pub matrix: MemorabilityMatrix,
    pub memorability: ImageGrid,
    pub entropy: ImageGrid,
}

impl FrameMaps {
    /// Staticity first, then memorability and entropy on the same working frame.
    pub fn compute(
        frame: &FrameRef,
        img: &GrayImage,
        detections: &[Detection],
        cfg: &PipelineConfig,
        scorer: &dyn CropScorer,
    ) -> Result<Self> {
        cfg.validate()?;
        let side = cfg.tiling.frame_side();
        let working = resize_bilinear(img, side, side)?;
        let dynamic = filter_detections(detections, &cfg.staticity, side, side)?;
        let staticity = staticity_map(&dynamic, side, side)?;
        let crops = tile_resized(&working, &cfg.tiling)?;
        let matrix = memorability_matrix(frame, &crops, scorer)?;
        let memorability = memorability_map(&matrix, side, side)?;
        let entropy = entropy_map(&working, &cfg.entropy)?;
        Ok(Self {
            staticity,
            matrix,
            memorability,
            entropy,
        })
    }

    /// `(MS, SS, ES)`.
    pub fn scores(&self, bins: usize) -> Result<(f64, f64, f64)> {
        let ss = staticity_score(&self.staticity)?;
        let ms = memorability_score(&self.memorability, &self.staticity)?;
        let es = entropy_score(&self.entropy, &self.staticity, bins)?;
        Ok((ms, ss, es))
    }
}

/// Scores an in-memory frame with explicit detections.
pub fn score_image(
    frame: &FrameRef,
    img: &GrayImage,
    detections: &[Detection],
    cfg: &PipelineConfig,
    scorer: &dyn CropScorer,
    thresholds: &Thresholds,
) -> Result<FrameScores> {
    let maps = FrameMaps::compute(frame, img, detections, cfg, scorer)?;
    let (ms, ss, es) = maps.scores(cfg.entropy.bins)?;
    Ok(FrameScores::judge(
        frame.frame_id.clone(),
        frame.role,
        ms,
        ss,
        es,
        thresholds,
    ))
}

/// Decodes the frame, reads its detection sidecar and scores it.
pub fn score_frame(
    frame: &FrameRef,
    cfg: &PipelineConfig,
    scorer: &dyn CropScorer,
    thresholds: &Thresholds,
) -> Result<FrameScores> {
    let run = || -> Result<FrameScores> {
        let img = load_gray(&frame.source_path)?;
        let detections = load_detections(frame)?.unwrap_or_else(|| {
            log::warn!(
                "no detection sidecar for `{}`; assuming no dynamic objects",
                frame.frame_id
            );
            Vec::new()
        });
        score_image(frame, &img, &detections, cfg, scorer, thresholds)
    };
    run().map_err(|e| match e {
        e @ Error::Frame { .. } => e,
        e => Error::Frame {
            frame_id: frame.frame_id.clone(),
            source: Box::new(e),
        },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedFrame {
    pub frame_id: String,
    pub role: Role,
    pub reason: String,
}

/// Every processed frame with its scores, plus the thresholds that produced
/// the verdicts. Discarded frames are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct MemorableMap {
    pub dataset_id: String,
    pub thresholds: Thresholds,
    pub entries: Vec<FrameScores>,
    pub skipped: Vec<SkippedFrame>,
}

impl MemorableMap {
    pub fn new(dataset_id: impl Into<String>, thresholds: Thresholds, entries: Vec<FrameScores>) -> Self {
        let entries = entries.iter().map(|e| e.rejudge(&thresholds)).collect();
        Self {
            dataset_id: dataset_id.into(),
            thresholds,
            entries,
            skipped: Vec::new(),
        }
    }

    /// Ids of selected frames in input order.
    pub fn selected_ids(&self) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|e| e.selected)
            .map(|e| e.frame_id.as_str())
            .collect()
    }

    pub fn selected_ids_for(&self, role: Role) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|e| e.selected && e.role == role)
            .map(|e| e.frame_id.as_str())
            .collect()
    }

    pub fn entry(&self, role: Role, frame_id: &str) -> Option<&FrameScores> {
        self.entries.iter().find(|e| e.role == role && e.frame_id == frame_id)
    }

    pub fn count_selected(&self, role: Option<Role>) -> usize {
        self.entries
            .iter()
            .filter(|e| e.selected && role.is_none_or(|r| r == e.role))
            .count()
    }
}

/// Scores `frames` (in parallel, order preserved) and applies the AND gate.
pub fn build_memorable_map(
    dataset_id: &str,
    frames: &[FrameRef],
    thresholds: &Thresholds,
    cfg: &PipelineConfig,
    scorer: &dyn CropScorer,
    policy: ErrorPolicy,
) -> Result<MemorableMap> {
    if frames.is_empty() {
        return Err(Error::invalid("no frames to score"));
    }
    cfg.validate()?;
    let done = AtomicUsize::new(0);
    let every = frames.len().div_ceil(10);
    let results: Vec<Result<FrameScores>> = frames
        .par_iter()
        .map(|f| {
            let r = score_frame(f, cfg, scorer, thresholds);
            log::debug!("scored {} `{}`", f.role, f.frame_id);
            let n = done.fetch_add(1, Ordering::Relaxed) + 1;
            if n.is_multiple_of(every) || n == frames.len() {
                log::info!("scored {n}/{} frames", frames.len());
            }
            r
        })
        .collect();
    let mut entries = Vec::with_capacity(frames.len());
    let mut skipped = Vec::new();
    for (frame, result) in frames.iter().zip(results) {
        match result {
            Ok(s) => entries.push(s),
            Err(e) if policy == ErrorPolicy::Skip => {
                log::warn!("skipping `{}`: {e}", frame.frame_id);
                skipped.push(SkippedFrame {
                    frame_id: frame.frame_id.clone(),
                    role: frame.role,
                    reason: e.to_string(),
                });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(MemorableMap {
        dataset_id: dataset_id.to_string(),
        thresholds: *thresholds,
        entries,
        skipped,
    })
}

/// Re-applies the gate under new thresholds without touching the scores.
pub fn rescore_verdicts(map: &MemorableMap, thresholds: &Thresholds) -> MemorableMap {
    MemorableMap {
        dataset_id: map.dataset_id.clone(),
        thresholds: *thresholds,
        entries: map.entries.iter().map(|e| e.rejudge(thresholds)).collect(),
        skipped: map.skipped.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::Criterion;
    use crate::memorability::ConstantScorer;
    use crate::staticity::BBox;
    use std::collections::BTreeSet;

    fn small_cfg() -> PipelineConfig {
        PipelineConfig {
            tiling: TilingConfig { crop_size: 24, grid: 5 },
            ..Default::default()
        }
    }

    fn q(id: &str) -> FrameRef {
        FrameRef::new(id, Role::Query, format!("/nonexistent/{id}.png"))
    }

    #[test]
    fn uniform_frame_fails_only_entropy() {
        let img = GrayImage::filled(40, 30, 128);
        let s = score_image(
            &q("u"),
            &img,
            &[],
            &PipelineConfig::default(),
            &ConstantScorer(0.9),
            &Thresholds::DEFAULT,
        )
        .unwrap();
        assert_eq!((s.ms, s.ss, s.es), (0.9, 1.0, 0.0));
        assert!(!s.selected);
        assert_eq!(s.failing_criteria, BTreeSet::from([Criterion::Entropy]));
    }

    #[test]
    fn fully_occluded_frame_fails_everything() {
        let img = GrayImage::from_fn(40, 30, |x, y| ((x * 37 + y * 91) % 256) as u8);
        let car = Detection::new("car", 0.9, BBox::new(0.0, 0.0, 1.0, 1.0));
        let s = score_image(
            &q("c"),
            &img,
            &[car],
            &small_cfg(),
            &ConstantScorer(0.9),
            &Thresholds::DEFAULT,
        )
        .unwrap();
        assert_eq!((s.ms, s.ss, s.es), (0.0, 0.0, 0.0));
        assert_eq!(s.failing_criteria.len(), 3);
    }

    #[test]
    fn verdicts_follow_thresholds() {
        let entries = vec![
            FrameScores::judge("a", Role::Query, 0.9, 0.9, 0.9, &Thresholds::ZERO),
            FrameScores::judge("b", Role::Query, 0.4, 1.0, 0.9, &Thresholds::ZERO),
            FrameScores::judge("c", Role::Query, 0.6, 0.5, 0.5, &Thresholds::ZERO),
        ];
        let map = MemorableMap::new("d", Thresholds::ZERO, entries);
        assert_eq!(map.selected_ids(), vec!["a", "b", "c"]);
        let strict = rescore_verdicts(&map, &Thresholds::DEFAULT);
        assert_eq!(strict.selected_ids(), vec!["a"]);
        let ones = rescore_verdicts(&map, &Thresholds::new(1.0, 1.0, 1.0).unwrap());
        assert!(ones.selected_ids().is_empty());
        assert_eq!(rescore_verdicts(&strict, &strict.thresholds), strict);
    }

    #[test]
    fn empty_frame_list_rejected() {
        let err = build_memorable_map(
            "d",
            &[],
            &Thresholds::DEFAULT,
            &small_cfg(),
            &ConstantScorer(0.5),
            ErrorPolicy::Abort,
        );
        assert!(err.is_err());
    }

    #[test]
    fn skip_policy_records_failures() {
        let frames = vec![q("missing")];
        let map = build_memorable_map(
            "d",
            &frames,
            &Thresholds::DEFAULT,
            &small_cfg(),
            &ConstantScorer(0.5),
            ErrorPolicy::Skip,
        )
        .unwrap();
        assert!(map.entries.is_empty());
        assert_eq!(map.skipped.len(), 1);
        let err = build_memorable_map(
            "d",
            &frames,
            &Thresholds::DEFAULT,
            &small_cfg(),
            &ConstantScorer(0.5),
            ErrorPolicy::Abort,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Frame { ref frame_id, .. } if frame_id == "missing"));
    }
}
