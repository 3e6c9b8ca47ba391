//! Tiled memorability scoring.
//!
//! A frame is resized to `grid·crop × grid·crop`, cut into `grid²`
//! non-overlapping crops, each crop is scored by a [`CropScorer`], and the
//! resulting matrix is bilinearly upscaled back to frame resolution.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::FrameRef;
use crate::grid::{resize_bilinear, upscale_grid_bilinear, GrayImage, ImageGrid};

pub const MEMORABILITY_SUFFIX: &str = ".memorability.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TilingConfig {
    pub crop_size: usize,
    pub grid: usize,
}

impl Default for TilingConfig {
    fn default() -> Self {
        Self {
            crop_size: 227,
            grid: 5,
        }
    }
}

impl TilingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.crop_size < 1 || self.grid < 1 {
            return Err(Error::invalid("crop_size and grid must be >= 1"));
        }
        Ok(())
    }

    /// Side of the working frame, `grid · crop_size`.
    pub fn frame_side(&self) -> usize {
        self.grid * self.crop_size
    }
}

/// `grid × grid` per-crop scores, row-major, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MemorabilityMatrix {
    grid: usize,
    scores: Vec<f64>,
}

impl MemorabilityMatrix {
    pub fn new(grid: usize, scores: Vec<f64>) -> Result<Self> {
        if grid == 0 || scores.len() != grid * grid {
            return Err(Error::invalid(format!(
                "memorability matrix of side {grid} needs {} scores, got {}",
                grid * grid,
                scores.len()
            )));
        }
        if let Some(v) = scores.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("memorability score {v} outside [0,1]")));
        }
        Ok(Self { grid, scores })
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.scores[row * self.grid + col]
    }

    pub fn to_grid(&self) -> ImageGrid {
        ImageGrid::new(self.grid, self.grid, self.scores.clone()).expect("validated matrix")
    }
}

/// Position of a crop within the tiling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CropIndex {
    pub row: usize,
    pub col: usize,
    pub grid: usize,
}

impl CropIndex {
    pub fn linear(&self) -> usize {
        self.row * self.grid + self.col
    }
}

/// Scores one crop of one frame. Implementations return raw values; the
/// caller clamps them to `[0, 1]`.
pub trait CropScorer: Send + Sync {
    fn score(&self, frame: &FrameRef, index: CropIndex, crop: &GrayImage) -> std::result::Result<f64, String>;

    /// Whether crops of a frame may be scored concurrently.
    fn is_reentrant(&self) -> bool {
        true
    }

    fn name(&self) -> &'static str;
}

/// Same score for every crop.
#[derive(Debug, Clone)]
pub struct ConstantScorer(pub f64);

impl CropScorer for ConstantScorer {
    fn score(&self, _: &FrameRef, _: CropIndex, _: &GrayImage) -> std::result::Result<f64, String> {
        Ok(self.0)
    }

    fn name(&self) -> &'static str {
        "constant"
    }
}

/// `min(stddev(crop) / 64, 1)`: a deterministic texture proxy for tests and
/// smoke runs.
#[derive(Debug, Clone, Default)]
pub struct VarianceScorer;

impl VarianceScorer {
    pub fn heuristic(crop: &GrayImage) -> f64 {
        let n = crop.pixels().len() as f64;
        if n == 0.0 {
            return 0.0;
        }
        let mean = crop.pixels().iter().map(|&p| f64::from(p)).sum::<f64>() / n;
        let var = crop
            .pixels()
            .iter()
            .map(|&p| (f64::from(p) - mean).powi(2))
            .sum::<f64>()
            / n;
        (var.sqrt() / 64.0).min(1.0)
    }
}

impl CropScorer for VarianceScorer {
    fn score(&self, _: &FrameRef, _: CropIndex, crop: &GrayImage) -> std::result::Result<f64, String> {
        Ok(Self::heuristic(crop))
    }

    fn name(&self) -> &'static str {
        "variance"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemorabilitySidecar {
    pub grid: usize,
    pub scores: Vec<f64>,
}

/// Reads `<frame_path>.memorability.json` holding precomputed crop scores.
#[derive(Debug, Default)]
pub struct SidecarScorer {
    cache: Mutex<HashMap<PathBuf, Arc<MemorabilitySidecar>>>,
}

impl SidecarScorer {
    pub fn new() -> Self {
        Self::default()
    }

    fn load(&self, path: &Path) -> std::result::Result<Arc<MemorabilitySidecar>, String> {
        if let Some(hit) = self.cache.lock().unwrap().get(path) {
            return Ok(hit.clone());
        }
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let parsed: MemorabilitySidecar =
            serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        if parsed.scores.len() != parsed.grid * parsed.grid {
            return Err(format!(
                "{}: grid {} needs {} scores, found {}",
                path.display(),
                parsed.grid,
                parsed.grid * parsed.grid,
                parsed.scores.len()
            ));
        }
        let parsed = Arc::new(parsed);
        self.cache.lock().unwrap().insert(path.to_path_buf(), parsed.clone());
        Ok(parsed)
    }
}

impl CropScorer for SidecarScorer {
    fn score(&self, frame: &FrameRef, index: CropIndex, _: &GrayImage) -> std::result::Result<f64, String> {
        let sidecar = self.load(&frame.sidecar_path(MEMORABILITY_SUFFIX))?;
        if sidecar.grid != index.grid {
            return Err(format!(
                "sidecar grid {} does not match tiling grid {}",
                sidecar.grid, index.grid
            ));
        }
        sidecar
            .scores
            .get(index.linear())
            .copied()
            .ok_or_else(|| format!("missing entry {}", index.linear()))
    }

    fn name(&self) -> &'static str {
        "sidecar"
    }
}

/// Runs a command per crop: the crop goes to stdin as binary PGM and the
/// command prints one number on stdout.
#[derive(Debug, Clone)]
pub struct CommandScorer {
    program: String,
    args: Vec<String>,
}

impl CommandScorer {
    pub fn new(program: impl Into<String>, args: Vec<String>) -> Self {
        Self {
            program: program.into(),
            args,
        }
    }

    /// Splits a command line on whitespace.
    pub fn from_command_line(line: &str) -> Result<Self> {
        let mut parts = line.split_whitespace().map(str::to_string);
        let program = parts.next().ok_or_else(|| Error::invalid("empty scorer command"))?;
        Ok(Self::new(program, parts.collect()))
    }
}

impl CropScorer for CommandScorer {
    fn score(&self, _: &FrameRef, _: CropIndex, crop: &GrayImage) -> std::result::Result<f64, String> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| format!("cannot start `{}`: {e}", self.program))?;
        let pgm = crop.to_pgm();
        let mut stdin = child.stdin.take().expect("piped stdin");
        let writer = std::thread::spawn(move || {
            // a scorer may exit without reading everything
            let _ = stdin.write_all(&pgm);
        });
        let output = child
            .wait_with_output()
            .map_err(|e| format!("`{}` failed: {e}", self.program))?;
        let _ = writer.join();
        if !output.status.success() {
            return Err(format!(
                "`{}` exited with {}: {}",
                self.program,
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            ));
        }
        let text = String::from_utf8_lossy(&output.stdout);
        text.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("unparseable scorer output `{}`", text.trim()))
    }

    fn is_reentrant(&self) -> bool {
        false
    }

    fn name(&self) -> &'static str {
        "external-command"
    }
}

/// Resizes `img` to the working frame and cuts it into `grid²` crops, row-major.
pub fn tile_frame(img: &GrayImage, cfg: &TilingConfig) -> Result<Vec<GrayImage>> {
    cfg.validate()?;
    let side = cfg.frame_side();
    let resized = resize_bilinear(img, side, side)?;
    tile_resized(&resized, cfg)
}

/// Cuts an already-resized working frame into crops.
pub fn tile_resized(resized: &GrayImage, cfg: &TilingConfig) -> Result<Vec<GrayImage>> {
    let side = cfg.frame_side();
    if resized.width() != side || resized.height() != side {
        return Err(Error::invalid(format!(
            "working frame must be {side}x{side}, got {}x{}",
            resized.width(),
            resized.height()
        )));
    }
    let c = cfg.crop_size;
    let mut crops = Vec::with_capacity(cfg.grid * cfg.grid);
    for row in 0..cfg.grid {
        for col in 0..cfg.grid {
            crops.push(resized.crop(col * c, row * c, c, c)?);
        }
    }
    Ok(crops)
}

/// Scores every crop; `crops` must be the row-major output of [`tile_frame`].
pub fn memorability_matrix(
    frame: &FrameRef,
    crops: &[GrayImage],
    scorer: &dyn CropScorer,
) -> Result<MemorabilityMatrix> {
    let grid = (crops.len() as f64).sqrt().round() as usize;
    if grid == 0 || grid * grid != crops.len() {
        return Err(Error::invalid(format!(
            "{} crops do not form a square tiling",
            crops.len()
        )));
    }
    let score_one = |(i, crop): (usize, &GrayImage)| -> Result<f64> {
        let index = CropIndex {
            row: i / grid,
            col: i % grid,
            grid,
        };
        let v = scorer.score(frame, index, crop).map_err(|message| Error::Scorer {
            frame_id: frame.frame_id.clone(),
            crop: i,
            message,
        })?;
        if v.is_nan() {
            return Err(Error::Scorer {
                frame_id: frame.frame_id.clone(),
                crop: i,
                message: "score is NaN".into(),
            });
        }
        Ok(v.clamp(0.0, 1.0))
    };
    let scores: Vec<f64> = if scorer.is_reentrant() {
        crops.par_iter().enumerate().map(score_one).collect::<Result<_>>()?
    } else {
        crops.iter().enumerate().map(score_one).collect::<Result<_>>()?
    };
    MemorabilityMatrix::new(grid, scores)
}

/// Bilinear upscale of the matrix to `out_w × out_h`.
pub fn memorability_map(matrix: &MemorabilityMatrix, out_w: usize, out_h: usize) -> Result<ImageGrid> {
    upscale_grid_bilinear(&matrix.to_grid(), out_w, out_h)
}

/// `MS = Σ m·s / (W·H)`: dynamic pixels contribute zero but stay in the
/// denominator.
pub fn memorability_score(mmap: &ImageGrid, smap: &ImageGrid) -> Result<f64> {
    if !smap.is_binary() {
        return Err(Error::invalid("staticity map must be binary"));
    }
    let total = mmap.masked_sum(smap)?;
    Ok((total / mmap.len() as f64).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::Role;

    fn frame() -> FrameRef {
        FrameRef::new("f0", Role::Query, "/nonexistent/f0.png")
    }

    #[test]
    fn default_tiling_gives_25_crops() {
        let img = GrayImage::from_fn(64, 48, |x, y| ((x * 3 + y) % 256) as u8);
        let crops = tile_frame(&img, &TilingConfig::default()).unwrap();
        assert_eq!(crops.len(), 25);
        assert!(crops.iter().all(|c| c.width() == 227 && c.height() == 227));
    }

    #[test]
    fn single_crop_is_whole_frame() {
        let img = GrayImage::from_fn(10, 10, |x, y| (x * 10 + y) as u8);
        let cfg = TilingConfig { crop_size: 10, grid: 1 };
        let crops = tile_frame(&img, &cfg).unwrap();
        assert_eq!(crops, vec![img]);
    }

    #[test]
    fn block_painted_frame_maps_to_crops() {
        let cfg = TilingConfig {
            crop_size: 227,
            grid: 5,
        };
        let side = cfg.frame_side();
        let value = |r: usize, c: usize| (r * 5 + c) as u8 * 10 + 3;
        let img = GrayImage::from_fn(side, side, |x, y| value(y / 227, x / 227));
        let crops = tile_frame(&img, &cfg).unwrap();
        for (i, crop) in crops.iter().enumerate() {
            let v = value(i / 5, i % 5);
            assert!(crop.pixels().iter().all(|&p| p == v), "crop {i}");
        }
    }

    #[test]
    fn constant_backend_matrix() {
        let crops = vec![GrayImage::filled(3, 3, 0); 25];
        let m = memorability_matrix(&frame(), &crops, &ConstantScorer(0.7)).unwrap();
        assert_eq!(m.grid(), 5);
        assert!(m.scores().iter().all(|&v| v == 0.7));
        let m = memorability_matrix(&frame(), &crops, &ConstantScorer(1.7)).unwrap();
        assert!(m.scores().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn variance_backend_on_uniform_crop() {
        assert_eq!(VarianceScorer::heuristic(&GrayImage::filled(5, 5, 200)), 0.0);
        let stripes = GrayImage::from_fn(4, 4, |x, _| if x % 2 == 0 { 0 } else { 255 });
        // stddev 127.5 saturates
        assert_eq!(VarianceScorer::heuristic(&stripes), 1.0);
        let soft = GrayImage::from_fn(4, 4, |x, _| if x % 2 == 0 { 100 } else { 132 });
        assert_eq!(VarianceScorer::heuristic(&soft), 0.25);
    }

    #[test]
    fn sidecar_backend_passes_through_row_major() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.png");
        let scores: Vec<f64> = (0..25).map(|i| i as f64 / 25.0).collect();
        let side = MemorabilitySidecar {
            grid: 5,
            scores: scores.clone(),
        };
        std::fs::write(
            format!("{}{MEMORABILITY_SUFFIX}", path.display()),
            serde_json::to_string(&side).unwrap(),
        )
        .unwrap();
        let f = FrameRef::new("a", Role::Query, &path);
        let crops = vec![GrayImage::filled(2, 2, 0); 25];
        let m = memorability_matrix(&f, &crops, &SidecarScorer::new()).unwrap();
        assert_eq!(m.scores(), &scores[..]);
        assert_eq!(m.get(1, 2), 7.0 / 25.0);
    }

    #[test]
    fn missing_sidecar_is_scorer_error() {
        let crops = vec![GrayImage::filled(2, 2, 0); 25];
        let err = memorability_matrix(&frame(), &crops, &SidecarScorer::new()).unwrap_err();
        match err {
            Error::Scorer { frame_id, .. } => assert_eq!(frame_id, "f0"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn short_sidecar_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.png");
        std::fs::write(
            format!("{}{MEMORABILITY_SUFFIX}", path.display()),
            r#"{"grid": 5, "scores": [0.1, 0.2]}"#,
        )
        .unwrap();
        let f = FrameRef::new("b", Role::Query, &path);
        let crops = vec![GrayImage::filled(2, 2, 0); 25];
        assert!(memorability_matrix(&f, &crops, &SidecarScorer::new()).is_err());
    }

    #[test]
    fn command_backend_protocol() {
        // reads the PGM header from stdin and echoes a fixed score
        let ok = CommandScorer::new("sh", vec!["-c".into(), "head -c 2 >/dev/null; echo 0.42".into()]);
        let crops = vec![GrayImage::filled(4, 4, 9); 4];
        let m = memorability_matrix(&frame(), &crops, &ok).unwrap();
        assert_eq!(m.scores(), &[0.42; 4]);

        let size = CommandScorer::new("sh", vec!["-c".into(), "wc -c | awk '{print $1/1000}'".into()]);
        let m = memorability_matrix(&frame(), &crops[..1], &size).unwrap();
        // "P5\n4 4\n255\n" is 11 bytes plus 16 pixels
        assert_eq!(m.scores(), &[0.027]);

        let fail = CommandScorer::new("sh", vec!["-c".into(), "exit 3".into()]);
        let err = memorability_matrix(&frame(), &crops, &fail).unwrap_err();
        assert!(matches!(err, Error::Scorer { crop: 0, .. }), "{err}");

        let junk = CommandScorer::new("sh", vec!["-c".into(), "echo banana".into()]);
        let err = memorability_matrix(&frame(), &crops, &junk).unwrap_err();
        assert!(err.to_string().contains("unparseable"), "{err}");
    }

    #[test]
    fn map_examples() {
        let m = MemorabilityMatrix::new(5, vec![0.7; 25]).unwrap();
        let map = memorability_map(&m, 1135, 1135).unwrap();
        assert!(map.values().iter().all(|&v| v == 0.7));

        let mut s = vec![0.2; 25];
        s[6] = 0.9;
        let m = MemorabilityMatrix::new(5, s).unwrap();
        let map = memorability_map(&m, 1135, 1135).unwrap();
        assert_eq!(map.max(), 0.9);
        assert_eq!(map.get(227 + 113, 227 + 113), 0.9);
        assert!(map.min() >= 0.2);
    }

    #[test]
    fn score_examples() {
        let ones = ImageGrid::filled(10, 10, 1.0).unwrap();
        let zeros = ImageGrid::filled(10, 10, 0.0).unwrap();
        assert_eq!(memorability_score(&ones, &ones).unwrap(), 1.0);
        assert_eq!(memorability_score(&ones, &zeros).unwrap(), 0.0);
        let m = ImageGrid::filled(10, 10, 0.8).unwrap();
        let half = ImageGrid::new(10, 10, (0..100).map(|i| (i % 2) as f64).collect()).unwrap();
        assert!((memorability_score(&m, &half).unwrap() - 0.4).abs() < 1e-15);
        assert!(memorability_score(&m, &ImageGrid::filled(9, 10, 1.0).unwrap()).is_err());
    }

    #[test]
    fn matrix_validation() {
        assert!(MemorabilityMatrix::new(2, vec![0.1; 3]).is_err());
        assert!(MemorabilityMatrix::new(1, vec![1.5]).is_err());
    }
}
