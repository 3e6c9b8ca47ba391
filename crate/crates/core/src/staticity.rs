//! Dynamic-object masking from detector output.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ImageGrid;

/// Default dynamic classes: the movable COCO categories a street or indoor
/// camera commonly sees. Overridable through [`StaticityConfig`].
pub const DEFAULT_DYNAMIC_CLASSES: [&str; 21] = [
    "person",
    "bicycle",
    "car",
    "motorcycle",
    "airplane",
    "bus",
    "train",
    "truck",
    "boat",
    "bird",
    "cat",
    "dog",
    "horse",
    "sheep",
    "cow",
    "elephant",
    "bear",
    "zebra",
    "giraffe",
    "kite",
    "sports ball",
];

/// Normalized `[x0, y0, x1, y1]` box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl BBox {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        let coords = [self.x0, self.y0, self.x1, self.y1];
        if coords.iter().any(|c| !c.is_finite() || !(0.0..=1.0).contains(c)) {
            return Err(format!("bbox {coords:?} outside [0,1]"));
        }
        if !(self.x0 < self.x1 && self.y0 < self.y1) {
            return Err(format!("bbox {coords:?} has unordered corners"));
        }
        Ok(())
    }

    /// Center-sampling rule: pixel `(x, y)` is inside when its center
    /// `((x+0.5)/W, (y+0.5)/H)` lies in `[x0, x1) × [y0, y1)`.
    pub fn covers_pixel(&self, x: usize, y: usize, width: usize, height: usize) -> bool {
        let cx = (x as f64 + 0.5) / width as f64;
        let cy = (y as f64 + 0.5) / height as f64;
        self.x0 <= cx && cx < self.x1 && self.y0 <= cy && cy < self.y1
    }

    /// Half-open range of pixel indices along one axis whose centers fall in `[lo, hi)`.
    fn pixel_span(lo: f64, hi: f64, n: usize) -> (usize, usize) {
        // smallest i with (i+0.5)/n >= lo, then smallest i with (i+0.5)/n >= hi
        let first = |bound: f64| -> usize {
            let mut i = (bound * n as f64 - 0.5).ceil().max(0.0) as usize;
            while i > 0 && (i as f64 - 0.5) / n as f64 >= bound {
                i -= 1;
            }
            while i < n && (i as f64 + 0.5) / (n as f64) < bound {
                i += 1;
            }
            i.min(n)
        };
        (first(lo), first(hi))
    }

    /// Pixel rectangle `(x_start, x_end, y_start, y_end)` covered under the
    /// center-sampling rule.
    pub fn pixel_rect(&self, width: usize, height: usize) -> (usize, usize, usize, usize) {
        let (xs, xe) = Self::pixel_span(self.x0, self.x1, width);
        let (ys, ye) = Self::pixel_span(self.y0, self.y1, height);
        (xs, xe, ys, ye)
    }

    /// Pixel area of the box on a `width`×`height` frame.
    pub fn pixel_area(&self, width: usize, height: usize) -> f64 {
        (self.x1 - self.x0) * width as f64 * (self.y1 - self.y0) * height as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    #[serde(rename = "class")]
    pub class_name: String,
    pub confidence: f64,
    #[serde(with = "bbox_array")]
    pub bbox: BBox,
}

mod bbox_array {
    use super::BBox;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(b: &BBox, s: S) -> Result<S::Ok, S::Error> {
        [b.x0, b.y0, b.x1, b.y1].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BBox, D::Error> {
        let [x0, y0, x1, y1] = <[f64; 4]>::deserialize(d)?;
        Ok(BBox { x0, y0, x1, y1 })
    }
}

impl Detection {
    pub fn new(class_name: impl Into<String>, confidence: f64, bbox: BBox) -> Self {
        Self {
            class_name: class_name.into(),
            confidence,
            bbox,
        }
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(format!("confidence {} outside [0,1]", self.confidence));
        }
        self.bbox.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticityConfig {
    pub dynamic_classes: BTreeSet<String>,
    pub confidence_threshold: f64,
    pub min_area_fraction: f64,
}

impl Default for StaticityConfig {
    fn default() -> Self {
        Self {
            dynamic_classes: DEFAULT_DYNAMIC_CLASSES.iter().map(|s| s.to_string()).collect(),
            confidence_threshold: 0.55,
            min_area_fraction: 0.05,
        }
    }
}

impl StaticityConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("confidence_threshold", self.confidence_threshold),
            ("min_area_fraction", self.min_area_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} = {v} outside [0,1]")));
            }
        }
        Ok(())
    }
}

/// Keeps detections of a dynamic class with `confidence >= threshold` and
/// pixel area `>= min_area_fraction · W · H`.
pub fn filter_detections(
    dets: &[Detection],
    cfg: &StaticityConfig,
    img_w: usize,
    img_h: usize,
) -> Result<Vec<Detection>> {
    cfg.validate()?;
    let min_area = cfg.min_area_fraction * img_w as f64 * img_h as f64;
    let mut kept = Vec::new();
    for (i, d) in dets.iter().enumerate() {
        d.validate()
            .map_err(|e| Error::invalid(format!("detection #{i} ({}): {e}", d.class_name)))?;
        if cfg.dynamic_classes.contains(&d.class_name)
            && d.confidence >= cfg.confidence_threshold
            && d.bbox.pixel_area(img_w, img_h) >= min_area
        {
            kept.push(d.clone());
        }
    }
    Ok(kept)
}

/// Binary map: 0 inside the union of boxes, 1 elsewhere.
pub fn staticity_map(dets: &[Detection], img_w: usize, img_h: usize) -> Result<ImageGrid> {
    if img_w == 0 || img_h == 0 {
        return Err(Error::invalid(format!("zero-sized image {img_w}x{img_h}")));
    }
    let mut values = vec![1.0; img_w * img_h];
    for d in dets {
        let (xs, xe, ys, ye) = d.bbox.pixel_rect(img_w, img_h);
        for y in ys..ye {
            values[y * img_w + xs..y * img_w + xe].fill(0.0);
        }
    }
    ImageGrid::new(img_w, img_h, values)
}

/// Fraction of static pixels.
pub fn staticity_score(smap: &ImageGrid) -> Result<f64> {
    if !smap.is_binary() {
        return Err(Error::invalid("staticity map must be binary"));
    }
    Ok(smap.sum() / smap.len() as f64)
}
