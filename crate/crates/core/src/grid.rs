//! Pixel grids and bilinear resampling.
//!
//! Every resampler in the crate uses the same pixel-center convention: output
//! pixel `x` samples the source at `(x + 0.5) * in / out - 0.5`, clamped to the
//! outermost source samples. Upscaling a 5×5 matrix to 1135×1135 therefore
//! puts each matrix cell exactly on the center pixel of its 227×227 crop, and
//! pixels beyond the outer anchors take the edge value.

use image::DynamicImage;

use crate::error::{Error, Result};

/// Dense row-major grid of finite reals.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl ImageGrid {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!("empty grid ({width}x{height})")));
        }
        if values.len() != width * height {
            return Err(Error::invalid(format!(
                "grid {width}x{height} needs {} values, got {}",
                width * height,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite grid value at index {i}")));
        }
        Ok(Self { width, height, values })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sum(&self) -> f64 {
        compensated_sum(self.values.iter().copied())
    }

    /// True when every value is exactly 0 or 1.
    pub fn is_binary(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    pub fn same_dims(&self, other: &ImageGrid) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Elementwise `Σ self·mask`, the numerator of every masked score.
    pub fn masked_sum(&self, mask: &ImageGrid) -> Result<f64> {
        if !self.same_dims(mask) {
            return Err(Error::invalid(format!(
                "dimension mismatch: {}x{} vs mask {}x{}",
                self.width, self.height, mask.width, mask.height
            )));
        }
        Ok(compensated_sum(
            self.values.iter().zip(&mask.values).map(|(v, m)| v * m),
        ))
    }
}

/// Neumaier summation; grids hold ~1.3M terms and plain accumulation drifts
/// visibly in the last digits of a mean.
pub fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// 8-bit single-channel image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::invalid(format!(
                "image {width}x{height} needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self { width, height, pixels }
    }

    /// Converts a decoded image, applying `0.299R + 0.587G + 0.114B` rounded
    /// to the nearest integer for color inputs.
    pub fn from_dynamic(img: &DynamicImage) -> Self {
        match img {
            DynamicImage::ImageLuma8(g) => Self {
                width: g.width() as usize,
                height: g.height() as usize,
                pixels: g.as_raw().clone(),
            },
            other => {
                let rgb = other.to_rgb8();
                let pixels = rgb.pixels().map(|p| luma(p.0[0], p.0[1], p.0[2])).collect();
                Self {
                    width: rgb.width() as usize,
                    height: rgb.height() as usize,
                    pixels,
                }
            }
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    /// Copies the `w`×`h` window whose top-left corner is `(x, y)`.
    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Result<GrayImage> {
        if x + w > self.width || y + h > self.height {
            return Err(Error::invalid(format!(
                "crop ({x},{y},{w},{h}) exceeds {}x{}",
                self.width, self.height
            )));
        }
        let mut pixels = Vec::with_capacity(w * h);
        for row in y..y + h {
            let start = row * self.width + x;
            pixels.extend_from_slice(&self.pixels[start..start + w]);
        }
        Ok(GrayImage {
            width: w,
            height: h,
            pixels,
        })
    }

    pub fn to_grid(&self) -> ImageGrid {
        ImageGrid {
            width: self.width,
            height: self.height,
            values: self.pixels.iter().map(|&p| f64::from(p)).collect(),
        }
    }

    /// Binary PGM (P5) encoding.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }
}

pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    let y = 0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b);
    y.round().clamp(0.0, 255.0) as u8
}

/// One output coordinate's source neighbours and the weight of the upper one.
#[derive(Debug, Clone, Copy)]
struct Tap {
    lo: usize,
    hi: usize,
    frac: f64,
}

fn taps(input: usize, output: usize) -> Vec<Tap> {
    let last = (input - 1) as f64;
    let denom = (2 * output) as f64;
    (0..output)
        .map(|x| {
            // single rounding so anchors land on integers exactly
            let u = (((2 * x + 1) * input) as f64 / denom - 0.5).clamp(0.0, last);
            let lo = u.floor() as usize;
            let hi = (lo + 1).min(input - 1);
            Tap {
                lo,
                hi,
                frac: u - lo as f64,
            }
        })
        .collect()
}

/// `a + t(b - a)` kept inside `[min(a,b), max(a,b)]` so rounding can never overshoot.
#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if a == b {
        return a;
    }
    let v = a + t * (b - a);
    if a < b {
        v.clamp(a, b)
    } else {
        v.clamp(b, a)
    }
}

fn resample(values: &[f64], in_w: usize, in_h: usize, out_w: usize, out_h: usize) -> Vec<f64> {
    let xs = taps(in_w, out_w);
    let ys = taps(in_h, out_h);
    let mut out = Vec::with_capacity(out_w * out_h);
    for ty in &ys {
        let r0 = &values[ty.lo * in_w..(ty.lo + 1) * in_w];
        let r1 = &values[ty.hi * in_w..(ty.hi + 1) * in_w];
        for tx in &xs {
            let top = lerp(r0[tx.lo], r0[tx.hi], tx.frac);
            let bottom = lerp(r1[tx.lo], r1[tx.hi], tx.frac);
            out.push(lerp(top, bottom, ty.frac));
        }
    }
    out
}

/// Bilinear resampling of a real grid. The output never leaves
/// `[grid.min(), grid.max()]`.
pub fn upscale_grid_bilinear(grid: &ImageGrid, out_w: usize, out_h: usize) -> Result<ImageGrid> {
    if grid.is_empty() {
        return Err(Error::invalid("cannot resample an empty grid"));
    }
    if out_w == 0 || out_h == 0 {
        return Err(Error::invalid(format!("invalid output size {out_w}x{out_h}")));
    }
    let values = resample(&grid.values, grid.width, grid.height, out_w, out_h);
    Ok(ImageGrid {
        width: out_w,
        height: out_h,
        values,
    })
}

/// Bilinear resize of an 8-bit image, rounding to the nearest level.
pub fn resize_bilinear(img: &GrayImage, out_w: usize, out_h: usize) -> Result<GrayImage> {
    if img.width == 0 || img.height == 0 {
        return Err(Error::invalid("cannot resize an empty image"));
    }
    if out_w == 0 || out_h == 0 {
        return Err(Error::invalid(format!("invalid output size {out_w}x{out_h}")));
    }
    if out_w == img.width && out_h == img.height {
        return Ok(img.clone());
    }
    let src: Vec<f64> = img.pixels.iter().map(|&p| f64::from(p)).collect();
    let pixels = resample(&src, img.width, img.height, out_w, out_h)
        .into_iter()
        .map(|v| v.round().clamp(0.0, 255.0) as u8)
        .collect();
    Ok(GrayImage {
        width: out_w,
        height: out_h,
        pixels,
    })
}
