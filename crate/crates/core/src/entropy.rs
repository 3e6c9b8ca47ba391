//! Local entropy over a circular neighbourhood.
//!
//! The default `FilledBins` mode scores each pixel as `log2` of the number of
//! distinct histogram bins occupied inside its disk, so a 256-bin map is
//! bounded by 8. `Shannon` computes the usual `-Σ p log2 p` over the same
//! histogram. Disks are truncated at the image border.
//!
//! Rows are independent: each row slides a running histogram from left to
//! right, updating only the leading and trailing edge of the disk.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GrayImage, ImageGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntropyMode {
    FilledBins,
    Shannon,
}

impl std::str::FromStr for EntropyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "filled-bins" => Ok(EntropyMode::FilledBins),
            "shannon" => Ok(EntropyMode::Shannon),
            other => Err(Error::invalid(format!("unknown entropy mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyConfig {
    pub radius: usize,
    pub bins: usize,
    pub mode: EntropyMode,
}

impl Default for EntropyConfig {
    fn default() -> Self {
        Self {
            radius: 5,
            bins: 256,
            mode: EntropyMode::FilledBins,
        }
    }
}

impl EntropyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.radius < 1 {
            return Err(Error::invalid("entropy radius must be >= 1"));
        }
        if self.bins < 2 {
            return Err(Error::invalid("entropy bins must be >= 2"));
        }
        Ok(())
    }

    /// Ceiling of the map, `log2(bins)`.
    pub fn max_entropy(&self) -> f64 {
        (self.bins as f64).log2()
    }
}

/// Half-width of the disk at each vertical offset `-r..=r`.
pub(crate) fn disk_half_widths(radius: usize) -> Vec<usize> {
    let r2 = radius * radius;
    (0..=2 * radius)
        .map(|i| {
            let dy = i.abs_diff(radius);
            let rem = r2 - dy * dy;
            let mut w = (rem as f64).sqrt() as usize;
            while w * w > rem {
                w -= 1;
            }
            while (w + 1) * (w + 1) <= rem {
                w += 1;
            }
            w
        })
        .collect()
}

struct Histogram<'a> {
    counts: Vec<u32>,
    filled: usize,
    population: u32,
    // Σ c·log2(c) over bins, for Shannon mode
    clogc_sum: f64,
    clogc: &'a [f64],
}

impl<'a> Histogram<'a> {
    fn new(bins: usize, clogc: &'a [f64]) -> Self {
        Self {
            counts: vec![0; bins],
            filled: 0,
            population: 0,
            clogc_sum: 0.0,
            clogc,
        }
    }

    #[inline]
    fn add(&mut self, bin: usize) {
        let c = self.counts[bin] as usize;
        if c == 0 {
            self.filled += 1;
        }
        self.clogc_sum += self.clogc[c + 1] - self.clogc[c];
        self.counts[bin] += 1;
        self.population += 1;
    }

    #[inline]
    fn remove(&mut self, bin: usize) {
        let c = self.counts[bin] as usize;
        debug_assert!(c > 0);
        if c == 1 {
            self.filled -= 1;
        }
        self.clogc_sum += self.clogc[c - 1] - self.clogc[c];
        self.counts[bin] -= 1;
        self.population -= 1;
    }

    fn shannon(&self) -> f64 {
        let n = f64::from(self.population);
        (n.log2() - self.clogc_sum / n).max(0.0)
    }
}

/// Per-pixel local entropy of `img`, same dimensions as the input.
pub fn entropy_map(img: &GrayImage, cfg: &EntropyConfig) -> Result<ImageGrid> {
    cfg.validate()?;
    if img.is_empty() {
        return Err(Error::invalid("cannot compute entropy of an empty image"));
    }
    let (w, h) = (img.width(), img.height());
    let r = cfg.radius;
    let half = disk_half_widths(r);
    let bin_of: Vec<usize> = (0..256usize).map(|v| v * cfg.bins / 256).collect();
    let disk_area: usize = half.iter().map(|hw| 2 * hw + 1).sum();
    let log2_table: Vec<f64> = (0..=cfg.bins.min(disk_area))
        .map(|n| if n == 0 { 0.0 } else { (n as f64).log2() })
        .collect();
    let clogc: Vec<f64> = (0..=disk_area + 1)
        .map(|c| if c == 0 { 0.0 } else { c as f64 * (c as f64).log2() })
        .collect();
    let pixels = img.pixels();

    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row_out)| {
        let mut hist = Histogram::new(cfg.bins, &clogc);
        let rows: Vec<(&[u8], isize)> = half
            .iter()
            .enumerate()
            .filter_map(|(i, &hw)| {
                let yy = y as isize + i as isize - r as isize;
                (0..h as isize)
                    .contains(&yy)
                    .then(|| (&pixels[yy as usize * w..(yy as usize + 1) * w], hw as isize))
            })
            .collect();
        for &(row, hw) in &rows {
            for xx in 0..=hw.min(w as isize - 1) {
                hist.add(bin_of[row[xx as usize] as usize]);
            }
        }
        for (x, out) in row_out.iter_mut().enumerate() {
            *out = match cfg.mode {
                EntropyMode::FilledBins => log2_table[hist.filled],
                EntropyMode::Shannon => hist.shannon(),
            };
            if x + 1 == w {
                break;
            }
            for &(row, hw) in &rows {
                let leaving = x as isize - hw;
                if leaving >= 0 {
                    hist.remove(bin_of[row[leaving as usize] as usize]);
                }
                let entering = x as isize + 1 + hw;
                if entering < w as isize {
                    hist.add(bin_of[row[entering as usize] as usize]);
                }
            }
        }
    });
    ImageGrid::new(w, h, out)
}

/// Masked, normalized entropy score:
/// `ES = Σ e·s / (W·H·log2(bins))`, in `[0, 1]`.
pub fn entropy_score(emap: &ImageGrid, smap: &ImageGrid, bins: usize) -> Result<f64> {
    if bins < 2 {
        return Err(Error::invalid("entropy bins must be >= 2"));
    }
    if !smap.is_binary() {
        return Err(Error::invalid("staticity map must be binary"));
    }
    let total = emap.masked_sum(smap)?;
    let denom = emap.len() as f64 * (bins as f64).log2();
    Ok((total / denom).clamp(0.0, 1.0))
}
