//! Frame descriptors and cosine-similarity matching.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::FrameRef;
use crate::grid::{upscale_grid_bilinear, GrayImage};
use crate::io::load_gray;

/// Unit-norm descriptor. An all-zero vector is the sentinel for frames with
/// no usable signal; it has similarity 0 to everything.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    pub frame_id: String,
    pub vector: Vec<f64>,
}

impl Descriptor {
    /// Normalizes `vector` to unit length; a zero vector stays the sentinel.
    pub fn new(frame_id: impl Into<String>, vector: Vec<f64>) -> Result<Self> {
        if vector.is_empty() {
            return Err(Error::invalid("empty descriptor"));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite descriptor component"));
        }
        let norm = vector.iter().map(|v| v * v).sum::<f64>().sqrt();
        let vector = if norm > 1e-12 {
            vector.into_iter().map(|v| v / norm).collect()
        } else {
            vec![0.0; vector.len()]
        };
        Ok(Self {
            frame_id: frame_id.into(),
            vector,
        })
    }

    pub fn is_sentinel(&self) -> bool {
        self.vector.iter().all(|&v| v == 0.0)
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }
}

/// Tiny-image descriptor: bilinear downsample to `side × side`, subtract the
/// mean, L2-normalize.
pub fn extract_tiny_descriptor(frame_id: &str, img: &GrayImage, side: usize) -> Result<Descriptor> {
    if img.is_empty() {
        return Err(Error::invalid("cannot describe an empty image"));
    }
    if side == 0 {
        return Err(Error::invalid("descriptor side must be >= 1"));
    }
    let small = upscale_grid_bilinear(&img.to_grid(), side, side)?.into_values();
    let mean = small.iter().sum::<f64>() / small.len() as f64;
    let centered: Vec<f64> = small.iter().map(|v| v - mean).collect();
    // quantization-level noise from resampling a flat image is not signal
    let norm = centered.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm < 1e-9 {
        return Ok(Descriptor {
            frame_id: frame_id.to_string(),
            vector: vec![0.0; side * side],
        });
    }
    Descriptor::new(frame_id, centered)
}

/// Loads each frame and extracts its tiny-image descriptor, in parallel.
pub fn describe_frames(frames: &[FrameRef], side: usize) -> Result<Vec<Descriptor>> {
    frames
        .par_iter()
        .map(|f| {
            let img = load_gray(&f.source_path)?;
            extract_tiny_descriptor(&f.frame_id, &img, side)
        })
        .collect()
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn cosine_similarity(a: &Descriptor, b: &Descriptor) -> Result<f64> {
    if a.is_sentinel() || b.is_sentinel() {
        return Ok(0.0);
    }
    if a.dim() != b.dim() {
        return Err(Error::invalid(format!(
            "descriptor dimension mismatch: `{}` has {}, `{}` has {}",
            a.frame_id,
            a.dim(),
            b.frame_id,
            b.dim()
        )));
    }
    Ok(dot(&a.vector, &b.vector).clamp(-1.0, 1.0))
}

/// `|Q| × |R|` cosine similarities, rows in query order.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub query_ids: Vec<String>,
    pub reference_ids: Vec<String>,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn new(query_ids: Vec<String>, reference_ids: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if values.len() != query_ids.len() * reference_ids.len() {
            return Err(Error::invalid(format!(
                "{}x{} similarity matrix needs {} values, got {}",
                query_ids.len(),
                reference_ids.len(),
                query_ids.len() * reference_ids.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite similarity"));
        }
        Ok(Self {
            query_ids,
            reference_ids,
            values,
        })
    }

    pub fn get(&self, q: usize, r: usize) -> f64 {
        self.values[q * self.reference_ids.len() + r]
    }

    pub fn row(&self, q: usize) -> &[f64] {
        let n = self.reference_ids.len();
        &self.values[q * n..(q + 1) * n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Index and similarity of the best reference for query `q`; ties go to
    /// the lowest reference index.
    pub fn best_match(&self, q: usize) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (r, &s) in self.row(q).iter().enumerate() {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((r, s));
            }
        }
        best
    }
}

fn check_dims(queries: &[Descriptor], references: &[Descriptor]) -> Result<()> {
    let mut dim: Option<(usize, &str)> = None;
    for d in queries.iter().chain(references).filter(|d| !d.is_sentinel()) {
        match dim {
            None => dim = Some((d.dim(), &d.frame_id)),
            Some((n, first)) if n != d.dim() => {
                return Err(Error::invalid(format!(
                    "descriptor dimension mismatch: `{first}` has {n}, `{}` has {}",
                    d.frame_id,
                    d.dim()
                )))
            }
            _ => {}
        }
    }
    Ok(())
}

pub fn similarity_matrix(queries: &[Descriptor], references: &[Descriptor]) -> Result<SimilarityMatrix> {
    check_dims(queries, references)?;
    let n = references.len();
    let mut values = vec![0.0; queries.len() * n];
    if n > 0 {
        values.par_chunks_mut(n).zip(queries.par_iter()).for_each(|(row, q)| {
            if q.is_sentinel() {
                return;
            }
            for (out, r) in row.iter_mut().zip(references) {
                if !r.is_sentinel() {
                    *out = dot(&q.vector, &r.vector).clamp(-1.0, 1.0);
                }
            }
        });
    }
    SimilarityMatrix::new(
        queries.iter().map(|d| d.frame_id.clone()).collect(),
        references.iter().map(|d| d.frame_id.clone()).collect(),
        values,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timing {
    pub references: usize,
    pub mean_secs: f64,
    pub std_secs: f64,
}

#[derive(Debug, Clone)]
pub struct BenchmarkReport {
    pub queries: usize,
    pub repeats: usize,
    pub full: Timing,
    pub filtered: Option<Timing>,
    /// Similarities from the last full pass.
    pub full_result: SimilarityMatrix,
}

fn time_passes(
    queries: &[Descriptor],
    references: &[Descriptor],
    repeats: usize,
) -> Result<(Timing, SimilarityMatrix)> {
    let mut samples = Vec::with_capacity(repeats);
    let mut last = None;
    for _ in 0..repeats {
        let start = Instant::now();
        let m = similarity_matrix(queries, references)?;
        samples.push(start.elapsed().as_secs_f64());
        last = Some(std::hint::black_box(m));
    }
    let mean = samples.iter().sum::<f64>() / repeats as f64;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / repeats as f64;
    Ok((
        Timing {
            references: references.len(),
            mean_secs: mean,
            std_secs: var.sqrt(),
        },
        last.expect("repeats >= 1"),
    ))
}

/// Wall-clock time of full query-vs-all-references passes, for the full
/// reference set and optionally a filtered one.
pub fn benchmark_matching(
    queries: &[Descriptor],
    references: &[Descriptor],
    filtered: Option<&[Descriptor]>,
    repeats: usize,
) -> Result<BenchmarkReport> {
    if repeats == 0 {
        return Err(Error::invalid("repeats must be >= 1"));
    }
    if queries.is_empty() || references.is_empty() {
        return Err(Error::invalid("benchmark needs non-empty query and reference sets"));
    }
    let (full, full_result) = time_passes(queries, references, repeats)?;
    let filtered = match filtered {
        Some([]) => return Err(Error::invalid("filtered reference set is empty")),
        Some(f) => Some(time_passes(queries, f, repeats)?.0),
        None => None,
    };
    Ok(BenchmarkReport {
        queries: queries.len(),
        repeats,
        full,
        filtered,
        full_result,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn textured(seed: u64) -> GrayImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GrayImage::from_fn(50, 40, |_, _| rng.gen())
    }

    #[test]
    fn self_similarity_is_one() {
        let d = extract_tiny_descriptor("a", &textured(1), 32).unwrap();
        assert!((cosine_similarity(&d, &d).unwrap() - 1.0).abs() < 1e-12);
        let norm: f64 = d.vector.iter().map(|v| v * v).sum();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_image_is_antipodal() {
        let img = textured(2);
        let inv = GrayImage::from_fn(50, 40, |x, y| 255 - img.get(x, y));
        let a = extract_tiny_descriptor("a", &img, 32).unwrap();
        let b = extract_tiny_descriptor("b", &inv, 32).unwrap();
        assert!((cosine_similarity(&a, &b).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_image_is_sentinel() {
        let u = extract_tiny_descriptor("u", &GrayImage::filled(30, 30, 77), 32).unwrap();
        assert!(u.is_sentinel());
        let d = extract_tiny_descriptor("a", &textured(3), 32).unwrap();
        assert_eq!(cosine_similarity(&u, &d).unwrap(), 0.0);
        assert_eq!(cosine_similarity(&u, &u).unwrap(), 0.0);
    }

    #[test]
    fn small_matrices() {
        let a = Descriptor::new("a", vec![1.0, 0.0]).unwrap();
        let b = Descriptor::new("b", vec![0.0, 3.0]).unwrap();
        let m = similarity_matrix(std::slice::from_ref(&a), std::slice::from_ref(&a)).unwrap();
        assert_eq!(m.values(), &[1.0]);
        let m = similarity_matrix(std::slice::from_ref(&a), std::slice::from_ref(&b)).unwrap();
        assert_eq!(m.values(), &[0.0]);
        let c = Descriptor::new("c", vec![1.0, 0.0, 0.0]).unwrap();
        assert!(similarity_matrix(&[a], &[c]).is_err());
    }

    #[test]
    fn matches_direct_dot_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mk = |rng: &mut ChaCha8Rng, id: usize| {
            Descriptor::new(format!("{id}"), (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
        };
        let qs: Vec<_> = (0..7).map(|i| mk(&mut rng, i)).collect();
        let rs: Vec<_> = (0..11).map(|i| mk(&mut rng, i)).collect();
        let m = similarity_matrix(&qs, &rs).unwrap();
        for (i, q) in qs.iter().enumerate() {
            for (j, r) in rs.iter().enumerate() {
                let nq: f64 = q.vector.iter().map(|v| v * v).sum::<f64>().sqrt();
                let nr: f64 = r.vector.iter().map(|v| v * v).sum::<f64>().sqrt();
                let mut d = 0.0;
                for k in 0..16 {
                    d += q.vector[k] * r.vector[k];
                }
                assert!((m.get(i, j) - d / (nq * nr)).abs() < 1e-12);
                assert_eq!(m.get(i, j), cosine_similarity(r, q).unwrap());
            }
        }
    }

    #[test]
    fn ties_resolve_to_lowest_index() {
        let m = SimilarityMatrix::new(
            vec!["q".into()],
            vec!["a".into(), "b".into(), "c".into()],
            vec![0.5, 0.9, 0.9],
        )
        .unwrap();
        assert_eq!(m.best_match(0), Some((1, 0.9)));
    }

    #[test]
    fn benchmark_rejects_empty_and_is_deterministic() {
        let d = Descriptor::new("a", vec![1.0, 2.0]).unwrap();
        assert!(benchmark_matching(&[], std::slice::from_ref(&d), None, 1).is_err());
        assert!(benchmark_matching(std::slice::from_ref(&d), std::slice::from_ref(&d), None, 0).is_err());
        let one = benchmark_matching(std::slice::from_ref(&d), std::slice::from_ref(&d), None, 1).unwrap();
        let five = benchmark_matching(
            std::slice::from_ref(&d),
            std::slice::from_ref(&d),
            Some(std::slice::from_ref(&d)),
            5,
        )
        .unwrap();
        assert_eq!(one.full_result, five.full_result);
        assert_eq!(five.filtered.unwrap().references, 1);
    }
}
