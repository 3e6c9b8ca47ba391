//! Ground truth, precision-recall curves and the framework analyses.
//!
//! Curves use single-best-match retrieval: each query's candidate is its most
//! similar reference, and a similarity threshold `t` sweeps over the distinct
//! candidate similarities. At threshold `t`:
//!
//! * retrieved and correct → TP
//! * retrieved and wrong → FP
//! * not retrieved → FN
//! * discarded by the framework → TN at every threshold
//!
//! Discarded queries never shrink the reference set; every reference stays a
//! match candidate.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{Criterion, Role, Thresholds};
use crate::matching::SimilarityMatrix;
use crate::selection::{rescore_verdicts, MemorableMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "lowercase")]
pub enum GroundTruthScheme {
    Exact,
    Window { k: usize },
    Explicit,
}

/// Query id → accepted reference ids.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub scheme: GroundTruthScheme,
    mapping: BTreeMap<String, BTreeSet<String>>,
}

impl GroundTruth {
    pub fn explicit(mapping: BTreeMap<String, BTreeSet<String>>) -> Result<Self> {
        if let Some((q, _)) = mapping.iter().find(|(_, refs)| refs.is_empty()) {
            return Err(Error::invalid(format!("ground truth for `{q}` is empty")));
        }
        Ok(Self {
            scheme: GroundTruthScheme::Explicit,
            mapping,
        })
    }

    /// Positional tolerance window: query `i` accepts references `i-k ..= i+k`.
    pub fn window(query_ids: &[String], reference_ids: &[String], k: usize) -> Result<Self> {
        let mut mapping = BTreeMap::new();
        for (i, q) in query_ids.iter().enumerate() {
            let lo = i.saturating_sub(k);
            let hi = (i + k).min(reference_ids.len().saturating_sub(1));
            let refs: BTreeSet<String> = if lo < reference_ids.len() {
                reference_ids[lo..=hi].iter().cloned().collect()
            } else {
                BTreeSet::new()
            };
            if refs.is_empty() {
                continue;
            }
            if mapping.insert(q.clone(), refs).is_some() {
                return Err(Error::invalid(format!("duplicate query id `{q}`")));
            }
        }
        Ok(Self {
            scheme: if k == 0 {
                GroundTruthScheme::Exact
            } else {
                GroundTruthScheme::Window { k }
            },
            mapping,
        })
    }

    pub fn references_for(&self, query_id: &str) -> Option<&BTreeSet<String>> {
        self.mapping.get(query_id)
    }

    pub fn mapping(&self) -> &BTreeMap<String, BTreeSet<String>> {
        &self.mapping
    }

    pub fn len(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }
}

/// Window ground truth over frames labelled `0..n`.
pub fn window_ground_truth(n_frames: usize, k: usize) -> GroundTruth {
    let ids: Vec<String> = (0..n_frames).map(|i| i.to_string()).collect();
    GroundTruth::window(&ids, &ids, k).expect("index ids are unique")
}

/// Trapezoidal area under `(recall, precision)` points:
/// `Σ (p_i + p_{i+1})/2 · (r_{i+1} − r_i)`.
pub fn auc(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::invalid("AUC needs at least two points"));
    }
    if points.iter().any(|(r, p)| !r.is_finite() || !p.is_finite()) {
        return Err(Error::invalid("non-finite curve point"));
    }
    if let Some(i) = points.windows(2).position(|w| w[1].0 < w[0].0) {
        return Err(Error::invalid(format!("recall decreases after point {i}")));
    }
    Ok(points
        .windows(2)
        .map(|w| (w[0].1 + w[1].1) / 2.0 * (w[1].0 - w[0].0))
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub threshold: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    /// `(recall, precision)`, starting with a recall-0 anchor that carries
    /// the precision of the strictest operating point.
    pub points: Vec<(f64, f64)>,
    /// One entry per distinct candidate similarity, strictest first.
    pub operating: Vec<OperatingPoint>,
    pub auc: f64,
    pub reference_count: usize,
    pub active_queries: usize,
    pub discarded_queries: usize,
}

/// Candidate match of one query.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryMatch {
    pub query_id: String,
    pub reference_id: String,
    pub similarity: f64,
    pub correct: bool,
    pub discarded: bool,
}

/// Best match per query with correctness against `gt` and, when `verdicts`
/// is given, whether the framework discarded the query.
pub fn query_matches(
    sim: &SimilarityMatrix,
    gt: &GroundTruth,
    verdicts: Option<&MemorableMap>,
) -> Result<Vec<QueryMatch>> {
    if sim.reference_ids.is_empty() {
        return Err(Error::invalid("similarity matrix has no references"));
    }
    sim.query_ids
        .iter()
        .enumerate()
        .map(|(q, qid)| {
            let truth = gt
                .references_for(qid)
                .ok_or_else(|| Error::invalid(format!("query `{qid}` missing from ground truth")))?;
            let discarded = match verdicts {
                None => false,
                Some(map) => {
                    !map.entry(Role::Query, qid)
                        .ok_or_else(|| Error::invalid(format!("query `{qid}` missing from memorable map")))?
                        .selected
                }
            };
            let (r, s) = sim.best_match(q).expect("non-empty reference set");
            let rid = &sim.reference_ids[r];
            Ok(QueryMatch {
                query_id: qid.clone(),
                reference_id: rid.clone(),
                similarity: s,
                correct: truth.contains(rid),
                discarded,
            })
        })
        .collect()
}

/// Precision-recall curve from query matches.
pub fn pr_curve_from_matches(matches: &[QueryMatch], reference_count: usize) -> Result<PrCurve> {
    let discarded = matches.iter().filter(|m| m.discarded).count();
    let mut active: Vec<&QueryMatch> = matches.iter().filter(|m| !m.discarded).collect();
    if active.is_empty() {
        return Err(Error::invalid("every query was discarded; the curve is undefined"));
    }
    active.sort_by(|a, b| b.similarity.total_cmp(&a.similarity));

    let n = active.len();
    let mut operating = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < n {
        let t = active[i].similarity;
        while i < n && active[i].similarity == t {
            if active[i].correct {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let fn_ = n - tp - fp;
        let precision = tp as f64 / (tp + fp) as f64;
        let recall = if tp + fn_ == 0 {
            0.0
        } else {
            tp as f64 / (tp + fn_) as f64
        };
        operating.push(OperatingPoint {
            threshold: t,
            tp,
            fp,
            fn_,
            tn: discarded,
            precision,
            recall,
        });
    }
    let mut points = Vec::with_capacity(operating.len() + 1);
    points.push((0.0, operating[0].precision));
    points.extend(operating.iter().map(|o| (o.recall, o.precision)));
    let area = auc(&points)?;
    Ok(PrCurve {
        points,
        operating,
        auc: area,
        reference_count,
        active_queries: n,
        discarded_queries: discarded,
    })
}

pub fn pr_curve(sim: &SimilarityMatrix, gt: &GroundTruth, verdicts: Option<&MemorableMap>) -> Result<PrCurve> {
    let matches = query_matches(sim, gt, verdicts)?;
    pr_curve_from_matches(&matches, sim.reference_ids.len())
}

/// Queries whose best match is not a true positive.
pub fn mismatched_queries(sim: &SimilarityMatrix, gt: &GroundTruth) -> Result<BTreeSet<String>> {
    Ok(query_matches(sim, gt, None)?
        .into_iter()
        .filter(|m| !m.correct)
        .map(|m| m.query_id)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionShare {
    pub criterion: Criterion,
    pub count: usize,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContributionReport {
    pub mismatched: usize,
    /// Mismatched frames that failed at least one criterion.
    pub mismatched_and_discarded: usize,
    pub per_criterion: Vec<CriterionShare>,
    /// Exact failing-criteria combination → count, e.g. `memorability+entropy`.
    pub overlaps: BTreeMap<String, usize>,
}

fn combination_label(set: &BTreeSet<Criterion>) -> String {
    set.iter().map(|c| c.as_str()).collect::<Vec<_>>().join("+")
}

/// Attribution of mismatched-and-discarded queries to the criteria that
/// discarded them.
pub fn contribution_analysis(mismatched: &BTreeSet<String>, map: &MemorableMap) -> Result<ContributionReport> {
    let mut counts: BTreeMap<Criterion, usize> = Criterion::ALL.iter().map(|&c| (c, 0)).collect();
    let mut overlaps = BTreeMap::new();
    let mut union = 0;
    for id in mismatched {
        let entry = map
            .entry(Role::Query, id)
            .ok_or_else(|| Error::invalid(format!("unknown frame `{id}`")))?;
        if entry.failing_criteria.is_empty() {
            continue;
        }
        union += 1;
        for c in &entry.failing_criteria {
            *counts.get_mut(c).expect("all criteria present") += 1;
        }
        *overlaps.entry(combination_label(&entry.failing_criteria)).or_insert(0) += 1;
    }
    let per_criterion = counts
        .into_iter()
        .map(|(criterion, count)| CriterionShare {
            criterion,
            count,
            percent: if union == 0 {
                0.0
            } else {
                100.0 * count as f64 / union as f64
            },
        })
        .collect();
    Ok(ContributionReport {
        mismatched: mismatched.len(),
        mismatched_and_discarded: union,
        per_criterion,
        overlaps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub threshold: f64,
    pub selected_count: usize,
    pub auc: Option<f64>,
}

/// Threshold grid `0, step, 2·step, …, 1` (the last value is exactly 1 when
/// `1/step` is whole).
pub fn sweep_thresholds(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::invalid(format!("sweep step {step} outside (0, 1]")));
    }
    let n = (1.0 / step + 1e-9).floor() as usize;
    Ok((0..=n)
        .map(|i| ((i as f64 * step) * 1e12).round() / 1e12)
        .map(|t| t.min(1.0))
        .collect())
}

/// Sweeps one criterion over `[0, 1]` with the others at zero, recording
/// the selected query count and the AUC under true-negative accounting.
/// Rows with no selected query carry no AUC.
pub fn threshold_sweep(
    map: &MemorableMap,
    criterion: Criterion,
    step: f64,
    sim: &SimilarityMatrix,
    gt: &GroundTruth,
) -> Result<Vec<SweepRow>> {
    let thresholds = sweep_thresholds(step)?;
    let base = query_matches(sim, gt, None)?;
    thresholds
        .par_iter()
        .map(|&t| {
            let rescored = rescore_verdicts(map, &Thresholds::single(criterion, t)?);
            let matches = base
                .iter()
                .map(|m| {
                    let e = rescored
                        .entry(Role::Query, &m.query_id)
                        .ok_or_else(|| Error::invalid(format!("query `{}` missing from memorable map", m.query_id)))?;
                    Ok(QueryMatch {
                        discarded: !e.selected,
                        ..m.clone()
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let selected_count = rescored.count_selected(Some(Role::Query));
            let auc = if selected_count == 0 {
                None
            } else {
                Some(pr_curve_from_matches(&matches, sim.reference_ids.len())?.auc)
            };
            Ok(SweepRow {
                threshold: t,
                selected_count,
                auc,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MapSizeReport {
    pub total: usize,
    pub selected: usize,
    pub reduction_percent: f64,
}

/// Reference-map size before and after selection.
pub fn map_size_reduction(map: &MemorableMap, role: Role) -> MapSizeReport {
    let total = map.entries.iter().filter(|e| e.role == role).count();
    let selected = map.count_selected(Some(role));
    MapSizeReport {
        total,
        selected,
        reduction_percent: if total == 0 {
            0.0
        } else {
            100.0 * (total - selected) as f64 / total as f64
        },
    }
}
