use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use memmaps_core::entropy::EntropyConfig;
use memmaps_core::evaluation::{
    contribution_analysis, map_size_reduction, mismatched_queries, pr_curve, threshold_sweep, PrCurve,
};
use memmaps_core::io::{load_dataset, read_descriptors, read_scores, write_atomic, write_reports, Dataset, Reports};
use memmaps_core::matching::{benchmark_matching, describe_frames, similarity_matrix, Descriptor, SimilarityMatrix};
use memmaps_core::memorability::{
    CommandScorer, ConstantScorer, CropScorer, SidecarScorer, TilingConfig, VarianceScorer,
};
use memmaps_core::selection::{build_memorable_map, ErrorPolicy};
use memmaps_core::staticity::StaticityConfig;
use memmaps_core::synth::{generate, SyntheticSpec};
use memmaps_core::{Criterion, MemorableMap, PipelineConfig, Role, Thresholds};
use serde::Serialize;

use crate::args::{
    BenchArgs, CriterionArg, DescriptorArgs, DescriptorSource, EvalArgs, FixtureArgs, Preset, ScoreArgs, ScorerKind,
    SelectionArgs, SweepArgs,
};

/// A bad flag value or flag combination (exit code 2).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

struct Selection {
    thresholds: Thresholds,
    pipeline: PipelineConfig,
    scorer: Box<dyn CropScorer>,
    policy: ErrorPolicy,
}

fn resolve_selection(args: &SelectionArgs) -> Result<Selection> {
    let base = match args.preset {
        Preset::Default => Thresholds::DEFAULT,
        Preset::Stlucia => Thresholds::STLUCIA,
    };
    let (mt, st, et) = (
        args.mt.unwrap_or(base.mt),
        args.st.unwrap_or(base.st),
        args.et.unwrap_or(base.et),
    );
    for (name, v) in [("mt", mt), ("st", st), ("et", et)] {
        if !(0.0..=1.0).contains(&v) && !v.is_nan() {
            log::warn!("--{name} {v} is outside [0,1] and will be clamped");
        }
    }
    let thresholds = Thresholds::new(mt, st, et).map_err(|e| config_err(e.to_string()))?;
    let mut staticity = StaticityConfig {
        confidence_threshold: args.confidence,
        min_area_fraction: args.min_area,
        ..StaticityConfig::default()
    };
    if let Some(classes) = &args.dynamic_classes {
        staticity.dynamic_classes = classes
            .iter()
            .map(|c| c.trim().to_string())
            .filter(|c| !c.is_empty())
            .collect();
    }
    let pipeline = PipelineConfig {
        tiling: TilingConfig {
            crop_size: args.crop_size,
            grid: args.grid,
        },
        entropy: EntropyConfig {
            radius: args.radius,
            bins: args.bins,
            mode: args.entropy_mode.into(),
        },
        staticity,
    };
    pipeline.validate().map_err(|e| config_err(e.to_string()))?;
    let scorer: Box<dyn CropScorer> = match args.scorer {
        ScorerKind::Sidecar => Box::new(SidecarScorer::new()),
        ScorerKind::Variance => Box::new(VarianceScorer),
        ScorerKind::Constant => {
            if !(0.0..=1.0).contains(&args.scorer_constant) {
                return Err(config_err(format!(
                    "--scorer-constant {} outside [0,1]",
                    args.scorer_constant
                )));
            }
            Box::new(ConstantScorer(args.scorer_constant))
        }
        ScorerKind::Command => {
            let line = args
                .scorer_command
                .as_deref()
                .ok_or_else(|| config_err("--scorer command needs --scorer-command"))?;
            Box::new(CommandScorer::from_command_line(line).map_err(|e| config_err(e.to_string()))?)
        }
    };
    Ok(Selection {
        thresholds,
        pipeline,
        scorer,
        policy: args.on_error.into(),
    })
}

#[derive(Serialize)]
struct ScorerSnapshot<'a> {
    kind: ScorerKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    command: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    constant: Option<f64>,
}

#[derive(Serialize)]
struct DescriptorSnapshot<'a> {
    source: DescriptorSource,
    #[serde(skip_serializing_if = "Option::is_none")]
    side: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    query: Option<&'a Path>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reference: Option<&'a Path>,
}

/// Fully resolved configuration, embedded in every output manifest.
#[derive(Serialize)]
struct Snapshot<'a> {
    command: &'static str,
    manifest: &'a Path,
    preset: Preset,
    thresholds: Thresholds,
    pipeline: &'a PipelineConfig,
    scorer: ScorerSnapshot<'a>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scores: Option<&'a Path>,
    on_error: ErrorPolicy,
    #[serde(skip_serializing_if = "Option::is_none")]
    descriptors: Option<DescriptorSnapshot<'a>>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    extra: BTreeMap<&'static str, serde_json::Value>,
    workers: usize,
}

impl<'a> Snapshot<'a> {
    fn new(command: &'static str, manifest: &'a Path, args: &'a SelectionArgs, sel: &'a Selection) -> Self {
        Self {
            command,
            manifest,
            preset: args.preset,
            thresholds: sel.thresholds,
            pipeline: &sel.pipeline,
            scorer: ScorerSnapshot {
                kind: args.scorer,
                command: args
                    .scorer_command
                    .as_deref()
                    .filter(|_| args.scorer == ScorerKind::Command),
                constant: (args.scorer == ScorerKind::Constant).then_some(args.scorer_constant),
            },
            scores: args.scores.as_deref(),
            on_error: sel.policy,
            descriptors: None,
            extra: BTreeMap::new(),
            workers: rayon::current_num_threads(),
        }
    }

    fn with_descriptors(mut self, d: &'a DescriptorArgs) -> Self {
        let file = d.descriptors == DescriptorSource::File;
        self.descriptors = Some(DescriptorSnapshot {
            source: d.descriptors,
            side: (!file).then_some(d.descriptor_side),
            query: d.query_descriptors.as_deref().filter(|_| file),
            reference: d.reference_descriptors.as_deref().filter(|_| file),
        });
        self
    }

    fn value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("snapshot serializes")
    }
}

fn open_dataset(manifest: &Path) -> Result<Dataset> {
    let ds = load_dataset(manifest)?;
    log::info!(
        "dataset `{}`: {} queries, {} references",
        ds.manifest.dataset_id,
        ds.queries.len(),
        ds.references.len()
    );
    Ok(ds)
}

fn memorable_map(ds: &Dataset, args: &SelectionArgs, sel: &Selection) -> Result<MemorableMap> {
    if let Some(path) = &args.scores {
        log::info!("reading scores from {}", path.display());
        return Ok(read_scores(path, &ds.manifest.dataset_id, sel.thresholds)?);
    }
    let frames = ds.all_frames();
    log::info!("scoring {} frames with the {} scorer", frames.len(), sel.scorer.name());
    let map = build_memorable_map(
        &ds.manifest.dataset_id,
        &frames,
        &sel.thresholds,
        &sel.pipeline,
        sel.scorer.as_ref(),
        sel.policy,
    )?;
    log::info!(
        "selected {}/{} frames ({} skipped)",
        map.count_selected(None),
        map.entries.len(),
        map.skipped.len()
    );
    Ok(map)
}

fn ordered(mut descs: Vec<Descriptor>, frames: &[memmaps_core::FrameRef], path: &Path) -> Result<Vec<Descriptor>> {
    let mut by_id: BTreeMap<String, Descriptor> = descs.drain(..).map(|d| (d.frame_id.clone(), d)).collect();
    frames
        .iter()
        .map(|f| {
            by_id.remove(&f.frame_id).ok_or_else(|| {
                memmaps_core::Error::Load(format!(
                    "{} has no descriptor for frame `{}`",
                    path.display(),
                    f.frame_id
                ))
                .into()
            })
        })
        .collect()
}

fn descriptors(ds: &Dataset, args: &DescriptorArgs) -> Result<(Vec<Descriptor>, Vec<Descriptor>)> {
    match args.descriptors {
        DescriptorSource::Tiny => {
            if args.descriptor_side == 0 {
                return Err(config_err("--descriptor-side must be >= 1"));
            }
            log::info!("extracting {0}x{0} tiny-image descriptors", args.descriptor_side);
            Ok((
                describe_frames(&ds.queries, args.descriptor_side)?,
                describe_frames(&ds.references, args.descriptor_side)?,
            ))
        }
        DescriptorSource::File => {
            let (q, r) = match (&args.query_descriptors, &args.reference_descriptors) {
                (Some(q), Some(r)) => (q, r),
                _ => {
                    return Err(config_err(
                        "--descriptors file needs --query-descriptors and --reference-descriptors",
                    ))
                }
            };
            Ok((
                ordered(read_descriptors(q)?, &ds.queries, q)?,
                ordered(read_descriptors(r)?, &ds.references, r)?,
            ))
        }
    }
}

struct Evaluation {
    ds: Dataset,
    map: MemorableMap,
    queries: Vec<Descriptor>,
    references: Vec<Descriptor>,
    sim: SimilarityMatrix,
    gt: memmaps_core::evaluation::GroundTruth,
}

fn evaluation(args: &EvalArgs, sel: &Selection) -> Result<Evaluation> {
    let ds = open_dataset(&args.dataset.manifest)?;
    let gt = ds.ground_truth().context("ground truth")?;
    let map = memorable_map(&ds, &args.selection, sel)?;
    let (queries, references) = descriptors(&ds, &args.descriptors)?;
    log::info!(
        "matching {} queries against {} references",
        queries.len(),
        references.len()
    );
    let sim = similarity_matrix(&queries, &references)?;
    Ok(Evaluation {
        ds,
        map,
        queries,
        references,
        sim,
        gt,
    })
}

fn finish(out: &Path, written: Vec<PathBuf>) {
    log::info!("wrote {} files to {}", written.len(), out.display());
}

pub fn score(args: &ScoreArgs) -> Result<()> {
    let sel = resolve_selection(&args.selection)?;
    let ds = open_dataset(&args.dataset.manifest)?;
    let map = memorable_map(&ds, &args.selection, &sel)?;
    let snapshot = Snapshot::new("score", &args.dataset.manifest, &args.selection, &sel);
    let written = write_reports(
        &args.dataset.out,
        &Reports {
            map: Some(&map),
            config: Some(snapshot.value()),
            ..Reports::default()
        },
    )?;
    println!(
        "selected {}/{} queries, {}/{} references",
        map.count_selected(Some(Role::Query)),
        map.entries.iter().filter(|e| e.role == Role::Query).count(),
        map.count_selected(Some(Role::Reference)),
        map.entries.iter().filter(|e| e.role == Role::Reference).count(),
    );
    finish(&args.dataset.out, written);
    Ok(())
}

fn render_auc(curves: &[(&str, &PrCurve)]) -> String {
    let mut out = String::from("curve,auc,reference_count,active_queries,discarded_queries\n");
    for (label, c) in curves {
        out.push_str(&format!(
            "{label},{},{},{},{}\n",
            c.auc, c.reference_count, c.active_queries, c.discarded_queries
        ));
    }
    out
}

pub fn evaluate(args: &EvalArgs) -> Result<()> {
    let sel = resolve_selection(&args.selection)?;
    let ev = evaluation(args, &sel)?;
    let baseline = pr_curve(&ev.sim, &ev.gt, None)?;
    let framework = pr_curve(&ev.sim, &ev.gt, Some(&ev.map))?;
    let snapshot =
        Snapshot::new("evaluate", &args.dataset.manifest, &args.selection, &sel).with_descriptors(&args.descriptors);
    let out = &args.dataset.out;
    let mut written = write_reports(
        out,
        &Reports {
            map: Some(&ev.map),
            config: Some(snapshot.value()),
            curves: vec![(
                "pr".into(),
                vec![("baseline".into(), &baseline), ("framework".into(), &framework)],
            )],
            ..Reports::default()
        },
    )?;
    let table = render_auc(&[("baseline", &baseline), ("framework", &framework)]);
    let auc_path = out.join("auc.csv");
    write_atomic(&auc_path, table.as_bytes())?;
    written.push(auc_path);
    println!(
        "{:<10} {:>8} {:>10} {:>8} {:>9}",
        "curve", "auc", "references", "active", "discarded"
    );
    for (label, c) in [("baseline", &baseline), ("framework", &framework)] {
        println!(
            "{label:<10} {:>8.4} {:>10} {:>8} {:>9}",
            c.auc, c.reference_count, c.active_queries, c.discarded_queries
        );
    }
    finish(out, written);
    Ok(())
}

pub fn sweep(args: &SweepArgs) -> Result<()> {
    let sel = resolve_selection(&args.eval.selection)?;
    if !(args.step > 0.0 && args.step <= 1.0) {
        return Err(config_err(format!("--step {} must be in (0, 1]", args.step)));
    }
    let criteria: Vec<Criterion> = match args.criterion {
        CriterionArg::Mt => vec![Criterion::Memorability],
        CriterionArg::St => vec![Criterion::Staticity],
        CriterionArg::Et => vec![Criterion::Entropy],
        CriterionArg::All => Criterion::ALL.to_vec(),
    };
    let ev = evaluation(&args.eval, &sel)?;
    let mut sweeps = Vec::new();
    for c in criteria {
        log::info!("sweeping {} with step {}", c.threshold_name(), args.step);
        sweeps.push((c, threshold_sweep(&ev.map, c, args.step, &ev.sim, &ev.gt)?));
    }
    let mut snapshot = Snapshot::new("sweep", &args.eval.dataset.manifest, &args.eval.selection, &sel)
        .with_descriptors(&args.eval.descriptors);
    snapshot.extra.insert("step", args.step.into());
    snapshot.extra.insert(
        "criteria",
        sweeps
            .iter()
            .map(|(c, _)| c.threshold_name())
            .collect::<Vec<_>>()
            .into(),
    );
    println!("criterion,threshold,selected_count,auc");
    for (c, rows) in &sweeps {
        for r in rows {
            let auc = r.auc.map(|a| a.to_string()).unwrap_or_default();
            println!("{},{},{},{auc}", c.threshold_name(), r.threshold, r.selected_count);
        }
    }
    let written = write_reports(
        &args.eval.dataset.out,
        &Reports {
            map: Some(&ev.map),
            config: Some(snapshot.value()),
            sweeps,
            ..Reports::default()
        },
    )?;
    finish(&args.eval.dataset.out, written);
    Ok(())
}

pub fn bench(args: &BenchArgs) -> Result<()> {
    let sel = resolve_selection(&args.eval.selection)?;
    if args.repeats == 0 {
        return Err(config_err("--repeats must be >= 1"));
    }
    let ev = evaluation(&args.eval, &sel)?;
    let kept: Vec<Descriptor> = ev
        .ds
        .references
        .iter()
        .zip(&ev.references)
        .filter(|(f, _)| ev.map.entry(Role::Reference, &f.frame_id).is_some_and(|e| e.selected))
        .map(|(_, d)| d.clone())
        .collect();
    let size = map_size_reduction(&ev.map, Role::Reference);
    let filtered = (!kept.is_empty()).then_some(kept.as_slice());
    if filtered.is_none() {
        log::warn!("no reference frame selected; timing the full map only");
    }
    log::info!("timing {} passes per reference set", args.repeats);
    let report = benchmark_matching(&ev.queries, &ev.references, filtered, args.repeats)?;

    let cell = |t: Option<&memmaps_core::matching::Timing>| match t {
        Some(t) => format!("{:.6} ± {:.6}", t.mean_secs, t.std_secs),
        None => "n/a".into(),
    };
    let refs = |t: Option<&memmaps_core::matching::Timing>| t.map_or("0".into(), |t| t.references.to_string());
    println!(
        "Matching Time Reduction ({} queries, {} repeats, {} workers)",
        report.queries,
        report.repeats,
        rayon::current_num_threads()
    );
    println!(
        "{:<20} | {:<26} | {:<26}",
        "Framework", "Without Memorable Maps", "With Memorable Maps"
    );
    println!(
        "{:<20} | {:<26} | {:<26}",
        format!("{} (sec)", ev.ds.manifest.dataset_id),
        cell(Some(&report.full)),
        cell(report.filtered.as_ref())
    );
    println!(
        "{:<20} | {:<26} | {:<26}",
        "Reference frames",
        report.full.references,
        refs(report.filtered.as_ref())
    );
    println!(
        "Map size reduction: {:.1}% ({} -> {} reference frames)",
        size.reduction_percent, size.total, size.selected
    );

    let mut csv = String::from("map,references,mean_secs,std_secs\n");
    csv.push_str(&format!(
        "full,{},{},{}\n",
        report.full.references, report.full.mean_secs, report.full.std_secs
    ));
    if let Some(f) = &report.filtered {
        csv.push_str(&format!("memorable,{},{},{}\n", f.references, f.mean_secs, f.std_secs));
    }
    let mut snapshot = Snapshot::new("bench", &args.eval.dataset.manifest, &args.eval.selection, &sel)
        .with_descriptors(&args.eval.descriptors);
    snapshot.extra.insert("repeats", args.repeats.into());
    let out = &args.eval.dataset.out;
    let mut written = write_reports(
        out,
        &Reports {
            map: Some(&ev.map),
            config: Some(snapshot.value()),
            ..Reports::default()
        },
    )?;
    let path = out.join("bench.csv");
    write_atomic(&path, csv.as_bytes())?;
    written.push(path);
    finish(out, written);
    Ok(())
}

pub fn contribution(args: &EvalArgs) -> Result<()> {
    let sel = resolve_selection(&args.selection)?;
    let ev = evaluation(args, &sel)?;
    let mismatched = mismatched_queries(&ev.sim, &ev.gt)?;
    let report = contribution_analysis(&mismatched, &ev.map)?;
    println!(
        "{} mismatched queries, {} discarded by the framework",
        report.mismatched, report.mismatched_and_discarded
    );
    for s in &report.per_criterion {
        println!("{:<13} {:>4} {:>6.1}%", s.criterion.as_str(), s.count, s.percent);
    }
    let snapshot = Snapshot::new("contribution", &args.dataset.manifest, &args.selection, &sel)
        .with_descriptors(&args.descriptors);
    let written = write_reports(
        &args.dataset.out,
        &Reports {
            map: Some(&ev.map),
            config: Some(snapshot.value()),
            contribution: Some(&report),
            ..Reports::default()
        },
    )?;
    finish(&args.dataset.out, written);
    Ok(())
}

pub fn fixture(args: &FixtureArgs) -> Result<()> {
    let spec = SyntheticSpec {
        frames: args.frames,
        width: args.width,
        height: args.height,
        seed: args.seed,
        dataset_id: format!("synthetic-{}", args.frames),
    };
    if spec.frames < 8 || spec.width < 16 || spec.height < 16 {
        return Err(config_err("fixture needs --frames >= 8 and frames of at least 16x16"));
    }
    let ds = generate(&args.out, &spec)?;
    println!("{}", ds.manifest_path.display());
    log::info!(
        "wrote {} + {} frames under {}",
        spec.frames,
        spec.frames,
        args.out.display()
    );
    Ok(())
}
