//! Dataset loading, sidecars and every persisted file format.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{ContributionReport, GroundTruth, PrCurve, SweepRow};
use crate::frame::{Criterion, FrameRef, FrameScores, Role, Thresholds};
use crate::grid::GrayImage;
use crate::matching::Descriptor;
use crate::selection::MemorableMap;
use crate::staticity::Detection;

pub const DETECTIONS_SUFFIX: &str = ".detections.json";
const IMAGE_EXTENSIONS: [&str; 4] = ["png", "jpg", "jpeg", "pgm"];

/// Decodes an image file to grayscale.
pub fn load_gray(path: &Path) -> Result<GrayImage> {
    let img = image::open(path).map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(GrayImage::from_dynamic(&img))
}

pub fn save_png(img: &GrayImage, path: &Path) -> Result<()> {
    let buf = image::GrayImage::from_raw(img.width() as u32, img.height() as u32, img.pixels().to_vec())
        .ok_or_else(|| Error::invalid("image buffer size mismatch"))?;
    let mut bytes = Vec::new();
    buf.write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)
        .map_err(|e| Error::invalid(format!("png encoding failed: {e}")))?;
    write_atomic(path, &bytes)
}

/// Reads `<frame_path>.detections.json`; `None` when the file does not exist.
pub fn load_detections(frame: &FrameRef) -> Result<Option<Vec<Detection>>> {
    let path = frame.sidecar_path(DETECTIONS_SUFFIX);
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(Error::io(path, e)),
    };
    serde_json::from_str(&text).map(Some).map_err(|e| Error::Decode {
        path,
        message: e.to_string(),
    })
}

/// Writes `bytes` to a temporary file next to `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthSpec {
    pub scheme: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub dataset_id: String,
    pub query_dir: PathBuf,
    pub reference_dir: PathBuf,
    pub ground_truth: GroundTruthSpec,
}

/// A loaded dataset: manifest plus frames in lexicographic filename order.
/// Relative paths in the manifest are resolved against its directory.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub root: PathBuf,
    pub queries: Vec<FrameRef>,
    pub references: Vec<FrameRef>,
}

impl Dataset {
    pub fn all_frames(&self) -> Vec<FrameRef> {
        self.queries.iter().chain(&self.references).cloned().collect()
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    pub fn ground_truth(&self) -> Result<GroundTruth> {
        let q: Vec<String> = self.queries.iter().map(|f| f.frame_id.clone()).collect();
        let r: Vec<String> = self.references.iter().map(|f| f.frame_id.clone()).collect();
        let spec = &self.manifest.ground_truth;
        match spec.scheme.as_str() {
            "exact" => GroundTruth::window(&q, &r, 0),
            "window" => {
                let k = spec
                    .k
                    .ok_or_else(|| Error::Load("window ground truth needs `k`".into()))?;
                GroundTruth::window(&q, &r, k)
            }
            "file" => {
                let p = spec
                    .path
                    .as_ref()
                    .ok_or_else(|| Error::Load("file ground truth needs `path`".into()))?;
                read_ground_truth(&self.resolve(p))
            }
            other => Err(Error::Load(format!("unknown ground-truth scheme `{other}`"))),
        }
    }
}

fn list_frames(dir: &Path, role: Role) -> Result<Vec<FrameRef>> {
    let entries =
        std::fs::read_dir(dir).map_err(|e| Error::Load(format!("{} directory {}: {e}", role, dir.display())))?;
    let mut files: Vec<(String, PathBuf)> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        let is_image = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        if is_image && path.is_file() {
            files.push((entry.file_name().to_string_lossy().into_owned(), path));
        }
    }
    if files.is_empty() {
        return Err(Error::Load(format!(
            "{} directory {} has no frames",
            role,
            dir.display()
        )));
    }
    files.sort();
    let mut seen = BTreeSet::new();
    files
        .into_iter()
        .map(|(_, path)| {
            let id = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            if !seen.insert(id.clone()) {
                return Err(Error::Load(format!(
                    "duplicate {role} frame id `{id}` in {}",
                    dir.display()
                )));
            }
            Ok(FrameRef::new(id, role, path))
        })
        .collect()
}

pub fn load_dataset(manifest_path: &Path) -> Result<Dataset> {
    let text =
        std::fs::read_to_string(manifest_path).map_err(|e| Error::Load(format!("{}: {e}", manifest_path.display())))?;
    let manifest: DatasetManifest =
        serde_json::from_str(&text).map_err(|e| Error::Load(format!("{}: {e}", manifest_path.display())))?;
    let root = manifest_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let mut ds = Dataset {
        manifest,
        root,
        queries: Vec::new(),
        references: Vec::new(),
    };
    ds.queries = list_frames(&ds.resolve(&ds.manifest.query_dir), Role::Query)?;
    ds.references = list_frames(&ds.resolve(&ds.manifest.reference_dir), Role::Reference)?;
    Ok(ds)
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// `query_id,reference_ids` with references separated by `;`. A header row
/// is optional.
pub fn read_ground_truth(path: &Path) -> Result<GroundTruth> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let mut mapping = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        if rec.len() != 2 {
            return Err(Error::Load(format!(
                "{} line {}: expected 2 fields",
                path.display(),
                i + 1
            )));
        }
        if i == 0 && &rec[0] == "query_id" {
            continue;
        }
        let refs: BTreeSet<String> = rec[1]
            .split(';')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect();
        if mapping.insert(rec[0].to_string(), refs).is_some() {
            return Err(Error::Load(format!(
                "{}: query `{}` listed twice",
                path.display(),
                &rec[0]
            )));
        }
    }
    GroundTruth::explicit(mapping)
}

pub fn render_ground_truth(gt: &GroundTruth) -> String {
    let mut out = String::from("query_id,reference_ids\n");
    for (q, refs) in gt.mapping() {
        let joined = refs.iter().map(String::as_str).collect::<Vec<_>>().join(";");
        let _ = writeln!(out, "{q},{joined}");
    }
    out
}

/// Descriptor rows: `frame_id,v0,v1,…` with no header; all rows equal length.
pub fn read_descriptors(path: &Path) -> Result<Vec<Descriptor>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        if rec.len() < 2 {
            return Err(Error::Load(format!("{} line {}: no components", path.display(), i + 1)));
        }
        let vector = rec
            .iter()
            .skip(1)
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Load(format!("{} line {}: {e}", path.display(), i + 1)))?;
        out.push(Descriptor::new(&rec[0], vector)?);
    }
    Ok(out)
}

pub fn render_descriptors(descs: &[Descriptor]) -> String {
    let mut out = String::new();
    for d in descs {
        out.push_str(&d.frame_id);
        for v in &d.vector {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

fn failing_label(set: &BTreeSet<Criterion>) -> String {
    set.iter().map(|c| c.as_str()).collect::<Vec<_>>().join(";")
}

const SCORES_HEADER: [&str; 7] = ["frame_id", "role", "ms", "ss", "es", "selected", "failing_criteria"];

/// Scores CSV. Floats use the shortest representation that parses back to
/// the same value.
pub fn render_scores(map: &MemorableMap) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_io = |e: csv::Error| Error::invalid(format!("csv encoding failed: {e}"));
    w.write_record(SCORES_HEADER).map_err(csv_io)?;
    for e in &map.entries {
        w.write_record([
            e.frame_id.clone(),
            e.role.to_string(),
            e.ms.to_string(),
            e.ss.to_string(),
            e.es.to_string(),
            e.selected.to_string(),
            failing_label(&e.failing_criteria),
        ])
        .map_err(csv_io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn parse_scores(text: &str) -> Result<Vec<FrameScores>> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let bad = |line: usize, msg: String| Error::invalid(format!("scores line {line}: {msg}"));
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| bad(line, e.to_string()))?;
        if rec.len() != SCORES_HEADER.len() {
            return Err(bad(line, format!("expected {} fields", SCORES_HEADER.len())));
        }
        let num = |j: usize| rec[j].parse::<f64>().map_err(|e| bad(line, e.to_string()));
        let failing_criteria = rec[6]
            .split(';')
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect::<Result<BTreeSet<Criterion>>>()?;
        let selected = rec[5].parse::<bool>().map_err(|e| bad(line, e.to_string()))?;
        if selected != failing_criteria.is_empty() {
            return Err(bad(line, "selected flag disagrees with failing criteria".into()));
        }
        out.push(FrameScores {
            frame_id: rec[0].to_string(),
            role: rec[1].parse()?,
            ms: num(2)?,
            ss: num(3)?,
            es: num(4)?,
            selected,
            failing_criteria,
        });
    }
    Ok(out)
}

/// Reads a scores CSV back into a memorable map under `thresholds`.
pub fn read_scores(path: &Path, dataset_id: &str, thresholds: Thresholds) -> Result<MemorableMap> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(MemorableMap::new(dataset_id, thresholds, parse_scores(&text)?))
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest<'a> {
    pub dataset_id: &'a str,
    pub thresholds: Thresholds,
    pub config: serde_json::Value,
    pub tool_version: &'static str,
    pub frames: usize,
    pub selected: usize,
    pub skipped: Vec<BTreeMap<&'static str, String>>,
}

impl<'a> RunManifest<'a> {
    pub fn new(map: &'a MemorableMap, config: serde_json::Value) -> Self {
        Self {
            dataset_id: &map.dataset_id,
            thresholds: map.thresholds,
            config,
            tool_version: env!("CARGO_PKG_VERSION"),
            frames: map.entries.len(),
            selected: map.count_selected(None),
            skipped: map
                .skipped
                .iter()
                .map(|s| {
                    BTreeMap::from([
                        ("frame_id", s.frame_id.clone()),
                        ("role", s.role.to_string()),
                        ("reason", s.reason.clone()),
                    ])
                })
                .collect(),
        }
    }

    pub fn render(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

pub fn render_sweep(criterion: Criterion, rows: &[SweepRow]) -> String {
    let mut out = String::from("criterion,threshold,selected_count,auc\n");
    for r in rows {
        let auc = r.auc.map(|a| a.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{auc}",
            criterion.threshold_name(),
            r.threshold,
            r.selected_count
        );
    }
    out
}

pub fn render_contribution(report: &ContributionReport) -> String {
    let mut out = String::from("group,count,percent\n");
    for s in &report.per_criterion {
        let _ = writeln!(out, "{},{},{}", s.criterion, s.count, s.percent);
    }
    for (label, count) in &report.overlaps {
        let pct = if report.mismatched_and_discarded == 0 {
            0.0
        } else {
            100.0 * *count as f64 / report.mismatched_and_discarded as f64
        };
        let _ = writeln!(out, "only:{label},{count},{pct}");
    }
    let _ = writeln!(out, "mismatched,{},", report.mismatched);
    let _ = writeln!(out, "mismatched_and_discarded,{},", report.mismatched_and_discarded);
    out
}

pub fn render_pr_points(curve: &PrCurve) -> String {
    let mut out = String::from("threshold,tp,fp,fn,tn,recall,precision\n");
    for o in &curve.operating {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            o.threshold, o.tp, o.fp, o.fn_, o.tn, o.recall, o.precision
        );
    }
    out
}

const SVG_COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Precision-recall plot with one polyline per labelled curve.
pub fn render_pr_svg(title: &str, curves: &[(&str, &PrCurve)]) -> String {
    let (size, margin) = (400.0, 50.0);
    let plot = size - 2.0 * margin;
    let px = |r: f64| margin + r * plot;
    let py = |p: f64| size - margin - p * plot;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="25" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        size / 2.0,
        xml_escape(title)
    );
    let _ = writeln!(
        s,
        r#"<path d="M{m} {t} L{m} {b} L{r} {b}" fill="none" stroke="black"/>"#,
        m = margin,
        t = margin,
        b = size - margin,
        r = size - margin
    );
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="10">{v:.1}</text>"#,
            px(v),
            size - margin + 15.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-family="sans-serif" font-size="10">{v:.1}</text>"#,
            margin - 5.0,
            py(v) + 3.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">recall</text>"#,
        size / 2.0,
        size - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 14 {})">precision</text>"#,
        size / 2.0,
        size / 2.0
    );
    for (i, (label, curve)) in curves.iter().enumerate() {
        let color = SVG_COLORS[i % SVG_COLORS.len()];
        let pts: Vec<String> = curve
            .points
            .iter()
            .map(|&(r, p)| format!("{:.2},{:.2}", px(r), py(p)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            pts.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" fill="{color}">{} (AUC {:.4})</text>"#,
            margin + 10.0,
            margin + 15.0 + 15.0 * i as f64,
            xml_escape(label),
            curve.auc
        );
    }
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Everything one run can emit. Absent parts are skipped.
#[derive(Debug, Default)]
pub struct Reports<'a> {
    pub map: Option<&'a MemorableMap>,
    pub config: Option<serde_json::Value>,
    /// File stem → labelled curves drawn together.
    pub curves: Vec<(String, Vec<(String, &'a PrCurve)>)>,
    pub sweeps: Vec<(Criterion, Vec<SweepRow>)>,
    pub contribution: Option<&'a ContributionReport>,
}

/// Writes the reports into `out_dir`, each file atomically. Returns the
/// written paths in order.
pub fn write_reports(out_dir: &Path, reports: &Reports<'_>) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    let mut emit = |name: String, body: String| -> Result<()> {
        let path = out_dir.join(name);
        write_atomic(&path, body.as_bytes())?;
        written.push(path);
        Ok(())
    };
    if let Some(map) = reports.map {
        emit("scores.csv".into(), render_scores(map)?)?;
        let cfg = reports.config.clone().unwrap_or(serde_json::Value::Null);
        emit("manifest.json".into(), RunManifest::new(map, cfg).render())?;
    }
    for (stem, curves) in &reports.curves {
        let labelled: Vec<(&str, &PrCurve)> = curves.iter().map(|(l, c)| (l.as_str(), *c)).collect();
        for (label, curve) in &labelled {
            emit(format!("{stem}_{label}.csv"), render_pr_points(curve))?;
        }
        emit(format!("{stem}.svg"), render_pr_svg(stem, &labelled))?;
    }
    for (criterion, rows) in &reports.sweeps {
        emit(
            format!("sweep_{}.csv", criterion.threshold_name()),
            render_sweep(*criterion, rows),
        )?;
    }
    if let Some(c) = reports.contribution {
        emit("contribution.csv".into(), render_contribution(c))?;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::{pr_curve, window_ground_truth};
    use crate::matching::SimilarityMatrix;

    fn sample_map() -> MemorableMap {
        MemorableMap::new(
            "demo",
            Thresholds::DEFAULT,
            vec![
                FrameScores::judge("0001", Role::Query, 0.72, 0.9, 0.61, &Thresholds::DEFAULT),
                FrameScores::judge("0002", Role::Query, 0.1 + 0.2, 1.0, 0.0, &Thresholds::DEFAULT),
                FrameScores::judge(
                    "0001",
                    Role::Reference,
                    1.0 / 3.0,
                    0.25,
                    0.999999999,
                    &Thresholds::DEFAULT,
                ),
            ],
        )
    }

    #[test]
    fn scores_round_trip() {
        let map = sample_map();
        let text = render_scores(&map).unwrap();
        assert!(text.starts_with("frame_id,role,ms,ss,es,selected,failing_criteria\n"));
        assert_eq!(parse_scores(&text).unwrap(), map.entries);
    }

    #[test]
    fn scores_reject_inconsistent_rows() {
        let text = "frame_id,role,ms,ss,es,selected,failing_criteria\na,query,0.1,1,1,true,memorability\n";
        assert!(parse_scores(text).is_err());
        let text = "frame_id,role,ms,ss,es,selected,failing_criteria\na,sideways,0.1,1,1,true,\n";
        assert!(parse_scores(text).is_err());
    }

    #[test]
    fn ground_truth_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gt.csv");
        let gt = window_ground_truth(4, 1);
        std::fs::write(&path, render_ground_truth(&gt)).unwrap();
        let back = read_ground_truth(&path).unwrap();
        assert_eq!(back.mapping(), gt.mapping());
        std::fs::write(&path, "a,x;y\nb,\n").unwrap();
        assert!(read_ground_truth(&path).is_err());
    }

    #[test]
    fn descriptor_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "a,3,4\nb,0,0\n").unwrap();
        let d = read_descriptors(&path).unwrap();
        assert_eq!(d[0].vector, vec![0.6, 0.8]);
        assert!(d[1].is_sentinel());
        std::fs::write(&path, "a,3,4\nb,1\n").unwrap();
        assert!(read_descriptors(&path).is_err());
        std::fs::write(&path, "a,3,x\n").unwrap();
        assert!(read_descriptors(&path).is_err());
    }

    #[test]
    fn reports_are_byte_identical_across_runs() {
        let map = sample_map();
        let s = SimilarityMatrix::new(
            vec!["0".into(), "1".into()],
            vec!["0".into(), "1".into()],
            vec![0.9, 0.1, 0.8, 0.2],
        )
        .unwrap();
        let curve = pr_curve(&s, &window_ground_truth(2, 0), None).unwrap();
        let reports = Reports {
            map: Some(&map),
            config: Some(serde_json::json!({"k": 1})),
            curves: vec![("pr".into(), vec![("baseline".into(), &curve)])],
            sweeps: vec![],
            contribution: None,
        };
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let fa = write_reports(a.path(), &reports).unwrap();
        let fb = write_reports(b.path(), &reports).unwrap();
        assert_eq!(fa.len(), 4);
        for (x, y) in fa.iter().zip(&fb) {
            assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
        }
        let svg = std::fs::read_to_string(a.path().join("pr.svg")).unwrap();
        assert!(svg.starts_with("<svg") && svg.contains("polyline"));
    }

    #[test]
    fn unwritable_target_leaves_nothing_behind() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("not-a-dir");
        std::fs::write(&blocker, "x").unwrap();
        let map = sample_map();
        let reports = Reports {
            map: Some(&map),
            ..Default::default()
        };
        assert!(write_reports(&blocker.join("out"), &reports).is_err());
        let names: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(names.len(), 1);
    }

    #[test]
    fn missing_detection_sidecar_is_none() {
        let f = FrameRef::new("x", Role::Query, "/nonexistent/x.png");
        assert_eq!(load_detections(&f).unwrap(), None);
    }
}
