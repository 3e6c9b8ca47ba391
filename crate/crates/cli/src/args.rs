use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use memmaps_core::entropy::EntropyMode;
use memmaps_core::selection::ErrorPolicy;
use serde::Serialize;

/// Select memorable frames for visual place recognition maps and measure
/// what the selection does to matching.
///
/// Every flag can also be set through an environment variable named
/// MEMMAPS_<FLAG>, e.g. MEMMAPS_MT=0.45 or MEMMAPS_SCORER=variance.
#[derive(Debug, Parser)]
#[command(name = "memmaps", version, propagate_version = true)]
pub struct Cli {
    /// Worker threads for all parallel stages (0 = one per core).
    #[arg(long, global = true, env = "MEMMAPS_WORKERS", default_value_t = 0)]
    pub workers: usize,

    /// Only print warnings and errors on stderr.
    #[arg(short, long, global = true, env = "MEMMAPS_QUIET")]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score every frame and write scores.csv plus the run manifest.
    Score(ScoreArgs),
    /// Precision-recall curves and AUC with and without frame selection.
    Evaluate(EvalArgs),
    /// Sweep one selection threshold (others at zero) and record count and AUC.
    Sweep(SweepArgs),
    /// Time matching against the full and the selected reference set.
    Bench(BenchArgs),
    /// Which criteria discarded the mismatched queries.
    Contribution(EvalArgs),
    /// Write the synthetic test dataset.
    Fixture(FixtureArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Default,
    Stlucia,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScorerKind {
    /// Precomputed crop scores in `<frame>.memorability.json`.
    Sidecar,
    /// External program: PGM crop on stdin, one score on stdout.
    Command,
    /// Contrast heuristic (crop standard deviation / 64).
    Variance,
    /// Every crop gets --scorer-constant.
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DescriptorSource {
    /// Tiny-image descriptors computed from the frames.
    Tiny,
    /// Descriptor CSV files (`frame_id,v1,v2,...`).
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EntropyModeArg {
    FilledBins,
    Shannon,
}

impl From<EntropyModeArg> for EntropyMode {
    fn from(m: EntropyModeArg) -> Self {
        match m {
            EntropyModeArg::FilledBins => EntropyMode::FilledBins,
            EntropyModeArg::Shannon => EntropyMode::Shannon,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OnError {
    Skip,
    Abort,
}

impl From<OnError> for ErrorPolicy {
    fn from(o: OnError) -> Self {
        match o {
            OnError::Skip => ErrorPolicy::Skip,
            OnError::Abort => ErrorPolicy::Abort,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CriterionArg {
    Mt,
    St,
    Et,
    All,
}

#[derive(Debug, Clone, Args)]
pub struct DatasetArgs {
    /// Dataset manifest JSON.
    #[arg(long, env = "MEMMAPS_MANIFEST")]
    pub manifest: PathBuf,

    /// Output directory for reports.
    #[arg(long, env = "MEMMAPS_OUT", default_value = "memmaps-out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SelectionArgs {
    /// Threshold preset; --mt/--st/--et override individual values.
    #[arg(long, env = "MEMMAPS_PRESET", value_enum, default_value_t = Preset::Default)]
    pub preset: Preset,

    /// Memorability threshold [preset: 0.5, stlucia 0.45].
    #[arg(long, env = "MEMMAPS_MT")]
    pub mt: Option<f64>,

    /// Staticity threshold [preset: 0.6, stlucia 0.55].
    #[arg(long, env = "MEMMAPS_ST")]
    pub st: Option<f64>,

    /// Entropy threshold [preset: 0.4, stlucia 0.35].
    #[arg(long, env = "MEMMAPS_ET")]
    pub et: Option<f64>,

    /// Read scores from this CSV instead of computing them.
    #[arg(long, env = "MEMMAPS_SCORES")]
    pub scores: Option<PathBuf>,

    /// Entropy neighborhood radius in pixels.
    #[arg(long, env = "MEMMAPS_RADIUS", default_value_t = 5)]
    pub radius: usize,

    /// Histogram bins for the entropy map.
    #[arg(long, env = "MEMMAPS_BINS", default_value_t = 256)]
    pub bins: usize,

    #[arg(long, env = "MEMMAPS_ENTROPY_MODE", value_enum, default_value_t = EntropyModeArg::FilledBins)]
    pub entropy_mode: EntropyModeArg,

    /// Minimum detector confidence for a dynamic object.
    #[arg(long, env = "MEMMAPS_CONFIDENCE", default_value_t = 0.55)]
    pub confidence: f64,

    /// Minimum box area as a fraction of the frame.
    #[arg(long, env = "MEMMAPS_MIN_AREA", default_value_t = 0.05)]
    pub min_area: f64,

    /// Comma-separated dynamic class names [default: the built-in 21 classes].
    #[arg(long, env = "MEMMAPS_DYNAMIC_CLASSES", value_delimiter = ',')]
    pub dynamic_classes: Option<Vec<String>>,

    /// Side of one memorability crop in pixels.
    #[arg(long, env = "MEMMAPS_CROP_SIZE", default_value_t = 227)]
    pub crop_size: usize,

    /// Crops per side of the memorability grid.
    #[arg(long, env = "MEMMAPS_GRID", default_value_t = 5)]
    pub grid: usize,

    #[arg(long, env = "MEMMAPS_SCORER", value_enum, default_value_t = ScorerKind::Sidecar)]
    pub scorer: ScorerKind,

    /// Command line for --scorer command.
    #[arg(long, env = "MEMMAPS_SCORER_COMMAND")]
    pub scorer_command: Option<String>,

    /// Score for --scorer constant.
    #[arg(long, env = "MEMMAPS_SCORER_CONSTANT", default_value_t = 0.5)]
    pub scorer_constant: f64,

    /// What to do when a frame cannot be scored.
    #[arg(long, env = "MEMMAPS_ON_ERROR", value_enum, default_value_t = OnError::Abort)]
    pub on_error: OnError,
}

#[derive(Debug, Clone, Args)]
pub struct DescriptorArgs {
    #[arg(long, env = "MEMMAPS_DESCRIPTORS", value_enum, default_value_t = DescriptorSource::Tiny)]
    pub descriptors: DescriptorSource,

    /// Side of the tiny-image descriptor (side² dimensions).
    #[arg(long, env = "MEMMAPS_DESCRIPTOR_SIDE", default_value_t = 16)]
    pub descriptor_side: usize,

    /// Query descriptor CSV for --descriptors file.
    #[arg(long, env = "MEMMAPS_QUERY_DESCRIPTORS")]
    pub query_descriptors: Option<PathBuf>,

    /// Reference descriptor CSV for --descriptors file.
    #[arg(long, env = "MEMMAPS_REFERENCE_DESCRIPTORS")]
    pub reference_descriptors: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,
    #[command(flatten)]
    pub selection: SelectionArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,
    #[command(flatten)]
    pub selection: SelectionArgs,
    #[command(flatten)]
    pub descriptors: DescriptorArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub eval: EvalArgs,

    /// Threshold to sweep.
    #[arg(long, env = "MEMMAPS_CRITERION", value_enum, default_value_t = CriterionArg::All)]
    pub criterion: CriterionArg,

    /// Sweep step over [0, 1].
    #[arg(long, env = "MEMMAPS_STEP", default_value_t = 0.1)]
    pub step: f64,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub eval: EvalArgs,

    /// Timed passes per reference set.
    #[arg(long, env = "MEMMAPS_REPEATS", default_value_t = 5)]
    pub repeats: usize,
}

#[derive(Debug, Clone, Args)]
pub struct FixtureArgs {
    /// Directory to write the dataset into.
    #[arg(long, env = "MEMMAPS_OUT", default_value = "memmaps-fixture")]
    pub out: PathBuf,

    /// Places per traversal.
    #[arg(long, env = "MEMMAPS_FRAMES", default_value_t = 60)]
    pub frames: usize,

    #[arg(long, env = "MEMMAPS_WIDTH", default_value_t = 128)]
    pub width: usize,

    #[arg(long, env = "MEMMAPS_HEIGHT", default_value_t = 96)]
    pub height: usize,

    #[arg(long, env = "MEMMAPS_SEED", default_value_t = 2019)]
    pub seed: u64,
}
