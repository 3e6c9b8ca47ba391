//! Frame selection for visual place recognition maps.
//!
//! Each camera frame gets three masked scores: memorability (MS, from a
//! pluggable crop scorer), staticity (SS, the share of pixels outside dynamic
//! object boxes) and local entropy (ES). A frame enters the map only when all
//! three clear their thresholds. The [`evaluation`] module measures what that
//! filtering does to precision-recall performance.

pub mod entropy;
pub mod error;
pub mod evaluation;
pub mod frame;
pub mod grid;
pub mod io;
pub mod matching;
pub mod memorability;
pub mod selection;
pub mod staticity;
pub mod synth;

pub use error::{Error, Result};
pub use frame::{Criterion, FrameRef, FrameScores, Role, Thresholds};
pub use grid::{GrayImage, ImageGrid};
pub use selection::{MemorableMap, PipelineConfig};
