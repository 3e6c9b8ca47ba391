use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Query,
    Reference,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Query => "query",
            Role::Reference => "reference",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "query" => Ok(Role::Query),
            "reference" => Ok(Role::Reference),
            other => Err(Error::invalid(format!("unknown role `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameRef {
    pub frame_id: String,
    pub role: Role,
    pub source_path: PathBuf,
}

impl FrameRef {
    pub fn new(frame_id: impl Into<String>, role: Role, source_path: impl Into<PathBuf>) -> Self {
        Self {
            frame_id: frame_id.into(),
            role,
            source_path: source_path.into(),
        }
    }

    /// `<frame_path><suffix>`, the naming rule shared by every sidecar file.
    pub fn sidecar_path(&self, suffix: &str) -> PathBuf {
        let mut s = self.source_path.clone().into_os_string();
        s.push(suffix);
        PathBuf::from(s)
    }
}

/// The three selection criteria, in their canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Memorability,
    Staticity,
    Entropy,
}

impl Criterion {
    pub const ALL: [Criterion; 3] = [Criterion::Memorability, Criterion::Staticity, Criterion::Entropy];

    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::Memorability => "memorability",
            Criterion::Staticity => "staticity",
            Criterion::Entropy => "entropy",
        }
    }

    /// Threshold flag name (`mt`, `st`, `et`).
    pub fn threshold_name(self) -> &'static str {
        match self {
            Criterion::Memorability => "mt",
            Criterion::Staticity => "st",
            Criterion::Entropy => "et",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "memorability" | "mt" => Ok(Criterion::Memorability),
            "staticity" | "st" => Ok(Criterion::Staticity),
            "entropy" | "et" => Ok(Criterion::Entropy),
            other => Err(Error::invalid(format!("unknown criterion `{other}`"))),
        }
    }
}

/// Selection thresholds MT, ST, ET. Values are capped to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub mt: f64,
    pub st: f64,
    pub et: f64,
}

impl Thresholds {
    pub const DEFAULT: Thresholds = Thresholds {
        mt: 0.5,
        st: 0.6,
        et: 0.4,
    };

    /// Defaults lowered by 0.05 each, used for sparse datasets such as St. Lucia.
    pub const STLUCIA: Thresholds = Thresholds {
        mt: 0.45,
        st: 0.55,
        et: 0.35,
    };

    pub const ZERO: Thresholds = Thresholds {
        mt: 0.0,
        st: 0.0,
        et: 0.0,
    };

    pub fn new(mt: f64, st: f64, et: f64) -> Result<Self> {
        for (name, v) in [("mt", mt), ("st", st), ("et", et)] {
            if v.is_nan() {
                return Err(Error::invalid(format!("threshold {name} is NaN")));
            }
        }
        Ok(Self {
            mt: mt.clamp(0.0, 1.0),
            st: st.clamp(0.0, 1.0),
            et: et.clamp(0.0, 1.0),
        })
    }

    pub fn get(&self, c: Criterion) -> f64 {
        match c {
            Criterion::Memorability => self.mt,
            Criterion::Staticity => self.st,
            Criterion::Entropy => self.et,
        }
    }

    /// Only `criterion` active at `value`, the other two at zero.
    pub fn single(criterion: Criterion, value: f64) -> Result<Self> {
        let mut t = Self::ZERO;
        match criterion {
            Criterion::Memorability => t.mt = value,
            Criterion::Staticity => t.st = value,
            Criterion::Entropy => t.et = value,
        }
        Self::new(t.mt, t.st, t.et)
    }

    /// Criteria whose score falls below its threshold (comparison is `>=` to pass).
    pub fn failing(&self, ms: f64, ss: f64, es: f64) -> BTreeSet<Criterion> {
        let mut out = BTreeSet::new();
        if ms.is_nan() || ms < self.mt {
            out.insert(Criterion::Memorability);
        }
        if ss.is_nan() || ss < self.st {
            out.insert(Criterion::Staticity);
        }
        if es.is_nan() || es < self.et {
            out.insert(Criterion::Entropy);
        }
        out
    }
}

impl Default for Thresholds {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Scores and verdict for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameScores {
    pub frame_id: String,
    pub role: Role,
    pub ms: f64,
    pub ss: f64,
    pub es: f64,
    pub selected: bool,
    pub failing_criteria: BTreeSet<Criterion>,
}

impl FrameScores {
    pub fn judge(frame_id: impl Into<String>, role: Role, ms: f64, ss: f64, es: f64, t: &Thresholds) -> Self {
        let failing_criteria = t.failing(ms, ss, es);
        Self {
            frame_id: frame_id.into(),
            role,
            ms,
            ss,
            es,
            selected: failing_criteria.is_empty(),
            failing_criteria,
        }
    }

    pub fn rejudge(&self, t: &Thresholds) -> Self {
        Self::judge(self.frame_id.clone(), self.role, self.ms, self.ss, self.es, t)
    }

    pub fn score(&self, c: Criterion) -> f64 {
        match c {
            Criterion::Memorability => self.ms,
            Criterion::Staticity => self.ss,
            Criterion::Entropy => self.es,
        }
    }
}
