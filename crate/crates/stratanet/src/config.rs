//! Run configuration: one TOML file drives every pipeline stage. All
//! analysis-relevant fields feed a stable hash that artifacts embed; the
//! output directory is excluded, so relocating results never masquerades as a
//! different analysis.

use crate::error::{Error, Result};
use crate::graph::{EventKind, Level};
use crate::ingest::FilterSpec;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    #[serde(default)]
    pub filter: Filter,
    /// Levels the per-level stages run on.
    #[serde(default = "all_levels")]
    pub levels: Vec<Level>,
    /// Backbone significance level.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub bootstrap: Bootstrap,
    /// Master seed; every module derives its own labeled stream from it.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub modules: Modules,
    /// Directory of the config file; relative paths resolve against it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub events: PathBuf,
    pub roster: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keywords: Option<PathBuf>,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Filter {
    /// RFC 3339; the window is open on sides left unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_start: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_end: Option<DateTime<Utc>>,
    /// Event kinds kept; all four when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kinds: Option<Vec<EventKind>>,
    /// Drop events with off-roster endpoints (on by default: the graph
    /// builders reject such events).
    #[serde(default = "truthy")]
    pub roster_only: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bootstrap {
    /// Replicates per ensemble.
    #[serde(default = "default_bootstrap_n")]
    pub n: usize,
    /// Resample every level to this level's total weight instead of its own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fix_size_to: Option<Level>,
    /// Replicates refit per level for the partition-similarity matrix.
    #[serde(default = "default_rmi_samples")]
    pub rmi_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Modules {
    pub activity: bool,
    pub burstiness: bool,
    pub mixing: bool,
    pub density: bool,
    pub overlap: bool,
    pub backbone: bool,
    pub collapse: bool,
    pub bootstrap: bool,
    pub sbm: bool,
    pub rmi: bool,
    pub ergm: bool,
}

fn all_levels() -> Vec<Level> {
    Level::ALL.to_vec()
}

fn default_alpha() -> f64 {
    0.1
}

fn default_bootstrap_n() -> usize {
    300
}

fn default_rmi_samples() -> usize {
    10
}

fn truthy() -> bool {
    true
}

impl Default for Filter {
    fn default() -> Filter {
        Filter { window_start: None, window_end: None, kinds: None, roster_only: true }
    }
}

impl Default for Bootstrap {
    fn default() -> Bootstrap {
        Bootstrap {
            n: default_bootstrap_n(),
            fix_size_to: None,
            rmi_samples: default_rmi_samples(),
        }
    }
}

impl Default for Modules {
    fn default() -> Modules {
        Modules {
            activity: true,
            burstiness: true,
            mixing: true,
            density: true,
            overlap: true,
            backbone: true,
            collapse: true,
            bootstrap: true,
            sbm: true,
            rmi: true,
            ergm: true,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<PipelineConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config `{}`: {e}", path.display())))?;
        let mut config = PipelineConfig::parse(&text)?;
        config.base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        config.validate()?;
        Ok(config)
    }

    pub fn parse(text: &str) -> Result<PipelineConfig> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must be in (0, 1), got {}", self.alpha)));
        }
        if self.bootstrap.n == 0 {
            return Err(Error::Config("bootstrap.n must be positive".into()));
        }
        if self.levels.is_empty() {
            return Err(Error::Config("levels must not be empty".into()));
        }
        let mut seen = Vec::new();
        for l in &self.levels {
            if seen.contains(l) {
                return Err(Error::Config(format!("level {l} listed twice")));
            }
            seen.push(*l);
        }
        if let (Some(s), Some(e)) = (self.filter.window_start, self.filter.window_end) {
            if s >= e {
                return Err(Error::Config("filter window start must precede end".into()));
            }
        }
        Ok(())
    }

    /// Hex digest over every field except the output directory (and the
    /// config file's own location).
    pub fn hash(&self) -> String {
        let mut semantic = self.clone();
        semantic.paths.out_dir = PathBuf::new();
        semantic.base_dir = PathBuf::new();
        let toml = toml::to_string(&semantic).expect("config serializes");
        let digest = Sha256::digest(toml.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }

    pub fn events_path(&self) -> PathBuf {
        self.resolve(&self.paths.events)
    }

    pub fn roster_path(&self) -> PathBuf {
        self.resolve(&self.paths.roster)
    }

    pub fn keywords_path(&self) -> Option<PathBuf> {
        self.paths.keywords.as_deref().map(|p| self.resolve(p))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(&self.paths.out_dir)
    }

    /// The event filter this config describes.
    pub fn filter_spec(&self, keywords: Vec<String>) -> Result<FilterSpec> {
        let start = self.filter.window_start.unwrap_or(DateTime::<Utc>::MIN_UTC);
        let end = self.filter.window_end.unwrap_or(DateTime::<Utc>::MAX_UTC);
        let kinds = self
            .filter
            .kinds
            .clone()
            .unwrap_or_else(|| vec![EventKind::Tweet, EventKind::Retweet, EventKind::Reply, EventKind::Quote]);
        FilterSpec::new(keywords, (start, end), kinds, self.filter.roster_only)
    }
}
