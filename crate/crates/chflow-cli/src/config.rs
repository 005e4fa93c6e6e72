//! Run configuration: a single TOML document that fully determines a run.
//!
//! The configuration is echoed verbatim-equivalent into the output directory
//! (`config.toml`), and `parse(echo(cfg)) == cfg` holds exactly, so the echo
//! can be fed back to reproduce a run bit for bit.

use std::path::{Path, PathBuf};

use chflow::peakon::Labeling;
use chflow::taylor::MAX_ORDER;
use serde::{Deserialize, Serialize};

use crate::RunError;

/// Version of the configuration schema and of the JSON manifests.
pub const SCHEMA_VERSION: u32 = 1;

/// Everything a run depends on. Fields that a given subcommand does not use
/// (for example `n` under `simulate-peakons`) are carried along unchanged so
/// one file can describe a whole experiment family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Must match the subcommand the binary is invoked with.
    pub subcommand: String,
    /// Order of the hierarchy member; 1 is the classical equation.
    #[serde(default = "default_l")]
    pub l: usize,
    /// Grid size for Eulerian runs; even, at least 8.
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Duration of the run, starting from t = 0.
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    /// Truncation order for taylor-analyze.
    #[serde(default = "default_k")]
    pub k: usize,
    /// Seed for the random-trig preset and the randomized identity checks.
    #[serde(default)]
    pub seed: u64,
    /// Post-collision branch labeling for simulate-peakons; absent means
    /// stop at the event.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub continuation: Option<Labeling>,
    /// Output directory; the --out flag overrides it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub initial: InitialData,
}

fn default_l() -> usize {
    1
}
fn default_n() -> usize {
    256
}
fn default_dt() -> f64 {
    1e-3
}
fn default_t_end() -> f64 {
    1.0
}
fn default_k() -> usize {
    8
}

/// Initial datum presets. Grid presets feed simulate-eulerian and
/// taylor-analyze; `multipeakon` feeds simulate-peakons.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "preset", rename_all = "kebab-case")]
pub enum InitialData {
    #[default]
    Zero,
    Constant {
        value: f64,
    },
    Sine {
        amplitude: f64,
        mode: usize,
    },
    /// Traveling crest of the classical equation, height equal to its speed.
    PeriodicPeakon {
        speed: f64,
    },
    /// Crest positions and amplitudes on the line.
    Multipeakon {
        q: Vec<f64>,
        p: Vec<f64>,
    },
    /// Band-limited field with uniform random mode amplitudes.
    #[serde(rename_all = "kebab-case")]
    RandomTrig {
        max_mode: usize,
        scale: f64,
    },
}

pub fn load(path: &Path) -> Result<RunConfig, RunError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| RunError::Config(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))
}

fn finite(x: f64, what: &str) -> Result<(), RunError> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(RunError::Config(format!("{what} must be finite, got {x}")))
    }
}

fn positive(x: f64, what: &str) -> Result<(), RunError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(RunError::Config(format!(
            "{what} must be a positive finite number, got {x}"
        )))
    }
}

impl RunConfig {
    /// Structural checks shared by every subcommand, plus preset checks.
    /// Grid admissibility (even n >= 8) is left to the grid constructor so
    /// there is a single source of truth for it.
    pub fn validate(&self, invoked: &str) -> Result<(), RunError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(RunError::Config(format!(
                "unsupported schema-version {} (this build reads {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.subcommand != invoked {
            return Err(RunError::Config(format!(
                "configuration is for subcommand \"{}\" but \"{invoked}\" was invoked",
                self.subcommand
            )));
        }
        if self.l < 1 {
            return Err(RunError::Config("l must be at least 1".into()));
        }
        positive(self.dt, "dt")?;
        positive(self.t_end, "t-end")?;
        if self.k < 1 || self.k > MAX_ORDER {
            return Err(RunError::Config(format!(
                "k must lie in 1..={MAX_ORDER}, got {}",
                self.k
            )));
        }
        if self.continuation.is_some() && invoked != "simulate-peakons" {
            return Err(RunError::Config(
                "continuation only applies to simulate-peakons".into(),
            ));
        }
        match &self.initial {
            InitialData::Zero => {}
            InitialData::Constant { value } => finite(*value, "initial value")?,
            InitialData::Sine { amplitude, mode } => {
                finite(*amplitude, "initial amplitude")?;
                if *mode < 1 || 2 * *mode >= self.n {
                    return Err(RunError::Config(format!(
                        "sine mode {mode} does not fit on a grid of {} points",
                        self.n
                    )));
                }
            }
            InitialData::PeriodicPeakon { speed } => finite(*speed, "crest speed")?,
            InitialData::Multipeakon { q, p } => {
                if q.is_empty() || q.len() != p.len() {
                    return Err(RunError::Config(format!(
                        "multipeakon needs matching nonempty q and p, got {} and {}",
                        q.len(),
                        p.len()
                    )));
                }
                for (i, x) in q.iter().chain(p.iter()).enumerate() {
                    finite(*x, &format!("multipeakon entry {i}"))?;
                }
            }
            InitialData::RandomTrig { max_mode, scale } => {
                finite(*scale, "initial scale")?;
                if *max_mode < 1 || 2 * *max_mode >= self.n {
                    return Err(RunError::Config(format!(
                        "max-mode {max_mode} does not fit on a grid of {} points",
                        self.n
                    )));
                }
            }
        }
        Ok(())
    }

    /// Canonical TOML echo of this configuration.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("run configuration serializes")
    }
}
