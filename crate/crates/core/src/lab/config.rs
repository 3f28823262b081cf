//! Run configuration and its TOML file form.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::AgentHyperparams;
use crate::cartpole::PhysicsParams;
use crate::error::{Error, Result};
use crate::rehearsal::{RehearsalConfig, RehearsalMode};

pub const DEFAULT_HIDDEN_WIDTH: usize = 16;
pub const DEFAULT_EPISODES: usize = 3000;
pub const DEFAULT_STEP_CAP: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSettings {
    pub hidden_width: usize,
    pub episodes: usize,
    pub step_cap: usize,
    pub seed: u64,
    /// Empty means "use the rehearsal mode name".
    pub label: String,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            hidden_width: DEFAULT_HIDDEN_WIDTH,
            episodes: DEFAULT_EPISODES,
            step_cap: DEFAULT_STEP_CAP,
            seed: 1,
            label: String::new(),
        }
    }
}

/// Everything needed to reproduce one seeded run.
///
/// File layout has four tables: `[physics]`, `[agent]`, `[rehearsal]`, `[run]`.
/// Every key is optional and falls back to its default.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub physics: PhysicsParams,
    #[serde(rename = "agent")]
    pub hyper: AgentHyperparams,
    pub rehearsal: RehearsalConfig,
    pub run: RunSettings,
}

impl RunConfig {
    pub fn for_mode(mode: RehearsalMode) -> Self {
        let mut config = Self::default();
        config.rehearsal.mode = mode;
        config
    }

    pub fn label(&self) -> String {
        if self.run.label.is_empty() {
            self.rehearsal.mode.name().to_string()
        } else {
            self.run.label.clone()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.run.seed = seed;
        self
    }

    pub fn with_episodes(mut self, episodes: usize) -> Self {
        self.run.episodes = episodes;
        self
    }

    pub fn with_force(mut self, newtons: f64) -> Self {
        self.physics.force_magnitude = newtons;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.physics.validate()?;
        self.hyper.validate()?;
        self.rehearsal.validate()?;
        if self.run.hidden_width == 0 {
            return Err(Error::config("run.hidden_width", "must be at least 1"));
        }
        if self.run.episodes == 0 {
            return Err(Error::config("run.episodes", "must be at least 1"));
        }
        if self.run.step_cap == 0 {
            return Err(Error::config("run.step_cap", "must be at least 1"));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> std::result::Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config = Self::from_toml_str(&text).map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            message,
        })?;
        config.validate()?;
        Ok(config)
    }
}
