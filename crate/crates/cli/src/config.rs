//! Run configuration: JSON file values, then command-line overrides.

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sketchkit::analysis::AnalysisConfig;
use sketchkit::pixreg::RegistrationConfig;
use sketchkit::sketch::FORMAT_VERSION;
use sketchkit::synthesis::SynthesisConfig;
use std::path::{Path, PathBuf};

pub const EFFECTIVE_CONFIG: &str = "effective-config.json";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoConfig {
    pub dataset: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub registration: RegistrationConfig,
    pub analysis: AnalysisConfig,
    pub synthesis: SynthesisConfig,
    pub io: IoConfig,
}

impl Config {
    /// Defaults, or the contents of `path` with missing fields defaulted.
    pub fn load(path: Option<&Path>) -> Result<Config> {
        let Some(path) = path else {
            return Ok(Config::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| sketchkit::Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        serde_json::from_str(&text).map_err(|e| {
            sketchkit::Error::Format {
                source_name: path.display().to_string(),
                message: e.to_string(),
            }
            .into()
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.registration
            .validate()
            .context("registration config")?;
        self.analysis.validate().context("analysis config")?;
        self.synthesis.validate().context("synthesis config")?;
        Ok(())
    }

    /// Writes the configuration into `dir` as `effective-config.json`.
    pub fn echo(&self, dir: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Echo<'a> {
            format_version: u32,
            #[serde(flatten)]
            config: &'a Config,
        }
        let doc = Echo {
            format_version: FORMAT_VERSION,
            config: self,
        };
        sketchkit::io::write_json(dir.join(EFFECTIVE_CONFIG), &doc)?;
        Ok(())
    }
}
