//! Dataset directories: drawings, tracings and pipeline sidecars.
//!
//! A drawing `NAME.json` gets `NAME.registered.json` (pixel-level result),
//! `NAME.reg.json` (per-iteration scores) and `NAME.levels.json`
//! (multi-level registration). Tracings live in `tracings/PROMPT.json`.

use anyhow::{bail, Result};
use sketchkit::analysis::DatasetEntry;
use sketchkit::pixreg::RegistrationSummary;
use sketchkit::simfit::MultiLevelRegistration;
use sketchkit::{load_sketch, Error, Sketch};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const TRACINGS_DIR: &str = "tracings";
pub const REGISTERED_SUFFIX: &str = ".registered.json";
pub const SCORES_SUFFIX: &str = ".reg.json";
pub const LEVELS_SUFFIX: &str = ".levels.json";

const RESERVED: [&str; 2] = ["effective-config.json", "summary.json"];

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    Ok(std::fs::read_to_string(path).map_err(|e| io_err(path, e))?)
}

/// File names in `dir` (not recursive), sorted.
fn file_names(dir: &Path) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
        let entry = entry.map_err(|e| io_err(dir, e))?;
        let kind = entry.file_type().map_err(|e| io_err(&entry.path(), e))?;
        if kind.is_file() {
            if let Some(name) = entry.file_name().to_str() {
                names.push(name.to_string());
            }
        }
    }
    names.sort();
    Ok(names)
}

/// Drawing name for a file holding a raw drawing, `None` for sidecars and other files.
pub fn drawing_name(file: &str) -> Option<&str> {
    if RESERVED.contains(&file)
        || [REGISTERED_SUFFIX, SCORES_SUFFIX, LEVELS_SUFFIX]
            .iter()
            .any(|s| file.ends_with(s))
    {
        return None;
    }
    file.strip_suffix(".json").filter(|n| !n.is_empty())
}

/// Raw drawings in `dir` as `(name, path)`, sorted by name.
pub fn drawings(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    Ok(file_names(dir)?
        .iter()
        .filter_map(|f| drawing_name(f).map(|n| (n.to_string(), dir.join(f))))
        .collect())
}

/// Tracings loaded on demand and cached by prompt.
pub struct Tracings {
    dir: PathBuf,
    cache: BTreeMap<String, Sketch>,
}

impl Tracings {
    pub fn new(dir: PathBuf) -> Self {
        Tracings {
            dir,
            cache: BTreeMap::new(),
        }
    }

    pub fn get(&mut self, prompt_id: &str) -> Result<&Sketch> {
        if prompt_id.is_empty() {
            bail!(Error::Validation(
                "drawing has no prompt_id to find its tracing".into()
            ));
        }
        if !self.cache.contains_key(prompt_id) {
            let tracing = load_sketch(self.dir.join(format!("{prompt_id}.json")))?;
            self.cache.insert(prompt_id.to_string(), tracing);
        }
        Ok(&self.cache[prompt_id])
    }
}

/// Every drawing in `dir` with a levels sidecar, joined with its scores and tracing.
pub fn load_entries(dir: &Path, tracings: &mut Tracings) -> Result<Vec<DatasetEntry>> {
    let mut entries = Vec::new();
    for file in file_names(dir)? {
        let Some(name) = file.strip_suffix(LEVELS_SUFFIX) else {
            continue;
        };
        let levels_path = dir.join(&file);
        let levels = MultiLevelRegistration::from_json_str(
            &read_to_string(&levels_path)?,
            &levels_path.display().to_string(),
        )?;
        let scores_path = dir.join(format!("{name}{SCORES_SUFFIX}"));
        let summary: RegistrationSummary = serde_json::from_str(&read_to_string(&scores_path)?)
            .map_err(|e| Error::Format {
                source_name: scores_path.display().to_string(),
                message: e.to_string(),
            })?;
        let Some(e_star) = summary.e_star() else {
            bail!(Error::Format {
                source_name: scores_path.display().to_string(),
                message: format!("chosen iteration {} has no score", summary.chosen),
            });
        };
        let tracing = tracings.get(&levels.original.prompt_id)?.clone();
        entries.push(DatasetEntry {
            original: levels.original.clone(),
            tracing,
            e_star,
            levels,
        });
    }
    Ok(entries)
}
