//! Dataset-level aggregation and CSV/JSON report files.

use super::ordering::{ordering_costs, OrderingCosts, OrderingParams};
use super::stats::{mann_whitney_u, mean_sd};
use super::temporal::{temporal_profile, CorrelationClass, TemporalProfile, TEMPORAL_FEATURES};
use super::{
    closest_distance_histogram, compute_cdr, pixel_displacements, scaffold_errors, valid_strokes,
    AnalysisConfig, DrawingErrors, Histogram,
};
use crate::error::{Error, Result};
use crate::io::{write_atomic, write_json};
use crate::simfit::MultiLevelRegistration;
use crate::sketch::{Group, Sketch, FORMAT_VERSION};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use std::collections::BTreeMap;
use std::path::Path;

/// Everything the analysis needs about one drawing.
#[derive(Debug, Clone)]
pub struct DatasetEntry {
    /// The raw drawing as the user drew it.
    pub original: Sketch,
    pub tracing: Sketch,
    /// Combined score of the chosen pixel-level iteration.
    pub e_star: f64,
    pub levels: MultiLevelRegistration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawingRecord {
    pub prompt_id: String,
    pub user_id: String,
    pub group: Group,
    /// Whether the drawing contains scaffold strokes.
    pub scaffold: bool,
    pub e_star: f64,
    pub errors: DrawingErrors,
    pub valid_strokes: usize,
    pub strokes: usize,
    /// Absent when the drawing has no duration.
    pub temporal: Option<TemporalProfile>,
    pub ordering: OrderingCosts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramRecord {
    pub name: String,
    /// `*` for histograms pooled over prompts.
    pub prompt_id: String,
    pub group: String,
    pub histogram: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdrRecord {
    pub prompt_id: String,
    pub group: Group,
    pub drawings: usize,
    pub pixels: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub drawings: Vec<DrawingRecord>,
    pub histograms: Vec<HistogramRecord>,
    pub cdr: Vec<CdrRecord>,
}

/// Per-drawing errors, temporal profile and ordering costs.
pub fn analyze_drawing(entry: &DatasetEntry, config: &AnalysisConfig) -> Result<DrawingRecord> {
    let errors = scaffold_errors(&entry.levels, &entry.tracing, entry.e_star, config)?;
    let flags = valid_strokes(
        &entry.levels.stroke_level,
        &entry.tracing,
        config.stroke_valid_threshold,
        config.tolerance,
    )?;
    let temporal = match temporal_profile(&entry.original) {
        Ok(t) => Some(t),
        Err(Error::InsufficientData(msg)) => {
            log::warn!(
                "{}/{}: no temporal profile: {msg}",
                entry.original.prompt_id,
                entry.original.user_id
            );
            None
        }
        Err(e) => return Err(e),
    };
    Ok(DrawingRecord {
        prompt_id: entry.original.prompt_id.clone(),
        user_id: entry.original.user_id.clone(),
        group: entry.original.group,
        scaffold: entry.original.has_scaffold(),
        e_star: entry.e_star,
        errors,
        valid_strokes: flags.iter().filter(|&&v| v).count(),
        strokes: flags.len(),
        temporal,
        ordering: ordering_costs(&entry.original, &OrderingParams::default()),
    })
}

fn sort_key(s: &Sketch) -> (String, String, &'static str) {
    (s.prompt_id.clone(), s.user_id.clone(), s.group.as_str())
}

fn valid_by_prompt<'a>(
    entries: &'a [DatasetEntry],
    config: &AnalysisConfig,
) -> BTreeMap<(String, Group), Vec<&'a DatasetEntry>> {
    let mut map: BTreeMap<(String, Group), Vec<&DatasetEntry>> = BTreeMap::new();
    for e in entries
        .iter()
        .filter(|e| e.e_star > config.validity_threshold)
    {
        map.entry((e.original.prompt_id.clone(), e.original.group))
            .or_default()
            .push(e);
    }
    map
}

/// Cross-group closest-distance histograms per prompt, and per-group pooled
/// histograms of pixel displacement, stroke rotation and stroke scale over valid drawings.
pub fn group_histograms(
    entries: &[DatasetEntry],
    config: &AnalysisConfig,
) -> Result<Vec<HistogramRecord>> {
    let by_prompt = valid_by_prompt(entries, config);
    let mut out = Vec::new();
    let prompts: Vec<&String> = by_prompt
        .keys()
        .map(|(p, _)| p)
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    for prompt in prompts {
        let get = |g: Group| -> Vec<Sketch> {
            by_prompt
                .get(&(prompt.clone(), g))
                .map(|v| v.iter().map(|e| e.levels.pixel_level.clone()).collect())
                .unwrap_or_default()
        };
        let (novice, professional) = (get(Group::Novice), get(Group::Professional));
        if novice.is_empty() || professional.is_empty() {
            continue;
        }
        for (name, from, to, group) in [
            (
                "closest_novice_to_professional",
                &novice,
                &professional,
                "novice",
            ),
            (
                "closest_professional_to_novice",
                &professional,
                &novice,
                "professional",
            ),
        ] {
            out.push(HistogramRecord {
                name: name.to_string(),
                prompt_id: prompt.clone(),
                group: group.to_string(),
                histogram: closest_distance_histogram(
                    from,
                    to,
                    config.distance_bin_width,
                    config.distance_max,
                )?,
            });
        }
    }

    let mut groups: BTreeMap<Group, Vec<&DatasetEntry>> = BTreeMap::new();
    for ((_, g), v) in &by_prompt {
        groups.entry(*g).or_default().extend(v.iter().copied());
    }
    for (group, members) in groups {
        let mut displacement =
            Histogram::uniform(0.0, config.distance_max, config.distance_bin_width);
        let mut rotation = Histogram::uniform(-180.0, 180.0, config.rotation_bin_width);
        let mut scale = Histogram::uniform(0.0, 3.0, config.scale_bin_width);
        for e in members {
            displacement.extend(pixel_displacements(
                &e.levels.stroke_level,
                &e.levels.pixel_level,
            )?);
            let flags = valid_strokes(
                &e.levels.stroke_level,
                &e.tracing,
                config.stroke_valid_threshold,
                config.tolerance,
            )?;
            for ((rel, ok), stroke) in e
                .levels
                .relative_transforms()
                .iter()
                .zip(flags)
                .zip(&e.levels.original.strokes)
            {
                if ok && stroke.is_content() {
                    rotation.add(rel.theta_deg);
                    scale.add(rel.scale);
                }
            }
        }
        for (name, histogram) in [
            ("pixel_displacement", displacement),
            ("stroke_rotation", rotation),
            ("stroke_scale", scale),
        ] {
            out.push(HistogramRecord {
                name: name.to_string(),
                prompt_id: "*".to_string(),
                group: group.as_str().to_string(),
                histogram,
            });
        }
    }
    Ok(out)
}

/// Size of the commonly drawn region of each prompt and group with at least two valid drawings.
pub fn cdr_records(entries: &[DatasetEntry], config: &AnalysisConfig) -> Result<Vec<CdrRecord>> {
    let mut out = Vec::new();
    for ((prompt, group), members) in valid_by_prompt(entries, config) {
        if members.len() < 2 {
            continue;
        }
        let drawings: Vec<Sketch> = members
            .iter()
            .map(|e| e.levels.pixel_level.clone())
            .collect();
        let cdr = compute_cdr(&drawings, config.rho)?;
        out.push(CdrRecord {
            prompt_id: prompt,
            group,
            drawings: members.len(),
            pixels: cdr.foreground_count(),
        });
    }
    Ok(out)
}

impl DatasetReport {
    /// Analyzes every entry; records are ordered by prompt and user.
    pub fn build(entries: &[DatasetEntry], config: &AnalysisConfig) -> Result<DatasetReport> {
        config.validate()?;
        let mut sorted: Vec<&DatasetEntry> = entries.iter().collect();
        sorted.sort_by(|a, b| sort_key(&a.original).cmp(&sort_key(&b.original)));
        let drawings = sorted
            .iter()
            .map(|e| analyze_drawing(e, config))
            .collect::<Result<Vec<_>>>()?;
        Ok(DatasetReport {
            drawings,
            histograms: group_histograms(entries, config)?,
            cdr: cdr_records(entries, config)?,
        })
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    fn new(header: &[String]) -> Result<Table> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).map_err(csv_error)?;
        Ok(Table { writer })
    }

    fn row(&mut self, fields: &[String]) -> Result<()> {
        self.writer.write_record(fields).map_err(csv_error)
    }

    fn save(self, path: &Path) -> Result<()> {
        let bytes = self
            .writer
            .into_inner()
            .map_err(|e| csv_error(e.into_error()))?;
        write_atomic(path, &bytes)
    }
}

fn csv_error(e: impl std::fmt::Display) -> Error {
    Error::Format {
        source_name: "csv".into(),
        message: e.to_string(),
    }
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

pub const DRAWINGS_HEADER: [&str; 15] = [
    "prompt_id",
    "user_id",
    "group",
    "scaffold",
    "e_star",
    "valid",
    "E_GR",
    "E_GT",
    "E_GS",
    "E_LR",
    "E_LT",
    "E_LS",
    "E_P",
    "valid_strokes",
    "strokes",
];

fn temporal_header() -> Vec<String> {
    let mut h = strings(&["prompt_id", "user_id", "group"]);
    for f in TEMPORAL_FEATURES {
        h.extend([format!("{f}_rho"), format!("{f}_p"), format!("{f}_class")]);
    }
    for axis in ["x", "y"] {
        for c in ["positive", "negative", "none"] {
            h.push(format!("stroke_{axis}_{c}"));
        }
    }
    h.push("bin_counts".into());
    h
}

fn temporal_summary_header() -> Vec<String> {
    let mut h = strings(&["group", "drawings"]);
    for f in TEMPORAL_FEATURES {
        for c in ["positive", "negative", "none"] {
            h.push(format!("{f}_{c}"));
        }
    }
    for axis in ["x", "y"] {
        for c in ["positive", "negative", "none"] {
            h.push(format!("stroke_{axis}_{c}"));
        }
    }
    h
}

fn ordering_summary_header() -> Vec<String> {
    let mut h = strings(&["group", "drawings"]);
    for g in OrderingCosts::NAMES {
        h.extend([format!("{g}_mean"), format!("{g}_sd")]);
    }
    h
}

fn groups_present(report: &DatasetReport) -> Vec<Group> {
    let mut groups: Vec<Group> = report.drawings.iter().map(|d| d.group).collect();
    groups.sort();
    groups.dedup();
    groups
}

fn u_test(a: &[f64], b: &[f64]) -> Value {
    match mann_whitney_u(a, b) {
        Ok((u, p)) => json!({ "U": u, "p": p, "n_a": a.len(), "n_b": b.len() }),
        Err(_) => Value::Null,
    }
}

fn summary_json(report: &DatasetReport, config: &AnalysisConfig) -> Value {
    let mut groups = Map::new();
    for g in groups_present(report) {
        let members: Vec<&DrawingRecord> =
            report.drawings.iter().filter(|d| d.group == g).collect();
        let valid: Vec<&&DrawingRecord> = members.iter().filter(|d| d.errors.valid).collect();
        let mut conditions = Map::new();
        let mut tests = Map::new();
        let split = |scaffold: bool| -> Vec<[f64; 7]> {
            valid
                .iter()
                .filter(|d| d.scaffold == scaffold)
                .map(|d| d.errors.values())
                .collect()
        };
        let (without, with) = (split(false), split(true));
        for (label, rows) in [("without_scaffold", &without), ("with_scaffold", &with)] {
            let mut means = Map::new();
            means.insert("drawings".into(), json!(rows.len()));
            for (k, name) in DrawingErrors::NAMES.iter().enumerate() {
                let col: Vec<f64> = rows.iter().map(|r| r[k]).collect();
                let (m, sd) = mean_sd(&col);
                means.insert((*name).into(), json!({ "mean": m, "sd": sd }));
            }
            conditions.insert(label.into(), Value::Object(means));
        }
        for (k, name) in DrawingErrors::NAMES.iter().enumerate() {
            let a: Vec<f64> = without.iter().map(|r| r[k]).collect();
            let b: Vec<f64> = with.iter().map(|r| r[k]).collect();
            tests.insert((*name).into(), u_test(&a, &b));
        }
        groups.insert(
            g.as_str().into(),
            json!({
                "drawings": members.len(),
                "valid": valid.len(),
                "with_scaffold": members.iter().filter(|d| d.scaffold).count(),
                "errors": Value::Object(conditions),
                "scaffold_u_tests": Value::Object(tests),
            }),
        );
    }
    let mut ordering_tests = Map::new();
    for (k, name) in OrderingCosts::NAMES.iter().enumerate() {
        let pick = |g: Group| -> Vec<f64> {
            report
                .drawings
                .iter()
                .filter(|d| d.group == g && !d.ordering.warning)
                .map(|d| d.ordering.values()[k])
                .collect()
        };
        ordering_tests.insert(
            (*name).into(),
            u_test(&pick(Group::Novice), &pick(Group::Professional)),
        );
    }
    json!({
        "format_version": FORMAT_VERSION,
        "drawings": report.drawings.len(),
        "valid": report.drawings.iter().filter(|d| d.errors.valid).count(),
        "config": config,
        "groups": Value::Object(groups),
        "ordering_u_tests_novice_vs_professional": Value::Object(ordering_tests),
        "cdr": report.cdr,
    })
}

/// Writes `drawings.csv`, `temporal.csv`, `ordering.csv`, `histograms.csv`,
/// `temporal_summary.csv`, `ordering_summary.csv` and `summary.json` into `out_dir`.
pub fn emit_report(
    report: &DatasetReport,
    out_dir: impl AsRef<Path>,
    config: &AnalysisConfig,
) -> Result<()> {
    let dir = out_dir.as_ref();
    if !dir.is_dir() {
        return Err(Error::io(
            dir,
            std::io::Error::new(
                std::io::ErrorKind::NotFound,
                "output directory does not exist",
            ),
        ));
    }

    let mut drawings = Table::new(&strings(&DRAWINGS_HEADER))?;
    let mut temporal = Table::new(&temporal_header())?;
    let mut ordering = Table::new(&strings(&[
        "prompt_id",
        "user_id",
        "group",
        "simplicity",
        "proximity",
        "collinearity",
        "anchoring",
        "warning",
    ]))?;
    for d in &report.drawings {
        let id = [
            d.prompt_id.clone(),
            d.user_id.clone(),
            d.group.as_str().to_string(),
        ];
        let mut row = id.to_vec();
        row.extend([
            d.scaffold.to_string(),
            num(d.e_star),
            d.errors.valid.to_string(),
        ]);
        row.extend(d.errors.values().iter().map(|&v| num(v)));
        row.extend([d.valid_strokes.to_string(), d.strokes.to_string()]);
        drawings.row(&row)?;

        let mut row = id.to_vec();
        match &d.temporal {
            Some(t) => {
                for c in &t.correlations {
                    row.extend([opt(c.rho), opt(c.p), c.class.as_str().to_string()]);
                }
                for f in [t.stroke_x, t.stroke_y] {
                    row.extend([num(f.positive), num(f.negative), num(f.none)]);
                }
                row.push(
                    t.bin_counts
                        .iter()
                        .map(|c| c.to_string())
                        .collect::<Vec<_>>()
                        .join(";"),
                );
            }
            None => {
                for _ in TEMPORAL_FEATURES {
                    row.extend([String::new(), String::new(), "none".to_string()]);
                }
                row.extend(std::iter::repeat_n(String::new(), 7));
            }
        }
        temporal.row(&row)?;

        let mut row = id.to_vec();
        row.extend(d.ordering.values().iter().map(|&v| num(v)));
        row.push(d.ordering.warning.to_string());
        ordering.row(&row)?;
    }

    let mut histograms = Table::new(&strings(&[
        "name",
        "prompt_id",
        "group",
        "bin_start",
        "bin_end",
        "count",
    ]))?;
    for h in &report.histograms {
        for (i, &c) in h.histogram.counts.iter().enumerate() {
            histograms.row(&[
                h.name.clone(),
                h.prompt_id.clone(),
                h.group.clone(),
                num(h.histogram.bin_edges[i]),
                num(h.histogram.bin_edges[i + 1]),
                c.to_string(),
            ])?;
        }
    }

    let mut temporal_summary = Table::new(&temporal_summary_header())?;
    let mut ordering_summary = Table::new(&ordering_summary_header())?;
    for g in groups_present(report) {
        let members: Vec<&DrawingRecord> =
            report.drawings.iter().filter(|d| d.group == g).collect();
        let profiles: Vec<&TemporalProfile> =
            members.iter().filter_map(|d| d.temporal.as_ref()).collect();
        let n = profiles.len().max(1) as f64;
        let mut row = vec![g.as_str().to_string(), profiles.len().to_string()];
        for (k, _) in TEMPORAL_FEATURES.iter().enumerate() {
            for class in [
                CorrelationClass::Positive,
                CorrelationClass::Negative,
                CorrelationClass::None,
            ] {
                let count = profiles
                    .iter()
                    .filter(|p| p.correlations[k].class == class)
                    .count();
                row.push(num(count as f64 / n));
            }
        }
        for pick in [
            |p: &TemporalProfile| p.stroke_x,
            |p: &TemporalProfile| p.stroke_y,
        ] {
            let fr: Vec<_> = profiles.iter().map(|p| pick(p)).collect();
            row.push(num(fr.iter().map(|f| f.positive).sum::<f64>() / n));
            row.push(num(fr.iter().map(|f| f.negative).sum::<f64>() / n));
            row.push(num(fr.iter().map(|f| f.none).sum::<f64>() / n));
        }
        temporal_summary.row(&row)?;

        let costs: Vec<[f64; 4]> = members
            .iter()
            .filter(|d| !d.ordering.warning)
            .map(|d| d.ordering.values())
            .collect();
        let mut row = vec![g.as_str().to_string(), costs.len().to_string()];
        for k in 0..4 {
            let (m, sd) = mean_sd(&costs.iter().map(|c| c[k]).collect::<Vec<_>>());
            row.extend([num(m), num(sd)]);
        }
        ordering_summary.row(&row)?;
    }

    drawings.save(&dir.join("drawings.csv"))?;
    temporal.save(&dir.join("temporal.csv"))?;
    ordering.save(&dir.join("ordering.csv"))?;
    histograms.save(&dir.join("histograms.csv"))?;
    temporal_summary.save(&dir.join("temporal_summary.csv"))?;
    ordering_summary.save(&dir.join("ordering_summary.csv"))?;
    write_json(dir.join("summary.json"), &summary_json(report, config))
}
