//! Batch front end: registration, multi-level fitting, analysis, disturber training and synthesis.

pub mod config;
pub mod dataset;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use config::Config;
use dataset::{Tracings, LEVELS_SUFFIX, REGISTERED_SUFFIX, SCORES_SUFFIX, TRACINGS_DIR};
use rayon::prelude::*;
use sketchkit::analysis::{
    analyze_drawing, cdr_records, compare_line_image, emit_report, group_histograms, DatasetReport,
};
use sketchkit::io::{write_atomic, write_json};
use sketchkit::pixreg::{register_pixel_level, RegistrationResult};
use sketchkit::raster::{rasterize, RasterImage};
use sketchkit::simfit::{fit_levels, Level, MultiLevelRegistration};
use sketchkit::synthesis::{
    build_training_pairs, synthesize_detailed, train_disturber, DisturberKind, DisturberModel,
    DisturberSet, FallbackParams,
};
use sketchkit::{export, load_sketch, save_sketch, Error, Group, Sketch};
use std::ffi::OsString;
use std::path::{Path, PathBuf};

pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (format version 1)");

#[derive(Debug, Parser)]
#[command(name = "sketchkit", version = VERSION, about = "Registration, analysis and synthesis of vector sketches")]
pub struct Cli {
    /// JSON configuration file; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pixel-level registration of one drawing, or of every drawing in a dataset directory.
    Register(RegisterArgs),
    /// Sketch- and stroke-level similarity fits between a drawing and its pixel-level registration.
    FitLevels(FitLevelsArgs),
    /// Dataset metrics as CSV tables and a JSON summary.
    Analyze(AnalyzeArgs),
    /// Precision and recall of an external line image against registered drawings.
    CompareSynthetic(CompareArgs),
    /// Trains the extrinsic, intrinsic and point disturbers for one style.
    TrainDisturbers(TrainArgs),
    /// Generates a freehand-style sketch from a tracing.
    Synthesize(SynthesizeArgs),
    /// Renders a sketch to a PNG line image.
    Rasterize(RasterizeArgs),
    /// Writes a sketch as SVG.
    ExportSvg(ExportSvgArgs),
}

#[derive(Debug, Args)]
pub struct RegisterArgs {
    #[arg(long, conflicts_with = "dataset", requires = "tracing")]
    pub sketch: Option<PathBuf>,
    #[arg(long)]
    pub tracing: Option<PathBuf>,
    /// Directory of drawings; tracings are looked up by prompt.
    #[arg(long, required_unless_present = "sketch")]
    pub dataset: Option<PathBuf>,
    /// Tracing directory for dataset mode [default: DATASET/tracings].
    #[arg(long, requires = "dataset")]
    pub tracings: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub tolerance: Option<u32>,
    /// Also write a width-1 PNG of every iteration.
    #[arg(long)]
    pub snapshots: bool,
    /// Worker threads for dataset mode.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct FitLevelsArgs {
    #[arg(long)]
    pub original: PathBuf,
    #[arg(long)]
    pub registered: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Include scaffold strokes in the sketch-level fit.
    #[arg(long)]
    pub all_strokes: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub tracings: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub tolerance: Option<u32>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub image: PathBuf,
    /// Directory holding `.levels.json` sidecars.
    #[arg(long)]
    pub registered: PathBuf,
    #[arg(long, value_parser = parse_level)]
    pub level: Level,
    /// Only drawings of this prompt.
    #[arg(long)]
    pub prompt: Option<String>,
    #[arg(long)]
    pub tolerance: Option<u32>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Registered dataset; without it only `--statistical` models can be written.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub tracings: Option<PathBuf>,
    #[arg(long, value_parser = parse_style)]
    pub style: Group,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write distribution-based models instead of trained networks.
    #[arg(long)]
    pub statistical: bool,
}

#[derive(Debug, Args)]
pub struct SynthesizeArgs {
    #[arg(long)]
    pub tracing: PathBuf,
    #[arg(long, value_parser = parse_style)]
    pub style: Group,
    #[arg(long, default_value_t = 0.2)]
    pub n1: f64,
    #[arg(long, default_value_t = 0.2)]
    pub n2: f64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub models: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub svg: Option<PathBuf>,
    #[arg(long)]
    pub eps_c: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RasterizeArgs {
    #[arg(long)]
    pub sketch: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub width: u32,
    /// Draw scaffold strokes too.
    #[arg(long)]
    pub all_strokes: bool,
}

#[derive(Debug, Args)]
pub struct ExportSvgArgs {
    #[arg(long)]
    pub sketch: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_level(s: &str) -> Result<Level, String> {
    match s.parse::<Level>() {
        Ok(Level::Original) | Err(_) => Err(format!("expected sketch, stroke or pixel, got {s:?}")),
        Ok(level) => Ok(level),
    }
}

fn parse_style(s: &str) -> Result<Group, String> {
    match s.parse::<Group>() {
        Ok(g @ (Group::Novice | Group::Professional)) => Ok(g),
        _ => Err(format!("expected novice|professional (or N|P), got {s:?}")),
    }
}

/// Exit status for an error: 2 for file-system failures, 1 for everything else.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return if e.is_io() { 2 } else { 1 };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<csv::Error>() {
            return if e.is_io_error() { 2 } else { 1 };
        }
    }
    1
}

/// Parses `argv` (program name first), runs the subcommand and returns the exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    let config = Config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Register(a) => register(a, config),
        Command::FitLevels(a) => fit_levels_cmd(a, config),
        Command::Analyze(a) => analyze(a, config),
        Command::CompareSynthetic(a) => compare_synthetic(a, config),
        Command::TrainDisturbers(a) => train(a, config),
        Command::Synthesize(a) => synthesize(a, config),
        Command::Rasterize(a) => rasterize_cmd(a, config),
        Command::ExportSvg(a) => export_svg(a, config),
    }
}

fn progress(fields: &[(&str, String)]) {
    let line: Vec<String> = fields.iter().map(|(k, v)| format!("{k}={v}")).collect();
    eprintln!("{}", line.join(" "));
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

/// Directory containing an output file, created when missing.
fn parent_dir(file: &Path) -> Result<PathBuf> {
    let dir = match file.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    create_dir(&dir)?;
    Ok(dir)
}

fn file_stem(path: &Path) -> Result<String> {
    match path.file_name().and_then(|n| n.to_str()) {
        Some(name) => Ok(name.strip_suffix(".json").unwrap_or(name).to_string()),
        None => bail!(Error::Validation(format!(
            "{} has no file name",
            path.display()
        ))),
    }
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    if jobs == 0 {
        bail!(Error::Validation("--jobs must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("starting worker threads")
}

fn write_registration(
    dir: &Path,
    name: &str,
    result: &RegistrationResult,
    snapshots: bool,
    content_only: bool,
) -> Result<()> {
    save_sketch(
        &result.registered,
        dir.join(format!("{name}{REGISTERED_SUFFIX}")),
    )?;
    write_json(
        dir.join(format!("{name}{SCORES_SUFFIX}")),
        &result.summary(),
    )?;
    if snapshots {
        for (sketch, score) in &result.per_iteration {
            let png = rasterize(sketch, 1, content_only).encode_png()?;
            write_atomic(dir.join(format!("{name}.iter{:02}.png", score.i)), &png)?;
        }
    }
    Ok(())
}

fn register(a: RegisterArgs, mut config: Config) -> Result<()> {
    if let Some(v) = a.iters {
        config.registration.iterations = v;
        config.registration.width_schedule = None;
    }
    if let Some(v) = a.omega {
        config.registration.omega = v;
    }
    if let Some(v) = a.tolerance {
        config.registration.tolerance = v;
    }
    config.io.dataset = a.dataset.clone();
    config.io.output = Some(a.out_dir.clone());
    config.validate()?;
    create_dir(&a.out_dir)?;
    let reg = &config.registration;

    if let Some(sketch_path) = &a.sketch {
        let tracing_path = a.tracing.as_ref().expect("clap requires --tracing");
        let sketch = load_sketch(sketch_path)?;
        let tracing = load_sketch(tracing_path)?;
        let result = register_pixel_level(&sketch, &tracing, reg)?;
        let name = file_stem(sketch_path)?;
        write_registration(&a.out_dir, &name, &result, a.snapshots, reg.content_only)?;
        config.echo(&a.out_dir)?;
        progress(&[
            ("register", name),
            ("chosen", result.chosen.to_string()),
            ("e_star", result.e_star().to_string()),
        ]);
        return Ok(());
    }

    let dir = a.dataset.as_ref().expect("clap requires --dataset");
    let mut tracings = Tracings::new(a.tracings.clone().unwrap_or_else(|| dir.join(TRACINGS_DIR)));
    let mut jobs = Vec::new();
    for (name, path) in dataset::drawings(dir)? {
        let sketch = load_sketch(&path)?;
        let tracing = tracings.get(&sketch.prompt_id)?.clone();
        jobs.push((name, sketch, tracing));
    }
    progress(&[
        ("register", "dataset".into()),
        ("drawings", jobs.len().to_string()),
    ]);
    let results: Vec<Result<(RegistrationResult, MultiLevelRegistration)>> = thread_pool(a.jobs)?
        .install(|| {
            jobs.par_iter()
                .map(|(name, sketch, tracing)| {
                    let result = register_pixel_level(sketch, tracing, reg)
                        .with_context(|| format!("registering {name}"))?;
                    let levels = fit_levels(sketch, &result.registered, reg.content_only)
                        .with_context(|| format!("fitting levels of {name}"))?;
                    Ok((result, levels))
                })
                .collect()
        });
    for ((name, _, _), outcome) in jobs.iter().zip(results) {
        let (result, levels) = outcome?;
        write_registration(&a.out_dir, name, &result, a.snapshots, reg.content_only)?;
        write_json(
            a.out_dir.join(format!("{name}{LEVELS_SUFFIX}")),
            &levels.to_json_value(),
        )?;
        progress(&[
            ("register", name.clone()),
            ("chosen", result.chosen.to_string()),
            ("e_star", result.e_star().to_string()),
        ]);
    }
    config.echo(&a.out_dir)?;
    Ok(())
}

fn fit_levels_cmd(a: FitLevelsArgs, mut config: Config) -> Result<()> {
    config.io.output = Some(a.out.clone());
    config.registration.content_only = !a.all_strokes;
    config.validate()?;
    let original = load_sketch(&a.original)?;
    let registered = load_sketch(&a.registered)?;
    let levels = fit_levels(&original, &registered, !a.all_strokes)?;
    let dir = parent_dir(&a.out)?;
    write_json(&a.out, &levels.to_json_value())?;
    config.echo(&dir)?;
    let g = levels.global;
    progress(&[
        ("fit-levels", file_stem(&a.original)?),
        ("theta_deg", g.theta_deg.to_string()),
        ("scale", g.scale.to_string()),
        ("strokes", levels.local.len().to_string()),
    ]);
    Ok(())
}

fn analyze(a: AnalyzeArgs, mut config: Config) -> Result<()> {
    if let Some(v) = a.rho {
        config.analysis.rho = v;
    }
    if let Some(v) = a.tolerance {
        config.analysis.tolerance = v;
    }
    config.io.dataset = Some(a.dataset.clone());
    config.io.output = Some(a.out.clone());
    config.validate()?;
    let mut tracings = Tracings::new(
        a.tracings
            .clone()
            .unwrap_or_else(|| a.dataset.join(TRACINGS_DIR)),
    );
    let entries = dataset::load_entries(&a.dataset, &mut tracings)?;
    let cfg = &config.analysis;
    let mut order: Vec<usize> = (0..entries.len()).collect();
    order.sort_by_key(|&i| {
        let o = &entries[i].original;
        (o.prompt_id.clone(), o.user_id.clone(), o.group.as_str())
    });
    let drawings = thread_pool(a.jobs)?.install(|| {
        order
            .par_iter()
            .map(|&i| analyze_drawing(&entries[i], cfg))
            .collect::<sketchkit::Result<Vec<_>>>()
    })?;
    let report = DatasetReport {
        drawings,
        histograms: group_histograms(&entries, cfg)?,
        cdr: cdr_records(&entries, cfg)?,
    };
    create_dir(&a.out)?;
    emit_report(&report, &a.out, cfg)?;
    config.echo(&a.out)?;
    let valid = report.drawings.iter().filter(|d| d.errors.valid).count();
    progress(&[
        ("analyze", a.dataset.display().to_string()),
        ("drawings", report.drawings.len().to_string()),
        ("valid", valid.to_string()),
    ]);
    Ok(())
}

fn compare_synthetic(a: CompareArgs, mut config: Config) -> Result<()> {
    if let Some(v) = a.tolerance {
        config.analysis.tolerance = v;
    }
    config.io.dataset = Some(a.registered.clone());
    config.io.output = Some(a.out.clone());
    config.validate()?;
    let image = RasterImage::load(&a.image)?;
    let level_name = match a.level {
        Level::Original => "original",
        Level::Pixel => "pixel",
        Level::Sketch => "sketch",
        Level::Stroke => "stroke",
    };
    let mut files: Vec<PathBuf> = std::fs::read_dir(&a.registered)
        .map_err(|e| Error::Io {
            path: a.registered.clone(),
            source: e,
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.to_str().is_some_and(|s| s.ends_with(LEVELS_SUFFIX)))
        .collect();
    files.sort();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "name",
        "prompt_id",
        "user_id",
        "group",
        "level",
        "precision",
        "recall",
    ])?;
    let mut rows = 0;
    for path in &files {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
        let levels = MultiLevelRegistration::from_json_str(&text, &path.display().to_string())?;
        let sketch: &Sketch = levels.level(a.level);
        if a.prompt.as_ref().is_some_and(|p| *p != sketch.prompt_id) {
            continue;
        }
        let (precision, recall) = compare_line_image(&image, sketch, config.analysis.tolerance)
            .with_context(|| format!("comparing against {}", path.display()))?;
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default();
        let name = name.strip_suffix(LEVELS_SUFFIX).unwrap_or(name);
        w.write_record([
            name,
            &sketch.prompt_id,
            &sketch.user_id,
            sketch.group.as_str(),
            level_name,
            &precision.to_string(),
            &recall.to_string(),
        ])?;
        rows += 1;
    }
    let bytes = w.into_inner().context("finishing CSV")?;
    let dir = parent_dir(&a.out)?;
    write_atomic(&a.out, &bytes)?;
    config.echo(&dir)?;
    progress(&[
        ("compare-synthetic", a.image.display().to_string()),
        ("rows", rows.to_string()),
    ]);
    Ok(())
}

fn train(a: TrainArgs, mut config: Config) -> Result<()> {
    if let Some(seed) = a.seed {
        config.synthesis.training.seed = seed;
    }
    config.io.dataset = a.dataset.clone();
    config.io.output = Some(a.out.clone());
    config.validate()?;
    let models = match &a.dataset {
        None if a.statistical => DisturberSet::statistical(a.style, &FallbackParams::default()),
        None => bail!(Error::Validation(
            "--dataset is required unless --statistical is given".into()
        )),
        Some(dir) => {
            let mut tracings =
                Tracings::new(a.tracings.clone().unwrap_or_else(|| dir.join(TRACINGS_DIR)));
            let entries = dataset::load_entries(dir, &mut tracings)?;
            let sets = build_training_pairs(&entries, Some(a.style), &config.analysis)?;
            if a.statistical {
                DisturberSet::statistical(a.style, &FallbackParams::fit(&sets))
            } else {
                let mut trained: Vec<DisturberModel> = Vec::new();
                for kind in DisturberKind::ALL {
                    let set = sets.get(kind);
                    progress(&[
                        ("train", kind.to_string()),
                        ("pairs", set.pairs.len().to_string()),
                    ]);
                    trained.push(train_disturber(
                        set,
                        kind,
                        a.style,
                        &config.synthesis.training,
                    )?);
                }
                let mut it = trained.into_iter();
                DisturberSet {
                    extrinsic: it.next().expect("three kinds"),
                    intrinsic: it.next().expect("three kinds"),
                    point: it.next().expect("three kinds"),
                }
            }
        }
    };
    create_dir(&a.out)?;
    models.save(&a.out)?;
    config.echo(&a.out)?;
    progress(&[
        ("train-disturbers", a.style.to_string()),
        ("out", a.out.display().to_string()),
    ]);
    Ok(())
}

fn synthesize(a: SynthesizeArgs, mut config: Config) -> Result<()> {
    if let Some(v) = a.eps_c {
        config.synthesis.connection_threshold = v;
    }
    config.io.output = Some(a.out.clone());
    config.validate()?;
    let tracing = load_sketch(&a.tracing)?;
    let models = DisturberSet::load(&a.models, a.style)?;
    let result = synthesize_detailed(&tracing, &models, a.n1, a.n2, a.seed, &config.synthesis)?;
    let dir = parent_dir(&a.out)?;
    save_sketch(&result.sketch, &a.out)?;
    if let Some(svg) = &a.svg {
        let svg_dir = parent_dir(svg)?;
        export::export_svg(&result.sketch, svg)?;
        if svg_dir != dir {
            config.echo(&svg_dir)?;
        }
    }
    config.echo(&dir)?;
    progress(&[
        ("synthesize", file_stem(&a.tracing)?),
        ("connections", result.connections.to_string()),
        ("broken", result.broken_connections.to_string()),
        ("passes", result.layout_passes.to_string()),
    ]);
    Ok(())
}

fn rasterize_cmd(a: RasterizeArgs, mut config: Config) -> Result<()> {
    if a.width == 0 || a.width > 50 {
        bail!(Error::Validation("--width must be in 1..=50".into()));
    }
    config.io.output = Some(a.out.clone());
    config.validate()?;
    let sketch = load_sketch(&a.sketch)?;
    let png = rasterize(&sketch, a.width, !a.all_strokes).encode_png()?;
    let dir = parent_dir(&a.out)?;
    write_atomic(&a.out, &png)?;
    config.echo(&dir)?;
    progress(&[
        ("rasterize", file_stem(&a.sketch)?),
        ("width", a.width.to_string()),
    ]);
    Ok(())
}

fn export_svg(a: ExportSvgArgs, mut config: Config) -> Result<()> {
    config.io.output = Some(a.out.clone());
    config.validate()?;
    let sketch = load_sketch(&a.sketch)?;
    let dir = parent_dir(&a.out)?;
    export::export_svg(&sketch, &a.out)?;
    config.echo(&dir)?;
    progress(&[("export-svg", file_stem(&a.sketch)?)]);
    Ok(())
}
