//! Pixel-level registration: iterative rasterize-and-warp of a vector sketch onto its tracing.
//!
//! Each iteration rasterizes the current vector sketch and the tracing at
//! the scheduled line width, estimates a dense displacement field between the
//! two rasters, and moves the sketch's points through it. Every iteration is
//! scored as `E = omega * P + R` on width-1 rasters and the best one wins.

mod demons;
mod field;

pub use demons::{estimate_displacement, estimate_displacement_traced, Estimate, EstimatorConfig};
pub use field::{apply_displacement, DisplacementField};

use crate::error::{Error, Result};
use crate::raster::{check_same_dims, rasterize, RasterImage};
use crate::sketch::{Sketch, FORMAT_VERSION};
use serde::{Deserialize, Serialize};

pub const DEFAULT_OMEGA: f64 = 1.1;
pub const DEFAULT_ITERATIONS: usize = 10;
pub const DEFAULT_TOLERANCE: u32 = 1;

/// Precision, recall and combined score of a registered raster against a tracing raster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Overlap {
    #[serde(rename = "P")]
    pub precision: f64,
    #[serde(rename = "R")]
    pub recall: f64,
    #[serde(rename = "E")]
    pub e: f64,
}

/// Scores `registered` against `tracing`.
///
/// A registered pixel counts toward precision when a tracing pixel lies
/// within Chebyshev distance `tolerance`; a tracing pixel counts toward recall
/// when a registered pixel lies within the same distance. With tolerance 0
/// both counts are the plain intersection.
pub fn score(
    registered: &RasterImage,
    tracing: &RasterImage,
    omega: f64,
    tolerance: u32,
) -> Result<Overlap> {
    check_same_dims(registered, tracing)?;
    let trac_num = tracing.foreground_count();
    if trac_num == 0 {
        return Err(Error::EmptyRaster);
    }
    let reg_mask = registered.mask();
    let trac_mask = tracing.mask();
    let reg_num = reg_mask.iter().filter(|&&v| v).count();
    let near_tracing = tracing.dilate_chebyshev(tolerance);
    let near_registered = registered.dilate_chebyshev(tolerance);
    let overlap_reg = reg_mask
        .iter()
        .zip(&near_tracing)
        .filter(|(&a, &b)| a && b)
        .count();
    let overlap_trac = trac_mask
        .iter()
        .zip(&near_registered)
        .filter(|(&a, &b)| a && b)
        .count();
    let precision = if reg_num == 0 {
        0.0
    } else {
        overlap_reg as f64 / reg_num as f64
    };
    let recall = overlap_trac as f64 / trac_num as f64;
    Ok(Overlap {
        precision,
        recall,
        e: omega * precision + recall,
    })
}

/// Line width per iteration: 1 for the first six iterations, then growing by one.
///
/// With 0-based iteration `k` the width is 1 for `k < 5` and `k - 4` afterwards.
pub fn default_width_schedule(iterations: usize) -> Vec<u32> {
    (0..iterations)
        .map(|k| if k < 5 { 1 } else { (k - 4) as u32 })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegistrationConfig {
    pub iterations: usize,
    pub omega: f64,
    /// Chebyshev overlap tolerance used by scoring.
    pub tolerance: u32,
    /// Explicit per-iteration line widths; the default schedule is used when absent.
    pub width_schedule: Option<Vec<u32>>,
    /// Rasterize content strokes only (scaffolds still move with the field).
    pub content_only: bool,
    pub estimator: EstimatorConfig,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        RegistrationConfig {
            iterations: DEFAULT_ITERATIONS,
            omega: DEFAULT_OMEGA,
            tolerance: DEFAULT_TOLERANCE,
            width_schedule: None,
            content_only: true,
            estimator: EstimatorConfig::default(),
        }
    }
}

impl RegistrationConfig {
    pub fn widths(&self) -> Vec<u32> {
        self.width_schedule
            .clone()
            .unwrap_or_else(|| default_width_schedule(self.iterations))
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.iterations > 100 {
            return Err(Error::Validation("iterations must be in 1..=100".into()));
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::Validation("omega must be positive".into()));
        }
        if self.tolerance > 10 {
            return Err(Error::Validation("tolerance must be in 0..=10".into()));
        }
        if let Some(ws) = &self.width_schedule {
            if ws.len() != self.iterations || ws.iter().any(|&w| w == 0 || w > 50) {
                return Err(Error::Validation(
                    "width schedule needs one width in 1..=50 per iteration".into(),
                ));
            }
        }
        self.estimator.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationScore {
    /// 1-based iteration number.
    pub i: usize,
    /// Line width used for this iteration's rasterization.
    pub l: u32,
    #[serde(flatten)]
    pub overlap: Overlap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationResult {
    /// Sketch snapshot after each iteration with its score.
    pub per_iteration: Vec<(Sketch, IterationScore)>,
    /// 1-based index of the chosen iteration.
    pub chosen: usize,
    pub registered: Sketch,
    pub omega: f64,
    pub tolerance: u32,
}

impl RegistrationResult {
    pub fn chosen_score(&self) -> &IterationScore {
        &self.per_iteration[self.chosen - 1].1
    }

    /// The combined score of the chosen iteration.
    pub fn e_star(&self) -> f64 {
        self.chosen_score().overlap.e
    }

    pub fn summary(&self) -> RegistrationSummary {
        RegistrationSummary {
            format_version: FORMAT_VERSION,
            omega: self.omega,
            tolerance: self.tolerance,
            chosen: self.chosen,
            iterations: self.per_iteration.iter().map(|(_, s)| *s).collect(),
        }
    }
}

/// JSON form of a registration run: per-iteration scores and the chosen iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistrationSummary {
    pub format_version: u32,
    pub omega: f64,
    pub tolerance: u32,
    pub chosen: usize,
    pub iterations: Vec<IterationScore>,
}

impl RegistrationSummary {
    pub fn e_star(&self) -> Option<f64> {
        self.iterations
            .iter()
            .find(|s| s.i == self.chosen)
            .map(|s| s.overlap.e)
    }
}

/// 1-based index of the first maximum of `e`.
pub fn select_iteration(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &e) in scores.iter().enumerate() {
        if e > scores[best] {
            best = i;
        }
    }
    best + 1
}

/// Registers `sketch` onto `tracing` and keeps the best-scoring iteration.
pub fn register_pixel_level(
    sketch: &Sketch,
    tracing: &Sketch,
    config: &RegistrationConfig,
) -> Result<RegistrationResult> {
    config.validate()?;
    if sketch.canvas != tracing.canvas {
        return Err(Error::DimensionMismatch {
            left: sketch.canvas,
            right: tracing.canvas,
        });
    }
    let tracing_thin = rasterize(tracing, 1, config.content_only);
    if tracing_thin.is_blank() {
        return Err(Error::EmptySketch("tracing has no drawable strokes".into()));
    }
    if rasterize(sketch, 1, config.content_only).is_blank() {
        return Err(Error::EmptySketch("sketch has no drawable strokes".into()));
    }
    let mut current = sketch.clone();
    let mut per_iteration = Vec::with_capacity(config.iterations);
    for (k, &width) in config.widths().iter().enumerate() {
        let moving = rasterize(&current, width, config.content_only);
        if !moving.is_blank() {
            let fixed = rasterize(tracing, width, config.content_only);
            let field = estimate_displacement(&moving, &fixed, &config.estimator)?;
            current = apply_displacement(&current, &field);
        }
        let overlap = score(
            &rasterize(&current, 1, config.content_only),
            &tracing_thin,
            config.omega,
            config.tolerance,
        )?;
        log::debug!(
            "iteration {} width {} P={:.4} R={:.4} E={:.4}",
            k + 1,
            width,
            overlap.precision,
            overlap.recall,
            overlap.e
        );
        per_iteration.push((
            current.clone(),
            IterationScore {
                i: k + 1,
                l: width,
                overlap,
            },
        ));
    }
    let es: Vec<f64> = per_iteration.iter().map(|(_, s)| s.overlap.e).collect();
    let chosen = select_iteration(&es);
    Ok(RegistrationResult {
        registered: per_iteration[chosen - 1].0.clone(),
        per_iteration,
        chosen,
        omega: config.omega,
        tolerance: config.tolerance,
    })
}
