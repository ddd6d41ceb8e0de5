//! Temporal drawing statistics over per-pixel timestamps.

use super::stats::spearman;
use crate::error::{Error, Result};
use crate::geom::{self, Vec2};
use crate::raster::{timed_stroke_pixels, TimedPixel};
use crate::sketch::Sketch;
use serde::{Deserialize, Serialize};

pub const TEMPORAL_BINS: usize = 25;
pub const TEMPORAL_FEATURES: [&str; 5] = ["bin_count", "x", "y", "center_dist", "pressure"];
const SIGNIFICANCE: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationClass {
    Positive,
    Negative,
    None,
}

impl CorrelationClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            CorrelationClass::Positive => "positive",
            CorrelationClass::Negative => "negative",
            CorrelationClass::None => "none",
        }
    }
}

/// Significant positive or negative correlation at `p < 0.001`, otherwise none.
pub fn classify(rho: f64, p: f64) -> CorrelationClass {
    if p < SIGNIFICANCE && rho > 0.0 {
        CorrelationClass::Positive
    } else if p < SIGNIFICANCE && rho < 0.0 {
        CorrelationClass::Negative
    } else {
        CorrelationClass::None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureCorrelation {
    pub feature: String,
    /// `None` when the correlation is undefined (constant feature or too few samples).
    pub rho: Option<f64>,
    pub p: Option<f64>,
    pub class: CorrelationClass,
}

fn correlate(feature: &str, values: &[f64], times: &[f64]) -> FeatureCorrelation {
    match spearman(values, times) {
        Ok((rho, p)) => FeatureCorrelation {
            feature: feature.to_string(),
            rho: Some(rho),
            p: Some(p),
            class: classify(rho, p),
        },
        Err(_) => FeatureCorrelation {
            feature: feature.to_string(),
            rho: None,
            p: None,
            class: CorrelationClass::None,
        },
    }
}

/// Fractions of strokes in each correlation class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassFractions {
    pub positive: f64,
    pub negative: f64,
    pub none: f64,
}

impl ClassFractions {
    pub fn from_classes(classes: &[CorrelationClass]) -> Self {
        if classes.is_empty() {
            return ClassFractions::default();
        }
        let n = classes.len() as f64;
        let count = |c: CorrelationClass| classes.iter().filter(|&&k| k == c).count() as f64 / n;
        ClassFractions {
            positive: count(CorrelationClass::Positive),
            negative: count(CorrelationClass::Negative),
            none: count(CorrelationClass::None),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalProfile {
    /// Pixels drawn in each of the equal-duration bins.
    pub bin_counts: Vec<u64>,
    /// One entry per feature in [`TEMPORAL_FEATURES`] order.
    pub correlations: Vec<FeatureCorrelation>,
    /// Per-stroke x-versus-time classes aggregated over strokes.
    pub stroke_x: ClassFractions,
    pub stroke_y: ClassFractions,
}

impl TemporalProfile {
    pub fn correlation(&self, feature: &str) -> Option<&FeatureCorrelation> {
        self.correlations.iter().find(|c| c.feature == feature)
    }
}

/// Temporal profile of the content strokes of a raw drawing.
///
/// Pixels come from width-1 rasterization with timestamps interpolated along
/// arc length. `bin_count` correlates the 25 bin counts with the bin index;
/// the spatial features and pressure correlate per pixel with its timestamp.
pub fn temporal_profile(sketch: &Sketch) -> Result<TemporalProfile> {
    let content = sketch.content_only();
    let pixels: Vec<Vec<TimedPixel>> = content
        .strokes
        .iter()
        .map(|s| timed_stroke_pixels(s, sketch.canvas))
        .collect();
    let all: Vec<&TimedPixel> = pixels.iter().flatten().collect();
    let (t0, t1) = all
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.t), hi.max(p.t))
        });
    if all.is_empty() || !(t1 > t0) {
        return Err(Error::InsufficientData("drawing has no duration".into()));
    }
    let duration = t1 - t0;
    let mut bin_counts = vec![0u64; TEMPORAL_BINS];
    for p in &all {
        let b = (((p.t - t0) / duration) * TEMPORAL_BINS as f64).floor() as usize;
        bin_counts[b.min(TEMPORAL_BINS - 1)] += 1;
    }

    let center = geom::centroid(&content.positions());
    let times: Vec<f64> = all.iter().map(|p| p.t).collect();
    let xs: Vec<f64> = all.iter().map(|p| p.x as f64).collect();
    let ys: Vec<f64> = all.iter().map(|p| p.y as f64).collect();
    let dists: Vec<f64> = all
        .iter()
        .map(|p| Vec2::new(p.x as f64, p.y as f64).dist(center))
        .collect();
    let pressures: Vec<f64> = all.iter().map(|p| p.pressure).collect();
    let bin_index: Vec<f64> = (0..TEMPORAL_BINS).map(|b| b as f64).collect();
    let counts_f: Vec<f64> = bin_counts.iter().map(|&c| c as f64).collect();
    let correlations = vec![
        correlate("bin_count", &counts_f, &bin_index),
        correlate("x", &xs, &times),
        correlate("y", &ys, &times),
        correlate("center_dist", &dists, &times),
        correlate("pressure", &pressures, &times),
    ];

    let mut sx = Vec::new();
    let mut sy = Vec::new();
    for stroke in &pixels {
        let t: Vec<f64> = stroke.iter().map(|p| p.t).collect();
        let x: Vec<f64> = stroke.iter().map(|p| p.x as f64).collect();
        let y: Vec<f64> = stroke.iter().map(|p| p.y as f64).collect();
        sx.push(correlate("x", &x, &t).class);
        sy.push(correlate("y", &y, &t).class);
    }
    Ok(TemporalProfile {
        bin_counts,
        correlations,
        stroke_x: ClassFractions::from_classes(&sx),
        stroke_y: ClassFractions::from_classes(&sy),
    })
}
