//! Drawing metrics: validity filters, distance histograms, commonly drawn
//! regions, multi-level error statistics, temporal and ordering analysis,
//! and CSV/JSON report emission.

mod ordering;
mod report;
mod stats;
mod temporal;

pub use ordering::{ordering_costs, stroke_complexity, OrderingCosts, OrderingParams};
pub use report::{
    analyze_drawing, cdr_records, emit_report, group_histograms, CdrRecord, DatasetEntry,
    DatasetReport, DrawingRecord, HistogramRecord, DRAWINGS_HEADER,
};
pub use stats::{average_ranks, mann_whitney_u, mean_sd, spearman, spearman_p};
pub use temporal::{
    classify, temporal_profile, ClassFractions, CorrelationClass, FeatureCorrelation,
    TemporalProfile, TEMPORAL_BINS, TEMPORAL_FEATURES,
};

use crate::distance::distance_transform;
use crate::error::{Error, Result};
use crate::geom::{self, Vec2};
use crate::pixreg::{score, RegistrationResult};
use crate::raster::{check_same_dims, rasterize, stroke_pixels, RasterImage};
use crate::simfit::MultiLevelRegistration;
use crate::sketch::Sketch;
use serde::{Deserialize, Serialize};

/// A drawing counts as correctly registered when its chosen score exceeds this.
pub const VALIDITY_THRESHOLD: f64 = 1.2;
/// A stroke is kept for stroke-level statistics when its overlap rate exceeds this.
pub const STROKE_VALID_THRESHOLD: f64 = 0.8;
/// A stroke is an incorrect drawing path when its overlap rate falls below this.
pub const INCORRECT_STROKE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    /// Radius of the commonly drawn region, px.
    pub rho: f64,
    /// Chebyshev overlap tolerance, px.
    pub tolerance: u32,
    pub omega: f64,
    pub distance_bin_width: f64,
    pub distance_max: f64,
    pub rotation_bin_width: f64,
    pub scale_bin_width: f64,
    pub validity_threshold: f64,
    pub stroke_valid_threshold: f64,
    pub incorrect_threshold: f64,
    pub significance: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            rho: 3.0,
            tolerance: 1,
            omega: crate::pixreg::DEFAULT_OMEGA,
            distance_bin_width: 1.0,
            distance_max: 50.0,
            rotation_bin_width: 1.0,
            scale_bin_width: 0.02,
            validity_threshold: VALIDITY_THRESHOLD,
            stroke_valid_threshold: STROKE_VALID_THRESHOLD,
            incorrect_threshold: INCORRECT_STROKE_THRESHOLD,
            significance: 0.001,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return Err(Error::Validation("rho must be non-negative".into()));
        }
        if self.tolerance > 10 {
            return Err(Error::Validation("tolerance must be in 0..=10".into()));
        }
        for (name, v) in [
            ("omega", self.omega),
            ("distance_bin_width", self.distance_bin_width),
            ("rotation_bin_width", self.rotation_bin_width),
            ("scale_bin_width", self.scale_bin_width),
        ] {
            if !positive(v) {
                return Err(Error::Validation(format!("{name} must be positive")));
            }
        }
        if !(self.distance_max > self.distance_bin_width) {
            return Err(Error::Validation(
                "distance_max must exceed the bin width".into(),
            ));
        }
        for (name, v) in [
            ("stroke_valid_threshold", self.stroke_valid_threshold),
            ("incorrect_threshold", self.incorrect_threshold),
            ("significance", self.significance),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Validation(format!("{name} must be in [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Fixed-width histogram. Values beyond the last edge land in the last bin,
/// values below the first edge in the first bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub normalized: bool,
}

impl Histogram {
    /// Bins of `width` covering `[min, max)`; the last bin is widened to reach `max`.
    pub fn uniform(min: f64, max: f64, width: f64) -> Histogram {
        assert!(width > 0.0 && max > min, "invalid histogram range");
        let bins = ((max - min) / width).round().max(1.0) as usize;
        let mut bin_edges: Vec<f64> = (0..bins).map(|i| min + i as f64 * width).collect();
        bin_edges.push(max);
        Histogram {
            bin_edges,
            counts: vec![0; bins],
            normalized: false,
        }
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_of(&self, value: f64) -> usize {
        let last = self.bins() - 1;
        let idx = self.bin_edges[1..].partition_point(|&e| e <= value);
        idx.min(last)
    }

    pub fn add(&mut self, value: f64) {
        let b = self.bin_of(value);
        self.counts[b] += 1;
    }

    pub fn extend(&mut self, values: impl IntoIterator<Item = f64>) {
        for v in values {
            self.add(v);
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Per-bin probability density (integrates to one); all zeros when empty.
    pub fn densities(&self) -> Vec<f64> {
        let total = self.total() as f64;
        self.counts
            .iter()
            .zip(self.bin_edges.windows(2))
            .map(|(&c, e)| {
                if total > 0.0 {
                    c as f64 / (total * (e[1] - e[0]))
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Index of the most populated bin (first on ties).
    pub fn mode_bin(&self) -> usize {
        let mut best = 0;
        for (i, &c) in self.counts.iter().enumerate() {
            if c > self.counts[best] {
                best = i;
            }
        }
        best
    }
}

/// True when the chosen iteration of a registration scores above the validity threshold.
pub fn is_valid_drawing(result: &RegistrationResult) -> bool {
    is_valid_score(result.e_star())
}

pub fn is_valid_score(e_star: f64) -> bool {
    e_star > VALIDITY_THRESHOLD
}

/// Fraction of a stroke's width-1 pixels that lie within `tolerance` of the tracing raster; 0 for strokes with no pixels.
pub fn overlap_rate(
    stroke: &crate::sketch::Stroke,
    canvas: (u32, u32),
    near_tracing: &[bool],
) -> f64 {
    let pixels = stroke_pixels(stroke, 1, canvas);
    if pixels.is_empty() {
        return 0.0;
    }
    let on = pixels
        .iter()
        .filter(|&&(x, y)| near_tracing[(y * canvas.0 + x) as usize])
        .count();
    on as f64 / pixels.len() as f64
}

/// Per-stroke overlap rates of `sketch` against the tracing raster.
pub fn overlap_rates(sketch: &Sketch, tracing: &Sketch, tolerance: u32) -> Result<Vec<f64>> {
    check_canvas(sketch, tracing)?;
    let near = rasterize(tracing, 1, true).dilate_chebyshev(tolerance);
    Ok(sketch
        .strokes
        .iter()
        .map(|s| overlap_rate(s, sketch.canvas, &near))
        .collect())
}

/// Per-stroke flags: true when more than `threshold` of the stroke's pixels overlap the tracing.
pub fn valid_strokes(
    stroke_level: &Sketch,
    tracing: &Sketch,
    threshold: f64,
    tolerance: u32,
) -> Result<Vec<bool>> {
    Ok(overlap_rates(stroke_level, tracing, tolerance)?
        .into_iter()
        .map(|r| r > threshold)
        .collect())
}

fn check_canvas(a: &Sketch, b: &Sketch) -> Result<()> {
    if a.canvas != b.canvas {
        return Err(Error::DimensionMismatch {
            left: a.canvas,
            right: b.canvas,
        });
    }
    Ok(())
}

fn check_group(drawings: &[Sketch], role: &str) -> Result<()> {
    let first = drawings
        .first()
        .ok_or_else(|| Error::InsufficientData(format!("{role} group is empty")))?;
    for d in drawings {
        check_canvas(first, d)?;
        if d.prompt_id != first.prompt_id {
            return Err(Error::Validation(format!(
                "{role} group mixes prompts {:?} and {:?}",
                first.prompt_id, d.prompt_id
            )));
        }
    }
    Ok(())
}

/// Distances from every foreground pixel of the `from` drawings to the nearest foreground pixel of any `to` drawing.
pub fn closest_distances(from: &[Sketch], to: &[Sketch]) -> Result<Vec<f64>> {
    check_group(from, "from")?;
    check_group(to, "to")?;
    check_canvas(&from[0], &to[0])?;
    let mut union = RasterImage::blank(to[0].canvas.0, to[0].canvas.1);
    for d in to {
        union = union.union(&rasterize(d, 1, true))?;
    }
    let dt = distance_transform(&union)?;
    let mut out = Vec::new();
    for d in from {
        out.extend(
            rasterize(d, 1, true)
                .foreground_pixels()
                .into_iter()
                .map(|(x, y)| dt.at(x, y)),
        );
    }
    Ok(out)
}

/// Histogram of [`closest_distances`] with `bin_width` bins up to `max`.
pub fn closest_distance_histogram(
    from: &[Sketch],
    to: &[Sketch],
    bin_width: f64,
    max: f64,
) -> Result<Histogram> {
    let mut h = Histogram::uniform(0.0, max, bin_width);
    h.extend(closest_distances(from, to)?);
    Ok(h)
}

/// Commonly drawn region of registered rasters.
///
/// A pixel belongs to the region when it is foreground in at least one
/// raster and every raster has foreground within Euclidean distance `rho`.
pub fn compute_cdr_rasters(rasters: &[RasterImage], rho: f64) -> Result<RasterImage> {
    if rasters.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "commonly drawn region needs at least 2 drawings, got {}",
            rasters.len()
        )));
    }
    for r in &rasters[1..] {
        check_same_dims(&rasters[0], r)?;
    }
    let (w, h) = rasters[0].dims();
    let mut any = vec![false; (w * h) as usize];
    let mut all_near = vec![true; (w * h) as usize];
    for r in rasters {
        for (a, m) in any.iter_mut().zip(r.mask()) {
            *a |= m;
        }
        match distance_transform(r) {
            Ok(dt) => {
                for (n, &d) in all_near.iter_mut().zip(dt.values()) {
                    *n &= d <= rho;
                }
            }
            Err(Error::EmptyRaster) => all_near.iter_mut().for_each(|n| *n = false),
            Err(e) => return Err(e),
        }
    }
    let mask: Vec<bool> = any.iter().zip(&all_near).map(|(&a, &n)| a && n).collect();
    Ok(RasterImage::from_mask(w, h, &mask))
}

/// Commonly drawn region of registered sketches rasterized at width 1.
pub fn compute_cdr(drawings: &[Sketch], rho: f64) -> Result<RasterImage> {
    let rasters: Vec<RasterImage> = drawings.iter().map(|d| rasterize(d, 1, true)).collect();
    compute_cdr_rasters(&rasters, rho)
}

/// Sketch-level, stroke-level and pixel-level errors of one drawing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrawingErrors {
    #[serde(rename = "E_GR")]
    pub e_gr: f64,
    #[serde(rename = "E_GT")]
    pub e_gt: f64,
    #[serde(rename = "E_GS")]
    pub e_gs: f64,
    #[serde(rename = "E_LR")]
    pub e_lr: f64,
    #[serde(rename = "E_LT")]
    pub e_lt: f64,
    #[serde(rename = "E_LS")]
    pub e_ls: f64,
    #[serde(rename = "E_P")]
    pub e_p: f64,
    pub valid: bool,
}

impl DrawingErrors {
    pub const NAMES: [&'static str; 7] = ["E_GR", "E_GT", "E_GS", "E_LR", "E_LT", "E_LS", "E_P"];

    pub fn values(&self) -> [f64; 7] {
        [
            self.e_gr, self.e_gt, self.e_gs, self.e_lr, self.e_lt, self.e_ls, self.e_p,
        ]
    }
}

/// Centroid of the width-1 foreground of the tracing, used as the object center.
pub fn object_center(tracing: &Sketch) -> Result<Vec2> {
    let fg = rasterize(tracing, 1, true).foreground_pixels();
    if fg.is_empty() {
        return Err(Error::EmptySketch("tracing has no drawable strokes".into()));
    }
    let pts: Vec<Vec2> = fg
        .iter()
        .map(|&(x, y)| Vec2::new(x as f64, y as f64))
        .collect();
    Ok(geom::centroid(&pts))
}

/// Fraction of content strokes whose overlap rate with the tracing is below `incorrect_threshold`.
pub fn pixel_inaccuracy(
    stroke_level: &Sketch,
    tracing: &Sketch,
    incorrect_threshold: f64,
    tolerance: u32,
) -> Result<f64> {
    let rates = overlap_rates(stroke_level, tracing, tolerance)?;
    let content: Vec<f64> = stroke_level
        .strokes
        .iter()
        .zip(rates)
        .filter(|(s, _)| s.is_content())
        .map(|(_, r)| r)
        .collect();
    if content.is_empty() {
        return Ok(0.0);
    }
    Ok(content.iter().filter(|&&r| r < incorrect_threshold).count() as f64 / content.len() as f64)
}

/// Errors of one drawing from its multi-level registration.
///
/// Sketch-level translation is measured about the tracing's object center,
/// stroke-level translation about each stroke's centroid after sketch-level
/// registration. Stroke-level errors average over content strokes.
pub fn scaffold_errors(
    multi: &MultiLevelRegistration,
    tracing: &Sketch,
    e_star: f64,
    config: &AnalysisConfig,
) -> Result<DrawingErrors> {
    let g = multi.global;
    let center = object_center(tracing)?;
    let relative = multi.relative_transforms();
    let (mut lr, mut lt, mut ls, mut n) = (0.0, 0.0, 0.0, 0usize);
    for (stroke, rel) in multi.sketch_level.strokes.iter().zip(&relative) {
        if !stroke.is_content() {
            continue;
        }
        let c = geom::centroid(&stroke.positions());
        lr += rel.theta_deg.abs();
        lt += rel.translation_about(c).norm();
        ls += (rel.scale - 1.0).abs();
        n += 1;
    }
    let k = n.max(1) as f64;
    Ok(DrawingErrors {
        e_gr: g.theta_deg.abs(),
        e_gt: g.translation_about(center).norm(),
        e_gs: (g.scale - 1.0).abs(),
        e_lr: lr / k,
        e_lt: lt / k,
        e_ls: ls / k,
        e_p: pixel_inaccuracy(
            &multi.stroke_level,
            tracing,
            config.incorrect_threshold,
            config.tolerance,
        )?,
        valid: e_star > config.validity_threshold,
    })
}

/// Per-point distances between corresponding points of two registrations of the same drawing.
pub fn pixel_displacements(stroke_level: &Sketch, pixel_level: &Sketch) -> Result<Vec<f64>> {
    if !stroke_level.same_topology(pixel_level) {
        return Err(Error::Correspondence(
            "sketches differ in stroke or point counts".into(),
        ));
    }
    Ok(stroke_level
        .positions()
        .iter()
        .zip(pixel_level.positions())
        .map(|(a, b)| a.dist(b))
        .collect())
}

pub fn pixel_displacement_histogram(
    stroke_level: &Sketch,
    pixel_level: &Sketch,
    bin_width: f64,
    max: f64,
) -> Result<Histogram> {
    let mut h = Histogram::uniform(0.0, max, bin_width);
    h.extend(pixel_displacements(stroke_level, pixel_level)?);
    Ok(h)
}

/// Precision and recall of an external line image against a registered sketch.
///
/// The image plays the registered role and the width-1 sketch raster the reference.
pub fn compare_line_image(
    image: &RasterImage,
    registered: &Sketch,
    tolerance: u32,
) -> Result<(f64, f64)> {
    if image.is_blank() {
        return Err(Error::EmptyRaster);
    }
    let (w, h) = registered.canvas;
    if image.dims() != (w, h) {
        return Err(Error::DimensionMismatch {
            left: image.dims(),
            right: (w, h),
        });
    }
    let reference = rasterize(registered, 1, true);
    let s = score(image, &reference, 1.0, tolerance)?;
    Ok((s.precision, s.recall))
}
