//! Freehand-style synthesis from tracings: Bézier preprocessing, learned disturbers and layout repair.

pub mod bezier;
pub mod disturber;
pub mod layout;
pub mod mlp;

pub use bezier::{fit_bezier, BezierStroke, Frame, CONTROL_POINTS};
pub use disturber::{
    build_training_pairs, disturb_extrinsic, disturb_intrinsic, disturb_points, smoothing_kernel,
    train_disturber, DisturberKind, DisturberModel, DisturberSet, FallbackParams, TrainingPair,
    TrainingSet, TrainingSets,
};
pub use layout::{
    connection_graph, layout_init, layout_init_mapped, layout_optimize, Connection,
    ConnectionGraph, LayoutOutcome, LayoutParams, PositionConstraint, StrokeEnd, StrokeObjective,
};
pub use mlp::{Mlp, TrainConfig};

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::sketch::{Group, Point, Sketch, Stroke};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Noise levels above this are outside the range the disturbers are meant for.
pub const RECOMMENDED_MAX_NOISE: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisConfig {
    pub connection_threshold: f64,
    pub layout: LayoutParams,
    pub training: TrainConfig,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            connection_threshold: layout::DEFAULT_CONNECTION_THRESHOLD,
            layout: LayoutParams::default(),
            training: TrainConfig::default(),
        }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.connection_threshold > 0.0 && self.connection_threshold.is_finite()) {
            return Err(Error::Validation(
                "connection threshold must be positive".into(),
            ));
        }
        self.layout.validate()?;
        self.training.validate()
    }
}

/// A synthesized sketch and how the layout repair went.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthesis {
    pub sketch: Sketch,
    pub connections: usize,
    pub broken_connections: usize,
    pub layout_passes: usize,
}

fn check_level(name: &str, n: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&n) {
        return Err(Error::Validation(format!(
            "{name} must lie in [0, 1], got {n}"
        )));
    }
    if n > RECOMMENDED_MAX_NOISE {
        log::warn!("{name} = {n} exceeds the recommended maximum of {RECOMMENDED_MAX_NOISE}");
    }
    Ok(())
}

/// Copies timing and pressure from `source` onto new positions by relative index.
fn retime(source: &Stroke, positions: &[Vec2]) -> Stroke {
    let m = positions.len();
    let last = source.points.len() - 1;
    let points = positions
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let u = if m > 1 {
                k as f64 / (m - 1) as f64 * last as f64
            } else {
                0.0
            };
            let i = (u.floor() as usize).min(last);
            let j = (i + 1).min(last);
            let f = u - i as f64;
            let (a, b) = (&source.points[i], &source.points[j]);
            Point::new(
                p.x,
                p.y,
                a.t + (b.t - a.t) * f,
                a.pressure + (b.pressure - a.pressure) * f,
            )
        })
        .collect();
    Stroke {
        points,
        kind: source.kind,
        width: source.width,
        extra: source.extra.clone(),
    }
}

fn disturb_stroke(
    stroke: &Stroke,
    n1: f64,
    n2: f64,
    models: &DisturberSet,
    rng: &mut ChaCha8Rng,
) -> Result<(Stroke, Vec<f64>)> {
    let mut pos = stroke.positions();
    if pos.len() == 1 {
        pos.push(pos[0]);
    }
    let (b, mut params) = bezier::fit_with_parameters(&pos);
    params.truncate(stroke.len());
    let (_, b) = disturb_extrinsic(&b, n1, &models.extrinsic, rng)?;
    let b = disturb_intrinsic(&b, n2, &models.intrinsic, rng)?;
    let polyline = retime(stroke, &b.polyline());
    // the polyline is uniform in the curve parameter, so parameters double as index fractions
    Ok((disturb_points(&polyline, &models.point, rng)?, params))
}

/// Runs the full pipeline on every stroke of `tracing`; all randomness comes from one generator seeded with `seed`.
pub fn synthesize_detailed(
    tracing: &Sketch,
    models: &DisturberSet,
    n1: f64,
    n2: f64,
    seed: u64,
    config: &SynthesisConfig,
) -> Result<Synthesis> {
    config.validate()?;
    check_level("n1", n1)?;
    check_level("n2", n2)?;
    if tracing.is_empty() {
        return Err(Error::EmptySketch(
            "tracing has no strokes to synthesize from".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let graph = connection_graph(tracing, config.connection_threshold);
    let (disturbed, locations): (Vec<Stroke>, Vec<Vec<f64>>) = tracing
        .strokes
        .iter()
        .map(|s| {
            if s.is_empty() {
                Ok((s.clone(), Vec::new()))
            } else {
                disturb_stroke(s, n1, n2, models, &mut rng)
            }
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    let placed = layout_init_mapped(&disturbed, &tracing.strokes, &locations)?;
    let outcome = layout_optimize(&placed, &graph, &config.layout)?;
    if !outcome.broken.is_empty() {
        log::warn!(
            "{} of {} connections remain broken after layout optimization",
            outcome.broken.len(),
            graph.edges.len()
        );
    }
    let mut sketch = tracing.clone_meta();
    sketch.strokes = outcome.strokes;
    sketch.group = Group::Synthetic;
    sketch.user_id = format!("synthetic-{}-{seed}", models.style());
    Ok(Synthesis {
        sketch,
        connections: graph.edges.len(),
        broken_connections: outcome.broken.len(),
        layout_passes: outcome.passes,
    })
}

/// [`synthesize_detailed`] returning only the sketch.
pub fn synthesize(
    tracing: &Sketch,
    models: &DisturberSet,
    n1: f64,
    n2: f64,
    seed: u64,
    config: &SynthesisConfig,
) -> Result<Sketch> {
    synthesize_detailed(tracing, models, n1, n2, seed, config).map(|s| s.sketch)
}
