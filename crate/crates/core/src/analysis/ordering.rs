//! Stroke-ordering guideline costs. Each cost lies in [0, 1]; lower means
//! the drawing order follows the guideline more closely.

use crate::geom::{self, Vec2};
use crate::sketch::{Sketch, Stroke};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OrderingParams {
    /// Largest endpoint gap for two strokes to count as a continuation, px.
    pub collinear_gap: f64,
    /// Largest tangent angle between continuations, degrees.
    pub collinear_angle_deg: f64,
    /// Largest endpoint-to-interior distance for an attachment, px.
    pub anchor_distance: f64,
}

impl Default for OrderingParams {
    fn default() -> Self {
        OrderingParams {
            collinear_gap: 30.0,
            collinear_angle_deg: 20.0,
            anchor_distance: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderingCosts {
    pub simplicity: f64,
    pub proximity: f64,
    pub collinearity: f64,
    pub anchoring: f64,
    /// Set when the drawing has fewer than two strokes and all costs are zero.
    pub warning: bool,
}

impl OrderingCosts {
    pub const NAMES: [&'static str; 4] = ["simplicity", "proximity", "collinearity", "anchoring"];

    pub fn values(&self) -> [f64; 4] {
        [
            self.simplicity,
            self.proximity,
            self.collinearity,
            self.anchoring,
        ]
    }
}

/// Arc length times the mean absolute turning angle (radians) at interior vertices.
pub fn stroke_complexity(stroke: &Stroke) -> f64 {
    let pts = stroke.positions();
    let mut turns = Vec::new();
    for w in pts.windows(3) {
        let (a, b) = (w[1] - w[0], w[2] - w[1]);
        if a.norm() > 0.0 && b.norm() > 0.0 {
            turns.push(a.cross(b).atan2(a.dot(b)).abs());
        }
    }
    if turns.is_empty() {
        return 0.0;
    }
    geom::polyline_length(&pts) * turns.iter().sum::<f64>() / turns.len() as f64
}

/// Unit direction leaving the stroke at one end, estimated over the first 10 px (or the whole stroke).
fn end_tangent(points: &[Vec2], at_start: bool) -> Option<Vec2> {
    let ordered: Vec<Vec2> = if at_start {
        points.to_vec()
    } else {
        points.iter().rev().copied().collect()
    };
    let origin = ordered[0];
    let far = ordered
        .iter()
        .find(|p| p.dist(origin) >= 10.0)
        .or(ordered.last())
        .copied()?;
    (far - origin).normalized()
}

fn simplicity(complexities: &[f64]) -> f64 {
    let n = complexities.len();
    let mut inversions = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            if complexities[i] > complexities[j] {
                inversions += 1.0;
            } else if complexities[i] == complexities[j] {
                inversions += 0.5;
            }
        }
    }
    inversions / (n * (n - 1) / 2) as f64
}

fn proximity(strokes: &[Vec<Vec2>], diagonal: f64) -> f64 {
    let gaps: f64 = strokes
        .windows(2)
        .map(|w| w[0].last().unwrap().dist(w[1][0]) / diagonal)
        .map(|g| g.min(1.0))
        .sum();
    gaps / (strokes.len() - 1) as f64
}

fn collinearity(strokes: &[Vec<Vec2>], params: &OrderingParams) -> f64 {
    let n = strokes.len();
    let cos_limit = params.collinear_angle_deg.to_radians().cos();
    let mut separations = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            // closest pair of endpoints between the two strokes
            let mut best: Option<(f64, bool, bool)> = None;
            for ai in [true, false] {
                for bj in [true, false] {
                    let a = if ai {
                        strokes[i][0]
                    } else {
                        *strokes[i].last().unwrap()
                    };
                    let b = if bj {
                        strokes[j][0]
                    } else {
                        *strokes[j].last().unwrap()
                    };
                    let d = a.dist(b);
                    if best.is_none_or(|(bd, _, _)| d < bd) {
                        best = Some((d, ai, bj));
                    }
                }
            }
            let (gap, ai, bj) = best.unwrap();
            if gap >= params.collinear_gap {
                continue;
            }
            let (Some(ta), Some(tb)) = (end_tangent(&strokes[i], ai), end_tangent(&strokes[j], bj))
            else {
                continue;
            };
            if ta.dot(tb).abs() > cos_limit {
                let sep = if n > 2 {
                    (j - i - 1) as f64 / (n - 2) as f64
                } else {
                    0.0
                };
                separations.push(sep);
            }
        }
    }
    if separations.is_empty() {
        0.0
    } else {
        separations.iter().sum::<f64>() / separations.len() as f64
    }
}

fn anchoring(strokes: &[Vec<Vec2>], params: &OrderingParams) -> f64 {
    let (mut relations, mut violations) = (0usize, 0usize);
    for (a, sa) in strokes.iter().enumerate() {
        for (b, sb) in strokes.iter().enumerate() {
            if a == b || sb.len() < 2 {
                continue;
            }
            let length = geom::polyline_length(sb);
            let attached = [sa[0], *sa.last().unwrap()].iter().any(|&e| {
                let proj = geom::project_onto_polyline(sb, e);
                proj.distance <= params.anchor_distance
                    && proj.arc_length > params.anchor_distance
                    && proj.arc_length < length - params.anchor_distance
            });
            if attached {
                relations += 1;
                if a < b {
                    violations += 1;
                }
            }
        }
    }
    if relations == 0 {
        0.0
    } else {
        violations as f64 / relations as f64
    }
}

/// Guideline costs over the content strokes of a raw drawing, in drawing order.
///
/// * simplicity: fraction of stroke pairs drawn out of increasing-complexity order (ties count half);
/// * proximity: mean gap from one stroke's end to the next stroke's start over the canvas diagonal;
/// * collinearity: mean normalized order separation of continuation pairs;
/// * anchoring: fraction of attachments drawn before the stroke they attach to.
pub fn ordering_costs(sketch: &Sketch, params: &OrderingParams) -> OrderingCosts {
    let content: Vec<&Stroke> = sketch.content_strokes().collect();
    if content.len() < 2 {
        log::warn!(
            "ordering costs need at least two strokes, got {}",
            content.len()
        );
        return OrderingCosts {
            simplicity: 0.0,
            proximity: 0.0,
            collinearity: 0.0,
            anchoring: 0.0,
            warning: true,
        };
    }
    let polylines: Vec<Vec<Vec2>> = content.iter().map(|s| s.positions()).collect();
    let complexities: Vec<f64> = content.iter().map(|s| stroke_complexity(s)).collect();
    OrderingCosts {
        simplicity: simplicity(&complexities),
        proximity: proximity(&polylines, sketch.canvas_diagonal()),
        collinearity: collinearity(&polylines, params),
        anchoring: anchoring(&polylines, params),
        warning: false,
    }
}
