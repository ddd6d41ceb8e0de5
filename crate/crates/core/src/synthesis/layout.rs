//! Stroke connectivity of a tracing, sequential layout initialization and per-stroke layout optimization.

use crate::error::{Error, Result};
use crate::geom::{self, Vec2};
use crate::sketch::{Sketch, Stroke};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

pub const DEFAULT_CONNECTION_THRESHOLD: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrokeEnd {
    Start,
    End,
}

impl StrokeEnd {
    fn index(self, len: usize) -> usize {
        match self {
            StrokeEnd::Start => 0,
            StrokeEnd::End => len - 1,
        }
    }
}

/// The `end` of `stroke` touches `neighbor` at arc fraction `param`; `offset` is
/// the tracing-space vector from that point on the neighbor to the endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Connection {
    pub stroke: usize,
    pub end: StrokeEnd,
    pub neighbor: usize,
    pub param: f64,
    pub offset: Vec2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectionGraph {
    pub threshold: f64,
    pub edges: Vec<Connection>,
}

fn arc_fraction(points: &[Vec2], arc_length: f64) -> f64 {
    let total = geom::polyline_length(points);
    if total > 0.0 {
        arc_length / total
    } else {
        0.0
    }
}

/// Every stroke endpoint closer than `threshold` to another stroke becomes an edge.
/// Two endpoints touching each other yield a single edge, owned by the earlier stroke.
pub fn connection_graph(tracing: &Sketch, threshold: f64) -> ConnectionGraph {
    let strokes: Vec<Vec<Vec2>> = tracing.strokes.iter().map(|s| s.positions()).collect();
    let mut edges: Vec<Connection> = Vec::new();
    let mut anchors: Vec<Vec2> = Vec::new();
    for (i, si) in strokes.iter().enumerate() {
        if si.is_empty() {
            continue;
        }
        let ends: &[StrokeEnd] = if si.len() == 1 {
            &[StrokeEnd::Start]
        } else {
            &[StrokeEnd::Start, StrokeEnd::End]
        };
        for &end in ends {
            let q = si[end.index(si.len())];
            for (j, sj) in strokes.iter().enumerate() {
                if j == i || sj.is_empty() {
                    continue;
                }
                let proj = geom::project_onto_polyline(sj, q);
                if proj.distance >= threshold {
                    continue;
                }
                let mutual = edges.iter().zip(&anchors).any(|(e, a)| {
                    e.stroke == j
                        && e.neighbor == i
                        && a.dist(q) < threshold
                        && proj.point.dist(sj[e.end.index(sj.len())]) < threshold
                });
                if mutual {
                    continue;
                }
                edges.push(Connection {
                    stroke: i,
                    end,
                    neighbor: j,
                    param: arc_fraction(sj, proj.arc_length),
                    offset: q - proj.point,
                });
                anchors.push(proj.point);
            }
        }
    }
    ConnectionGraph { threshold, edges }
}

impl ConnectionGraph {
    /// Distance between each edge's endpoint and its target on the (moved) neighbor.
    pub fn residuals(&self, strokes: &[Stroke]) -> Vec<f64> {
        self.edges
            .iter()
            .map(|e| {
                let own = strokes[e.stroke].positions();
                let other = strokes[e.neighbor].positions();
                let target = geom::point_at_arc_fraction(&other, e.param) + e.offset;
                own[e.end.index(own.len())].dist(target)
            })
            .collect()
    }
}

fn closest_vertices(a: &[Vec2], b: &[Vec2]) -> (usize, usize, f64) {
    let mut best = (0, 0, f64::INFINITY);
    for (ia, pa) in a.iter().enumerate() {
        for (ib, pb) in b.iter().enumerate() {
            let d = pa.dist(*pb);
            if d < best.2 {
                best = (ia, ib, d);
            }
        }
    }
    best
}

/// Position on `disturbed` corresponding to vertex `idx` of `tracing`: the same vertex when the
/// point counts agree, otherwise the point at the same arc fraction.
fn corresponding(disturbed: &[Vec2], tracing: &[Vec2], idx: usize) -> Vec2 {
    if disturbed.len() == tracing.len() {
        return disturbed[idx];
    }
    let cum = geom::cumulative_lengths(tracing);
    let fraction = arc_fraction(tracing, cum[idx]);
    geom::point_at_arc_fraction(disturbed, fraction)
}

/// Point at a fractional index position `u * (len - 1)`, linearly interpolated.
fn at_index_fraction(points: &[Vec2], u: f64) -> Vec2 {
    if points.len() == 1 {
        return points[0];
    }
    let x = u.clamp(0.0, 1.0) * (points.len() - 1) as f64;
    let i = (x.floor() as usize).min(points.len() - 2);
    points[i].lerp(points[i + 1], x - i as f64)
}

/// Translates strokes one by one so each keeps its tracing-relative position to the strokes already placed.
///
/// For every earlier stroke `j` the closest vertex pair `(alpha, beta)` between tracing strokes
/// `j` and `i` gives a target `t_i[beta] - t_j[alpha] + d_j(alpha)` for `d_i(beta)`; the targets
/// are blended with softmax weights of `1 / (dist + 1)`. Tracing vertices are located on the
/// disturbed strokes by index when the point counts agree and by arc fraction otherwise.
pub fn layout_init(disturbed: &[Stroke], tracing: &[Stroke]) -> Result<Vec<Stroke>> {
    init_with(disturbed, tracing, &|_, d, t, idx| corresponding(d, t, idx))
}

/// [`layout_init`] with explicit correspondences: `locations[i][k]` is where vertex `k` of tracing
/// stroke `i` lies on disturbed stroke `i`, as a fraction of its index range.
pub fn layout_init_mapped(
    disturbed: &[Stroke],
    tracing: &[Stroke],
    locations: &[Vec<f64>],
) -> Result<Vec<Stroke>> {
    let mismatch = locations.len() != tracing.len()
        || locations
            .iter()
            .zip(tracing)
            .any(|(l, t)| l.len() != t.len());
    if mismatch {
        return Err(Error::Correspondence(
            "vertex locations do not match the tracing strokes".into(),
        ));
    }
    init_with(disturbed, tracing, &|i, d, _, idx| {
        at_index_fraction(d, locations[i][idx])
    })
}

type Locate<'a> = dyn Fn(usize, &[Vec2], &[Vec2], usize) -> Vec2 + 'a;

fn init_with(disturbed: &[Stroke], tracing: &[Stroke], locate: &Locate) -> Result<Vec<Stroke>> {
    if disturbed.len() != tracing.len() {
        return Err(Error::Correspondence(format!(
            "{} disturbed strokes vs {} tracing strokes",
            disturbed.len(),
            tracing.len()
        )));
    }
    let tr: Vec<Vec<Vec2>> = tracing.iter().map(|s| s.positions()).collect();
    let mut placed: Vec<Vec<Vec2>> = Vec::with_capacity(disturbed.len());
    let mut out = Vec::with_capacity(disturbed.len());
    for (i, stroke) in disturbed.iter().enumerate() {
        let di = stroke.positions();
        let mut terms: Vec<(f64, Vec2)> = Vec::new();
        if !di.is_empty() && !tr[i].is_empty() {
            for j in 0..i {
                if placed[j].is_empty() || tr[j].is_empty() {
                    continue;
                }
                let (alpha, beta, dist) = closest_vertices(&tr[j], &tr[i]);
                let target = tr[i][beta] - tr[j][alpha] + locate(j, &placed[j], &tr[j], alpha);
                let current = locate(i, &di, &tr[i], beta);
                terms.push((1.0 / (dist + 1.0), target - current));
            }
        }
        let delta = if terms.is_empty() {
            Vec2::ZERO
        } else {
            let top = terms.iter().map(|t| t.0).fold(f64::NEG_INFINITY, f64::max);
            let weights: Vec<f64> = terms.iter().map(|t| (t.0 - top).exp()).collect();
            let total: f64 = weights.iter().sum();
            terms
                .iter()
                .zip(&weights)
                .fold(Vec2::ZERO, |acc, ((_, d), w)| acc + *d * (w / total))
        };
        let moved = if delta == Vec2::ZERO {
            stroke.clone()
        } else {
            stroke.map_positions(|p| p + delta)
        };
        placed.push(moved.positions());
        out.push(moved);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LayoutParams {
    pub shape_weight: f64,
    pub smoothness_weight: f64,
    /// Connections with a residual above this many pixels are broken.
    pub tolerance: f64,
    pub max_passes: usize,
}

impl Default for LayoutParams {
    fn default() -> Self {
        LayoutParams {
            shape_weight: 1.0,
            smoothness_weight: 0.5,
            tolerance: 0.5,
            max_passes: 3,
        }
    }
}

impl LayoutParams {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !(ok(self.shape_weight)
            && ok(self.smoothness_weight)
            && self.tolerance > 0.0
            && ok(self.tolerance))
        {
            return Err(Error::Validation(
                "layout weights must be non-negative and the tolerance positive".into(),
            ));
        }
        Ok(())
    }
}

/// `|sum_k coeff_k p_k - target|^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionConstraint {
    pub coefficients: Vec<(usize, f64)>,
    pub target: Vec2,
}

/// `F(p) = T_p + w_s T_s + w_m T_m` for one stroke.
#[derive(Debug, Clone, PartialEq)]
pub struct StrokeObjective {
    /// Shape the edge vectors are compared against.
    pub reference: Vec<Vec2>,
    pub constraints: Vec<PositionConstraint>,
    pub shape_weight: f64,
    pub smoothness_weight: f64,
}

/// `T_m`: sum of squared second differences.
pub fn smoothness(points: &[Vec2]) -> f64 {
    points
        .windows(3)
        .map(|w| (w[2] - w[1] * 2.0 + w[0]).norm_sq())
        .sum()
}

/// `T_s`: sum of squared edge-vector deviations from `reference`.
pub fn shape_deviation(points: &[Vec2], reference: &[Vec2]) -> f64 {
    points
        .windows(2)
        .zip(reference.windows(2))
        .map(|(p, r)| ((p[1] - p[0]) - (r[1] - r[0])).norm_sq())
        .sum()
}

impl StrokeObjective {
    fn constraint_value(c: &PositionConstraint, points: &[Vec2]) -> Vec2 {
        c.coefficients
            .iter()
            .fold(Vec2::ZERO, |acc, &(k, a)| acc + points[k] * a)
    }

    pub fn position_term(&self, points: &[Vec2]) -> f64 {
        self.constraints
            .iter()
            .map(|c| (Self::constraint_value(c, points) - c.target).norm_sq())
            .sum()
    }

    pub fn value(&self, points: &[Vec2]) -> f64 {
        self.position_term(points)
            + self.shape_weight * shape_deviation(points, &self.reference)
            + self.smoothness_weight * smoothness(points)
    }

    pub fn gradient(&self, points: &[Vec2]) -> Vec<Vec2> {
        let mut g = vec![Vec2::ZERO; points.len()];
        for c in &self.constraints {
            let r = Self::constraint_value(c, points) - c.target;
            for &(k, a) in &c.coefficients {
                g[k] += r * (2.0 * a);
            }
        }
        for k in 0..points.len().saturating_sub(1) {
            let r = (points[k + 1] - points[k]) - (self.reference[k + 1] - self.reference[k]);
            g[k + 1] += r * (2.0 * self.shape_weight);
            g[k] -= r * (2.0 * self.shape_weight);
        }
        for k in 1..points.len().saturating_sub(1) {
            let r = points[k + 1] - points[k] * 2.0 + points[k - 1];
            g[k + 1] += r * (2.0 * self.smoothness_weight);
            g[k] -= r * (4.0 * self.smoothness_weight);
            g[k - 1] += r * (2.0 * self.smoothness_weight);
        }
        g
    }

    /// Exact minimizer from the normal equations; `None` when the system is singular.
    pub fn solve(&self) -> Option<Vec<Vec2>> {
        let n = self.reference.len();
        let mut a = DMatrix::<f64>::zeros(n, n);
        let mut bx = DVector::<f64>::zeros(n);
        let mut by = DVector::<f64>::zeros(n);
        for c in &self.constraints {
            for &(k, ak) in &c.coefficients {
                for &(l, al) in &c.coefficients {
                    a[(k, l)] += ak * al;
                }
                bx[k] += ak * c.target.x;
                by[k] += ak * c.target.y;
            }
        }
        let ws = self.shape_weight;
        for k in 0..n.saturating_sub(1) {
            let e = self.reference[k + 1] - self.reference[k];
            a[(k, k)] += ws;
            a[(k + 1, k + 1)] += ws;
            a[(k, k + 1)] -= ws;
            a[(k + 1, k)] -= ws;
            bx[k + 1] += ws * e.x;
            bx[k] -= ws * e.x;
            by[k + 1] += ws * e.y;
            by[k] -= ws * e.y;
        }
        let wm = self.smoothness_weight;
        for k in 1..n.saturating_sub(1) {
            let idx = [k - 1, k, k + 1];
            let coef = [1.0, -2.0, 1.0];
            for (ii, ci) in idx.iter().zip(coef) {
                for (jj, cj) in idx.iter().zip(coef) {
                    a[(*ii, *jj)] += wm * ci * cj;
                }
            }
        }
        let chol = a.cholesky()?;
        let x = chol.solve(&bx);
        let y = chol.solve(&by);
        let out: Vec<Vec2> = (0..n).map(|k| Vec2::new(x[k], y[k])).collect();
        out.iter()
            .all(|p| p.x.is_finite() && p.y.is_finite())
            .then_some(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayoutOutcome {
    pub strokes: Vec<Stroke>,
    pub passes: usize,
    /// Indices into the graph's edges still above tolerance.
    pub broken: Vec<usize>,
    /// Strokes whose system could not be solved.
    pub skipped: Vec<usize>,
}

fn point_constraint(points: &[Vec2], param: f64, target: Vec2) -> PositionConstraint {
    if points.len() == 1 {
        return PositionConstraint {
            coefficients: vec![(0, 1.0)],
            target,
        };
    }
    let cum = geom::cumulative_lengths(points);
    let s = param.clamp(0.0, 1.0) * cum[cum.len() - 1];
    let seg = cum
        .partition_point(|&c| c <= s)
        .saturating_sub(1)
        .min(points.len() - 2);
    let len = cum[seg + 1] - cum[seg];
    let t = if len > 0.0 { (s - cum[seg]) / len } else { 0.0 };
    PositionConstraint {
        coefficients: vec![(seg, 1.0 - t), (seg + 1, t)],
        target,
    }
}

fn objective_for(
    i: usize,
    current: &[Vec<Vec2>],
    graph: &ConnectionGraph,
    moving: &BTreeSet<usize>,
    params: &LayoutParams,
) -> StrokeObjective {
    let own = &current[i];
    let mut constraints = Vec::new();
    for e in &graph.edges {
        if e.stroke == i {
            let target = geom::point_at_arc_fraction(&current[e.neighbor], e.param) + e.offset;
            constraints.push(PositionConstraint {
                coefficients: vec![(e.end.index(own.len()), 1.0)],
                target,
            });
        } else if e.neighbor == i && !moving.contains(&e.stroke) {
            let other = &current[e.stroke];
            constraints.push(point_constraint(
                own,
                e.param,
                other[e.end.index(other.len())] - e.offset,
            ));
        }
    }
    StrokeObjective {
        reference: own.clone(),
        constraints,
        shape_weight: params.shape_weight,
        smoothness_weight: params.smoothness_weight,
    }
}

fn broken_edges(graph: &ConnectionGraph, strokes: &[Stroke], tolerance: f64) -> Vec<usize> {
    graph
        .residuals(strokes)
        .iter()
        .enumerate()
        .filter(|(_, r)| **r > tolerance)
        .map(|(k, _)| k)
        .collect()
}

/// Re-solves every stroke that owns a broken connection, up to `max_passes` times.
///
/// Within a pass each stroke is solved against the positions at the start of the pass.
/// A pass that would increase the number of broken connections is discarded.
pub fn layout_optimize(
    strokes: &[Stroke],
    graph: &ConnectionGraph,
    params: &LayoutParams,
) -> Result<LayoutOutcome> {
    params.validate()?;
    if let Some(e) = graph
        .edges
        .iter()
        .find(|e| e.stroke >= strokes.len() || e.neighbor >= strokes.len())
    {
        return Err(Error::Correspondence(format!(
            "connection {} -> {} refers to a missing stroke",
            e.stroke, e.neighbor
        )));
    }
    let mut current = strokes.to_vec();
    let mut broken = broken_edges(graph, &current, params.tolerance);
    let mut passes = 0;
    let mut skipped = BTreeSet::new();
    while !broken.is_empty() && passes < params.max_passes {
        passes += 1;
        let moving: BTreeSet<usize> = broken.iter().map(|&k| graph.edges[k].stroke).collect();
        let positions: Vec<Vec<Vec2>> = current.iter().map(|s| s.positions()).collect();
        let mut next = current.clone();
        for &i in &moving {
            let objective = objective_for(i, &positions, graph, &moving, params);
            match objective.solve() {
                Some(p) => {
                    let mut it = p.into_iter();
                    next[i] = current[i].map_positions(|_| it.next().unwrap());
                }
                None => {
                    log::warn!("layout optimization skipped stroke {i}: singular system");
                    skipped.insert(i);
                }
            }
        }
        let after = broken_edges(graph, &next, params.tolerance);
        if after.len() > broken.len() {
            break;
        }
        current = next;
        broken = after;
    }
    Ok(LayoutOutcome {
        strokes: current,
        passes,
        broken,
        skipped: skipped.into_iter().collect(),
    })
}
