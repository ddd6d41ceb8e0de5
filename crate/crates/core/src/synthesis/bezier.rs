//! Degree-5 Bézier fitting with clamped endpoints.

use crate::geom::{self, Vec2};
use crate::sketch::Stroke;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub const CONTROL_POINTS: usize = 6;
const DEGREE: usize = CONTROL_POINTS - 1;
const BINOMIAL: [f64; CONTROL_POINTS] = [1.0, 5.0, 10.0, 10.0, 5.0, 1.0];
const REPARAMETERIZATION_PASSES: usize = 2;
const FOOT_POINT_ITERATIONS: usize = 20;
const ERROR_SAMPLES: usize = 256;
const REFINE_ITERATIONS: usize = 200;

/// Maps stroke-local coordinates to the canvas: `canvas = centroid + scale * local`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub centroid: Vec2,
    pub scale: f64,
}

impl Frame {
    /// Centroid of the points and their bounding-box diagonal (at least 1 px).
    pub fn of(points: &[Vec2]) -> Frame {
        Frame {
            centroid: geom::centroid(points),
            scale: geom::bbox_diagonal(points).max(1.0),
        }
    }

    pub fn to_local(&self, p: Vec2) -> Vec2 {
        (p - self.centroid) * (1.0 / self.scale)
    }

    pub fn to_canvas(&self, p: Vec2) -> Vec2 {
        self.centroid + p * self.scale
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BezierStroke {
    /// Control points in canvas coordinates.
    pub control: [Vec2; CONTROL_POINTS],
    pub source_len: usize,
    pub frame: Frame,
    /// Largest distance from a source point to the fitted curve.
    pub max_error: f64,
}

fn bernstein(t: f64) -> [f64; CONTROL_POINTS] {
    let u = 1.0 - t;
    let mut b = [0.0; CONTROL_POINTS];
    for (k, v) in b.iter_mut().enumerate() {
        *v = BINOMIAL[k] * t.powi(k as i32) * u.powi((DEGREE - k) as i32);
    }
    b
}

fn eval(control: &[Vec2; CONTROL_POINTS], t: f64) -> Vec2 {
    bernstein(t)
        .iter()
        .zip(control)
        .fold(Vec2::ZERO, |acc, (&b, &p)| acc + p * b)
}

/// Control points of the derivative curve (degree 4), scaled by the degree.
fn hodograph(control: &[Vec2]) -> Vec<Vec2> {
    let d = (control.len() - 1) as f64;
    control.windows(2).map(|w| (w[1] - w[0]) * d).collect()
}

fn eval_generic(control: &[Vec2], t: f64) -> Vec2 {
    // de Casteljau
    let mut pts = control.to_vec();
    for level in 1..pts.len() {
        for i in 0..pts.len() - level {
            pts[i] = pts[i].lerp(pts[i + 1], t);
        }
    }
    pts.first().copied().unwrap_or(Vec2::ZERO)
}

impl BezierStroke {
    pub fn point(&self, t: f64) -> Vec2 {
        eval(&self.control, t)
    }

    pub fn derivative(&self, t: f64) -> Vec2 {
        eval_generic(&hodograph(&self.control), t)
    }

    /// `n` points at uniformly spaced parameters, endpoints included.
    pub fn sample(&self, n: usize) -> Vec<Vec2> {
        let n = n.max(2);
        (0..n)
            .map(|i| self.point(i as f64 / (n - 1) as f64))
            .collect()
    }

    /// Control points in the stroke-local frame, flattened as `x0, y0, x1, y1, ...`.
    pub fn local_coordinates(&self) -> [f64; 2 * CONTROL_POINTS] {
        let mut out = [0.0; 2 * CONTROL_POINTS];
        for (k, c) in self.control.iter().enumerate() {
            let l = self.frame.to_local(*c);
            out[2 * k] = l.x;
            out[2 * k + 1] = l.y;
        }
        out
    }

    /// Applies a map to every control point and to the frame centroid; `scale_factor` rescales the frame.
    pub fn map(&self, f: impl Fn(Vec2) -> Vec2, scale_factor: f64) -> BezierStroke {
        BezierStroke {
            control: self.control.map(&f),
            source_len: self.source_len,
            frame: Frame {
                centroid: f(self.frame.centroid),
                scale: self.frame.scale * scale_factor,
            },
            max_error: self.max_error,
        }
    }

    /// Polyline with `max(16, source_len)` points.
    pub fn polyline(&self) -> Vec<Vec2> {
        self.sample(self.source_len.max(16))
    }
}

fn chord_parameters(points: &[Vec2]) -> Vec<f64> {
    let cum = geom::cumulative_lengths(points);
    let total = *cum.last().unwrap();
    if total <= 0.0 {
        let n = points.len();
        return (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    }
    cum.iter().map(|c| c / total).collect()
}

/// Interior control points by least squares for fixed parameters; minimum-norm deviation
/// from the straight-line controls when the system is underdetermined.
fn solve_interior(points: &[Vec2], params: &[f64], p0: Vec2, p5: Vec2) -> [Vec2; CONTROL_POINTS] {
    let line: [Vec2; CONTROL_POINTS] =
        std::array::from_fn(|k| p0.lerp(p5, k as f64 / DEGREE as f64));
    let n = points.len();
    let mut a = DMatrix::<f64>::zeros(n, 4);
    let mut rx = DVector::<f64>::zeros(n);
    let mut ry = DVector::<f64>::zeros(n);
    for (i, (&q, &t)) in points.iter().zip(params).enumerate() {
        let b = bernstein(t);
        let base = eval(&line, t);
        for k in 0..4 {
            a[(i, k)] = b[k + 1];
        }
        rx[i] = q.x - base.x;
        ry[i] = q.y - base.y;
    }
    let svd = a.svd(true, true);
    let dx = svd.solve(&rx, 1e-12).expect("svd with u and v");
    let dy = svd.solve(&ry, 1e-12).expect("svd with u and v");
    let mut control = line;
    for k in 0..4 {
        control[k + 1] += Vec2::new(dx[k], dy[k]);
    }
    control
}

/// Moves every interior parameter to the foot of the point's perpendicular on the curve (Newton iterations).
fn reparameterize(control: &[Vec2; CONTROL_POINTS], points: &[Vec2], params: &mut [f64]) {
    let d1 = hodograph(control);
    let d2 = hodograph(&d1);
    let last = params.len() - 1;
    for (i, t) in params.iter_mut().enumerate() {
        if i == 0 || i == last {
            continue;
        }
        for _ in 0..FOOT_POINT_ITERATIONS {
            let diff = eval(control, *t) - points[i];
            let (b1, b2) = (eval_generic(&d1, *t), eval_generic(&d2, *t));
            let denom = b1.dot(b1) + diff.dot(b2);
            if denom <= 1e-12 {
                break;
            }
            let next = (*t - diff.dot(b1) / denom).clamp(0.0, 1.0);
            let done = (next - *t).abs() < 1e-12;
            *t = next;
            if done {
                break;
            }
        }
    }
}

fn squared_error(control: &[Vec2; CONTROL_POINTS], points: &[Vec2], params: &[f64]) -> f64 {
    points
        .iter()
        .zip(params)
        .map(|(&q, &t)| (eval(control, t) - q).norm_sq())
        .sum()
}

/// Levenberg-Marquardt on interior control points and parameters jointly. The per-point
/// parameters are eliminated by a Schur complement, leaving an 8x8 system per step.
fn refine(control: &mut [Vec2; CONTROL_POINTS], points: &[Vec2], params: &mut [f64]) {
    let n = points.len();
    if n < 3 {
        return;
    }
    let mut cost = squared_error(control, points, params);
    let mut lambda = 1e-3;
    for _ in 0..REFINE_ITERATIONS {
        if cost < 1e-24 {
            break;
        }
        let d1 = hodograph(control);
        let mut s = DMatrix::<f64>::zeros(8, 8);
        let mut rhs = DVector::<f64>::zeros(8);
        let mut rows: Vec<Option<(f64, [f64; 8], f64)>> = vec![None; n];
        for i in 0..n {
            let t = params[i];
            let b = bernstein(t);
            let r = eval(control, t) - points[i];
            let mut jc = [[0.0; 8]; 2];
            for k in 0..4 {
                jc[0][k] = b[k + 1];
                jc[1][4 + k] = b[k + 1];
            }
            for a in 0..8 {
                rhs[a] -= jc[0][a] * r.x + jc[1][a] * r.y;
                for c in 0..8 {
                    s[(a, c)] += jc[0][a] * jc[0][c] + jc[1][a] * jc[1][c];
                }
            }
            if i == 0 || i == n - 1 {
                continue;
            }
            let d = eval_generic(&d1, t);
            let att = d.dot(d) * (1.0 + lambda) + 1e-12;
            let act: [f64; 8] = std::array::from_fn(|a| jc[0][a] * d.x + jc[1][a] * d.y);
            let gt = d.dot(r);
            for a in 0..8 {
                rhs[a] += act[a] * gt / att;
                for c in 0..8 {
                    s[(a, c)] -= act[a] * act[c] / att;
                }
            }
            rows[i] = Some((att, act, gt));
        }
        for a in 0..8 {
            s[(a, a)] += lambda * (s[(a, a)].abs() + 1e-9);
        }
        let Some(dc) = s.lu().solve(&rhs) else {
            break;
        };
        let mut trial = *control;
        for k in 0..4 {
            trial[k + 1] += Vec2::new(dc[k], dc[4 + k]);
        }
        let trial_params: Vec<f64> = params
            .iter()
            .zip(&rows)
            .map(|(&t, row)| match row {
                Some((att, act, gt)) => {
                    let coupled: f64 = act.iter().zip(dc.iter()).map(|(a, d)| a * d).sum();
                    (t - (gt + coupled) / att).clamp(0.0, 1.0)
                }
                None => t,
            })
            .collect();
        let trial_cost = squared_error(&trial, points, &trial_params);
        if trial_cost < cost {
            let gain = cost - trial_cost;
            *control = trial;
            params.copy_from_slice(&trial_params);
            cost = trial_cost;
            lambda = (lambda / 3.0).max(1e-12);
            if gain <= 1e-14 * cost.max(1e-300) {
                break;
            }
        } else {
            lambda *= 4.0;
            if lambda > 1e12 {
                break;
            }
        }
    }
}

/// Per point, the smaller of the distance to its parameter's curve point and to a dense polyline of the curve.
fn max_distance(control: &[Vec2; CONTROL_POINTS], points: &[Vec2], params: &[f64]) -> f64 {
    let dense: Vec<Vec2> = (0..=ERROR_SAMPLES)
        .map(|i| eval(control, i as f64 / ERROR_SAMPLES as f64))
        .collect();
    points
        .iter()
        .zip(params)
        .map(|(&q, &t)| {
            geom::project_onto_polyline(&dense, q)
                .distance
                .min(eval(control, t).dist(q))
        })
        .fold(0.0, f64::max)
}

/// Fit plus the final parameter of every source point.
pub(crate) fn fit_with_parameters(points: &[Vec2]) -> (BezierStroke, Vec<f64>) {
    assert!(points.len() >= 2, "a Bézier fit needs at least two points");
    let (p0, p5) = (points[0], points[points.len() - 1]);
    let mut params = chord_parameters(points);
    let mut control = solve_interior(points, &params, p0, p5);
    for _ in 0..REPARAMETERIZATION_PASSES {
        reparameterize(&control, points, &mut params);
        control = solve_interior(points, &params, p0, p5);
    }
    refine(&mut control, points, &mut params);
    let bezier = BezierStroke {
        control,
        source_len: points.len(),
        frame: Frame::of(points),
        max_error: max_distance(&control, points, &params),
    };
    (bezier, params)
}

/// Degree-5 fit with the curve endpoints pinned to the stroke endpoints.
///
/// # Panics
/// If the stroke has fewer than two points.
pub fn fit_bezier(stroke: &Stroke) -> BezierStroke {
    fit_with_parameters(&stroke.positions()).0
}
