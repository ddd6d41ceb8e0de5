//! Small 2D vector and polyline helpers shared across modules.

use serde::{Deserialize, Serialize};
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dist(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    /// Counter-clockwise perpendicular (in a y-down frame this points to the right of travel).
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        (n > 1e-12).then(|| self * (1.0 / n))
    }

    pub fn lerp(self, o: Vec2, t: f64) -> Vec2 {
        self + (o - self) * t
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl SubAssign for Vec2 {
    fn sub_assign(&mut self, o: Vec2) {
        self.x -= o.x;
        self.y -= o.y;
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

pub fn centroid(points: &[Vec2]) -> Vec2 {
    if points.is_empty() {
        return Vec2::ZERO;
    }
    let sum = points.iter().fold(Vec2::ZERO, |acc, &p| acc + p);
    sum * (1.0 / points.len() as f64)
}

/// Diagonal of the axis-aligned bounding box.
pub fn bbox_diagonal(points: &[Vec2]) -> f64 {
    let (mut lo, mut hi) = (Vec2::new(f64::MAX, f64::MAX), Vec2::new(f64::MIN, f64::MIN));
    for p in points {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    }
    if points.is_empty() {
        0.0
    } else {
        (hi - lo).norm()
    }
}

/// Cumulative arc length at each vertex; first entry is 0.
pub fn cumulative_lengths(points: &[Vec2]) -> Vec<f64> {
    let mut acc = Vec::with_capacity(points.len());
    let mut total = 0.0;
    for (i, p) in points.iter().enumerate() {
        if i > 0 {
            total += p.dist(points[i - 1]);
        }
        acc.push(total);
    }
    acc
}

pub fn polyline_length(points: &[Vec2]) -> f64 {
    points.windows(2).map(|w| w[0].dist(w[1])).sum()
}

/// Closest point of segment `a`-`b` to `q`, as the clamped segment parameter.
pub fn segment_param(a: Vec2, b: Vec2, q: Vec2) -> f64 {
    let d = b - a;
    let len_sq = d.norm_sq();
    if len_sq <= 0.0 {
        0.0
    } else {
        ((q - a).dot(d) / len_sq).clamp(0.0, 1.0)
    }
}

pub fn point_segment_distance(a: Vec2, b: Vec2, q: Vec2) -> f64 {
    let t = segment_param(a, b, q);
    a.lerp(b, t).dist(q)
}

/// Nearest location on a polyline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolylineProjection {
    pub distance: f64,
    pub point: Vec2,
    /// Segment index (`points[segment]` to `points[segment + 1]`).
    pub segment: usize,
    pub t: f64,
    /// Arc length from the first vertex to `point`.
    pub arc_length: f64,
}

/// Projects `q` onto the polyline; the first segment wins ties. Panics on an empty slice.
pub fn project_onto_polyline(points: &[Vec2], q: Vec2) -> PolylineProjection {
    assert!(!points.is_empty(), "empty polyline");
    if points.len() == 1 {
        return PolylineProjection {
            distance: points[0].dist(q),
            point: points[0],
            segment: 0,
            t: 0.0,
            arc_length: 0.0,
        };
    }
    let mut best = PolylineProjection {
        distance: f64::INFINITY,
        point: points[0],
        segment: 0,
        t: 0.0,
        arc_length: 0.0,
    };
    let mut arc = 0.0;
    for (i, w) in points.windows(2).enumerate() {
        let t = segment_param(w[0], w[1], q);
        let p = w[0].lerp(w[1], t);
        let d = p.dist(q);
        let seg_len = w[0].dist(w[1]);
        if d < best.distance {
            best = PolylineProjection {
                distance: d,
                point: p,
                segment: i,
                t,
                arc_length: arc + t * seg_len,
            };
        }
        arc += seg_len;
    }
    best
}

/// Point at a given arc length (clamped to the polyline).
pub fn point_at_arc_length(points: &[Vec2], cumulative: &[f64], s: f64) -> Vec2 {
    let n = points.len();
    if n == 1 {
        return points[0];
    }
    let total = cumulative[n - 1];
    let s = s.clamp(0.0, total);
    // index of the last vertex with cumulative <= s
    let idx = match cumulative.binary_search_by(|c| c.partial_cmp(&s).unwrap()) {
        Ok(i) => i,
        Err(i) => i - 1,
    }
    .min(n - 2);
    let seg = cumulative[idx + 1] - cumulative[idx];
    let t = if seg > 0.0 {
        (s - cumulative[idx]) / seg
    } else {
        0.0
    };
    points[idx].lerp(points[idx + 1], t)
}

/// Point at a fraction in `[0, 1]` of the total arc length.
pub fn point_at_arc_fraction(points: &[Vec2], fraction: f64) -> Vec2 {
    let cum = cumulative_lengths(points);
    let total = *cum.last().unwrap_or(&0.0);
    point_at_arc_length(points, &cum, fraction * total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_on_l_shape() {
        let pts = [
            Vec2::new(0.0, 0.0),
            Vec2::new(10.0, 0.0),
            Vec2::new(10.0, 10.0),
        ];
        let p = project_onto_polyline(&pts, Vec2::new(12.0, 4.0));
        assert_eq!(p.segment, 1);
        assert!((p.distance - 2.0).abs() < 1e-12);
        assert!((p.arc_length - 14.0).abs() < 1e-12);
    }

    #[test]
    fn arc_fraction_midpoint() {
        let pts = [
            Vec2::new(0.0, 0.0),
            Vec2::new(10.0, 0.0),
            Vec2::new(10.0, 10.0),
        ];
        assert_eq!(point_at_arc_fraction(&pts, 0.5), Vec2::new(10.0, 0.0));
        assert_eq!(point_at_arc_fraction(&pts, 0.75), Vec2::new(10.0, 5.0));
    }
}
