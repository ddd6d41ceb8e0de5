//! Deterministic synthetic tracings and smooth warps, used by tests, benchmarks and demos.

use crate::geom::{self, Vec2};
use crate::sketch::{resample_stroke, Group, Point, Sketch, Stroke, StrokeKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// Builds a stroke from positions with a constant drawing speed of 1 px/ms starting at `t0`.
pub fn timed_stroke(positions: &[Vec2], t0: f64) -> Stroke {
    let cum = geom::cumulative_lengths(positions);
    Stroke {
        points: positions
            .iter()
            .zip(&cum)
            .map(|(p, s)| Point::new(p.x, p.y, t0 + s, 0.5))
            .collect(),
        kind: StrokeKind::Content,
        width: 2.0,
        extra: Default::default(),
    }
}

fn polyline_arc(center: Vec2, rx: f64, ry: f64, a0: f64, a1: f64, n: usize) -> Vec<Vec2> {
    (0..=n)
        .map(|i| {
            let a = a0 + (a1 - a0) * i as f64 / n as f64;
            Vec2::new(center.x + rx * a.cos(), center.y + ry * a.sin())
        })
        .collect()
}

/// A tracing-like sketch of well separated primitives: a box, an ellipse, a wave and a bracket.
pub fn tracing(seed: u64) -> Sketch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jitter = |r: f64| rng.random_range(-r..r);
    let mut shapes: Vec<Vec<Vec2>> = Vec::new();
    // box as four connected sides
    let (bx, by) = (150.0 + jitter(30.0), 150.0 + jitter(30.0));
    let (bw, bh) = (200.0 + jitter(40.0), 160.0 + jitter(30.0));
    let corners = [
        Vec2::new(bx, by),
        Vec2::new(bx + bw, by),
        Vec2::new(bx + bw, by + bh),
        Vec2::new(bx, by + bh),
    ];
    for k in 0..4 {
        shapes.push(vec![corners[k], corners[(k + 1) % 4]]);
    }
    // ellipse split into two arcs
    let c = Vec2::new(560.0 + jitter(30.0), 250.0 + jitter(30.0));
    let (rx, ry) = (110.0 + jitter(20.0), 80.0 + jitter(20.0));
    shapes.push(polyline_arc(c, rx, ry, 0.0, PI, 48));
    shapes.push(polyline_arc(c, rx, ry, PI, 2.0 * PI, 48));
    // a wave
    let (wx, wy) = (140.0 + jitter(20.0), 560.0 + jitter(30.0));
    let amp = 40.0 + jitter(10.0);
    shapes.push(
        (0..=60)
            .map(|i| {
                let x = i as f64 * 5.0;
                Vec2::new(wx + x, wy + amp * (x / 300.0 * 2.0 * PI).sin())
            })
            .collect(),
    );
    // a bracket shape
    let (kx, ky) = (540.0 + jitter(30.0), 500.0 + jitter(30.0));
    shapes.push(vec![
        Vec2::new(kx, ky),
        Vec2::new(kx + 140.0, ky),
        Vec2::new(kx + 140.0, ky + 180.0),
        Vec2::new(kx, ky + 180.0),
    ]);
    let mut t = 0.0;
    let strokes = shapes
        .iter()
        .map(|pts| {
            let s = timed_stroke(pts, t);
            t = s.points.last().unwrap().t + 300.0;
            resample_stroke(&s, 4.0)
        })
        .collect();
    Sketch::new(strokes).with_meta(&format!("prompt-{seed}"), "tracer", Group::Tracing)
}

/// Smooth deformation built from two low-frequency sinusoids per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothWarp {
    pub amplitude: f64,
    freq: [[f64; 2]; 4],
    phase: [f64; 4],
    mix: [f64; 4],
}

impl SmoothWarp {
    /// Random warp whose displacement magnitude never exceeds `amplitude`.
    pub fn random(seed: u64, amplitude: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_a11);
        let mut freq = [[0.0; 2]; 4];
        let mut phase = [0.0; 4];
        let mut mix = [0.0; 4];
        for k in 0..4 {
            // wavelengths between 500 and 1600 px
            let wl = rng.random_range(500.0..1600.0);
            let dir = rng.random_range(0.0..2.0 * PI);
            freq[k] = [2.0 * PI / wl * dir.cos(), 2.0 * PI / wl * dir.sin()];
            phase[k] = rng.random_range(0.0..2.0 * PI);
            mix[k] = rng.random_range(0.3..1.0);
        }
        SmoothWarp {
            amplitude,
            freq,
            phase,
            mix,
        }
    }

    /// Pure sinusoidal warp `dx = a sin(2πy/λ)`, `dy = a sin(2πx/λ)`.
    pub fn sinusoidal(amplitude: f64, wavelength: f64) -> Self {
        let k = 2.0 * PI / wavelength;
        SmoothWarp {
            amplitude,
            freq: [[0.0, k], [0.0, 0.0], [k, 0.0], [0.0, 0.0]],
            phase: [0.0; 4],
            mix: [1.0, 0.0, 1.0, 0.0],
        }
    }

    pub fn displacement(&self, p: Vec2) -> Vec2 {
        let wave = |k: usize| {
            self.mix[k] * (self.freq[k][0] * p.x + self.freq[k][1] * p.y + self.phase[k]).sin()
        };
        let nx = self.mix[0] + self.mix[1];
        let ny = self.mix[2] + self.mix[3];
        let v = Vec2::new((wave(0) + wave(1)) / nx, (wave(2) + wave(3)) / ny);
        // each axis is bounded by amplitude / sqrt(2), so the vector never exceeds amplitude
        v * (self.amplitude / std::f64::consts::SQRT_2)
    }

    pub fn apply(&self, sketch: &Sketch) -> Sketch {
        sketch.map_positions(|p| p + self.displacement(p))
    }
}

/// A "freehand" drawing made by warping the tracing; point counts are preserved.
pub fn warped_drawing(tracing: &Sketch, warp: &SmoothWarp, user: &str, group: Group) -> Sketch {
    let mut s = warp.apply(tracing);
    s.user_id = user.to_string();
    s.group = group;
    s
}

/// Mean distance from every point of `sketch` to the nearest segment of `reference` (brute force).
pub fn mean_closest_distance(sketch: &Sketch, reference: &Sketch) -> f64 {
    let polylines: Vec<Vec<Vec2>> = reference.strokes.iter().map(|s| s.positions()).collect();
    let pts = sketch.positions();
    let total: f64 = pts
        .iter()
        .map(|&p| {
            polylines
                .iter()
                .flat_map(|pl| {
                    pl.windows(2)
                        .map(move |w| geom::point_segment_distance(w[0], w[1], p))
                })
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    total / pts.len().max(1) as f64
}
