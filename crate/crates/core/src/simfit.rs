//! Least-squares similarity transforms and the sketch-/stroke-level registrations built on them.

use crate::error::{Error, Result};
use crate::geom::{self, Vec2};
use crate::sketch::{Sketch, FORMAT_VERSION};
use serde::{Deserialize, Serialize};

/// `p' = s * Rot(theta) * p + t`, with `theta` in degrees in `(-180, 180]` and `s > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityTransform {
    pub theta_deg: f64,
    pub scale: f64,
    pub tx: f64,
    pub ty: f64,
}

/// Wraps an angle in degrees into `(-180, 180]`.
pub fn wrap_degrees(a: f64) -> f64 {
    let mut r = a % 360.0;
    if r <= -180.0 {
        r += 360.0;
    } else if r > 180.0 {
        r -= 360.0;
    }
    r
}

impl Default for SimilarityTransform {
    fn default() -> Self {
        SimilarityTransform::IDENTITY
    }
}

impl SimilarityTransform {
    pub const IDENTITY: SimilarityTransform = SimilarityTransform {
        theta_deg: 0.0,
        scale: 1.0,
        tx: 0.0,
        ty: 0.0,
    };

    pub fn new(theta_deg: f64, scale: f64, tx: f64, ty: f64) -> Self {
        assert!(scale > 0.0, "similarity scale must be positive");
        SimilarityTransform {
            theta_deg: wrap_degrees(theta_deg),
            scale,
            tx,
            ty,
        }
    }

    /// Rotation and scaling about `center`, followed by `shift`.
    pub fn about(center: Vec2, theta_deg: f64, scale: f64, shift: Vec2) -> Self {
        let linear = SimilarityTransform::new(theta_deg, scale, 0.0, 0.0);
        let moved = linear.apply_linear(center);
        let t = center - moved + shift;
        SimilarityTransform::new(theta_deg, scale, t.x, t.y)
    }

    pub fn translation(&self) -> Vec2 {
        Vec2::new(self.tx, self.ty)
    }

    /// Translation when the rotation and scaling are taken about `center`.
    pub fn translation_about(&self, center: Vec2) -> Vec2 {
        self.apply(center) - center
    }

    fn ab(&self) -> (f64, f64) {
        let r = self.theta_deg.to_radians();
        (self.scale * r.cos(), self.scale * r.sin())
    }

    fn apply_linear(&self, p: Vec2) -> Vec2 {
        let (a, b) = self.ab();
        Vec2::new(a * p.x - b * p.y, b * p.x + a * p.y)
    }

    pub fn apply(&self, p: Vec2) -> Vec2 {
        self.apply_linear(p) + self.translation()
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &SimilarityTransform) -> SimilarityTransform {
        let t = self.apply(other.translation());
        SimilarityTransform::new(
            self.theta_deg + other.theta_deg,
            self.scale * other.scale,
            t.x,
            t.y,
        )
    }

    pub fn inverse(&self) -> SimilarityTransform {
        let inv = SimilarityTransform::new(-self.theta_deg, 1.0 / self.scale, 0.0, 0.0);
        let t = -inv.apply_linear(self.translation());
        SimilarityTransform::new(-self.theta_deg, 1.0 / self.scale, t.x, t.y)
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        self.theta_deg.abs() <= tol
            && (self.scale - 1.0).abs() <= tol
            && self.tx.abs() <= tol
            && self.ty.abs() <= tol
    }
}

/// Sum of squared residuals `|dst_i - T(src_i)|^2`.
pub fn residual(transform: &SimilarityTransform, src: &[Vec2], dst: &[Vec2]) -> f64 {
    src.iter()
        .zip(dst)
        .map(|(&s, &d)| (d - transform.apply(s)).norm_sq())
        .sum()
}

const DEGENERATE_SPREAD: f64 = 1e-12;

/// Closed-form least-squares similarity mapping `src` onto `dst`.
///
/// With centered coordinates the optimum rotation is `atan2(Σ cross, Σ dot)`
/// and the scale is `sqrt(Σdot² + Σcross²) / Σ|src|²`.
pub fn fit_similarity(src: &[Vec2], dst: &[Vec2]) -> Result<SimilarityTransform> {
    if src.len() != dst.len() {
        return Err(Error::Correspondence(format!(
            "{} source points vs {} target points",
            src.len(),
            dst.len()
        )));
    }
    if src.len() < 2 {
        return Err(Error::Degenerate("need at least two point pairs".into()));
    }
    let cs = geom::centroid(src);
    let cd = geom::centroid(dst);
    let (mut dot, mut cross, mut spread) = (0.0, 0.0, 0.0);
    for (&s, &d) in src.iter().zip(dst) {
        let (a, b) = (s - cs, d - cd);
        dot += a.dot(b);
        cross += a.cross(b);
        spread += a.norm_sq();
    }
    let n = src.len() as f64;
    if spread / n <= DEGENERATE_SPREAD {
        return Err(Error::Degenerate("source points are coincident".into()));
    }
    let magnitude = dot.hypot(cross);
    if magnitude / n <= DEGENERATE_SPREAD {
        return Err(Error::Degenerate(
            "target points collapse to a single point".into(),
        ));
    }
    let theta = cross.atan2(dot);
    let scale = magnitude / spread;
    let linear = SimilarityTransform::new(theta.to_degrees(), scale, 0.0, 0.0);
    let t = cd - linear.apply_linear(cs);
    Ok(SimilarityTransform::new(
        theta.to_degrees(),
        scale,
        t.x,
        t.y,
    ))
}

/// Residual transform of a stroke once the sketch-level transform is removed: `local ∘ global⁻¹`.
pub fn relative_transform(
    global: &SimilarityTransform,
    local: &SimilarityTransform,
) -> SimilarityTransform {
    local.compose(&global.inverse())
}

fn check_correspondence(original: &Sketch, pixel_level: &Sketch) -> Result<()> {
    if !original.same_topology(pixel_level) {
        return Err(Error::Correspondence(
            "original and pixel-level sketches differ in stroke or point counts".into(),
        ));
    }
    Ok(())
}

/// One similarity over all point pairs (content strokes only when `content_only`), applied to every stroke.
pub fn register_sketch_level(
    original: &Sketch,
    pixel_level: &Sketch,
    content_only: bool,
) -> Result<(SimilarityTransform, Sketch)> {
    check_correspondence(original, pixel_level)?;
    let (mut src, mut dst) = (Vec::new(), Vec::new());
    for (a, b) in original.strokes.iter().zip(&pixel_level.strokes) {
        if content_only && !a.is_content() {
            continue;
        }
        src.extend(a.points.iter().map(|p| p.pos()));
        dst.extend(b.points.iter().map(|p| p.pos()));
    }
    let g = fit_similarity(&src, &dst)?;
    Ok((g, original.map_positions(|p| g.apply(p))))
}

/// Per-stroke similarities; degenerate strokes fall back to `fallback`.
pub fn register_stroke_level(
    original: &Sketch,
    pixel_level: &Sketch,
    fallback: &SimilarityTransform,
) -> Result<(Vec<SimilarityTransform>, Sketch)> {
    check_correspondence(original, pixel_level)?;
    let mut transforms = Vec::with_capacity(original.strokes.len());
    let mut out = original.clone_meta();
    for (a, b) in original.strokes.iter().zip(&pixel_level.strokes) {
        let l = match fit_similarity(&a.positions(), &b.positions()) {
            Ok(t) => t,
            Err(Error::Degenerate(_)) => *fallback,
            Err(e) => return Err(e),
        };
        out.strokes.push(a.map_positions(|p| l.apply(p)));
        transforms.push(l);
    }
    Ok((transforms, out))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiLevelRegistration {
    pub original: Sketch,
    pub pixel_level: Sketch,
    pub global: SimilarityTransform,
    pub sketch_level: Sketch,
    pub local: Vec<SimilarityTransform>,
    pub stroke_level: Sketch,
}

impl MultiLevelRegistration {
    pub fn relative_transforms(&self) -> Vec<SimilarityTransform> {
        self.local
            .iter()
            .map(|l| relative_transform(&self.global, l))
            .collect()
    }

    pub fn level(&self, level: Level) -> &Sketch {
        match level {
            Level::Original => &self.original,
            Level::Pixel => &self.pixel_level,
            Level::Sketch => &self.sketch_level,
            Level::Stroke => &self.stroke_level,
        }
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(LevelsDocument::from(self)).expect("levels serialize")
    }

    pub fn from_json_str(text: &str, source_name: &str) -> Result<Self> {
        let doc: LevelsDocument = serde_json::from_str(text).map_err(|e| Error::Format {
            source_name: source_name.to_string(),
            message: e.to_string(),
        })?;
        let m = MultiLevelRegistration {
            original: doc.original,
            pixel_level: doc.pixel_level,
            global: doc.global,
            sketch_level: doc.sketch_level,
            local: doc.strokes,
            stroke_level: doc.stroke_level,
        };
        if !(m.original.same_topology(&m.pixel_level)
            && m.original.same_topology(&m.sketch_level)
            && m.original.same_topology(&m.stroke_level)
            && m.local.len() == m.original.strokes.len())
        {
            return Err(Error::Correspondence(format!(
                "{source_name}: levels disagree in topology"
            )));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Original,
    Pixel,
    Sketch,
    Stroke,
}

impl std::str::FromStr for Level {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "original" => Ok(Level::Original),
            "pixel" => Ok(Level::Pixel),
            "sketch" => Ok(Level::Sketch),
            "stroke" => Ok(Level::Stroke),
            other => Err(Error::Validation(format!(
                "unknown registration level {other:?}"
            ))),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct LevelsDocument {
    format_version: u32,
    global: SimilarityTransform,
    strokes: Vec<SimilarityTransform>,
    sketch_level: Sketch,
    stroke_level: Sketch,
    original: Sketch,
    pixel_level: Sketch,
}

impl From<&MultiLevelRegistration> for LevelsDocument {
    fn from(m: &MultiLevelRegistration) -> Self {
        LevelsDocument {
            format_version: FORMAT_VERSION,
            global: m.global,
            strokes: m.local.clone(),
            sketch_level: m.sketch_level.clone(),
            stroke_level: m.stroke_level.clone(),
            original: m.original.clone(),
            pixel_level: m.pixel_level.clone(),
        }
    }
}

/// Fits both similarity levels between an original drawing and its pixel-level registration.
pub fn fit_levels(
    original: &Sketch,
    pixel_level: &Sketch,
    content_only: bool,
) -> Result<MultiLevelRegistration> {
    let (global, sketch_level) = register_sketch_level(original, pixel_level, content_only)?;
    let (local, stroke_level) = register_stroke_level(original, pixel_level, &global)?;
    Ok(MultiLevelRegistration {
        original: original.clone(),
        pixel_level: pixel_level.clone(),
        global,
        sketch_level,
        local,
        stroke_level,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sketch::Stroke;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec2> {
        (0..n)
            .map(|_| Vec2::new(rng.random_range(0.0..800.0), rng.random_range(0.0..800.0)))
            .collect()
    }

    #[test]
    fn identity_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = random_points(&mut rng, 20);
        let t = fit_similarity(&pts, &pts).unwrap();
        assert!(t.is_identity(1e-9), "{t:?}");
    }

    #[test]
    fn recovers_known_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let src = random_points(&mut rng, 30);
        let truth = SimilarityTransform::new(17.0, 1.3, 40.0, -25.0);
        let dst: Vec<Vec2> = src.iter().map(|&p| truth.apply(p)).collect();
        let t = fit_similarity(&src, &dst).unwrap();
        assert!((t.theta_deg - 17.0).abs() < 1e-6);
        assert!((t.scale - 1.3).abs() < 1e-6);
        assert!((t.tx - 40.0).abs() < 1e-6 && (t.ty + 25.0).abs() < 1e-6);
    }

    #[test]
    fn noisy_fit_beats_generator() {
        use rand_distr::{Distribution, Normal};
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = Normal::new(0.0, 0.5).unwrap();
        let src = random_points(&mut rng, 50);
        let truth = SimilarityTransform::new(-33.0, 0.8, 5.0, 9.0);
        let dst: Vec<Vec2> = src
            .iter()
            .map(|&p| truth.apply(p) + Vec2::new(noise.sample(&mut rng), noise.sample(&mut rng)))
            .collect();
        let fit = fit_similarity(&src, &dst).unwrap();
        assert!(residual(&fit, &src, &dst) <= residual(&truth, &src, &dst));
    }

    #[test]
    fn fit_is_a_local_minimum_on_a_parameter_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let src = random_points(&mut rng, 12);
        let dst: Vec<Vec2> = src
            .iter()
            .map(|&p| {
                Vec2::new(
                    p.y * 0.4 + rng.random_range(-30.0..30.0),
                    p.x * 0.9 + rng.random_range(-30.0..30.0),
                )
            })
            .collect();
        let fit = fit_similarity(&src, &dst).unwrap();
        let best = residual(&fit, &src, &dst);
        for dt in [-0.01, 0.0, 0.01] {
            for ds in [-1e-4, 0.0, 1e-4] {
                for dx in [-0.01, 0.0, 0.01] {
                    for dy in [-0.01, 0.0, 0.01] {
                        let probe = SimilarityTransform::new(
                            fit.theta_deg + dt,
                            fit.scale + ds,
                            fit.tx + dx,
                            fit.ty + dy,
                        );
                        assert!(residual(&probe, &src, &dst) >= best - 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn coincident_source_is_degenerate() {
        let src = vec![Vec2::new(3.0, 3.0); 4];
        let dst = vec![
            Vec2::new(1.0, 0.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(0.0, 5.0),
            Vec2::new(1.0, 1.0),
        ];
        assert!(matches!(
            fit_similarity(&src, &dst),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(
            fit_similarity(&src[..2], &dst),
            Err(Error::Correspondence(_))
        ));
    }

    #[test]
    fn relative_of_equal_transforms_is_identity() {
        let g = SimilarityTransform::new(12.0, 1.1, 3.0, 4.0);
        assert!(relative_transform(&g, &g).is_identity(1e-9));
        let l = SimilarityTransform::new(-70.0, 0.7, -3.0, 14.0);
        let r = relative_transform(&SimilarityTransform::IDENTITY, &l);
        assert!((r.theta_deg - l.theta_deg).abs() < 1e-12 && (r.tx - l.tx).abs() < 1e-12);
    }

    fn two_stroke_sketch() -> Sketch {
        Sketch::new(vec![
            Stroke::from_xy(&[(100.0, 100.0), (150.0, 120.0), (200.0, 180.0)]),
            Stroke::from_xy(&[
                (300.0, 400.0),
                (320.0, 480.0),
                (390.0, 500.0),
                (420.0, 430.0),
            ]),
        ])
    }

    #[test]
    fn per_stroke_transforms_are_recovered() {
        let original = two_stroke_sketch();
        let t0 = SimilarityTransform::new(10.0, 1.2, 5.0, -7.0);
        let t1 = SimilarityTransform::new(-25.0, 0.9, -12.0, 30.0);
        let mut pixel = original.clone();
        pixel.strokes[0] = original.strokes[0].map_positions(|p| t0.apply(p));
        pixel.strokes[1] = original.strokes[1].map_positions(|p| t1.apply(p));
        let m = fit_levels(&original, &pixel, true).unwrap();
        for (got, want) in m.local.iter().zip([t0, t1]) {
            assert!((got.theta_deg - want.theta_deg).abs() < 1e-6);
            assert!((got.scale - want.scale).abs() < 1e-6);
            assert!((got.tx - want.tx).abs() < 1e-6 && (got.ty - want.ty).abs() < 1e-6);
        }
        let sketch_res = residual(&m.global, &original.positions(), &pixel.positions());
        let stroke_res: f64 = m
            .local
            .iter()
            .zip(original.strokes.iter().zip(&pixel.strokes))
            .map(|(l, (a, b))| residual(l, &a.positions(), &b.positions()))
            .sum();
        assert!(stroke_res <= sketch_res);
    }

    #[test]
    fn degenerate_stroke_uses_fallback() {
        let mut original = two_stroke_sketch();
        original
            .strokes
            .push(Stroke::from_xy(&[(5.0, 5.0), (5.0, 5.0)]));
        let pixel = original.map_positions(|p| p + Vec2::new(1.0, 2.0));
        let m = fit_levels(&original, &pixel, true).unwrap();
        assert_eq!(m.local[2], m.global);
    }

    #[test]
    fn mismatched_counts_are_rejected() {
        let original = two_stroke_sketch();
        let mut pixel = original.clone();
        pixel.strokes[1].points.pop();
        assert!(matches!(
            register_sketch_level(&original, &pixel, true),
            Err(Error::Correspondence(_))
        ));
    }

    #[test]
    fn levels_json_round_trip() {
        let original = two_stroke_sketch();
        let pixel =
            original.map_positions(|p| Vec2::new(p.x * 1.01 + 2.0, p.y - 3.0 + (p.x * 0.05).sin()));
        let m = fit_levels(&original, &pixel, true).unwrap();
        let text = serde_json::to_string(&m.to_json_value()).unwrap();
        let back = MultiLevelRegistration::from_json_str(&text, "m").unwrap();
        assert_eq!(back, m);
    }

    fn arb_transform() -> impl Strategy<Value = SimilarityTransform> {
        (
            -179.9f64..180.0,
            0.3f64..3.0,
            -200.0f64..200.0,
            -200.0f64..200.0,
        )
            .prop_map(|(a, s, x, y)| SimilarityTransform::new(a, s, x, y))
    }

    proptest! {
        #[test]
        fn inverse_composes_to_identity(t in arb_transform()) {
            prop_assert!(t.compose(&t.inverse()).is_identity(1e-9));
            prop_assert!(t.inverse().compose(&t).is_identity(1e-9));
        }

        #[test]
        fn relative_then_global_equals_local(g in arb_transform(), l in arb_transform(), x in 0.0f64..800.0, y in 0.0f64..800.0) {
            let p = Vec2::new(x, y);
            let r = relative_transform(&g, &l);
            let via = r.apply(g.apply(p));
            prop_assert!(via.dist(l.apply(p)) < 1e-9);
        }

        #[test]
        fn fit_is_rotation_equivariant(seed in any::<u64>(), rot in -90.0f64..90.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let src = random_points(&mut rng, 10);
            let dst = random_points(&mut rng, 10);
            let base = fit_similarity(&src, &dst).unwrap();
            let r = SimilarityTransform::new(rot, 1.0, 0.0, 0.0);
            let src_r: Vec<Vec2> = src.iter().map(|&p| r.apply(p)).collect();
            let dst_r: Vec<Vec2> = dst.iter().map(|&p| r.apply(p)).collect();
            let rotated = fit_similarity(&src_r, &dst_r).unwrap();
            prop_assert!((rotated.scale - base.scale).abs() < 1e-9 * base.scale.max(1.0));
            // both point sets rotated: the relative rotation is unchanged
            prop_assert!(wrap_degrees(rotated.theta_deg - base.theta_deg).abs() < 1e-9);
            // only the targets rotated: the fitted rotation shifts by exactly that angle
            let shifted = fit_similarity(&src, &dst_r).unwrap();
            prop_assert!((shifted.scale - base.scale).abs() < 1e-9 * base.scale.max(1.0));
            prop_assert!(wrap_degrees(shifted.theta_deg - base.theta_deg - rot).abs() < 1e-9);
        }
    }
}
