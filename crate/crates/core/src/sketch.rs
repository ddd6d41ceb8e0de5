//! Vector sketch data model and the JSON exchange format.
//!
//! Coordinates are canvas pixels with the origin at the top-left corner,
//! x to the right and y downward. Timestamps are milliseconds since the
//! start of the drawing session.

use crate::error::{Error, Result};
use crate::geom::{self, Vec2};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::fmt;
use std::path::Path;

/// Consecutive points closer than this are merged at load time.
pub const DUPLICATE_EPS: f64 = 1e-6;
/// Strokes with less total arc length than this are dropped at load time.
pub const MIN_STROKE_LENGTH: f64 = 2.0;
pub const DEFAULT_CANVAS: (u32, u32) = (800, 800);

/// Version stamped into every JSON document the toolkit writes.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    /// Milliseconds since the drawing started.
    pub t: f64,
    /// Normalized pen pressure in `[0, 1]`.
    pub pressure: f64,
}

impl Point {
    pub fn new(x: f64, y: f64, t: f64, pressure: f64) -> Self {
        Point { x, y, t, pressure }
    }

    pub fn pos(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn with_pos(&self, p: Vec2) -> Self {
        Point {
            x: p.x,
            y: p.y,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrokeKind {
    Content,
    Scaffold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Novice,
    Professional,
    Tracing,
    Synthetic,
}

impl Group {
    pub fn as_str(&self) -> &'static str {
        match self {
            Group::Novice => "novice",
            Group::Professional => "professional",
            Group::Tracing => "tracing",
            Group::Synthetic => "synthetic",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Group {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "novice" | "N" | "n" => Ok(Group::Novice),
            "professional" | "P" | "p" => Ok(Group::Professional),
            "tracing" => Ok(Group::Tracing),
            "synthetic" => Ok(Group::Synthetic),
            other => Err(Error::Validation(format!("unknown group {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stroke {
    pub points: Vec<Point>,
    pub kind: StrokeKind,
    /// Stroke weight in pixels as captured; rasterization uses its own width.
    pub width: f64,
    /// Keys of the stroke object not understood by the toolkit.
    pub extra: Map<String, Value>,
}

impl Stroke {
    pub fn new(points: Vec<Point>, kind: StrokeKind) -> Self {
        Stroke {
            points,
            kind,
            width: 1.0,
            extra: Map::new(),
        }
    }

    /// Content stroke from bare coordinates with t = index and unit pressure.
    pub fn from_xy(coords: &[(f64, f64)]) -> Self {
        let points = coords
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| Point::new(x, y, i as f64, 1.0))
            .collect();
        Stroke::new(points, StrokeKind::Content)
    }

    pub fn positions(&self) -> Vec<Vec2> {
        self.points.iter().map(Point::pos).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn arc_length(&self) -> f64 {
        geom::polyline_length(&self.positions())
    }

    pub fn is_content(&self) -> bool {
        self.kind == StrokeKind::Content
    }

    /// Copy of the stroke with every position mapped through `f`; t, pressure and order untouched.
    pub fn map_positions(&self, mut f: impl FnMut(Vec2) -> Vec2) -> Stroke {
        Stroke {
            points: self.points.iter().map(|p| p.with_pos(f(p.pos()))).collect(),
            kind: self.kind,
            width: self.width,
            extra: self.extra.clone(),
        }
    }

    /// Removes consecutive near-duplicate points; returns the number removed.
    pub fn dedup(&mut self) -> usize {
        let before = self.points.len();
        let mut out: Vec<Point> = Vec::with_capacity(before);
        for p in self.points.drain(..) {
            match out.last() {
                Some(q) if q.pos().dist(p.pos()) < DUPLICATE_EPS => {}
                _ => out.push(p),
            }
        }
        self.points = out;
        before - self.points.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sketch {
    /// Strokes in drawing order.
    pub strokes: Vec<Stroke>,
    pub prompt_id: String,
    pub user_id: String,
    pub group: Group,
    pub canvas: (u32, u32),
    /// Top-level keys not understood by the toolkit, preserved on save.
    pub extra: Map<String, Value>,
}

impl Sketch {
    pub fn new(strokes: Vec<Stroke>) -> Self {
        Sketch {
            strokes,
            prompt_id: String::new(),
            user_id: String::new(),
            group: Group::Novice,
            canvas: DEFAULT_CANVAS,
            extra: Map::new(),
        }
    }

    pub fn with_meta(mut self, prompt_id: &str, user_id: &str, group: Group) -> Self {
        self.prompt_id = prompt_id.to_string();
        self.user_id = user_id.to_string();
        self.group = group;
        self
    }

    pub fn point_count(&self) -> usize {
        self.strokes.iter().map(Stroke::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.strokes.is_empty()
    }

    pub fn has_scaffold(&self) -> bool {
        self.strokes.iter().any(|s| s.kind == StrokeKind::Scaffold)
    }

    pub fn content_strokes(&self) -> impl Iterator<Item = &Stroke> {
        self.strokes.iter().filter(|s| s.is_content())
    }

    /// Same sketch restricted to content strokes.
    pub fn content_only(&self) -> Sketch {
        Sketch {
            strokes: self.content_strokes().cloned().collect(),
            ..self.clone_meta()
        }
    }

    /// Metadata copy with no strokes.
    pub fn clone_meta(&self) -> Sketch {
        Sketch {
            strokes: Vec::new(),
            prompt_id: self.prompt_id.clone(),
            user_id: self.user_id.clone(),
            group: self.group,
            canvas: self.canvas,
            extra: self.extra.clone(),
        }
    }

    pub fn positions(&self) -> Vec<Vec2> {
        self.strokes
            .iter()
            .flat_map(|s| s.points.iter().map(Point::pos))
            .collect()
    }

    pub fn map_positions(&self, mut f: impl FnMut(Vec2) -> Vec2) -> Sketch {
        Sketch {
            strokes: self
                .strokes
                .iter()
                .map(|s| s.map_positions(&mut f))
                .collect(),
            ..self.clone_meta()
        }
    }

    /// True when both sketches have the same stroke count and per-stroke point counts.
    pub fn same_topology(&self, other: &Sketch) -> bool {
        self.strokes.len() == other.strokes.len()
            && self
                .strokes
                .iter()
                .zip(&other.strokes)
                .all(|(a, b)| a.len() == b.len())
    }

    pub fn canvas_diagonal(&self) -> f64 {
        (self.canvas.0 as f64).hypot(self.canvas.1 as f64)
    }

    /// Earliest and latest timestamps over all points.
    pub fn time_span(&self) -> Option<(f64, f64)> {
        let mut it = self
            .strokes
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.t));
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), t| (lo.min(t), hi.max(t))))
    }

    /// Checks point and stroke invariants.
    pub fn validate(&self) -> Result<()> {
        if self.canvas.0 == 0 || self.canvas.1 == 0 {
            return Err(Error::Validation(
                "canvas dimensions must be positive".into(),
            ));
        }
        for (si, s) in self.strokes.iter().enumerate() {
            validate_stroke(si, s)?;
        }
        Ok(())
    }

    /// Applies the load-time cleaning rules: duplicate points merged, short strokes dropped.
    pub fn clean(&mut self) {
        for s in &mut self.strokes {
            s.dedup();
        }
        self.strokes
            .retain(|s| s.points.len() >= 2 && s.arc_length() >= MIN_STROKE_LENGTH);
    }

    pub fn from_json_str(text: &str, source_name: &str) -> Result<Sketch> {
        let raw: RawSketch = serde_json::from_str(text).map_err(|e| Error::Format {
            source_name: source_name.to_string(),
            message: e.to_string(),
        })?;
        let mut sketch = raw.into_sketch();
        sketch.validate()?;
        sketch.clean();
        Ok(sketch)
    }

    pub fn to_json_value(&self) -> Value {
        serde_json::to_value(RawSketch::from_sketch(self)).expect("sketch serializes")
    }

    pub fn to_json_string(&self) -> String {
        let mut s =
            serde_json::to_string_pretty(&RawSketch::from_sketch(self)).expect("sketch serializes");
        s.push('\n');
        s
    }
}

fn validate_stroke(index: usize, s: &Stroke) -> Result<()> {
    if !(s.width > 0.0 && s.width.is_finite()) {
        return Err(Error::Validation(format!(
            "stroke {index}: width must be positive"
        )));
    }
    for (pi, p) in s.points.iter().enumerate() {
        if !(p.x.is_finite() && p.y.is_finite() && p.t.is_finite() && p.pressure.is_finite()) {
            return Err(Error::Validation(format!(
                "stroke {index}, point {pi}: non-finite value"
            )));
        }
        if p.t < 0.0 {
            return Err(Error::Validation(format!(
                "stroke {index}, point {pi}: negative timestamp"
            )));
        }
        if !(0.0..=1.0).contains(&p.pressure) {
            return Err(Error::Validation(format!(
                "stroke {index}, point {pi}: pressure {} outside [0, 1]",
                p.pressure
            )));
        }
    }
    if let Some(pi) = s.points.windows(2).position(|w| w[1].t < w[0].t) {
        return Err(Error::Validation(format!(
            "stroke {index}: timestamps decrease at point {}",
            pi + 1
        )));
    }
    Ok(())
}

pub fn load_sketch(path: impl AsRef<Path>) -> Result<Sketch> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Sketch::from_json_str(&text, &path.display().to_string())
}

pub fn save_sketch(sketch: &Sketch, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    crate::io::write_atomic(path, sketch.to_json_string().as_bytes())
}

#[derive(Serialize, Deserialize)]
struct RawStroke {
    kind: StrokeKind,
    width: f64,
    points: Vec<[f64; 4]>,
    #[serde(flatten)]
    extra: Map<String, Value>,
}

#[derive(Serialize, Deserialize)]
struct RawSketch {
    #[serde(default = "format_version")]
    format_version: u32,
    prompt_id: String,
    user_id: String,
    group: Group,
    #[serde(default = "default_canvas")]
    canvas: [u32; 2],
    strokes: Vec<RawStroke>,
    #[serde(flatten)]
    extra: Map<String, Value>,
}

fn format_version() -> u32 {
    FORMAT_VERSION
}

fn default_canvas() -> [u32; 2] {
    [DEFAULT_CANVAS.0, DEFAULT_CANVAS.1]
}

impl RawSketch {
    fn into_sketch(self) -> Sketch {
        Sketch {
            strokes: self
                .strokes
                .into_iter()
                .map(|s| Stroke {
                    points: s
                        .points
                        .iter()
                        .map(|p| Point::new(p[0], p[1], p[2], p[3]))
                        .collect(),
                    kind: s.kind,
                    width: s.width,
                    extra: s.extra,
                })
                .collect(),
            prompt_id: self.prompt_id,
            user_id: self.user_id,
            group: self.group,
            canvas: (self.canvas[0], self.canvas[1]),
            extra: self.extra,
        }
    }

    fn from_sketch(s: &Sketch) -> RawSketch {
        RawSketch {
            format_version: FORMAT_VERSION,
            prompt_id: s.prompt_id.clone(),
            user_id: s.user_id.clone(),
            group: s.group,
            canvas: [s.canvas.0, s.canvas.1],
            strokes: s
                .strokes
                .iter()
                .map(|st| RawStroke {
                    kind: st.kind,
                    width: st.width,
                    points: st
                        .points
                        .iter()
                        .map(|p| [p.x, p.y, p.t, p.pressure])
                        .collect(),
                    extra: st.extra.clone(),
                })
                .collect(),
            extra: s.extra.clone(),
        }
    }
}

impl Serialize for Sketch {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        RawSketch::from_sketch(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Sketch {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let mut sketch = RawSketch::deserialize(deserializer)?.into_sketch();
        sketch.validate().map_err(serde::de::Error::custom)?;
        sketch.clean();
        Ok(sketch)
    }
}

/// Resamples a stroke so consecutive points are at most `spacing` apart along the polyline.
///
/// Every original vertex is kept and each segment longer than `spacing` is
/// split into equal parts, so the result lies exactly on the input polyline.
/// Time and pressure are interpolated linearly in arc length.
pub fn resample_stroke(stroke: &Stroke, spacing: f64) -> Stroke {
    assert!(spacing > 0.0, "spacing must be positive");
    if stroke.points.len() < 2 || stroke.arc_length() <= 0.0 {
        return stroke.clone();
    }
    let mut points = Vec::with_capacity(stroke.points.len());
    points.push(stroke.points[0]);
    for w in stroke.points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = a.pos().dist(b.pos());
        let pieces = (len / spacing).ceil().max(1.0) as usize;
        for k in 1..=pieces {
            if k == pieces {
                points.push(b);
            } else {
                let f = k as f64 / pieces as f64;
                points.push(Point {
                    x: a.x + (b.x - a.x) * f,
                    y: a.y + (b.y - a.y) * f,
                    t: a.t + (b.t - a.t) * f,
                    pressure: a.pressure + (b.pressure - a.pressure) * f,
                });
            }
        }
    }
    Stroke {
        points,
        kind: stroke.kind,
        width: stroke.width,
        extra: stroke.extra.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_stroke_json(points: &str) -> String {
        format!(
            r#"{{"prompt_id":"p1","user_id":"u1","group":"novice","canvas":[800,800],
               "strokes":[{{"kind":"content","width":2.0,"points":{points}}}]}}"#
        )
    }

    #[test]
    fn loads_three_point_stroke() {
        let s = Sketch::from_json_str(
            &one_stroke_json("[[0,0,0,0.5],[5,0,10,0.5],[10,0,20,0.5]]"),
            "t",
        )
        .unwrap();
        assert_eq!(s.strokes.len(), 1);
        assert_eq!(s.strokes[0].len(), 3);
        assert_eq!(s.group, Group::Novice);
    }

    #[test]
    fn coincident_points_are_merged() {
        let s = Sketch::from_json_str(
            &one_stroke_json("[[0,0,0,0.5],[5,0,10,0.5],[5,0,11,0.5],[10,0,20,0.5]]"),
            "t",
        )
        .unwrap();
        assert_eq!(s.strokes[0].len(), 3);
    }

    #[test]
    fn decreasing_time_names_the_stroke() {
        let err =
            Sketch::from_json_str(&one_stroke_json("[[0,0,5,0.5],[5,0,1,0.5]]"), "t").unwrap_err();
        match err {
            Error::Validation(msg) => assert!(msg.contains("stroke 0"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_json_reports_position() {
        let err = Sketch::from_json_str("{\"prompt_id\": 3}", "bad.json").unwrap_err();
        match err {
            Error::Format {
                message,
                source_name,
            } => {
                assert_eq!(source_name, "bad.json");
                assert!(message.contains("line"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
        let err = Sketch::from_json_str(
            r#"{"prompt_id":"a","user_id":"b","group":"novice","strokes":[{"width":1,"points":[]}]}"#,
            "x",
        )
        .unwrap_err();
        assert!(err.to_string().contains("kind"), "{err}");
    }

    #[test]
    fn short_and_dot_strokes_are_dropped() {
        let text = r#"{"prompt_id":"p","user_id":"u","group":"professional","strokes":[
            {"kind":"content","width":1,"points":[[1,1,0,1],[1,1,1,1]]},
            {"kind":"scaffold","width":1,"points":[[1,1,0,1],[2,1,1,1]]},
            {"kind":"content","width":1,"points":[[1,1,0,1],[9,1,1,1]]}]}"#;
        let s = Sketch::from_json_str(text, "t").unwrap();
        assert_eq!(s.strokes.len(), 1);
        assert_eq!(s.canvas, DEFAULT_CANVAS);
    }

    #[test]
    fn unknown_keys_survive_round_trip() {
        let text = r#"{"prompt_id":"p","user_id":"u","group":"tracing","canvas":[640,480],"camera":{"az":30},
            "strokes":[{"kind":"content","width":1,"tool":"pen","points":[[1,1,0,1],[9,1,1,1]]}]}"#;
        let s = Sketch::from_json_str(text, "t").unwrap();
        assert_eq!(s.extra["camera"]["az"], 30);
        assert_eq!(s.strokes[0].extra["tool"], "pen");
        let again = Sketch::from_json_str(&s.to_json_string(), "t").unwrap();
        assert_eq!(again, s);
    }

    #[test]
    fn resample_straight_segment() {
        let s = Stroke::from_xy(&[(0.0, 0.0), (10.0, 0.0)]);
        let r = resample_stroke(&s, 2.0);
        let xs: Vec<f64> = r.points.iter().map(|p| p.x).collect();
        assert_eq!(xs.len(), 6);
        for (i, x) in xs.iter().enumerate() {
            assert!((x - 2.0 * i as f64).abs() < 1e-12);
        }
        assert!((r.points[3].t - 0.6).abs() < 1e-12);
    }

    #[test]
    fn resample_keeps_corners() {
        let s = Stroke::from_xy(&[(0.0, 0.0), (5.0, 0.0), (5.0, 5.0)]);
        let r = resample_stroke(&s, 5.0);
        assert_eq!(r.positions(), s.positions());
    }

    #[test]
    fn resample_zero_length_is_identity() {
        let s = Stroke::from_xy(&[(3.0, 3.0), (3.0, 3.0)]);
        assert_eq!(resample_stroke(&s, 1.0), s);
    }
}
