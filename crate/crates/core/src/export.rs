//! SVG export of vector sketches.

use crate::error::Result;
use crate::sketch::{Sketch, StrokeKind};
use std::fmt::Write as _;
use std::path::Path;

/// Renders the sketch as SVG: one `path` per stroke, in drawing order.
pub fn sketch_to_svg(sketch: &Sketch) -> String {
    let (w, h) = sketch.canvas;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    for (i, stroke) in sketch.strokes.iter().enumerate() {
        let style = match stroke.kind {
            StrokeKind::Content => r##"class="content" stroke="#000000""##,
            StrokeKind::Scaffold => {
                r##"class="scaffold" stroke="#3a7bd5" stroke-dasharray="4 3" stroke-opacity="0.6""##
            }
        };
        let mut d = String::new();
        for (k, p) in stroke.points.iter().enumerate() {
            let _ = write!(d, "{}{} {}", if k == 0 { "M" } else { " L" }, p.x, p.y);
        }
        let _ = writeln!(
            out,
            r#"  <path id="s{i}" {style} stroke-width="{}" fill="none" stroke-linecap="round" stroke-linejoin="round" d="{d}"/>"#,
            stroke.width
        );
    }
    out.push_str("</svg>\n");
    out
}

pub fn export_svg(sketch: &Sketch, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    crate::io::write_atomic(path, sketch_to_svg(sketch).as_bytes())
}
