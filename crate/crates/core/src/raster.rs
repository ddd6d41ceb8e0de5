//! Binary rasters and capsule scan conversion of vector strokes.
//!
//! Pixel `(col, row)` has its center at canvas coordinates `(col, row)`.
//! A stroke of width `w` covers every pixel whose center lies within `w / 2`
//! of one of its segments (round caps and joins).

use crate::error::{Error, Result};
use crate::geom::{self, Vec2};
use crate::sketch::{Sketch, Stroke};
use std::path::Path;

pub const FOREGROUND: u8 = 0;
pub const BACKGROUND: u8 = 255;

const COVER_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    /// Row-major, `FOREGROUND` or `BACKGROUND`.
    pixels: Vec<u8>,
}

impl RasterImage {
    pub fn blank(width: u32, height: u32) -> Self {
        RasterImage {
            width,
            height,
            pixels: vec![BACKGROUND; width as usize * height as usize],
        }
    }

    /// Builds a raster from a row-major foreground mask.
    pub fn from_mask(width: u32, height: u32, mask: &[bool]) -> Self {
        assert_eq!(mask.len(), width as usize * height as usize);
        RasterImage {
            width,
            height,
            pixels: mask
                .iter()
                .map(|&m| if m { FOREGROUND } else { BACKGROUND })
                .collect(),
        }
    }

    /// Accepts any 8-bit buffer; values below 128 become foreground.
    pub fn from_gray(width: u32, height: u32, gray: &[u8]) -> Self {
        assert_eq!(gray.len(), width as usize * height as usize);
        RasterImage {
            width,
            height,
            pixels: gray
                .iter()
                .map(|&g| if g < 128 { FOREGROUND } else { BACKGROUND })
                .collect(),
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    fn index(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    pub fn is_foreground(&self, x: u32, y: u32) -> bool {
        self.pixels[self.index(x, y)] == FOREGROUND
    }

    pub fn set_foreground(&mut self, x: u32, y: u32) {
        let i = self.index(x, y);
        self.pixels[i] = FOREGROUND;
    }

    pub fn foreground_count(&self) -> usize {
        self.pixels.iter().filter(|&&p| p == FOREGROUND).count()
    }

    pub fn is_blank(&self) -> bool {
        !self.pixels.contains(&FOREGROUND)
    }

    pub fn mask(&self) -> Vec<bool> {
        self.pixels.iter().map(|&p| p == FOREGROUND).collect()
    }

    /// Foreground pixel coordinates in row-major order.
    pub fn foreground_pixels(&self) -> Vec<(u32, u32)> {
        let w = self.width as usize;
        self.pixels
            .iter()
            .enumerate()
            .filter(|(_, &p)| p == FOREGROUND)
            .map(|(i, _)| ((i % w) as u32, (i / w) as u32))
            .collect()
    }

    /// Mask of pixels with a foreground pixel within Chebyshev distance `radius`.
    pub fn dilate_chebyshev(&self, radius: u32) -> Vec<bool> {
        let (w, h) = (self.width as usize, self.height as usize);
        let r = radius as usize;
        let src = self.mask();
        if r == 0 {
            return src;
        }
        // separable max filter: rows then columns
        let mut rows = vec![false; w * h];
        for y in 0..h {
            let line = &src[y * w..(y + 1) * w];
            for x in 0..w {
                let lo = x.saturating_sub(r);
                let hi = (x + r).min(w - 1);
                rows[y * w + x] = line[lo..=hi].iter().any(|&v| v);
            }
        }
        let mut out = vec![false; w * h];
        for x in 0..w {
            for y in 0..h {
                let lo = y.saturating_sub(r);
                let hi = (y + r).min(h - 1);
                out[y * w + x] = (lo..=hi).any(|yy| rows[yy * w + x]);
            }
        }
        out
    }

    /// Pixel-wise union of two rasters of equal size.
    pub fn union(&self, other: &RasterImage) -> Result<RasterImage> {
        check_same_dims(self, other)?;
        Ok(RasterImage {
            width: self.width,
            height: self.height,
            pixels: self
                .pixels
                .iter()
                .zip(&other.pixels)
                .map(|(&a, &b)| {
                    if a == FOREGROUND || b == FOREGROUND {
                        FOREGROUND
                    } else {
                        BACKGROUND
                    }
                })
                .collect(),
        })
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = self.encode_png()?;
        crate::io::write_atomic(path, &bytes)
    }

    /// PNG bytes: 8-bit grayscale, 0 for strokes and 255 for background.
    pub fn encode_png(&self) -> Result<Vec<u8>> {
        use image::ImageEncoder;
        let mut out = Vec::new();
        image::codecs::png::PngEncoder::new(&mut out)
            .write_image(
                &self.pixels,
                self.width,
                self.height,
                image::ExtendedColorType::L8,
            )
            .map_err(|e| Error::Image(e.to_string()))?;
        Ok(out)
    }

    /// Loads any image the `image` crate can decode, thresholded at mid-gray.
    pub fn load(path: impl AsRef<Path>) -> Result<RasterImage> {
        let path = path.as_ref();
        let img = image::open(path)
            .map_err(|e| match e {
                image::ImageError::IoError(io) => Error::io(path, io),
                other => Error::Image(format!("{}: {other}", path.display())),
            })?
            .into_luma8();
        Ok(RasterImage::from_gray(
            img.width(),
            img.height(),
            img.as_raw(),
        ))
    }
}

pub(crate) fn check_same_dims(a: &RasterImage, b: &RasterImage) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch {
            left: a.dims(),
            right: b.dims(),
        });
    }
    Ok(())
}

/// Calls `f` for every in-canvas pixel covered by the capsule around `a`-`b`.
fn for_capsule_pixels(
    a: Vec2,
    b: Vec2,
    radius: f64,
    dims: (u32, u32),
    mut f: impl FnMut(u32, u32),
) {
    let (w, h) = (dims.0 as i64, dims.1 as i64);
    let x0 = ((a.x.min(b.x) - radius).floor() as i64).max(0);
    let x1 = ((a.x.max(b.x) + radius).ceil() as i64).min(w - 1);
    let y0 = ((a.y.min(b.y) - radius).floor() as i64).max(0);
    let y1 = ((a.y.max(b.y) + radius).ceil() as i64).min(h - 1);
    if x0 > x1 || y0 > y1 {
        return;
    }
    let r2 = radius * radius + COVER_EPS;
    for y in y0..=y1 {
        for x in x0..=x1 {
            let q = Vec2::new(x as f64, y as f64);
            let t = geom::segment_param(a, b, q);
            if (a.lerp(b, t) - q).norm_sq() <= r2 {
                f(x as u32, y as u32);
            }
        }
    }
}

fn for_stroke_pixels(
    stroke: &Stroke,
    line_width: u32,
    dims: (u32, u32),
    mut f: impl FnMut(u32, u32),
) {
    let radius = line_width as f64 / 2.0;
    let pts = stroke.positions();
    match pts.len() {
        0 => {}
        1 => for_capsule_pixels(pts[0], pts[0], radius, dims, &mut f),
        _ => {
            for w in pts.windows(2) {
                for_capsule_pixels(w[0], w[1], radius, dims, &mut f);
            }
        }
    }
}

/// Rasterizes a sketch on its canvas at the given line width.
pub fn rasterize(sketch: &Sketch, line_width: u32, content_only: bool) -> RasterImage {
    let strokes = sketch
        .strokes
        .iter()
        .filter(|s| !content_only || s.is_content());
    rasterize_strokes(strokes, sketch.canvas, line_width)
}

pub fn rasterize_strokes<'a>(
    strokes: impl IntoIterator<Item = &'a Stroke>,
    canvas: (u32, u32),
    line_width: u32,
) -> RasterImage {
    assert!(line_width >= 1, "line width must be at least 1");
    let mut img = RasterImage::blank(canvas.0, canvas.1);
    for s in strokes {
        for_stroke_pixels(s, line_width, canvas, |x, y| img.set_foreground(x, y));
    }
    img
}

/// Distinct pixels covered by one stroke, row-major.
pub fn stroke_pixels(stroke: &Stroke, line_width: u32, canvas: (u32, u32)) -> Vec<(u32, u32)> {
    rasterize_strokes(std::iter::once(stroke), canvas, line_width).foreground_pixels()
}

/// A width-1 stroke pixel with time and pressure interpolated at its nearest stroke location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedPixel {
    pub x: u32,
    pub y: u32,
    pub t: f64,
    pub pressure: f64,
}

/// Width-1 pixels of a stroke, each stamped by arc-length interpolation of t and pressure.
pub fn timed_stroke_pixels(stroke: &Stroke, canvas: (u32, u32)) -> Vec<TimedPixel> {
    let pts = stroke.positions();
    let cum = geom::cumulative_lengths(&pts);
    stroke_pixels(stroke, 1, canvas)
        .into_iter()
        .map(|(x, y)| {
            let proj = geom::project_onto_polyline(&pts, Vec2::new(x as f64, y as f64));
            let (t, pressure) = if pts.len() < 2 {
                (stroke.points[0].t, stroke.points[0].pressure)
            } else {
                let a = stroke.points[proj.segment];
                let b = stroke.points[proj.segment + 1];
                let seg = cum[proj.segment + 1] - cum[proj.segment];
                let f = if seg > 0.0 { proj.t } else { 0.0 };
                (
                    a.t + (b.t - a.t) * f,
                    a.pressure + (b.pressure - a.pressure) * f,
                )
            };
            TimedPixel { x, y, t, pressure }
        })
        .collect()
}
