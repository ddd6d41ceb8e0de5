use crate::distance::bilinear;
use crate::error::{Error, Result};
use crate::sketch::Sketch;
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"DSDF";

/// Dense per-pixel displacement in canvas pixels, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField {
    width: u32,
    height: u32,
    dx: Vec<f64>,
    dy: Vec<f64>,
}

impl DisplacementField {
    pub fn zeros(width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        DisplacementField {
            width,
            height,
            dx: vec![0.0; n],
            dy: vec![0.0; n],
        }
    }

    pub fn constant(width: u32, height: u32, v: (f64, f64)) -> Self {
        let n = width as usize * height as usize;
        DisplacementField {
            width,
            height,
            dx: vec![v.0; n],
            dy: vec![v.1; n],
        }
    }

    pub fn from_components(width: u32, height: u32, dx: Vec<f64>, dy: Vec<f64>) -> Result<Self> {
        let n = width as usize * height as usize;
        if dx.len() != n || dy.len() != n {
            return Err(Error::Validation(format!(
                "field components must have {n} entries, got {} and {}",
                dx.len(),
                dy.len()
            )));
        }
        if dx.iter().chain(&dy).any(|v| !v.is_finite()) {
            return Err(Error::Validation("field contains non-finite values".into()));
        }
        Ok(DisplacementField {
            width,
            height,
            dx,
            dy,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn at(&self, x: u32, y: u32) -> (f64, f64) {
        let i = y as usize * self.width as usize + x as usize;
        (self.dx[i], self.dy[i])
    }

    pub fn components(&self) -> (&[f64], &[f64]) {
        (&self.dx, &self.dy)
    }

    /// Bilinear sample; positions outside the grid take the nearest border value.
    pub fn sample(&self, x: f64, y: f64) -> (f64, f64) {
        let (w, h) = (self.width as usize, self.height as usize);
        (
            bilinear(&self.dx, w, h, x, y),
            bilinear(&self.dy, w, h, x, y),
        )
    }

    pub fn max_magnitude(&self) -> f64 {
        self.dx
            .iter()
            .zip(&self.dy)
            .map(|(a, b)| a.hypot(*b))
            .fold(0.0, f64::max)
    }

    /// Binary dump: `DSDF`, u32 LE width and height, then (dx, dy) f32 LE pairs row-major.
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&self.width.to_le_bytes())?;
        w.write_all(&self.height.to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.dx.len() * 8);
        for (a, b) in self.dx.iter().zip(&self.dy) {
            buf.extend_from_slice(&(*a as f32).to_le_bytes());
            buf.extend_from_slice(&(*b as f32).to_le_bytes());
        }
        w.write_all(&buf)
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let bad = |m: &str| Error::Format {
            source_name: "displacement field".into(),
            message: m.to_string(),
        };
        let mut header = [0u8; 12];
        r.read_exact(&mut header)
            .map_err(|_| bad("truncated header"))?;
        if &header[..4] != MAGIC {
            return Err(bad("bad magic"));
        }
        let width = u32::from_le_bytes(header[4..8].try_into().unwrap());
        let height = u32::from_le_bytes(header[8..12].try_into().unwrap());
        let n = width as usize * height as usize;
        let mut body = vec![0u8; n * 8];
        r.read_exact(&mut body).map_err(|_| bad("truncated body"))?;
        let mut dx = Vec::with_capacity(n);
        let mut dy = Vec::with_capacity(n);
        for c in body.chunks_exact(8) {
            dx.push(f32::from_le_bytes(c[..4].try_into().unwrap()) as f64);
            dy.push(f32::from_le_bytes(c[4..].try_into().unwrap()) as f64);
        }
        DisplacementField::from_components(width, height, dx, dy)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        self.write_to(&mut bytes)
            .expect("writing to a Vec cannot fail");
        crate::io::write_atomic(path, &bytes)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        DisplacementField::read_from(&bytes[..])
    }
}

/// Moves every point by the bilinearly interpolated field vector at its position.
///
/// Points may end up off the canvas; they are not clamped.
pub fn apply_displacement(sketch: &Sketch, field: &DisplacementField) -> Sketch {
    sketch.map_positions(|p| {
        let (dx, dy) = field.sample(p.x, p.y);
        crate::geom::Vec2::new(p.x + dx, p.y + dy)
    })
}
