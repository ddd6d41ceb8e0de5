//! Exact Euclidean distance transform (Felzenszwalb–Huttenlocher lower envelope).

use crate::error::{Error, Result};
use crate::raster::RasterImage;

/// Per-pixel Euclidean distance to the nearest foreground pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    width: u32,
    height: u32,
    values: Vec<f64>,
}

impl DistanceField {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, x: u32, y: u32) -> f64 {
        self.values[y as usize * self.width as usize + x as usize]
    }

    /// Bilinear sample; outside the grid the distance grows with the distance to the border.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let (w, h) = (self.width as f64 - 1.0, self.height as f64 - 1.0);
        let cx = x.clamp(0.0, w);
        let cy = y.clamp(0.0, h);
        let outside = (x - cx).hypot(y - cy);
        bilinear(
            &self.values,
            self.width as usize,
            self.height as usize,
            cx,
            cy,
        ) + outside
    }
}

pub(crate) fn bilinear(values: &[f64], w: usize, h: usize, x: f64, y: f64) -> f64 {
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let x0 = (x.floor() as usize).min(w.saturating_sub(2));
    let y0 = (y.floor() as usize).min(h.saturating_sub(2));
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let v00 = values[y0 * w + x0];
    let v10 = values[y0 * w + x1];
    let v01 = values[y1 * w + x0];
    let v11 = values[y1 * w + x1];
    v00 * (1.0 - fx) * (1.0 - fy) + v10 * fx * (1.0 - fy) + v01 * (1.0 - fx) * fy + v11 * fx * fy
}

/// 1D squared-distance transform of `f` (0 at sites, +inf elsewhere) in place.
fn transform_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    // first site
    let Some(first) = (0..n).find(|&q| f[q].is_finite()) else {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    };
    v[0] = first;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in first + 1..n {
        if !f[q].is_finite() {
            continue;
        }
        loop {
            let p = v[k];
            let s =
                ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] {
                // k == 0 is impossible here because z[0] = -inf
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let d = q as f64 - p as f64;
        *o = d * d + f[p];
    }
}

/// Squared Euclidean distances to the nearest `true` cell of `mask`, row-major.
pub(crate) fn squared_edt(mask: &[bool], width: usize, height: usize) -> Vec<f64> {
    let n = width.max(height);
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];
    let mut col_in = vec![0.0; height];
    let mut col_out = vec![0.0; height];
    let mut grid = vec![0.0; width * height];
    for x in 0..width {
        for y in 0..height {
            col_in[y] = if mask[y * width + x] {
                0.0
            } else {
                f64::INFINITY
            };
        }
        transform_1d(&col_in, &mut col_out, &mut v, &mut z);
        for y in 0..height {
            grid[y * width + x] = col_out[y];
        }
    }
    let mut row_out = vec![0.0; width];
    for y in 0..height {
        let row = &grid[y * width..(y + 1) * width];
        transform_1d(row, &mut row_out, &mut v, &mut z);
        grid[y * width..(y + 1) * width].copy_from_slice(&row_out);
    }
    grid
}

/// Exact Euclidean distance transform of the foreground of `image`.
pub fn distance_transform(image: &RasterImage) -> Result<DistanceField> {
    if image.is_blank() {
        return Err(Error::EmptyRaster);
    }
    let (w, h) = (image.width() as usize, image.height() as usize);
    let values = squared_edt(&image.mask(), w, h)
        .into_iter()
        .map(f64::sqrt)
        .collect();
    Ok(DistanceField {
        width: image.width(),
        height: image.height(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force(mask: &[bool], w: usize, h: usize) -> Vec<f64> {
        let sites: Vec<(usize, usize)> = (0..w * h)
            .filter(|&i| mask[i])
            .map(|i| (i % w, i / w))
            .collect();
        (0..w * h)
            .map(|i| {
                let (x, y) = (i % w, i / w);
                sites
                    .iter()
                    .map(|&(sx, sy)| {
                        let dx = sx as f64 - x as f64;
                        let dy = sy as f64 - y as f64;
                        dx * dx + dy * dy
                    })
                    .fold(f64::INFINITY, f64::min)
                    .sqrt()
            })
            .collect()
    }

    #[test]
    fn single_corner_pixel() {
        let mut img = RasterImage::blank(4, 4);
        img.set_foreground(0, 0);
        let d = distance_transform(&img).unwrap();
        assert_eq!(d.at(3, 3), 18f64.sqrt());
        assert_eq!(d.at(0, 0), 0.0);
        assert_eq!(d.at(3, 0), 3.0);
    }

    #[test]
    fn full_foreground_is_zero() {
        let img = RasterImage::from_mask(7, 5, &[true; 35]);
        let d = distance_transform(&img).unwrap();
        assert!(d.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_raster_is_an_error() {
        assert!(matches!(
            distance_transform(&RasterImage::blank(3, 3)),
            Err(Error::EmptyRaster)
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn matches_brute_force(w in 1usize..=64, h in 1usize..=64, density in 0.002f64..0.3, seed in any::<u64>()) {
            let mut state = seed | 1;
            let mut mask: Vec<bool> = (0..w * h)
                .map(|_| {
                    state ^= state << 13;
                    state ^= state >> 7;
                    state ^= state << 17;
                    (state % 10_000) as f64 / 10_000.0 < density
                })
                .collect();
            if !mask.iter().any(|&m| m) {
                mask[(seed as usize) % (w * h)] = true;
            }
            let img = RasterImage::from_mask(w as u32, h as u32, &mask);
            let d = distance_transform(&img).unwrap();
            let oracle = brute_force(&mask, w, h);
            prop_assert_eq!(d.values(), &oracle[..]);
            // 1-Lipschitz between 4-neighbours
            for y in 0..h {
                for x in 0..w {
                    let v = oracle[y * w + x];
                    if x + 1 < w { prop_assert!((v - oracle[y * w + x + 1]).abs() <= 1.0 + 1e-12); }
                    if y + 1 < h { prop_assert!((v - oracle[(y + 1) * w + x]).abs() <= 1.0 + 1e-12); }
                }
            }
        }
    }
}
