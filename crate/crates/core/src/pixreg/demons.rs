//! Dense deformable registration of sparse line images.
//!
//! The moving image's foreground pixels are pulled down the distance field of
//! the fixed image. The objective at one pyramid level is
//!
//! `J(u) = mean_k D(p_k + u_k)^2 + diffusion * mean_(k,l) |u_k - u_l|^2`
//!
//! over moving foreground pixels `p_k` and their 4-neighbour pairs. The
//! displacement at the foreground is a Gaussian Nadaraya–Watson average of
//! per-pixel coefficients, which is also how the dense field is rendered,
//! so the field handed back agrees with what the optimizer evaluated.

use super::field::DisplacementField;
use crate::distance::{bilinear, squared_edt};
use crate::error::{Error, Result};
use crate::raster::{check_same_dims, RasterImage};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorConfig {
    /// Standard deviation of the update smoothing, in pixels of the current pyramid level.
    pub sigma_field: f64,
    /// Downsampling factors, coarse to fine.
    pub levels: Vec<u32>,
    /// Optimizer steps per level.
    pub max_steps: usize,
    /// Weight of the diffusion (first-difference) regularizer.
    pub diffusion: f64,
    /// Halvings tried by the backtracking line search before a level stops.
    pub max_backtracks: usize,
    /// Relative objective decrease below which a level is considered converged.
    pub tolerance: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            sigma_field: 8.0,
            levels: vec![4, 2, 1],
            max_steps: 60,
            diffusion: 0.5,
            max_backtracks: 8,
            tolerance: 5e-3,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_field > 0.0 && self.sigma_field.is_finite()) {
            return Err(Error::Validation("sigma_field must be positive".into()));
        }
        if self.levels.is_empty() || self.levels.contains(&0) {
            return Err(Error::Validation(
                "pyramid levels must be positive factors".into(),
            ));
        }
        if !(self.diffusion >= 0.0 && self.diffusion.is_finite()) {
            return Err(Error::Validation(
                "diffusion weight must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Field plus the accepted objective values of every level, for inspection.
#[derive(Debug, Clone)]
pub struct Estimate {
    pub field: DisplacementField,
    /// One entry per level: objective at the start and after each accepted step.
    pub objective_trace: Vec<Vec<f64>>,
}

/// Estimates a displacement field that warps `moving` onto `fixed`.
pub fn estimate_displacement(
    moving: &RasterImage,
    fixed: &RasterImage,
    config: &EstimatorConfig,
) -> Result<DisplacementField> {
    estimate_displacement_traced(moving, fixed, config).map(|e| e.field)
}

pub fn estimate_displacement_traced(
    moving: &RasterImage,
    fixed: &RasterImage,
    config: &EstimatorConfig,
) -> Result<Estimate> {
    check_same_dims(moving, fixed)?;
    config.validate()?;
    if moving.is_blank() || fixed.is_blank() {
        return Err(Error::EmptyRaster);
    }
    let (w, h) = (moving.width() as usize, moving.height() as usize);
    let mut total_dx = vec![0.0; w * h];
    let mut total_dy = vec![0.0; w * h];
    let mut trace = Vec::new();
    let moving_mask = moving.mask();
    let fixed_mask = fixed.mask();
    for &factor in &config.levels {
        let s = factor as usize;
        let level = Level::new(&moving_mask, &fixed_mask, w, h, s, config.sigma_field);
        // initial displacement from the coarser levels, in level units
        let init: Vec<[f64; 2]> = level
            .points
            .iter()
            .map(|&(px, py)| {
                let (cx, cy) = level.to_full(px as f64, py as f64);
                [
                    bilinear(&total_dx, w, h, cx, cy) / s as f64,
                    bilinear(&total_dy, w, h, cx, cy) / s as f64,
                ]
            })
            .collect();
        let (coeffs, level_trace) = level.optimize(&init, config);
        trace.push(level_trace);
        level.render_into(&coeffs, &mut total_dx, &mut total_dy, w, h);
    }
    Ok(Estimate {
        field: DisplacementField::from_components(w as u32, h as u32, total_dx, total_dy)?,
        objective_trace: trace,
    })
}

fn gaussian_taps(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    (-radius..=radius)
        .map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp())
        .collect()
}

/// Max-pool a mask by `s`.
fn downsample(mask: &[bool], w: usize, h: usize, s: usize) -> (Vec<bool>, usize, usize) {
    if s == 1 {
        return (mask.to_vec(), w, h);
    }
    let (lw, lh) = (w.div_ceil(s), h.div_ceil(s));
    let mut out = vec![false; lw * lh];
    for y in 0..h {
        for x in 0..w {
            if mask[y * w + x] {
                out[(y / s) * lw + x / s] = true;
            }
        }
    }
    (out, lw, lh)
}

struct Level {
    s: usize,
    lw: usize,
    lh: usize,
    /// Moving foreground pixels in level coordinates.
    points: Vec<(usize, usize)>,
    dist: Vec<f64>,
    grad_x: Vec<f64>,
    grad_y: Vec<f64>,
    /// Row-normalized smoothing kernel in CSR form.
    row_start: Vec<usize>,
    col: Vec<u32>,
    weight: Vec<f64>,
    /// Row sums of the unnormalized kernel.
    density: Vec<f64>,
    /// 4-neighbour pairs among `points`.
    edges: Vec<(u32, u32)>,
    taps: Vec<f64>,
}

impl Level {
    fn new(moving: &[bool], fixed: &[bool], w: usize, h: usize, s: usize, sigma: f64) -> Level {
        let (mov, lw, lh) = downsample(moving, w, h, s);
        let (fix, _, _) = downsample(fixed, w, h, s);
        let dist: Vec<f64> = squared_edt(&fix, lw, lh)
            .into_iter()
            .map(f64::sqrt)
            .collect();
        let mut grad_x = vec![0.0; lw * lh];
        let mut grad_y = vec![0.0; lw * lh];
        for y in 0..lh {
            for x in 0..lw {
                let i = y * lw + x;
                let (xl, xr) = (x.saturating_sub(1), (x + 1).min(lw - 1));
                let (yu, yd) = (y.saturating_sub(1), (y + 1).min(lh - 1));
                if xr > xl {
                    grad_x[i] = (dist[y * lw + xr] - dist[y * lw + xl]) / (xr - xl) as f64;
                }
                if yd > yu {
                    grad_y[i] = (dist[yd * lw + x] - dist[yu * lw + x]) / (yd - yu) as f64;
                }
            }
        }
        let points: Vec<(usize, usize)> = (0..lw * lh)
            .filter(|&i| mov[i])
            .map(|i| (i % lw, i / lw))
            .collect();
        let mut index = vec![u32::MAX; lw * lh];
        for (k, &(x, y)) in points.iter().enumerate() {
            index[y * lw + x] = k as u32;
        }
        let taps = gaussian_taps(sigma);
        let radius = (taps.len() / 2) as i64;
        let mut row_start = Vec::with_capacity(points.len() + 1);
        let mut col = Vec::new();
        let mut weight = Vec::new();
        let mut density = Vec::with_capacity(points.len());
        let mut edges = Vec::new();
        row_start.push(0);
        for (k, &(x, y)) in points.iter().enumerate() {
            let begin = col.len();
            let (x, y) = (x as i64, y as i64);
            for yy in (y - radius).max(0)..=(y + radius).min(lh as i64 - 1) {
                let wy = taps[(yy - y + radius) as usize];
                for xx in (x - radius).max(0)..=(x + radius).min(lw as i64 - 1) {
                    let j = index[yy as usize * lw + xx as usize];
                    if j != u32::MAX {
                        col.push(j);
                        weight.push(wy * taps[(xx - x + radius) as usize]);
                    }
                }
            }
            let sum: f64 = weight[begin..].iter().sum();
            for wgt in &mut weight[begin..] {
                *wgt /= sum;
            }
            density.push(sum);
            row_start.push(col.len());
            if x + 1 < lw as i64 {
                let j = index[y as usize * lw + x as usize + 1];
                if j != u32::MAX {
                    edges.push((k as u32, j));
                }
            }
            if y + 1 < lh as i64 {
                let j = index[(y as usize + 1) * lw + x as usize];
                if j != u32::MAX {
                    edges.push((k as u32, j));
                }
            }
        }
        Level {
            s,
            lw,
            lh,
            points,
            dist,
            grad_x,
            grad_y,
            row_start,
            col,
            weight,
            density,
            edges,
            taps,
        }
    }

    fn to_full(&self, x: f64, y: f64) -> (f64, f64) {
        let off = (self.s as f64 - 1.0) / 2.0;
        (x * self.s as f64 + off, y * self.s as f64 + off)
    }

    fn from_full(&self, x: f64, y: f64) -> (f64, f64) {
        let off = (self.s as f64 - 1.0) / 2.0;
        ((x - off) / self.s as f64, (y - off) / self.s as f64)
    }

    /// Displacements at the foreground: `init + K * coeffs`.
    fn displacements(&self, init: &[[f64; 2]], coeffs: &[[f64; 2]]) -> Vec<[f64; 2]> {
        (0..self.points.len())
            .map(|k| {
                let mut u = init[k];
                for e in self.row_start[k]..self.row_start[k + 1] {
                    let c = coeffs[self.col[e] as usize];
                    u[0] += self.weight[e] * c[0];
                    u[1] += self.weight[e] * c[1];
                }
                u
            })
            .collect()
    }

    /// Distance and its gradient at a level-space position, extended linearly outside the grid.
    fn sample_distance(&self, x: f64, y: f64) -> (f64, [f64; 2]) {
        let cx = x.clamp(0.0, (self.lw - 1) as f64);
        let cy = y.clamp(0.0, (self.lh - 1) as f64);
        let d = bilinear(&self.dist, self.lw, self.lh, cx, cy);
        let mut g = [
            bilinear(&self.grad_x, self.lw, self.lh, cx, cy),
            bilinear(&self.grad_y, self.lw, self.lh, cx, cy),
        ];
        let (ox, oy) = (x - cx, y - cy);
        let out = ox.hypot(oy);
        if out > 0.0 {
            if ox != 0.0 {
                g[0] = ox / out;
            }
            if oy != 0.0 {
                g[1] = oy / out;
            }
        }
        (d + out, g)
    }

    fn objective(&self, u: &[[f64; 2]], diffusion: f64) -> f64 {
        let n = self.points.len() as f64;
        let data: f64 = self
            .points
            .iter()
            .zip(u)
            .map(|(&(x, y), d)| {
                self.sample_distance(x as f64 + d[0], y as f64 + d[1])
                    .0
                    .powi(2)
            })
            .sum();
        let reg: f64 = self
            .edges
            .iter()
            .map(|&(a, b)| {
                let (ua, ub) = (u[a as usize], u[b as usize]);
                (ua[0] - ub[0]).powi(2) + (ua[1] - ub[1]).powi(2)
            })
            .sum();
        (data + diffusion * reg) / n
    }

    /// Negative half-gradient of the objective with respect to the foreground displacements.
    fn force(&self, u: &[[f64; 2]], diffusion: f64) -> Vec<[f64; 2]> {
        let mut f: Vec<[f64; 2]> = self
            .points
            .iter()
            .zip(u)
            .map(|(&(x, y), d)| {
                let (dist, g) = self.sample_distance(x as f64 + d[0], y as f64 + d[1]);
                [-dist * g[0], -dist * g[1]]
            })
            .collect();
        for &(a, b) in &self.edges {
            let (ua, ub) = (u[a as usize], u[b as usize]);
            let diff = [ua[0] - ub[0], ua[1] - ub[1]];
            f[a as usize][0] -= diffusion * diff[0];
            f[a as usize][1] -= diffusion * diff[1];
            f[b as usize][0] += diffusion * diff[0];
            f[b as usize][1] += diffusion * diff[1];
        }
        f
    }

    /// Runs backtracking descent on the coefficients; returns them with the objective trace.
    fn optimize(&self, init: &[[f64; 2]], config: &EstimatorConfig) -> (Vec<[f64; 2]>, Vec<f64>) {
        let n = self.points.len();
        let mut coeffs = vec![[0.0; 2]; n];
        let mut u = self.displacements(init, &coeffs);
        let mut current = self.objective(&u, config.diffusion);
        let mut trace = vec![current];
        if n == 0 {
            return (coeffs, trace);
        }
        let mean_density = self.density.iter().sum::<f64>() / n as f64;
        let mut step = 1.0f64;
        for _ in 0..config.max_steps {
            let f = self.force(&u, config.diffusion);
            // Preconditioning by the kernel density keeps K * D^-1 symmetric, so this is a descent direction.
            let dir: Vec<[f64; 2]> = f
                .iter()
                .zip(&self.density)
                .map(|(v, &dn)| [v[0] * mean_density / dn, v[1] * mean_density / dn])
                .collect();
            if dir.iter().all(|d| d[0] == 0.0 && d[1] == 0.0) {
                break;
            }
            // the foreground displacement is linear in the coefficients, so K * dir is reused by every trial
            let zero = vec![[0.0; 2]; n];
            let kdir = self.displacements(&zero, &dir);
            let mut accepted = None;
            let mut alpha = (step * 2.0).min(1.0);
            for _ in 0..=config.max_backtracks {
                let tu: Vec<[f64; 2]> = u
                    .iter()
                    .zip(&kdir)
                    .map(|(v, d)| [v[0] + alpha * d[0], v[1] + alpha * d[1]])
                    .collect();
                let value = self.objective(&tu, config.diffusion);
                if value < current {
                    let trial: Vec<[f64; 2]> = coeffs
                        .iter()
                        .zip(&dir)
                        .map(|(c, d)| [c[0] + alpha * d[0], c[1] + alpha * d[1]])
                        .collect();
                    accepted = Some((trial, tu, value));
                    break;
                }
                alpha *= 0.5;
            }
            let Some((trial, tu, value)) = accepted else {
                break;
            };
            let improvement = (current - value) / current.max(1e-12);
            coeffs = trial;
            u = tu;
            current = value;
            step = alpha;
            trace.push(current);
            if improvement < config.tolerance {
                break;
            }
        }
        (coeffs, trace)
    }

    /// Adds this level's field, rendered at full resolution, to the accumulators.
    fn render_into(&self, coeffs: &[[f64; 2]], dx: &mut [f64], dy: &mut [f64], w: usize, h: usize) {
        if coeffs.iter().all(|c| c[0] == 0.0 && c[1] == 0.0) {
            return;
        }
        let (lw, lh) = (self.lw, self.lh);
        let values: Vec<[f64; 3]> = coeffs.iter().map(|c| [c[0], c[1], 1.0]).collect();
        let [ax, ay, wt] = blur_points(&self.points, &values, lw, lh, &self.taps);
        let scale = self.s as f64;
        let mut vx = vec![0.0; lw * lh];
        let mut vy = vec![0.0; lw * lh];
        for i in 0..lw * lh {
            let denom = wt[i].max(1.0);
            vx[i] = scale * ax[i] / denom;
            vy[i] = scale * ay[i] / denom;
        }
        let (x0, x1, y0, y1) = self.support();
        if self.s == 1 {
            for y in y0..=y1 {
                for x in x0..=x1 {
                    dx[y * w + x] += vx[y * lw + x];
                    dy[y * w + x] += vy[y * lw + x];
                }
            }
            return;
        }
        // full-resolution region influenced by this level
        let fx0 = (x0 * self.s).saturating_sub(self.s);
        let fx1 = ((x1 + 1) * self.s + self.s).min(w - 1);
        let fy0 = (y0 * self.s).saturating_sub(self.s);
        let fy1 = ((y1 + 1) * self.s + self.s).min(h - 1);
        for y in fy0..=fy1 {
            for x in fx0..=fx1 {
                let (lx, ly) = self.from_full(x as f64, y as f64);
                dx[y * w + x] += bilinear(&vx, lw, lh, lx, ly);
                dy[y * w + x] += bilinear(&vy, lw, lh, lx, ly);
            }
        }
    }

    /// Level-space bounding box of the foreground grown by the kernel radius.
    fn support(&self) -> (usize, usize, usize, usize) {
        let r = self.taps.len() / 2;
        let (mut x0, mut x1, mut y0, mut y1) = (usize::MAX, 0, usize::MAX, 0);
        for &(x, y) in &self.points {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        (
            x0.saturating_sub(r),
            (x1 + r).min(self.lw - 1),
            y0.saturating_sub(r),
            (y1 + r).min(self.lh - 1),
        )
    }
}

/// Separable Gaussian of sparse point values onto a `w x h` grid, three channels at once.
///
/// Points must be sorted by row. Taps falling outside the grid are dropped.
fn blur_points(
    points: &[(usize, usize)],
    values: &[[f64; 3]],
    w: usize,
    h: usize,
    taps: &[f64],
) -> [Vec<f64>; 3] {
    let r = taps.len() / 2;
    let mut out = [vec![0.0; w * h], vec![0.0; w * h], vec![0.0; w * h]];
    let mut row = [vec![0.0; w], vec![0.0; w], vec![0.0; w]];
    let mut k = 0;
    while k < points.len() {
        let y = points[k].1;
        let (mut lo, mut hi) = (usize::MAX, 0);
        // horizontal pass: scatter every point of this row
        while k < points.len() && points[k].1 == y {
            let x = points[k].0;
            let a = x.saturating_sub(r);
            let b = (x + r).min(w - 1);
            lo = lo.min(a);
            hi = hi.max(b);
            for (c, line) in row.iter_mut().enumerate() {
                let v = values[k][c];
                for (xx, t) in (a..=b).zip(&taps[a + r - x..]) {
                    line[xx] += t * v;
                }
            }
            k += 1;
        }
        // vertical pass: add the blurred row to every output row within reach
        for yy in y.saturating_sub(r)..=(y + r).min(h - 1) {
            let t = taps[yy + r - y];
            for (c, line) in row.iter().enumerate() {
                let dst = &mut out[c][yy * w + lo..=yy * w + hi];
                for (d, s) in dst.iter_mut().zip(&line[lo..=hi]) {
                    *d += t * s;
                }
            }
        }
        for line in &mut row {
            line[lo..=hi].fill(0.0);
        }
    }
    out
}
