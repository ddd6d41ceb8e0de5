//! Learned stroke disturbers: extrinsic (similarity), intrinsic (control-point offsets) and point (normal jitter).

use super::bezier::{fit_bezier, fit_with_parameters, BezierStroke, CONTROL_POINTS};
use super::mlp::{Mlp, TrainConfig};
use crate::analysis::{is_valid_score, valid_strokes, AnalysisConfig, DatasetEntry};
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::io::write_json;
use crate::simfit::SimilarityTransform;
use crate::sketch::{Group, Stroke, FORMAT_VERSION};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::statistics::{Data, OrderStatistics};
use std::fmt;
use std::path::Path;

pub const INPUT_SIZE: usize = 2 * CONTROL_POINTS + 1;
pub const HIDDEN: [usize; 2] = [64, 64];
/// Standard deviation, in samples, of the smoothing applied to point noise.
pub const POINT_SMOOTHING: f64 = 2.0;
const MIN_PAIRS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DisturberKind {
    Extrinsic,
    Intrinsic,
    Point,
}

impl DisturberKind {
    pub const ALL: [DisturberKind; 3] = [
        DisturberKind::Extrinsic,
        DisturberKind::Intrinsic,
        DisturberKind::Point,
    ];

    /// Extrinsic: `(theta, tx, ty, s)`; intrinsic: 12 control-point offsets; point: `(mu, sigma)`.
    pub fn output_size(self) -> usize {
        match self {
            DisturberKind::Extrinsic => 4,
            DisturberKind::Intrinsic => 2 * CONTROL_POINTS,
            DisturberKind::Point => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DisturberKind::Extrinsic => "extrinsic",
            DisturberKind::Intrinsic => "intrinsic",
            DisturberKind::Point => "point",
        }
    }

    /// Maps a target into the space the network regresses (log scale for extrinsic `s`).
    fn encode(self, target: &[f64]) -> Vec<f64> {
        let mut v = target.to_vec();
        if self == DisturberKind::Extrinsic {
            v[3] = v[3].ln();
        }
        v
    }

    /// Inverse of [`encode`](Self::encode), with the positivity maps for `s` and `sigma`.
    fn decode(self, encoded: &[f64]) -> Vec<f64> {
        let mut v = encoded.to_vec();
        match self {
            DisturberKind::Extrinsic => v[3] = v[3].exp(),
            DisturberKind::Point => v[1] = v[1].max(0.0),
            DisturberKind::Intrinsic => {}
        }
        v
    }
}

impl fmt::Display for DisturberKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-parameter spreads used for jitter and by the statistical fallback.
///
/// Angles in degrees, shifts and control offsets in stroke-local units
/// (fractions of the stroke's bounding-box diagonal), point noise in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FallbackParams {
    pub theta_sd_deg: f64,
    pub shift_sd: f64,
    pub log_scale_sd: f64,
    pub control_sd: f64,
    pub point_mu: f64,
    pub point_sigma: f64,
}

impl Default for FallbackParams {
    fn default() -> Self {
        FallbackParams {
            theta_sd_deg: 10.0,
            shift_sd: 0.1,
            log_scale_sd: 0.1,
            control_sd: 0.05,
            point_mu: 0.0,
            point_sigma: 0.8,
        }
    }
}

impl FallbackParams {
    fn jitter(&self, kind: DisturberKind) -> Vec<f64> {
        match kind {
            DisturberKind::Extrinsic => vec![
                self.theta_sd_deg,
                self.shift_sd,
                self.shift_sd,
                self.log_scale_sd,
            ],
            DisturberKind::Intrinsic => vec![self.control_sd; 2 * CONTROL_POINTS],
            DisturberKind::Point => vec![0.0; 2],
        }
    }

    /// Gaussian (log-normal for scale) spreads fitted to training targets; kinds without pairs keep the defaults.
    pub fn fit(sets: &TrainingSets) -> FallbackParams {
        let mut p = FallbackParams::default();
        let sd = |pairs: &[TrainingPair], f: &dyn Fn(&[f64]) -> Vec<f64>| -> Option<f64> {
            let values: Vec<f64> = pairs.iter().flat_map(|pr| f(&pr.target)).collect();
            (values.len() >= 2).then(|| rms(&values))
        };
        if let Some(v) = sd(&sets.extrinsic.pairs, &|t| vec![t[0]]) {
            p.theta_sd_deg = v;
        }
        if let Some(v) = sd(&sets.extrinsic.pairs, &|t| vec![t[1], t[2]]) {
            p.shift_sd = v;
        }
        if let Some(v) = sd(&sets.extrinsic.pairs, &|t| vec![t[3].ln()]) {
            p.log_scale_sd = v;
        }
        if let Some(v) = sd(&sets.intrinsic.pairs, &|t| t.to_vec()) {
            p.control_sd = v;
        }
        if !sets.point.pairs.is_empty() {
            let n = sets.point.pairs.len() as f64;
            p.point_mu = sets.point.pairs.iter().map(|pr| pr.target[0]).sum::<f64>() / n;
            p.point_sigma = sets.point.pairs.iter().map(|pr| pr.target[1]).sum::<f64>() / n;
        }
        p
    }
}

fn rms(values: &[f64]) -> f64 {
    (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub config: TrainConfig,
    pub pairs: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisturberModel {
    pub format_version: u32,
    pub kind: DisturberKind,
    pub style: Group,
    pub layer_sizes: Vec<usize>,
    pub network: Mlp,
    /// Normalization of the regressed outputs: `encoded = mean + std * network`.
    pub target_mean: Vec<f64>,
    pub target_std: Vec<f64>,
    /// Spread of the zero-mean jitter added per output at noise level 1.
    pub jitter_std: Vec<f64>,
    /// Reference scales (90th percentiles) used to normalize change magnitudes.
    pub magnitude_reference: Vec<f64>,
    /// Noise input used where the pipeline exposes no noise control (the point disturber).
    pub default_noise: f64,
    pub training: Option<TrainingMetadata>,
}

impl DisturberModel {
    fn constant(
        kind: DisturberKind,
        style: Group,
        mean: Vec<f64>,
        jitter_std: Vec<f64>,
    ) -> DisturberModel {
        let mut layer_sizes = vec![INPUT_SIZE];
        layer_sizes.extend(HIDDEN);
        layer_sizes.push(kind.output_size());
        DisturberModel {
            format_version: FORMAT_VERSION,
            kind,
            style,
            network: Mlp::zeros(&layer_sizes),
            layer_sizes,
            target_mean: mean,
            target_std: vec![1.0; kind.output_size()],
            jitter_std,
            magnitude_reference: Vec::new(),
            default_noise: 0.0,
            training: None,
        }
    }

    /// Untrained model whose response is the identity disturbance (zero output, zero point noise).
    pub fn zero(kind: DisturberKind, style: Group) -> DisturberModel {
        DisturberModel::constant(
            kind,
            style,
            vec![0.0; kind.output_size()],
            FallbackParams::default().jitter(kind),
        )
    }

    /// Model that draws disturbances from fixed per-parameter distributions instead of a trained network.
    pub fn statistical(
        kind: DisturberKind,
        style: Group,
        params: &FallbackParams,
    ) -> DisturberModel {
        let mean = match kind {
            DisturberKind::Point => vec![params.point_mu, params.point_sigma],
            _ => vec![0.0; kind.output_size()],
        };
        DisturberModel::constant(kind, style, mean, params.jitter(kind))
    }

    fn check_kind(&self, expected: DisturberKind) -> Result<()> {
        if self.kind != expected {
            return Err(Error::KindMismatch {
                expected: expected.to_string(),
                actual: self.kind.to_string(),
            });
        }
        Ok(())
    }

    /// Network response in the encoded output space.
    fn predict_encoded(&self, input: &BezierStroke, noise: f64) -> Vec<f64> {
        let x = network_input(input, noise);
        self.network
            .forward(&x)
            .iter()
            .zip(&self.target_mean)
            .zip(&self.target_std)
            .map(|((o, m), s)| m + s * o)
            .collect()
    }

    /// Decoded model output for a curve at a noise level, without jitter.
    pub fn predict(&self, input: &BezierStroke, noise: f64) -> Vec<f64> {
        self.kind.decode(&self.predict_encoded(input, noise))
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.kind.output_size();
        let sizes = self.network.sizes();
        let bad = |msg: String| Err(Error::Validation(format!("{} disturber: {msg}", self.kind)));
        if sizes != self.layer_sizes
            || sizes.first() != Some(&INPUT_SIZE)
            || sizes.last() != Some(&k)
        {
            return bad(format!(
                "layer sizes {:?} do not fit {} inputs and {} outputs",
                sizes, INPUT_SIZE, k
            ));
        }
        for l in &self.network.layers {
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return bad("weight matrix shape disagrees with layer sizes".into());
            }
        }
        if self.target_mean.len() != k || self.target_std.len() != k || self.jitter_std.len() != k {
            return bad("normalization vectors have the wrong length".into());
        }
        let all = self
            .network
            .layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias))
            .chain(&self.target_mean)
            .chain(&self.target_std)
            .chain(&self.jitter_std);
        if all.clone().any(|v| !v.is_finite()) || self.jitter_std.iter().any(|v| *v < 0.0) {
            return bad("non-finite parameters or negative jitter".into());
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path.as_ref(), self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<DisturberModel> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: DisturberModel = serde_json::from_str(&text).map_err(|e| Error::Format {
            source_name: path.display().to_string(),
            message: e.to_string(),
        })?;
        model.validate()?;
        Ok(model)
    }
}

fn network_input(b: &BezierStroke, noise: f64) -> Vec<f64> {
    let mut x = b.local_coordinates().to_vec();
    x.push(noise);
    x
}

fn check_noise(n: f64) -> Result<()> {
    if !(n.is_finite() && n >= 0.0) {
        return Err(Error::Validation(format!(
            "noise level must be finite and non-negative, got {n}"
        )));
    }
    Ok(())
}

fn jittered(model: &DisturberModel, b: &BezierStroke, n: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut enc = model.predict_encoded(b, n);
    for (v, sd) in enc.iter_mut().zip(&model.jitter_std) {
        let z: f64 = rng.sample(StandardNormal);
        *v += n * sd * z;
    }
    model.kind.decode(&enc)
}

/// Predicts a similarity for the curve at noise level `n1` and applies it about the frame centroid.
pub fn disturb_extrinsic(
    b: &BezierStroke,
    n1: f64,
    model: &DisturberModel,
    rng: &mut ChaCha8Rng,
) -> Result<(SimilarityTransform, BezierStroke)> {
    model.check_kind(DisturberKind::Extrinsic)?;
    check_noise(n1)?;
    let out = jittered(model, b, n1, rng);
    let shift = Vec2::new(out[1], out[2]) * b.frame.scale;
    let t = SimilarityTransform::about(b.frame.centroid, out[0], out[3], shift);
    Ok((t, b.map(|p| t.apply(p), t.scale)))
}

/// Moves the control points by model offsets (stroke-local units) at noise level `n2`.
pub fn disturb_intrinsic(
    b: &BezierStroke,
    n2: f64,
    model: &DisturberModel,
    rng: &mut ChaCha8Rng,
) -> Result<BezierStroke> {
    model.check_kind(DisturberKind::Intrinsic)?;
    check_noise(n2)?;
    let out = jittered(model, b, n2, rng);
    let mut result = b.clone();
    for (k, c) in result.control.iter_mut().enumerate() {
        *c += Vec2::new(out[2 * k], out[2 * k + 1]) * b.frame.scale;
    }
    Ok(result)
}

/// Normalized Gaussian weights for offsets `-r..=r`, `r = ceil(3 sigma)`.
pub fn smoothing_kernel(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as i64;
    let w: Vec<f64> = (-r..=r)
        .map(|j| (-(j * j) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

fn smooth(values: &[f64], kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as i64;
    let n = values.len() as i64;
    (0..n)
        .map(|i| {
            let (mut acc, mut wsum) = (0.0, 0.0);
            for (k, w) in kernel.iter().enumerate() {
                let j = i + k as i64 - r;
                if (0..n).contains(&j) {
                    acc += w * values[j as usize];
                    wsum += w;
                }
            }
            acc / wsum
        })
        .collect()
}

/// Adds smoothed normal-direction noise `N(mu, sigma^2)` to a sampled curve; endpoints stay fixed.
pub fn disturb_points(
    polyline: &Stroke,
    model: &DisturberModel,
    rng: &mut ChaCha8Rng,
) -> Result<Stroke> {
    model.check_kind(DisturberKind::Point)?;
    let pos = polyline.positions();
    let n = pos.len();
    if n < 2 {
        return Ok(polyline.clone());
    }
    let out = model.predict(&fit_bezier(polyline), model.default_noise);
    let (mu, sigma) = (out[0], out[1]);
    let raw: Vec<f64> = (0..n)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            mu + sigma * z
        })
        .collect();
    let offsets = smooth(&raw, &smoothing_kernel(POINT_SMOOTHING));
    let mut result = polyline.clone();
    for k in 1..n - 1 {
        let normal = (pos[k + 1] - pos[k - 1])
            .perp()
            .normalized()
            .unwrap_or(Vec2::ZERO);
        result.points[k] = polyline.points[k].with_pos(pos[k] + normal * offsets[k]);
    }
    Ok(result)
}

/// One input/target example; `target` uses the units of [`DisturberKind::output_size`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub kind: DisturberKind,
    pub input: BezierStroke,
    pub target: Vec<f64>,
    /// Normalized change magnitude, the training-time noise level.
    pub magnitude: f64,
    /// Identifies the source stroke as `prompt/user/index`.
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingSet {
    pub pairs: Vec<TrainingPair>,
    pub magnitude_reference: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSets {
    pub extrinsic: TrainingSet,
    pub intrinsic: TrainingSet,
    pub point: TrainingSet,
}

impl TrainingSets {
    pub fn get(&self, kind: DisturberKind) -> &TrainingSet {
        match kind {
            DisturberKind::Extrinsic => &self.extrinsic,
            DisturberKind::Intrinsic => &self.intrinsic,
            DisturberKind::Point => &self.point,
        }
    }
}

fn percentile90(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    Data::new(values.to_vec()).percentile(90)
}

fn ratio(v: f64, reference: f64) -> f64 {
    if reference > 0.0 {
        v / reference
    } else {
        0.0
    }
}

/// Signed normal distances of the points from their fitted curve.
fn normal_residuals(points: &[Vec2]) -> (BezierStroke, Vec<f64>) {
    let (b, params) = fit_with_parameters(points);
    let r = points
        .iter()
        .zip(&params)
        .map(|(&q, &t)| {
            let normal = b.derivative(t).perp().normalized().unwrap_or(Vec2::ZERO);
            (q - b.point(t)).dot(normal)
        })
        .collect();
    (b, r)
}

/// Training pairs from registered drawings of one style (all styles when `style` is `None`).
///
/// Only valid drawings and, within them, valid content strokes contribute.
pub fn build_training_pairs(
    entries: &[DatasetEntry],
    style: Option<Group>,
    config: &AnalysisConfig,
) -> Result<TrainingSets> {
    if entries.is_empty() {
        return Err(Error::InsufficientData(
            "no registered drawings to train on".into(),
        ));
    }
    let mut ext: Vec<(TrainingPair, [f64; 3])> = Vec::new();
    let mut int: Vec<(TrainingPair, f64)> = Vec::new();
    let mut pnt: Vec<(TrainingPair, f64)> = Vec::new();
    for e in entries {
        let lv = &e.levels;
        if style.is_some_and(|s| s != lv.original.group) || !is_valid_score(e.e_star) {
            continue;
        }
        let valid = valid_strokes(
            &lv.stroke_level,
            &e.tracing,
            config.stroke_valid_threshold,
            config.tolerance,
        )?;
        let relative = lv.relative_transforms();
        for (i, stroke) in lv.original.strokes.iter().enumerate() {
            if !stroke.is_content() || !valid[i] || stroke.len() < 2 {
                continue;
            }
            let source = format!("{}/{}/{}", lv.original.prompt_id, lv.original.user_id, i);
            let pair = |kind, input, target, magnitude| TrainingPair {
                kind,
                input,
                target,
                magnitude,
                source: source.clone(),
            };

            let sk = fit_bezier(&lv.sketch_level.strokes[i]);
            let rel = relative[i];
            let shift = rel.translation_about(sk.frame.centroid) * (1.0 / sk.frame.scale);
            let raw = [rel.theta_deg.abs(), shift.norm(), (rel.scale - 1.0).abs()];
            let target = vec![rel.theta_deg, shift.x, shift.y, rel.scale];
            ext.push((pair(DisturberKind::Extrinsic, sk, target, 0.0), raw));

            let px = fit_bezier(&lv.pixel_level.strokes[i]);
            let st = fit_bezier(&lv.stroke_level.strokes[i]);
            let offsets: Vec<Vec2> = px
                .control
                .iter()
                .zip(&st.control)
                .map(|(a, b)| (*b - *a) * (1.0 / px.frame.scale))
                .collect();
            let mean_disp = offsets.iter().map(|o| o.norm()).sum::<f64>() / offsets.len() as f64;
            let target = offsets.iter().flat_map(|o| [o.x, o.y]).collect();
            int.push((pair(DisturberKind::Intrinsic, px, target, 0.0), mean_disp));

            let (fit, r) = normal_residuals(&lv.sketch_level.strokes[i].positions());
            let n = r.len() as f64;
            let mu = r.iter().sum::<f64>() / n;
            let sigma = (r.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n).sqrt();
            let magnitude = rms(&r) / fit.frame.scale;
            pnt.push((
                pair(DisturberKind::Point, fit, vec![mu, sigma], 0.0),
                magnitude,
            ));
        }
    }
    if ext.is_empty() {
        return Err(Error::InsufficientData(
            "no valid strokes of the requested style in the dataset".into(),
        ));
    }

    let ext_ref: Vec<f64> = (0..3)
        .map(|k| percentile90(&ext.iter().map(|(_, r)| r[k]).collect::<Vec<_>>()))
        .collect();
    let extrinsic = TrainingSet {
        pairs: ext
            .into_iter()
            .map(|(mut p, r)| {
                p.magnitude = (0..3).map(|k| ratio(r[k], ext_ref[k])).sum::<f64>() / 3.0;
                p
            })
            .collect(),
        magnitude_reference: ext_ref,
    };
    let scalar_set = |items: Vec<(TrainingPair, f64)>| {
        let reference = percentile90(&items.iter().map(|(_, r)| *r).collect::<Vec<_>>());
        TrainingSet {
            pairs: items
                .into_iter()
                .map(|(mut p, r)| {
                    p.magnitude = ratio(r, reference);
                    p
                })
                .collect(),
            magnitude_reference: vec![reference],
        }
    };
    Ok(TrainingSets {
        extrinsic,
        intrinsic: scalar_set(int),
        point: scalar_set(pnt),
    })
}

fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    Data::new(values.to_vec()).median()
}

/// Trains a disturber of `kind` on the pairs of that kind.
pub fn train_disturber(
    set: &TrainingSet,
    kind: DisturberKind,
    style: Group,
    config: &TrainConfig,
) -> Result<DisturberModel> {
    config.validate()?;
    if set.pairs.is_empty() {
        return Err(Error::InsufficientData(format!("no {kind} training pairs")));
    }
    if let Some(p) = set.pairs.iter().find(|p| p.kind != kind) {
        return Err(Error::KindMismatch {
            expected: kind.to_string(),
            actual: p.kind.to_string(),
        });
    }
    if set.pairs.len() < MIN_PAIRS {
        log::warn!(
            "training the {kind} disturber on only {} pairs",
            set.pairs.len()
        );
    }
    let k = kind.output_size();
    let inputs: Vec<Vec<f64>> = set
        .pairs
        .iter()
        .map(|p| network_input(&p.input, p.magnitude))
        .collect();
    let encoded: Vec<Vec<f64>> = set.pairs.iter().map(|p| kind.encode(&p.target)).collect();
    if encoded.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Validation(format!(
            "{kind} training targets contain non-finite values"
        )));
    }
    let count = encoded.len() as f64;
    let mean: Vec<f64> = (0..k)
        .map(|j| encoded.iter().map(|t| t[j]).sum::<f64>() / count)
        .collect();
    let sd: Vec<f64> = (0..k)
        .map(|j| {
            (encoded
                .iter()
                .map(|t| (t[j] - mean[j]).powi(2))
                .sum::<f64>()
                / count)
                .sqrt()
        })
        .collect();
    // constant outputs get a zero scale, so the network cannot move them
    let norm_sd: Vec<f64> = sd
        .iter()
        .map(|&s| if s > 1e-12 { s } else { 0.0 })
        .collect();
    let targets: Vec<Vec<f64>> = encoded
        .iter()
        .map(|t| {
            (0..k)
                .map(|j| {
                    if norm_sd[j] > 0.0 {
                        (t[j] - mean[j]) / norm_sd[j]
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();

    let mut model = DisturberModel::zero(kind, style);
    let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(config.seed);
    model.network = Mlp::random(&model.layer_sizes, &mut rng);
    let report = model.network.train(&inputs, &targets, config)?;
    model.jitter_std = model
        .jitter_std
        .iter()
        .zip(&sd)
        .map(|(f, s)| f.max(*s))
        .collect();
    model.target_mean = mean;
    model.target_std = norm_sd;
    model.magnitude_reference = set.magnitude_reference.clone();
    model.default_noise = median(&set.pairs.iter().map(|p| p.magnitude).collect::<Vec<_>>());
    model.training = Some(TrainingMetadata {
        config: *config,
        pairs: set.pairs.len(),
        initial_loss: report.initial_loss,
        final_loss: report.final_loss,
    });
    Ok(model)
}

/// The three disturbers of one style.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturberSet {
    pub extrinsic: DisturberModel,
    pub intrinsic: DisturberModel,
    pub point: DisturberModel,
}

impl DisturberSet {
    pub fn zero(style: Group) -> DisturberSet {
        DisturberSet {
            extrinsic: DisturberModel::zero(DisturberKind::Extrinsic, style),
            intrinsic: DisturberModel::zero(DisturberKind::Intrinsic, style),
            point: DisturberModel::zero(DisturberKind::Point, style),
        }
    }

    pub fn statistical(style: Group, params: &FallbackParams) -> DisturberSet {
        DisturberSet {
            extrinsic: DisturberModel::statistical(DisturberKind::Extrinsic, style, params),
            intrinsic: DisturberModel::statistical(DisturberKind::Intrinsic, style, params),
            point: DisturberModel::statistical(DisturberKind::Point, style, params),
        }
    }

    pub fn file_name(style: Group, kind: DisturberKind) -> String {
        format!("{style}-{kind}.json")
    }

    pub fn get(&self, kind: DisturberKind) -> &DisturberModel {
        match kind {
            DisturberKind::Extrinsic => &self.extrinsic,
            DisturberKind::Intrinsic => &self.intrinsic,
            DisturberKind::Point => &self.point,
        }
    }

    pub fn style(&self) -> Group {
        self.extrinsic.style
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        for kind in DisturberKind::ALL {
            let m = self.get(kind);
            m.save(dir.as_ref().join(DisturberSet::file_name(m.style, kind)))?;
        }
        Ok(())
    }

    /// Loads `<style>-<kind>.json` for all three kinds from `dir`.
    pub fn load(dir: impl AsRef<Path>, style: Group) -> Result<DisturberSet> {
        let load = |kind: DisturberKind| -> Result<DisturberModel> {
            let path = dir.as_ref().join(DisturberSet::file_name(style, kind));
            if !path.is_file() {
                return Err(Error::MissingModel(path.display().to_string()));
            }
            let m = DisturberModel::load(&path)?;
            m.check_kind(kind)?;
            if m.style != style {
                return Err(Error::Validation(format!(
                    "{} holds a {} model, expected {style}",
                    path.display(),
                    m.style
                )));
            }
            Ok(m)
        };
        Ok(DisturberSet {
            extrinsic: load(DisturberKind::Extrinsic)?,
            intrinsic: load(DisturberKind::Intrinsic)?,
            point: load(DisturberKind::Point)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn curve() -> BezierStroke {
        fit_bezier(&Stroke::from_xy(&[
            (100.0, 100.0),
            (150.0, 140.0),
            (220.0, 120.0),
            (300.0, 180.0),
        ]))
    }

    #[test]
    fn zero_models_are_identity_at_zero_noise() {
        let set = DisturberSet::zero(Group::Novice);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = curve();
        let (t, out) = disturb_extrinsic(&b, 0.0, &set.extrinsic, &mut rng).unwrap();
        assert!(t.is_identity(1e-12));
        for (a, c) in out.control.iter().zip(&b.control) {
            assert!(a.dist(*c) < 1e-9);
        }
        assert_eq!(
            disturb_intrinsic(&b, 0.0, &set.intrinsic, &mut rng).unwrap(),
            b
        );
        let poly = Stroke::from_xy(&b.polyline().iter().map(|p| (p.x, p.y)).collect::<Vec<_>>());
        assert_eq!(disturb_points(&poly, &set.point, &mut rng).unwrap(), poly);
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let m = DisturberModel::zero(DisturberKind::Point, Group::Novice);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            disturb_extrinsic(&curve(), 0.1, &m, &mut rng),
            Err(Error::KindMismatch { .. })
        ));
        assert!(disturb_intrinsic(&curve(), 0.1, &m, &mut rng).is_err());
    }

    #[test]
    fn extrinsic_output_is_the_returned_transform_of_the_input() {
        let m = DisturberModel::zero(DisturberKind::Extrinsic, Group::Novice);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = curve();
        let (t, out) = disturb_extrinsic(&b, 0.3, &m, &mut rng).unwrap();
        assert!(!t.is_identity(1e-6));
        for (a, c) in out.control.iter().zip(&b.control) {
            assert!(a.dist(t.apply(*c)) < 1e-9);
        }
    }

    #[test]
    fn smoothing_kernel_is_normalized() {
        let k = smoothing_kernel(2.0);
        assert_eq!(k.len(), 13);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn model_file_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let set = DisturberSet::statistical(Group::Professional, &FallbackParams::default());
        set.save(dir.path()).unwrap();
        assert_eq!(
            DisturberSet::load(dir.path(), Group::Professional).unwrap(),
            set
        );
        assert!(matches!(
            DisturberSet::load(dir.path(), Group::Novice),
            Err(Error::MissingModel(_))
        ));
    }
}
