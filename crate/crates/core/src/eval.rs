//! Synthetic ray-cast scenes, reconstruction and segmentation metrics, and
//! the throughput benchmark.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rangeview::{project, unproject, PointCloud, ProjectionConfig, RangeImage};
use crate::sampling::{adjoint, apply, RowSelection};
use crate::segment::{labels_to_cloud, ClassMap, GeometricSegmenter, LabelImage, SegmentError, Segmenter, SegmenterConfig, GROUND, OBSTACLE, UNLABELED};
use crate::solver::{superresolve, SolverConfig, SolverError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("no pixel is valid in both images within the requested scope")]
    EmptyDomain,
    #[error("shape mismatch: {0:?} vs {1:?}")]
    Shape((usize, usize), (usize, usize)),
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Segment(#[from] SegmentError),
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxSpec {
    pub center: [f64; 3],
    pub size: [f64; 3],
}

/// Vertical rectangle facing the sensor: its plane lies `distance` meters
/// away along azimuth `azimuth_deg`, spans `width` meters laterally and
/// `height` meters upward from `base`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WallSpec {
    pub distance: f64,
    pub azimuth_deg: f64,
    pub width: f64,
    pub base: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneSpec {
    /// `z` of the ground plane; `None` for no ground.
    pub ground_height: Option<f64>,
    pub boxes: Vec<BoxSpec>,
    pub walls: Vec<WallSpec>,
    /// Standard deviation of the additive range noise, truncated at 3 sigma.
    pub noise_sigma: f64,
    pub seed: u64,
    /// Returns farther than this are dropped.
    pub max_range: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            ground_height: None,
            boxes: Vec::new(),
            walls: Vec::new(),
            noise_sigma: 0.0,
            seed: 0,
            max_range: 120.0,
        }
    }
}

impl SceneSpec {
    pub fn plane(ground_height: f64) -> Self {
        Self {
            ground_height: Some(ground_height),
            ..Default::default()
        }
    }

    /// Street-like scene: ground plane, two to four car-sized boxes and up
    /// to two building facades, all drawn from `seed`.
    pub fn urban(seed: u64, noise_sigma: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed);
        let ground = -1.73;
        let n_boxes = rng.random_range(2..=4);
        let boxes = (0..n_boxes)
            .map(|_| {
                let d: f64 = rng.random_range(6.0..30.0);
                let az: f64 = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
                let size = [
                    rng.random_range(3.5..4.8),
                    rng.random_range(1.6..2.0),
                    rng.random_range(1.4..1.9),
                ];
                BoxSpec {
                    center: [d * az.cos(), d * az.sin(), ground + size[2] / 2.0],
                    size,
                }
            })
            .collect();
        let n_walls = rng.random_range(0..=2);
        let walls = (0..n_walls)
            .map(|_| WallSpec {
                distance: rng.random_range(15.0..40.0),
                azimuth_deg: rng.random_range(-180.0..180.0),
                width: rng.random_range(10.0..30.0),
                base: ground,
                height: rng.random_range(3.0..8.0),
            })
            .collect();
        Self {
            ground_height: Some(ground),
            boxes,
            walls,
            noise_sigma,
            seed,
            max_range: 120.0,
        }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(EvalError::Config(format!("noise_sigma must be >= 0, got {}", self.noise_sigma)));
        }
        if !(self.max_range > 0.0) {
            return Err(EvalError::Config("max_range must be > 0".into()));
        }
        if self.boxes.iter().any(|b| b.size.iter().any(|&s| !(s > 0.0))) {
            return Err(EvalError::Config("box sizes must be positive".into()));
        }
        if self.walls.iter().any(|w| !(w.distance > 0.0 && w.width > 0.0 && w.height > 0.0)) {
            return Err(EvalError::Config("wall distance, width and height must be positive".into()));
        }
        Ok(())
    }
}

fn ray_box(d: [f64; 3], b: &BoxSpec) -> Option<f64> {
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    for k in 0..3 {
        let lo = b.center[k] - b.size[k] / 2.0;
        let hi = b.center[k] + b.size[k] / 2.0;
        if d[k].abs() < 1e-15 {
            if 0.0 < lo || 0.0 > hi {
                return None;
            }
            continue;
        }
        let (mut t0, mut t1) = (lo / d[k], hi / d[k]);
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
        }
        t_near = t_near.max(t0);
        t_far = t_far.min(t1);
    }
    (t_near <= t_far && t_near > 0.0).then_some(t_near)
}

fn ray_wall(d: [f64; 3], w: &WallSpec) -> Option<f64> {
    let (s, c) = w.azimuth_deg.to_radians().sin_cos();
    let along = d[0] * c + d[1] * s;
    if along <= 1e-12 {
        return None;
    }
    let t = w.distance / along;
    let lateral = t * (-d[0] * s + d[1] * c);
    let z = t * d[2];
    (lateral.abs() <= w.width / 2.0 && z >= w.base && z <= w.base + w.height).then_some(t)
}

/// Casts one ray per pixel center; the nearest hit wins. Returns the range
/// image and ground-truth labels (ground, or obstacle with instance ids
/// numbering boxes then walls from 1).
pub fn render_scene(scene: &SceneSpec, cfg: &ProjectionConfig) -> (RangeImage, LabelImage) {
    let n = cfg.len();
    let mut range = vec![0.0; n];
    let mut valid = vec![false; n];
    let mut labels = vec![UNLABELED; n];
    let mut instance = vec![0u16; n];
    for row in 0..cfg.height {
        for col in 0..cfg.width {
            let d = cfg.pixel_direction(row, col);
            let mut best: Option<(f64, u16, u16)> = None;
            let mut offer = |t: f64, class: u16, inst: u16| {
                if t > 0.0 && t <= scene.max_range && best.is_none_or(|(bt, _, _)| t < bt) {
                    best = Some((t, class, inst));
                }
            };
            if let Some(g) = scene.ground_height {
                if d[2] < 0.0 && g < 0.0 {
                    offer(g / d[2], GROUND, 0);
                }
            }
            for (k, b) in scene.boxes.iter().enumerate() {
                if let Some(t) = ray_box(d, b) {
                    offer(t, OBSTACLE, (k + 1) as u16);
                }
            }
            for (k, w) in scene.walls.iter().enumerate() {
                if let Some(t) = ray_wall(d, w) {
                    offer(t, OBSTACLE, (scene.boxes.len() + k + 1) as u16);
                }
            }
            if let Some((t, class, inst)) = best {
                let u = row * cfg.width + col;
                range[u] = t;
                valid[u] = true;
                labels[u] = class;
                instance[u] = inst;
            }
        }
    }
    if scene.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(scene.seed);
        for (r, _) in range.iter_mut().zip(&valid).filter(|(_, &v)| v) {
            let e = loop {
                let e: f64 = StandardNormal.sample(&mut rng);
                if e.abs() <= 3.0 {
                    break e * scene.noise_sigma;
                }
            };
            *r = (*r + e).max(1e-3);
        }
    }
    (
        RangeImage::from_raw(*cfg, range, valid, None),
        LabelImage {
            config: *cfg,
            labels,
            instance: Some(instance),
        },
    )
}

/// Ray-cast scan as a point cloud plus its ground-truth label image.
pub fn generate_scene(scene: &SceneSpec, cfg: &ProjectionConfig) -> (PointCloud, LabelImage) {
    let (img, labels) = render_scene(scene, cfg);
    (unproject(&img), labels)
}

/// Low-resolution scan of a scene: the selected rows of the high-resolution
/// render, emitted as points along the high-resolution beam directions.
pub fn low_res_cloud(scene: &SceneSpec, hi: &ProjectionConfig, sel: &RowSelection) -> Result<PointCloud, EvalError> {
    let (img, _) = render_scene(scene, hi);
    let s = apply(&img, sel).map_err(SolverError::from)?;
    Ok(unproject(&adjoint(&s, sel).map_err(SolverError::from)?))
}

/// Noise-free high-resolution truth and noisy low-resolution observation.
pub fn sr_case(scene: &SceneSpec, hi: &ProjectionConfig, sel: &RowSelection) -> Result<(RangeImage, RangeImage), EvalError> {
    let clean = SceneSpec {
        noise_sigma: 0.0,
        ..scene.clone()
    };
    let (truth, _) = render_scene(&clean, hi);
    let (noisy, _) = render_scene(scene, hi);
    let s = apply(&noisy, sel).map_err(SolverError::from)?;
    Ok((truth, s))
}

/// Pixels over which range errors are averaged.
#[derive(Debug, Clone, Copy)]
pub enum Scope<'a> {
    All,
    /// Rows not observed by the selection.
    UnobservedRows(&'a RowSelection),
}

fn paired_errors<'a>(pred: &'a RangeImage, gt: &'a RangeImage, scope: Scope<'a>) -> Result<impl Iterator<Item = f64> + 'a, EvalError> {
    if (pred.height(), pred.width()) != (gt.height(), gt.width()) {
        return Err(EvalError::Shape((pred.height(), pred.width()), (gt.height(), gt.width())));
    }
    let observed = match scope {
        Scope::All => vec![false; pred.height()],
        Scope::UnobservedRows(sel) => {
            if sel.h_hi() != pred.height() {
                return Err(EvalError::Config(format!(
                    "selection covers {} rows, image has {}",
                    sel.h_hi(),
                    pred.height()
                )));
            }
            sel.gram_diagonal().into_iter().map(|v| v != 0.0).collect()
        }
    };
    let w = pred.width();
    Ok((0..pred.ranges().len()).filter_map(move |u| {
        (!observed[u / w] && pred.mask()[u] && gt.mask()[u]).then(|| pred.ranges()[u] - gt.ranges()[u])
    }))
}

/// Mean absolute range error over pixels valid in both images.
pub fn mae(pred: &RangeImage, gt: &RangeImage, scope: Scope<'_>) -> Result<f64, EvalError> {
    let (sum, n) = paired_errors(pred, gt, scope)?.fold((0.0, 0usize), |(s, n), e| (s + e.abs(), n + 1));
    if n == 0 {
        return Err(EvalError::EmptyDomain);
    }
    Ok(sum / n as f64)
}

pub fn rmse(pred: &RangeImage, gt: &RangeImage, scope: Scope<'_>) -> Result<f64, EvalError> {
    let (sum, n) = paired_errors(pred, gt, scope)?.fold((0.0, 0usize), |(s, n), e| (s + e * e, n + 1));
    if n == 0 {
        return Err(EvalError::EmptyDomain);
    }
    Ok((sum / n as f64).sqrt())
}

/// Per-class intersection over union, counted over pixels labeled in both
/// images. Classes absent from both are omitted.
pub fn iou(pred: &LabelImage, gt: &LabelImage) -> Result<BTreeMap<u16, f64>, EvalError> {
    if pred.labels.len() != gt.labels.len() {
        return Err(EvalError::Shape((pred.height(), pred.width()), (gt.height(), gt.width())));
    }
    let mut inter: BTreeMap<u16, usize> = BTreeMap::new();
    let mut union: BTreeMap<u16, usize> = BTreeMap::new();
    for (&p, &g) in pred.labels.iter().zip(&gt.labels) {
        if p == UNLABELED || g == UNLABELED {
            continue;
        }
        *union.entry(p).or_default() += 1;
        if p == g {
            *inter.entry(p).or_default() += 1;
        } else {
            *union.entry(g).or_default() += 1;
        }
    }
    Ok(union
        .into_iter()
        .map(|(c, u)| (c, inter.get(&c).copied().unwrap_or(0) as f64 / u as f64))
        .collect())
}

pub use crate::solver::residual_norm;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mae: Option<f64>,
    pub rmse: Option<f64>,
    pub residual: Option<f64>,
    pub iou_per_class: BTreeMap<String, f64>,
    pub fps: Option<f64>,
}

impl MetricReport {
    /// Names `iou` entries through `map`.
    pub fn with_iou(mut self, iou: &BTreeMap<u16, f64>, map: &ClassMap) -> Self {
        self.iou_per_class = iou
            .iter()
            .map(|(&c, &v)| (map.name(c).map_or_else(|| format!("class_{c}"), str::to_string), v))
            .collect();
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metric report serializes")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
}

impl LatencyStats {
    pub fn from_durations_ms(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return Self::default();
        }
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        Self {
            mean_ms: s.iter().sum::<f64>() / s.len() as f64,
            p50_ms: percentile(&s, 0.50),
            p95_ms: percentile(&s, 0.95),
            max_ms: s[s.len() - 1],
        }
    }
}

/// Nearest-rank percentile of sorted samples.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub scans: usize,
    pub wall_time_s: f64,
    /// `scans / wall_time_s`.
    pub fps: f64,
    pub fps_p50: f64,
    pub fps_p95: f64,
    pub latency: LatencyStats,
    pub stages: BTreeMap<String, LatencyStats>,
}

/// Times the project, super-resolve, segment and back-project chain on
/// generated low-resolution scans. Scene generation is not timed.
pub fn bench_throughput(n_scans: usize, solver_cfg: &SolverConfig, seg_cfg: &SegmenterConfig) -> Result<BenchReport, EvalError> {
    if n_scans == 0 {
        return Err(EvalError::Config("benchmark needs at least one scan".into()));
    }
    solver_cfg.validate()?;
    let segmenter = GeometricSegmenter::new(*seg_cfg)?;
    let hi = ProjectionConfig::high_res();
    let lo = ProjectionConfig::low_res();
    let sel = RowSelection::uniform(hi.height, lo.height, 0).map_err(SolverError::from)?;
    let clouds = (0..n_scans)
        .map(|i| low_res_cloud(&SceneSpec::urban(i as u64, 0.02), &hi, &sel))
        .collect::<Result<Vec<_>, _>>()?;

    let mut stage_ms: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let mut total_ms = Vec::with_capacity(n_scans);
    let start = Instant::now();
    for cloud in &clouds {
        let t0 = Instant::now();
        let s = project(cloud, &lo);
        let t1 = Instant::now();
        let (t_hat, _) = superresolve(&s, &sel, solver_cfg)?;
        let t2 = Instant::now();
        let labels = segmenter.segment(&t_hat)?;
        let t3 = Instant::now();
        let out = labels_to_cloud(&t_hat, &labels)?;
        let t4 = Instant::now();
        std::hint::black_box(out);
        let ms = |a: Instant, b: Instant| (b - a).as_secs_f64() * 1e3;
        stage_ms.entry("project").or_default().push(ms(t0, t1));
        stage_ms.entry("superresolve").or_default().push(ms(t1, t2));
        stage_ms.entry("segment").or_default().push(ms(t2, t3));
        stage_ms.entry("labels_to_cloud").or_default().push(ms(t3, t4));
        total_ms.push(ms(t0, t4));
    }
    let wall = start.elapsed().as_secs_f64();
    let latency = LatencyStats::from_durations_ms(&total_ms);
    let to_fps = |ms: f64| if ms > 0.0 { 1e3 / ms } else { f64::INFINITY };
    Ok(BenchReport {
        scans: n_scans,
        wall_time_s: wall,
        fps: n_scans as f64 / wall,
        fps_p50: to_fps(latency.p50_ms),
        // 95th percentile latency is the 5th percentile of throughput
        fps_p95: to_fps(latency.p95_ms),
        latency,
        stages: stage_ms
            .into_iter()
            .map(|(k, v)| (k.to_string(), LatencyStats::from_durations_ms(&v)))
            .collect(),
    })
}
