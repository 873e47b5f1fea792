//! Spherical projection between unordered point clouds and range images.
//!
//! Conventions: azimuth `phi = atan2(y, x)` maps to columns with `phi = 0`
//! at the grid center and `phi = +pi` at column 0; elevation maps to rows
//! with row 0 at `fov_up` (top of the image).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Stored in `RangeImage::range` wherever the mask is false.
pub const INVALID_RANGE: f64 = -1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProjectionError {
    #[error("non-finite point ({x}, {y}, {z})")]
    NonFinite { x: f64, y: f64, z: f64 },
    #[error("point at the sensor origin has no direction")]
    ZeroRange,
    #[error("invalid projection config: {0}")]
    Config(String),
    #[error("grid size mismatch: expected {expected} cells, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("valid pixel {index} has non-positive or non-finite range {value}")]
    BadRange { index: usize, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub intensity: f64,
}

impl Point {
    pub fn new(x: f64, y: f64, z: f64, intensity: f64) -> Self {
        Self { x, y, z, intensity }
    }

    pub fn range(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Point>,
    /// Nanoseconds since the epoch.
    pub stamp: u64,
    pub frame_id: String,
}

impl PointCloud {
    pub fn new(points: Vec<Point>) -> Self {
        Self {
            points,
            stamp: 0,
            frame_id: String::from("lidar"),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionConfig {
    pub height: usize,
    pub width: usize,
    /// Degrees.
    pub fov_up: f64,
    /// Degrees.
    pub fov_down: f64,
}

impl ProjectionConfig {
    pub fn new(height: usize, width: usize, fov_up: f64, fov_down: f64) -> Result<Self, ProjectionError> {
        let cfg = Self {
            height,
            width,
            fov_up,
            fov_down,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// 16 rows over +/-15 degrees, 1024 columns.
    pub fn low_res() -> Self {
        Self {
            height: 16,
            width: 1024,
            fov_up: 15.0,
            fov_down: -15.0,
        }
    }

    /// 64 rows over the same field of view as [`ProjectionConfig::low_res`].
    pub fn high_res() -> Self {
        Self {
            height: 64,
            ..Self::low_res()
        }
    }

    pub fn validate(&self) -> Result<(), ProjectionError> {
        if self.height == 0 || self.width == 0 {
            return Err(ProjectionError::Config(format!(
                "grid must be non-empty, got {}x{}",
                self.height, self.width
            )));
        }
        if !(self.fov_up.is_finite() && self.fov_down.is_finite()) || self.fov_up <= self.fov_down {
            return Err(ProjectionError::Config(format!(
                "fov_up ({}) must exceed fov_down ({})",
                self.fov_up, self.fov_down
            )));
        }
        if self.fov_up > 90.0 || self.fov_down < -90.0 {
            return Err(ProjectionError::Config(
                "field of view must lie within [-90, 90] degrees".into(),
            ));
        }
        Ok(())
    }

    /// Same field of view and width, different row count.
    pub fn with_height(&self, height: usize) -> Self {
        Self { height, ..*self }
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn fov_span(&self) -> f64 {
        (self.fov_up - self.fov_down).to_radians()
    }

    /// Elevation (radians) of the center of `row`.
    pub fn row_elevation(&self, row: usize) -> f64 {
        let frac = (row as f64 + 0.5) / self.height as f64;
        self.fov_down.to_radians() + (1.0 - frac) * self.fov_span()
    }

    /// Azimuth (radians) of the center of `col`.
    pub fn col_azimuth(&self, col: usize) -> f64 {
        let frac = (col as f64 + 0.5) / self.width as f64;
        PI * (1.0 - 2.0 * frac)
    }

    /// Unit direction through the center of pixel (`row`, `col`).
    pub fn pixel_direction(&self, row: usize, col: usize) -> [f64; 3] {
        let theta = self.row_elevation(row);
        let phi = self.col_azimuth(col);
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        [ct * cp, ct * sp, st]
    }
}

/// Grid cell of a point under `cfg`. Out-of-FOV elevations clamp to the
/// first or last row.
pub fn pixel_of(p: &Point, cfg: &ProjectionConfig) -> Result<(usize, usize), ProjectionError> {
    if !p.is_finite() {
        return Err(ProjectionError::NonFinite {
            x: p.x,
            y: p.y,
            z: p.z,
        });
    }
    let r = p.range();
    if r <= 0.0 || !r.is_finite() {
        return Err(ProjectionError::ZeroRange);
    }
    Ok(pixel_of_unchecked(p.x, p.y, p.z, r, cfg))
}

fn pixel_of_unchecked(x: f64, y: f64, z: f64, r: f64, cfg: &ProjectionConfig) -> (usize, usize) {
    let phi = y.atan2(x);
    let col = (0.5 * (1.0 - phi / PI) * cfg.width as f64).floor();
    let theta = (z / r).clamp(-1.0, 1.0).asin();
    let row = ((1.0 - (theta - cfg.fov_down.to_radians()) / cfg.fov_span()) * cfg.height as f64).floor();
    (clamp_index(row, cfg.height), clamp_index(col, cfg.width))
}

fn clamp_index(v: f64, n: usize) -> usize {
    if v <= 0.0 {
        0
    } else if v >= (n - 1) as f64 {
        n - 1
    } else {
        v as usize
    }
}

/// H x W range grid with an authoritative validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeImage {
    config: ProjectionConfig,
    range: Vec<f64>,
    valid: Vec<bool>,
    intensity: Option<Vec<f64>>,
}

impl RangeImage {
    /// All pixels invalid.
    pub fn empty(config: ProjectionConfig) -> Self {
        let n = config.len();
        Self {
            config,
            range: vec![INVALID_RANGE; n],
            valid: vec![false; n],
            intensity: None,
        }
    }

    /// Builds an image from a row-major range grid; pixels whose mask entry
    /// is false get the sentinel regardless of the supplied value.
    pub fn from_parts(
        config: ProjectionConfig,
        mut range: Vec<f64>,
        valid: Vec<bool>,
        intensity: Option<Vec<f64>>,
    ) -> Result<Self, ProjectionError> {
        config.validate()?;
        let n = config.len();
        for len in [range.len(), valid.len()]
            .into_iter()
            .chain(intensity.as_ref().map(Vec::len))
        {
            if len != n {
                return Err(ProjectionError::Shape { expected: n, got: len });
            }
        }
        for (i, (r, &v)) in range.iter_mut().zip(&valid).enumerate() {
            if v {
                if !(r.is_finite() && *r > 0.0) {
                    return Err(ProjectionError::BadRange { index: i, value: *r });
                }
            } else {
                *r = INVALID_RANGE;
            }
        }
        Ok(Self {
            config,
            range,
            valid,
            intensity,
        })
    }

    /// Every pixel valid with the given ranges.
    pub fn from_ranges(config: ProjectionConfig, range: Vec<f64>) -> Result<Self, ProjectionError> {
        let valid = vec![true; range.len()];
        Self::from_parts(config, range, valid, None)
    }

    /// Skips range validation; callers guarantee positive finite values on
    /// valid pixels.
    pub(crate) fn from_raw(
        config: ProjectionConfig,
        mut range: Vec<f64>,
        valid: Vec<bool>,
        intensity: Option<Vec<f64>>,
    ) -> Self {
        debug_assert_eq!(range.len(), config.len());
        debug_assert_eq!(valid.len(), config.len());
        for (r, &v) in range.iter_mut().zip(&valid) {
            if !v {
                *r = INVALID_RANGE;
            }
        }
        Self {
            config,
            range,
            valid,
            intensity,
        }
    }

    pub fn config(&self) -> &ProjectionConfig {
        &self.config
    }

    pub fn height(&self) -> usize {
        self.config.height
    }

    pub fn width(&self) -> usize {
        self.config.width
    }

    pub fn ranges(&self) -> &[f64] {
        &self.range
    }

    pub fn mask(&self) -> &[bool] {
        &self.valid
    }

    pub fn intensity(&self) -> Option<&[f64]> {
        self.intensity.as_deref()
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.config.width + col
    }

    #[inline]
    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        self.valid[self.index(row, col)]
    }

    /// Range at a pixel, `None` when invalid.
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let i = self.index(row, col);
        self.valid[i].then(|| self.range[i])
    }

    /// Range as seen by linear algebra: zero where invalid.
    #[inline]
    pub fn value(&self, index: usize) -> f64 {
        if self.valid[index] {
            self.range[index]
        } else {
            0.0
        }
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let w = self.config.width;
        &self.range[row * w..(row + 1) * w]
    }

    pub fn row_mask(&self, row: usize) -> &[bool] {
        let w = self.config.width;
        &self.valid[row * w..(row + 1) * w]
    }

    pub fn occupancy(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    pub fn into_parts(self) -> (ProjectionConfig, Vec<f64>, Vec<bool>, Option<Vec<f64>>) {
        (self.config, self.range, self.valid, self.intensity)
    }

    /// Little-endian bytes of config, ranges and mask; used to compare
    /// outputs bit for bit.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + self.range.len() * 9);
        out.extend_from_slice(&(self.config.height as u64).to_le_bytes());
        out.extend_from_slice(&(self.config.width as u64).to_le_bytes());
        out.extend_from_slice(&self.config.fov_up.to_le_bytes());
        out.extend_from_slice(&self.config.fov_down.to_le_bytes());
        for r in &self.range {
            out.extend_from_slice(&r.to_le_bytes());
        }
        out.extend(self.valid.iter().map(|&v| v as u8));
        if let Some(intensity) = &self.intensity {
            for v in intensity {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }
}

/// Counts of points that could not be binned.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectionReport {
    pub input_points: usize,
    pub binned_points: usize,
    pub non_finite: usize,
    pub zero_range: usize,
    pub occupied_pixels: usize,
}

pub fn project(cloud: &PointCloud, cfg: &ProjectionConfig) -> RangeImage {
    project_with_report(cloud, cfg).0
}

/// Bins every point; on collision the nearer return wins and ties keep the
/// earlier point.
pub fn project_with_report(cloud: &PointCloud, cfg: &ProjectionConfig) -> (RangeImage, ProjectionReport) {
    let n = cfg.len();
    let mut range = vec![INVALID_RANGE; n];
    let mut valid = vec![false; n];
    let mut intensity = vec![0.0; n];
    let mut report = ProjectionReport {
        input_points: cloud.points.len(),
        ..Default::default()
    };
    for p in &cloud.points {
        if !p.is_finite() {
            report.non_finite += 1;
            continue;
        }
        let r = p.range();
        if !(r > 0.0 && r.is_finite()) {
            report.zero_range += 1;
            continue;
        }
        let (row, col) = pixel_of_unchecked(p.x, p.y, p.z, r, cfg);
        let i = row * cfg.width + col;
        report.binned_points += 1;
        if !valid[i] || r < range[i] {
            valid[i] = true;
            range[i] = r;
            intensity[i] = p.intensity;
        }
    }
    report.occupied_pixels = valid.iter().filter(|&&v| v).count();
    (RangeImage::from_raw(*cfg, range, valid, Some(intensity)), report)
}

/// One point per valid pixel, in row-major order.
pub fn unproject(img: &RangeImage) -> PointCloud {
    let cfg = img.config();
    let intensity = img.intensity();
    let mut points = Vec::with_capacity(img.occupancy());
    for row in 0..cfg.height {
        for col in 0..cfg.width {
            let i = img.index(row, col);
            if !img.mask()[i] {
                continue;
            }
            let r = img.ranges()[i];
            let [x, y, z] = point_at(cfg, row, col, r);
            let inten = intensity.map_or(0.0, |v| v[i]);
            points.push(Point::new(x, y, z, inten));
        }
    }
    PointCloud::new(points)
}

/// Position at range `r` along the center ray of a pixel. The coordinates
/// are nudged by a few ulps where needed so that the Euclidean norm
/// evaluates to exactly `r`, which makes project/unproject lossless.
pub fn point_at(cfg: &ProjectionConfig, row: usize, col: usize, r: f64) -> [f64; 3] {
    let d = cfg.pixel_direction(row, col);
    let mut p = [r * d[0], r * d[1], r * d[2]];
    let norm = |p: &[f64; 3]| (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    if norm(&p) == r {
        return p;
    }
    let n = norm(&p);
    if n > 0.0 {
        let s = r / n;
        p = [p[0] * s, p[1] * s, p[2] * s];
        if norm(&p) == r {
            return p;
        }
    }
    // Only one rounded sum of squares maps to `r`, and squares of adjacent
    // floats skip values, so ulp steps of the dominant coordinate alone can
    // miss it. Shift a smaller coordinate in increments worth about a
    // quarter ulp of the sum to change the rounding.
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| p[b].abs().total_cmp(&p[a].abs()));
    let a = order[0];
    let sum_ulp = next_up(r * r) - r * r;
    let mut best = p;
    let mut best_err = (norm(&p) - r).abs();
    for &f in &order[1..] {
        let v = p[f];
        let delta = if v == 0.0 {
            (0.25 * sum_ulp).sqrt()
        } else {
            (0.125 * sum_ulp / v.abs()).max(next_up(v.abs()) - v.abs())
        };
        for kf in offsets(16) {
            for sa in offsets(4) {
                let mut q = p;
                q[f] = v + f64::from(kf) * delta;
                q[a] = step_ulps(q[a], sa);
                let err = (norm(&q) - r).abs();
                if err == 0.0 {
                    return q;
                }
                if err < best_err {
                    best_err = err;
                    best = q;
                }
            }
        }
    }
    best
}

fn offsets(n: i32) -> impl Iterator<Item = i32> {
    std::iter::once(0).chain((1..=n).flat_map(|k| [k, -k]))
}

fn step_ulps(v: f64, n: i32) -> f64 {
    (0..n.unsigned_abs()).fold(v, |v, _| if n > 0 { next_up(v) } else { next_down(v) })
}


fn next_up(v: f64) -> f64 {
    if v.is_nan() || v == f64::INFINITY {
        return v;
    }
    if v == 0.0 {
        return f64::from_bits(1);
    }
    let bits = v.to_bits();
    if v > 0.0 {
        f64::from_bits(bits + 1)
    } else {
        f64::from_bits(bits - 1)
    }
}

fn next_down(v: f64) -> f64 {
    -next_up(-v)
}
