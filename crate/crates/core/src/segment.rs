//! Geometric range-image segmentation: column-wise inclination ground
//! removal followed by angle-based obstacle clustering.
//!
//! Any `RangeImage -> LabelImage` component can stand in through the
//! [`Segmenter`] trait; [`GeometricSegmenter`] is the built-in one.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rangeview::{point_at, Point, PointCloud, ProjectionConfig, RangeImage};

pub const UNLABELED: u16 = 0;
pub const GROUND: u16 = 1;
pub const OBSTACLE: u16 = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SegmentError {
    #[error("dimension mismatch: image {image:?} vs labels {labels:?}")]
    Shape { image: (usize, usize), labels: (usize, usize) },
    #[error("invalid segmenter config: {0}")]
    Config(String),
    #[error("class map: {0}")]
    ClassMap(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub id: u16,
    pub name: String,
    /// Label written to SemanticKITTI files.
    pub kitti_id: u16,
}

/// Class ids and names. Id 0 is always `unlabeled`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMap {
    entries: Vec<ClassEntry>,
}

/// SemanticKITTI ids of flat ground classes (road, parking, sidewalk,
/// other-ground, lane-marking, terrain).
const KITTI_GROUND: [u16; 6] = [40, 44, 48, 49, 60, 72];

impl Default for ClassMap {
    fn default() -> Self {
        let entry = |id, name: &str, kitti_id| ClassEntry {
            id,
            name: name.to_string(),
            kitti_id,
        };
        Self {
            entries: vec![
                entry(UNLABELED, "unlabeled", 0),
                entry(GROUND, "ground", 40),
                entry(OBSTACLE, "obstacle", 99),
            ],
        }
    }
}

impl ClassMap {
    /// Adds a class in the next free slot and returns its id.
    pub fn register(&mut self, name: &str, kitti_id: u16) -> Result<u16, SegmentError> {
        if self.entries.iter().any(|e| e.name == name) {
            return Err(SegmentError::ClassMap(format!("duplicate class name {name:?}")));
        }
        let id = self.entries.iter().map(|e| e.id).max().unwrap_or(0) + 1;
        self.entries.push(ClassEntry {
            id,
            name: name.to_string(),
            kitti_id,
        });
        Ok(id)
    }

    pub fn entries(&self) -> &[ClassEntry] {
        &self.entries
    }

    pub fn name(&self, id: u16) -> Option<&str> {
        self.entries.iter().find(|e| e.id == id).map(|e| e.name.as_str())
    }

    pub fn id(&self, name: &str) -> Option<u16> {
        self.entries.iter().find(|e| e.name == name).map(|e| e.id)
    }

    pub fn contains(&self, id: u16) -> bool {
        self.entries.iter().any(|e| e.id == id)
    }

    pub fn to_kitti(&self, id: u16) -> u16 {
        self.entries.iter().find(|e| e.id == id).map_or(0, |e| e.kitti_id)
    }

    /// Exact matches first; otherwise flat-ground ids map to ground and any
    /// other non-zero id (except 1, "outlier") to obstacle.
    pub fn from_kitti(&self, kitti_id: u16) -> u16 {
        if let Some(e) = self.entries.iter().find(|e| e.kitti_id == kitti_id) {
            return e.id;
        }
        match kitti_id {
            0 | 1 => UNLABELED,
            k if KITTI_GROUND.contains(&k) => GROUND,
            _ => OBSTACLE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SegmenterConfig {
    /// Degrees; consecutive returns inclined less than this continue the
    /// ground.
    pub ground_angle_max: f64,
    /// Degrees; neighbours whose separation angle exceeds this merge.
    pub cluster_angle_min: f64,
    pub min_cluster_size: usize,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        Self {
            ground_angle_max: 10.0,
            cluster_angle_min: 10.0,
            min_cluster_size: 8,
        }
    }
}

impl SegmenterConfig {
    pub fn validate(&self) -> Result<(), SegmentError> {
        let angle_ok = |a: f64| a > 0.0 && a < 90.0;
        if !angle_ok(self.ground_angle_max) {
            return Err(SegmentError::Config(format!(
                "ground_angle_max must lie in (0, 90), got {}",
                self.ground_angle_max
            )));
        }
        if !angle_ok(self.cluster_angle_min) {
            return Err(SegmentError::Config(format!(
                "cluster_angle_min must lie in (0, 90), got {}",
                self.cluster_angle_min
            )));
        }
        if self.min_cluster_size == 0 {
            return Err(SegmentError::Config("min_cluster_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-pixel class ids and optional instance ids.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelImage {
    pub config: ProjectionConfig,
    pub labels: Vec<u16>,
    pub instance: Option<Vec<u16>>,
}

impl LabelImage {
    pub fn unlabeled(config: ProjectionConfig) -> Self {
        Self {
            config,
            labels: vec![UNLABELED; config.len()],
            instance: None,
        }
    }

    pub fn height(&self) -> usize {
        self.config.height
    }

    pub fn width(&self) -> usize {
        self.config.width
    }

    pub fn get(&self, row: usize, col: usize) -> u16 {
        self.labels[row * self.config.width + col]
    }

    /// Largest instance id, which is also the number of instances.
    pub fn instance_count(&self) -> usize {
        self.instance
            .as_ref()
            .and_then(|v| v.iter().copied().max())
            .unwrap_or(0) as usize
    }

    pub fn count(&self, class: u16) -> usize {
        self.labels.iter().filter(|&&l| l == class).count()
    }
}

fn check_dims(img: &RangeImage, labels: &LabelImage) -> Result<(), SegmentError> {
    if img.height() != labels.height() || img.width() != labels.width() || labels.labels.len() != img.ranges().len() {
        return Err(SegmentError::Shape {
            image: (img.height(), img.width()),
            labels: (labels.height(), labels.width()),
        });
    }
    Ok(())
}

pub trait Segmenter {
    fn segment(&self, img: &RangeImage) -> Result<LabelImage, SegmentError>;
}

/// Ground removal then obstacle clustering.
#[derive(Debug, Clone, Copy, Default)]
pub struct GeometricSegmenter {
    pub config: SegmenterConfig,
}

impl GeometricSegmenter {
    pub fn new(config: SegmenterConfig) -> Result<Self, SegmentError> {
        config.validate()?;
        Ok(Self { config })
    }
}

impl Segmenter for GeometricSegmenter {
    fn segment(&self, img: &RangeImage) -> Result<LabelImage, SegmentError> {
        let ground = ground_segment(img, &self.config);
        cluster_obstacles(img, &ground, &self.config)
    }
}

/// Walks each column upward from the bottom row; returns stay ground while
/// the inclination between consecutive valid returns is at most
/// `ground_angle_max`. Everything above the first steeper step is obstacle.
pub fn ground_segment(img: &RangeImage, cfg: &SegmenterConfig) -> LabelImage {
    let c = *img.config();
    let (h, w) = (c.height, c.width);
    let mut labels = vec![UNLABELED; h * w];
    let max_tan = cfg.ground_angle_max.to_radians().tan();
    let mut column: Vec<(usize, [f64; 3])> = Vec::with_capacity(h);
    for col in 0..w {
        column.clear();
        for row in (0..h).rev() {
            if let Some(r) = img.get(row, col) {
                column.push((row * w + col, point_at(&c, row, col, r)));
            }
        }
        let Some(&(first, _)) = column.first() else {
            continue;
        };
        let mut on_ground = true;
        labels[first] = GROUND;
        for (k, pair) in column.windows(2).enumerate() {
            let ((_, a), (u, b)) = (pair[0], pair[1]);
            if on_ground {
                let dz = (b[2] - a[2]).abs();
                let dxy = (b[0] - a[0]).hypot(b[1] - a[1]);
                if dz > max_tan * dxy {
                    on_ground = false;
                    if k == 0 {
                        labels[first] = OBSTACLE;
                    }
                }
            }
            labels[u] = if on_ground { GROUND } else { OBSTACLE };
        }
    }
    LabelImage {
        config: c,
        labels,
        instance: None,
    }
}

/// Flood fill over 4-connected obstacle pixels (columns wrap in azimuth).
/// Neighbours merge when the angle between the farther return and the line
/// joining both returns exceeds `cluster_angle_min`. Clusters below
/// `min_cluster_size` keep the obstacle class but get instance 0; kept
/// clusters are numbered 1..n in raster order of their first pixel.
pub fn cluster_obstacles(img: &RangeImage, labels: &LabelImage, cfg: &SegmenterConfig) -> Result<LabelImage, SegmentError> {
    check_dims(img, labels)?;
    let c = *img.config();
    let (h, w) = (c.height, c.width);
    let n = h * w;
    let r = img.ranges();
    let is_obstacle = |u: usize| labels.labels[u] == OBSTACLE && img.mask()[u];
    let alpha_v = (c.fov_up - c.fov_down).to_radians() / h as f64;
    let alpha_h = std::f64::consts::TAU / w as f64;
    let min_beta = cfg.cluster_angle_min.to_radians();
    let connected = |a: f64, b: f64, alpha: f64| {
        let (d1, d2) = if a >= b { (a, b) } else { (b, a) };
        let beta = (d2 * alpha.sin()).atan2(d1 - d2 * alpha.cos());
        beta > min_beta
    };

    let mut comp = vec![0u32; n];
    let mut instance = vec![0u16; n];
    let mut next_comp = 0u32;
    let mut next_instance = 0u16;
    let mut queue = VecDeque::new();
    let mut members = Vec::new();
    for seed in 0..n {
        if comp[seed] != 0 || !is_obstacle(seed) {
            continue;
        }
        next_comp += 1;
        comp[seed] = next_comp;
        queue.push_back(seed);
        members.clear();
        while let Some(u) = queue.pop_front() {
            members.push(u);
            let (i, j) = (u / w, u % w);
            let mut neighbours: [Option<(usize, f64)>; 4] = [None; 4];
            if i > 0 {
                neighbours[0] = Some((u - w, alpha_v));
            }
            if i + 1 < h {
                neighbours[1] = Some((u + w, alpha_v));
            }
            if w > 1 {
                neighbours[2] = Some((i * w + (j + w - 1) % w, alpha_h));
                neighbours[3] = Some((i * w + (j + 1) % w, alpha_h));
            }
            for (v, alpha) in neighbours.into_iter().flatten() {
                if comp[v] == 0 && is_obstacle(v) && connected(r[u], r[v], alpha) {
                    comp[v] = next_comp;
                    queue.push_back(v);
                }
            }
        }
        if members.len() >= cfg.min_cluster_size {
            next_instance = next_instance.saturating_add(1);
            for &u in &members {
                instance[u] = next_instance;
            }
        }
    }
    Ok(LabelImage {
        config: c,
        labels: labels.labels.clone(),
        instance: Some(instance),
    })
}

/// Points with per-point class and instance ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledCloud {
    pub cloud: PointCloud,
    pub classes: Vec<u16>,
    pub instances: Vec<u16>,
}

impl LabeledCloud {
    pub fn len(&self) -> usize {
        self.cloud.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cloud.points.is_empty()
    }

    /// SemanticKITTI packing: class in the low 16 bits, instance in the high.
    pub fn kitti_labels(&self, map: &ClassMap) -> Vec<u32> {
        self.classes
            .iter()
            .zip(&self.instances)
            .map(|(&c, &i)| (u32::from(i) << 16) | u32::from(map.to_kitti(c)))
            .collect()
    }
}

/// Unprojects valid pixels (row-major) and attaches their labels.
pub fn labels_to_cloud(img: &RangeImage, labels: &LabelImage) -> Result<LabeledCloud, SegmentError> {
    check_dims(img, labels)?;
    let c = img.config();
    let mut points = Vec::with_capacity(img.occupancy());
    let mut classes = Vec::with_capacity(points.capacity());
    let mut instances = Vec::with_capacity(points.capacity());
    for row in 0..c.height {
        for col in 0..c.width {
            let u = img.index(row, col);
            let Some(r) = img.get(row, col) else { continue };
            let [x, y, z] = point_at(c, row, col, r);
            let inten = img.intensity().map_or(0.0, |v| v[u]);
            points.push(Point::new(x, y, z, inten));
            classes.push(labels.labels[u]);
            instances.push(labels.instance.as_ref().map_or(0, |v| v[u]));
        }
    }
    Ok(LabeledCloud {
        cloud: PointCloud::new(points),
        classes,
        instances,
    })
}
