//! Point clouds, nearest-neighbor queries, bounding boxes and set metrics.

mod io;
mod kdtree;
mod metrics;

pub use io::{parse_point_cloud, read_point_cloud, write_point_cloud};
pub use kdtree::KdTree;
pub use metrics::{
    kth_nn_distance, kth_nn_distance_brute, kth_nn_distance_with, nearest_distances, nearest_distances_with,
    set_distances, Backend, MetricReport, DEFAULT_K, KD_TREE_THRESHOLD,
};

use crate::error::{invalid, Result};

const NORMAL_TOLERANCE: f64 = 1e-6;

/// Sample points with optional unit normals, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    points: Vec<f64>,
    normals: Option<Vec<f64>>,
}

impl PointCloud {
    pub fn new(dim: usize, points: Vec<f64>, normals: Option<Vec<f64>>) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return invalid(format!("point dimension must be 2 or 3, got {dim}"));
        }
        Self::new_any_dim(dim, points, normals)
    }

    /// Like [`PointCloud::new`] but accepts any dimension ≥ 1.
    pub fn new_any_dim(dim: usize, points: Vec<f64>, normals: Option<Vec<f64>>) -> Result<Self> {
        if dim == 0 || points.is_empty() || !points.len().is_multiple_of(dim) {
            return invalid("point cloud needs at least one complete point");
        }
        if let Some(i) = points.iter().position(|v| !v.is_finite()) {
            return invalid(format!("non-finite coordinate in point {}", i / dim));
        }
        if let Some(normals) = &normals {
            if normals.len() != points.len() {
                return invalid(format!(
                    "normal count {} does not match point count {}",
                    normals.len() / dim,
                    points.len() / dim
                ));
            }
            for (i, n) in normals.chunks_exact(dim).enumerate() {
                let norm = n.iter().map(|v| v * v).sum::<f64>().sqrt();
                if !((1.0 - NORMAL_TOLERANCE)..=(1.0 + NORMAL_TOLERANCE)).contains(&norm) {
                    return invalid(format!("normal {i} has norm {norm}, expected 1"));
                }
            }
        }
        Ok(Self { dim, points, normals })
    }

    pub fn from_points(dim: usize, points: &[Vec<f64>]) -> Result<Self> {
        if points.iter().any(|p| p.len() != dim) {
            return invalid("all points must have the cloud dimension");
        }
        Self::new_any_dim(dim, points.concat(), None)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn normal(&self, i: usize) -> Option<&[f64]> {
        self.normals.as_ref().map(|n| &n[i * self.dim..(i + 1) * self.dim])
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn normals(&self) -> Option<&[f64]> {
        self.normals.as_deref()
    }

    pub fn has_normals(&self) -> bool {
        self.normals.is_some()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }

    /// Copy with the normals dropped.
    pub fn without_normals(&self) -> Self {
        Self {
            dim: self.dim,
            points: self.points.clone(),
            normals: None,
        }
    }

    /// Applies `x -> (x - center) * scale` to every point; normals are
    /// unchanged for positive scales.
    pub fn transformed(&self, t: &Similarity) -> Self {
        let points = self.iter().flat_map(|p| t.forward(p)).collect::<Vec<_>>();
        Self {
            dim: self.dim,
            points,
            normals: self.normals.clone(),
        }
    }
}

/// Axis-aligned box.
#[derive(Debug, Clone, PartialEq)]
pub struct Aabb {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Aabb {
    pub fn new(min: Vec<f64>, max: Vec<f64>) -> Result<Self> {
        if min.len() != max.len() || min.is_empty() {
            return invalid("box corners must have the same non-zero dimension");
        }
        if min.iter().zip(&max).any(|(a, b)| !(a <= b)) {
            return invalid("box min must be <= max componentwise");
        }
        Ok(Self { min, max })
    }

    /// The cube `[-half, half]^dim`.
    pub fn symmetric(dim: usize, half: f64) -> Self {
        Self {
            min: vec![-half; dim],
            max: vec![half; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn side(&self, axis: usize) -> f64 {
        self.max[axis] - self.min[axis]
    }

    pub fn largest_side(&self) -> f64 {
        (0..self.dim()).map(|a| self.side(a)).fold(0.0, f64::max)
    }

    pub fn center(&self) -> Vec<f64> {
        self.min.iter().zip(&self.max).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter()
            .zip(self.min.iter().zip(&self.max))
            .all(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
    }

    pub fn is_degenerate(&self) -> bool {
        (0..self.dim()).any(|a| self.side(a) <= 0.0)
    }

    /// Smallest cube sharing this box's center that contains it.
    pub fn cube_hull(&self) -> Self {
        let half = 0.5 * self.largest_side();
        let c = self.center();
        Self {
            min: c.iter().map(|v| v - half).collect(),
            max: c.iter().map(|v| v + half).collect(),
        }
    }
}

/// Tight bounding box expanded by `margin_fraction` of each side; degenerate
/// sides are expanded by `margin_fraction` of the largest side instead.
pub fn bounding_box(cloud: &PointCloud, margin_fraction: f64) -> Result<Aabb> {
    if !(margin_fraction >= 0.0) {
        return invalid("margin fraction must be non-negative");
    }
    let dim = cloud.dim();
    let mut min = vec![f64::INFINITY; dim];
    let mut max = vec![f64::NEG_INFINITY; dim];
    for p in cloud.iter() {
        for a in 0..dim {
            min[a] = min[a].min(p[a]);
            max[a] = max[a].max(p[a]);
        }
    }
    let largest = (0..dim).map(|a| max[a] - min[a]).fold(0.0, f64::max);
    for a in 0..dim {
        let side = max[a] - min[a];
        let pad = if side > 0.0 { side } else { largest } * margin_fraction;
        min[a] -= pad;
        max[a] += pad;
    }
    Aabb::new(min, max)
}

/// Uniform scaling about a center: `x -> (x - center) * scale`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Similarity {
    pub center: Vec<f64>,
    pub scale: f64,
}

impl Similarity {
    pub fn identity(dim: usize) -> Self {
        Self {
            center: vec![0.0; dim],
            scale: 1.0,
        }
    }

    /// Centers the cloud at its centroid and scales the bounding-box long
    /// side to 2.
    pub fn normalizing(cloud: &PointCloud) -> Self {
        let n = cloud.len() as f64;
        let mut center = vec![0.0; cloud.dim()];
        for p in cloud.iter() {
            for (c, v) in center.iter_mut().zip(p) {
                *c += v;
            }
        }
        center.iter_mut().for_each(|c| *c /= n);
        let side = bounding_box(cloud, 0.0).map(|b| b.largest_side()).unwrap_or(0.0);
        let scale = if side > 0.0 { 2.0 / side } else { 1.0 };
        Self { center, scale }
    }

    pub fn forward(&self, p: &[f64]) -> Vec<f64> {
        p.iter().zip(&self.center).map(|(v, c)| (v - c) * self.scale).collect()
    }

    pub fn inverse(&self, p: &[f64]) -> Vec<f64> {
        p.iter().zip(&self.center).map(|(v, c)| v / self.scale + c).collect()
    }
}
