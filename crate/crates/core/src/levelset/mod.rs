//! Dense grid evaluation, iso-contour and iso-surface extraction, and the
//! signed-distance relative-error probe.

mod export;
mod marching;
mod probe;
mod tables;

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::geometry::Aabb;
use crate::network::Network;

pub use export::{write_contour_csv, write_contour_svg, write_obj};
pub use marching::{marching_cubes, marching_squares, Mesh, Polyline2D};
pub use probe::{sdf_relative_error, ErrorStats, DEFAULT_EXCLUSION_BAND};

/// Default grid resolution per axis.
pub const DEFAULT_RESOLUTION: usize = 64;
/// Largest resolution accepted by [`GridSpec::new`].
pub const MAX_RESOLUTION: usize = 512;

/// Nodes per parallel evaluation chunk.
const EVAL_CHUNK: usize = 4096;

/// A regular lattice of `resolution^d` nodes spanning a box, corners included.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub bbox: Aabb,
    pub resolution: usize,
}

impl GridSpec {
    pub fn new(bbox: Aabb, resolution: usize) -> Result<Self> {
        if !(2..=MAX_RESOLUTION).contains(&resolution) {
            return invalid(format!("resolution must be in 2..={MAX_RESOLUTION}, got {resolution}"));
        }
        if bbox.is_degenerate() {
            return invalid("grid box must have positive extent on every axis");
        }
        Ok(Self { bbox, resolution })
    }

    pub fn dim(&self) -> usize {
        self.bbox.dim()
    }

    pub fn node_count(&self) -> usize {
        self.resolution.pow(self.dim() as u32)
    }

    /// Lattice spacing along `axis`.
    pub fn spacing(&self, axis: usize) -> f64 {
        self.bbox.side(axis) / (self.resolution - 1) as f64
    }

    /// Largest per-axis spacing.
    pub fn cell_size(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).fold(0.0, f64::max)
    }

    pub fn cell_diagonal(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a).powi(2)).sum::<f64>().sqrt()
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        let (lo, hi) = (self.bbox.min[axis], self.bbox.max[axis]);
        if i + 1 == self.resolution {
            hi
        } else {
            lo + (hi - lo) * i as f64 / (self.resolution - 1) as f64
        }
    }

    /// Row-major flat index; axis 0 varies slowest.
    pub fn index(&self, ijk: &[usize]) -> usize {
        ijk.iter().fold(0, |acc, &i| acc * self.resolution + i)
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            out[a] = flat % self.resolution;
            flat /= self.resolution;
        }
        out
    }

    pub fn node(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .enumerate()
            .map(|(a, &i)| self.coord(a, i))
            .collect()
    }
}

/// Scalar values at every node of a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.node_count() {
            return invalid(format!("expected {} values, got {}", spec.node_count(), values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return invalid("grid values must be finite");
        }
        Ok(Self { spec, values })
    }

    /// Samples a closure at every node.
    pub fn from_fn(spec: GridSpec, f: impl Fn(&[f64]) -> f64 + Sync) -> Result<Self> {
        let values = (0..spec.node_count())
            .into_par_iter()
            .map(|i| f(&spec.node(i)))
            .collect();
        Self::new(spec, values)
    }

    pub fn value(&self, ijk: &[usize]) -> f64 {
        self.values[self.spec.index(ijk)]
    }

    /// Index of the smallest value.
    pub fn argmin(&self) -> usize {
        (0..self.values.len())
            .min_by(|&a, &b| self.values[a].total_cmp(&self.values[b]))
            .unwrap_or(0)
    }

    /// The same field with `c` subtracted from every value.
    pub fn shifted(&self, c: f64) -> Self {
        Self {
            spec: self.spec.clone(),
            values: self.values.iter().map(|v| v - c).collect(),
        }
    }
}

/// Evaluates the network at every grid node.
pub fn evaluate_grid(net: &Network, latent: Option<&[f64]>, spec: &GridSpec) -> Result<GridField> {
    if spec.dim() != net.spec().input_dim {
        return invalid(format!(
            "grid is {}-D, network expects {}-D input",
            spec.dim(),
            net.spec().input_dim
        ));
    }
    let total = spec.node_count();
    let chunks: Vec<Result<Vec<f64>>> = (0..total)
        .step_by(EVAL_CHUNK)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|start| {
            let end = (start + EVAL_CHUNK).min(total);
            let pts: Vec<f64> = (start..end).flat_map(|i| spec.node(i)).collect();
            net.eval(&pts, latent)
        })
        .collect();
    let mut values = Vec::with_capacity(total);
    for c in chunks {
        values.extend(c?);
    }
    GridField::new(spec.clone(), values)
}
