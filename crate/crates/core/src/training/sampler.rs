use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::geometry::{bounding_box, kth_nn_distance, Aabb, PointCloud};

/// Margin of 𝒟's uniform box, as a fraction of each side of the tight box.
pub const DEFAULT_BOX_MARGIN: f64 = 0.2;

/// The global sampling distribution 𝒟: an even mixture of a uniform draw in
/// a box and Gaussians centered at the source points.
#[derive(Debug, Clone)]
pub struct SamplerD {
    dim: usize,
    centers: Vec<f64>,
    sigmas: Vec<f64>,
    bbox: Aabb,
    rng: ChaCha8Rng,
}

impl SamplerD {
    /// Sigmas are distances to the `k`-th nearest neighbor (clamped to
    /// `n − 1`), the box is the cloud's bounding box with `margin`.
    pub fn new(cloud: &PointCloud, k: usize, margin: f64, rng: ChaCha8Rng) -> Result<Self> {
        if cloud.len() < 2 {
            return invalid("k-th nearest neighbor sigmas need at least 2 points");
        }
        let mut sigmas = kth_nn_distance(cloud, k.clamp(1, cloud.len() - 1))?;
        let floor = sigmas
            .iter()
            .copied()
            .filter(|s| *s > 0.0)
            .fold(f64::INFINITY, f64::min);
        if !floor.is_finite() {
            return invalid("all points coincide, k-th neighbor distances are zero");
        }
        sigmas.iter_mut().filter(|s| **s <= 0.0).for_each(|s| *s = floor);
        Self::with_sigmas(cloud, sigmas, bounding_box(cloud, margin)?, rng)
    }

    pub fn with_sigmas(cloud: &PointCloud, sigmas: Vec<f64>, bbox: Aabb, rng: ChaCha8Rng) -> Result<Self> {
        if sigmas.len() != cloud.len() {
            return invalid(format!("{} sigmas for {} points", sigmas.len(), cloud.len()));
        }
        if sigmas.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return invalid("sigmas must be positive and finite");
        }
        if bbox.dim() != cloud.dim() || !cloud.iter().all(|p| bbox.contains(p)) {
            return invalid("sampling box must contain every source point");
        }
        Ok(Self {
            dim: cloud.dim(),
            centers: cloud.points().to_vec(),
            sigmas,
            bbox,
            rng,
        })
    }

    pub fn seeded(cloud: &PointCloud, k: usize, margin: f64, seed: u64) -> Result<Self> {
        Self::new(cloud, k, margin, ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn bbox(&self) -> &Aabb {
        &self.bbox
    }

    /// `⌈n/2⌉` uniform and `⌊n/2⌋` Gaussian samples in shuffled order.
    pub fn sample(&mut self, n: usize) -> Vec<f64> {
        let d = self.dim;
        let (mut rows, gaussian) = self.sample_parts(n);
        rows.extend(gaussian);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut self.rng);
        order
            .iter()
            .flat_map(|&i| rows[i * d..(i + 1) * d].iter().copied())
            .collect()
    }

    pub(crate) fn sample_parts(&mut self, n: usize) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim;
        let n_uniform = n.div_ceil(2);
        let mut uniform = Vec::with_capacity(n_uniform * d);
        for _ in 0..n_uniform {
            for a in 0..d {
                let (lo, hi) = (self.bbox.min[a], self.bbox.max[a]);
                uniform.push(lo + (hi - lo) * self.rng.random::<f64>());
            }
        }
        let mut gaussian = Vec::with_capacity((n - n_uniform) * d);
        for _ in n_uniform..n {
            let j = self.rng.random_range(0..self.sigmas.len());
            let sigma = self.sigmas[j];
            for a in 0..d {
                let e: f64 = self.rng.sample(StandardNormal);
                gaussian.push(self.centers[j * d + a] + sigma * e);
            }
        }
        (uniform, gaussian)
    }
}
