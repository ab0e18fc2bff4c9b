use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{adam_step, loss_eval, AdamState, LossParams, LossReport, SamplerD, DEFAULT_BOX_MARGIN};
use crate::error::{invalid, Result};
use crate::geometry::{PointCloud, DEFAULT_K};
use crate::network::{Network, NetworkSpec};

/// Fixed-budget training schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schedule {
    pub iters: usize,
    /// Surface points per iteration; the same number is drawn from 𝒟.
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    /// Radius of the geometric initialization.
    pub init_radius: f64,
    /// Neighbor rank for 𝒟's Gaussian sigmas.
    pub knn_k: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            iters: 5000,
            batch_size: 512,
            lr: 1e-3,
            seed: 0,
            init_radius: 1.0,
            knn_k: DEFAULT_K,
        }
    }
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return invalid("batch size must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return invalid(format!("learning rate must be positive, got {}", self.lr));
        }
        if !(self.init_radius > 0.0 && self.init_radius.is_finite()) {
            return invalid("init radius must be positive");
        }
        if self.knn_k == 0 {
            return invalid("knn_k must be positive");
        }
        Ok(())
    }
}

/// Surface points (and normals) for one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceBatch {
    pub points: Vec<f64>,
    pub normals: Option<Vec<f64>>,
}

impl SurfaceBatch {
    /// `n` points drawn uniformly with replacement from `cloud`.
    pub fn draw(cloud: &PointCloud, n: usize, rng: &mut impl Rng) -> Self {
        let d = cloud.dim();
        let mut points = Vec::with_capacity(n * d);
        let mut normals = cloud.normals().map(|_| Vec::with_capacity(n * d));
        for _ in 0..n {
            let i = rng.random_range(0..cloud.len());
            points.extend_from_slice(cloud.point(i));
            if let (Some(out), Some(nr)) = (normals.as_mut(), cloud.normal(i)) {
                out.extend_from_slice(nr);
            }
        }
        Self { points, normals }
    }
}

/// Trains a geometrically initialized network on one point cloud. Returns
/// the network and the per-iteration loss trace.
pub fn train_single_shape(
    cloud: &PointCloud,
    spec: &NetworkSpec,
    params: &LossParams,
    schedule: &Schedule,
) -> Result<(Network, Vec<LossReport>)> {
    schedule.validate()?;
    params.validate()?;
    if spec.input_dim != cloud.dim() || spec.latent_dim != 0 {
        return invalid(format!(
            "single-shape training needs a {}-D network without latent input",
            cloud.dim()
        ));
    }
    if params.tau == 1.0 && !cloud.has_normals() {
        return invalid("tau = 1 requires a cloud with normals");
    }
    let net = Network::geometric_init(spec.clone(), schedule.init_radius, schedule.seed)?;
    let mut sampler = SamplerD::new(cloud, schedule.knn_k, DEFAULT_BOX_MARGIN, rng_stream(schedule.seed, 1))?;
    train_with_source(
        net,
        &mut sampler,
        |rng, n| SurfaceBatch::draw(cloud, n, rng),
        params,
        schedule,
    )
}

/// The training loop with a caller-supplied surface source, e.g. fresh
/// samples of an analytic shape every iteration.
pub fn train_with_source(
    mut net: Network,
    sampler: &mut SamplerD,
    mut source: impl FnMut(&mut ChaCha8Rng, usize) -> SurfaceBatch,
    params: &LossParams,
    schedule: &Schedule,
) -> Result<(Network, Vec<LossReport>)> {
    schedule.validate()?;
    let mut rng = rng_stream(schedule.seed, 0);
    let mut adam = AdamState::for_network(&net, schedule.lr);
    let mut trace = Vec::with_capacity(schedule.iters);
    for _ in 0..schedule.iters {
        let batch = source(&mut rng, schedule.batch_size);
        let global = sampler.sample(schedule.batch_size);
        let (report, grad) = loss_eval(&net, None, &batch.points, batch.normals.as_deref(), &global, params)?;
        adam_step(&mut adam, &mut net, &grad)?;
        trace.push(report);
    }
    Ok((net, trace))
}

/// Independent ChaCha8 stream `id` under `seed`.
pub fn rng_stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}
