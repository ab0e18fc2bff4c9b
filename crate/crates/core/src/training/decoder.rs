use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::single::rng_stream;
use super::{
    adam_step, adam_step_vector, loss_eval, loss_report, AdamState, LossParams, LossReport, SamplerD, SurfaceBatch,
    DEFAULT_BOX_MARGIN,
};
use crate::error::{invalid, Error, Result};
use crate::geometry::{PointCloud, DEFAULT_K};
use crate::network::{Network, NetworkSpec, ParamGradient};

/// Multi-shape schedule. Learning rate is halved every
/// `lr_halving_interval` epochs (0 disables halving).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AutoDecoderSchedule {
    pub epochs: usize,
    pub shapes_per_batch: usize,
    pub points_per_shape: usize,
    pub lr: f64,
    pub lr_halving_interval: usize,
    pub seed: u64,
    pub init_radius: f64,
    pub knn_k: usize,
}

impl Default for AutoDecoderSchedule {
    fn default() -> Self {
        Self {
            epochs: 1000,
            shapes_per_batch: 5,
            points_per_shape: 256,
            lr: 1e-3,
            lr_halving_interval: 500,
            seed: 0,
            init_radius: 1.0,
            knn_k: DEFAULT_K,
        }
    }
}

impl AutoDecoderSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.shapes_per_batch == 0 || self.points_per_shape == 0 {
            return invalid("shapes_per_batch and points_per_shape must be positive");
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

    pub fn lr_at(&self, epoch: usize) -> f64 {
        match self.lr_halving_interval {
            0 => self.lr,
            k => self.lr * 0.5f64.powi((epoch / k) as i32),
        }
    }
}

/// Test-time latent optimization schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferSchedule {
    pub iters: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub knn_k: usize,
}

impl Default for InferSchedule {
    fn default() -> Self {
        Self {
            iters: 800,
            batch_size: 256,
            lr: 1e-2,
            seed: 0,
            knn_k: DEFAULT_K,
        }
    }
}

/// Per-shape latent codes, in shape order.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentTable {
    dim: usize,
    ids: Vec<String>,
    codes: Vec<Vec<f64>>,
}

impl LatentTable {
    /// All-zero codes for the given shape ids.
    pub fn zeros(dim: usize, ids: Vec<String>) -> Self {
        let codes = vec![vec![0.0; dim]; ids.len()];
        Self { dim, ids, codes }
    }

    pub fn new(dim: usize, ids: Vec<String>, codes: Vec<Vec<f64>>) -> Result<Self> {
        if ids.len() != codes.len() {
            return invalid("one latent code per shape id is required");
        }
        if codes.iter().any(|c| c.len() != dim) {
            return invalid(format!("every latent code must have length {dim}"));
        }
        Ok(Self { dim, ids, codes })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn code(&self, j: usize) -> &[f64] {
        &self.codes[j]
    }

    pub fn codes(&self) -> &[Vec<f64>] {
        &self.codes
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.ids.iter().position(|s| s == id).map(|j| self.codes[j].as_slice())
    }

    /// CSV with header `shape,z0,…`.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        let header: Vec<String> = (0..self.dim).map(|i| format!("z{i}")).collect();
        writeln!(out, "shape,{}", header.join(","))?;
        for (id, z) in self.ids.iter().zip(&self.codes) {
            let row: Vec<String> = z.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{id},{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv(input: impl BufRead) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let dim = match lines.next() {
            Some((_, header)) => header?.split(',').count().saturating_sub(1),
            None => {
                return Err(Error::Parse {
                    line: 1,
                    message: "empty latent table".into(),
                })
            }
        };
        let (mut ids, mut codes) = (Vec::new(), Vec::new());
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut cells = line.split(',');
            ids.push(cells.next().unwrap_or_default().to_string());
            let z = cells
                .map(|c| {
                    c.trim().parse::<f64>().map_err(|_| Error::Parse {
                        line: i + 1,
                        message: format!("bad latent value {c:?}"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            if z.len() != dim {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected {dim} values"),
                });
            }
            codes.push(z);
        }
        Self::new(dim, ids, codes)
    }
}

/// Output of [`train_auto_decoder`]. The trace holds one batch-mean report
/// per optimizer step.
#[derive(Debug, Clone)]
pub struct AutoDecoderRun {
    pub network: Network,
    pub latents: LatentTable,
    pub trace: Vec<LossReport>,
}

/// Jointly trains one network and one latent code per shape.
pub fn train_auto_decoder(
    clouds: &[PointCloud],
    ids: Vec<String>,
    spec: &NetworkSpec,
    params: &LossParams,
    schedule: &AutoDecoderSchedule,
) -> Result<AutoDecoderRun> {
    schedule.validate()?;
    params.validate()?;
    if clouds.len() < 2 {
        return invalid("auto-decoder training needs at least 2 shapes");
    }
    if ids.len() != clouds.len() {
        return invalid("one id per shape is required");
    }
    if spec.latent_dim == 0 {
        return invalid("auto-decoder training needs latent_dim >= 1");
    }
    for (id, c) in ids.iter().zip(clouds) {
        if c.dim() != spec.input_dim {
            return invalid(format!(
                "shape {id} has dimension {}, expected {}",
                c.dim(),
                spec.input_dim
            ));
        }
        if params.tau == 1.0 && !c.has_normals() {
            return invalid(format!("tau = 1 requires normals, shape {id} has none"));
        }
    }

    let mut net = Network::geometric_init(spec.clone(), schedule.init_radius, schedule.seed)?;
    let mut latents = LatentTable::zeros(spec.latent_dim, ids);
    let mut samplers = clouds
        .iter()
        .enumerate()
        .map(|(j, c)| {
            SamplerD::new(
                c,
                schedule.knn_k,
                DEFAULT_BOX_MARGIN,
                rng_stream(schedule.seed, 2 * j as u64 + 2),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut surface_rngs: Vec<_> = (0..clouds.len())
        .map(|j| rng_stream(schedule.seed, 2 * j as u64 + 3))
        .collect();
    let mut order_rng = rng_stream(schedule.seed, 0);
    let mut net_adam = AdamState::for_network(&net, schedule.lr);
    let mut latent_adams: Vec<_> = (0..clouds.len())
        .map(|_| AdamState::new(spec.latent_dim, schedule.lr))
        .collect();

    let n = schedule.points_per_shape;
    let mut trace = Vec::new();
    let mut order: Vec<usize> = (0..clouds.len()).collect();
    for epoch in 0..schedule.epochs {
        let lr = schedule.lr_at(epoch);
        net_adam.lr = lr;
        latent_adams.iter_mut().for_each(|a| a.lr = lr);
        order.shuffle(&mut order_rng);
        for batch in order.chunks(schedule.shapes_per_batch) {
            let draws: Vec<(SurfaceBatch, Vec<f64>)> = batch
                .iter()
                .map(|&j| {
                    let s = SurfaceBatch::draw(&clouds[j], n, &mut surface_rngs[j]);
                    (s, samplers[j].sample(n))
                })
                .collect();
            let results = batch
                .par_iter()
                .zip(draws.par_iter())
                .map(|(&j, (s, global))| {
                    loss_eval(
                        &net,
                        Some(latents.code(j)),
                        &s.points,
                        s.normals.as_deref(),
                        global,
                        params,
                    )
                })
                .collect::<Result<Vec<_>>>()?;

            let scale = 1.0 / batch.len() as f64;
            let mut grad = ParamGradient::zeros_like(&net);
            for (_, g) in &results {
                grad.add_scaled(g, scale);
            }
            adam_step(&mut net_adam, &mut net, &grad)?;
            for (&j, (_, g)) in batch.iter().zip(&results) {
                let gz: Vec<f64> = g
                    .latent
                    .as_ref()
                    .expect("latent gradient")
                    .iter()
                    .map(|v| v * scale)
                    .collect();
                let name = format!("latent {}", latents.ids[j]);
                adam_step_vector(&mut latent_adams[j], &mut latents.codes[j], &gz, &name)?;
            }
            let reports: Vec<LossReport> = results.iter().map(|(r, _)| *r).collect();
            trace.push(LossReport::mean(&reports));
        }
    }
    Ok(AutoDecoderRun {
        network: net,
        latents,
        trace,
    })
}

/// Fits a latent code to `cloud` with the network frozen, starting from
/// zero. The returned report is evaluated at the final code on a fresh batch.
pub fn infer_latent(
    net: &Network,
    cloud: &PointCloud,
    params: &LossParams,
    schedule: &InferSchedule,
) -> Result<(Vec<f64>, LossReport)> {
    params.validate()?;
    let l = net.spec().latent_dim;
    if l == 0 {
        return invalid("latent inference needs a network with latent input");
    }
    if cloud.dim() != net.spec().input_dim {
        return invalid("cloud dimension does not match the network");
    }
    if schedule.batch_size == 0 || !(schedule.lr > 0.0 && schedule.lr.is_finite()) {
        return invalid("batch size and learning rate must be positive");
    }
    let mut sampler = SamplerD::new(cloud, schedule.knn_k, DEFAULT_BOX_MARGIN, rng_stream(schedule.seed, 1))?;
    let mut rng = rng_stream(schedule.seed, 0);
    let mut z = vec![0.0; l];
    let mut adam = AdamState::new(l, schedule.lr);
    let n = schedule.batch_size;
    for _ in 0..schedule.iters {
        let s = SurfaceBatch::draw(cloud, n, &mut rng);
        let global = sampler.sample(n);
        let (_, g) = loss_eval(net, Some(&z), &s.points, s.normals.as_deref(), &global, params)?;
        adam_step_vector(&mut adam, &mut z, g.latent.as_ref().expect("latent gradient"), "latent")?;
    }
    let s = SurfaceBatch::draw(cloud, n, &mut rng);
    let global = sampler.sample(n);
    let report = loss_report(net, Some(&z), &s.points, s.normals.as_deref(), &global, params)?;
    Ok((z, report))
}

/// Convex combination `Σ wᵢ zᵢ`.
pub fn average_latents(latents: &[&[f64]], weights: &[f64]) -> Result<Vec<f64>> {
    if latents.is_empty() || latents.len() != weights.len() {
        return invalid("need one weight per latent and at least one latent");
    }
    let l = latents[0].len();
    if latents.iter().any(|z| z.len() != l) {
        return invalid("latents differ in length");
    }
    if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
        return invalid("weights must be non-negative");
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return invalid(format!("weights sum to {sum}, expected 1"));
    }
    let mut out = vec![0.0; l];
    for (z, w) in latents.iter().zip(weights) {
        for (o, v) in out.iter_mut().zip(z.iter()) {
            *o += w * v;
        }
    }
    Ok(out)
}
