use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::geometry::Aabb;
use crate::network::Network;

/// Samples with `|s(x)|` at or below this are excluded from the probe.
pub const DEFAULT_EXCLUSION_BAND: f64 = 0.1;

/// Mean and population standard deviation of the relative error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorStats {
    pub mean: f64,
    pub std: f64,
    /// Samples that passed the exclusion band.
    pub count: usize,
}

/// `|f(x) − s(x)| / |s(x)|` over `n` uniform draws in `bbox`, keeping only
/// those with `|s(x)| > exclusion_band`. Fails when fewer than `n/2` remain.
pub fn sdf_relative_error(
    net: &Network,
    latent: Option<&[f64]>,
    gt: impl Fn(&[f64]) -> f64,
    bbox: &Aabb,
    n: usize,
    seed: u64,
    exclusion_band: f64,
) -> Result<ErrorStats> {
    if n == 0 {
        return invalid("probe needs at least one sample");
    }
    if !(exclusion_band >= 0.0) {
        return invalid("exclusion band must be non-negative");
    }
    let d = bbox.dim();
    if d != net.spec().input_dim {
        return invalid("probe box dimension does not match the network");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n * d);
    let mut truth = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..d)
            .map(|a| bbox.min[a] + bbox.side(a) * rng.random::<f64>())
            .collect();
        let s = gt(&x);
        if s.abs() > exclusion_band {
            points.extend(x);
            truth.push(s);
        }
    }
    if 2 * truth.len() < n {
        return invalid(format!(
            "only {} of {n} probe samples lie outside the exclusion band",
            truth.len()
        ));
    }
    let f = net.eval(&points, latent)?;
    let errs: Vec<f64> = f.iter().zip(&truth).map(|(f, s)| (f - s).abs() / s.abs()).collect();
    let count = errs.len();
    let mean = errs.iter().sum::<f64>() / count as f64;
    let var = errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / count as f64;
    Ok(ErrorStats {
        mean,
        std: var.sqrt(),
        count,
    })
}
