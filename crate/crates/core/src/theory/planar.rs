use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::{diagonalize, distance, dot};
use crate::error::{invalid, Result};

/// Points `xᵢ = yᵢ + ε·δᵢ` near the hyperplane through the origin with unit
/// normal `n`. The in-plane points `yᵢ` and the deviation directions
/// `‖δᵢ‖ ≤ 1` are fixed, so one sample can be swept over `ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarSample {
    pub normal: Vec<f64>,
    pub in_plane: Vec<Vec<f64>>,
    pub deviations: Vec<Vec<f64>>,
}

impl PlanarSample {
    /// `n` in-plane points drawn uniformly from `[-1,1]^d` and projected,
    /// with deviations of uniform direction and radius in `[0, 1]`.
    pub fn random(n: usize, d: usize, seed: u64) -> Result<Self> {
        if n == 0 || d < 2 {
            return invalid("need at least one point and d >= 2");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = unit_gaussian(d, &mut rng);
        let in_plane = (0..n)
            .map(|_| {
                let p: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                let t = dot(&p, &normal);
                p.iter().zip(&normal).map(|(a, b)| a - t * b).collect()
            })
            .collect();
        let deviations = (0..n)
            .map(|_| {
                let r: f64 = rng.random();
                unit_gaussian(d, &mut rng).into_iter().map(|c| r * c).collect()
            })
            .collect();
        Ok(Self {
            normal,
            in_plane,
            deviations,
        })
    }

    /// `yᵢ + ε·δᵢ`.
    pub fn points(&self, eps: f64) -> Vec<Vec<f64>> {
        self.in_plane
            .iter()
            .zip(&self.deviations)
            .map(|(y, e)| y.iter().zip(e).map(|(a, b)| a + eps * b).collect())
            .collect()
    }
}

fn unit_gaussian(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-6 {
            return v.into_iter().map(|c| c / norm).collect();
        }
    }
}

/// One row of an `ε` sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    pub lambda1: f64,
    /// `min ‖u₁ ∓ n‖`.
    pub u1_deviation: f64,
    /// `λ₁ / ε`.
    pub ratio: f64,
}

/// The smallest eigenvalue and the tilt of its eigenvector from the plane
/// normal, for each `ε`.
pub fn perturbation_sweep(sample: &PlanarSample, eps: &[f64], lambda: f64) -> Result<Vec<SweepRow>> {
    eps.iter()
        .map(|&e| {
            if !(e > 0.0 && e.is_finite()) {
                return invalid(format!("eps must be positive, got {e}"));
            }
            let prob = diagonalize(&sample.points(e), lambda)?;
            let u1 = &prob.eigvecs[0];
            let neg: Vec<f64> = sample.normal.iter().map(|c| -c).collect();
            let dev = distance(u1, &sample.normal).min(distance(u1, &neg));
            Ok(SweepRow {
                eps: e,
                lambda1: prob.eigvals[0],
                u1_deviation: dev,
                ratio: prob.eigvals[0] / e,
            })
        })
        .collect()
}
