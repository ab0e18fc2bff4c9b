use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::{Layer, Network, NetworkSpec};
use crate::error::{invalid, Result};

/// Std of the noise on the final layer's constant weights.
pub const FINAL_WEIGHT_NOISE: f64 = 1e-5;

/// Sphere samples used to calibrate the final-layer gain.
pub const CALIBRATION_SAMPLES: usize = 4096;

impl Network {
    /// Geometric initialization: `f(x) ≈ ‖x‖ − radius` at θ₀.
    ///
    /// Hidden weights are `N(0, 2 / fan_out)` with zero biases; the final
    /// layer has weights `√π / √fan_in` (plus tiny noise) and bias `−radius`.
    /// Finite-width nets drift from that target by up to a few tenths, so
    /// the final weights are then rescaled so that the mean of `f` over
    /// [`CALIBRATION_SAMPLES`] points on the radius sphere (latent zero) is 0.
    pub fn geometric_init(spec: NetworkSpec, radius: f64, seed: u64) -> Result<Self> {
        spec.validate()?;
        if !(radius > 0.0 && radius.is_finite()) {
            return invalid(format!("init radius must be positive, got {radius}"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shapes = spec.layer_shapes();
        let last = shapes.len() - 1;
        let layers = shapes
            .iter()
            .enumerate()
            .map(|(i, &(fan_out, fan_in))| {
                if i == last {
                    let mean = std::f64::consts::PI.sqrt() / (fan_in as f64).sqrt();
                    let noise = Normal::new(0.0, FINAL_WEIGHT_NOISE).unwrap();
                    Layer {
                        weight: Array2::from_shape_fn((fan_out, fan_in), |_| mean + noise.sample(&mut rng)),
                        bias: Array1::from_elem(fan_out, -radius),
                    }
                } else {
                    let normal = Normal::new(0.0, (2.0 / fan_out as f64).sqrt()).unwrap();
                    Layer {
                        weight: Array2::from_shape_fn((fan_out, fan_in), |_| normal.sample(&mut rng)),
                        bias: Array1::zeros(fan_out),
                    }
                }
            })
            .collect();
        let mut net = Network::from_layers(spec, layers)?;
        net.calibrate_gain(radius, &mut rng)?;
        Ok(net)
    }

    fn calibrate_gain(&mut self, radius: f64, rng: &mut ChaCha8Rng) -> Result<()> {
        let d = self.spec.input_dim;
        let mut points = Vec::with_capacity(CALIBRATION_SAMPLES * d);
        for _ in 0..CALIBRATION_SAMPLES {
            let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            points.extend(v.iter().map(|c| radius * c / norm));
        }
        let latent = vec![0.0; self.spec.latent_dim];
        let latent = (!latent.is_empty()).then_some(latent.as_slice());
        let values = self.eval(&points, latent)?;
        let bias = self.layers.last().unwrap().bias[0];
        let gain = values.iter().map(|f| f - bias).sum::<f64>() / values.len() as f64;
        if gain > 0.0 && gain.is_finite() {
            let last = self.layers.last_mut().unwrap();
            last.weight.mapv_inplace(|w| w * radius / gain);
        }
        Ok(())
    }
}
