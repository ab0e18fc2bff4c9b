//! The Eikonal-regularized loss, the sampling distribution 𝒟, Adam, and the
//! single-shape and auto-decoder training loops.

mod adam;
mod decoder;
mod loss;
mod sampler;
mod single;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub use adam::{adam_step, adam_step_vector, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use decoder::{
    average_latents, infer_latent, train_auto_decoder, AutoDecoderRun, AutoDecoderSchedule, InferSchedule, LatentTable,
};
pub use loss::{loss_eval, loss_report, LOSS_CHUNK};
pub use sampler::{SamplerD, DEFAULT_BOX_MARGIN};
pub use single::{rng_stream, train_single_shape, train_with_source, Schedule, SurfaceBatch};

/// Weights of the loss terms: `λ` (Eikonal), `τ` (normals), `α` (latent).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossParams {
    pub lambda: f64,
    pub tau: f64,
    pub latent_reg: f64,
}

impl Default for LossParams {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            tau: 1.0,
            latent_reg: 0.01,
        }
    }
}

impl LossParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return invalid(format!("lambda must be positive, got {}", self.lambda));
        }
        if self.tau != 0.0 && self.tau != 1.0 {
            return invalid(format!("tau must be 0 or 1, got {}", self.tau));
        }
        if !(self.latent_reg >= 0.0 && self.latent_reg.is_finite()) {
            return invalid(format!("latent_reg must be non-negative, got {}", self.latent_reg));
        }
        Ok(())
    }
}

/// Individual loss terms and their weighted total.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct LossReport {
    pub data_term: f64,
    pub normal_term: f64,
    pub eikonal_term: f64,
    pub latent_term: f64,
    pub total: f64,
}

impl LossReport {
    pub fn from_terms(params: &LossParams, data: f64, normal: f64, eikonal: f64, latent: f64) -> Self {
        Self {
            data_term: data,
            normal_term: normal,
            eikonal_term: eikonal,
            latent_term: latent,
            total: data + params.tau * normal + params.lambda * eikonal + params.latent_reg * latent,
        }
    }

    /// Component-wise mean of several reports.
    pub fn mean(reports: &[LossReport]) -> LossReport {
        let n = reports.len().max(1) as f64;
        let mut out = LossReport::default();
        for r in reports {
            out.data_term += r.data_term;
            out.normal_term += r.normal_term;
            out.eikonal_term += r.eikonal_term;
            out.latent_term += r.latent_term;
            out.total += r.total;
        }
        out.data_term /= n;
        out.normal_term /= n;
        out.eikonal_term /= n;
        out.latent_term /= n;
        out.total /= n;
        out
    }
}

pub const LOSS_TRACE_HEADER: &str = "iter,data,normal,eikonal,latent,total";

/// Writes a loss trace as CSV, one row per iteration.
pub fn write_loss_trace(mut out: impl Write, trace: &[LossReport]) -> Result<()> {
    writeln!(out, "{LOSS_TRACE_HEADER}")?;
    for (i, r) in trace.iter().enumerate() {
        writeln!(
            out,
            "{i},{},{},{},{},{}",
            r.data_term, r.normal_term, r.eikonal_term, r.latent_term, r.total
        )?;
    }
    Ok(())
}
