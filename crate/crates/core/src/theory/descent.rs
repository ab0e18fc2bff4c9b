use serde::Serialize;

use super::{critical_points, dot, linear_loss_grad_hess, CriticalKind, LinearProblem};
use crate::error::{invalid, Result};

/// Iterates with `‖q‖` above this are reported as diverged.
pub const DIVERGENCE_NORM: f64 = 1e3;

/// Smoothness bound `2λ_d + 12λ·max(1, ‖q0‖²)` used to vet step sizes.
pub fn lipschitz_bound(prob: &LinearProblem, q0: &[f64]) -> f64 {
    let top = prob.eigvals.last().copied().unwrap_or(0.0);
    2.0 * top + 12.0 * prob.lambda * dot(q0, q0).max(1.0)
}

/// `0.5 / L`.
pub fn default_alpha(prob: &LinearProblem, q0: &[f64]) -> f64 {
    0.5 / lipschitz_bound(prob, q0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DescentStatus {
    Converged,
    MaxIters,
    Diverged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Descent {
    /// `q⁰ … qᵏ`, starting point included.
    pub trajectory: Vec<Vec<f64>>,
    /// `ℓ(qᵏ)` for every iterate.
    pub losses: Vec<f64>,
    pub status: DescentStatus,
    /// The critical point matched within `10·tol` of the last iterate.
    pub terminal: Option<CriticalKind>,
    /// `alpha < 1/L` held for this start.
    pub alpha_ok: bool,
    /// `ℓ(qᵏ⁺¹) ≤ ℓ(qᵏ) + 1e-12` held at every step.
    pub monotone: bool,
}

impl Descent {
    pub fn iterations(&self) -> usize {
        self.trajectory.len() - 1
    }

    pub fn last(&self) -> &[f64] {
        self.trajectory.last().expect("trajectory starts at q0")
    }

    pub fn final_loss(&self) -> f64 {
        *self.losses.last().expect("trajectory starts at q0")
    }

    /// `global-min`, `strict-saddle-or-max`, `origin`, `diverged` or
    /// `unmatched`.
    pub fn label(&self) -> &'static str {
        match (self.status, self.terminal) {
            (DescentStatus::Diverged, _) => "diverged",
            (_, Some(kind)) => kind.label(),
            (_, None) => "unmatched",
        }
    }
}

/// Runs `qᵏ⁺¹ = qᵏ − α∇ℓ(qᵏ)` until `‖∇ℓ‖ < tol`, `max_iters` steps, or
/// divergence.
pub fn gradient_descent(prob: &LinearProblem, q0: &[f64], alpha: f64, max_iters: usize, tol: f64) -> Result<Descent> {
    if q0.len() != prob.dim() || q0.iter().any(|v| !v.is_finite()) {
        return invalid(format!("q0 must be a finite {}-vector", prob.dim()));
    }
    if !(alpha > 0.0 && alpha.is_finite()) || !(tol > 0.0) {
        return invalid("alpha and tol must be positive");
    }
    let alpha_ok = alpha < 1.0 / lipschitz_bound(prob, q0);
    let mut q = q0.to_vec();
    let (mut value, mut grad, _) = linear_loss_grad_hess(&q, prob);
    let mut trajectory = vec![q.clone()];
    let mut losses = vec![value];
    let mut monotone = true;
    let status = loop {
        if dot(&grad, &grad).sqrt() < tol {
            break DescentStatus::Converged;
        }
        if trajectory.len() > max_iters {
            break DescentStatus::MaxIters;
        }
        for (qi, gi) in q.iter_mut().zip(&grad) {
            *qi -= alpha * gi;
        }
        let (next, g, _) = linear_loss_grad_hess(&q, prob);
        monotone &= next <= value + 1e-12;
        value = next;
        grad = g;
        trajectory.push(q.clone());
        losses.push(value);
        if !(dot(&q, &q).sqrt() <= DIVERGENCE_NORM) {
            break DescentStatus::Diverged;
        }
    };
    let terminal = match status {
        DescentStatus::Diverged => None,
        _ => critical_points(prob).nearest(&q, 10.0 * tol).map(|c| c.kind),
    };
    Ok(Descent {
        trajectory,
        losses,
        status,
        terminal,
        alpha_ok,
        monotone,
    })
}

/// `h(q)` and the derivative of `h` along the flow `−∇ℓ`, by closed form
/// and by direct chain rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LiapunovSample {
    pub h: f64,
    pub dhdt_closed: f64,
    pub dhdt_chain: f64,
}

/// Evaluates `h(q) = ‖q−v‖²/(1+‖q‖²)` on samples in `Ω = {vᵀq > 0}`. The
/// closed form holds for planar data (`λ₁ = 0`) with `v = ±e₁`.
pub fn liapunov_check(prob: &LinearProblem, v: &[f64], samples: &[Vec<f64>]) -> Result<Vec<LiapunovSample>> {
    let d = prob.dim();
    let scale = prob.eigvals.last().copied().unwrap_or(0.0).max(1.0);
    if prob.eigvals[0] > 1e-12 * scale {
        return invalid(format!("the certificate needs lambda_1 = 0, got {}", prob.eigvals[0]));
    }
    let on_axis = v.len() == d && (v[0].abs() - 1.0).abs() <= 1e-12 && v[1..].iter().all(|c| c.abs() <= 1e-12);
    if !on_axis {
        return invalid("v must be a global minimum, +e1 or -e1");
    }
    samples
        .iter()
        .enumerate()
        .map(|(i, q)| {
            if q.len() != d || q.iter().any(|c| !c.is_finite()) {
                return invalid(format!("sample {i} must be a finite {d}-vector"));
            }
            let c = dot(v, q);
            if !(c > 0.0) {
                return invalid(format!("sample {i} lies outside the half-space v.q > 0"));
            }
            let s = dot(q, q);
            let diff: Vec<f64> = q.iter().zip(v).map(|(a, b)| a - b).collect();
            let r2 = dot(&diff, &diff);
            let h = r2 / (1.0 + s);
            let (value, grad, _) = linear_loss_grad_hess(q, prob);
            let dhdt_closed = -8.0 * c * value / ((1.0 + s) * (1.0 + s));
            let dhdt_chain: f64 = (0..d)
                .map(|k| {
                    let gh = (2.0 * diff[k] * (1.0 + s) - 2.0 * q[k] * r2) / ((1.0 + s) * (1.0 + s));
                    -gh * grad[k]
                })
                .sum();
            Ok(LiapunovSample {
                h,
                dhdt_closed,
                dhdt_chain,
            })
        })
        .collect()
}
