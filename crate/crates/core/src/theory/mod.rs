//! The linear model `f(x) = wᵀx` under the Eikonal loss: spectral change of
//! coordinates, closed-form critical points, gradient descent and the
//! Liapunov certificate. Locations `q` live in eigen-coordinates `q = Uᵀw`.

mod descent;
mod eigen;
mod planar;

use serde::Serialize;

use crate::error::{invalid, Result};

pub use descent::{
    default_alpha, gradient_descent, liapunov_check, lipschitz_bound, Descent, DescentStatus, LiapunovSample,
    DIVERGENCE_NORM,
};
pub use eigen::{symmetric_eigen, SymEigen, JACOBI_TOL};
pub use planar::{perturbation_sweep, PlanarSample, SweepRow};

/// Hessian eigenvalues above this count as nonnegative.
pub const HESSIAN_TOL: f64 = 1e-10;
/// Relative gap below which two eigenvalues are treated as equal.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// Points `xᵢ`, the Eikonal weight `λ`, and the spectral decomposition
/// `Σ xᵢxᵢᵀ = U diag(eigvals) Uᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProblem {
    pub points: Vec<Vec<f64>>,
    pub lambda: f64,
    pub eigvals: Vec<f64>,
    /// Columns of `U`: `eigvecs[j]` is `uⱼ`.
    pub eigvecs: Vec<Vec<f64>>,
}

/// Builds the problem for `points`. Eigenvalues ascend and are clamped at
/// zero; ties keep the sign convention of [`symmetric_eigen`].
pub fn diagonalize(points: &[Vec<f64>], lambda: f64) -> Result<LinearProblem> {
    let d = points.first().map_or(0, Vec::len);
    if d < 2 {
        return invalid("need at least one point of dimension >= 2");
    }
    if points.iter().any(|p| p.len() != d || p.iter().any(|v| !v.is_finite())) {
        return invalid("points must be finite and share one dimension");
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return invalid(format!("lambda must be positive, got {lambda}"));
    }
    let mut m = vec![vec![0.0; d]; d];
    for p in points {
        for i in 0..d {
            for j in 0..d {
                m[i][j] += p[i] * p[j];
            }
        }
    }
    let eig = symmetric_eigen(&m);
    Ok(LinearProblem {
        points: points.to_vec(),
        lambda,
        eigvals: eig.values.into_iter().map(|v| v.max(0.0)).collect(),
        eigvecs: eig.vectors,
    })
}

impl LinearProblem {
    /// The problem whose moment matrix is `diag(eigvals)`, realized by the
    /// points `√λⱼ eⱼ`. Eigenvalues must be nonnegative and ascending.
    pub fn from_diagonal(eigvals: &[f64], lambda: f64) -> Result<Self> {
        if eigvals.len() < 2 {
            return invalid("need dimension >= 2");
        }
        if eigvals.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return invalid("eigenvalues must be finite and nonnegative");
        }
        if eigvals.windows(2).any(|w| w[0] > w[1]) {
            return invalid("eigenvalues must ascend");
        }
        let d = eigvals.len();
        let points: Vec<Vec<f64>> = (0..d)
            .map(|j| (0..d).map(|i| if i == j { eigvals[j].sqrt() } else { 0.0 }).collect())
            .collect();
        let mut prob = diagonalize(&points, lambda)?;
        prob.eigvals = eigvals.to_vec();
        Ok(prob)
    }

    pub fn dim(&self) -> usize {
        self.eigvals.len()
    }

    /// `q = Uᵀw`.
    pub fn to_spectral(&self, w: &[f64]) -> Vec<f64> {
        self.eigvecs.iter().map(|u| dot(u, w)).collect()
    }

    /// `w = Uq`.
    pub fn from_spectral(&self, q: &[f64]) -> Vec<f64> {
        let mut w = vec![0.0; self.dim()];
        for (u, qj) in self.eigvecs.iter().zip(q) {
            for (wi, ui) in w.iter_mut().zip(u) {
                *wi += qj * ui;
            }
        }
        w
    }

    /// `Σ(wᵀxᵢ)² + λ(‖w‖²−1)²` in original coordinates.
    pub fn loss_original(&self, w: &[f64]) -> f64 {
        let data: f64 = self.points.iter().map(|x| dot(w, x).powi(2)).sum();
        data + self.lambda * (dot(w, w) - 1.0).powi(2)
    }

    /// True when some adjacent pair of eigenvalues coincides.
    pub fn is_degenerate(&self) -> bool {
        let scale = self.eigvals.last().copied().unwrap_or(0.0).max(1.0);
        self.eigvals.windows(2).any(|w| w[1] - w[0] <= DEGENERACY_TOL * scale)
    }

    /// Whether `λ > λ₁/2`, the regime where `±q₁` are the global minima.
    pub fn has_global_pair(&self) -> bool {
        self.lambda > self.eigvals[0] / 2.0
    }

    /// The loss at `±q₁`, `λ₁ − λ₁²/(4λ)`.
    pub fn global_min_value(&self) -> f64 {
        let l1 = self.eigvals[0];
        l1 - l1 * l1 / (4.0 * self.lambda)
    }

    /// `±q₁ = ±√(1−λ₁/2λ) e₁`, positive sign.
    pub fn global_min(&self) -> Option<Vec<f64>> {
        axis_point(self, 0)
    }
}

fn axis_point(prob: &LinearProblem, j: usize) -> Option<Vec<f64>> {
    let s = 1.0 - prob.eigvals[j] / (2.0 * prob.lambda);
    (s > 0.0).then(|| {
        let mut q = vec![0.0; prob.dim()];
        q[j] = s.sqrt();
        q
    })
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Value, gradient and Hessian of `ℓ(q) = qᵀDq + λ(‖q‖²−1)²`.
pub fn linear_loss_grad_hess(q: &[f64], prob: &LinearProblem) -> (f64, Vec<f64>, Vec<Vec<f64>>) {
    let lam = prob.lambda;
    let s = dot(q, q);
    let value = q.iter().zip(&prob.eigvals).map(|(qj, dj)| dj * qj * qj).sum::<f64>() + lam * (s - 1.0) * (s - 1.0);
    let grad = q
        .iter()
        .zip(&prob.eigvals)
        .map(|(qj, dj)| 2.0 * (dj + 2.0 * lam * (s - 1.0)) * qj)
        .collect();
    let d = q.len();
    let hess = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    let diag = if i == j {
                        2.0 * prob.eigvals[i] + 4.0 * lam * (s - 1.0)
                    } else {
                        0.0
                    };
                    diag + 8.0 * lam * q[i] * q[j]
                })
                .collect()
        })
        .collect();
    (value, grad, hess)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriticalKind {
    GlobalMin,
    StrictSaddleOrMax,
    Origin,
}

impl CriticalKind {
    pub fn label(self) -> &'static str {
        match self {
            CriticalKind::GlobalMin => "global-min",
            CriticalKind::StrictSaddleOrMax => "strict-saddle-or-max",
            CriticalKind::Origin => "origin",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalPoint {
    pub location: Vec<f64>,
    pub kind: CriticalKind,
    /// Ascending.
    pub hessian_eigs: Vec<f64>,
    pub value: f64,
}

/// All critical points of a problem, with the flags raised while
/// enumerating them.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalSet {
    pub points: Vec<CriticalPoint>,
    /// Repeated eigenvalues: the axis points depend on the chosen `U`.
    pub degenerate: bool,
    /// Set when `λ ≤ λ₁/2`, where the origin is the only critical point.
    pub warning: Option<String>,
}

impl CriticalSet {
    pub fn global_minima(&self) -> impl Iterator<Item = &CriticalPoint> {
        self.points.iter().filter(|c| c.kind == CriticalKind::GlobalMin)
    }

    /// The critical point nearest `q`, if one lies within `radius`.
    pub fn nearest(&self, q: &[f64], radius: f64) -> Option<&CriticalPoint> {
        self.points
            .iter()
            .map(|c| (c, distance(&c.location, q)))
            .filter(|(_, dist)| *dist <= radius)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(c, _)| c)
    }
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// The origin and `±√(1−λⱼ/2λ) eⱼ` for every `j` with `λⱼ < 2λ`, each
/// classified by the signs of its Hessian eigenvalues.
pub fn critical_points(prob: &LinearProblem) -> CriticalSet {
    let classify = |location: Vec<f64>, origin: bool| {
        let (value, _, hess) = linear_loss_grad_hess(&location, prob);
        let hessian_eigs = symmetric_eigen(&hess).values;
        let kind = if hessian_eigs.iter().all(|&e| e >= -HESSIAN_TOL) {
            CriticalKind::GlobalMin
        } else if origin {
            CriticalKind::Origin
        } else {
            CriticalKind::StrictSaddleOrMax
        };
        CriticalPoint {
            location,
            kind,
            hessian_eigs,
            value,
        }
    };
    let mut points = vec![classify(vec![0.0; prob.dim()], true)];
    for j in 0..prob.dim() {
        if let Some(q) = axis_point(prob, j) {
            let neg: Vec<f64> = q.iter().map(|v| -v).collect();
            points.push(classify(q, false));
            points.push(classify(neg, false));
        }
    }
    let warning = (!prob.has_global_pair()).then(|| {
        format!(
            "lambda = {} is at most lambda_1/2 = {}; the origin is the only critical point",
            prob.lambda,
            prob.eigvals[0] / 2.0
        )
    });
    CriticalSet {
        points,
        degenerate: prob.is_degenerate(),
        warning,
    }
}
