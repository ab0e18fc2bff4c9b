use ndarray::{s, Array2, Axis};
use std::f64::consts::FRAC_1_SQRT_2;

use super::{Layer, Network, ParamGradient, Tape};
use crate::error::{invalid, Result};

/// Per-sample weights on `f` and on each coordinate of `∇ₓf`.
#[derive(Debug, Clone, PartialEq)]
pub struct Upstream {
    pub value: Vec<f64>,
    /// Row-major `batch × input_dim`; `None` means all zero.
    pub gradient: Option<Vec<f64>>,
}

impl Upstream {
    pub fn value_only(value: Vec<f64>) -> Self {
        Self { value, gradient: None }
    }

    pub fn new(value: Vec<f64>, gradient: Vec<f64>) -> Self {
        Self {
            value,
            gradient: Some(gradient),
        }
    }
}

impl Network {
    /// Reverse-mode pass over a recorded tape.
    ///
    /// Differentiates through both the value path and the tangent path of
    /// the forward pass, so the tangent adjoints pick up the `σ''` term.
    pub fn backward_tape(&self, tape: &Tape, upstream: &Upstream) -> Result<ParamGradient> {
        let spec = self.spec();
        let (b, d, in_w) = (tape.batch, spec.input_dim, spec.input_width());
        if upstream.value.len() != b {
            return invalid(format!(
                "upstream has {} value weights for a batch of {b}",
                upstream.value.len()
            ));
        }
        if let Some(g) = &upstream.gradient {
            if g.len() != b * d {
                return invalid(format!("upstream gradient weights must have length {}", b * d));
            }
            if !tape.tangents {
                return invalid("gradient weights need a tape recorded with tangents");
            }
        }
        if upstream
            .value
            .iter()
            .chain(upstream.gradient.iter().flatten())
            .any(|v| !v.is_finite())
        {
            return invalid("upstream weights must be finite");
        }

        let use_tan = upstream.gradient.is_some();
        let rows = if use_tan { (d + 1) * b } else { b };
        let mut out = ParamGradient::zeros_like(self);
        let mut latent = vec![0.0; spec.latent_dim];

        let mut g = Array2::<f64>::zeros((rows, 1));
        for i in 0..b {
            g[[i, 0]] = upstream.value[i];
        }
        if let Some(w) = &upstream.gradient {
            for k in 0..d {
                for i in 0..b {
                    g[[(k + 1) * b + i, 0]] = w[i * d + k];
                }
            }
        }

        let n = self.layers().len();
        for li in (0..n).rev() {
            let layer = &self.layers()[li];
            let h = tape.inputs[li].slice(s![..rows, ..]);
            out.layers[li] = Layer {
                weight: g.t().dot(&h),
                bias: g.slice(s![..b, ..]).sum_axis(Axis(0)),
            };
            if li == 0 && spec.latent_dim == 0 {
                break;
            }
            let mut dh = g.dot(&layer.weight);
            if li == 0 {
                accumulate_latent(&mut latent, &dh, b, d);
                break;
            }
            if spec.is_skip(li) {
                dh *= FRAC_1_SQRT_2;
                let prev = dh.ncols() - in_w;
                accumulate_latent(&mut latent, &dh.slice(s![.., prev..]).to_owned(), b, d);
                dh = dh.slice(s![.., ..prev]).to_owned();
            }

            // through the softplus of hidden layer li - 1
            let d1 = tape.d1[li - 1].as_slice().expect("standard layout");
            let d2 = tape.d2[li - 1].as_slice().expect("standard layout");
            let dh = dh.as_standard_layout();
            let dh = dh.as_slice().expect("standard layout");
            let blk = d1.len();
            let mut next = Vec::with_capacity(dh.len());
            next.extend(dh[..blk].iter().zip(d1).map(|(a, s1)| a * s1));
            if use_tan {
                let pre = tape.tangent_pre[li - 1].as_slice().expect("standard layout");
                let mut curv = vec![0.0; blk];
                for k in 0..d {
                    let dk = &dh[(k + 1) * blk..(k + 2) * blk];
                    let pk = &pre[k * blk..(k + 1) * blk];
                    for ((c, a), p) in curv.iter_mut().zip(dk).zip(pk) {
                        *c += a * p;
                    }
                    next.extend(dk.iter().zip(d1).map(|(a, s1)| a * s1));
                }
                for ((o, c), s2) in next[..blk].iter_mut().zip(&curv).zip(d2) {
                    *o += c * s2;
                }
            }
            let next = Array2::from_shape_vec((rows, blk / b), next).expect("shape");
            g = next;
        }
        if spec.latent_dim > 0 {
            out.latent = Some(latent);
        }
        Ok(out)
    }
}

/// Adds the value-row adjoints of the latent columns of `x ⊕ z`; `dx` holds
/// the `in_w` input columns.
fn accumulate_latent(latent: &mut [f64], dx: &Array2<f64>, b: usize, d: usize) {
    for (j, acc) in latent.iter_mut().enumerate() {
        *acc += dx.slice(s![..b, d + j]).sum();
    }
}
