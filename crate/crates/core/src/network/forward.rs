use ndarray::{concatenate, s, Array1, Array2, ArrayView1, Axis};
use std::f64::consts::FRAC_1_SQRT_2;

use super::Network;
use crate::error::Result;

/// Intermediates of a batched forward pass, kept for [`Network::backward_tape`].
///
/// Rows are stacked in blocks of `batch` rows: block 0 carries the values,
/// block `k + 1` (when gradients are tracked) the derivative along input
/// coordinate `k`.
#[derive(Debug, Clone)]
pub struct Tape {
    pub(crate) batch: usize,
    pub(crate) tangents: bool,
    /// Input of every affine layer, skip concatenation applied.
    pub(crate) inputs: Vec<Array2<f64>>,
    /// Tangent rows of every hidden pre-activation, `W ∇ₓy`.
    pub(crate) tangent_pre: Vec<Array2<f64>>,
    /// σ' and σ'' at every hidden value pre-activation.
    pub(crate) d1: Vec<Array2<f64>>,
    pub(crate) d2: Vec<Array2<f64>>,
    values: Array1<f64>,
    /// `batch × input_dim`, empty when tangents are off.
    gradients: Array2<f64>,
}

impl Tape {
    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn has_gradients(&self) -> bool {
        self.tangents
    }

    pub fn values(&self) -> &[f64] {
        self.values.as_slice().expect("contiguous")
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// `∇ₓf` of sample `i`; panics when the tape tracked no gradients.
    pub fn gradient(&self, i: usize) -> ArrayView1<'_, f64> {
        assert!(self.tangents, "tape was recorded without gradients");
        self.gradients.row(i)
    }
}

impl Network {
    /// Batched forward pass over row-major `points`; with `tangents` the
    /// input gradient is propagated alongside the values.
    pub fn forward(&self, points: &[f64], latent: Option<&[f64]>, tangents: bool) -> Result<Tape> {
        let b = self.check_inputs(points, latent)?;
        let spec = self.spec();
        let (d, in_w) = (spec.input_dim, spec.input_width());
        let rows = if tangents { (d + 1) * b } else { b };

        let mut x0 = Array2::<f64>::zeros((rows, in_w));
        for i in 0..b {
            let mut row = x0.row_mut(i);
            for k in 0..d {
                row[k] = points[i * d + k];
            }
            if let Some(z) = latent {
                for (j, v) in z.iter().enumerate() {
                    row[d + j] = *v;
                }
            }
        }
        if tangents {
            for k in 0..d {
                for i in 0..b {
                    x0[[(k + 1) * b + i, k]] = 1.0;
                }
            }
        }

        let act = self.activation();
        let n = self.layers().len();
        let mut tape = Tape {
            batch: b,
            tangents,
            inputs: Vec::with_capacity(n),
            tangent_pre: Vec::with_capacity(n - 1),
            d1: Vec::with_capacity(n - 1),
            d2: Vec::with_capacity(n - 1),
            values: Array1::zeros(b),
            gradients: Array2::zeros((if tangents { b } else { 0 }, d)),
        };

        let mut h = x0.clone();
        for (li, layer) in self.layers().iter().enumerate() {
            if spec.is_skip(li) {
                h = concatenate![Axis(1), h, x0];
                h *= FRAC_1_SQRT_2;
            }
            let wt = layer.weight.t();
            // the value block gets its own product so it is bit-identical to
            // a pass without tangents
            let mut pre = standard(h.slice(s![..b, ..]).dot(&wt));
            pre += &layer.bias;
            let tan = tangents.then(|| standard(h.slice(s![b.., ..]).dot(&wt)));

            if li + 1 == n {
                tape.values.assign(&pre.column(0));
                if let Some(tan) = &tan {
                    for k in 0..d {
                        tape.gradients
                            .column_mut(k)
                            .assign(&tan.slice(s![k * b..(k + 1) * b, 0]));
                    }
                }
                tape.inputs.push(h);
                break;
            }

            let width = pre.ncols();
            let blk = b * width;
            let mut next = Array2::<f64>::zeros((rows, width));
            let mut d1 = Array2::<f64>::zeros((b, width));
            let mut d2 = Array2::<f64>::zeros((b, width));
            {
                let out = next.as_slice_mut().expect("standard layout");
                let (vals, tan_out) = out.split_at_mut(blk);
                let s1 = d1.as_slice_mut().expect("standard layout");
                let s2 = d2.as_slice_mut().expect("standard layout");
                let pre = pre.as_slice().expect("standard layout");
                for (((&a, v), g1), g2) in pre.iter().zip(vals.iter_mut()).zip(s1.iter_mut()).zip(s2.iter_mut()) {
                    (*v, *g1, *g2) = act.eval(a);
                }
                if let Some(tan) = &tan {
                    let tan = tan.as_slice().expect("standard layout");
                    for (src, dst) in tan.chunks_exact(blk).zip(tan_out.chunks_exact_mut(blk)) {
                        for ((o, p), g1) in dst.iter_mut().zip(src).zip(s1.iter()) {
                            *o = g1 * p;
                        }
                    }
                }
            }
            tape.inputs.push(std::mem::replace(&mut h, next));
            tape.tangent_pre.push(tan.unwrap_or_else(|| Array2::zeros((0, width))));
            tape.d1.push(d1);
            tape.d2.push(d2);
        }
        Ok(tape)
    }
}

fn standard(a: Array2<f64>) -> Array2<f64> {
    if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().into_owned()
    }
}
