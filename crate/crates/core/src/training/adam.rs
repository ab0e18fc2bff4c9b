use crate::error::{invalid, Error, Result};
use crate::network::{Network, ParamGradient};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Adam moments for a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(len: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPS,
            step: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    /// State sized for all weights and biases of `net`.
    pub fn for_network(net: &Network, lr: f64) -> Self {
        Self::new(net.spec().parameter_count(), lr)
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }

    fn begin(&mut self) -> (f64, f64) {
        self.step += 1;
        let t = self.step as i32;
        (1.0 - self.beta1.powi(t), 1.0 - self.beta2.powi(t))
    }

    fn update(&mut self, offset: usize, params: &mut [f64], grads: &[f64], bc: (f64, f64)) {
        let m = &mut self.m[offset..offset + params.len()];
        let v = &mut self.v[offset..offset + params.len()];
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(m).zip(v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc.0;
            let v_hat = *v / bc.1;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// One Adam update of the network weights. The latent part of `grads`, if
/// any, is ignored; see [`adam_step_vector`].
pub fn adam_step(state: &mut AdamState, net: &mut Network, grads: &ParamGradient) -> Result<()> {
    if state.m.len() != net.spec().parameter_count() || grads.layers.len() != net.layers().len() {
        return invalid("Adam state or gradient does not match the network");
    }
    for (i, l) in grads.layers.iter().enumerate() {
        if l.weight.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                term: format!("layer {i} weight gradient"),
            });
        }
        if l.bias.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                term: format!("layer {i} bias gradient"),
            });
        }
    }
    let bc = state.begin();
    let mut offset = 0;
    for (layer, g) in net.layers_mut().iter_mut().zip(&grads.layers) {
        let w = layer.weight.as_slice_mut().expect("standard layout");
        let gw = g.weight.as_slice().expect("standard layout");
        state.update(offset, w, gw, bc);
        offset += w.len();
        let b = layer.bias.as_slice_mut().expect("standard layout");
        let gb = g.bias.as_slice().expect("standard layout");
        state.update(offset, b, gb, bc);
        offset += b.len();
    }
    Ok(())
}

/// One Adam update of a plain vector, e.g. a latent code. `name` labels the
/// error if the gradient is not finite.
pub fn adam_step_vector(state: &mut AdamState, params: &mut [f64], grads: &[f64], name: &str) -> Result<()> {
    if state.m.len() != params.len() || grads.len() != params.len() {
        return invalid(format!(
            "Adam state, parameters and gradient of {name} differ in length"
        ));
    }
    if grads.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            term: format!("{name} gradient"),
        });
    }
    let bc = state.begin();
    state.update(0, params, grads, bc);
    Ok(())
}
