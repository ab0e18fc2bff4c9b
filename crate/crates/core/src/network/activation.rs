/// Softplus with sharpness `beta`: `ln(1 + exp(beta * t)) / beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Softplus {
    pub beta: f64,
}

impl Softplus {
    pub fn new(beta: f64) -> Self {
        Self { beta }
    }

    /// Value, first and second derivative, evaluated with a single `exp`.
    #[inline]
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        let bt = self.beta * t;
        let e = (-bt.abs()).exp();
        // r = logistic(|bt|) in [1/2, 1], so ln(1 + e) = -ln(r) without cancellation
        let r = 1.0 / (1.0 + e);
        let ln_r = -r.ln();
        let log_term = if e < 1.1e-16 { e } else { ln_r };
        let value = (bt.max(0.0) + log_term) / self.beta;
        let s = if bt >= 0.0 { r } else { e * r };
        (value, s, self.beta * e * r * r)
    }

    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        self.eval(t).0
    }

    #[inline]
    pub fn derivative(&self, t: f64) -> f64 {
        self.eval(t).1
    }
}
