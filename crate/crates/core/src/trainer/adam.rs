use crate::mdn::NetworkWeights;
use crate::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-7;

/// Bias-corrected Adam with moments shaped like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: NetworkWeights,
    pub v: NetworkWeights,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub lr: f64,
}

impl AdamState {
    pub fn new(like: &NetworkWeights, lr: f64) -> Self {
        Self {
            m: like.zeros_like(),
            v: like.zeros_like(),
            t: 0,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPS,
            lr,
        }
    }

    /// One update of `w` along gradient `g`.
    pub fn step(&mut self, w: &mut NetworkWeights, g: &NetworkWeights) -> Result<()> {
        if !(w.same_shape(g) && w.same_shape(&self.m)) {
            return Err(Error::Config("adam: weights, gradient and state shapes differ".into()));
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powf(self.t as f64);
        let bc2 = 1.0 - self.beta2.powf(self.t as f64);
        let (b1, b2, eps, lr) = (self.beta1, self.beta2, self.eps, self.lr);
        let mut finite = true;
        for (((wi, gi), mi), vi) in w
            .params_mut()
            .zip(g.params())
            .zip(self.m.params_mut())
            .zip(self.v.params_mut())
        {
            *mi = b1 * *mi + (1.0 - b1) * gi;
            *vi = b2 * *vi + (1.0 - b2) * gi * gi;
            let m_hat = *mi / bc1;
            let v_hat = *vi / bc2;
            *wi -= lr * m_hat / (v_hat.sqrt() + eps);
            finite &= wi.is_finite();
        }
        if finite {
            Ok(())
        } else {
            Err(Error::NonFinite(format!("adam step {} produced non-finite weights", self.t)))
        }
    }
}
