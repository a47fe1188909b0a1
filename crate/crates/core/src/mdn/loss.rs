//! Negative log-likelihood of the mixture head and its exact gradient.
//!
//! The trunk depends only on the input, so samples sharing a distance share
//! one forward pass; their head gradients are summed (in batch order) and
//! back-propagated once.

use std::collections::HashMap;

use super::mixture::{log_sum_exp, sigma_transform};
use super::network::NetworkWeights;
use crate::datapipe::ScaledSample;
use crate::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Batch samples grouped by bit-identical input, in first-appearance order.
fn group_inputs(batch: &[ScaledSample]) -> Vec<(f64, Vec<f64>)> {
    let mut index: HashMap<u64, usize> = HashMap::new();
    let mut groups: Vec<(f64, Vec<f64>)> = Vec::new();
    for s in batch {
        let k = *index.entry(s.d_norm.to_bits()).or_insert_with(|| {
            groups.push((s.d_norm, Vec::new()));
            groups.len() - 1
        });
        groups[k].1.push(s.s);
    }
    groups
}

/// Per-component buffers reused across samples.
#[derive(Default)]
struct HeadScratch {
    sigma: Vec<f64>,
    dsigma: Vec<f64>,
    terms: Vec<f64>,
}

/// `-ln p(x)` for head output `z`; when `dz` is given, adds `d(-ln p)/dz`
/// scaled by `weight` into it.
fn head_nll(
    w: &NetworkWeights,
    z: &[f64],
    x: f64,
    weight: f64,
    scratch: &mut HeadScratch,
    dz: Option<&mut [f64]>,
) -> f64 {
    let m = w.arch.m_c;
    let act = w.arch.sigma_activation;
    let (logits, rest) = z.split_at(m);
    let (mus, sig_raw) = rest.split_at(m);
    let lse_a = log_sum_exp(logits);

    let HeadScratch { sigma, dsigma, terms } = scratch;
    sigma.clear();
    dsigma.clear();
    terms.clear();
    for i in 0..m {
        let (s, ds) = sigma_transform(sig_raw[i], act);
        sigma.push(s);
        dsigma.push(ds);
        let u = (x - mus[i]) / s;
        terms.push(logits[i] - lse_a - LN_SQRT_2PI - s.ln() - 0.5 * u * u);
    }
    let lse = log_sum_exp(terms);
    if let Some(dz) = dz {
        for i in 0..m {
            // Posterior responsibility of component i.
            let post = (terms[i] - lse).exp();
            let alpha = (logits[i] - lse_a).exp();
            let s = sigma[i];
            let diff = x - mus[i];
            dz[i] += weight * (alpha - post);
            dz[m + i] += weight * post * (mus[i] - x) / (s * s);
            dz[2 * m + i] += weight * post * (1.0 / s - diff * diff / (s * s * s)) * dsigma[i];
        }
    }
    -lse
}

fn check_batch(w: &NetworkWeights, batch: &[ScaledSample]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::Domain("loss needs a non-empty batch".into()));
    }
    if w.layers.len() != w.arch.num_layers + 1 {
        return Err(Error::Config("weights do not match their architecture".into()));
    }
    Ok(())
}

/// Mean negative log-likelihood of the batch.
pub fn nll_loss(w: &NetworkWeights, batch: &[ScaledSample]) -> Result<f64> {
    check_batch(w, batch)?;
    let mut acts = Vec::new();
    let mut scratch = HeadScratch::default();
    let mut total = 0.0;
    for (x, targets) in group_inputs(batch) {
        let z = w.forward_cached(x, &mut acts);
        for t in targets {
            total += head_nll(w, &z, w.output.to_unit(t), 0.0, &mut scratch, None);
        }
    }
    let loss = total / batch.len() as f64 + w.output.scale.ln();
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::NonFinite(format!("loss is {loss}")))
    }
}

/// Mean loss and its gradient with respect to every weight and bias.
pub fn loss_and_grad(w: &NetworkWeights, batch: &[ScaledSample]) -> Result<(f64, NetworkWeights)> {
    check_batch(w, batch)?;
    let n = batch.len() as f64;
    let inv_n = 1.0 / n;
    let mut g = w.zeros_like();
    let mut acts: Vec<Vec<f64>> = Vec::new();
    let mut total = 0.0;
    let mut dz = vec![0.0; w.arch.output_dim()];
    let mut scratch = HeadScratch::default();
    let last = w.layers.len() - 1;

    for (x, targets) in group_inputs(batch) {
        let z = w.forward_cached(x, &mut acts);
        dz.iter_mut().for_each(|v| *v = 0.0);
        for t in targets {
            total += head_nll(w, &z, w.output.to_unit(t), inv_n, &mut scratch, Some(&mut dz));
        }

        // Backward through the dense stack; `acts[k]` is layer k's input.
        let mut delta = dz.clone();
        for k in (0..=last).rev() {
            let layer = &w.layers[k];
            let input = &acts[k];
            let gl = &mut g.layers[k];
            for (r, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                gl.bias[r] += d;
                let row = &mut gl.weights[r * layer.n_in..(r + 1) * layer.n_in];
                row.iter_mut().zip(input).for_each(|(gw, a)| *gw += d * a);
            }
            if k == 0 {
                break;
            }
            let mut prev = vec![0.0; layer.n_in];
            for (row, d) in layer.weights.chunks_exact(layer.n_in).zip(&delta) {
                if *d == 0.0 {
                    continue;
                }
                prev.iter_mut().zip(row).for_each(|(p, wv)| *p += d * wv);
            }
            // ReLU gate of the layer that produced `input`.
            prev.iter_mut().zip(input).for_each(|(p, a)| {
                if *a <= 0.0 {
                    *p = 0.0
                }
            });
            delta = prev;
        }
    }

    let loss = total * inv_n + w.output.scale.ln();
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("loss is {loss}")));
    }
    if !g.is_finite() {
        return Err(Error::NonFinite("gradient has non-finite entries".into()));
    }
    Ok((loss, g))
}

pub fn grad(w: &NetworkWeights, batch: &[ScaledSample]) -> Result<NetworkWeights> {
    loss_and_grad(w, batch).map(|(_, g)| g)
}
