use nalgebra::Quaternion;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CompensatedSum, UNIT_TOLERANCE};
use crate::render::{GraspEntry, SparseGraspMap};

use super::Tensor;

/// Probabilities are clamped to `[BCE_CLAMP, 1 - BCE_CLAMP]` inside the
/// cross-entropy.
pub const BCE_CLAMP: f64 = 1e-7;

pub const CONTACT_CHANNELS: usize = 6;
pub const TCP_CHANNELS: usize = 7;

/// `1 - |r · r̂|` for unit quaternions.
pub fn quaternion_distance(r: &Quaternion<f64>, r_hat: &Quaternion<f64>) -> Result<f64> {
    for q in [r, r_hat] {
        if (q.norm() - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::InvalidArgument(format!(
                "quaternion norm {} is not unit",
                q.norm()
            )));
        }
    }
    Ok(1.0 - r.coords.dot(&r_hat.coords).abs())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub nu: f64,
}

impl LossWeights {
    pub const CONTACT: LossWeights = LossWeights {
        alpha: 0.1,
        beta: 0.1,
        nu: 0.0,
    };
    pub const TCP: LossWeights = LossWeights {
        alpha: 0.1,
        beta: 0.01,
        nu: 0.1,
    };
}

/// Optional random subsampling of the implicit negatives (mask-0 pixels).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NegativeSampling {
    /// Probability of keeping each negative pixel.
    pub ratio: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub l_q: f64,
    pub l_r: f64,
    pub l_w: f64,
    /// Only present for the grasp-center variant.
    pub l_z: Option<f64>,
    pub positive_count: usize,
    pub supervised_count: usize,
}

/// Composite loss for the contact representation (6 channels: q̂, r̂, ŵ).
pub fn loss_contact(pred: &Tensor, target: &SparseGraspMap, weights: &LossWeights) -> Result<LossBreakdown> {
    composite(pred, target, weights, false, None).map(|(l, _)| l)
}

/// Composite loss for the grasp-center representation (7 channels, the last
/// being ẑ).
pub fn loss_tcp(pred: &Tensor, target: &SparseGraspMap, weights: &LossWeights) -> Result<LossBreakdown> {
    composite(pred, target, weights, true, None).map(|(l, _)| l)
}

/// Loss together with its gradient with respect to every prediction entry.
/// The quality gradient is taken with respect to the (post-sigmoid)
/// probability; where the clamp is active it is zero.
pub fn loss_with_gradient(
    pred: &Tensor,
    target: &SparseGraspMap,
    weights: &LossWeights,
    tcp: bool,
    negatives: Option<NegativeSampling>,
) -> Result<(LossBreakdown, Tensor)> {
    composite(pred, target, weights, tcp, negatives)
}

fn bce(p: f64, y: f64) -> (f64, f64) {
    let clamped = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
    let loss = -(y * clamped.ln() + (1.0 - y) * (1.0 - clamped).ln());
    let grad = if p == clamped {
        (clamped - y) / (clamped * (1.0 - clamped))
    } else {
        0.0
    };
    (loss, grad)
}

fn composite(
    pred: &Tensor,
    target: &SparseGraspMap,
    weights: &LossWeights,
    tcp: bool,
    negatives: Option<NegativeSampling>,
) -> Result<(LossBreakdown, Tensor)> {
    let channels = if tcp { TCP_CHANNELS } else { CONTACT_CHANNELS };
    let (w, h) = (target.width as usize, target.height as usize);
    if pred.channels != channels || pred.width != w || pred.height != h {
        return Err(Error::DimensionMismatch {
            expected: format!("{channels}x{h}x{w}"),
            actual: format!("{}x{}x{}", pred.channels, pred.height, pred.width),
        });
    }
    if target.mask.len() != w * h {
        return Err(Error::DimensionMismatch {
            expected: format!("{} mask pixels", w * h),
            actual: format!("{}", target.mask.len()),
        });
    }

    // Sorting by pixel makes the reduction independent of entry order.
    let mut entries: Vec<&GraspEntry> = target.entries.iter().collect();
    entries.sort_by_key(|e| (e.v, e.u));
    for e in &entries {
        if e.u as usize >= w || e.v as usize >= h {
            return Err(Error::InvalidArgument(format!(
                "entry pixel ({}, {}) out of bounds",
                e.u, e.v
            )));
        }
    }

    let mut supervised: Vec<(usize, usize, f64)> = entries
        .iter()
        .map(|e| (e.v as usize, e.u as usize, f64::from(e.q)))
        .collect();
    let mut rng = negatives.map(|n| (n.ratio, ChaCha8Rng::seed_from_u64(n.seed)));
    for v in 0..h {
        for u in 0..w {
            if target.mask[v * w + u] != 0 {
                continue;
            }
            if let Some((ratio, rng)) = rng.as_mut() {
                if rng.random::<f64>() >= *ratio {
                    continue;
                }
            }
            supervised.push((v, u, 0.0));
        }
    }
    supervised.sort_by_key(|&(v, u, _)| (v, u));

    let mut grad = Tensor::zeros(channels, h, w);
    let n_sup = supervised.len();
    let mut q_sum = CompensatedSum::default();
    for &(v, u, y) in &supervised {
        let (l, g) = bce(pred.at(0, v, u), y);
        q_sum.add(l);
        let i = grad.index(0, v, u);
        grad.data[i] += g / n_sup as f64;
    }
    let l_q = if n_sup > 0 { q_sum.value() / n_sup as f64 } else { 0.0 };

    let positives: Vec<&GraspEntry> = entries.iter().copied().filter(|e| e.q == 1).collect();
    let n_pos = positives.len();
    let mut r_sum = CompensatedSum::default();
    let mut w_sum = CompensatedSum::default();
    let mut z_sum = CompensatedSum::default();
    let inv = if n_pos > 0 { 1.0 / n_pos as f64 } else { 0.0 };
    for e in &positives {
        let (v, u) = (e.v as usize, e.u as usize);
        let q = e.r.quaternion();
        // Channel order is w, x, y, z.
        let r = nalgebra::Vector4::new(q.w, q.i, q.j, q.k);
        let rh = nalgebra::Vector4::from_fn(|k, _| pred.at(1 + k, v, u));
        let norm = rh.norm();
        if norm > 0.0 {
            let rn = rh / norm;
            let s = r.dot(&rn);
            r_sum.add(1.0 - s.abs());
            let sign = if s > 0.0 {
                1.0
            } else if s < 0.0 {
                -1.0
            } else {
                0.0
            };
            let ds = (r - rn * s) / norm;
            for k in 0..4 {
                let i = grad.index(1 + k, v, u);
                grad.data[i] -= sign * ds[k] * inv * weights.alpha;
            }
        } else {
            r_sum.add(1.0);
        }

        let dw = pred.at(5, v, u) - e.width_m;
        w_sum.add(dw.abs());
        let i = grad.index(5, v, u);
        grad.data[i] += dw.signum() * f64::from(u8::from(dw != 0.0)) * inv * weights.beta;

        if tcp {
            let dz = pred.at(6, v, u) - e.z_m.unwrap_or(0.0);
            z_sum.add(dz.abs());
            let i = grad.index(6, v, u);
            grad.data[i] += dz.signum() * f64::from(u8::from(dz != 0.0)) * inv * weights.nu;
        }
    }
    let l_r = r_sum.value() * inv;
    let l_w = w_sum.value() * inv;
    let l_z = tcp.then(|| z_sum.value() * inv);
    let total = l_q + weights.alpha * l_r + weights.beta * l_w + l_z.map_or(0.0, |z| weights.nu * z);
    Ok((
        LossBreakdown {
            total,
            l_q,
            l_r,
            l_w,
            l_z,
            positive_count: n_pos,
            supervised_count: n_sup,
        },
        grad,
    ))
}
