use nalgebra::UnitQuaternion;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::render::SparseGraspMap;

use super::{Tensor, CONTACT_CHANNELS, TCP_CHANNELS};

/// Quality the oracle assigns to positive pixels; everything else gets
/// `1 - ORACLE_HIGH`.
pub const ORACLE_HIGH: f64 = 1.0 - 1e-6;
pub const ORACLE_LOW: f64 = 1e-6;

fn fill(map: &SparseGraspMap, channels: usize) -> Tensor {
    let (w, h) = (map.width as usize, map.height as usize);
    let mut t = Tensor::zeros(channels, h, w);
    t.fill_channel(0, ORACLE_LOW);
    t.fill_channel(1, 1.0);
    for e in &map.entries {
        let (v, u) = (e.v as usize, e.u as usize);
        t.set(0, v, u, if e.q == 1 { ORACLE_HIGH } else { ORACLE_LOW });
        let q = e.r.quaternion();
        for (k, c) in [q.w, q.i, q.j, q.k].into_iter().enumerate() {
            t.set(1 + k, v, u, c);
        }
        t.set(5, v, u, e.width_m);
        if channels == TCP_CHANNELS {
            t.set(6, v, u, e.z_m.unwrap_or(0.0));
        }
    }
    t
}

/// Stand-in for a perfect network: the ground-truth map written into the
/// six output channels (q̂, r̂ as w, x, y, z, ŵ).
pub fn oracle_predict(map: &SparseGraspMap) -> Tensor {
    fill(map, CONTACT_CHANNELS)
}

/// Grasp-center variant with the seventh channel ẑ.
pub fn oracle_predict_tcp(map: &SparseGraspMap) -> Tensor {
    fill(map, TCP_CHANNELS)
}

/// Degradations applied by [`perturbed_oracle`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbParams {
    /// Gaussian noise on the quality of labeled pixels, clamped back to
    /// [0, 1].
    pub quality_sigma: f64,
    /// Per-axis standard deviation of a random rotation (rad) applied to
    /// entry orientations.
    pub rotation_sigma: f64,
    /// Gaussian noise on entry widths (m).
    pub width_sigma: f64,
}

impl PerturbParams {
    pub fn validate(&self) -> Result<()> {
        if [self.quality_sigma, self.rotation_sigma, self.width_sigma]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0)
        {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("perturbation parameters {self:?}")))
        }
    }
}

/// Oracle tensor with seeded noise, applied to labeled pixels in entry
/// order. Unlabeled pixels keep the oracle background, so a noisy negative
/// can outrank a positive but the table never produces a proposal.
pub fn perturbed_oracle(map: &SparseGraspMap, params: &PerturbParams, seed: u64, tcp: bool) -> Result<Tensor> {
    params.validate()?;
    let mut t = if tcp {
        oracle_predict_tcp(map)
    } else {
        oracle_predict(map)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    for e in &map.entries {
        let (v, u) = (e.v as usize, e.u as usize);
        if params.quality_sigma > 0.0 {
            let q = t.at(0, v, u) + params.quality_sigma * std.sample(&mut rng);
            t.set(0, v, u, q.clamp(0.0, 1.0));
        }
        if params.rotation_sigma > 0.0 || params.width_sigma > 0.0 {
            let axis = Vec3::from_fn(|_, _| std.sample(&mut rng)) * params.rotation_sigma;
            let r = UnitQuaternion::from_scaled_axis(axis) * e.r;
            let q = r.quaternion();
            for (k, c) in [q.w, q.i, q.j, q.k].into_iter().enumerate() {
                t.set(1 + k, v, u, c);
            }
            let w = e.width_m + params.width_sigma * std.sample(&mut rng);
            t.set(5, v, u, w);
        }
    }
    Ok(t)
}
