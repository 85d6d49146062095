use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{Entity, Scene};

use super::{CameraIntrinsics, CameraPose};

/// Row-major z-depth image in meters; 0 marks pixels without a return.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<f32>,
}

impl DepthImage {
    pub fn new(width: u32, height: u32, data: Vec<f32>) -> Result<Self> {
        let expected = width as usize * height as usize;
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                expected: format!("{expected} pixels ({width}x{height})"),
                actual: format!("{} values", data.len()),
            });
        }
        if data.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::InvalidArgument(
                "depth values must be finite and non-negative".into(),
            ));
        }
        Ok(DepthImage { width, height, data })
    }

    pub fn get(&self, u: u32, v: u32) -> f32 {
        self.data[v as usize * self.width as usize + u as usize]
    }

    pub fn is_valid(&self, u: u32, v: u32) -> bool {
        self.get(u, v) > 0.0
    }
}

/// Ray-casts every pixel center. Returns the depth image and the object
/// mask (1 where the nearest surface belongs to the object).
pub fn render_depth(scene: &Scene, intrinsics: &CameraIntrinsics, camera: &CameraPose) -> (DepthImage, Vec<u8>) {
    let w = intrinsics.width as usize;
    let h = intrinsics.height as usize;
    let origin = camera.position();
    let rot = camera.pose.rotation;
    let pixels: Vec<(f32, u8)> = (0..h)
        .into_par_iter()
        .flat_map_iter(|v| {
            (0..w).map(move |u| {
                // Unit camera-z component: the hit parameter is the z-depth.
                let dir = rot * intrinsics.ray(u as f64, v as f64);
                match scene.raycast(&origin, &dir) {
                    Some(hit) => (hit.distance as f32, u8::from(hit.entity == Entity::Object)),
                    None => (0.0, 0),
                }
            })
        })
        .collect();
    let (data, mask) = pixels.into_iter().unzip();
    (
        DepthImage {
            width: intrinsics.width,
            height: intrinsics.height,
            data,
        },
        mask,
    )
}

/// Depth sensor corruption: a Gaussian lateral jitter of the sampling
/// location followed by depth-dependent axial noise
/// `sigma(z) = axial_a0 + axial_a2 (z - 0.4)^2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseParams {
    pub axial_a0: f64,
    pub axial_a2: f64,
    pub lateral_px: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        NoiseParams {
            axial_a0: 0.0012,
            axial_a2: 0.0019,
            lateral_px: 0.8,
        }
    }
}

impl NoiseParams {
    pub fn none() -> Self {
        NoiseParams {
            axial_a0: 0.0,
            axial_a2: 0.0,
            lateral_px: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if [self.axial_a0, self.axial_a2, self.lateral_px]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0)
        {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid noise parameters {self:?}")))
        }
    }

    pub fn axial_sigma(&self, z: f64) -> f64 {
        self.axial_a0 + self.axial_a2 * (z - 0.4).powi(2)
    }
}

/// Applies the noise model pixel by pixel in row-major order. A jittered
/// location is resampled from its nearest pixel; if that pixel is outside
/// the image or has no return, the pixel keeps its own depth. Pixels
/// without a return are never modified.
pub fn apply_sensor_noise(depth: &DepthImage, params: &NoiseParams, seed: u64) -> DepthImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (depth.width as i64, depth.height as i64);
    let mut out = depth.data.clone();
    for v in 0..h {
        for u in 0..w {
            let idx = (v * w + u) as usize;
            let own = depth.data[idx];
            if own <= 0.0 {
                continue;
            }
            let du: f64 = rng.sample::<f64, _>(StandardNormal) * params.lateral_px;
            let dv: f64 = rng.sample::<f64, _>(StandardNormal) * params.lateral_px;
            let (su, sv) = ((u as f64 + du).round() as i64, (v as f64 + dv).round() as i64);
            let mut z = own as f64;
            if (0..w).contains(&su) && (0..h).contains(&sv) {
                let src = depth.data[(sv * w + su) as usize];
                if src > 0.0 {
                    z = src as f64;
                }
            }
            let n: f64 = StandardNormal.sample(&mut rng);
            let noisy = z + n * params.axial_sigma(z);
            // Keep the pixel a valid return.
            out[idx] = (noisy as f32).max(f32::MIN_POSITIVE);
        }
    }
    DepthImage {
        width: depth.width,
        height: depth.height,
        data: out,
    }
}
