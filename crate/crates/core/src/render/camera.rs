use nalgebra::{Matrix3, Rotation3, Translation3, UnitQuaternion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Pose, Pt3, RigidTransform, Vec3};

/// Pinhole intrinsics. Pixel `(u, v)` has its center at image coordinates
/// `(u, v)`, so the optical axis of a 640×480 sensor sits at (319.5, 239.5).
/// The default resembles a 640×480 structured-light depth stream with a
/// roughly 80°×64° field of view.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        CameraIntrinsics {
            fx: 385.0,
            fy: 385.0,
            cx: 319.5,
            cy: 239.5,
            width: 640,
            height: 480,
        }
    }
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<()> {
        let ok = self.fx.is_finite()
            && self.fy.is_finite()
            && self.fx > 0.0
            && self.fy > 0.0
            && self.width > 0
            && self.height > 0
            && (0.0..self.width as f64).contains(&self.cx)
            && (0.0..self.height as f64).contains(&self.cy);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid camera intrinsics {self:?}")))
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Continuous image coordinates of a camera-frame point (`z > 0`).
    pub fn project(&self, p: &Pt3) -> (f64, f64) {
        (self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy)
    }

    /// Nearest pixel of a camera-frame point, if it lies in front of the
    /// camera and inside the image.
    pub fn pixel_of(&self, p: &Pt3) -> Option<(u32, u32)> {
        if p.z <= 0.0 {
            return None;
        }
        let (u, v) = self.project(p);
        let (u, v) = (u.round(), v.round());
        if u >= 0.0 && v >= 0.0 && u < self.width as f64 && v < self.height as f64 {
            Some((u as u32, v as u32))
        } else {
            None
        }
    }

    /// Camera-frame ray through the pixel center, scaled to unit z.
    pub fn ray(&self, u: f64, v: f64) -> Vec3 {
        Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }

    /// Camera-frame point at z-depth `z` behind pixel `(u, v)`.
    pub fn backproject(&self, u: f64, v: f64, z: f64) -> Pt3 {
        Pt3::from(self.ray(u, v) * z)
    }
}

/// Camera to world. The camera looks along +z with +x right and +y down.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraPose {
    pub pose: Pose,
}

impl CameraPose {
    pub fn new(pose: Pose) -> Self {
        CameraPose { pose }
    }

    /// Looks from `eye` toward `target`, with image-up pointing away from
    /// the support plane (world +z). Straight-down views use world -y as the
    /// image-down direction.
    pub fn look_at(eye: &Pt3, target: &Pt3) -> Result<CameraPose> {
        let z = (target - eye)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::InvalidArgument("camera eye coincides with target".into()))?;
        let down = -Vec3::z();
        let y = (down - z * z.dot(&down))
            .try_normalize(1e-9)
            .unwrap_or_else(|| z.cross(&Vec3::x()).normalize());
        let x = y.cross(&z);
        let rot = Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[x, y, z]));
        Ok(CameraPose {
            pose: Pose::from_parts(
                Translation3::from(eye.coords),
                UnitQuaternion::from_rotation_matrix(&rot),
            ),
        })
    }

    pub fn principal_ray(&self) -> Vec3 {
        self.pose.rotation * Vec3::z()
    }

    pub fn position(&self) -> Pt3 {
        Pt3::from(self.pose.translation.vector)
    }

    pub fn world_to_camera(&self) -> Pose {
        self.pose.inverse()
    }
}

impl Serialize for CameraPose {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RigidTransform::from(&self.pose).serialize(s)
    }
}

impl<'de> Deserialize<'de> for CameraPose {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let t = RigidTransform::deserialize(d)?;
        t.to_pose().map(CameraPose::new).map_err(serde::de::Error::custom)
    }
}

/// Spherical-shell sampling region around the workspace center. Radius,
/// polar angle (from vertical) and azimuth are drawn independently and
/// uniformly within their bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraBounds {
    pub radius: [f64; 2],
    pub polar_deg: [f64; 2],
    pub azimuth_deg: [f64; 2],
    /// Per-axis uniform jitter of the look-at target (m).
    pub target_jitter: f64,
}

impl Default for CameraBounds {
    fn default() -> Self {
        CameraBounds {
            radius: [0.5, 1.0],
            polar_deg: [5.0, 70.0],
            azimuth_deg: [0.0, 360.0],
            target_jitter: 0.02,
        }
    }
}

impl CameraBounds {
    pub fn validate(&self) -> Result<()> {
        let ordered = |b: [f64; 2]| b[0].is_finite() && b[1].is_finite() && b[0] <= b[1];
        let bad = |m: &str| Err(Error::InvalidArgument(format!("camera bounds: {m}")));
        if !ordered(self.radius) || !ordered(self.polar_deg) || !ordered(self.azimuth_deg) {
            return bad("each range must be finite with min <= max");
        }
        if self.radius[0] < 0.4 || self.radius[1] > 1.4 {
            return bad("radius must lie within [0.4, 1.4] m");
        }
        if self.polar_deg[0] < 0.0 || self.polar_deg[1] >= 90.0 {
            return bad("polar angle must lie within [0, 90) degrees");
        }
        if !self.target_jitter.is_finite() || self.target_jitter < 0.0 {
            return bad("target jitter must be non-negative");
        }
        Ok(())
    }
}

fn uniform(rng: &mut impl Rng, b: [f64; 2]) -> f64 {
    b[0] + (b[1] - b[0]) * rng.random::<f64>()
}

pub fn sample_camera_pose(center: &Pt3, bounds: &CameraBounds, seed: u64) -> Result<CameraPose> {
    bounds.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = uniform(&mut rng, bounds.radius);
    let polar = uniform(&mut rng, bounds.polar_deg).to_radians();
    let azimuth = uniform(&mut rng, bounds.azimuth_deg).to_radians();
    let j = bounds.target_jitter;
    let jitter = Vec3::from_fn(|_, _| (2.0 * rng.random::<f64>() - 1.0) * j);
    let eye = center + Vec3::new(polar.sin() * azimuth.cos(), polar.sin() * azimuth.sin(), polar.cos()) * r;
    CameraPose::look_at(&eye, &(center + jitter))
}
