//! Shared rigid-body helpers: quaternion (w, x, y, z) serialization, grasp
//! frames, seed derivation and compensated summation.

use nalgebra::{Isometry3, Matrix3, Point3, Quaternion, Rotation3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Pt3 = Point3<f64>;
pub type Quat = UnitQuaternion<f64>;
pub type Pose = Isometry3<f64>;

/// Tolerance used when validating incoming unit quaternions.
pub const UNIT_TOLERANCE: f64 = 1e-6;

pub fn quat_to_wxyz(q: &Quat) -> [f64; 4] {
    [q.w, q.i, q.j, q.k]
}

pub fn quat_from_wxyz_raw(v: [f64; 4]) -> Quaternion<f64> {
    Quaternion::new(v[0], v[1], v[2], v[3])
}

/// Parses a scalar-first quaternion, rejecting inputs whose norm deviates
/// from one by more than `tol`. The result is renormalized.
pub fn quat_from_wxyz(v: [f64; 4], tol: f64) -> Result<Quat> {
    let q = quat_from_wxyz_raw(v);
    let n = q.norm();
    if !n.is_finite() || (n - 1.0).abs() > tol {
        return Err(Error::InvalidArgument(format!(
            "quaternion [{}, {}, {}, {}] has norm {n}",
            v[0], v[1], v[2], v[3]
        )));
    }
    // Leave already-normalized input untouched so that serialization
    // round trips are bit-exact.
    if (n - 1.0).abs() <= 8.0 * f64::EPSILON {
        Ok(UnitQuaternion::new_unchecked(q))
    } else {
        Ok(UnitQuaternion::from_quaternion(q))
    }
}

/// Rotation whose columns are `x`, `z × x`, `z` (grasp frame convention:
/// x toward the second contact, z along the approach).
pub fn frame_from_xz(x: &Vec3, z: &Vec3) -> Quat {
    let y = z.cross(x);
    let m = Matrix3::from_columns(&[*x, y, *z]);
    UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(m))
}

/// Any unit vector orthogonal to `v`.
pub fn any_orthogonal(v: &Vec3) -> Vec3 {
    let a = if v.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    v.cross(&a).normalize()
}

/// Serializable rigid transform, rotation stored scalar-first.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation: [f64; 4],
    pub translation: [f64; 3],
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self::from(&Pose::identity())
    }

    pub fn to_pose(&self) -> Result<Pose> {
        let r = quat_from_wxyz(self.rotation, UNIT_TOLERANCE)?;
        let t = self.translation;
        if t.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("non-finite translation".into()));
        }
        Ok(Isometry3::from_parts(Translation3::new(t[0], t[1], t[2]), r))
    }
}

impl From<&Pose> for RigidTransform {
    fn from(p: &Pose) -> Self {
        let t = p.translation.vector;
        RigidTransform {
            rotation: quat_to_wxyz(&p.rotation),
            translation: [t.x, t.y, t.z],
        }
    }
}

/// Serde adapter storing a unit quaternion as `[w, x, y, z]`.
pub mod serde_wxyz {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::{quat_from_wxyz, quat_to_wxyz, Quat, UNIT_TOLERANCE};

    pub fn serialize<S: Serializer>(q: &Quat, s: S) -> Result<S::Ok, S::Error> {
        quat_to_wxyz(q).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Quat, D::Error> {
        let v = <[f64; 4]>::deserialize(d)?;
        quat_from_wxyz(v, UNIT_TOLERANCE).map_err(serde::de::Error::custom)
    }
}

/// splitmix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent stream seed from a master seed and a job key.
pub fn derive_seed(master: u64, key: &[u64]) -> u64 {
    key.iter().fold(mix64(master), |acc, &k| mix64(acc ^ mix64(k)))
}

/// Neumaier compensated summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        for v in iter {
            s.add(v);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_columns_match_axes() {
        let x = Vec3::new(1.0, 1.0, 0.0).normalize();
        let z = Vec3::new(0.0, 0.0, -1.0);
        let q = frame_from_xz(&x, &z);
        assert!((q * Vec3::x() - x).norm() < 1e-12);
        assert!((q * Vec3::z() - z).norm() < 1e-12);
    }

    #[test]
    fn wxyz_round_trip_and_rejection() {
        let q = UnitQuaternion::from_euler_angles(0.1, -0.4, 2.0);
        let back = quat_from_wxyz(quat_to_wxyz(&q), UNIT_TOLERANCE).unwrap();
        assert!(q.angle_to(&back) < 1e-12);
        assert!(quat_from_wxyz([2.0, 0.0, 0.0, 0.0], UNIT_TOLERANCE).is_err());
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let s: CompensatedSum = [1e16, 1.0, -1e16].into_iter().collect();
        assert_eq!(s.value(), 1.0);
    }

    #[test]
    fn derived_seeds_differ_per_key() {
        assert_ne!(derive_seed(7, &[0, 1]), derive_seed(7, &[1, 0]));
        assert_eq!(derive_seed(7, &[3]), derive_seed(7, &[3]));
    }
}
