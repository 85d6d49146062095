//! Antipodal grasp sampling, robust force closure, hinge-rotation
//! orientation selection and binary quality labels.

mod closure;
mod orient;
mod robust;
mod sampler;

pub use closure::{contacts_along_line, force_closure, LineContacts};
pub use orient::{
    canonical_hinge_axis, hinge_approaches, label_quality, orient_grasp, select_orientation, select_run, HingePattern,
    HINGE_STEPS,
};
pub use robust::{robust_epsilon, EpsilonParams};
pub use sampler::{sample_contact_pairs, SamplerParams};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Pose, Pt3, Quat, Vec3};
use crate::mesh::{OrientedBox, Scene};

/// Default binary robustness threshold.
pub const ROBUSTNESS_THRESHOLD: f64 = 0.5;
/// Default approach length checked before a grasp closes.
pub const APPROACH_DISTANCE: f64 = 0.15;

/// Parallel-jaw gripper with box-shaped collision proxies. Fingers reach
/// from the palm face forward to the tool center point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GripperModel {
    pub max_width: f64,
    pub finger_half_extents: [f64; 3],
    pub palm_half_extents: [f64; 3],
    pub tcp_to_palm: f64,
    pub friction: f64,
    /// Margin added to every box when labeling collision-free orientations.
    /// Execution checks use the bare boxes.
    pub clearance: f64,
}

impl Default for GripperModel {
    fn default() -> Self {
        GripperModel {
            max_width: 0.08,
            finger_half_extents: [0.01, 0.01, 0.02],
            palm_half_extents: [0.05, 0.02, 0.01],
            tcp_to_palm: 0.04,
            friction: 0.5,
            clearance: 0.003,
        }
    }
}

impl GripperModel {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.max_width) {
            return Err(Error::InvalidArgument(format!("gripper max_width {}", self.max_width)));
        }
        if !positive(self.friction) {
            return Err(Error::InvalidArgument(format!("gripper friction {}", self.friction)));
        }
        if !self
            .finger_half_extents
            .iter()
            .chain(&self.palm_half_extents)
            .all(|&h| positive(h))
            || !positive(self.tcp_to_palm)
        {
            return Err(Error::InvalidArgument("gripper box dimensions must be positive".into()));
        }
        if !(self.clearance.is_finite() && self.clearance >= 0.0) {
            return Err(Error::InvalidArgument(format!("gripper clearance {}", self.clearance)));
        }
        Ok(())
    }

    /// Finger, finger and palm boxes for a gripper opened to `opening` at
    /// the given grasp pose, each stretched backward along the approach axis
    /// by `sweep` to cover the approach path.
    pub fn boxes(&self, rotation: &Quat, tcp: &Pt3, opening: f64, sweep: f64) -> [OrientedBox; 3] {
        let f = Vec3::from(self.finger_half_extents);
        let p = Vec3::from(self.palm_half_extents);
        let finger_z = -self.tcp_to_palm + f.z;
        let palm_z = -self.tcp_to_palm - p.z;
        let stretch = Vec3::new(0.0, 0.0, sweep / 2.0);
        let place =
            |local: Vec3, half: Vec3| OrientedBox::new(tcp + rotation * (local - stretch), half + stretch, *rotation);
        let side = opening / 2.0 + f.x;
        [
            place(Vec3::new(-side, 0.0, finger_z), f),
            place(Vec3::new(side, 0.0, finger_z), f),
            place(Vec3::new(0.0, 0.0, palm_z), p),
        ]
    }

    /// Whether the fully opened gripper, grown by `clearance`, collides
    /// anywhere along a straight approach of length `approach` ending at the
    /// given pose.
    pub fn collides(&self, scene: &Scene, rotation: &Quat, tcp: &Pt3, approach: f64) -> bool {
        let margin = Vec3::repeat(self.clearance);
        self.boxes(rotation, tcp, self.max_width, approach)
            .iter()
            .any(|b| scene.box_collides(&OrientedBox::new(b.center, b.half_extents + margin, b.rotation)))
    }
}

/// Two-contact grasp. Normals point out of the surface; the axis points
/// from the first contact to the second.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraspCandidate {
    pub c1: Pt3,
    pub c2: Pt3,
    pub n1: Vec3,
    pub n2: Vec3,
    pub x_axis: Vec3,
    pub width: f64,
    pub epsilon: f64,
}

impl GraspCandidate {
    pub fn from_contacts(c1: Pt3, c2: Pt3, n1: Vec3, n2: Vec3, epsilon: f64) -> Result<Self> {
        let d = c2 - c1;
        let width = d.norm();
        if width < 1e-9 {
            return Err(Error::Degenerate("coincident contacts".into()));
        }
        Ok(GraspCandidate {
            c1,
            c2,
            n1,
            n2,
            x_axis: d / width,
            width,
            epsilon,
        })
    }

    pub fn center(&self) -> Pt3 {
        Pt3::from((self.c1.coords + self.c2.coords) / 2.0)
    }

    pub fn transformed(&self, pose: &Pose) -> GraspCandidate {
        GraspCandidate {
            c1: pose * self.c1,
            c2: pose * self.c2,
            n1: pose.rotation * self.n1,
            n2: pose.rotation * self.n2,
            x_axis: pose.rotation * self.x_axis,
            width: self.width,
            epsilon: self.epsilon,
        }
    }

    /// Same grasp with the contacts listed in the opposite order.
    pub fn swapped(&self) -> GraspCandidate {
        GraspCandidate {
            c1: self.c2,
            c2: self.c1,
            n1: self.n2,
            n2: self.n1,
            x_axis: -self.x_axis,
            width: self.width,
            epsilon: self.epsilon,
        }
    }
}

/// A world-frame grasp with a chosen approach orientation and its label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrientedGrasp {
    pub candidate: GraspCandidate,
    /// Grasp to world; x toward the second contact, z along the approach.
    #[serde(with = "crate::geometry::serde_wxyz")]
    pub rotation: Quat,
    pub tcp: Pt3,
    pub quality: u8,
    pub collision_free: bool,
}

impl OrientedGrasp {
    pub fn approach(&self) -> Vec3 {
        self.rotation * Vec3::z()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::UnitQuaternion;

    #[test]
    fn gripper_boxes_layout() {
        let g = GripperModel::default();
        let [l, r, palm] = g.boxes(&UnitQuaternion::identity(), &Pt3::origin(), 0.08, 0.0);
        assert!((l.center - Pt3::new(-0.05, 0.0, -0.02)).norm() < 1e-12);
        assert!((r.center - Pt3::new(0.05, 0.0, -0.02)).norm() < 1e-12);
        assert!((palm.center - Pt3::new(0.0, 0.0, -0.05)).norm() < 1e-12);
        let [_, _, swept] = g.boxes(&UnitQuaternion::identity(), &Pt3::origin(), 0.08, 0.15);
        assert!((swept.half_extents.z - 0.085).abs() < 1e-12);
        assert!((swept.center.z - (-0.05 - 0.075)).abs() < 1e-12);
    }

    #[test]
    fn invalid_gripper() {
        let g = GripperModel {
            friction: 0.0,
            ..Default::default()
        };
        assert!(g.validate().is_err());
        assert!(GripperModel::default().validate().is_ok());
    }
}
