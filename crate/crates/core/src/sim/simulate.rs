use serde::{Deserialize, Serialize};

use crate::decode::GraspProposal;
use crate::geometry::{Pt3, Quat, Vec3};
use crate::grasp::{contacts_along_line, force_closure, GripperModel, APPROACH_DISTANCE};
use crate::mesh::Scene;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    /// Straight approach length ending at the grasp pose (m).
    pub approach: f64,
    /// Spacing of the collision checks along the approach (m).
    pub step: f64,
    /// Friction coefficient of the closure test.
    pub mu: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            approach: APPROACH_DISTANCE,
            step: 0.005,
            mu: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimResult {
    Success,
    ApproachCollision,
    NoContact,
    NotForceClosure,
    NoProposal,
}

impl SimResult {
    pub fn as_str(self) -> &'static str {
        match self {
            SimResult::Success => "success",
            SimResult::ApproachCollision => "approach_collision",
            SimResult::NoContact => "no_contact",
            SimResult::NotForceClosure => "not_force_closure",
            SimResult::NoProposal => "no_proposal",
        }
    }
}

/// Closure contacts found by the simulated fingers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosureContacts {
    pub c1: Pt3,
    pub c2: Pt3,
    pub n1: Vec3,
    pub n2: Vec3,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimOutcome {
    pub result: SimResult,
    /// Distance travelled along the approach before stopping (m).
    pub swept_distance: f64,
    /// Finger separation at closure; 0 when closure was not reached.
    pub closure_width: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contacts: Option<ClosureContacts>,
}

impl SimOutcome {
    pub fn no_proposal() -> SimOutcome {
        SimOutcome {
            result: SimResult::NoProposal,
            swept_distance: 0.0,
            closure_width: 0.0,
            contacts: None,
        }
    }
}

/// Quasi-static execution of a world-frame grasp: a straight approach along
/// the grasp z axis with the gripper fully open, then both fingers close
/// along the grasp x axis until they touch the object, and the grasp holds
/// if the two finger contacts are in force closure.
pub fn simulate_grasp(
    scene: &Scene,
    rotation: &Quat,
    tcp: &Pt3,
    gripper: &GripperModel,
    params: &SimParams,
) -> SimOutcome {
    let approach = rotation * Vec3::z();
    let steps = (params.approach / params.step).ceil().max(0.0) as usize;
    for k in 0..=steps {
        let back = (params.approach - k as f64 * params.step).max(0.0);
        let at = tcp - approach * back;
        let hit = gripper
            .boxes(rotation, &at, gripper.max_width, 0.0)
            .iter()
            .any(|b| scene.box_collides(b));
        if hit {
            return SimOutcome {
                result: SimResult::ApproachCollision,
                swept_distance: params.approach - back,
                closure_width: 0.0,
                contacts: None,
            };
        }
    }

    let x = rotation * Vec3::x();
    let half = gripper.max_width / 2.0;
    let cast = |o: &Pt3, d: &Vec3| scene.raycast_object(o, d);
    let Some(lc) = contacts_along_line(cast, tcp, &x, half) else {
        return SimOutcome {
            result: SimResult::NoContact,
            swept_distance: params.approach,
            closure_width: 0.0,
            contacts: None,
        };
    };
    let width = lc.width();
    let closed = force_closure(&lc.c1, &lc.c2, &lc.n1, &lc.n2, params.mu).unwrap_or(false);
    SimOutcome {
        result: if closed {
            SimResult::Success
        } else {
            SimResult::NotForceClosure
        },
        swept_distance: params.approach,
        closure_width: width,
        contacts: Some(ClosureContacts {
            c1: lc.c1,
            c2: lc.c2,
            n1: lc.n1,
            n2: lc.n2,
        }),
    }
}

/// [`simulate_grasp`] for a base-frame proposal (the base frame being the
/// scene's world frame).
pub fn simulate_proposal(
    scene: &Scene,
    proposal: &GraspProposal,
    gripper: &GripperModel,
    params: &SimParams,
) -> SimOutcome {
    simulate_grasp(scene, &proposal.rotation, &proposal.tcp, gripper, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{frame_from_xz, Pose};
    use crate::mesh::primitives;
    use nalgebra::Translation3;
    use std::sync::Arc;

    fn cube_scene() -> Scene {
        let m = primitives::cuboid(0.05, 0.05, 0.05).build().unwrap();
        Scene::new(
            Arc::new(m),
            Pose::from_parts(Translation3::new(0.0, 0.0, 0.025), Quat::identity()),
        )
        .unwrap()
    }

    #[test]
    fn top_down_cube_grasp_succeeds() {
        let scene = cube_scene();
        let rot = frame_from_xz(&Vec3::x(), &-Vec3::z());
        let out = simulate_grasp(
            &scene,
            &rot,
            &Pt3::new(0.0, 0.0, 0.03),
            &GripperModel::default(),
            &SimParams::default(),
        );
        assert_eq!(out.result, SimResult::Success);
        assert!((out.closure_width - 0.05).abs() < 1e-12);
        let c = out.contacts.unwrap();
        assert!(force_closure(&c.c1, &c.c2, &c.n1, &c.n2, 0.5).unwrap());
    }

    #[test]
    fn approach_through_table() {
        let scene = cube_scene();
        // Approaching upward from below the table.
        let rot = frame_from_xz(&Vec3::x(), &Vec3::z());
        let out = simulate_grasp(
            &scene,
            &rot,
            &Pt3::new(0.0, 0.0, 0.03),
            &GripperModel::default(),
            &SimParams::default(),
        );
        assert_eq!(out.result, SimResult::ApproachCollision);
        assert!(out.swept_distance < 0.15);
    }

    #[test]
    fn far_from_object() {
        let scene = cube_scene();
        let rot = frame_from_xz(&Vec3::x(), &-Vec3::z());
        let out = simulate_grasp(
            &scene,
            &rot,
            &Pt3::new(1.0, 0.0, 0.03),
            &GripperModel::default(),
            &SimParams::default(),
        );
        assert_eq!(out.result, SimResult::NoContact);
    }

    #[test]
    fn squeeze_across_tilted_faces_slips() {
        // Cube turned 45 degrees about z: horizontal jaws meet faces whose
        // normals are 45 degrees off the closing axis.
        let m = primitives::cuboid(0.05, 0.05, 0.05).build().unwrap();
        let yaw = Quat::from_axis_angle(&Vec3::z_axis(), std::f64::consts::FRAC_PI_4);
        let scene = Scene::new(Arc::new(m), Pose::from_parts(Translation3::new(0.0, 0.0, 0.025), yaw)).unwrap();
        let rot = frame_from_xz(&Vec3::x(), &-Vec3::z());
        let out = simulate_grasp(
            &scene,
            &rot,
            &Pt3::new(0.0, 0.01, 0.03),
            &GripperModel::default(),
            &SimParams::default(),
        );
        assert_eq!(out.result, SimResult::NotForceClosure);
        assert!(out.closure_width > 0.0 && out.closure_width <= 0.08);
    }
}
