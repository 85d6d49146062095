use nalgebra::Unit;

use crate::geometry::{frame_from_xz, Quat, Vec3};
use crate::mesh::Scene;

use super::{GraspCandidate, GripperModel, OrientedGrasp, APPROACH_DISTANCE};

/// Number of hinge steps covering a full turn.
pub const HINGE_STEPS: usize = 24;

/// Sign-canonical hinge axis: `x` or `-x`, chosen so that the result does
/// not depend on contact order.
pub fn canonical_hinge_axis(x: &Vec3) -> Vec3 {
    let flip = if x.z != 0.0 {
        x.z < 0.0
    } else if x.y != 0.0 {
        x.y < 0.0
    } else {
        x.x < 0.0
    };
    if flip {
        -x
    } else {
        *x
    }
}

/// Approach directions at 15 degree steps about the hinge axis. Step 0
/// points as far downward as the axis allows; steps turn counter-clockwise
/// about the canonical axis.
pub fn hinge_approaches(x_axis: &Vec3) -> [Vec3; HINGE_STEPS] {
    let axis = canonical_hinge_axis(x_axis);
    let reject = |v: Vec3| (v - axis * axis.dot(&v)).try_normalize(1e-9);
    let z0 = reject(-Vec3::z())
        .or_else(|| reject(Vec3::x()))
        .unwrap_or_else(|| reject(Vec3::y()).expect("axis cannot be parallel to both x and y"));
    let unit_axis = Unit::new_unchecked(axis);
    let step = std::f64::consts::TAU / HINGE_STEPS as f64;
    std::array::from_fn(|i| {
        let r = Quat::from_axis_angle(&unit_axis, step * i as f64);
        r * z0
    })
}

/// Picks an orientation index from a circular collision-free pattern. Each
/// maximal circular run of free steps proposes its lower median; the
/// proposal whose approach best aligns with `principal_ray` wins, earlier
/// runs winning ties. A pattern with no collisions at all proposes its
/// single best-aligned step.
pub fn select_run(free: &[bool], approaches: &[Vec3], principal_ray: &Vec3) -> Option<usize> {
    let n = free.len();
    assert_eq!(n, approaches.len());
    let score = |i: usize| approaches[i].dot(principal_ray);
    let better = |cand: usize, best: Option<usize>| best.is_none_or(|b| score(cand) > score(b));
    let blocked = free.iter().position(|f| !f)?;
    let mut best = None;
    let mut run: Vec<usize> = Vec::new();
    for off in 1..=n {
        let i = (blocked + off) % n;
        if free[i] {
            run.push(i);
        } else if !run.is_empty() {
            let m = run[(run.len() - 1) / 2];
            if better(m, best) {
                best = Some(m);
            }
            run.clear();
        }
    }
    best
}

fn all_free_choice(approaches: &[Vec3], principal_ray: &Vec3) -> usize {
    let mut best = 0;
    for i in 1..approaches.len() {
        if approaches[i].dot(principal_ray) > approaches[best].dot(principal_ray) {
            best = i;
        }
    }
    best
}

/// Collision-free flags of the hinge orientations of one world-frame
/// candidate. Independent of the camera, so it can be shared across views.
#[derive(Clone, Debug, PartialEq)]
pub struct HingePattern {
    pub approaches: [Vec3; HINGE_STEPS],
    pub free: [bool; HINGE_STEPS],
}

impl HingePattern {
    /// Checks every hinge orientation with the gripper fully open over the
    /// whole straight approach.
    pub fn compute(candidate: &GraspCandidate, scene: &Scene, gripper: &GripperModel) -> HingePattern {
        let approaches = hinge_approaches(&candidate.x_axis);
        let tcp = candidate.center();
        let free = std::array::from_fn(|i| {
            let rot = frame_from_xz(&candidate.x_axis, &approaches[i]);
            !gripper.collides(scene, &rot, &tcp, APPROACH_DISTANCE)
        });
        HingePattern { approaches, free }
    }

    /// Index of the selected orientation for a camera looking along
    /// `principal_ray`, or `None` when every orientation collides.
    pub fn select(&self, principal_ray: &Vec3) -> Option<usize> {
        if self.free.iter().all(|&f| f) {
            Some(all_free_choice(&self.approaches, principal_ray))
        } else {
            select_run(&self.free, &self.approaches, principal_ray)
        }
    }

    /// Orients and labels `candidate` (the one this pattern was computed
    /// for). Without a collision-free orientation the step-0 orientation is
    /// kept and the label is 0.
    pub fn orient(&self, candidate: &GraspCandidate, principal_ray: &Vec3, delta: f64) -> OrientedGrasp {
        let chosen = self.select(principal_ray);
        let collision_free = chosen.is_some();
        OrientedGrasp {
            candidate: candidate.clone(),
            rotation: frame_from_xz(&candidate.x_axis, &self.approaches[chosen.unwrap_or(0)]),
            tcp: candidate.center(),
            quality: label_quality(candidate.epsilon, collision_free, delta),
            collision_free,
        }
    }
}

/// Collision-free hinge orientation for a world-frame candidate, or `None`
/// when every orientation collides.
pub fn select_orientation(
    candidate: &GraspCandidate,
    scene: &Scene,
    principal_ray: &Vec3,
    gripper: &GripperModel,
) -> Option<Quat> {
    let pattern = HingePattern::compute(candidate, scene, gripper);
    let idx = pattern.select(principal_ray)?;
    Some(frame_from_xz(&candidate.x_axis, &pattern.approaches[idx]))
}

/// Orients and labels a world-frame candidate.
pub fn orient_grasp(
    candidate: &GraspCandidate,
    scene: &Scene,
    principal_ray: &Vec3,
    gripper: &GripperModel,
    delta: f64,
) -> OrientedGrasp {
    HingePattern::compute(candidate, scene, gripper).orient(candidate, principal_ray, delta)
}

/// Binary grasp label: 1 iff robust enough and collision-free.
pub fn label_quality(epsilon: f64, collision_free: bool, delta: f64) -> u8 {
    u8::from(collision_free && epsilon >= delta)
}
