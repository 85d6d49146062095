use crate::geometry::{Pt3, Quat, Vec3};

use super::bvh::Aabb;

/// Oriented box used as a gripper collision proxy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrientedBox {
    pub center: Pt3,
    pub half_extents: Vec3,
    pub rotation: Quat,
}

impl OrientedBox {
    pub fn new(center: Pt3, half_extents: Vec3, rotation: Quat) -> Self {
        debug_assert!(half_extents.iter().all(|h| *h > 0.0));
        OrientedBox {
            center,
            half_extents,
            rotation,
        }
    }

    pub fn axes(&self) -> [Vec3; 3] {
        let m = self.rotation.to_rotation_matrix();
        [
            m.matrix().column(0).into(),
            m.matrix().column(1).into(),
            m.matrix().column(2).into(),
        ]
    }

    /// Lowest z coordinate of the box.
    pub fn min_z(&self) -> f64 {
        let axes = self.axes();
        self.center.z - (0..3).map(|k| axes[k].z.abs() * self.half_extents[k]).sum::<f64>()
    }

    pub fn aabb(&self) -> Aabb {
        let axes = self.axes();
        let r = Vec3::from_fn(|i, _| (0..3).map(|k| axes[k][i].abs() * self.half_extents[k]).sum());
        Aabb {
            min: self.center - r,
            max: self.center + r,
        }
    }

    /// The same box expressed in another frame given by `world_to_frame`.
    pub fn transformed(&self, world_to_frame: &crate::geometry::Pose) -> OrientedBox {
        OrientedBox {
            center: world_to_frame * self.center,
            half_extents: self.half_extents,
            rotation: world_to_frame.rotation * self.rotation,
        }
    }
}

/// Separating-axis test between a box and a triangle. Touching counts as
/// overlap.
pub fn box_triangle_overlap(b: &OrientedBox, tri: &[Pt3; 3]) -> bool {
    // Work in the box frame, where the box is the AABB [-h, h].
    let inv = b.rotation.inverse();
    let v = tri.map(|p| inv * (p - b.center));
    let h = b.half_extents;

    for k in 0..3 {
        let lo = v[0][k].min(v[1][k]).min(v[2][k]);
        let hi = v[0][k].max(v[1][k]).max(v[2][k]);
        if lo > h[k] || hi < -h[k] {
            return false;
        }
    }

    let edges = [v[1] - v[0], v[2] - v[1], v[0] - v[2]];
    let normal = edges[0].cross(&edges[1]);
    if separated_on(&normal, &v, &h) {
        return false;
    }
    for e in &edges {
        for k in 0..3 {
            let axis = Vec3::ith(k, 1.0).cross(e);
            if separated_on(&axis, &v, &h) {
                return false;
            }
        }
    }
    true
}

fn separated_on(axis: &Vec3, v: &[Vec3; 3], h: &Vec3) -> bool {
    if axis.norm_squared() < 1e-30 {
        return false;
    }
    let p = [axis.dot(&v[0]), axis.dot(&v[1]), axis.dot(&v[2])];
    let r = h.x * axis.x.abs() + h.y * axis.y.abs() + h.z * axis.z.abs();
    let lo = p[0].min(p[1]).min(p[2]);
    let hi = p[0].max(p[1]).max(p[2]);
    lo > r || hi < -r
}
