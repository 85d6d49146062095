use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Pose, Pt3, Vec3};

use super::collide::box_triangle_overlap;
use super::{OrientedBox, TriMesh};

/// Maximum tolerated penetration of the object below the support plane.
pub const PLANE_PENETRATION_TOL: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Entity {
    Object,
    Plane,
}

#[derive(Clone, Copy, Debug)]
pub struct Hit {
    pub distance: f64,
    pub point: Pt3,
    /// Unit normal facing against the ray.
    pub normal: Vec3,
    /// Object face index; unused for plane hits.
    pub face: usize,
    pub entity: Entity,
    /// Whether the ray crosses the surface from outside to inside.
    pub entering: bool,
}

/// One object resting on the plane `z = 0` (solid below).
#[derive(Clone, Debug)]
pub struct Scene {
    pub mesh: Arc<TriMesh>,
    /// Object to world.
    pub object_pose: Pose,
}

impl Scene {
    pub fn new(mesh: Arc<TriMesh>, object_pose: Pose) -> Result<Scene> {
        let min_z = mesh
            .vertices()
            .iter()
            .map(|v| (object_pose * v).z)
            .fold(f64::INFINITY, f64::min);
        if min_z < -PLANE_PENETRATION_TOL {
            return Err(Error::InvalidArgument(format!(
                "object penetrates the support plane by {:.3e} m",
                -min_z
            )));
        }
        Ok(Scene { mesh, object_pose })
    }

    /// Nearest intersection with the object or the plane.
    pub fn raycast(&self, origin: &Pt3, dir: &Vec3) -> Option<Hit> {
        let obj = self.raycast_object(origin, dir);
        let plane = raycast_plane(origin, dir);
        match (obj, plane) {
            (Some(o), Some(p)) => Some(if p.distance < o.distance { p } else { o }),
            (o, p) => o.or(p),
        }
    }

    /// Nearest intersection with the object only.
    pub fn raycast_object(&self, origin: &Pt3, dir: &Vec3) -> Option<Hit> {
        let inv = self.object_pose.inverse();
        let o = inv * origin;
        let d = inv.rotation * dir;
        let m = &self.mesh;
        let hit = m.bvh().raycast(m.vertices(), m.faces(), &o, &d, 0.0, f64::INFINITY)?;
        let outward = self.object_pose.rotation * m.face_normals()[hit.face];
        let entering = outward.dot(dir) < 0.0;
        Some(Hit {
            distance: hit.t,
            point: origin + dir * hit.t,
            normal: if entering { outward } else { -outward },
            face: hit.face,
            entity: Entity::Object,
            entering,
        })
    }

    /// True iff the box overlaps any object triangle or the half-space
    /// `z < 0`.
    pub fn box_collides(&self, b: &OrientedBox) -> bool {
        b.min_z() < 0.0 || self.box_hits_object(b)
    }

    pub fn box_hits_object(&self, b: &OrientedBox) -> bool {
        let local = b.transformed(&self.object_pose.inverse());
        let m = &self.mesh;
        m.bvh()
            .any_overlapping(&local.aabb(), |face| box_triangle_overlap(&local, &m.triangle(face)))
    }

    /// Object vertex positions in the world frame.
    pub fn world_vertices(&self) -> impl Iterator<Item = Pt3> + '_ {
        self.mesh.vertices().iter().map(move |v| self.object_pose * v)
    }
}

fn raycast_plane(origin: &Pt3, dir: &Vec3) -> Option<Hit> {
    if dir.z == 0.0 {
        return None;
    }
    let t = -origin.z / dir.z;
    if t.is_nan() || t <= 0.0 {
        return None;
    }
    let entering = dir.z < 0.0;
    let mut point = origin + dir * t;
    point.z = 0.0;
    Some(Hit {
        distance: t,
        point,
        normal: if entering { Vec3::z() } else { -Vec3::z() },
        face: 0,
        entity: Entity::Plane,
        entering,
    })
}
