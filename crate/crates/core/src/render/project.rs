use std::collections::HashMap;

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::{Pt3, Quat};
use crate::grasp::OrientedGrasp;
use crate::mesh::{Entity, Scene};

use super::{CameraIntrinsics, CameraPose, DepthImage};

/// Default visibility tolerance between rendered depth and contact depth.
pub const VISIBILITY_TOLERANCE: f64 = 0.005;
/// Largest angle between a contact normal and the normal of the surface the
/// contact's pixel actually sees.
pub const SURFACE_AGREEMENT_DEG: f64 = 15.0;

/// One supervised pixel: a grasp anchored at its visible contact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraspEntry {
    pub u: u32,
    pub v: u32,
    pub q: u8,
    /// Camera-frame grasp rotation; x points from this contact to the other.
    #[serde(with = "crate::geometry::serde_wxyz")]
    pub r: Quat,
    pub width_m: f64,
    pub epsilon: f64,
    /// Camera-frame anchoring point as a decoder recovers it: the pixel
    /// center reprojected at the rendered depth (contact maps), or the grasp
    /// center on the pixel-center ray (grasp-center maps).
    pub contact_m: [f64; 3],
    /// Grasp-center maps only: offset from the visible surface to the grasp
    /// center along the pixel's viewing ray (m).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_m: Option<f64>,
}

impl GraspEntry {
    pub fn contact(&self) -> Pt3 {
        Pt3::from(self.contact_m)
    }
}

/// Ground truth for one image: sparse per-pixel grasps plus the object
/// mask. Pixels outside the mask are implicit negatives.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseGraspMap {
    pub width: u32,
    pub height: u32,
    pub entries: Vec<GraspEntry>,
    pub mask: Vec<u8>,
}

impl SparseGraspMap {
    pub fn mask_at(&self, u: u32, v: u32) -> u8 {
        self.mask[v as usize * self.width as usize + u as usize]
    }
}

/// Projects both contacts of every grasp into the image. A contact is
/// visible when it faces the camera, its pixel lies on the object mask, the
/// rendered depth there agrees with the contact depth within `tau_vis` and
/// the surface seen through the pixel center is the contact's own surface
/// (normals within [`SURFACE_AGREEMENT_DEG`]). The last condition rejects
/// contacts just behind an edge, whose pixel shows a neighboring face and
/// would be reprojected onto it.
///
/// Entries are anchored where a decoder finds them: `contact_m` is the
/// pixel center reprojected at the rendered depth, and the grasp is shifted
/// by the same offset. A positive whose shifted pose fails `anchored`
/// (world rotation, world TCP) is not entered, leaving the pixel to other
/// grasps. When several contacts land on the same pixel, collision-free
/// grasps win over colliding ones, then higher epsilon, then the earlier
/// grasp.
#[allow(clippy::too_many_arguments)]
pub fn project_contacts(
    grasps: &[OrientedGrasp],
    scene: &Scene,
    intrinsics: &CameraIntrinsics,
    camera: &CameraPose,
    depth: &DepthImage,
    mask: &[u8],
    tau_vis: f64,
    anchored: &dyn Fn(&Quat, &Pt3) -> bool,
) -> SparseGraspMap {
    let to_cam = camera.world_to_camera();
    let eye = camera.position();
    let min_cos = SURFACE_AGREEMENT_DEG.to_radians().cos();
    // Half-turn about the grasp approach axis: swaps the roles of the
    // contacts while keeping the approach.
    let flip = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), std::f64::consts::PI);
    let mut best: HashMap<(u32, u32), (usize, GraspEntry)> = HashMap::new();

    for (gi, g) in grasps.iter().enumerate() {
        let contacts = [
            (g.candidate.c1, g.candidate.n1, g.rotation),
            (g.candidate.c2, g.candidate.n2, g.rotation * flip),
        ];
        for (c_world, n_world, rot) in contacts {
            // A surface facing away from the camera is never seen, however
            // close it lies behind the visible surface.
            if n_world.dot(&(eye - c_world)) <= 0.0 {
                continue;
            }
            let c = to_cam * c_world;
            let Some((u, v)) = intrinsics.pixel_of(&c) else {
                continue;
            };
            let idx = v as usize * intrinsics.width as usize + u as usize;
            let z = depth.data[idx] as f64;
            if mask[idx] == 0 || z <= 0.0 || (z - c.z).abs() > tau_vis {
                continue;
            }
            let ray = camera.pose.rotation * intrinsics.ray(u as f64, v as f64).normalize();
            let seen = scene.raycast(&eye, &ray);
            if !seen.is_some_and(|h| h.entity == Entity::Object && h.normal.dot(&n_world) >= min_cos) {
                continue;
            }
            let anchor = intrinsics.backproject(u as f64, v as f64, z);
            let shift = camera.pose.rotation * (anchor - c);
            if g.quality == 1 && !anchored(&g.rotation, &(g.tcp + shift)) {
                continue;
            }
            let entry = GraspEntry {
                u,
                v,
                q: g.quality,
                r: to_cam.rotation * rot,
                width_m: g.candidate.width,
                epsilon: g.candidate.epsilon,
                contact_m: [anchor.x, anchor.y, anchor.z],
                z_m: None,
            };
            offer(&mut best, grasps, gi, entry);
        }
    }
    finish(best, intrinsics, mask)
}

type PixelBest = HashMap<(u32, u32), (usize, GraspEntry)>;

/// Keeps the better of two grasps competing for one pixel.
fn offer(best: &mut PixelBest, grasps: &[OrientedGrasp], gi: usize, entry: GraspEntry) {
    let g = &grasps[gi];
    let key = (entry.u, entry.v);
    let wins = match best.get(&key) {
        None => true,
        Some((oi, old)) => (g.collision_free, g.candidate.epsilon) > (grasps[*oi].collision_free, old.epsilon),
    };
    if wins {
        best.insert(key, (gi, entry));
    }
}

fn finish(best: PixelBest, intrinsics: &CameraIntrinsics, mask: &[u8]) -> SparseGraspMap {
    let mut entries: Vec<GraspEntry> = best.into_values().map(|(_, e)| e).collect();
    entries.sort_by_key(|e| (e.v, e.u));
    SparseGraspMap {
        width: intrinsics.width,
        height: intrinsics.height,
        entries,
        mask: mask.to_vec(),
    }
}

/// Grasp-center representation: one entry per grasp at the pixel its center
/// projects to, provided that pixel sees the object. The rotation is the
/// grasp rotation as given (x toward the second contact) and `z_m` is the
/// distance from the visible surface to the grasp center along the unit
/// viewing ray. Centers lying more than `tau_vis` in front of the surface
/// are skipped. As for contacts, entries are anchored on the pixel-center
/// ray (`contact_m` is the center a decoder recovers) and positives must
/// pass `anchored` there.
pub fn project_tcp(
    grasps: &[OrientedGrasp],
    intrinsics: &CameraIntrinsics,
    camera: &CameraPose,
    depth: &DepthImage,
    mask: &[u8],
    tau_vis: f64,
    anchored: &dyn Fn(&Quat, &Pt3) -> bool,
) -> SparseGraspMap {
    let to_cam = camera.world_to_camera();
    let mut best = PixelBest::new();
    for (gi, g) in grasps.iter().enumerate() {
        let t = to_cam * g.tcp;
        let Some((u, v)) = intrinsics.pixel_of(&t) else {
            continue;
        };
        let idx = v as usize * intrinsics.width as usize + u as usize;
        let d = depth.data[idx] as f64;
        if mask[idx] == 0 || d <= 0.0 {
            continue;
        }
        let surface = intrinsics.backproject(u as f64, v as f64, d);
        let ray = intrinsics.ray(u as f64, v as f64).normalize();
        let z = (t - surface).dot(&ray);
        if z < -tau_vis {
            continue;
        }
        let center = surface + ray * z;
        if g.quality == 1 && !anchored(&g.rotation, &(camera.pose * center)) {
            continue;
        }
        let entry = GraspEntry {
            u,
            v,
            q: g.quality,
            r: to_cam.rotation * g.rotation,
            width_m: g.candidate.width,
            epsilon: g.candidate.epsilon,
            contact_m: [center.x, center.y, center.z],
            z_m: Some(z),
        };
        offer(&mut best, grasps, gi, entry);
    }
    finish(best, intrinsics, mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{frame_from_xz, Pose, Vec3};
    use crate::grasp::GraspCandidate;
    use crate::mesh::primitives;
    use crate::render::render_depth;
    use nalgebra::Translation3;
    use std::sync::Arc;

    fn setup() -> (Scene, CameraIntrinsics, CameraPose) {
        let m = primitives::cuboid(0.06, 0.06, 0.06).build().unwrap();
        let scene = Scene::new(
            Arc::new(m),
            Pose::from_parts(Translation3::new(0.0, 0.0, 0.03), Quat::identity()),
        )
        .unwrap();
        let k = CameraIntrinsics {
            fx: 300.0,
            fy: 300.0,
            cx: 79.5,
            cy: 59.5,
            width: 160,
            height: 120,
        };
        let cam = CameraPose::look_at(&Pt3::new(0.0, -0.5, 0.5), &Pt3::new(0.0, 0.0, 0.03)).unwrap();
        (scene, k, cam)
    }

    fn any(_: &Quat, _: &Pt3) -> bool {
        true
    }

    fn grasp(c1: Pt3, c2: Pt3, n: Vec3, eps: f64, free: bool) -> OrientedGrasp {
        let cand = GraspCandidate::from_contacts(c1, c2, n, -n, eps).unwrap();
        OrientedGrasp {
            rotation: frame_from_xz(&cand.x_axis, &-Vec3::z()),
            tcp: cand.center(),
            quality: u8::from(free && eps >= 0.5),
            collision_free: free,
            candidate: cand,
        }
    }

    #[test]
    fn both_visible_contacts_are_antiparallel() {
        let (scene, k, cam) = setup();
        let (d, mask) = render_depth(&scene, &k, &cam);
        // Contacts on the top face, both seen from the oblique camera.
        let mut g = grasp(
            Pt3::new(-0.02, 0.0, 0.06),
            Pt3::new(0.02, 0.0, 0.06),
            Vec3::z(),
            0.8,
            true,
        );
        g.candidate.n2 = Vec3::z();
        let map = project_contacts(&[g], &scene, &k, &cam, &d, &mask, VISIBILITY_TOLERANCE, &any);
        assert_eq!(map.entries.len(), 2);
        let x0 = map.entries[0].r * Vec3::x();
        let x1 = map.entries[1].r * Vec3::x();
        assert!((x0 + x1).norm() < 1e-6);
        let z0 = map.entries[0].r * Vec3::z();
        let z1 = map.entries[1].r * Vec3::z();
        assert!((z0 - z1).norm() < 1e-9);
        for e in &map.entries {
            assert_eq!(map.mask_at(e.u, e.v), 1);
            let (pu, pv) = k.project(&e.contact());
            assert!((pu - e.u as f64).abs() < 1e-9 && (pv - e.v as f64).abs() < 1e-9);
            // The anchor sits at the entry's end of the x axis, within a
            // pixel footprint of the true contact.
            let other = e.contact() + (e.r * Vec3::x()) * e.width_m;
            let both = [
                cam.world_to_camera() * Pt3::new(-0.02, 0.0, 0.06),
                cam.world_to_camera() * Pt3::new(0.02, 0.0, 0.06),
            ];
            assert!(both.iter().any(|p| (p - other).norm() < 5e-3));
        }
    }

    #[test]
    fn occluded_contact_is_dropped() {
        let (scene, k, cam) = setup();
        let (d, mask) = render_depth(&scene, &k, &cam);
        // Back face (+y) is hidden from a camera on the -y side.
        let g = grasp(
            Pt3::new(0.0, 0.03, 0.03),
            Pt3::new(0.0, -0.03, 0.03),
            Vec3::y(),
            0.8,
            true,
        );
        let map = project_contacts(&[g], &scene, &k, &cam, &d, &mask, VISIBILITY_TOLERANCE, &any);
        assert_eq!(map.entries.len(), 1);
        let world = cam.pose * map.entries[0].contact();
        assert!((world - Pt3::new(0.0, -0.03, 0.03)).norm() < 5e-3);
        assert!((world.y + 0.03).abs() < 1e-6, "anchor stays on the visible face");
    }

    #[test]
    fn failing_anchor_drops_positives_only() {
        let (scene, k, cam) = setup();
        let (d, mask) = render_depth(&scene, &k, &cam);
        let pos = grasp(
            Pt3::new(-0.02, 0.0, 0.06),
            Pt3::new(0.02, 0.0, 0.06),
            Vec3::z(),
            0.8,
            true,
        );
        let neg = grasp(
            Pt3::new(0.0, -0.03, 0.01),
            Pt3::new(0.0, 0.03, 0.01),
            -Vec3::y(),
            0.1,
            true,
        );
        let none = |_: &Quat, _: &Pt3| false;
        let map = project_contacts(&[pos, neg], &scene, &k, &cam, &d, &mask, VISIBILITY_TOLERANCE, &none);
        assert!(!map.entries.is_empty());
        assert!(map.entries.iter().all(|e| e.q == 0));
    }

    #[test]
    fn contact_behind_an_edge_is_dropped() {
        let (scene, k, cam) = setup();
        let (d, mask) = render_depth(&scene, &k, &cam);
        // Just below the top edge of the +y face: within the depth tolerance
        // of the top face in front of it, but facing away from the camera.
        let hidden = grasp(
            Pt3::new(0.0, 0.03, 0.0595),
            Pt3::new(0.0, -0.03, 0.0595),
            Vec3::y(),
            0.8,
            true,
        );
        let map = project_contacts(&[hidden], &scene, &k, &cam, &d, &mask, VISIBILITY_TOLERANCE, &any);
        assert!(map.entries.iter().all(|e| (cam.pose * e.contact()).y < 0.0));
        // Just behind the top edge on the -y face seen from above: front
        // facing, but its pixel may show the top face instead.
        let cam_top = CameraPose::look_at(&Pt3::new(0.0, 0.05, 0.6), &Pt3::new(0.0, 0.0, 0.03)).unwrap();
        let (d, mask) = render_depth(&scene, &k, &cam_top);
        let edge = grasp(
            Pt3::new(0.0, -0.03, 0.0598),
            Pt3::new(0.0, 0.03, 0.0598),
            -Vec3::y(),
            0.8,
            true,
        );
        let map = project_contacts(&[edge], &scene, &k, &cam_top, &d, &mask, VISIBILITY_TOLERANCE, &any);
        for e in &map.entries {
            let ray = cam_top.pose.rotation * k.ray(e.u as f64, e.v as f64).normalize();
            let hit = scene.raycast(&cam_top.position(), &ray).unwrap();
            let c = cam_top.pose * e.contact();
            let n = if c.y < 0.0 { -Vec3::y() } else { Vec3::y() };
            assert!(hit.normal.dot(&n) > 0.9);
        }
    }

    #[test]
    fn pixel_conflict_keeps_highest_epsilon() {
        let (scene, k, cam) = setup();
        let (d, mask) = render_depth(&scene, &k, &cam);
        let c = Pt3::new(0.0, 0.0, 0.06);
        let a = grasp(c, Pt3::new(0.0, 0.0, 0.0), Vec3::z(), 0.6, true);
        let b = grasp(c, Pt3::new(0.0, 0.0, 0.0), Vec3::z(), 0.9, true);
        for order in [vec![a.clone(), b.clone()], vec![b, a]] {
            let map = project_contacts(&order, &scene, &k, &cam, &d, &mask, VISIBILITY_TOLERANCE, &any);
            assert_eq!(map.entries.len(), 1);
            assert_eq!(map.entries[0].epsilon, 0.9);
        }
    }

    #[test]
    fn grasp_center_entries() {
        let (scene, k, cam) = setup();
        let (d, mask) = render_depth(&scene, &k, &cam);
        let g = grasp(
            Pt3::new(-0.03, 0.0, 0.03),
            Pt3::new(0.03, 0.0, 0.03),
            -Vec3::x(),
            0.8,
            true,
        );
        let map = project_tcp(
            std::slice::from_ref(&g),
            &k,
            &cam,
            &d,
            &mask,
            VISIBILITY_TOLERANCE,
            &any,
        );
        assert_eq!(map.entries.len(), 1);
        let e = &map.entries[0];
        let z = e.z_m.unwrap();
        // The cube center sits behind the visible front faces.
        assert!(z > 0.0 && z < 0.06, "{z}");
        let ray = k.ray(e.u as f64, e.v as f64).normalize();
        let surface = k.backproject(e.u as f64, e.v as f64, d.get(e.u, e.v) as f64);
        let rebuilt = surface + ray * z;
        // Reconstruction is exact up to the sub-pixel offset of the center.
        let px = e.contact().z / k.fx;
        assert!((rebuilt - e.contact()).norm() < px);
        assert!(((e.r * Vec3::x()) - cam.world_to_camera().rotation * g.candidate.x_axis).norm() < 1e-9);
    }

    #[test]
    fn nothing_visible_keeps_mask() {
        let (scene, k, cam) = setup();
        let (d, mask) = render_depth(&scene, &k, &cam);
        let map = project_contacts(&[], &scene, &k, &cam, &d, &mask, VISIBILITY_TOLERANCE, &any);
        assert!(map.entries.is_empty());
        assert!(map.mask.contains(&1));
    }
}
