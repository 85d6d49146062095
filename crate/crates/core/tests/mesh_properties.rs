use std::f64::consts::PI;
use std::sync::Arc;

use contactgrasp::geometry::{Pose, Pt3, Quat, Vec3};
use contactgrasp::mesh::{box_triangle_overlap, primitives, stable_poses_with, OrientedBox, Scene, TriMesh};
use nalgebra::{Translation3, UnitQuaternion};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Solid angle of the `+z` face of a box with half extents `a, b, c` seen
/// from its center.
fn face_solid_angle(a: f64, b: f64, c: f64) -> f64 {
    4.0 * (a * b / (c * (a * a + b * b + c * c).sqrt())).atan()
}

#[test]
fn tall_box_drop_matches_solid_angles() {
    // Every face of a box is stable, so a random drop lands on the face
    // pierced by gravity: probability = solid angle / 4π.
    let (a, b, c) = (0.01, 0.015, 0.04);
    let mesh = primitives::cuboid(2.0 * a, 2.0 * b, 2.0 * c).build().unwrap();
    let n = 20_000;
    let poses = stable_poses_with(&mesh, 25, n, 11);
    assert_eq!(poses.len(), 6);
    let expected = |normal: Vec3| {
        let omega = if normal.x.abs() > 0.5 {
            face_solid_angle(b, c, a)
        } else if normal.y.abs() > 0.5 {
            face_solid_angle(a, c, b)
        } else {
            face_solid_angle(a, b, c)
        };
        omega / (4.0 * PI)
    };
    let total: f64 = [
        face_solid_angle(b, c, a),
        face_solid_angle(a, c, b),
        face_solid_angle(a, b, c),
    ]
    .iter()
    .sum::<f64>()
        * 2.0;
    assert!((total - 4.0 * PI).abs() < 1e-12);
    for p in &poses {
        // Object-frame direction that points down when resting.
        let down = p.rotation.inverse() * -Vec3::z();
        let e = expected(down);
        let sigma = (e * (1.0 - e) / n as f64).sqrt();
        assert!(
            (p.probability - e).abs() <= 4.0 * sigma,
            "face {down:?}: {} vs {e} (σ {sigma})",
            p.probability
        );
    }
}

fn random_box(rng: &mut ChaCha8Rng) -> OrientedBox {
    let center = Pt3::new(
        rng.random_range(-0.06..0.06),
        rng.random_range(-0.06..0.06),
        rng.random_range(-0.02..0.1),
    );
    let half = Vec3::new(
        rng.random_range(0.001..0.03),
        rng.random_range(0.001..0.03),
        rng.random_range(0.001..0.03),
    );
    let axis = Vec3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    );
    OrientedBox::new(center, half, UnitQuaternion::from_scaled_axis(axis * 2.0))
}

fn corners(b: &OrientedBox) -> Vec<Pt3> {
    let ax = b.axes();
    let mut out = Vec::new();
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            for sz in [-1.0, 1.0] {
                out.push(
                    b.center
                        + ax[0] * (sx * b.half_extents.x)
                        + ax[1] * (sy * b.half_extents.y)
                        + ax[2] * (sz * b.half_extents.z),
                );
            }
        }
    }
    out
}

#[test]
fn box_collides_matches_brute_force() {
    let mesh = Arc::new(primitives::l_prism(0.06, 0.02, 0.04).build().unwrap());
    let pose = Pose::from_parts(
        Translation3::new(0.01, -0.005, 0.0),
        UnitQuaternion::from_axis_angle(&Vec3::z_axis(), 0.4),
    );
    let scene = Scene::new(mesh.clone(), pose).unwrap();
    let world_tris: Vec<[Pt3; 3]> = (0..mesh.faces().len())
        .map(|f| mesh.triangle(f).map(|p| pose * p))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut hits = 0;
    for _ in 0..1000 {
        let b = random_box(&mut rng);
        let below = corners(&b).iter().any(|p| p.z < 0.0);
        let touches = world_tris.iter().any(|t| box_triangle_overlap(&b, t));
        let expected = below || touches;
        assert_eq!(scene.box_collides(&b), expected, "{b:?}");
        // A box holding a mesh vertex always overlaps the mesh.
        let inv = Pose::from_parts(Translation3::from(b.center.coords), b.rotation).inverse();
        let holds_vertex = scene.world_vertices().any(|v| {
            let l = inv * v;
            (0..3).all(|k| l[k].abs() <= b.half_extents[k] * (1.0 - 1e-9))
        });
        if holds_vertex {
            assert!(scene.box_hits_object(&b));
        }
        hits += usize::from(expected);
    }
    // Both outcomes must be well represented.
    assert!((100..900).contains(&hits), "{hits} colliding boxes");
}

fn small_mesh() -> TriMesh {
    primitives::wedge(0.05, 0.03, 0.02).build().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rescale_round_trip(target in 0.01f64..0.2, factor in 0.1f64..10.0) {
        let m = small_mesh();
        let (scaled, f) = m.rescale_to_width(target).unwrap();
        prop_assert!((scaled.characteristic_width() - target).abs() <= 1e-12 * target.max(1.0));
        prop_assert!((scaled.volume() - m.volume() * f.powi(3)).abs() <= 1e-12 * m.volume() * f.powi(3));
        let back = m.scaled(factor).unwrap().scaled(1.0 / factor).unwrap();
        for (a, b) in back.vertices().iter().zip(m.vertices()) {
            prop_assert!((a - b).norm() <= 1e-12 * b.coords.norm().max(1e-3));
        }
        prop_assert!((back.com() - m.com()).norm() < 1e-12);
    }

    #[test]
    fn raycast_hits_lie_on_the_surface(ox in -0.1f64..0.1, oy in -0.1f64..0.1, yaw in 0.0f64..std::f64::consts::TAU) {
        let m = small_mesh();
        let origin = Pt3::new(ox, oy, 0.5);
        let dir = Quat::from_axis_angle(&Vec3::z_axis(), yaw) * (m.com() - origin).normalize();
        if let Some(h) = m.raycast(&origin, &dir) {
            let tri = m.triangle(h.face);
            let n = m.face_normals()[h.face];
            prop_assert!((h.point - tri[0]).dot(&n).abs() < 1e-12);
        }
    }
}
