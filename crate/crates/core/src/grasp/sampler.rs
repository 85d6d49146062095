use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{any_orthogonal, derive_seed, Pt3, Vec3};
use crate::mesh::TriMesh;

use super::{force_closure, robust_epsilon, EpsilonParams, GraspCandidate, GripperModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerParams {
    pub max_grasps: usize,
    /// Axis draws per surface contact.
    pub k: usize,
    /// Number of surface contacts drawn before giving up.
    pub max_attempts: usize,
    pub epsilon: EpsilonParams,
}

impl Default for SamplerParams {
    fn default() -> Self {
        SamplerParams {
            max_grasps: 100,
            k: 6,
            max_attempts: 2000,
            epsilon: EpsilonParams::default(),
        }
    }
}

/// Draws antipodal contact pairs. For each area-uniform surface contact,
/// `k` axes are drawn uniformly (by solid angle) from the friction cone
/// around the inward normal; the opposite contact is the outermost surface
/// along that line. Draws that are occluded, too wide for the gripper or
/// not in force closure are discarded and the survivor with the highest
/// robust epsilon is kept.
pub fn sample_contact_pairs(
    mesh: &TriMesh,
    gripper: &GripperModel,
    params: &SamplerParams,
    seed: u64,
) -> Vec<GraspCandidate> {
    let mut out = Vec::new();
    if params.max_grasps == 0 || params.k == 0 {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cdf = mesh.area_cdf();
    let cos_cone = gripper.friction.atan().cos();
    let reach = 2.0 * mesh.bounding_radius() + 1.0;
    let tol = 1e-7 * (1.0 + mesh.bounding_radius());

    for attempt in 0..params.max_attempts {
        let (face, c1) = mesh.surface_point(&cdf, rng.random(), rng.random(), rng.random());
        let n1 = mesh.face_normals()[face];
        let mut best: Option<GraspCandidate> = None;
        for draw in 0..params.k {
            let axis = cone_direction(&-n1, cos_cone, rng.random(), rng.random());
            let Some((c2, n2)) = opposite_contact(mesh, &c1, &axis, reach, tol) else {
                continue;
            };
            let width = (c2 - c1).norm();
            if width <= 1e-9 || width > gripper.max_width {
                continue;
            }
            if !force_closure(&c1, &c2, &n1, &n2, gripper.friction).unwrap_or(false) {
                continue;
            }
            let Ok(mut cand) = GraspCandidate::from_contacts(c1, c2, n1, n2, 0.0) else {
                continue;
            };
            let eps_seed = derive_seed(seed, &[attempt as u64, draw as u64]);
            cand.epsilon = robust_epsilon(mesh, &cand, &params.epsilon, eps_seed);
            if best.as_ref().is_none_or(|b| cand.epsilon > b.epsilon) {
                best = Some(cand);
            }
        }
        if let Some(b) = best {
            out.push(b);
            if out.len() >= params.max_grasps {
                break;
            }
        }
    }
    log::debug!("sampled {} contact pairs", out.len());
    out
}

/// Unit vector within the cone of half-angle `acos(cos_max)` around `axis`,
/// uniform in solid angle.
fn cone_direction(axis: &Vec3, cos_max: f64, u0: f64, u1: f64) -> Vec3 {
    let cos_t = 1.0 - u0 * (1.0 - cos_max);
    let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
    let phi = std::f64::consts::TAU * u1;
    let a = any_orthogonal(axis);
    let b = axis.cross(&a);
    (axis * cos_t + a * (sin_t * phi.cos()) + b * (sin_t * phi.sin())).normalize()
}

/// Second contact on the line through `c1` along `axis`: the first surface
/// met by a jaw closing from the far side. Requires that a jaw closing from
/// the near side reaches `c1` first.
fn opposite_contact(mesh: &TriMesh, c1: &Pt3, axis: &Vec3, reach: f64, tol: f64) -> Option<(Pt3, Vec3)> {
    let near = mesh.raycast(&(c1 - axis * reach), axis)?;
    if !near.entering || (near.point - c1).norm() > tol {
        return None;
    }
    let far = mesh.raycast(&(c1 + axis * reach), &-axis)?;
    if !far.entering {
        return None;
    }
    Some((far.point, far.normal))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives;

    fn quick() -> SamplerParams {
        SamplerParams {
            max_grasps: 20,
            epsilon: EpsilonParams {
                trials: 20,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn cone_draws_stay_inside() {
        let axis = Vec3::new(0.3, -0.2, 0.9).normalize();
        let cos_max = 0.5f64.atan().cos();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let d = cone_direction(&axis, cos_max, rng.random(), rng.random());
            assert!((d.norm() - 1.0).abs() < 1e-12);
            assert!(d.dot(&axis) >= cos_max - 1e-12);
        }
    }

    #[test]
    fn oversized_cube_yields_nothing() {
        let m = primitives::cuboid(0.12, 0.12, 0.12).build().unwrap();
        let p = SamplerParams {
            max_attempts: 200,
            ..quick()
        };
        assert!(sample_contact_pairs(&m, &GripperModel::default(), &p, 1).is_empty());
    }

    #[test]
    fn candidates_satisfy_invariants() {
        let g = GripperModel::default();
        for (name, data) in primitives::bundled() {
            let m = data.build().unwrap();
            let cands = sample_contact_pairs(&m, &g, &quick(), 5);
            assert!(!cands.is_empty(), "{name}");
            for c in &cands {
                assert!(c.width <= g.max_width);
                assert!(((c.c2 - c.c1) / c.width - c.x_axis).norm() < 1e-9);
                assert!((0.0..=1.0).contains(&c.epsilon));
                assert!(force_closure(&c.c1, &c.c2, &c.n1, &c.n2, g.friction).unwrap());
            }
        }
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let m = primitives::l_prism(0.08, 0.03, 0.05).build().unwrap();
        let g = GripperModel::default();
        let a = sample_contact_pairs(&m, &g, &quick(), 77);
        let b = sample_contact_pairs(&m, &g, &quick(), 77);
        assert_eq!(a, b);
        let c = sample_contact_pairs(&m, &g, &quick(), 78);
        assert_ne!(a, c);
    }

    #[test]
    fn sphere_axes_respect_cone_geometry() {
        // A chord inside the friction cone misses the center by at most
        // r sin(atan mu); with almost no friction it must be diametral.
        let r = 0.03;
        let m = primitives::icosphere(r, 5).build().unwrap();
        let dist = |c: &GraspCandidate| (Pt3::origin() - c.c1).cross(&c.x_axis).norm();
        let wide = sample_contact_pairs(&m, &GripperModel::default(), &quick(), 11);
        assert!(!wide.is_empty());
        let bound = r * 0.5f64.atan().sin();
        assert!(wide.iter().all(|c| dist(c) <= bound + 1e-3));

        let tight = GripperModel {
            friction: 1e-3,
            ..Default::default()
        };
        let p = SamplerParams {
            max_grasps: 10,
            ..quick()
        };
        let narrow = sample_contact_pairs(&m, &tight, &p, 11);
        assert!(!narrow.is_empty());
        assert!(narrow.iter().all(|c| dist(c) <= 1e-3));
    }
}
