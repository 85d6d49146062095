use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::{Pt3, Vec3};
use crate::mesh::TriMesh;

use super::{contacts_along_line, force_closure, GraspCandidate};

/// Monte Carlo perturbation model behind the robust force-closure metric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpsilonParams {
    pub trials: usize,
    /// Isotropic standard deviation applied to each axis endpoint (m).
    pub sigma_contact: f64,
    pub mu_mean: f64,
    pub mu_std: f64,
    /// Friction draws below this value are rejected and redrawn.
    pub mu_min: f64,
}

impl Default for EpsilonParams {
    fn default() -> Self {
        EpsilonParams {
            trials: 100,
            sigma_contact: 0.0025,
            mu_mean: 0.5,
            mu_std: 0.1,
            mu_min: 0.05,
        }
    }
}

/// Fraction of perturbed realizations of `candidate` that remain in force
/// closure. Each trial jitters both axis endpoints, re-derives the contacts
/// by closing two jaws along the perturbed axis, and draws a friction
/// coefficient from a truncated Gaussian.
pub fn robust_epsilon(mesh: &TriMesh, candidate: &GraspCandidate, params: &EpsilonParams, seed: u64) -> f64 {
    if params.trials == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, params.sigma_contact.max(0.0)).expect("finite sigma");
    let friction = Normal::new(params.mu_mean, params.mu_std.max(0.0)).expect("finite friction");
    let reach = 2.0 * mesh.bounding_radius() + (mesh.com() - candidate.center()).norm() + 1.0;
    let cast = |o: &Pt3, d: &Vec3| mesh.raycast(o, d);

    let mut success = 0usize;
    for _ in 0..params.trials {
        let mut draw = || {
            Vec3::new(
                jitter.sample(&mut rng),
                jitter.sample(&mut rng),
                jitter.sample(&mut rng),
            )
        };
        let p1 = candidate.c1 + draw();
        let p2 = candidate.c2 + draw();
        let mu = draw_friction(&friction, params.mu_min, &mut rng);
        let Some(axis) = (p2 - p1).try_normalize(1e-12) else {
            continue;
        };
        let center = Pt3::from((p1.coords + p2.coords) / 2.0);
        let Some(lc) = contacts_along_line(cast, &center, &axis, reach) else {
            continue;
        };
        if force_closure(&lc.c1, &lc.c2, &lc.n1, &lc.n2, mu).unwrap_or(false) {
            success += 1;
        }
    }
    success as f64 / params.trials as f64
}

fn draw_friction(dist: &Normal<f64>, floor: f64, rng: &mut ChaCha8Rng) -> f64 {
    for _ in 0..64 {
        let mu = dist.sample(rng);
        if mu >= floor {
            return mu;
        }
    }
    floor
}
