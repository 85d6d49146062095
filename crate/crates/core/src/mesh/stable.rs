//! Quasi-static resting poses on a plane. A random orientation drops the
//! object onto the hull facet pierced by gravity from the center of mass;
//! unstable facets topple across the boundary edge nearest to the projected
//! center of mass until a stable facet is reached.

use std::collections::HashMap;

use nalgebra::{Isometry3, Translation3, UnitQuaternion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::geometry::{Pose, Pt3, Quat, Vec3};

use super::{TriMesh, DEGENERATE_AREA};

/// Orientations sampled per mesh when estimating pose probabilities.
pub const STABLE_POSE_SAMPLES: usize = 10_000;
const DEFAULT_SEED: u64 = 0x05EE_D0F5_AB1E;
const COPLANAR_ANGLE: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StablePose {
    /// Object to world rotation.
    #[serde(with = "crate::geometry::serde_wxyz")]
    pub rotation: Quat,
    /// Height of the center of mass above the plane.
    pub height: f64,
    pub probability: f64,
    /// Index into [`hull_facets`].
    pub facet: usize,
    /// Vertical offset placing the lowest vertex on `z = 0`.
    pub lift: f64,
}

impl StablePose {
    /// Object to world transform resting at the origin.
    pub fn pose(&self) -> Pose {
        Isometry3::from_parts(Translation3::new(0.0, 0.0, self.lift), self.rotation)
    }

    /// Resting pose translated to `(x, y)` and turned by `yaw` about world z.
    pub fn placed(&self, x: f64, y: f64, yaw: f64) -> Pose {
        let spin = UnitQuaternion::from_axis_angle(&Vec3::z_axis(), yaw);
        Isometry3::from_parts(Translation3::new(x, y, self.lift), spin * self.rotation)
    }
}

/// A planar face of the convex hull: merged coplanar hull triangles.
#[derive(Clone, Debug)]
pub struct HullFacet {
    pub triangles: Vec<[u32; 3]>,
    pub normal: Vec3,
    pub offset: f64,
    pub area: f64,
    /// Boundary edges `(a, b, neighbor facet)`.
    edges: Vec<(u32, u32, usize)>,
}

impl HullFacet {
    /// Whether `p` (assumed on the facet plane) lies inside the facet.
    pub fn contains(&self, mesh: &TriMesh, p: &Pt3, tol: f64) -> bool {
        self.triangles.iter().any(|t| {
            let [a, b, c] = t.map(|i| mesh.vertices()[i as usize]);
            point_in_triangle(p, &a, &b, &c, &self.normal, tol)
        })
    }
}

fn point_in_triangle(p: &Pt3, a: &Pt3, b: &Pt3, c: &Pt3, n: &Vec3, tol: f64) -> bool {
    let edges = [(a, b), (b, c), (c, a)];
    edges.iter().all(|(s, e)| {
        let edge = *e - *s;
        let len = edge.norm();
        if len == 0.0 {
            return true;
        }
        // Signed distance of p inside the edge line.
        n.cross(&edge).dot(&(p - *s)) / len >= -tol
    })
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Groups hull triangles into planar facets.
pub fn hull_facets(mesh: &TriMesh) -> Vec<HullFacet> {
    let verts = mesh.vertices();
    let tris = mesh.hull_faces();
    let geo: Vec<(Vec3, f64)> = tris
        .iter()
        .map(|t| {
            let [a, b, c] = t.map(|i| verts[i as usize]);
            let cr = (b - a).cross(&(c - a));
            let len = cr.norm();
            (if len > 0.0 { cr / len } else { Vec3::zeros() }, 0.5 * len)
        })
        .collect();
    let mut owner: HashMap<(u32, u32), usize> = HashMap::new();
    for (i, t) in tris.iter().enumerate() {
        for k in 0..3 {
            owner.insert((t[k], t[(k + 1) % 3]), i);
        }
    }
    let neighbors = |i: usize| -> Vec<usize> {
        let t = tris[i];
        (0..3)
            .filter_map(|k| owner.get(&(t[(k + 1) % 3], t[k])).copied())
            .collect()
    };
    let degenerate = |i: usize| geo[i].1 < DEGENERATE_AREA;

    let mut parent: Vec<usize> = (0..tris.len()).collect();
    let cos_tol = COPLANAR_ANGLE.cos();
    for i in 0..tris.len() {
        if degenerate(i) {
            continue;
        }
        for j in neighbors(i) {
            if !degenerate(j) && geo[i].0.dot(&geo[j].0) > cos_tol {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                parent[ri.max(rj)] = ri.min(rj);
            }
        }
    }
    // Attach degenerate slivers to their largest non-degenerate neighbor.
    let mut attached: Vec<bool> = (0..tris.len()).map(|i| !degenerate(i)).collect();
    loop {
        let mut progress = false;
        for i in 0..tris.len() {
            if attached[i] {
                continue;
            }
            let best = neighbors(i)
                .into_iter()
                .filter(|&j| attached[j])
                .max_by(|&a, &b| geo[a].1.total_cmp(&geo[b].1).then(b.cmp(&a)));
            if let Some(j) = best {
                let rj = find(&mut parent, j);
                parent[i] = rj;
                attached[i] = true;
                progress = true;
            }
        }
        if !progress {
            break;
        }
    }

    let mut group_of: HashMap<usize, usize> = HashMap::new();
    let mut facet_of = vec![0usize; tris.len()];
    let mut facets: Vec<HullFacet> = Vec::new();
    for i in 0..tris.len() {
        let r = find(&mut parent, i);
        let gi = *group_of.entry(r).or_insert_with(|| {
            facets.push(HullFacet {
                triangles: Vec::new(),
                normal: Vec3::zeros(),
                offset: 0.0,
                area: 0.0,
                edges: Vec::new(),
            });
            facets.len() - 1
        });
        facet_of[i] = gi;
        let f = &mut facets[gi];
        f.triangles.push(tris[i]);
        f.normal += geo[i].0 * geo[i].1;
        f.area += geo[i].1;
    }
    for f in &mut facets {
        f.normal = f.normal.try_normalize(0.0).unwrap_or_else(Vec3::z);
        f.offset = f
            .triangles
            .iter()
            .flatten()
            .map(|&v| f.normal.dot(&verts[v as usize].coords))
            .fold(f64::NEG_INFINITY, f64::max);
    }
    for (i, t) in tris.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            if let Some(&j) = owner.get(&(b, a)) {
                if facet_of[j] != facet_of[i] {
                    facets[facet_of[i]].edges.push((a, b, facet_of[j]));
                }
            }
        }
    }
    facets
}

/// Stable poses with the default sample count and seed.
pub fn stable_poses(mesh: &TriMesh, max_poses: usize) -> Vec<StablePose> {
    stable_poses_with(mesh, max_poses, STABLE_POSE_SAMPLES, DEFAULT_SEED)
}

/// Up to `max_poses` resting poses sorted by descending probability, where
/// probability is the fraction of `samples` uniformly random orientations
/// that come to rest on each facet.
pub fn stable_poses_with(mesh: &TriMesh, max_poses: usize, samples: usize, seed: u64) -> Vec<StablePose> {
    let facets = hull_facets(mesh);
    let com = mesh.com();
    let scale = mesh.bounding_radius().max(f64::MIN_POSITIVE);
    let tol = 1e-9 * scale;

    let next: Vec<Option<usize>> = facets
        .iter()
        .map(|f| {
            let p = com - f.normal * (f.normal.dot(&com.coords) - f.offset);
            if f.contains(mesh, &p, tol) {
                return None;
            }
            f.edges
                .iter()
                .map(|&(a, b, nb)| {
                    let (a, b) = (mesh.vertices()[a as usize], mesh.vertices()[b as usize]);
                    let e = b - a;
                    let s = ((p - a).dot(&e) / e.norm_squared()).clamp(0.0, 1.0);
                    let dist = (p - (a + e * s)).norm();
                    let outside = -f.normal.cross(&e).dot(&(p - a)) / e.norm();
                    (dist, outside, nb)
                })
                .min_by(|x, y| x.0.total_cmp(&y.0).then(y.1.total_cmp(&x.1)))
                .map(|(_, _, nb)| nb)
        })
        .collect();

    let terminal: Vec<Option<usize>> = (0..facets.len())
        .map(|start| {
            let mut cur = start;
            for _ in 0..=facets.len() {
                match next[cur] {
                    None => return Some(cur),
                    Some(n) => cur = n,
                }
            }
            None
        })
        .collect();

    let mut counts = vec![0usize; facets.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let d: [f64; 3] = UnitSphere.sample(&mut rng);
        let d = Vec3::from(d);
        let hit = facets
            .iter()
            .enumerate()
            .filter_map(|(i, f)| {
                let nd = f.normal.dot(&d);
                (nd > 1e-15).then(|| ((f.offset - f.normal.dot(&com.coords)) / nd, i))
            })
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if let Some((_, i)) = hit {
            if let Some(t) = terminal[i] {
                counts[t] += 1;
            }
        }
    }

    let mut order: Vec<usize> = (0..facets.len()).filter(|&i| counts[i] > 0).collect();
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    order.truncate(max_poses);
    order
        .into_iter()
        .map(|i| {
            let n = facets[i].normal;
            let rotation = UnitQuaternion::rotation_between(&n, &-Vec3::z())
                .unwrap_or_else(|| UnitQuaternion::from_axis_angle(&Vec3::x_axis(), std::f64::consts::PI));
            let lift = -mesh
                .vertices()
                .iter()
                .map(|v| (rotation * v).z)
                .fold(f64::INFINITY, f64::min);
            StablePose {
                rotation,
                height: (rotation * com).z + lift,
                probability: counts[i] as f64 / samples as f64,
                facet: i,
                lift,
            }
        })
        .collect()
}
