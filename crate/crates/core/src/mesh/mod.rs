//! Triangle meshes, convex hulls, resting poses, ray casting and collision
//! queries.

mod bvh;
mod collide;
mod hull;
mod io;
pub mod primitives;
mod scene;
mod stable;

use std::collections::HashMap;

pub use bvh::Bvh;
pub use collide::{box_triangle_overlap, OrientedBox};
pub use io::{load_mesh, write_obj};
pub use scene::{Entity, Hit, Scene};
pub use stable::{stable_poses, stable_poses_with, HullFacet, StablePose, STABLE_POSE_SAMPLES};

use crate::error::{Error, Result};
use crate::geometry::{Pt3, Vec3};

/// Facets with area below this are treated as degenerate.
pub const DEGENERATE_AREA: f64 = 1e-10;

/// Watertight, consistently oriented triangle mesh (meters) with uniform
/// density mass properties and its convex hull.
#[derive(Clone, Debug)]
pub struct TriMesh {
    vertices: Vec<Pt3>,
    faces: Vec<[u32; 3]>,
    face_normals: Vec<Vec3>,
    face_areas: Vec<f64>,
    volume: f64,
    com: Pt3,
    hull_faces: Vec<[u32; 3]>,
    bvh: Bvh,
}

impl TriMesh {
    /// Builds a mesh from welded vertices and index triples.
    ///
    /// Fails if an index is out of range, if any edge is not shared by
    /// exactly two faces, if the faces are not consistently oriented, or if
    /// the enclosed volume vanishes. Globally inverted meshes are flipped.
    pub fn new(vertices: Vec<Pt3>, faces: Vec<[u32; 3]>) -> Result<Self> {
        if vertices.is_empty() || faces.is_empty() {
            return Err(Error::Degenerate("mesh has no faces".into()));
        }
        if vertices.iter().any(|v| !v.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::Degenerate("non-finite vertex coordinate".into()));
        }
        let n = vertices.len() as u32;
        let mut faces: Vec<[u32; 3]> = faces
            .into_iter()
            .filter(|f| f[0] != f[1] && f[1] != f[2] && f[0] != f[2])
            .collect();
        if let Some(bad) = faces.iter().flatten().find(|&&i| i >= n) {
            return Err(Error::InvalidArgument(format!(
                "face index {bad} out of range for {n} vertices"
            )));
        }
        check_watertight(&faces)?;

        let mut volume = signed_volume(&vertices, &faces);
        if volume < 0.0 {
            for f in &mut faces {
                f.swap(1, 2);
            }
            volume = -volume;
        }
        if volume <= 0.0 {
            return Err(Error::Degenerate("mesh encloses zero volume".into()));
        }

        let (face_normals, face_areas): (Vec<_>, Vec<_>) = faces
            .iter()
            .map(|f| {
                let [a, b, c] = f.map(|i| vertices[i as usize]);
                let cr = (b - a).cross(&(c - a));
                let len = cr.norm();
                let normal = if len > 0.0 { cr / len } else { Vec3::z() };
                (normal, 0.5 * len)
            })
            .unzip();

        let com = centroid(&vertices, &faces, volume);
        let hull_faces = hull::convex_hull(&vertices)?;
        let bvh = Bvh::build(&vertices, &faces);
        Ok(TriMesh {
            vertices,
            faces,
            face_normals,
            face_areas,
            volume,
            com,
            hull_faces,
            bvh,
        })
    }

    pub fn vertices(&self) -> &[Pt3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn face_normals(&self) -> &[Vec3] {
        &self.face_normals
    }

    pub fn face_areas(&self) -> &[f64] {
        &self.face_areas
    }

    pub fn hull_faces(&self) -> &[[u32; 3]] {
        &self.hull_faces
    }

    pub fn com(&self) -> Pt3 {
        self.com
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn bvh(&self) -> &Bvh {
        &self.bvh
    }

    pub fn triangle(&self, face: usize) -> [Pt3; 3] {
        self.faces[face].map(|i| self.vertices[i as usize])
    }

    pub fn surface_area(&self) -> f64 {
        self.face_areas.iter().sum()
    }

    /// Nearest intersection in the mesh frame.
    pub fn raycast(&self, origin: &Pt3, dir: &Vec3) -> Option<Hit> {
        let hit = self
            .bvh
            .raycast(&self.vertices, &self.faces, origin, dir, 0.0, f64::INFINITY)?;
        let outward = self.face_normals[hit.face];
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

    /// Axis-aligned bounds `(min, max)` in the mesh frame.
    pub fn bounds(&self) -> (Pt3, Pt3) {
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for v in &self.vertices[1..] {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    pub fn extents(&self) -> Vec3 {
        let (lo, hi) = self.bounds();
        hi - lo
    }

    /// Median of the three axis-aligned extents.
    pub fn characteristic_width(&self) -> f64 {
        let e = self.extents();
        let mut v = [e.x, e.y, e.z];
        v.sort_by(f64::total_cmp);
        v[1]
    }

    /// Largest distance from the center of mass to any vertex.
    pub fn bounding_radius(&self) -> f64 {
        self.vertices.iter().map(|v| (v - self.com).norm()).fold(0.0, f64::max)
    }

    /// Uniformly scales the mesh about the origin.
    pub fn scaled(&self, factor: f64) -> Result<TriMesh> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::InvalidArgument(format!("scale factor {factor}")));
        }
        let vertices: Vec<Pt3> = self.vertices.iter().map(|v| Pt3::from(v.coords * factor)).collect();
        let face_areas = self.face_areas.iter().map(|a| a * factor * factor).collect();
        let bvh = Bvh::build(&vertices, &self.faces);
        Ok(TriMesh {
            faces: self.faces.clone(),
            face_normals: self.face_normals.clone(),
            face_areas,
            volume: self.volume * factor.powi(3),
            com: Pt3::from(self.com.coords * factor),
            hull_faces: self.hull_faces.clone(),
            vertices,
            bvh,
        })
    }

    /// Rescales the mesh so that its characteristic width equals
    /// `target_width`. Returns the rescaled mesh and the applied factor.
    pub fn rescale_to_width(&self, target_width: f64) -> Result<(TriMesh, f64)> {
        if !(target_width.is_finite() && target_width > 0.0) {
            return Err(Error::InvalidArgument(format!("target width {target_width}")));
        }
        let width = self.characteristic_width();
        if width <= 0.0 {
            return Err(Error::Degenerate("mesh has zero characteristic width".into()));
        }
        let factor = target_width / width;
        Ok((self.scaled(factor)?, factor))
    }

    /// Samples a point uniformly by area. `u0` selects the face, `u1`, `u2`
    /// the barycentric coordinates; all in `[0, 1)`.
    pub fn surface_point(&self, cdf: &[f64], u0: f64, u1: f64, u2: f64) -> (usize, Pt3) {
        let total = *cdf.last().unwrap_or(&0.0);
        let target = u0 * total;
        let face = cdf.partition_point(|&c| c <= target).min(self.faces.len() - 1);
        let [a, b, c] = self.triangle(face);
        let s = u1.sqrt();
        let p = a.coords * (1.0 - s) + b.coords * (s * (1.0 - u2)) + c.coords * (s * u2);
        (face, Pt3::from(p))
    }

    /// Cumulative face areas for area-weighted sampling.
    pub fn area_cdf(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.face_areas
            .iter()
            .map(|a| {
                acc += a;
                acc
            })
            .collect()
    }
}

fn check_watertight(faces: &[[u32; 3]]) -> Result<()> {
    let mut edges: HashMap<(u32, u32), (u32, u32)> = HashMap::new();
    for f in faces {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            let e = edges.entry((a.min(b), a.max(b))).or_default();
            if a < b {
                e.0 += 1;
            } else {
                e.1 += 1;
            }
        }
    }
    let defects = edges.values().filter(|(f, r)| f + r != 2).count();
    if defects > 0 {
        return Err(Error::NotWatertight { defects });
    }
    if edges.values().any(|&(f, r)| f != 1 || r != 1) {
        return Err(Error::Degenerate("inconsistent face orientation".into()));
    }
    Ok(())
}

fn signed_volume(vertices: &[Pt3], faces: &[[u32; 3]]) -> f64 {
    let origin = mean_point(vertices);
    faces
        .iter()
        .map(|f| {
            let [a, b, c] = f.map(|i| vertices[i as usize] - origin);
            a.dot(&b.cross(&c)) / 6.0
        })
        .sum()
}

fn centroid(vertices: &[Pt3], faces: &[[u32; 3]], volume: f64) -> Pt3 {
    let origin = mean_point(vertices);
    let mut acc = Vec3::zeros();
    for f in faces {
        let [a, b, c] = f.map(|i| vertices[i as usize] - origin);
        let v = a.dot(&b.cross(&c)) / 6.0;
        acc += (a + b + c) * (v / 4.0);
    }
    origin + acc / volume
}

fn mean_point(vertices: &[Pt3]) -> Pt3 {
    let s: Vec3 = vertices.iter().map(|v| v.coords).sum();
    Pt3::from(s / vertices.len() as f64)
}
