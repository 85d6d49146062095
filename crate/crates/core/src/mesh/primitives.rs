//! Procedural watertight primitives used for tests, examples and the
//! bundled evaluation set.

use std::f64::consts::PI;

use crate::error::Result;
use crate::geometry::{Pt3, Vec3};

use super::TriMesh;

/// Raw vertex/face soup before validation.
#[derive(Clone, Debug)]
pub struct MeshData(pub Vec<Pt3>, pub Vec<[u32; 3]>);

impl MeshData {
    pub fn build(self) -> Result<TriMesh> {
        TriMesh::new(self.0, self.1)
    }

    pub fn translated(mut self, t: Vec3) -> Self {
        for v in &mut self.0 {
            *v += t;
        }
        self
    }

    pub fn into_parts(self) -> (Vec<Pt3>, Vec<[u32; 3]>) {
        (self.0, self.1)
    }
}

/// Extrudes a counter-clockwise simple polygon along +z from `z = 0` to
/// `z = height`. Caps are fan-triangulated from `fan_root`, which must see
/// every other polygon vertex.
pub fn extrude(polygon: &[[f64; 2]], height: f64, fan_root: usize) -> MeshData {
    let n = polygon.len() as u32;
    let mut v = Vec::with_capacity(2 * polygon.len());
    for z in [0.0, height] {
        v.extend(polygon.iter().map(|p| Pt3::new(p[0], p[1], z)));
    }
    let mut f = Vec::new();
    for i in 0..n {
        let j = (i + 1) % n;
        f.push([i, j, n + j]);
        f.push([i, n + j, n + i]);
    }
    let r = fan_root as u32;
    for k in 1..n - 1 {
        let a = (r + k) % n;
        let b = (r + k + 1) % n;
        f.push([r, b, a]);
        f.push([n + r, n + a, n + b]);
    }
    MeshData(v, f)
}

/// Axis-aligned box centered at the origin.
pub fn cuboid(x: f64, y: f64, z: f64) -> MeshData {
    let poly = [
        [-x / 2.0, -y / 2.0],
        [x / 2.0, -y / 2.0],
        [x / 2.0, y / 2.0],
        [-x / 2.0, y / 2.0],
    ];
    extrude(&poly, z, 0).translated(Vec3::new(0.0, 0.0, -z / 2.0))
}

/// Regular `segments`-gon prism approximating a cylinder about the z axis.
pub fn cylinder(radius: f64, height: f64, segments: usize) -> MeshData {
    let poly: Vec<[f64; 2]> = (0..segments)
        .map(|i| {
            let a = 2.0 * PI * i as f64 / segments as f64;
            [radius * a.cos(), radius * a.sin()]
        })
        .collect();
    extrude(&poly, height, 0).translated(Vec3::new(0.0, 0.0, -height / 2.0))
}

/// L-shaped prism: legs of length `leg` and thickness `thickness`, extruded
/// by `depth`.
pub fn l_prism(leg: f64, thickness: f64, depth: f64) -> MeshData {
    let poly = [
        [0.0, 0.0],
        [leg, 0.0],
        [leg, thickness],
        [thickness, thickness],
        [thickness, leg],
        [0.0, leg],
    ];
    extrude(&poly, depth, 3)
}

/// Right-triangle prism (a ramp) with base `base`, rise `rise`, extruded by
/// `depth`.
pub fn wedge(base: f64, rise: f64, depth: f64) -> MeshData {
    let poly = [[0.0, 0.0], [base, 0.0], [0.0, rise]];
    extrude(&poly, depth, 0)
}

/// Subdivided icosahedron projected onto a sphere.
pub fn icosphere(radius: f64, subdivisions: u32) -> MeshData {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut v: Vec<Vec3> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|p| Vec3::new(p[0], p[1], p[2]).normalize())
    .collect();
    let mut f: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut mid = std::collections::HashMap::new();
        let mut next = Vec::with_capacity(f.len() * 4);
        let mut midpoint = |a: u32, b: u32, v: &mut Vec<Vec3>| -> u32 {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                v.push(((v[a as usize] + v[b as usize]) / 2.0).normalize());
                (v.len() - 1) as u32
            })
        };
        for [a, b, c] in f {
            let ab = midpoint(a, b, &mut v);
            let bc = midpoint(b, c, &mut v);
            let ca = midpoint(c, a, &mut v);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        f = next;
    }
    MeshData(v.into_iter().map(|p| Pt3::from(p * radius)).collect(), f)
}

/// The five bundled evaluation primitives at their canonical size (before
/// width rescaling): cube, box, cylinder approximant, L-prism and wedge.
pub fn bundled() -> Vec<(&'static str, MeshData)> {
    vec![
        ("cube", cuboid(0.05, 0.05, 0.05)),
        ("box", cuboid(0.04, 0.07, 0.12)),
        ("cylinder", cylinder(0.03, 0.09, 16)),
        ("l_prism", l_prism(0.08, 0.03, 0.05)),
        ("wedge", wedge(0.08, 0.05, 0.06)),
    ]
}
