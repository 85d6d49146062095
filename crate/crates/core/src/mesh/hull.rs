//! Incremental 3D convex hull over mesh vertices. Hull faces index into the
//! original vertex array and are oriented outward.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::{Pt3, Vec3};

struct Face {
    v: [u32; 3],
    normal: Vec3,
    offset: f64,
    alive: bool,
}

impl Face {
    fn new(v: [u32; 3], pts: &[Pt3]) -> Face {
        let [a, b, c] = v.map(|i| pts[i as usize]);
        let n = (b - a).cross(&(c - a));
        let len = n.norm();
        let normal = if len > 0.0 { n / len } else { Vec3::zeros() };
        Face {
            v,
            normal,
            offset: normal.dot(&a.coords),
            alive: true,
        }
    }

    fn distance(&self, p: &Pt3) -> f64 {
        self.normal.dot(&p.coords) - self.offset
    }
}

pub(crate) fn convex_hull(pts: &[Pt3]) -> Result<Vec<[u32; 3]>> {
    let degenerate = || Error::Degenerate("vertices are coplanar; convex hull has no volume".into());
    if pts.len() < 4 {
        return Err(degenerate());
    }
    let (lo, hi) = pts.iter().fold((pts[0], pts[0]), |(l, h), p| (l.inf(p), h.sup(p)));
    let scale = (hi - lo).norm();
    let eps = 1e-10 * scale.max(f64::MIN_POSITIVE);

    // Initial tetrahedron from extreme points.
    let i0 = (0..pts.len()).min_by(|&a, &b| pts[a].x.total_cmp(&pts[b].x)).unwrap();
    let i1 = far_from(pts, |p| (p - pts[i0]).norm());
    let line = (pts[i1] - pts[i0]).normalize();
    let i2 = far_from(pts, |p| {
        let d = p - pts[i0];
        (d - line * d.dot(&line)).norm()
    });
    let plane_n = (pts[i1] - pts[i0]).cross(&(pts[i2] - pts[i0]));
    if plane_n.norm() <= eps * scale {
        return Err(degenerate());
    }
    let plane_n = plane_n.normalize();
    let i3 = far_from(pts, |p| plane_n.dot(&(p - pts[i0])).abs());
    if plane_n.dot(&(pts[i3] - pts[i0])).abs() <= eps {
        return Err(degenerate());
    }

    let seed = [i0, i1, i2, i3].map(|i| i as u32);
    let interior = Pt3::from(seed.iter().map(|&i| pts[i as usize].coords).sum::<Vec3>() / 4.0);
    let mut faces: Vec<Face> = Vec::new();
    for tri in [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]] {
        let mut v = tri.map(|k| seed[k]);
        let f = Face::new(v, pts);
        if f.distance(&interior) > 0.0 {
            v.swap(1, 2);
        }
        faces.push(Face::new(v, pts));
    }

    let mut edge_owner: HashMap<(u32, u32), usize> = HashMap::new();
    for (fi, f) in faces.iter().enumerate() {
        for k in 0..3 {
            edge_owner.insert((f.v[k], f.v[(k + 1) % 3]), fi);
        }
    }

    for (pi, p) in pts.iter().enumerate() {
        let pi = pi as u32;
        if seed.contains(&pi) {
            continue;
        }
        let visible: Vec<usize> = faces
            .iter()
            .enumerate()
            .filter(|(_, f)| f.alive && f.distance(p) > eps)
            .map(|(i, _)| i)
            .collect();
        if visible.is_empty() {
            continue;
        }
        let mut is_visible = vec![false; faces.len()];
        for &fi in &visible {
            is_visible[fi] = true;
        }
        let mut horizon = Vec::new();
        for &fi in &visible {
            let v = faces[fi].v;
            for k in 0..3 {
                let (a, b) = (v[k], v[(k + 1) % 3]);
                match edge_owner.get(&(b, a)) {
                    Some(&nb) if is_visible[nb] => {}
                    _ => horizon.push((a, b)),
                }
            }
        }
        for &fi in &visible {
            faces[fi].alive = false;
            let v = faces[fi].v;
            for k in 0..3 {
                let key = (v[k], v[(k + 1) % 3]);
                if edge_owner.get(&key) == Some(&fi) {
                    edge_owner.remove(&key);
                }
            }
        }
        for (a, b) in horizon {
            let f = Face::new([a, b, pi], pts);
            let fi = faces.len();
            for k in 0..3 {
                edge_owner.insert((f.v[k], f.v[(k + 1) % 3]), fi);
            }
            faces.push(f);
        }
    }

    Ok(faces.into_iter().filter(|f| f.alive).map(|f| f.v).collect())
}

fn far_from(pts: &[Pt3], metric: impl Fn(&Pt3) -> f64) -> usize {
    (0..pts.len())
        .max_by(|&a, &b| metric(&pts[a]).total_cmp(&metric(&pts[b])))
        .unwrap()
}
