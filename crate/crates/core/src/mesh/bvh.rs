//! Bounding-volume hierarchy over mesh triangles. Queries return exactly
//! what a linear scan would.

use crate::geometry::{Pt3, Vec3};

const LEAF_SIZE: usize = 4;

#[derive(Clone, Copy, Debug)]
pub struct Aabb {
    pub min: Pt3,
    pub max: Pt3,
}

impl Aabb {
    fn empty() -> Self {
        Aabb {
            min: Pt3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            max: Pt3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    fn grow(&mut self, p: &Pt3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    fn merge(&mut self, o: &Aabb) {
        self.min = self.min.inf(&o.min);
        self.max = self.max.sup(&o.max);
    }

    pub fn overlaps(&self, o: &Aabb) -> bool {
        (0..3).all(|k| self.min[k] <= o.max[k] && o.min[k] <= self.max[k])
    }

    /// Slab test; returns the entry distance if the ray enters before `t_max`.
    fn ray_entry(&self, origin: &Pt3, inv_dir: &Vec3, t_max: f64) -> Option<f64> {
        let mut t0: f64 = 0.0;
        let mut t1 = t_max;
        for k in 0..3 {
            if inv_dir[k].is_infinite() {
                // Ray parallel to this slab.
                if origin[k] < self.min[k] || origin[k] > self.max[k] {
                    return None;
                }
                continue;
            }
            let a = (self.min[k] - origin[k]) * inv_dir[k];
            let b = (self.max[k] - origin[k]) * inv_dir[k];
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            if lo > t0 {
                t0 = lo;
            }
            if hi < t1 {
                t1 = hi;
            }
            if t0 > t1 * (1.0 + 1e-12) + 1e-15 {
                return None;
            }
        }
        Some(t0)
    }
}

#[derive(Clone, Debug)]
struct Node {
    bounds: Aabb,
    // Leaf: first triangle slot and count. Interior: child indices.
    start: u32,
    count: u32,
    left: u32,
    right: u32,
}

#[derive(Clone, Debug)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<u32>,
}

/// Closest ray-triangle intersection reported by [`Bvh::raycast`].
#[derive(Clone, Copy, Debug)]
pub struct TriHit {
    pub t: f64,
    pub face: usize,
}

impl Bvh {
    pub fn build(vertices: &[Pt3], faces: &[[u32; 3]]) -> Bvh {
        let boxes: Vec<Aabb> = faces
            .iter()
            .map(|f| {
                let mut b = Aabb::empty();
                for &i in f {
                    b.grow(&vertices[i as usize]);
                }
                b
            })
            .collect();
        let centers: Vec<Pt3> = boxes.iter().map(|b| nalgebra::center(&b.min, &b.max)).collect();
        let mut order: Vec<u32> = (0..faces.len() as u32).collect();
        let mut nodes = Vec::new();
        build_node(&mut nodes, &mut order, 0, faces.len(), &boxes, &centers);
        Bvh { nodes, order }
    }

    /// Closest triangle hit with `t` in `(t_min, t_max)`.
    pub fn raycast(
        &self,
        vertices: &[Pt3],
        faces: &[[u32; 3]],
        origin: &Pt3,
        dir: &Vec3,
        t_min: f64,
        t_max: f64,
    ) -> Option<TriHit> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut best: Option<TriHit> = None;
        let mut limit = t_max;
        let mut stack = vec![0u32];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            if node.bounds.ray_entry(origin, &inv, limit).is_none() {
                continue;
            }
            if node.count > 0 {
                for slot in node.start..node.start + node.count {
                    let face = self.order[slot as usize] as usize;
                    let tri = faces[face].map(|i| vertices[i as usize]);
                    if let Some(t) = ray_triangle(origin, dir, &tri) {
                        let better = match best {
                            None => true,
                            Some(b) => t < b.t || (t == b.t && face < b.face),
                        };
                        if t > t_min && t <= limit && better {
                            best = Some(TriHit { t, face });
                            limit = t;
                        }
                    }
                }
            } else {
                stack.push(node.left);
                stack.push(node.right);
            }
        }
        best
    }

    /// Calls `visit` for every triangle whose bounds overlap `query`; stops
    /// early when `visit` returns true. Returns whether it stopped early.
    pub fn any_overlapping(&self, query: &Aabb, mut visit: impl FnMut(usize) -> bool) -> bool {
        if self.nodes.is_empty() {
            return false;
        }
        let mut stack = vec![0u32];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            if !node.bounds.overlaps(query) {
                continue;
            }
            if node.count > 0 {
                for slot in node.start..node.start + node.count {
                    if visit(self.order[slot as usize] as usize) {
                        return true;
                    }
                }
            } else {
                stack.push(node.left);
                stack.push(node.right);
            }
        }
        false
    }
}

fn build_node(
    nodes: &mut Vec<Node>,
    order: &mut [u32],
    start: usize,
    end: usize,
    boxes: &[Aabb],
    centers: &[Pt3],
) -> u32 {
    let mut bounds = Aabb::empty();
    let mut cb = Aabb::empty();
    for &f in &order[start..end] {
        bounds.merge(&boxes[f as usize]);
        cb.grow(&centers[f as usize]);
    }
    let idx = nodes.len() as u32;
    nodes.push(Node {
        bounds,
        start: start as u32,
        count: (end - start) as u32,
        left: 0,
        right: 0,
    });
    if end - start <= LEAF_SIZE {
        return idx;
    }
    let ext = cb.max - cb.min;
    let axis = if ext.x >= ext.y && ext.x >= ext.z {
        0
    } else if ext.y >= ext.z {
        1
    } else {
        2
    };
    let mid = (start + end) / 2;
    order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
        centers[a as usize][axis]
            .total_cmp(&centers[b as usize][axis])
            .then(a.cmp(&b))
    });
    let left = build_node(nodes, order, start, mid, boxes, centers);
    let right = build_node(nodes, order, mid, end, boxes, centers);
    let node = &mut nodes[idx as usize];
    node.count = 0;
    node.left = left;
    node.right = right;
    idx
}

/// Möller–Trumbore intersection, two-sided. Returns the ray parameter.
pub(crate) fn ray_triangle(origin: &Pt3, dir: &Vec3, tri: &[Pt3; 3]) -> Option<f64> {
    const EDGE_TOL: f64 = 1e-12;
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-300 {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - tri[0];
    let u = s.dot(&p) * inv;
    if !(-EDGE_TOL..=1.0 + EDGE_TOL).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < -EDGE_TOL || u + v > 1.0 + EDGE_TOL {
        return None;
    }
    let t = e2.dot(&q) * inv;
    t.is_finite().then_some(t)
}
