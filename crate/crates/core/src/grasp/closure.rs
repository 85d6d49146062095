use crate::error::{Error, Result};
use crate::geometry::{Pt3, Vec3};
use crate::mesh::Hit;

/// Two-contact antipodality test: the grasp axis must lie inside both
/// friction cones of half-angle `atan(mu)`. Normals point outward.
pub fn force_closure(c1: &Pt3, c2: &Pt3, n1: &Vec3, n2: &Vec3, mu: f64) -> Result<bool> {
    let d = c2 - c1;
    let len = d.norm();
    if len < 1e-9 {
        return Err(Error::Degenerate("coincident contacts".into()));
    }
    let a = d / len;
    let half_angle = mu.max(0.0).atan() + 1e-12;
    Ok(angle_between(n1, &-a) <= half_angle && angle_between(n2, &a) <= half_angle)
}

fn angle_between(u: &Vec3, v: &Vec3) -> f64 {
    u.cross(v).norm().atan2(u.dot(v))
}

/// Contacts found by two jaws closing toward each other along `axis`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineContacts {
    pub c1: Pt3,
    pub n1: Vec3,
    pub c2: Pt3,
    pub n2: Vec3,
}

impl LineContacts {
    pub fn width(&self) -> f64 {
        (self.c2 - self.c1).norm()
    }
}

/// Closes two jaws that start at `center ∓ half_span·axis` and move toward
/// each other. Returns `None` if either jaw finds no surface, starts inside
/// the object, or the jaws would pass each other.
pub fn contacts_along_line(
    cast: impl Fn(&Pt3, &Vec3) -> Option<Hit>,
    center: &Pt3,
    axis: &Vec3,
    half_span: f64,
) -> Option<LineContacts> {
    let h1 = cast(&(center - axis * half_span), axis)?;
    let h2 = cast(&(center + axis * half_span), &-axis)?;
    if !h1.entering || !h2.entering {
        return None;
    }
    if h1.distance + h2.distance > 2.0 * half_span * (1.0 + 1e-12) {
        return None;
    }
    Some(LineContacts {
        c1: h1.point,
        n1: h1.normal,
        c2: h2.point,
        n2: h2.normal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives;

    #[test]
    fn opposed_faces_are_in_closure() {
        let c1 = Pt3::new(-0.02, 0.0, 0.0);
        let c2 = Pt3::new(0.02, 0.0, 0.0);
        assert!(force_closure(&c1, &c2, &-Vec3::x(), &Vec3::x(), 0.5).unwrap());
    }

    #[test]
    fn forty_five_degrees_exceeds_cone() {
        // atan(0.5) is about 26.57 degrees.
        let c1 = Pt3::new(0.0, 0.0, 0.0);
        let c2 = Pt3::new(1.0, 1.0, 0.0);
        assert!(!force_closure(&c1, &c2, &-Vec3::x(), &Vec3::x(), 0.5).unwrap());
        // Just inside the cone on both sides.
        let a = 26.0f64.to_radians();
        let c2 = Pt3::new(a.cos(), a.sin(), 0.0);
        assert!(force_closure(&c1, &c2, &-Vec3::x(), &Vec3::x(), 0.5).unwrap());
    }

    #[test]
    fn frictionless_limit_with_exact_antipodes() {
        let r = 0.03;
        let c1 = Pt3::new(0.0, 0.0, -r);
        let c2 = Pt3::new(0.0, 0.0, r);
        assert!(force_closure(&c1, &c2, &-Vec3::z(), &Vec3::z(), 1e-12).unwrap());
        assert!(force_closure(&c1, &c2, &-Vec3::z(), &Vec3::z(), 0.0).unwrap());
    }

    #[test]
    fn coincident_contacts_error() {
        let c = Pt3::new(1.0, 2.0, 3.0);
        assert!(force_closure(&c, &c, &Vec3::x(), &-Vec3::x(), 0.5).is_err());
    }

    #[test]
    fn jaws_close_on_cube() {
        let m = primitives::cuboid(0.06, 0.06, 0.06).build().unwrap();
        let cast = |o: &Pt3, d: &Vec3| m.raycast(o, d);
        let lc = contacts_along_line(cast, &Pt3::origin(), &Vec3::x(), 0.04).unwrap();
        assert!((lc.width() - 0.06).abs() < 1e-12);
        assert!((lc.n1 + Vec3::x()).norm() < 1e-12);
        // Jaws starting inside the object.
        assert!(contacts_along_line(cast, &Pt3::origin(), &Vec3::x(), 0.02).is_none());
    }
}
