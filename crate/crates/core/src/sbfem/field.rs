use nalgebra::DVector;

use super::{CMatrix, ElementOperators, C64};
use crate::basis::{wachspress_eval, Point2};
use crate::error::{Error, Result};
use crate::mesh::Point3;

/// Modal amplitudes `c = Φh⁻¹ h_b` of one element.
#[derive(Clone, Debug)]
pub struct InternalFieldSolution {
    pub c: Vec<C64>,
}

/// Scaled boundary coordinates of a point inside an element.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialSample {
    /// 0 at the scaling centre, 1 on the boundary.
    pub xi: f64,
    /// Position of the face within the element's face list.
    pub face: usize,
    pub eta_zeta: Point2,
}

/// Casts a ray from the scaling centre through `p` and returns where it
/// leaves the element.
pub fn locate_in_element(ops: &ElementOperators, p: &Point3) -> Result<RadialSample> {
    let geo = &ops.geometry;
    let d = geo.to_normalized(p);
    let r = d.norm();
    if r < 1e-13 {
        let poly = &geo.faces[0].poly;
        return Ok(RadialSample {
            xi: 0.0,
            face: 0,
            eta_zeta: poly.centroid(),
        });
    }
    // Boundary point is d/ξ; the exit face maximises (n·d)/(n·x0).
    let mut best: Option<(f64, usize)> = None;
    for (f, face) in geo.faces.iter().enumerate() {
        let dist = face.poly.normal.dot(&face.poly.origin.coords);
        let xi = face.poly.normal.dot(&d) / dist;
        if best.is_none_or(|(b, _)| xi > b) {
            best = Some((xi, f));
        }
    }
    let (xi, f) = best.expect("element has faces");
    if xi > 1.0 + 1e-9 {
        return Err(Error::EvaluationDomain(format!(
            "point ({:.6}, {:.6}, {:.6}) lies outside element {}",
            p.x, p.y, p.z, geo.element
        )));
    }
    let xi = xi.min(1.0);
    let poly = &geo.faces[f].poly;
    let b = d / xi - poly.origin.coords;
    let mut q = Point2::new(b.dot(&poly.axis_eta), b.dot(&poly.axis_zeta));
    // Points on a face edge are pulled a hair inside so the basis is defined.
    let c = poly.centroid();
    let nudge = 1e-10;
    q = q + (c - q) * nudge;
    Ok(RadialSample {
        xi,
        face: f,
        eta_zeta: q,
    })
}

impl InternalFieldSolution {
    pub fn new(ops: &ElementOperators, local_heads: &[f64]) -> Result<Self> {
        let n = ops.modal.len();
        let hb = DVector::from_iterator(n, local_heads.iter().map(|&h| C64::new(h, 0.0)));
        let c = ops
            .modal
            .phi_h
            .clone()
            .lu()
            .solve(&hb)
            .ok_or_else(|| Error::ModalBasis {
                element: ops.geometry.element,
                detail: "singular modal head matrix".into(),
            })?;
        Ok(Self {
            c: c.iter().copied().collect(),
        })
    }

    /// Head at a located point.
    pub fn head(&self, ops: &ElementOperators, s: &RadialSample) -> Result<f64> {
        let face = &ops.geometry.faces[s.face];
        let b = wachspress_eval(&face.poly, &s.eta_zeta)?;
        let phi: &CMatrix = &ops.modal.phi_h;
        let c = nalgebra::DVector::from_column_slice(&self.c);
        let amp = ops.modal.radial(s.xi) * c;
        let mut h = C64::new(0.0, 0.0);
        for (i, ai) in amp.iter().enumerate() {
            let mut ang = C64::new(0.0, 0.0);
            for (a, &node) in face.local_nodes.iter().enumerate() {
                ang += phi[(node, i)] * b.n[a];
            }
            h += ai * ang;
        }
        Ok(h.re)
    }
}

/// Head at `p` inside an element from its nodal heads.
pub fn internal_field(ops: &ElementOperators, local_heads: &[f64], p: &Point3) -> Result<f64> {
    let s = locate_in_element(ops, p)?;
    InternalFieldSolution::new(ops, local_heads)?.head(ops, &s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{box_grid, Aabb};
    use crate::sbfem::{compute_element, ElementOptions};
    use nalgebra::Matrix3;

    fn cube_ops() -> (crate::mesh::Mesh, ElementOperators) {
        let mesh = box_grid(Aabb::new([0.0; 3], [2.0; 3]), [1, 1, 1]);
        let ops = compute_element(
            &mesh,
            0,
            &Matrix3::identity(),
            1.0,
            &ElementOptions::default(),
        )
        .unwrap();
        (mesh, ops)
    }

    #[test]
    fn boundary_values_are_reproduced() {
        let (mesh, ops) = cube_ops();
        let h: Vec<f64> = (0..8).map(|i| i as f64 * 0.7 - 1.0).collect();
        for (i, &n) in ops.nodes().iter().enumerate() {
            let v = internal_field(&ops, &h, &mesh.nodes[n]).unwrap();
            assert!((v - h[i]).abs() < 1e-8, "{v} vs {}", h[i]);
        }
    }

    #[test]
    fn constant_and_linear_fields() {
        let (mesh, ops) = cube_ops();
        let c = vec![3.5; 8];
        assert!(
            (internal_field(&ops, &c, &Point3::new(1.0, 1.0, 1.0)).unwrap() - 3.5).abs() < 1e-10
        );
        assert!(
            (internal_field(&ops, &c, &Point3::new(0.3, 1.7, 0.9)).unwrap() - 3.5).abs() < 1e-10
        );
        let lin: Vec<f64> = ops
            .nodes()
            .iter()
            .map(|&n| mesh.nodes[n].x + 2.0 * mesh.nodes[n].z)
            .collect();
        let p = Point3::new(0.4, 1.3, 1.1);
        assert!((internal_field(&ops, &lin, &p).unwrap() - (0.4 + 2.2)).abs() < 1e-8);
        let centre = internal_field(&ops, &lin, &Point3::new(1.0, 1.0, 1.0)).unwrap();
        assert!((centre - 3.0).abs() < 1e-8);
    }

    #[test]
    fn outside_point_is_rejected() {
        let (_, ops) = cube_ops();
        assert!(matches!(
            locate_in_element(&ops, &Point3::new(3.0, 1.0, 1.0)),
            Err(Error::EvaluationDomain(_))
        ));
    }
}
