use nalgebra::Matrix3;

use crate::basis::{wachspress_eval, BasisEval, LocalPolygon, Point2};
use crate::error::{Error, Result};
use crate::mesh::{scaling_centre, Mesh, Point3, Vector3};

/// Boundary Jacobian and gradient vectors at one face point.
#[derive(Clone, Debug, PartialEq)]
pub struct FaceGeometryAtPoint {
    /// Rows `x̂`, `x̂,η`, `x̂,ζ`.
    pub jb: Matrix3<f64>,
    pub det_jb: f64,
    pub b1: Vector3,
    pub b2: Vector3,
    pub b3: Vector3,
}

/// Geometry at `qp` of a face whose nodes sit at `coords` (relative to the
/// scaling centre), interpolated with the Wachspress basis of `poly`.
pub fn face_geometry(
    poly: &LocalPolygon,
    coords: &[Vector3],
    qp: &Point2,
) -> Result<(FaceGeometryAtPoint, BasisEval)> {
    let basis = wachspress_eval(poly, qp)?;
    let mut x = Vector3::zeros();
    let mut x_eta = Vector3::zeros();
    let mut x_zeta = Vector3::zeros();
    for (i, c) in coords.iter().enumerate() {
        x += c * basis.n[i];
        x_eta += c * basis.dn_deta[i];
        x_zeta += c * basis.dn_dzeta[i];
    }
    let jb = Matrix3::from_rows(&[x.transpose(), x_eta.transpose(), x_zeta.transpose()]);
    let g1 = x_eta.cross(&x_zeta);
    let det = x.dot(&g1);
    if det.is_nan() || det <= 0.0 {
        return Err(Error::Orientation {
            element: 0,
            face: 0,
            detail: format!("boundary Jacobian determinant {det:.3e} is not positive"),
        });
    }
    let geo = FaceGeometryAtPoint {
        jb,
        det_jb: det,
        b1: g1 / det,
        b2: x_zeta.cross(&x) / det,
        b3: x.cross(&x_eta) / det,
    };
    Ok((geo, basis))
}

/// One face of an element in normalized element coordinates.
#[derive(Clone, Debug)]
pub struct ElementFace {
    pub face: usize,
    pub poly: LocalPolygon,
    /// Node positions relative to the scaling centre, divided by the scale.
    pub coords: Vec<Vector3>,
    /// Element-local index of each face node.
    pub local_nodes: Vec<usize>,
}

/// Normalized geometry of one polyhedral element.
#[derive(Clone, Debug)]
pub struct ElementGeometry {
    pub element: usize,
    pub centre: Point3,
    pub scale: f64,
    pub volume: f64,
    /// Global node ids; position is the element-local index.
    pub nodes: Vec<usize>,
    pub faces: Vec<ElementFace>,
}

impl ElementGeometry {
    pub fn to_normalized(&self, p: &Point3) -> Vector3 {
        (p - self.centre) / self.scale
    }

    pub fn to_global(&self, v: &Vector3) -> Point3 {
        self.centre + v * self.scale
    }
}

pub fn element_geometry(mesh: &Mesh, element: usize) -> Result<ElementGeometry> {
    let centre = scaling_centre(mesh, element)?;
    let volume = mesh.element_volume(element);
    let scale = volume.cbrt();
    let nodes = mesh.element_nodes(element);
    let local: std::collections::HashMap<usize, usize> =
        nodes.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    let mut faces = Vec::with_capacity(mesh.elements[element].faces.len());
    for fr in &mesh.elements[element].faces {
        let loop_nodes = mesh.oriented_loop(*fr);
        let coords: Vec<Vector3> = loop_nodes
            .iter()
            .map(|&n| (mesh.nodes[n] - centre) / scale)
            .collect();
        let pts: Vec<Point3> = coords.iter().map(|c| Point3::from(*c)).collect();
        let poly = LocalPolygon::from_points(&pts).map_err(|e| Error::DegenerateElement {
            element,
            detail: format!("face {}: {e}", fr.face),
        })?;
        faces.push(ElementFace {
            face: fr.face,
            poly,
            coords,
            local_nodes: loop_nodes.iter().map(|n| local[n]).collect(),
        });
    }
    Ok(ElementGeometry {
        element,
        centre,
        scale,
        volume,
        nodes,
        faces,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube_face() -> (LocalPolygon, Vec<Vector3>) {
        // Face x = +0.5 of [-0.5, 0.5]³ with (η, ζ) ∈ [-1, 1]² mapping to y, z.
        let poly = LocalPolygon::planar(vec![
            Point2::new(-1.0, -1.0),
            Point2::new(1.0, -1.0),
            Point2::new(1.0, 1.0),
            Point2::new(-1.0, 1.0),
        ]);
        let coords = vec![
            Vector3::new(0.5, -0.5, -0.5),
            Vector3::new(0.5, 0.5, -0.5),
            Vector3::new(0.5, 0.5, 0.5),
            Vector3::new(0.5, -0.5, 0.5),
        ];
        (poly, coords)
    }

    #[test]
    fn cube_face_jacobian() {
        let (poly, coords) = cube_face();
        let (g, _) = face_geometry(&poly, &coords, &Point2::origin()).unwrap();
        assert!((g.jb - Matrix3::from_diagonal_element(0.5)).norm() < 1e-15);
        assert!((g.det_jb - 0.125).abs() < 1e-15);
        // b vectors are the columns of Jb⁻¹.
        let inv = g.jb.try_inverse().unwrap();
        assert!((inv.column(0) - g.b1).norm() < 1e-14);
        assert!((inv.column(1) - g.b2).norm() < 1e-14);
        assert!((inv.column(2) - g.b3).norm() < 1e-14);
    }

    #[test]
    fn first_row_is_interpolated_position() {
        let (poly, coords) = cube_face();
        let qp = Point2::new(0.3, -0.6);
        let (g, _) = face_geometry(&poly, &coords, &qp).unwrap();
        let p = Vector3::new(0.5, 0.15, -0.3);
        assert!((g.jb.row(0).transpose() - p).norm() < 1e-15);
    }

    #[test]
    fn reversed_winding_is_orientation_error() {
        let (_, mut coords) = cube_face();
        coords.reverse();
        let pts: Vec<Point3> = coords.iter().map(|c| Point3::from(*c)).collect();
        let poly = LocalPolygon::from_points(&pts).unwrap();
        let qp = poly.centroid();
        assert!(matches!(
            face_geometry(&poly, &coords, &qp),
            Err(Error::Orientation { .. })
        ));
    }
}
