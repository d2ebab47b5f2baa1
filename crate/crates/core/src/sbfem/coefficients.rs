use nalgebra::{DMatrix, Matrix3};

use super::geometry::{face_geometry, ElementGeometry};
use super::ElementOptions;
use crate::basis::{subdivided_rule, LocalPolygon, QuadratureRule};
use crate::error::{Error, Result};
use crate::mesh::Vector3;

/// Coefficient matrices of one face in face-local node order.
#[derive(Clone, Debug, PartialEq)]
pub struct FaceCoefficients {
    pub e0: DMatrix<f64>,
    pub e1: DMatrix<f64>,
    pub e2: DMatrix<f64>,
    pub m0: DMatrix<f64>,
}

/// Coefficient matrices of one element in element-local node order.
#[derive(Clone, Debug, PartialEq)]
pub struct ElementCoefficients {
    pub e0: DMatrix<f64>,
    pub e1: DMatrix<f64>,
    pub e2: DMatrix<f64>,
    pub m0: DMatrix<f64>,
    /// Element-local node -> global node.
    pub dof_map: Vec<usize>,
}

impl ElementCoefficients {
    pub fn len(&self) -> usize {
        self.e0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.e0.nrows() == 0
    }
}

pub fn face_coefficients(
    poly: &LocalPolygon,
    coords: &[Vector3],
    k: &Matrix3<f64>,
    ss: f64,
    rule: &QuadratureRule,
) -> Result<FaceCoefficients> {
    let n = coords.len();
    let mut e0 = DMatrix::zeros(n, n);
    let mut e1 = DMatrix::zeros(n, n);
    let mut e2 = DMatrix::zeros(n, n);
    let mut m0 = DMatrix::zeros(n, n);
    let mut b1 = DMatrix::zeros(3, n);
    let mut b2 = DMatrix::zeros(3, n);
    let kd = DMatrix::from_iterator(3, 3, k.iter().copied());
    for (qp, w) in rule.points.iter().zip(&rule.weights) {
        let (g, basis) = face_geometry(poly, coords, qp)?;
        for i in 0..n {
            b1.set_column(i, &(g.b1 * basis.n[i]));
            b2.set_column(i, &(g.b2 * basis.dn_deta[i] + g.b3 * basis.dn_dzeta[i]));
        }
        let wd = w * g.det_jb;
        let kb1 = &kd * &b1;
        let kb2 = &kd * &b2;
        e0.gemm_tr(wd, &b1, &kb1, 1.0);
        e1.gemm_tr(wd, &b2, &kb1, 1.0);
        e2.gemm_tr(wd, &b2, &kb2, 1.0);
        for i in 0..n {
            for j in 0..n {
                m0[(i, j)] += wd * ss * basis.n[i] * basis.n[j];
            }
        }
    }
    Ok(FaceCoefficients { e0, e1, e2, m0 })
}

/// Sums face contributions of an element into element-local matrices.
pub fn assemble_element_coeffs(
    geo: &ElementGeometry,
    k: &Matrix3<f64>,
    ss: f64,
    options: &ElementOptions,
) -> Result<ElementCoefficients> {
    let n = geo.nodes.len();
    let mut e0 = DMatrix::zeros(n, n);
    let mut e1 = DMatrix::zeros(n, n);
    let mut e2 = DMatrix::zeros(n, n);
    let mut m0 = DMatrix::zeros(n, n);
    for face in &geo.faces {
        let rule = subdivided_rule(&face.poly, options.gauss_order, options.subdivisions)?;
        let fc =
            face_coefficients(&face.poly, &face.coords, k, ss, &rule).map_err(|e| match e {
                Error::Orientation { detail, .. } => Error::Orientation {
                    element: geo.element,
                    face: face.face,
                    detail,
                },
                other => other,
            })?;
        for (a, &i) in face.local_nodes.iter().enumerate() {
            for (b, &j) in face.local_nodes.iter().enumerate() {
                e0[(i, j)] += fc.e0[(a, b)];
                e1[(i, j)] += fc.e1[(a, b)];
                e2[(i, j)] += fc.e2[(a, b)];
                m0[(i, j)] += fc.m0[(a, b)];
            }
        }
    }
    Ok(ElementCoefficients {
        e0,
        e1,
        e2,
        m0,
        dof_map: geo.nodes.clone(),
    })
}
