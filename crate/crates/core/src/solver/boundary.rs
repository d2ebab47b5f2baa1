use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::basis::{subdivided_rule, wachspress_eval, LocalPolygon};
use crate::error::{Error, Result};
use crate::mesh::{FaceRef, Mesh, Point3};

/// Prescribed head: a constant or a `(time, head)` table interpolated
/// linearly and held constant outside its range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HeadValue {
    Constant(f64),
    Series(Vec<(f64, f64)>),
}

impl HeadValue {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            HeadValue::Constant(h) => *h,
            HeadValue::Series(rows) => {
                let Some(first) = rows.first() else {
                    return f64::NAN;
                };
                if t <= first.0 {
                    return first.1;
                }
                for w in rows.windows(2) {
                    let ((t0, h0), (t1, h1)) = (w[0], w[1]);
                    if t <= t1 {
                        if t1 == t0 {
                            return h1;
                        }
                        return h0 + (h1 - h0) * (t - t0) / (t1 - t0);
                    }
                }
                rows.last().unwrap().1
            }
        }
    }

    fn validate(&self, set: &str) -> Result<()> {
        match self {
            HeadValue::Constant(h) if h.is_finite() => Ok(()),
            HeadValue::Series(rows)
                if !rows.is_empty() && rows.windows(2).all(|w| w[1].0 >= w[0].0) =>
            {
                Ok(())
            }
            _ => Err(Error::Config(format!(
                "dirichlet set {set}: head must be finite or a time-sorted table"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirichletSpec {
    pub node_set: String,
    pub head: HeadValue,
}

/// Normal flux into the domain (m/s) over a boundary face set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluxSpec {
    pub face_set: String,
    pub flux: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monitor {
    pub label: String,
    pub point: [f64; 3],
}

impl Monitor {
    pub fn new(label: &str, p: [f64; 3]) -> Self {
        Self {
            label: label.into(),
            point: p,
        }
    }

    pub fn point(&self) -> Point3 {
        Point3::from(self.point)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundarySpec {
    pub dirichlet: Vec<DirichletSpec>,
    pub flux: Vec<FluxSpec>,
    pub monitors: Vec<Monitor>,
}

/// Node → prescribed head.
pub type Constraints = BTreeMap<usize, f64>;

/// Evaluates every Dirichlet set at time `t`. A node may appear in several
/// sets only if they agree on its head.
pub fn resolve_dirichlet(mesh: &Mesh, bc: &BoundarySpec, t: f64) -> Result<Constraints> {
    let mut out = Constraints::new();
    for d in &bc.dirichlet {
        d.head.validate(&d.node_set)?;
        let nodes = mesh
            .node_sets
            .get(&d.node_set)
            .ok_or_else(|| Error::Config(format!("unknown node set {}", d.node_set)))?;
        let h = d.head.at(t);
        for &n in nodes {
            if let Some(old) = out.insert(n, h) {
                if (old - h).abs() > 1e-12 * old.abs().max(h.abs()).max(1.0) {
                    return Err(Error::Config(format!(
                        "node {n} is prescribed both {old} and {h} at t = {t}"
                    )));
                }
            }
        }
    }
    Ok(out)
}

/// `∫ N_i dA` for each node of a face.
pub fn face_node_integrals(
    mesh: &Mesh,
    face: usize,
    gauss_order: usize,
) -> Result<Vec<(usize, f64)>> {
    let fr = FaceRef::new(face, false);
    let pts = mesh.face_points(fr);
    let poly = LocalPolygon::from_points(&pts)?;
    let rule = subdivided_rule(&poly, gauss_order, 1)?;
    let nodes = mesh.oriented_loop(fr);
    let mut acc = vec![0.0; nodes.len()];
    for (qp, w) in rule.points.iter().zip(&rule.weights) {
        let b = wachspress_eval(&poly, qp)?;
        for (a, n) in acc.iter_mut().zip(&b.n) {
            *a += w * n;
        }
    }
    Ok(nodes.into_iter().zip(acc).collect())
}

/// Nodal inflow from prescribed boundary fluxes.
pub fn flux_load(mesh: &Mesh, bc: &BoundarySpec) -> Result<Vec<f64>> {
    let mut f = vec![0.0; mesh.num_nodes()];
    for spec in &bc.flux {
        let faces = mesh
            .face_sets
            .get(&spec.face_set)
            .ok_or_else(|| Error::Config(format!("unknown face set {}", spec.face_set)))?;
        for &face in faces {
            for (n, a) in face_node_integrals(mesh, face, 3)? {
                f[n] += spec.flux * a;
            }
        }
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{box_grid, Aabb};

    #[test]
    fn series_interpolation_and_hold() {
        let h = HeadValue::Series(vec![(0.0, 1.0), (10.0, 4.0)]);
        assert_eq!(h.at(-1.0), 1.0);
        assert!((h.at(5.0) - 2.5).abs() < 1e-15);
        assert_eq!(h.at(20.0), 4.0);
        assert_eq!(HeadValue::Constant(3.0).at(7.0), 3.0);
    }

    #[test]
    fn conflicting_sets_rejected() {
        let mut mesh = box_grid(Aabb::new([0.0; 3], [1.0; 3]), [1, 1, 1]);
        let top = mesh.select_nodes(|p| p.z > 0.5);
        let side = mesh.select_nodes(|p| p.x > 0.5);
        mesh.node_sets.insert("top".into(), top);
        mesh.node_sets.insert("side".into(), side);
        let bc = |a, b| BoundarySpec {
            dirichlet: vec![
                DirichletSpec {
                    node_set: "top".into(),
                    head: HeadValue::Constant(a),
                },
                DirichletSpec {
                    node_set: "side".into(),
                    head: HeadValue::Constant(b),
                },
            ],
            ..Default::default()
        };
        assert_eq!(
            resolve_dirichlet(&mesh, &bc(1.0, 1.0), 0.0).unwrap().len(),
            6
        );
        assert!(matches!(
            resolve_dirichlet(&mesh, &bc(1.0, 2.0), 0.0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn face_integrals_sum_to_area() {
        let mesh = box_grid(Aabb::new([0.0; 3], [2.0, 1.0, 1.0]), [1, 1, 1]);
        for f in 0..mesh.faces.len() {
            let s: f64 = face_node_integrals(&mesh, f, 3)
                .unwrap()
                .iter()
                .map(|x| x.1)
                .sum();
            let area = crate::mesh::polygon_area(&mesh.face_points(FaceRef::new(f, false)));
            assert!((s - area).abs() < 1e-14);
        }
    }
}
