use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{Matrix3, Matrix4};

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point3, Vector3};
use crate::solver::{
    solve_constrained, BoundarySpec, Constraints, CsrMatrix, FieldResult, LinearSolver, Material,
    MonitorHistory,
};

/// Linear tetrahedral mesh derived from a polyhedral one by connecting each
/// element's centroid with its faces, which are fanned from their centroids.
#[derive(Clone, Debug, Default)]
pub struct TetMesh {
    pub nodes: Vec<Point3>,
    pub tets: Vec<[usize; 4]>,
    /// Source polyhedron of each tet.
    pub parent: Vec<usize>,
    /// Inherited node sets; a face centroid joins a set when all the face's
    /// vertices are in it.
    pub node_sets: BTreeMap<String, Vec<usize>>,
    /// Triangles covering each polygon face.
    pub face_triangles: Vec<Vec<[usize; 3]>>,
}

impl TetMesh {
    pub fn from_polyhedral(mesh: &Mesh) -> Self {
        let mut nodes = mesh.nodes.clone();
        let mut face_centre = Vec::with_capacity(mesh.faces.len());
        let mut face_triangles = Vec::with_capacity(mesh.faces.len());
        for (f, face) in mesh.faces.iter().enumerate() {
            if face.len() == 3 {
                face_centre.push(None);
                face_triangles.push(vec![[face.nodes[0], face.nodes[1], face.nodes[2]]]);
                continue;
            }
            nodes.push(mesh.face_centroid(f));
            let c = nodes.len() - 1;
            face_centre.push(Some(c));
            let l = &face.nodes;
            face_triangles.push(
                (0..l.len())
                    .map(|i| [c, l[i], l[(i + 1) % l.len()]])
                    .collect(),
            );
        }
        let mut tets = Vec::new();
        let mut parent = Vec::new();
        for e in 0..mesh.num_elements() {
            let (_, centroid) = mesh.element_volume_centroid(e);
            nodes.push(centroid);
            let c = nodes.len() - 1;
            for fr in &mesh.elements[e].faces {
                for t in &face_triangles[fr.face] {
                    tets.push([c, t[0], t[1], t[2]]);
                    parent.push(e);
                }
            }
        }
        let mut node_sets = mesh.node_sets.clone();
        for set in node_sets.values_mut() {
            let members: BTreeSet<usize> = set.iter().copied().collect();
            for (f, face) in mesh.faces.iter().enumerate() {
                if let Some(c) = face_centre[f] {
                    if face.nodes.iter().all(|n| members.contains(n)) {
                        set.push(c);
                    }
                }
            }
        }
        Self {
            nodes,
            tets,
            parent,
            node_sets,
            face_triangles,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    fn points(&self, t: usize) -> [Point3; 4] {
        self.tets[t].map(|n| self.nodes[n])
    }

    /// Containing tet and barycentric coordinates of `p`.
    pub fn locate(&self, p: &Point3) -> Option<(usize, [f64; 4])> {
        let mut best: Option<(usize, [f64; 4], f64)> = None;
        for t in 0..self.tets.len() {
            let Some(b) = barycentric(&self.points(t), p) else {
                continue;
            };
            let worst = b.iter().copied().fold(f64::INFINITY, f64::min);
            if worst >= -1e-9 {
                return Some((t, b));
            }
            if best.as_ref().is_none_or(|x| worst > x.2) {
                best = Some((t, b, worst));
            }
        }
        best.filter(|x| x.2 > -1e-6).map(|x| (x.0, x.1))
    }
}

fn barycentric(p: &[Point3; 4], x: &Point3) -> Option<[f64; 4]> {
    let j = Matrix3::from_columns(&[p[1] - p[0], p[2] - p[0], p[3] - p[0]]);
    let l = j.try_inverse()? * (x - p[0]);
    Some([1.0 - l.sum(), l[0], l[1], l[2]])
}

/// Gradients of the barycentric coordinates and the volume of a tet.
fn shape_gradients(p: &[Point3; 4]) -> Result<([Vector3; 4], f64)> {
    let j = Matrix3::from_columns(&[p[1] - p[0], p[2] - p[0], p[3] - p[0]]);
    let vol = j.determinant().abs() / 6.0;
    let scale = (p[1] - p[0])
        .norm()
        .max((p[2] - p[0]).norm())
        .max((p[3] - p[0]).norm());
    if vol <= 1e-14 * scale.powi(3) {
        return Err(Error::Solver("degenerate tetrahedron".into()));
    }
    let inv = j
        .try_inverse()
        .ok_or_else(|| Error::Solver("degenerate tetrahedron".into()))?;
    let g1 = inv.row(0).transpose();
    let g2 = inv.row(1).transpose();
    let g3 = inv.row(2).transpose();
    Ok(([-(g1 + g2 + g3), g1, g2, g3], vol))
}

/// Conductance `V Gᵀ k G` of one linear tet.
pub fn tet_stiffness(p: &[Point3; 4], k: &Matrix3<f64>) -> Result<Matrix4<f64>> {
    let (g, vol) = shape_gradients(p)?;
    Ok(Matrix4::from_fn(|i, j| vol * g[i].dot(&(k * g[j]))))
}

/// Consistent storage matrix of one linear tet.
pub fn tet_mass(p: &[Point3; 4], ss: f64) -> Result<Matrix4<f64>> {
    let (_, vol) = shape_gradients(p)?;
    Ok(Matrix4::from_fn(|i, j| {
        ss * vol / 20.0 * if i == j { 2.0 } else { 1.0 }
    }))
}

/// Assembled P1 conductance and storage.
pub fn assemble_tets(tm: &TetMesh, materials: &[Material]) -> Result<(CsrMatrix, CsrMatrix)> {
    let (mut kt, mut mt) = (Vec::new(), Vec::new());
    for (t, nodes) in tm.tets.iter().enumerate() {
        let mat = materials
            .get(tm.parent[t])
            .ok_or_else(|| Error::Config(format!("no material for element {}", tm.parent[t])))?;
        let p = tm.points(t);
        let ke = tet_stiffness(&p, &mat.k)?;
        let me = tet_mass(&p, mat.ss)?;
        for i in 0..4 {
            for j in 0..4 {
                kt.push((nodes[i], nodes[j], ke[(i, j)]));
                mt.push((nodes[i], nodes[j], me[(i, j)]));
            }
        }
    }
    let n = tm.num_nodes();
    Ok((
        CsrMatrix::from_triplets(n, kt),
        CsrMatrix::from_triplets(n, mt),
    ))
}

/// Steady P1 solution on the tetrahedralized mesh with the same boundary
/// data as the polyhedral problem.
pub fn tet_fem_solve(
    mesh: &Mesh,
    materials: &[Material],
    bc: &BoundarySpec,
    solver: LinearSolver,
) -> Result<(TetMesh, FieldResult)> {
    let tm = TetMesh::from_polyhedral(mesh);
    let (k, _) = assemble_tets(&tm, materials)?;
    let mut constraints = Constraints::new();
    for d in &bc.dirichlet {
        let set = tm
            .node_sets
            .get(&d.node_set)
            .ok_or_else(|| Error::Config(format!("unknown node set '{}'", d.node_set)))?;
        let v = d.head.at(0.0);
        for &n in set {
            if let Some(old) = constraints.insert(n, v) {
                if old != v {
                    return Err(Error::Config(format!("conflicting heads at node {n}")));
                }
            }
        }
    }
    if constraints.is_empty() {
        return Err(Error::Solver(
            "steady problem needs at least one prescribed head".into(),
        ));
    }
    let mut load = vec![0.0; tm.num_nodes()];
    for fl in &bc.flux {
        let faces = mesh
            .face_sets
            .get(&fl.face_set)
            .ok_or_else(|| Error::Config(format!("unknown face set '{}'", fl.face_set)))?;
        for &f in faces {
            for tri in &tm.face_triangles[f] {
                let [a, b, c] = tri.map(|n| tm.nodes[n]);
                let area = 0.5 * (b - a).cross(&(c - a)).norm();
                for &n in tri {
                    load[n] += fl.flux * area / 3.0;
                }
            }
        }
    }
    let (h, report) = solve_constrained(&k, &load, &constraints, solver)?;
    let mut monitors = Vec::new();
    for m in &bc.monitors {
        let (t, b) = tm.locate(&m.point()).ok_or_else(|| {
            Error::EvaluationDomain(format!("monitor '{}' is outside the mesh", m.label))
        })?;
        let v: f64 = tm.tets[t].iter().zip(b).map(|(&n, w)| w * h[n]).sum();
        monitors.push(MonitorHistory {
            label: m.label.clone(),
            point: m.point,
            values: vec![v],
        });
    }
    let flux = tm
        .tets
        .iter()
        .enumerate()
        .map(|(t, nodes)| {
            let (g, _) = shape_gradients(&tm.points(t))?;
            let grad: Vector3 = nodes.iter().zip(&g).map(|(&n, gi)| gi * h[n]).sum();
            Ok((-(materials[tm.parent[t]].k * grad)).into())
        })
        .collect::<Result<Vec<[f64; 3]>>>()?;
    let result = FieldResult {
        times: vec![0.0],
        heads: vec![h],
        flux: vec![flux],
        monitors,
        report,
    };
    Ok((tm, result))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{box_grid, Aabb};
    use crate::solver::{DirichletSpec, HeadValue, Monitor};

    #[test]
    fn unit_tet_stiffness() {
        let p = [
            Point3::origin(),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.0, 0.0, 1.0),
        ];
        let k = tet_stiffness(&p, &Matrix3::identity()).unwrap();
        // Hand values: V = 1/6, ∇λ₀ = (−1, −1, −1).
        assert!((k[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((k[(1, 1)] - 1.0 / 6.0).abs() < 1e-15);
        assert!((k[(0, 1)] + 1.0 / 6.0).abs() < 1e-15);
        assert!(k[(1, 2)].abs() < 1e-15);
        let m = tet_mass(&p, 1.0).unwrap();
        assert!((m.sum() - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn tetrahedralized_cube_keeps_volume() {
        let mesh = box_grid(Aabb::new([0.0; 3], [2.0, 1.0, 1.0]), [2, 1, 1]);
        let tm = TetMesh::from_polyhedral(&mesh);
        assert_eq!(tm.tets.len(), 48);
        let v: f64 = (0..tm.tets.len())
            .map(|t| shape_gradients(&tm.points(t)).unwrap().1)
            .sum();
        assert!((v - 2.0).abs() < 1e-13);
    }

    #[test]
    fn linear_field_is_exact() {
        let mut mesh = box_grid(Aabb::new([0.0; 3], [1.0; 3]), [2, 2, 2]);
        let top = mesh.select_nodes(|p| (p.z - 1.0).abs() < 1e-12);
        let bottom = mesh.select_nodes(|p| p.z.abs() < 1e-12);
        mesh.node_sets.insert("top".into(), top);
        mesh.node_sets.insert("bottom".into(), bottom);
        let bc = BoundarySpec {
            dirichlet: vec![
                DirichletSpec {
                    node_set: "top".into(),
                    head: HeadValue::Constant(3.0),
                },
                DirichletSpec {
                    node_set: "bottom".into(),
                    head: HeadValue::Constant(1.0),
                },
            ],
            monitors: vec![Monitor::new("m", [0.3, 0.7, 0.45])],
            ..Default::default()
        };
        let mats = vec![Material::isotropic("a", 1e-4, 0.0); 8];
        let (tm, r) = tet_fem_solve(&mesh, &mats, &bc, LinearSolver::Direct).unwrap();
        for (p, h) in tm.nodes.iter().zip(r.last_heads()) {
            assert!((h - (1.0 + 2.0 * p.z)).abs() < 1e-10);
        }
        assert!((r.monitor("m").unwrap().values[0] - 1.9).abs() < 1e-10);
        assert!((r.flux[0][5][2] + 2e-4).abs() < 1e-14);
    }
}
