//! Parametric benchmark problems: the affine patch, the concrete dam
//! foundation, the rectangular dam and a one-dimensional column.

use crate::error::Result;
use crate::mesh::{
    box_grid, extrude_polygons, hexagonal_tiling, octree_refine_box, rectilinear_grid,
    stacked_column, Aabb, Mesh, MeshBuilder, Point3,
};
use crate::solver::{BoundarySpec, DirichletSpec, HeadValue, Material, Monitor};

/// Mesh, per-element materials and boundary data of a steady problem.
#[derive(Clone, Debug)]
pub struct Problem {
    pub mesh: Mesh,
    pub materials: Vec<Material>,
    pub bc: BoundarySpec,
}

fn dirichlet(set: &str, h: f64) -> DirichletSpec {
    DirichletSpec {
        node_set: set.into(),
        head: HeadValue::Constant(h),
    }
}

/// Side of the square patch cross-section (m).
pub const PATCH_WIDTH: f64 = 1.25;

/// Linear head of the patch test: 30 m at z = 0 rising to 70 m at z = 3.
pub fn patch_exact(p: &Point3) -> f64 {
    30.0 + 40.0 * p.z / 3.0
}

/// Four hexahedra under one nine-faced polyhedron in a 1.25 × 1.25 × 3 m
/// prism. The interface between them dips to an interior apex at z = 2.
pub fn patch_test() -> Problem {
    let w = PATCH_WIDTH;
    let c = w / 2.0;
    let mut nodes = Vec::new();
    // Bottom 3×3 grid, interface 3×3 grid, top corners.
    for j in 0..3 {
        for i in 0..3 {
            nodes.push(Point3::new(i as f64 * c, j as f64 * c, 0.0));
        }
    }
    for j in 0..3 {
        for i in 0..3 {
            let off = (i != 1) as usize + (j != 1) as usize;
            nodes.push(Point3::new(
                i as f64 * c,
                j as f64 * c,
                2.0 + 0.25 * off as f64,
            ));
        }
    }
    for (x, y) in [(0.0, 0.0), (w, 0.0), (w, w), (0.0, w)] {
        nodes.push(Point3::new(x, y, 3.0));
    }
    let bot = |i: usize, j: usize| j * 3 + i;
    let mid = |i: usize, j: usize| 9 + j * 3 + i;
    let mut b = MeshBuilder::new(nodes);
    for (i, j) in [(0, 0), (1, 0), (1, 1), (0, 1)] {
        let l = [bot(i, j), bot(i + 1, j), bot(i + 1, j + 1), bot(i, j + 1)];
        let u = [mid(i, j), mid(i + 1, j), mid(i + 1, j + 1), mid(i, j + 1)];
        let mut loops = vec![l.to_vec(), u.to_vec()];
        for k in 0..4 {
            loops.push(vec![l[k], l[(k + 1) % 4], u[(k + 1) % 4], u[k]]);
        }
        b.add_element(loops);
    }
    let top = [18, 19, 20, 21];
    let mut loops: Vec<Vec<usize>> = vec![top.to_vec()];
    for (i, j) in [(0, 0), (1, 0), (1, 1), (0, 1)] {
        loops.push(vec![
            mid(i, j),
            mid(i + 1, j),
            mid(i + 1, j + 1),
            mid(i, j + 1),
        ]);
    }
    loops.push(vec![mid(0, 0), mid(1, 0), mid(2, 0), 19, 18]);
    loops.push(vec![mid(2, 0), mid(2, 1), mid(2, 2), 20, 19]);
    loops.push(vec![mid(2, 2), mid(1, 2), mid(0, 2), 21, 20]);
    loops.push(vec![mid(0, 2), mid(0, 1), mid(0, 0), 18, 21]);
    b.add_element(loops);
    let mut mesh = b.finish();
    let top = mesh.select_nodes(|p| (p.z - 3.0).abs() < 1e-12);
    let bottom = mesh.select_nodes(|p| p.z.abs() < 1e-12);
    mesh.node_sets.insert("top".into(), top);
    mesh.node_sets.insert("bottom".into(), bottom);
    let materials = vec![Material::isotropic("soil", 1e-5, 0.0); mesh.num_elements()];
    let bc = BoundarySpec {
        dirichlet: vec![dirichlet("top", 70.0), dirichlet("bottom", 30.0)],
        monitors: vec![Monitor::new("apex", [c, c, 2.0])],
        ..Default::default()
    };
    Problem {
        mesh,
        materials,
        bc,
    }
}

/// Concrete dam foundation block: x ∈ [0, 240], y ∈ [0, 160], z ∈ [0, depth].
pub const DAM_LENGTH: f64 = 240.0;
pub const DAM_WIDTH: f64 = 160.0;
/// Depth at which the monitor heads of the reference solution are 60 and
/// 40 m.
pub const DAM_DEPTH: f64 = 55.1786;
pub const DAM_UPSTREAM: (f64, f64) = (80.0, 80.0);
pub const DAM_DOWNSTREAM: (f64, f64) = (160.0, 20.0);
/// Monitor points and their reference heads (m).
pub const DAM_MONITORS: [(&str, [f64; 3], f64); 2] = [
    ("m1", [100.0, 80.0, 40.0], 60.0),
    ("m2", [140.0, 80.0, 40.0], 40.0),
];
/// Isotropic conductivity, 1e-5 cm/s.
pub const DAM_K: f64 = 1e-7;

fn dam_problem(mut mesh: Mesh) -> Problem {
    let tol = 1e-6;
    let up = mesh.select_nodes(|p| (p.z - DAM_DEPTH).abs() < tol && p.x <= DAM_UPSTREAM.0 + tol);
    let down =
        mesh.select_nodes(|p| (p.z - DAM_DEPTH).abs() < tol && p.x >= DAM_DOWNSTREAM.0 - tol);
    mesh.node_sets.insert("upstream".into(), up);
    mesh.node_sets.insert("downstream".into(), down);
    let materials = vec![Material::isotropic("rock", DAM_K, 0.0); mesh.num_elements()];
    let bc = BoundarySpec {
        dirichlet: vec![
            dirichlet("upstream", DAM_UPSTREAM.1),
            dirichlet("downstream", DAM_DOWNSTREAM.1),
        ],
        monitors: DAM_MONITORS
            .iter()
            .map(|(l, p, _)| Monitor::new(l, *p))
            .collect(),
        ..Default::default()
    };
    Problem {
        mesh,
        materials,
        bc,
    }
}

/// Hexagonal prisms of width `size` extruded in y with layers `size` apart.
pub fn concrete_dam_polyhedral(size: f64) -> Problem {
    let rows = (DAM_DEPTH / (size * 0.866)).round().max(1.0) as usize;
    let section = hexagonal_tiling((0.0, DAM_LENGTH), (0.0, DAM_DEPTH), size, rows);
    let ny = (DAM_WIDTH / size).round().max(1.0) as usize;
    let layers: Vec<f64> = (0..=ny).map(|j| DAM_WIDTH * j as f64 / ny as f64).collect();
    dam_problem(extrude_polygons(&section, &layers))
}

/// Uniform hexahedra of roughly `size` in x and z; `ny` layers in y.
pub fn concrete_dam_hex(size: f64, ny: usize) -> Problem {
    let nx = (DAM_LENGTH / size).round() as usize;
    let nz = (DAM_DEPTH / size).round().max(1.0) as usize;
    dam_problem(box_grid(
        Aabb::new([0.0; 3], [DAM_LENGTH, DAM_WIDTH, DAM_DEPTH]),
        [nx, ny, nz],
    ))
}

/// 20 m base cells refined `levels` times inside `region`. The solution does
/// not vary in y, so cells may be long in y (`ny` base cells).
pub fn concrete_dam_octree(levels: usize, ny: usize, region: Aabb) -> Result<Problem> {
    let domain = Aabb::new([0.0; 3], [DAM_LENGTH, DAM_WIDTH, DAM_DEPTH]);
    let nz = (DAM_DEPTH / 20.0).round() as usize;
    Ok(dam_problem(octree_refine_box(
        domain,
        [12, ny, nz],
        region,
        levels,
    )?))
}

/// Rectangular dam section `[0, width] × [0, thickness] × [0, height]` on a
/// rectilinear grid that is `refine` times finer inside
/// `z ∈ [z_band, height]` and `x ≥ x_band`.
pub fn rectangular_dam_mesh(
    width: f64,
    height: f64,
    n: usize,
    refine: usize,
    x_band: f64,
    z_band: f64,
) -> Mesh {
    let graded = |lo: f64, hi: f64, band: f64| {
        let mut v = Vec::new();
        let coarse = (hi - lo) / n as f64;
        let fine = coarse / refine as f64;
        let mut x = lo;
        v.push(x);
        while x < hi - 1e-12 {
            let step = if x >= band - 1e-12 {
                fine
            } else {
                coarse.min(band - x).max(fine)
            };
            x = (x + step).min(hi);
            v.push(x);
        }
        v
    };
    let xs = graded(0.0, width, x_band);
    let zs = graded(0.0, height, z_band);
    let t = (xs[xs.len() - 1] - xs[xs.len() - 2]).max(1e-3);
    let mut mesh = rectilinear_grid(&xs, &[0.0, t], &zs);
    let tol = 1e-9;
    let upstream = mesh.select_nodes(|p| p.x.abs() < tol);
    let downstream = mesh.select_nodes(|p| (p.x - width).abs() < tol);
    mesh.node_sets.insert("upstream_face".into(), upstream);
    mesh.node_sets.insert("downstream_face".into(), downstream);
    mesh
}

/// `n` unit cubes stacked in z, bottom fixed at `h0` and top at `h1`.
pub fn column(n: usize, k: f64, ss: f64, h0: f64, h1: HeadValue) -> Problem {
    let mut mesh = stacked_column(n);
    let top = mesh.select_nodes(|p| (p.z - n as f64).abs() < 1e-12);
    let bottom = mesh.select_nodes(|p| p.z.abs() < 1e-12);
    mesh.node_sets.insert("top".into(), top);
    mesh.node_sets.insert("bottom".into(), bottom);
    let materials = vec![Material::isotropic("soil", k, ss); n];
    let bc = BoundarySpec {
        dirichlet: vec![
            dirichlet("bottom", h0),
            DirichletSpec {
                node_set: "top".into(),
                head: h1,
            },
        ],
        monitors: (1..n)
            .map(|i| Monitor::new(&format!("z{i}"), [0.5, 0.5, i as f64]))
            .collect(),
        ..Default::default()
    };
    Problem {
        mesh,
        materials,
        bc,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::validate_mesh;

    #[test]
    fn patch_mesh_shape() {
        let p = patch_test();
        assert!(
            validate_mesh(&p.mesh).is_empty(),
            "{}",
            validate_mesh(&p.mesh)
        );
        assert_eq!(p.mesh.num_nodes(), 22);
        assert_eq!(p.mesh.num_elements(), 5);
        assert_eq!(p.mesh.elements[4].faces.len(), 9);
        let v: f64 = (0..5).map(|e| p.mesh.element_volume(e)).sum();
        assert!((v - PATCH_WIDTH * PATCH_WIDTH * 3.0).abs() < 1e-12);
    }

    #[test]
    fn dam_meshes_are_valid() {
        for p in [concrete_dam_polyhedral(20.0), concrete_dam_hex(20.0, 2)] {
            assert!(validate_mesh(&p.mesh).is_empty());
            assert!(!p.mesh.node_sets["upstream"].is_empty());
            assert!(!p.mesh.node_sets["downstream"].is_empty());
        }
    }

    #[test]
    fn graded_rectangle() {
        let m = rectangular_dam_mesh(0.5, 1.0, 10, 4, 0.4, 0.5);
        assert!(validate_mesh(&m).is_empty());
        let v: f64 = (0..m.num_elements()).map(|e| m.element_volume(e)).sum();
        let t = m.bounding_box().extent(1);
        assert!((v - 0.5 * t).abs() < 1e-12);
    }
}
