use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use psbfem::basis::{wachspress_eval, Point2};
use psbfem::mesh::{box_grid, octree_refine_box, validate_mesh, Aabb};
use psbfem::sbfem::{compute_element, ElementOptions};
use psbfem::solver::{
    assemble_global, solve_steady, BoundarySpec, DirichletSpec, HeadValue, LinearSolver, Material,
};
use psbfem::verification::{random_convex_polygon, random_polyhedron};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wachspress_is_a_nonnegative_partition(seed in any::<u64>(), u in 0.05f64..0.95, w in 0.05f64..0.95) {
        let poly = random_convex_polygon(&mut ChaCha8Rng::seed_from_u64(seed));
        // Point inside the triangle (v0, v1, v2) pulled toward the mean.
        let v = &poly.vertices;
        let (u, w) = if u + w > 1.0 { (1.0 - u, 1.0 - w) } else { (u, w) };
        let p = v[0] + (v[1] - v[0]) * u + (v[2] - v[0]) * w;
        let mean = v.iter().fold(Point2::origin(), |s, q| s + q.coords / v.len() as f64);
        let p = mean + (p - mean) * 0.95;
        let e = wachspress_eval(&poly, &p).unwrap();
        prop_assert!(e.n.iter().all(|&n| n >= 0.0));
        prop_assert!((e.n.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        let gsum: f64 = e.dn_deta.iter().sum::<f64>().abs() + e.dn_dzeta.iter().sum::<f64>().abs();
        prop_assert!(gsum < 1e-10 / poly.diameter());
    }

    #[test]
    fn series_heads_stay_within_table(t in -10.0f64..30.0, a in -5.0f64..5.0, b in -5.0f64..5.0) {
        let h = HeadValue::Series(vec![(0.0, a), (10.0, b), (20.0, a)]);
        let v = h.at(t);
        prop_assert!(v >= a.min(b) - 1e-12 && v <= a.max(b) + 1e-12);
    }

    #[test]
    fn box_grids_are_valid_and_fill_the_box(nx in 1usize..4, ny in 1usize..4, nz in 1usize..4, sx in 0.1f64..10.0) {
        let m = box_grid(Aabb::new([0.0; 3], [sx, 1.0, 2.0]), [nx, ny, nz]);
        prop_assert!(validate_mesh(&m).is_empty());
        let vol: f64 = (0..m.num_elements()).map(|e| m.element_volume(e)).sum();
        prop_assert!((vol - 2.0 * sx).abs() < 1e-10 * sx);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn random_element_stiffness_is_symmetric_with_constant_null_space(seed in any::<u64>(), kx in 0.1f64..10.0) {
        let mesh = random_polyhedron(&mut ChaCha8Rng::seed_from_u64(seed));
        let k = nalgebra::Matrix3::from_diagonal(&nalgebra::Vector3::new(kx, 1.0, 0.5));
        let ops = compute_element(&mesh, 0, &k, 1.0, &ElementOptions::default()).unwrap();
        let norm = ops.k.norm();
        prop_assert!((&ops.k - ops.k.transpose()).norm() <= 1e-12 * norm);
        let ones = nalgebra::DVector::from_element(ops.k.nrows(), 1.0);
        prop_assert!((&ops.k * ones).norm() <= 1e-8 * norm);
    }

    #[test]
    fn octree_meshes_reproduce_affine_heads(levels in 1usize..3, gx in -1.0f64..1.0, gy in -1.0f64..1.0) {
        let domain = Aabb::new([0.0; 3], [1.0; 3]);
        let region = Aabb::new([0.25, 0.25, 0.0], [0.5, 0.75, 0.5]);
        let mut mesh = octree_refine_box(domain, [2, 2, 2], region, levels).unwrap();
        let exact = |p: &psbfem::mesh::Point3| 1.0 + gx * p.x + gy * p.y - 0.5 * p.z;
        let boundary = mesh.select_nodes(|p| [p.x, p.y, p.z].iter().any(|&c| c.abs() < 1e-12 || (c - 1.0).abs() < 1e-12));
        let mut bc = BoundarySpec::default();
        for &n in &boundary {
            let name = format!("n{n}");
            mesh.node_sets.insert(name.clone(), vec![n]);
            bc.dirichlet.push(DirichletSpec { node_set: name, head: HeadValue::Constant(exact(&mesh.nodes[n])) });
        }
        let materials = vec![Material::isotropic("m", 1.0, 0.0); mesh.num_elements()];
        let sys = assemble_global(&mesh, &materials, &ElementOptions::default()).unwrap();
        let r = solve_steady(&mesh, &sys, &bc, LinearSolver::Direct).unwrap();
        let worst = mesh.nodes.iter().zip(r.last_heads()).map(|(p, h)| (h - exact(p)).abs()).fold(0.0, f64::max);
        prop_assert!(worst < 1e-8, "worst nodal error {worst:e}");
    }
}
