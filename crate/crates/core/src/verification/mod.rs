//! Independent references for the element pipeline and the global solvers:
//! an ordered-Schur stiffness, a quadrature mass, a linear tetrahedral solver,
//! random polyhedron and polygon corpora and the series solution of a
//! draining column.

mod corpus;
mod oracles;
mod polygons;
mod tet;

pub use corpus::{halfspace_polyhedron, random_corpus, random_polyhedron};
pub use oracles::{gauss_legendre01, radial_mass_oracle, schur_stiffness_oracle};
pub use polygons::{random_convex_polygon, wachspress_suite, WachspressReport};
pub use tet::{assemble_tets, tet_fem_solve, tet_mass, tet_stiffness, TetMesh};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::Result;
use crate::mesh::{Mesh, Point3, Vector3};
use crate::sbfem::{compute_element, internal_field, ElementOperators, ElementOptions};
use crate::solver::{assemble_global, solve_steady, LinearSolver, Material};

/// Element-level invariants, each as a relative measure; `passes` applies the
/// acceptance tolerances.
#[derive(Clone, Debug, Serialize)]
pub struct ElementCheck {
    pub element: usize,
    pub stiffness_asymmetry: f64,
    /// Smallest eigenvalue of K over the largest.
    pub stiffness_min_eig: f64,
    pub zero_modes: usize,
    /// `‖K·1‖ / ‖K‖`.
    pub constant_residual: f64,
    pub mass_min_eig: f64,
    /// `|1ᵀM1 − Ss·V| / (Ss·V)`.
    pub mass_total_error: f64,
    pub schur_error: f64,
    pub radial_mass_error: f64,
    /// Change of the radial mass between 32 and 64 points.
    pub radial_mass_change: f64,
    /// Worst relative error of interior samples of affine head fields.
    pub affine_error: f64,
    /// `‖K h − f‖ / ‖f‖` for affine heads against the exact boundary inflow;
    /// reported only, it tracks face quadrature error.
    pub affine_flux_error: f64,
}

impl ElementCheck {
    pub fn failures(&self) -> Vec<&'static str> {
        let mut f = Vec::new();
        if self.stiffness_asymmetry > 1e-12 {
            f.push("stiffness symmetry");
        }
        if self.stiffness_min_eig < -1e-10 {
            f.push("stiffness semi-definite");
        }
        if self.zero_modes != 1 {
            f.push("single constant mode");
        }
        if self.constant_residual > 1e-8 {
            f.push("constant head in null space");
        }
        if self.mass_min_eig <= 0.0 {
            f.push("mass positive definite");
        }
        if self.mass_total_error > 1e-6 {
            f.push("mass total");
        }
        if self.schur_error > 1e-8 {
            f.push("Schur stiffness agreement");
        }
        if self.radial_mass_error > 1e-8 || self.radial_mass_change > 1e-9 {
            f.push("radial mass agreement");
        }
        if self.affine_error > 1e-8 {
            f.push("affine reproduction");
        }
        f
    }

    pub fn passes(&self) -> bool {
        self.failures().is_empty()
    }
}

fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// Runs the invariant suite on element `e`. Operator checks use `options`;
/// affine reproduction uses [`ElementOptions::accurate`] so face quadrature
/// error does not mask the element formulation.
pub fn check_element(
    mesh: &Mesh,
    e: usize,
    material: &Material,
    options: &ElementOptions,
) -> Result<ElementCheck> {
    let ops = compute_element(mesh, e, &material.k, material.ss, options)?;
    let k = &ops.k;
    let kn = k.norm();
    let eig = SymmetricEigen::new(k.clone()).eigenvalues;
    let emax = eig.amax();
    let zero_modes = eig.iter().filter(|v| v.abs() < 1e-8 * emax).count();
    let ones = DMatrix::from_element(k.nrows(), 1, 1.0);
    let meig = SymmetricEigen::new(ops.m.clone()).eigenvalues;
    let vol = ops.geometry.volume;
    let length = ops.geometry.scale;
    let ks = material.k.trace() / 3.0;
    let k_schur = schur_stiffness_oracle(&ops.coeffs)? * (ks * length);
    let mass_scale = material.ss * length.powi(3);
    let (radial_error, radial_change) = if material.ss > 0.0 {
        let m64 = radial_mass_oracle(&ops.modal, &ops.coeffs.m0, 64)? * mass_scale;
        let m32 = radial_mass_oracle(&ops.modal, &ops.coeffs.m0, 32)? * mass_scale;
        (rel(&ops.m, &m64), rel(&m32, &m64))
    } else {
        (0.0, 0.0)
    };
    let accurate = compute_element(
        mesh,
        e,
        &material.k,
        material.ss,
        &ElementOptions::accurate(),
    )?;
    Ok(ElementCheck {
        element: e,
        stiffness_asymmetry: (k - k.transpose()).norm() / kn,
        stiffness_min_eig: eig.min() / emax,
        zero_modes,
        constant_residual: (k * ones).norm() / kn,
        mass_min_eig: meig.min(),
        mass_total_error: if material.ss > 0.0 {
            (ops.m.sum() - material.ss * vol).abs() / (material.ss * vol)
        } else {
            0.0
        },
        schur_error: rel(k, &k_schur),
        radial_mass_error: radial_error,
        radial_mass_change: radial_change,
        affine_error: affine_interior_error(mesh, &accurate)?,
        affine_flux_error: affine_flux_error(mesh, &accurate, material),
    })
}

const AFFINE_GRADIENTS: [[f64; 3]; 4] = [
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
    [0.3, -0.7, 0.5],
];

/// Worst error, relative to the largest nodal head, of interior samples of
/// `h = a + g·x` reconstructed from its nodal values.
pub fn affine_interior_error(mesh: &Mesh, ops: &ElementOperators) -> Result<f64> {
    let nodes = ops.nodes();
    let c = ops.geometry.centre;
    let mut worst: f64 = 0.0;
    for g in AFFINE_GRADIENTS.map(Vector3::from) {
        // Offset keeps heads away from zero so the relative measure is fair.
        let a = 2.0
            + nodes
                .iter()
                .map(|&n| g.dot(&mesh.nodes[n].coords).abs())
                .fold(0.0, f64::max);
        let head = |p: &Point3| a + g.dot(&p.coords);
        let local: Vec<f64> = nodes.iter().map(|&n| head(&mesh.nodes[n])).collect();
        let scale = local.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for t in [0.2, 0.55, 0.9] {
            // Points between the centroid and each vertex.
            for &n in nodes {
                let p = Point3::from(c.coords + t * (mesh.nodes[n] - c));
                let v = internal_field(ops, &local, &p)?;
                worst = worst.max((v - head(&p)).abs() / scale);
            }
        }
    }
    Ok(worst)
}

/// `‖K h − f‖ / ‖f‖` over affine heads, `f` the exact nodal boundary inflow.
pub fn affine_flux_error(mesh: &Mesh, ops: &ElementOperators, material: &Material) -> f64 {
    let nodes = ops.nodes();
    let mut worst: f64 = 0.0;
    for g in AFFINE_GRADIENTS.map(Vector3::from) {
        let h = DMatrix::from_iterator(
            nodes.len(),
            1,
            nodes.iter().map(|&n| 2.0 + g.dot(&mesh.nodes[n].coords)),
        );
        let inflow = material.k * g;
        let mut f = DMatrix::zeros(nodes.len(), 1);
        for (fi, face) in ops.geometry.faces.iter().enumerate() {
            let qn = inflow.dot(&ops.face_normals[fi]);
            for (&i, a) in face.local_nodes.iter().zip(&ops.face_node_areas[fi]) {
                f[i] += qn * a;
            }
        }
        worst = worst.max((&ops.k * &h - &f).norm() / f.norm());
    }
    worst
}

/// Head in a column `0 ≤ z ≤ length` initially at `h0` whose top is raised to
/// `h1` at `t = 0` while the bottom stays at `h0`; `terms` terms of the sine
/// series.
pub fn column_series(
    z: f64,
    t: f64,
    length: f64,
    diffusivity: f64,
    h0: f64,
    h1: f64,
    terms: usize,
) -> f64 {
    let pi = std::f64::consts::PI;
    let mut s = z / length;
    for n in 1..=terms {
        let nf = n as f64;
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        s += 2.0 * sign / (nf * pi)
            * (nf * pi * z / length).sin()
            * (-(nf * pi / length).powi(2) * diffusivity * t).exp();
    }
    h0 + (h1 - h0) * s
}

/// Monitor values of the polyhedral solution against the tetrahedral one.
#[derive(Clone, Debug, Serialize)]
pub struct CrossCheck {
    pub label: String,
    pub polyhedral: f64,
    pub tetrahedral: f64,
    pub relative_difference: f64,
}

/// Solves a steady problem with both discretizations on the same mesh.
pub fn tet_cross_check(
    mesh: &Mesh,
    materials: &[Material],
    bc: &crate::solver::BoundarySpec,
    options: &ElementOptions,
) -> Result<Vec<CrossCheck>> {
    let sys = assemble_global(mesh, materials, options)?;
    let ours = solve_steady(mesh, &sys, bc, LinearSolver::Direct)?;
    let (_, tets) = tet_fem_solve(mesh, materials, bc, LinearSolver::Direct)?;
    Ok(ours
        .monitors
        .iter()
        .zip(&tets.monitors)
        .map(|(a, b)| {
            let (x, y) = (a.values[0], b.values[0]);
            CrossCheck {
                label: a.label.clone(),
                polyhedral: x,
                tetrahedral: y,
                relative_difference: (x - y).abs() / y.abs().max(f64::MIN_POSITIVE),
            }
        })
        .collect())
}
