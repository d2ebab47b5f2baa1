use rayon::prelude::*;

use super::{CsrMatrix, Material};
use crate::error::{Error, Result};
use crate::mesh::{ElementLocator, Mesh, Vector3};
use crate::sbfem::{compute_element, ElementOperators, ElementOptions};

/// Assembled conductance and storage matrices over all mesh nodes.
#[derive(Clone, Debug)]
pub struct GlobalSystem {
    pub k: CsrMatrix,
    pub m: CsrMatrix,
    /// Prescribed nodal inflow (flux boundaries).
    pub load: Vec<f64>,
    pub elements: Vec<ElementOperators>,
    pub materials: Vec<Material>,
    /// Multiplier applied to each element's conductivity.
    pub k_scale: Vec<f64>,
    pub locator: ElementLocator,
}

impl GlobalSystem {
    pub fn num_dofs(&self) -> usize {
        self.k.n
    }

    /// Builds the system from precomputed element operators.
    pub fn from_operators(
        mesh: &Mesh,
        elements: Vec<ElementOperators>,
        materials: Vec<Material>,
    ) -> Result<Self> {
        let n = mesh.num_nodes();
        if elements.len() != materials.len() {
            return Err(Error::Config(format!(
                "{} elements but {} materials",
                elements.len(),
                materials.len()
            )));
        }
        let k_scale = vec![1.0; elements.len()];
        let k = scatter(n, &elements, |o| &o.k, &k_scale)?;
        let m = scatter(n, &elements, |o| &o.m, &vec![1.0; elements.len()])?;
        Ok(Self {
            k,
            m,
            load: vec![0.0; n],
            elements,
            materials,
            k_scale,
            locator: ElementLocator::new(mesh),
        })
    }

    /// Reassembles the conductance with per-element conductivity multipliers.
    /// Element matrices scale linearly with a scalar multiple of `k`, so no
    /// element is recomputed.
    pub fn rescale_conductivity(&mut self, k_scale: &[f64]) -> Result<()> {
        self.k = scatter(self.k.n, &self.elements, |o| &o.k, k_scale)?;
        self.k_scale = k_scale.to_vec();
        Ok(())
    }
}

fn scatter(
    n: usize,
    elements: &[ElementOperators],
    pick: impl Fn(&ElementOperators) -> &nalgebra::DMatrix<f64>,
    scale: &[f64],
) -> Result<CsrMatrix> {
    let mut t = Vec::new();
    for (e, ops) in elements.iter().enumerate() {
        let a = pick(ops);
        let nodes = ops.nodes();
        if a.nrows() != nodes.len() || nodes.iter().any(|&g| g >= n) {
            return Err(Error::Solver(format!("element {e}: inconsistent dof map")));
        }
        for (i, &gi) in nodes.iter().enumerate() {
            for (j, &gj) in nodes.iter().enumerate() {
                t.push((gi, gj, scale[e] * a[(i, j)]));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(n, t))
}

/// Computes all element operators in parallel and scatters them in element
/// order, so the result does not depend on the thread count.
pub fn assemble_global(
    mesh: &Mesh,
    materials: &[Material],
    options: &ElementOptions,
) -> Result<GlobalSystem> {
    if materials.len() != mesh.num_elements() {
        return Err(Error::Config(format!(
            "{} elements but {} material assignments",
            mesh.num_elements(),
            materials.len()
        )));
    }
    for m in materials {
        m.validate()?;
    }
    let elements: Vec<ElementOperators> = (0..mesh.num_elements())
        .into_par_iter()
        .map(|e| compute_element(mesh, e, &materials[e].k, materials[e].ss, options))
        .collect::<Result<_>>()?;
    GlobalSystem::from_operators(mesh, elements, materials.to_vec())
}

/// Mean Darcy velocity `q = −k ∇h` of element `e`.
pub fn element_darcy_flux(sys: &GlobalSystem, e: usize, heads: &[f64]) -> Vector3 {
    let ops = &sys.elements[e];
    let local: Vec<f64> = ops.nodes().iter().map(|&n| heads[n]).collect();
    -(sys.materials[e].k * sys.k_scale[e]) * ops.mean_gradient(&local)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{box_grid, Aabb};

    #[test]
    fn single_element_identity_numbering() {
        let mesh = box_grid(Aabb::new([0.0; 3], [1.0; 3]), [1, 1, 1]);
        let sys = assemble_global(
            &mesh,
            &[Material::isotropic("a", 1.0, 1.0)],
            &ElementOptions::default(),
        )
        .unwrap();
        let ops = &sys.elements[0];
        for (i, &gi) in ops.nodes().iter().enumerate() {
            for (j, &gj) in ops.nodes().iter().enumerate() {
                assert_eq!(sys.k.get(gi, gj), ops.k[(i, j)]);
            }
        }
    }

    #[test]
    fn two_cubes_share_face() {
        let mesh = box_grid(Aabb::new([0.0; 3], [2.0, 1.0, 1.0]), [2, 1, 1]);
        let mats = vec![Material::isotropic("a", 1.0, 0.0); 2];
        let sys = assemble_global(&mesh, &mats, &ElementOptions::default()).unwrap();
        assert_eq!(sys.num_dofs(), 12);
        let ones = vec![1.0; 12];
        assert!(sys.k.matvec(&ones).iter().all(|v| v.abs() < 1e-12));
        assert!(sys.k.max_asymmetry() < 1e-15);
        assert_eq!(sys.m.norm_max(), 0.0);
        // A shared node row sums both elements.
        let shared = mesh.select_nodes(|p| (p.x - 1.0).abs() < 1e-12)[0];
        let diag: f64 = sys
            .elements
            .iter()
            .map(|o| {
                o.nodes()
                    .iter()
                    .position(|&n| n == shared)
                    .map_or(0.0, |i| o.k[(i, i)])
            })
            .sum();
        assert!((sys.k.get(shared, shared) - diag).abs() < 1e-15);
    }

    #[test]
    fn material_count_mismatch() {
        let mesh = box_grid(Aabb::new([0.0; 3], [2.0, 1.0, 1.0]), [2, 1, 1]);
        let r = assemble_global(
            &mesh,
            &[Material::isotropic("a", 1.0, 0.0)],
            &ElementOptions::default(),
        );
        assert!(matches!(r, Err(Error::Config(_))));
    }
}
