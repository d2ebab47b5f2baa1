use nalgebra::{DMatrix, Matrix3};

use super::geometry::element_geometry;
use super::{
    assemble_element_coeffs, build_hamiltonian, eigen_split, CMatrix, ElementCoefficients,
    ElementGeometry, ElementOptions, ModalBasis, C64,
};
use crate::basis::subdivided_rule;
use crate::basis::wachspress_eval;
use crate::error::{Error, Result};
use crate::mesh::{Mesh, Vector3};

/// Stiffness and mass of one element together with the data needed to
/// reconstruct its interior field.
#[derive(Clone, Debug)]
pub struct ElementOperators {
    /// Conductance matrix (m²/s).
    pub k: DMatrix<f64>,
    /// Storage matrix (m²).
    pub m: DMatrix<f64>,
    pub geometry: ElementGeometry,
    /// Normalized coefficient matrices.
    pub coeffs: ElementCoefficients,
    pub modal: ModalBasis,
    /// `∫ N_i dA` per face node (physical area units).
    pub face_node_areas: Vec<Vec<f64>>,
    /// Outward unit normal per face.
    pub face_normals: Vec<Vector3>,
}

impl ElementOperators {
    pub fn nodes(&self) -> &[usize] {
        &self.geometry.nodes
    }

    /// Volume-averaged head gradient from `∮ h n dA / V`.
    pub fn mean_gradient(&self, local_heads: &[f64]) -> Vector3 {
        let mut g = Vector3::zeros();
        for (f, face) in self.geometry.faces.iter().enumerate() {
            let s: f64 = face
                .local_nodes
                .iter()
                .zip(&self.face_node_areas[f])
                .map(|(&i, a)| local_heads[i] * a)
                .sum();
            g += self.face_normals[f] * s;
        }
        g / self.geometry.volume
    }
}

fn frobenius(a: &CMatrix) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Takes the real part of a complex operator after checking it is real and
/// symmetric, then symmetrizes.
fn real_symmetric(c: &CMatrix, what: &str) -> Result<DMatrix<f64>> {
    let n = c.nrows();
    let norm = frobenius(c);
    let imag = c.iter().map(|v| v.im * v.im).sum::<f64>().sqrt();
    if imag > 1e-9 * norm {
        return Err(Error::Selection {
            element: 0,
            detail: format!("{what} has imaginary residue {:.3e} relative", imag / norm),
        });
    }
    let re = DMatrix::from_fn(n, n, |i, j| c[(i, j)].re);
    let asym = (&re - re.transpose()).norm();
    if asym > 1e-8 * norm {
        return Err(Error::Selection {
            element: 0,
            detail: format!("{what} asymmetry {:.3e} relative", asym / norm),
        });
    }
    Ok((&re + re.transpose()) * 0.5)
}

/// `K = Re(Φq Φh⁻¹)`.
pub fn element_stiffness(mb: &ModalBasis) -> Result<DMatrix<f64>> {
    // Solve Φhᵀ Kᵀ = Φqᵀ.
    let lu = mb.phi_h.transpose().lu();
    let kt = lu
        .solve(&mb.phi_q.transpose())
        .ok_or_else(|| Error::ModalBasis {
            element: 0,
            detail: "singular modal head matrix".into(),
        })?;
    real_symmetric(&kt.transpose(), "stiffness")
}

/// `M = Φh⁻ᵀ m Φh⁻¹` where `(T + I)ᵀ m + m (T + I) = Φhᵀ M0 Φh`; for isolated
/// modes `m_ij = (Φhᵀ M0 Φh)_ij / (λ_i + λ_j + 2)`.
pub fn element_mass(mb: &ModalBasis, m0: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = mb.len();
    for i in 0..n {
        for j in 0..n {
            if (mb.lambda[i] + mb.lambda[j] + 2.0).norm() < 1e-8 {
                return Err(Error::MassSingularity { element: 0, i, j });
            }
        }
    }
    let m0c = m0.map(|v| C64::new(v, 0.0));
    let base = mb.phi_h.transpose() * m0c * &mb.phi_h;
    let m = modal_mass(mb, &base)?;
    let inv = mb
        .phi_h
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::ModalBasis {
            element: 0,
            detail: "singular modal head matrix".into(),
        })?;
    let full = inv.transpose() * m * inv;
    real_symmetric(&full, "mass")
}

/// Solves `(T + I)ᵀ m + m (T + I) = base` block pair by block pair.
fn modal_mass(mb: &ModalBasis, base: &CMatrix) -> Result<CMatrix> {
    let n = mb.len();
    let mut m = CMatrix::zeros(n, n);
    for &(si, li) in &mb.blocks {
        for &(sj, lj) in &mb.blocks {
            if li == 1 && lj == 1 {
                m[(si, sj)] = base[(si, sj)] / (mb.t[(si, si)] + mb.t[(sj, sj)] + 2.0);
                continue;
            }
            let a = mb.t.view((si, si), (li, li)) + CMatrix::identity(li, li);
            let c = mb.t.view((sj, sj), (lj, lj)) + CMatrix::identity(lj, lj);
            // Column-major vec: (I ⊗ Aᵀ + Cᵀ ⊗ I) vec(m) = vec(base).
            let dim = li * lj;
            let mut sys = CMatrix::zeros(dim, dim);
            for q in 0..lj {
                for p in 0..li {
                    let row = q * li + p;
                    for r in 0..li {
                        sys[(row, q * li + r)] += a[(r, p)];
                    }
                    for s in 0..lj {
                        sys[(row, s * li + p)] += c[(s, q)];
                    }
                }
            }
            let rhs = nalgebra::DVector::from_fn(dim, |k, _| base[(si + k % li, sj + k / li)]);
            let x = sys.lu().solve(&rhs).ok_or(Error::MassSingularity {
                element: 0,
                i: si,
                j: sj,
            })?;
            for k in 0..dim {
                m[(si + k % li, sj + k / li)] = x[k];
            }
        }
    }
    Ok(m)
}

/// Full element pipeline for element `element` with conductivity `k` and
/// specific storage `ss`.
pub fn compute_element(
    mesh: &Mesh,
    element: usize,
    k: &Matrix3<f64>,
    ss: f64,
    options: &ElementOptions,
) -> Result<ElementOperators> {
    compute_inner(mesh, element, k, ss, options).map_err(|e| e.with_element(element))
}

fn compute_inner(
    mesh: &Mesh,
    element: usize,
    k: &Matrix3<f64>,
    ss: f64,
    options: &ElementOptions,
) -> Result<ElementOperators> {
    let geometry = element_geometry(mesh, element)?;
    let ks = k.trace() / 3.0;
    if !(ks > 0.0) {
        return Err(Error::Config(format!(
            "element {element}: conductivity must be positive definite"
        )));
    }
    let kn = k / ks;
    let coeffs = assemble_element_coeffs(&geometry, &kn, 1.0, options)?;
    let h = build_hamiltonian(&coeffs, options.max_condition)?;
    let modal = eigen_split(&h)?;
    let kmat = element_stiffness(&modal)? * (ks * geometry.scale);
    let mmat = element_mass(&modal, &coeffs.m0)? * (ss * geometry.scale.powi(3));

    let area_scale = geometry.scale * geometry.scale;
    let mut face_node_areas = Vec::with_capacity(geometry.faces.len());
    let mut face_normals = Vec::with_capacity(geometry.faces.len());
    for face in &geometry.faces {
        let rule = subdivided_rule(&face.poly, options.gauss_order, options.subdivisions)?;
        let mut a = vec![0.0; face.local_nodes.len()];
        for (qp, w) in rule.points.iter().zip(&rule.weights) {
            let b = wachspress_eval(&face.poly, qp)?;
            for (ai, ni) in a.iter_mut().zip(&b.n) {
                *ai += w * ni * area_scale;
            }
        }
        face_node_areas.push(a);
        face_normals.push(face.poly.normal);
    }
    Ok(ElementOperators {
        k: kmat,
        m: mmat,
        geometry,
        coeffs,
        modal,
        face_node_areas,
        face_normals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{box_grid, Aabb};
    use nalgebra::DVector;

    fn unit_cube() -> Mesh {
        box_grid(Aabb::new([0.0; 3], [1.0; 3]), [1, 1, 1])
    }

    #[test]
    fn scalar_mass() {
        let one = CMatrix::from_element(1, 1, C64::new(1.0, 0.0));
        let mb = ModalBasis::diagonal(one.clone(), one.clone(), vec![C64::new(0.0, 0.0)]);
        let m = element_mass(&mb, &DMatrix::from_element(1, 1, 2.0)).unwrap();
        assert!((m[(0, 0)] - 1.0).abs() < 1e-15);
        let bad = ModalBasis::diagonal(one.clone(), one, vec![C64::new(-1.0, 0.0)]);
        assert!(matches!(
            element_mass(&bad, &DMatrix::from_element(1, 1, 2.0)),
            Err(Error::MassSingularity { i: 0, j: 0, .. })
        ));
    }

    #[test]
    fn coupled_block_mass_is_basis_independent() {
        // Mixing two modes into one block leaves the mass unchanged.
        let phi = CMatrix::from_fn(2, 2, |i, j| C64::new([[1.0, 0.3], [0.2, 1.0]][i][j], 0.0));
        let lambda = vec![C64::new(1.5, 0.0), C64::new(1.7, 0.0)];
        let m0 = DMatrix::from_row_slice(2, 2, &[2.0, 0.4, 0.4, 1.0]);
        let plain = ModalBasis::diagonal(phi.clone(), phi.clone(), lambda.clone());
        let s = CMatrix::from_fn(2, 2, |i, j| C64::new([[1.0, 0.5], [-0.4, 0.9]][i][j], 0.0));
        let sinv = s.clone().try_inverse().unwrap();
        let mixed = ModalBasis {
            phi_h: &phi * &s,
            phi_q: &phi * &s,
            t: &sinv * &plain.t * &s,
            blocks: vec![(0, 2)],
            ..plain.clone()
        };
        let a = element_mass(&plain, &m0).unwrap();
        let b = element_mass(&mixed, &m0).unwrap();
        assert!((a - b).norm() < 1e-14);
    }

    #[test]
    fn unit_cube_operators() {
        let mesh = unit_cube();
        let ops = compute_element(
            &mesh,
            0,
            &Matrix3::identity(),
            1.0,
            &ElementOptions::default(),
        )
        .unwrap();
        let ones = DVector::from_element(8, 1.0);
        let kn = ops.k.norm();
        assert!((&ops.k * &ones).norm() < 1e-8 * kn);
        let eig = ops.k.clone().symmetric_eigenvalues();
        let zero = eig.iter().filter(|v| v.abs() < 1e-8 * kn).count();
        assert_eq!(zero, 1);
        assert!(eig.iter().all(|&v| v > -1e-8 * kn));
        assert!((ones.dot(&(&ops.m * &ones)) - 1.0).abs() < 1e-6);
        assert!(ops.m.clone().cholesky().is_some());
        assert_eq!(ops.modal.constant_mode.is_some(), true);
        let decaying = ops
            .modal
            .lambda
            .iter()
            .enumerate()
            .filter(|(i, l)| Some(*i) != ops.modal.constant_mode && l.re - 0.5 > 1e-6)
            .count();
        assert_eq!(decaying, 7);
    }

    #[test]
    fn uniform_flow_through_cube() {
        let mesh = unit_cube();
        let ops = compute_element(
            &mesh,
            0,
            &Matrix3::identity(),
            1.0,
            &ElementOptions::default(),
        )
        .unwrap();
        let h = DVector::from_iterator(8, ops.nodes().iter().map(|&n| mesh.nodes[n].z));
        let q = &ops.k * &h;
        let (mut top, mut bottom) = (0.0, 0.0);
        for (i, &n) in ops.nodes().iter().enumerate() {
            if mesh.nodes[n].z > 0.5 {
                top += q[i];
            } else {
                bottom += q[i];
            }
        }
        // K·h is the nodal inflow: water enters at the high-head face.
        assert!((top - 1.0).abs() < 1e-10, "{top}");
        assert!((bottom + 1.0).abs() < 1e-10, "{bottom}");
    }

    #[test]
    fn mean_gradient_of_linear_field() {
        let mesh = box_grid(Aabb::new([0.0; 3], [2.0, 1.0, 0.5]), [1, 1, 1]);
        let ops = compute_element(
            &mesh,
            0,
            &Matrix3::identity(),
            0.0,
            &ElementOptions::default(),
        )
        .unwrap();
        let h: Vec<f64> = ops
            .nodes()
            .iter()
            .map(|&n| {
                let p = mesh.nodes[n];
                1.0 + 2.0 * p.x - p.y + 0.5 * p.z
            })
            .collect();
        let g = ops.mean_gradient(&h);
        assert!((g - Vector3::new(2.0, -1.0, 0.5)).norm() < 1e-12);
        assert!(ops.m.norm() == 0.0);
    }
}
