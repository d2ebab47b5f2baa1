//! Element pipeline: face geometry, coefficient matrices, Hamiltonian
//! eigen-split, stiffness, mass and internal-field reconstruction.
//!
//! All element quantities are computed in normalized units: coordinates
//! relative to the scaling centre are divided by `L = V^(1/3)` and the
//! conductivity by its mean diagonal `k_s`. The physical operators follow as
//! `K = k_s·L·K_n` and `M = Ss·L³·M_n`.

mod coefficients;
mod field;
mod geometry;
mod hamiltonian;
mod operators;

pub use coefficients::{
    assemble_element_coeffs, face_coefficients, ElementCoefficients, FaceCoefficients,
};
pub use field::{internal_field, locate_in_element, InternalFieldSolution, RadialSample};
pub use geometry::{
    element_geometry, face_geometry, ElementFace, ElementGeometry, FaceGeometryAtPoint,
};
pub use hamiltonian::{build_hamiltonian, eigen_split, HamiltonianSystem, ModalBasis};
pub use operators::{compute_element, element_mass, element_stiffness, ElementOperators};

use nalgebra::{Complex, DMatrix};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

/// Numerical settings of the element pipeline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElementOptions {
    /// Points per centroid sub-triangle (1, 3, 6 or 12).
    pub gauss_order: usize,
    /// Further uniform splitting of each centroid sub-triangle.
    pub subdivisions: usize,
    /// Largest accepted condition estimate of E0.
    pub max_condition: f64,
}

impl Default for ElementOptions {
    fn default() -> Self {
        Self {
            gauss_order: 3,
            subdivisions: 1,
            max_condition: 1e12,
        }
    }
}

impl ElementOptions {
    /// Rule accurate enough that rational face integrands are integrated to
    /// near machine precision.
    pub fn accurate() -> Self {
        Self {
            gauss_order: 12,
            subdivisions: 16,
            ..Self::default()
        }
    }
}
