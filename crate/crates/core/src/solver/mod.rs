//! Global assembly, Dirichlet reduction, steady solves and implicit-Euler
//! time stepping.

mod assembly;
mod boundary;
mod sparse;
mod steady;
mod transient;

pub use assembly::{assemble_global, element_darcy_flux, GlobalSystem};
pub use boundary::{
    face_node_integrals, resolve_dirichlet, BoundarySpec, Constraints, DirichletSpec, FluxSpec,
    HeadValue, Monitor,
};
pub use sparse::{CsrMatrix, Factor, LinearSolver};
pub use steady::{
    sample_head, solve_constrained, solve_steady, FieldResult, MonitorHistory, SolveReport,
};
pub use transient::{run_transient, step_transient, TimeConfig, TransientStepper};

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hydraulic properties of one material zone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub name: String,
    /// Conductivity tensor (m/s).
    pub k: Matrix3<f64>,
    /// Specific storage (1/m).
    pub ss: f64,
}

impl Material {
    pub fn isotropic(name: &str, k: f64, ss: f64) -> Self {
        Self {
            name: name.into(),
            k: Matrix3::from_diagonal_element(k),
            ss,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sym = (self.k - self.k.transpose()).abs().max();
        if sym > 1e-12 * self.k.abs().max() {
            return Err(Error::Config(format!(
                "material {}: conductivity tensor is not symmetric",
                self.name
            )));
        }
        if self.k.cholesky().is_none() {
            return Err(Error::Config(format!(
                "material {}: conductivity tensor is not positive definite",
                self.name
            )));
        }
        if !(self.ss >= 0.0) {
            return Err(Error::Config(format!(
                "material {}: specific storage must be non-negative",
                self.name
            )));
        }
        Ok(())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            name: self.name.clone(),
            k: self.k * factor,
            ss: self.ss,
        }
    }
}
