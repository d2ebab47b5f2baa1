//! Case files, result export and the study harness behind the command-line
//! front end.

mod case;
mod run;
mod vtk;

pub use case::{
    load_case, parse_case, AnalysisCase, AnalysisKind, BoxSelector, Conductivity, DamLayout,
    ElementMaterials, MaterialSpec, MeshSource, OutputSpec, PreparedCase, QuadratureSpec,
    Reference, SolverSpec, Zone,
};
pub use run::{
    dt_study, load_expectations, monitors_csv, run_case, size_study, study_csv, write_outputs,
    Check, CheckOutcome, Expectations, RunOutput, StudyRow,
};
pub use vtk::{
    element_face_loops, parse_vtk, vtk_string, write_vtk, VtkFields, VtkGrid, VTK_HEXAHEDRON,
    VTK_POLYHEDRON,
};
