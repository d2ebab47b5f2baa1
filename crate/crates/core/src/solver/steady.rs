use serde::{Deserialize, Serialize};

use super::boundary::flux_load;
use super::{
    element_darcy_flux, resolve_dirichlet, BoundarySpec, Constraints, CsrMatrix, Factor,
    GlobalSystem, LinearSolver,
};
use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point3};
use crate::sbfem::{internal_field, locate_in_element};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorHistory {
    pub label: String,
    pub point: [f64; 3],
    pub values: Vec<f64>,
}

/// Diagnostics of the last linear solve.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub n_free: usize,
    pub n_fixed: usize,
    /// `‖A h − b‖ / ‖b‖` over free rows.
    pub residual: f64,
    /// `|Σ reactions + Σ loads| / total inflow`.
    pub reaction_imbalance: f64,
    /// How far heads leave the range of the Dirichlet data; `None` when flux
    /// loads make the bound inapplicable.
    pub max_principle_excess: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FieldResult {
    pub times: Vec<f64>,
    /// Nodal heads (m) per output time.
    pub heads: Vec<Vec<f64>>,
    /// Mean element Darcy velocity (m/s) per output time.
    pub flux: Vec<Vec<[f64; 3]>>,
    pub monitors: Vec<MonitorHistory>,
    pub report: SolveReport,
}

impl FieldResult {
    pub fn last_heads(&self) -> &[f64] {
        self.heads.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn monitor(&self, label: &str) -> Option<&MonitorHistory> {
        self.monitors.iter().find(|m| m.label == label)
    }

    pub(crate) fn new_for(bc: &BoundarySpec) -> Self {
        Self {
            monitors: bc
                .monitors
                .iter()
                .map(|m| MonitorHistory {
                    label: m.label.clone(),
                    point: m.point,
                    values: Vec::new(),
                })
                .collect(),
            ..Default::default()
        }
    }

    pub(crate) fn record(
        &mut self,
        mesh: &Mesh,
        sys: &GlobalSystem,
        t: f64,
        heads: Vec<f64>,
    ) -> Result<()> {
        for m in &mut self.monitors {
            m.values
                .push(sample_head(mesh, sys, &heads, &Point3::from(m.point))?);
        }
        self.flux.push(
            (0..sys.elements.len())
                .map(|e| element_darcy_flux(sys, e, &heads).into())
                .collect(),
        );
        self.times.push(t);
        self.heads.push(heads);
        Ok(())
    }
}

/// Solves `A h = b` with the rows and columns of constrained nodes
/// eliminated; constrained heads are copied exactly.
pub fn solve_constrained(
    a: &CsrMatrix,
    b: &[f64],
    constraints: &Constraints,
    solver: LinearSolver,
) -> Result<(Vec<f64>, SolveReport)> {
    let free: Vec<usize> = (0..a.n).filter(|i| !constraints.contains_key(i)).collect();
    let factor = Factor::new(&a.submatrix(&free), solver)?;
    solve_with(a, &free, &factor, b, constraints)
}

pub(crate) fn solve_with(
    a: &CsrMatrix,
    free: &[usize],
    factor: &Factor,
    b: &[f64],
    constraints: &Constraints,
) -> Result<(Vec<f64>, SolveReport)> {
    let mut h = vec![0.0; a.n];
    for (&n, &v) in constraints {
        h[n] = v;
    }
    let lifted = a.matvec(&h);
    let rhs: Vec<f64> = free.iter().map(|&i| b[i] - lifted[i]).collect();
    let x = factor.solve(&rhs)?;
    for (&i, v) in free.iter().zip(x) {
        h[i] = v;
    }
    let ah = a.matvec(&h);
    let res: f64 = free
        .iter()
        .map(|&i| (ah[i] - b[i]).powi(2))
        .sum::<f64>()
        .sqrt();
    let rn: f64 = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
    let residual = if rn > 0.0 { res / rn } else { res };
    // Reactions are the inflow needed at constrained nodes.
    let mut net = 0.0;
    let mut inflow = 0.0;
    for i in 0..a.n {
        let r = if constraints.contains_key(&i) {
            ah[i] - b[i]
        } else {
            0.0
        };
        let q = r + b[i];
        net += q;
        inflow += q.max(0.0);
    }
    let reaction_imbalance = if inflow > 0.0 {
        net.abs() / inflow
    } else {
        net.abs()
    };
    Ok((
        h,
        SolveReport {
            n_free: free.len(),
            n_fixed: constraints.len(),
            residual,
            reaction_imbalance,
            max_principle_excess: None,
        },
    ))
}

pub(crate) fn max_principle_excess(h: &[f64], constraints: &Constraints) -> f64 {
    let lo = constraints.values().copied().fold(f64::INFINITY, f64::min);
    let hi = constraints
        .values()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    h.iter().fold(0.0f64, |e, &v| e.max(v - hi).max(lo - v))
}

/// Steady solve of `K h = f` with Dirichlet data at `t = 0`.
pub fn solve_steady(
    mesh: &Mesh,
    sys: &GlobalSystem,
    bc: &BoundarySpec,
    solver: LinearSolver,
) -> Result<FieldResult> {
    let constraints = resolve_dirichlet(mesh, bc, 0.0)?;
    solve_steady_with(mesh, sys, bc, &constraints, solver)
}

pub(crate) fn solve_steady_with(
    mesh: &Mesh,
    sys: &GlobalSystem,
    bc: &BoundarySpec,
    constraints: &Constraints,
    solver: LinearSolver,
) -> Result<FieldResult> {
    if constraints.is_empty() {
        return Err(Error::Solver(
            "steady problem needs at least one prescribed head".into(),
        ));
    }
    let mut f = flux_load(mesh, bc)?;
    for (fi, li) in f.iter_mut().zip(&sys.load) {
        *fi += li;
    }
    let (h, mut report) = solve_constrained(&sys.k, &f, constraints, solver)?;
    if bc.flux.is_empty() && sys.load.iter().all(|&v| v == 0.0) {
        report.max_principle_excess = Some(max_principle_excess(&h, constraints));
    }
    let mut out = FieldResult::new_for(bc);
    out.record(mesh, sys, 0.0, h)?;
    out.report = report;
    Ok(out)
}

/// Head at an arbitrary point from the containing element's interior field,
/// falling back to inverse-distance weighting of that element's nodes.
pub fn sample_head(mesh: &Mesh, sys: &GlobalSystem, heads: &[f64], p: &Point3) -> Result<f64> {
    let mut candidate = None;
    for &e in sys.locator.candidates(p) {
        let ops = &sys.elements[e];
        let bb = mesh.element_bounding_box(e);
        if !bb.contains(p, 1e-9 * bb.diagonal()) {
            continue;
        }
        candidate.get_or_insert(e);
        if locate_in_element(ops, p).is_ok() {
            let local: Vec<f64> = ops.nodes().iter().map(|&n| heads[n]).collect();
            match internal_field(ops, &local, p) {
                Ok(v) => return Ok(v),
                Err(err) => log::warn!(
                    "interior field at element {e} failed ({err}); using nodal weighting"
                ),
            }
            break;
        }
    }
    let Some(e) = candidate else {
        return Err(Error::EvaluationDomain(format!(
            "point ({}, {}, {}) is outside the mesh",
            p.x, p.y, p.z
        )));
    };
    log::warn!(
        "monitor ({}, {}, {}) sampled by inverse-distance weighting",
        p.x,
        p.y,
        p.z
    );
    let (mut num, mut den) = (0.0, 0.0);
    for n in mesh.element_nodes(e) {
        let d = (mesh.nodes[n] - p).norm();
        if d < 1e-14 {
            return Ok(heads[n]);
        }
        num += heads[n] / d;
        den += 1.0 / d;
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::stacked_column;
    use crate::sbfem::ElementOptions;
    use crate::solver::{assemble_global, DirichletSpec, HeadValue, Material, Monitor};

    fn column_case(n: usize) -> (Mesh, GlobalSystem, BoundarySpec) {
        let mut mesh = stacked_column(n);
        let top = mesh.select_nodes(|p| (p.z - n as f64).abs() < 1e-12);
        let bottom = mesh.select_nodes(|p| p.z.abs() < 1e-12);
        mesh.node_sets.insert("top".into(), top);
        mesh.node_sets.insert("bottom".into(), bottom);
        let mats = vec![Material::isotropic("soil", 2e-5, 1e-3); n];
        let sys = assemble_global(&mesh, &mats, &ElementOptions::default()).unwrap();
        let bc = BoundarySpec {
            dirichlet: vec![
                DirichletSpec {
                    node_set: "top".into(),
                    head: HeadValue::Constant(7.0),
                },
                DirichletSpec {
                    node_set: "bottom".into(),
                    head: HeadValue::Constant(2.0),
                },
            ],
            monitors: vec![Monitor::new("mid", [0.3, 0.6, n as f64 * 0.37])],
            ..Default::default()
        };
        (mesh, sys, bc)
    }

    #[test]
    fn column_gives_linear_profile() {
        for solver in [LinearSolver::Direct, LinearSolver::cg()] {
            let (mesh, sys, bc) = column_case(5);
            let r = solve_steady(&mesh, &sys, &bc, solver).unwrap();
            for (p, h) in mesh.nodes.iter().zip(r.last_heads()) {
                assert!((h - (2.0 + p.z)).abs() < 1e-9, "{h} at {p}");
            }
            let m = r.monitor("mid").unwrap().values[0];
            assert!((m - (2.0 + 5.0 * 0.37)).abs() < 1e-9);
            assert!(r.report.residual < 1e-10);
            assert!(r.report.reaction_imbalance < 1e-9);
            assert!(r.report.max_principle_excess.unwrap() < 1e-9);
            let q = r.flux[0][2];
            assert!((q[2] + 2e-5).abs() < 1e-14 && q[0].abs() < 1e-14);
        }
    }

    #[test]
    fn dirichlet_values_exact() {
        let (mesh, sys, bc) = column_case(3);
        let r = solve_steady(&mesh, &sys, &bc, LinearSolver::Direct).unwrap();
        for &n in &mesh.node_sets["top"] {
            assert_eq!(r.last_heads()[n], 7.0);
        }
    }

    #[test]
    fn unconstrained_is_singular() {
        let (mesh, sys, mut bc) = column_case(2);
        bc.dirichlet.clear();
        assert!(matches!(
            solve_steady(&mesh, &sys, &bc, LinearSolver::Direct),
            Err(Error::Solver(_))
        ));
    }
}
