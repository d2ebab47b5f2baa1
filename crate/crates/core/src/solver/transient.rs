use serde::{Deserialize, Serialize};

use super::boundary::flux_load;
use super::steady::solve_with;
use super::{
    resolve_dirichlet, BoundarySpec, Constraints, CsrMatrix, Factor, FieldResult, GlobalSystem,
    LinearSolver, SolveReport,
};
use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// Uniform implicit-Euler stepping.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeConfig {
    /// Step length (s, or whatever time unit the conductivity uses).
    pub dt: f64,
    pub n_steps: usize,
    /// Record every `output_stride`-th step; the last step is always kept.
    #[serde(default = "one")]
    pub output_stride: usize,
}

fn one() -> usize {
    1
}

impl TimeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config(format!(
                "time step must be positive, got {}",
                self.dt
            )));
        }
        if self.output_stride == 0 {
            return Err(Error::Config("output_stride must be at least 1".into()));
        }
        Ok(())
    }
}

/// Effective matrix `K + M/Δt` with its factorization cached per set of
/// constrained nodes.
pub struct TransientStepper {
    pub dt: f64,
    a: CsrMatrix,
    m_dt: CsrMatrix,
    solver: LinearSolver,
    cache: Option<(Vec<usize>, Vec<usize>, Factor)>,
}

impl TransientStepper {
    pub fn new(sys: &GlobalSystem, dt: f64, solver: LinearSolver) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::Config(format!(
                "time step must be positive, got {dt}"
            )));
        }
        Ok(Self {
            dt,
            a: sys.k.combine(1.0, &sys.m, 1.0 / dt),
            m_dt: sys.m.combine(1.0 / dt, &sys.m, 0.0),
            solver,
            cache: None,
        })
    }

    /// `(K + M/Δt) h = Q + (M/Δt) h_t` with `constraints` imposed at the new
    /// time.
    pub fn step(
        &mut self,
        load: &[f64],
        constraints: &Constraints,
        h_t: &[f64],
    ) -> Result<(Vec<f64>, SolveReport)> {
        if h_t.len() != self.a.n {
            return Err(Error::Solver(format!(
                "state has {} entries, system {}",
                h_t.len(),
                self.a.n
            )));
        }
        let fixed: Vec<usize> = constraints.keys().copied().collect();
        let stale = self.cache.as_ref().is_none_or(|(f, _, _)| *f != fixed);
        if stale {
            let free: Vec<usize> = (0..self.a.n)
                .filter(|i| !constraints.contains_key(i))
                .collect();
            let factor = Factor::new(&self.a.submatrix(&free), self.solver).map_err(|e| {
                Error::Solver(format!("effective matrix K + M/dt is singular: {e}"))
            })?;
            self.cache = Some((fixed, free, factor));
        }
        let (_, free, factor) = self.cache.as_ref().unwrap();
        let mh = self.m_dt.matvec(h_t);
        let b: Vec<f64> = load.iter().zip(&mh).map(|(q, m)| q + m).collect();
        solve_with(&self.a, free, factor, &b, constraints)
    }
}

/// One implicit-Euler step from `h_t`.
pub fn step_transient(
    sys: &GlobalSystem,
    constraints: &Constraints,
    h_t: &[f64],
    dt: f64,
    solver: LinearSolver,
) -> Result<Vec<f64>> {
    let mut s = TransientStepper::new(sys, dt, solver)?;
    Ok(s.step(&sys.load, constraints, h_t)?.0)
}

/// Steps from `initial` for `cfg.n_steps` steps, evaluating time-series heads
/// at each new time.
pub fn run_transient(
    mesh: &Mesh,
    sys: &GlobalSystem,
    bc: &BoundarySpec,
    initial: &[f64],
    cfg: &TimeConfig,
    solver: LinearSolver,
) -> Result<FieldResult> {
    cfg.validate()?;
    let mut load = flux_load(mesh, bc)?;
    for (a, b) in load.iter_mut().zip(&sys.load) {
        *a += b;
    }
    let mut stepper = TransientStepper::new(sys, cfg.dt, solver)?;
    let mut out = FieldResult::new_for(bc);
    let mut h = initial.to_vec();
    for (&n, &v) in &resolve_dirichlet(mesh, bc, 0.0)? {
        h[n] = v;
    }
    out.record(mesh, sys, 0.0, h.clone())?;
    for step in 1..=cfg.n_steps {
        let t = step as f64 * cfg.dt;
        let c = resolve_dirichlet(mesh, bc, t)?;
        let (next, report) = stepper.step(&load, &c, &h)?;
        h = next;
        out.report = report;
        if step % cfg.output_stride == 0 || step == cfg.n_steps {
            out.record(mesh, sys, t, h.clone())?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::stacked_column;
    use crate::sbfem::{ElementOperators, ElementOptions};
    use crate::solver::{assemble_global, solve_steady, DirichletSpec, HeadValue, Material};

    #[test]
    fn scalar_step() {
        let k = CsrMatrix::from_triplets(1, vec![(0, 0, 1.0)]);
        let sys = GlobalSystem {
            k: k.clone(),
            m: k,
            load: vec![1.0],
            elements: Vec::<ElementOperators>::new(),
            materials: vec![],
            k_scale: vec![],
            locator: Default::default(),
        };
        let h =
            step_transient(&sys, &Constraints::new(), &[0.0], 1.0, LinearSolver::Direct).unwrap();
        assert!((h[0] - 0.5).abs() < 1e-15);
    }

    fn column(n: usize) -> (Mesh, GlobalSystem, BoundarySpec) {
        let mut mesh = stacked_column(n);
        let top = mesh.select_nodes(|p| (p.z - n as f64).abs() < 1e-12);
        let bottom = mesh.select_nodes(|p| p.z.abs() < 1e-12);
        mesh.node_sets.insert("top".into(), top);
        mesh.node_sets.insert("bottom".into(), bottom);
        let sys = assemble_global(
            &mesh,
            &vec![Material::isotropic("s", 1.0, 1.0); n],
            &ElementOptions::default(),
        )
        .unwrap();
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
            ..Default::default()
        };
        (mesh, sys, bc)
    }

    #[test]
    fn steady_state_is_fixed_point() {
        let (mesh, sys, bc) = column(4);
        let s = solve_steady(&mesh, &sys, &bc, LinearSolver::Direct).unwrap();
        let c = resolve_dirichlet(&mesh, &bc, 1.0).unwrap();
        let h = step_transient(&sys, &c, s.last_heads(), 0.1, LinearSolver::Direct).unwrap();
        for (a, b) in h.iter().zip(s.last_heads()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn energy_decays_towards_steady_state() {
        let (mesh, sys, bc) = column(6);
        let inf = solve_steady(&mesh, &sys, &bc, LinearSolver::Direct)
            .unwrap()
            .last_heads()
            .to_vec();
        let cfg = TimeConfig {
            dt: 0.2,
            n_steps: 100,
            output_stride: 1,
        };
        let r = run_transient(
            &mesh,
            &sys,
            &bc,
            &vec![0.0; mesh.num_nodes()],
            &cfg,
            LinearSolver::Direct,
        )
        .unwrap();
        let energy = |h: &[f64]| {
            let d: Vec<f64> = h.iter().zip(&inf).map(|(a, b)| a - b).collect();
            d.iter()
                .zip(sys.m.matvec(&d))
                .map(|(a, b)| a * b)
                .sum::<f64>()
        };
        let e: Vec<f64> = r.heads.iter().map(|h| energy(h)).collect();
        for w in e[1..].windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{:?}", w);
        }
        assert!(e.last().unwrap() < &(1e-3 * e[1]));
        assert_eq!(r.times.len(), 101);
    }

    #[test]
    fn uniform_heads_stay_uniform() {
        let (mesh, sys, mut bc) = column(3);
        for d in &mut bc.dirichlet {
            d.head = HeadValue::Constant(2.5);
        }
        let cfg = TimeConfig {
            dt: 1.0,
            n_steps: 5,
            output_stride: 2,
        };
        let r = run_transient(
            &mesh,
            &sys,
            &bc,
            &vec![2.5; mesh.num_nodes()],
            &cfg,
            LinearSolver::Direct,
        )
        .unwrap();
        assert_eq!(r.times, vec![0.0, 2.0, 4.0, 5.0]);
        assert!(r.heads.iter().flatten().all(|h| (h - 2.5).abs() < 1e-12));
    }
}
