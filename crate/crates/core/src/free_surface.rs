//! Fixed-mesh free-surface iteration: elements above the current phreatic
//! surface get a reduced conductivity, the downstream seepage face is fixed
//! at `h = z`, and the surface is recovered from the zero of the pressure
//! head along vertical columns.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point3};
use crate::sbfem::ElementOptions;
use crate::solver::{
    assemble_global, sample_head, solve_constrained, Constraints, FieldResult, GlobalSystem,
    LinearSolver, Material,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FreeSurfaceConfig {
    /// Stop when no column moves more than this (m).
    pub epsilon: f64,
    pub max_iters: usize,
    /// Conductivity multiplier of dry elements.
    pub dry_factor: f64,
    /// Under-relaxation of the surface update, in (0, 1].
    pub relaxation: f64,
}

impl Default for FreeSurfaceConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-4,
            max_iters: 100,
            dry_factor: 1e-3,
            relaxation: 0.5,
        }
    }
}

impl FreeSurfaceConfig {
    /// Defaults with the tolerance scaled to a dam of height `height`.
    pub fn for_height(height: f64) -> Self {
        Self {
            epsilon: 1e-4 * height,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(
                "free surface epsilon must be positive".into(),
            ));
        }
        if !(self.dry_factor > 0.0 && self.dry_factor < 1.0) {
            return Err(Error::Config("dry_factor must lie in (0, 1)".into()));
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(Error::Config("relaxation must lie in (0, 1]".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Structured grid of vertical sample columns; `phi[j * xs.len() + i]` sits
/// at `(xs[i], ys[j])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl ColumnGrid {
    pub fn len(&self) -> usize {
        self.xs.len() * self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn position(&self, c: usize) -> (f64, f64) {
        (self.xs[c % self.xs.len()], self.ys[c / self.xs.len()])
    }

    /// Columns through every distinct node x of the mesh, at one y.
    pub fn through_nodes(mesh: &Mesh, y: f64) -> Self {
        let bb = mesh.bounding_box();
        let tol = 1e-9 * bb.diagonal();
        let mut xs: Vec<f64> = mesh.nodes.iter().map(|p| p.x).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup_by(|a, b| (*a - *b).abs() < tol);
        Self { xs, ys: vec![y] }
    }

    /// Bilinear interpolation of column values, held constant outside.
    pub fn interpolate(&self, phi: &[f64], x: f64, y: f64) -> f64 {
        let bracket = |v: &[f64], t: f64| -> (usize, usize, f64) {
            if v.len() == 1 || t <= v[0] {
                return (0, 0, 0.0);
            }
            if t >= v[v.len() - 1] {
                return (v.len() - 1, v.len() - 1, 0.0);
            }
            let i = v.partition_point(|&a| a <= t) - 1;
            (i, i + 1, (t - v[i]) / (v[i + 1] - v[i]))
        };
        let (i0, i1, tx) = bracket(&self.xs, x);
        let (j0, j1, ty) = bracket(&self.ys, y);
        let nx = self.xs.len();
        let at = |i: usize, j: usize| phi[j * nx + i];
        (1.0 - ty) * ((1.0 - tx) * at(i0, j0) + tx * at(i1, j0))
            + ty * ((1.0 - tx) * at(i0, j1) + tx * at(i1, j1))
    }
}

/// Steady unconfined problem with an upstream reservoir, a downstream
/// tailwater and an impermeable base.
#[derive(Clone, Debug)]
pub struct FreeSurfaceProblem {
    pub mesh: Mesh,
    pub materials: Vec<Material>,
    pub upstream_set: String,
    pub upstream_head: f64,
    /// Nodes of the downstream face; those above the tailwater form the
    /// candidate seepage face.
    pub downstream_set: String,
    pub downstream_head: f64,
    pub columns: ColumnGrid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreeSurfaceState {
    pub phi: Vec<f64>,
    /// Seepage-face nodes held at `h = z`.
    pub overflow_set: Vec<usize>,
    pub wet_flags: Vec<bool>,
    pub iteration: usize,
    /// Surface elevation on the downstream face (the exit point).
    pub exit_elevation: f64,
    /// Largest column change per iteration.
    pub history: Vec<f64>,
    /// Column elevations after each iteration.
    pub surfaces: Vec<Vec<f64>>,
}

/// Wet iff the centroid is not above the surface; dry elements get
/// `dry_factor` times their conductivity.
pub fn classify_elements(
    mesh: &Mesh,
    columns: &ColumnGrid,
    phi: &[f64],
    dry_factor: f64,
) -> (Vec<bool>, Vec<f64>) {
    let mut wet = Vec::with_capacity(mesh.num_elements());
    let mut scale = Vec::with_capacity(mesh.num_elements());
    for e in 0..mesh.num_elements() {
        let (_, c) = mesh.element_volume_centroid(e);
        let w = c.z <= columns.interpolate(phi, c.x, c.y);
        wet.push(w);
        scale.push(if w { 1.0 } else { dry_factor });
    }
    (wet, scale)
}

/// Seepage face for the current exit elevation: downstream nodes strictly
/// above the tailwater and not above `exit`, minus `excluded`.
pub fn update_overflow_boundary(
    mesh: &Mesh,
    downstream: &[usize],
    downstream_head: f64,
    exit: f64,
    excluded: &BTreeSet<usize>,
) -> Result<Vec<usize>> {
    if downstream.is_empty() {
        return Err(Error::Config("downstream face has no nodes".into()));
    }
    let tol = 1e-9 * mesh.bounding_box().diagonal();
    Ok(downstream
        .iter()
        .copied()
        .filter(|n| {
            let z = mesh.nodes[*n].z;
            z > downstream_head + tol && z <= exit + tol && !excluded.contains(n)
        })
        .collect())
}

fn constraints(p: &FreeSurfaceProblem, overflow: &[usize]) -> Result<Constraints> {
    let set = |name: &str| {
        p.mesh
            .node_sets
            .get(name)
            .ok_or_else(|| Error::Config(format!("unknown node set {name}")))
    };
    let mut c = Constraints::new();
    let tol = 1e-9 * p.mesh.bounding_box().diagonal();
    for &n in set(&p.upstream_set)? {
        if p.mesh.nodes[n].z <= p.upstream_head + tol {
            c.insert(n, p.upstream_head);
        }
    }
    for &n in set(&p.downstream_set)? {
        if p.mesh.nodes[n].z <= p.downstream_head + tol {
            c.insert(n, p.downstream_head);
        }
    }
    for &n in overflow {
        c.insert(n, p.mesh.nodes[n].z);
    }
    Ok(c)
}

/// Highest elevation where the pressure head changes sign, scanning down a
/// column of `(z, h − z)` samples sorted by z and interpolating linearly.
fn crossing(samples: &[(f64, f64)]) -> Option<f64> {
    let (first, last) = (samples.first()?, samples.last()?);
    if last.1 >= 0.0 {
        return Some(last.0);
    }
    for w in samples.windows(2).rev() {
        let ((z0, p0), (z1, p1)) = (w[0], w[1]);
        if p0 >= 0.0 {
            return Some(z0 + (z1 - z0) * p0 / (p0 - p1));
        }
    }
    Some(first.0)
}

fn column_samples(
    mesh: &Mesh,
    sys: &GlobalSystem,
    heads: &[f64],
    x: f64,
    y: f64,
    levels: &[f64],
) -> Vec<(f64, f64)> {
    levels
        .iter()
        .filter_map(|&z| {
            sample_head(mesh, sys, heads, &Point3::new(x, y, z))
                .ok()
                .map(|h| (z, h - z))
        })
        .collect()
}

/// Floor of the adaptive relaxation.
const MIN_RELAXATION: f64 = 1.0 / 1024.0;

/// Iterates solve → surface recovery → relaxation → reclassification until
/// the surface moves less than `epsilon`.
pub fn iterate_free_surface(
    p: &FreeSurfaceProblem,
    cfg: &FreeSurfaceConfig,
    options: &ElementOptions,
    solver: LinearSolver,
) -> Result<(FieldResult, FreeSurfaceState)> {
    cfg.validate()?;
    if p.columns.is_empty() {
        return Err(Error::Config(
            "free surface needs at least one sample column".into(),
        ));
    }
    let (lo, hi) = (p.downstream_head, p.upstream_head);
    let mut sys = assemble_global(&p.mesh, &p.materials, options)?;
    let downstream = p
        .mesh
        .node_sets
        .get(&p.downstream_set)
        .ok_or_else(|| Error::Config(format!("unknown node set {}", p.downstream_set)))?
        .clone();
    let tol = 1e-9 * p.mesh.bounding_box().diagonal();
    let mut levels: Vec<f64> = p.mesh.nodes.iter().map(|q| q.z).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup_by(|a, b| (*a - *b).abs() < tol);
    let face_x = downstream
        .iter()
        .map(|&n| p.mesh.nodes[n].x)
        .fold(f64::NEG_INFINITY, f64::max);
    // On a sloped face no column runs along the face, so the exit is the
    // highest seepage node that still discharges.
    let vertical_face = downstream
        .iter()
        .all(|&n| (p.mesh.nodes[n].x - face_x).abs() < tol);

    // First pass: flat surface at the reservoir level, seepage face up to it.
    let mut phi = vec![hi; p.columns.len()];
    let mut exit = hi;
    let mut excluded = BTreeSet::new();
    let mut history: Vec<f64> = Vec::new();
    let mut surfaces: Vec<Vec<f64>> = Vec::new();
    let mut omega = cfg.relaxation;
    for iteration in 1..=cfg.max_iters {
        let (wet, scale) = classify_elements(&p.mesh, &p.columns, &phi, cfg.dry_factor);
        sys.rescale_conductivity(&scale)?;
        let overflow = update_overflow_boundary(&p.mesh, &downstream, lo, exit, &excluded)?;
        let c = constraints(p, &overflow)?;
        let (heads, report) = solve_constrained(&sys.k, &vec![0.0; sys.num_dofs()], &c, solver)?;

        // Seepage-face nodes that draw water in are inadmissible.
        let reaction = sys.k.matvec(&heads);
        let scale_q = reaction.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut admissible_top = lo;
        for &n in &overflow {
            if reaction[n] > 1e-12 * scale_q {
                excluded.insert(n);
            } else {
                admissible_top = admissible_top.max(p.mesh.nodes[n].z);
            }
        }

        let mut new_phi = Vec::with_capacity(phi.len());
        for col in 0..p.columns.len() {
            let (x, y) = p.columns.position(col);
            let samples = if vertical_face && (x - face_x).abs() < tol {
                // On the seepage face h = z exactly; inadmissible nodes count
                // as unsaturated.
                let mut s: Vec<(f64, f64)> = downstream
                    .iter()
                    .filter(|&&n| (p.mesh.nodes[n].y - y).abs() < tol)
                    .map(|&n| {
                        let z = p.mesh.nodes[n].z;
                        (
                            z,
                            if excluded.contains(&n) {
                                -f64::MIN_POSITIVE
                            } else {
                                heads[n] - z
                            },
                        )
                    })
                    .collect();
                s.sort_by(|a, b| a.0.total_cmp(&b.0));
                s
            } else {
                column_samples(&p.mesh, &sys, &heads, x, y, &levels)
            };
            let v = crossing(&samples).unwrap_or(phi[col]);
            new_phi.push(v.clamp(lo, hi));
        }
        let mut change = 0.0f64;
        for (old, new) in phi.iter_mut().zip(&new_phi) {
            let relaxed = *old + omega * (new - *old);
            change = change.max((relaxed - *old).abs());
            *old = relaxed;
        }
        // Wet/dry switching makes the update discontinuous, so a fixed
        // relaxation can cycle; halve it whenever the surface moves more than
        // it did last time.
        if history.last().is_some_and(|&prev| change >= prev) {
            omega = (omega * 0.5).max(MIN_RELAXATION);
        }
        history.push(change);
        surfaces.push(phi.clone());
        let face_cols: Vec<usize> = (0..p.columns.len())
            .filter(|&c| (p.columns.position(c).0 - face_x).abs() < tol)
            .collect();
        if !vertical_face {
            exit = admissible_top;
        } else if !face_cols.is_empty() {
            exit = face_cols
                .iter()
                .map(|&c| phi[c])
                .fold(f64::NEG_INFINITY, f64::max);
        }
        log::debug!(
            "free surface iteration {iteration}: max change {change:.3e}, exit {admissible_top:.6}"
        );
        if change < cfg.epsilon {
            let mut out = FieldResult::default();
            out.report = report;
            let state = FreeSurfaceState {
                phi,
                overflow_set: overflow,
                wet_flags: wet,
                iteration,
                exit_elevation: exit,
                history,
                surfaces,
            };
            out.record(&p.mesh, &sys, 0.0, heads)?;
            return Ok((out, state));
        }
    }
    let tail: Vec<String> = history
        .iter()
        .rev()
        .take(6)
        .rev()
        .map(|v| format!("{v:.3e}"))
        .collect();
    let oscillating = history
        .windows(3)
        .rev()
        .take(4)
        .any(|w| (w[2] - w[0]).abs() < 0.05 * w[0]);
    Err(Error::NonConvergence {
        iterations: cfg.max_iters,
        last_change: *history.last().unwrap_or(&f64::NAN),
        diagnostics: format!(
            "recent maximum changes [{}]{}",
            tail.join(", "),
            if oscillating {
                "; the surface appears to oscillate, try a smaller relaxation"
            } else {
                ""
            }
        ),
    })
}
