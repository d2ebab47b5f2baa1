use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::case::{AnalysisKind, PreparedCase, Reference};
use super::vtk::{write_vtk, VtkFields};
use crate::error::{Error, Result};
use crate::free_surface::{iterate_free_surface, ColumnGrid, FreeSurfaceProblem, FreeSurfaceState};
use crate::mesh::Mesh;
use crate::solver::{assemble_global, run_transient, solve_steady, FieldResult, TimeConfig};
use crate::verification::{column_series, tet_fem_solve};

/// Everything a run produced. `summary` depends only on the inputs;
/// wall-clock times live in `timings`.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub summary: Value,
    pub timings: Value,
    pub mesh: Mesh,
    pub result: FieldResult,
    pub free_surface: Option<FreeSurfaceState>,
}

fn secs(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

fn final_monitors(r: &FieldResult) -> Map<String, Value> {
    r.monitors
        .iter()
        .map(|m| {
            (
                m.label.clone(),
                json!(m.values.last().copied().unwrap_or(f64::NAN)),
            )
        })
        .collect()
}

/// Runs the analysis of a prepared case.
pub fn run_case(p: &PreparedCase) -> Result<RunOutput> {
    let start = Instant::now();
    let case = &p.case;
    let mut summary = Map::new();
    let mut timings = Map::new();
    summary.insert("case".into(), json!(case.name));
    let polyhedra = (0..p.mesh.num_elements())
        .filter(|&e| p.mesh.elements[e].faces.len() != 6 || p.mesh.element_nodes(e).len() != 8)
        .count();
    summary.insert(
        "mesh".into(),
        json!({
            "nodes": p.mesh.num_nodes(),
            "elements": p.mesh.num_elements(),
            "faces": p.mesh.faces.len(),
            "non_hexahedral_elements": polyhedra,
        }),
    );
    let mut free_surface = None;
    let result = match &case.analysis {
        AnalysisKind::Steady => {
            summary.insert("analysis".into(), json!("steady"));
            let t = Instant::now();
            let sys = assemble_global(&p.mesh, &p.materials, &p.options)?;
            timings.insert("assembly_s".into(), json!(secs(t)));
            let t = Instant::now();
            let r = solve_steady(&p.mesh, &sys, &case.boundary, p.solver)?;
            timings.insert("solve_s".into(), json!(secs(t)));
            r
        }
        AnalysisKind::Transient {
            dt,
            n_steps,
            output_stride,
            initial_head,
        } => {
            summary.insert("analysis".into(), json!("transient"));
            let t = Instant::now();
            let sys = assemble_global(&p.mesh, &p.materials, &p.options)?;
            timings.insert("assembly_s".into(), json!(secs(t)));
            let cfg = TimeConfig {
                dt: *dt,
                n_steps: *n_steps,
                output_stride: *output_stride,
            };
            let t = Instant::now();
            let init = vec![*initial_head; p.mesh.num_nodes()];
            let r = run_transient(&p.mesh, &sys, &case.boundary, &init, &cfg, p.solver)?;
            timings.insert("solve_s".into(), json!(secs(t)));
            summary.insert(
                "transient".into(),
                json!({"dt": dt, "steps": n_steps, "final_time": *dt * *n_steps as f64, "outputs": r.times.len()}),
            );
            r
        }
        AnalysisKind::FreeSurface {
            upstream_set,
            upstream_head,
            downstream_set,
            downstream_head,
            column_y,
            config,
        } => {
            summary.insert("analysis".into(), json!("free_surface"));
            let y = column_y.unwrap_or(p.mesh.bounding_box().min[1]);
            let problem = FreeSurfaceProblem {
                mesh: p.mesh.clone(),
                materials: p.materials.clone(),
                upstream_set: upstream_set.clone(),
                upstream_head: *upstream_head,
                downstream_set: downstream_set.clone(),
                downstream_head: *downstream_head,
                columns: ColumnGrid::through_nodes(&p.mesh, y),
            };
            let t = Instant::now();
            let (r, state) =
                iterate_free_surface(&problem, &config.unwrap_or_default(), &p.options, p.solver)?;
            timings.insert("solve_s".into(), json!(secs(t)));
            summary.insert(
                "free_surface".into(),
                json!({
                    "iterations": state.iteration,
                    "exit_elevation": state.exit_elevation,
                    "seepage_nodes": state.overflow_set.len(),
                    "dry_elements": state.wet_flags.iter().filter(|w| !**w).count(),
                    "last_change": state.history.last(),
                }),
            );
            free_surface = Some(state);
            r
        }
    };
    summary.insert(
        "solve".into(),
        serde_json::to_value(&result.report).expect("report serializes"),
    );
    summary.insert("monitors".into(), Value::Object(final_monitors(&result)));
    if let Some(reference) = &case.reference {
        let t = Instant::now();
        let score = score(p, reference, &result, free_surface.as_ref())?;
        timings.insert("reference_s".into(), json!(secs(t)));
        summary.insert("reference".into(), score);
    }
    timings.insert("total_s".into(), json!(secs(start)));
    Ok(RunOutput {
        summary: Value::Object(summary),
        timings: Value::Object(timings),
        mesh: p.mesh.clone(),
        result,
        free_surface,
    })
}

fn rel(value: f64, reference: f64) -> f64 {
    (value - reference).abs() / reference.abs().max(f64::MIN_POSITIVE)
}

fn score(
    p: &PreparedCase,
    reference: &Reference,
    r: &FieldResult,
    fs: Option<&FreeSurfaceState>,
) -> Result<Value> {
    let fold = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0f64, f64::max);
    Ok(match reference {
        Reference::Linear { a, gradient } => {
            let exact = |q: &crate::mesh::Point3| {
                a + gradient[0] * q.x + gradient[1] * q.y + gradient[2] * q.z
            };
            let worst = fold(
                &mut r
                    .last_heads()
                    .iter()
                    .zip(&p.mesh.nodes)
                    .map(|(h, q)| rel(*h, exact(q))),
            );
            json!({"kind": "linear", "max_relative_error": worst})
        }
        Reference::Monitors { values } => {
            let mut per = Map::new();
            let mut worst = 0.0f64;
            for (label, &want) in values {
                let got = *r
                    .monitor(label)
                    .and_then(|m| m.values.last())
                    .ok_or_else(|| Error::Config(format!("monitor {label} has no value")))?;
                let e = rel(got, want);
                worst = worst.max(e);
                per.insert(
                    label.clone(),
                    json!({"value": got, "reference": want, "relative_error": e}),
                );
            }
            json!({"kind": "monitors", "max_relative_error": worst, "per_monitor": per})
        }
        Reference::ExitElevation { value } => {
            let got = fs.map(|s| s.exit_elevation).unwrap_or(f64::NAN);
            json!({"kind": "exit_elevation", "value": got, "reference": value, "relative_error": rel(got, *value), "max_relative_error": rel(got, *value)})
        }
        Reference::ColumnSeries {
            length,
            diffusivity,
            h0,
            h1,
            terms,
        } => {
            let t = *r.times.last().unwrap_or(&0.0);
            let mut worst = 0.0f64;
            let mut worst_step = 0.0f64;
            for m in &r.monitors {
                let exact = column_series(m.point[2], t, *length, *diffusivity, *h0, *h1, *terms);
                let got = *m.values.last().unwrap_or(&f64::NAN);
                worst = worst.max(rel(got, exact));
                worst_step = worst_step.max((got - exact).abs() / (h1 - h0).abs());
            }
            json!({"kind": "column_series", "time": t, "max_relative_error": worst, "max_step_normalized_error": worst_step})
        }
        Reference::TetCrossCheck => {
            let (tm, tets) = tet_fem_solve(&p.mesh, &p.materials, &p.case.boundary, p.solver)?;
            let mut per = Map::new();
            let mut worst = 0.0f64;
            for (a, b) in r.monitors.iter().zip(&tets.monitors) {
                let (x, y) = (a.values[0], b.values[0]);
                worst = worst.max(rel(x, y));
                per.insert(
                    a.label.clone(),
                    json!({"polyhedral": x, "tetrahedral": y, "relative_difference": rel(x, y)}),
                );
            }
            json!({"kind": "tet_cross_check", "tetrahedra": tm.tets.len(), "max_relative_error": worst, "per_monitor": per})
        }
    })
}

/// Monitor histories as CSV, one row per output time, 12 significant digits.
pub fn monitors_csv(r: &FieldResult) -> String {
    let mut s = String::from("time");
    for m in &r.monitors {
        write!(s, ",{}", m.label).unwrap();
    }
    s.push('\n');
    for (i, t) in r.times.iter().enumerate() {
        write!(s, "{t:.11e}").unwrap();
        for m in &r.monitors {
            write!(s, ",{:.11e}", m.values[i]).unwrap();
        }
        s.push('\n');
    }
    s
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Legacy VTK grid holding one poly-line cell.
fn polyline_vtk(points: &[[f64; 3]], title: &str) -> String {
    let mut s = format!("# vtk DataFile Version 3.0\n{title} free surface\nASCII\nDATASET UNSTRUCTURED_GRID\nPOINTS {} double\n", points.len());
    for p in points {
        writeln!(s, "{:e} {:e} {:e}", p[0], p[1], p[2]).unwrap();
    }
    writeln!(s, "CELLS 1 {}", points.len() + 1).unwrap();
    s.push_str(&points.len().to_string());
    for i in 0..points.len() {
        write!(s, " {i}").unwrap();
    }
    s.push_str("\nCELL_TYPES 1\n4\n");
    s
}

/// Writes `summary.json`, `timings.json`, monitor CSVs (all monitors
/// together and one file each) and VTK fields into `dir`.
pub fn write_outputs(p: &PreparedCase, out: &RunOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(
        &dir.join("summary.json"),
        &(serde_json::to_string_pretty(&out.summary).unwrap() + "\n"),
    )?;
    write(
        &dir.join("timings.json"),
        &(serde_json::to_string_pretty(&out.timings).unwrap() + "\n"),
    )?;
    if p.case.outputs.monitors_csv && !out.result.monitors.is_empty() {
        write(&dir.join("monitors.csv"), &monitors_csv(&out.result))?;
        for m in &out.result.monitors {
            let mut s = String::from("time,head\n");
            for (t, h) in out.result.times.iter().zip(&m.values) {
                writeln!(s, "{t:.11e},{h:.11e}").unwrap();
            }
            write(&dir.join(format!("monitor_{}.csv", m.label)), &s)?;
        }
    }
    if let Some(fs) = &out.free_surface {
        let mut s = String::from("iteration,x,y,phi\n");
        let y = match &p.case.analysis {
            AnalysisKind::FreeSurface { column_y, .. } => {
                column_y.unwrap_or(out.mesh.bounding_box().min[1])
            }
            _ => 0.0,
        };
        let cols = ColumnGrid::through_nodes(&out.mesh, y);
        for (it, phi) in fs.surfaces.iter().enumerate() {
            for (c, z) in phi.iter().enumerate() {
                let (x, y) = cols.position(c);
                writeln!(s, "{},{x:.11e},{y:.11e},{z:.11e}", it + 1).unwrap();
            }
        }
        write(&dir.join("free_surface.csv"), &s)?;
        if p.case.outputs.vtk {
            let points: Vec<[f64; 3]> = fs
                .phi
                .iter()
                .enumerate()
                .map(|(c, &z)| {
                    let (x, y) = cols.position(c);
                    [x, y, z]
                })
                .collect();
            write(
                &dir.join("free_surface.vtk"),
                &polyline_vtk(&points, &p.case.name),
            )?;
        }
    }
    if p.case.outputs.vtk {
        let n = out.result.heads.len();
        for (i, (h, q)) in out.result.heads.iter().zip(&out.result.flux).enumerate() {
            let name = if n == 1 {
                "field.vtk".to_string()
            } else {
                format!("field_{i:04}.vtk")
            };
            let title = format!("{} t={:e}", p.case.name, out.result.times[i]);
            write_vtk(
                dir.join(name),
                &out.mesh,
                &VtkFields::seepage(&out.mesh, h, q),
                &title,
            )?;
        }
    }
    Ok(())
}

/// Tolerances for one case, kept apart from the case itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectations {
    pub checks: Vec<Check>,
}

/// Bound on a metric addressed by a dotted path into the summary, or into
/// the timings with a `timings.` prefix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Check {
    pub metric: String,
    #[serde(default)]
    pub min: Option<f64>,
    #[serde(default)]
    pub max: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub metric: String,
    pub value: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub passed: bool,
}

pub fn load_expectations(path: impl AsRef<Path>) -> Result<Expectations> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| {
        Error::Config(format!(
            "{}: line {}, column {}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })
}

fn lookup(v: &Value, path: &str) -> Option<f64> {
    path.split('.').try_fold(v, |v, key| v.get(key))?.as_f64()
}

impl Expectations {
    pub fn evaluate(&self, out: &RunOutput) -> Vec<CheckOutcome> {
        self.checks
            .iter()
            .map(|c| {
                let value = match c.metric.strip_prefix("timings.") {
                    Some(rest) => lookup(&out.timings, rest),
                    None => lookup(&out.summary, &c.metric),
                };
                let passed = value.is_some_and(|v| {
                    !v.is_nan() && c.min.is_none_or(|lo| v >= lo) && c.max.is_none_or(|hi| v <= hi)
                });
                CheckOutcome {
                    metric: c.metric.clone(),
                    value,
                    min: c.min,
                    max: c.max,
                    passed,
                }
            })
            .collect()
    }
}

/// One row of a mesh or time-step study.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StudyRow {
    pub parameter: f64,
    pub elements: usize,
    pub max_relative_error: Option<f64>,
    pub monitors: BTreeMap<String, f64>,
    /// Largest monitor change from the previous row.
    pub change: Option<f64>,
    /// Previous change over this one; about 2 for a first-order scheme under
    /// step halving.
    pub ratio: Option<f64>,
}

fn study_row(parameter: f64, out: &RunOutput) -> StudyRow {
    let monitors = out
        .result
        .monitors
        .iter()
        .map(|m| (m.label.clone(), *m.values.last().unwrap_or(&f64::NAN)))
        .collect();
    StudyRow {
        parameter,
        elements: out.mesh.num_elements(),
        max_relative_error: lookup(&out.summary, "reference.max_relative_error"),
        monitors,
        change: None,
        ratio: None,
    }
}

fn fill_changes(rows: &mut [StudyRow]) {
    for i in 1..rows.len() {
        let (prev, cur) = (&rows[i - 1].monitors, &rows[i].monitors);
        let d = cur
            .iter()
            .map(|(k, v)| (v - prev.get(k).copied().unwrap_or(f64::NAN)).abs())
            .fold(0.0, f64::max);
        rows[i].change = Some(d);
        if let Some(p) = rows[i - 1].change {
            rows[i].ratio = Some(p / d);
        }
    }
}

/// Reruns the case once per element size.
pub fn size_study(p: &PreparedCase, base_dir: &Path, sizes: &[f64]) -> Result<Vec<StudyRow>> {
    let mut rows = Vec::new();
    for &s in sizes {
        let mut case = p.case.clone();
        case.mesh = case.mesh.with_size(s)?;
        let prepared = case.prepare(base_dir)?;
        rows.push(study_row(s, &run_case(&prepared)?));
    }
    fill_changes(&mut rows);
    Ok(rows)
}

/// Reruns a transient case once per step length, keeping the end time.
pub fn dt_study(p: &PreparedCase, dts: &[f64]) -> Result<Vec<StudyRow>> {
    let AnalysisKind::Transient {
        dt,
        n_steps,
        initial_head,
        ..
    } = p.case.analysis
    else {
        return Err(Error::Config(
            "time-step study needs a transient case".into(),
        ));
    };
    let t_end = dt * n_steps as f64;
    let mut rows = Vec::new();
    for &d in dts {
        let steps = (t_end / d).round() as usize;
        if steps == 0 || ((steps as f64 * d - t_end).abs() > 1e-9 * t_end) {
            return Err(Error::Config(format!(
                "step {d} does not divide the end time {t_end}"
            )));
        }
        let mut prepared = p.clone();
        prepared.case.analysis = AnalysisKind::Transient {
            dt: d,
            n_steps: steps,
            output_stride: steps,
            initial_head,
        };
        rows.push(study_row(d, &run_case(&prepared)?));
    }
    fill_changes(&mut rows);
    Ok(rows)
}

pub fn study_csv(rows: &[StudyRow], parameter: &str) -> String {
    let labels: Vec<&String> = rows
        .first()
        .map(|r| r.monitors.keys().collect())
        .unwrap_or_default();
    let mut s = format!("{parameter},elements,max_relative_error,change,ratio");
    for l in &labels {
        write!(s, ",{l}").unwrap();
    }
    s.push('\n');
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.11e}")).unwrap_or_default();
    for r in rows {
        write!(
            s,
            "{:.11e},{},{},{},{}",
            r.parameter,
            r.elements,
            opt(r.max_relative_error),
            opt(r.change),
            opt(r.ratio)
        )
        .unwrap();
        for l in &labels {
            write!(s, ",{:.11e}", r.monitors[*l]).unwrap();
        }
        s.push('\n');
    }
    s
}
