//! One PASS/FAIL line per acceptance criterion. Every criterion runs even if
//! an earlier one fails; the test fails at the end if any did.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use psbfem::io::{dt_study, load_case, run_case, size_study, PreparedCase, RunOutput};
use psbfem::sbfem::ElementOptions;
use psbfem::solver::Material;
use psbfem::verification::{check_element, random_corpus, wachspress_suite};

fn cases() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../cases")
}

fn prepare(name: &str) -> PreparedCase {
    let path = cases().join(format!("{name}.json"));
    load_case(&path)
        .and_then(|c| c.prepare(&cases()))
        .unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn run(name: &str) -> RunOutput {
    run_case(&prepare(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn metric(out: &RunOutput, path: &str) -> f64 {
    let (root, rest) = match path.strip_prefix("timings.") {
        Some(r) => (&out.timings, r),
        None => (&out.summary, path),
    };
    rest.split('.')
        .try_fold(root, |v, k| v.get(k))
        .and_then(|v| v.as_f64())
        .unwrap_or_else(|| panic!("no metric {path}"))
}

struct Report(Vec<(usize, bool)>);

impl Report {
    fn record(&mut self, n: usize, ok: bool, detail: String) {
        println!(
            "{} criterion {n}: {detail}",
            if ok { "PASS" } else { "FAIL" }
        );
        self.0.push((n, ok));
    }
}

fn patch(r: &mut Report) {
    let out = run("patch");
    let (err, t) = (
        metric(&out, "reference.max_relative_error"),
        metric(&out, "timings.total_s"),
    );
    r.record(
        1,
        err <= 1e-4 && t < 1.0,
        format!("patch max nodal error {err:.3e}, {t:.3}s"),
    );
}

fn dam(r: &mut Report) {
    let out = run("dam_10m");
    let (m1, m2) = (metric(&out, "monitors.m1"), metric(&out, "monitors.m2"));
    let err = metric(&out, "reference.max_relative_error");
    let t = metric(&out, "timings.total_s");
    r.record(
        2,
        err <= 0.02 && t < 60.0,
        format!("dam at 10 m: m1 {m1:.4}, m2 {m2:.4}, max error {err:.3e}, {t:.2}s"),
    );
}

fn convergence(r: &mut Report) {
    let rows =
        size_study(&prepare("dam_convergence"), &cases(), &[20.0, 10.0, 5.0]).expect("size study");
    let errs: Vec<f64> = rows
        .iter()
        .map(|row| row.max_relative_error.expect("reference"))
        .collect();
    let shown: Vec<String> = errs.iter().map(|e| format!("{e:.3e}")).collect();
    let monotone = errs.windows(2).all(|w| w[1] < w[0]);
    let oct = run("dam_octree");
    let fine = run("dam_hex_fine");
    let (eo, ef) = (
        metric(&oct, "reference.max_relative_error"),
        metric(&fine, "reference.max_relative_error"),
    );
    let (no, nf) = (
        metric(&oct, "mesh.elements"),
        metric(&fine, "mesh.elements"),
    );
    let close = (eo - ef).abs() <= 0.1 * ef;
    r.record(
        3,
        monotone && close && no < nf,
        format!("errors over 20/10/5 m [{}]; octree {eo:.3e} with {no} elements vs uniform fine {ef:.3e} with {nf}", shown.join(", ")),
    );
}

fn free_surface(r: &mut Report) {
    let out = run("rectangular_dam");
    let exit = metric(&out, "free_surface.exit_elevation");
    let err = metric(&out, "reference.relative_error");
    let it = metric(&out, "free_surface.iterations");
    let t = metric(&out, "timings.total_s");
    r.record(
        4,
        err <= 0.01 && it <= 50.0 && t < 120.0,
        format!("exit {exit:.6}, error {err:.3e}, {it} iterations, {t:.2}s"),
    );
}

fn element_suite(r: &mut Report) {
    let start = Instant::now();
    let material = Material::isotropic("unit", 1.0, 1.0);
    let options = ElementOptions::default();
    let mut failed = Vec::new();
    for (i, m) in random_corpus(2024, 50).iter().enumerate() {
        match check_element(m, 0, &material, &options) {
            Ok(c) if c.passes() => {}
            Ok(c) => failed.push(format!("{i}: {:?}", c.failures())),
            Err(e) => failed.push(format!("{i}: {e}")),
        }
    }
    let t = start.elapsed().as_secs_f64();
    r.record(
        5,
        failed.is_empty() && t < 60.0,
        format!("50 random polyhedra, failures {failed:?}, {t:.2}s"),
    );
}

fn wachspress(r: &mut Report) {
    let start = Instant::now();
    let s = wachspress_suite(2024, 1000).expect("suite");
    let t = start.elapsed().as_secs_f64();
    let ok = s.points == 1000
        && s.partition_error <= 1e-12
        && s.linear_error <= 1e-12
        && s.gradient_error <= 1e-7
        && t < 10.0;
    r.record(
        6,
        ok,
        format!(
            "{} points on {} polygons: partition {:.2e}, linear {:.2e}, gradient {:.2e}, {t:.3}s",
            s.points, s.polygons, s.partition_error, s.linear_error, s.gradient_error
        ),
    );
}

fn transient(r: &mut Report) {
    let start = Instant::now();
    let p = prepare("column_transient");
    let out = run_case(&p).expect("column");
    let err = metric(&out, "reference.max_relative_error");
    let rows = dt_study(&p, &[10.0, 5.0, 2.5]).expect("dt study");
    let ratio = rows.last().and_then(|row| row.ratio).expect("ratio");
    let t = start.elapsed().as_secs_f64();
    r.record(
        7,
        err <= 0.02 && (ratio - 2.0).abs() <= 0.4 && t < 30.0,
        format!("column error after 5 steps {err:.3e}, step halving ratio {ratio:.3}, {t:.2}s"),
    );
}

fn tet_cross_check(r: &mut Report) {
    let out = run("dam_tet_cross_check");
    let diff = metric(&out, "reference.max_relative_error");
    let tets = metric(&out, "reference.tetrahedra");
    r.record(
        8,
        diff <= 0.02,
        format!("dam at 10 m against {tets} tetrahedra, max monitor difference {diff:.3e}"),
    );
}

#[test]
fn acceptance_criteria() {
    let mut r = Report(Vec::new());
    patch(&mut r);
    dam(&mut r);
    convergence(&mut r);
    free_surface(&mut r);
    element_suite(&mut r);
    wachspress(&mut r);
    transient(&mut r);
    tet_cross_check(&mut r);
    let failed: Vec<usize> = r.0.iter().filter(|c| !c.1).map(|c| c.0).collect();
    assert!(failed.is_empty(), "failed criteria {failed:?}");
}
