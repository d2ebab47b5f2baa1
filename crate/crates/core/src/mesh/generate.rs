//! Parametric mesh generators for test and benchmark geometries.

use std::collections::HashMap;

use super::{Aabb, Mesh, MeshBuilder, Point3};

/// Planar polygon mesh used as the cross-section of an extruded mesh.
#[derive(Clone, Debug, Default)]
pub struct PolygonMesh2d {
    pub points: Vec<[f64; 2]>,
    pub cells: Vec<Vec<usize>>,
}

impl PolygonMesh2d {
    pub fn cell_area(&self, cell: usize) -> f64 {
        let c = &self.cells[cell];
        let mut a = 0.0;
        for i in 0..c.len() {
            let p = self.points[c[i]];
            let q = self.points[c[(i + 1) % c.len()]];
            a += p[0] * q[1] - q[0] * p[1];
        }
        0.5 * a
    }
}

/// Hexahedral grid on the tensor product of three coordinate lists.
pub fn rectilinear_grid(xs: &[f64], ys: &[f64], zs: &[f64]) -> Mesh {
    let (nx, ny) = (xs.len(), ys.len());
    let id = |i: usize, j: usize, k: usize| (k * ny + j) * nx + i;
    let mut nodes = Vec::with_capacity(xs.len() * ys.len() * zs.len());
    for &z in zs {
        for &y in ys {
            for &x in xs {
                nodes.push(Point3::new(x, y, z));
            }
        }
    }
    let mut b = MeshBuilder::new(nodes);
    for k in 0..zs.len() - 1 {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let n = [
                    id(i, j, k),
                    id(i + 1, j, k),
                    id(i + 1, j + 1, k),
                    id(i, j + 1, k),
                    id(i, j, k + 1),
                    id(i + 1, j, k + 1),
                    id(i + 1, j + 1, k + 1),
                    id(i, j + 1, k + 1),
                ];
                b.add_element(hex_loops(&n));
            }
        }
    }
    b.finish()
}

pub(crate) fn hex_loops(n: &[usize; 8]) -> Vec<Vec<usize>> {
    vec![
        vec![n[0], n[3], n[2], n[1]],
        vec![n[4], n[5], n[6], n[7]],
        vec![n[0], n[1], n[5], n[4]],
        vec![n[1], n[2], n[6], n[5]],
        vec![n[2], n[3], n[7], n[6]],
        vec![n[3], n[0], n[4], n[7]],
    ]
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..=n)
        .map(|i| {
            if i == n {
                b
            } else {
                a + (b - a) * i as f64 / n as f64
            }
        })
        .collect()
}

/// Uniform hexahedral grid over a box.
pub fn box_grid(domain: Aabb, divisions: [usize; 3]) -> Mesh {
    rectilinear_grid(
        &linspace(domain.min[0], domain.max[0], divisions[0]),
        &linspace(domain.min[1], domain.max[1], divisions[1]),
        &linspace(domain.min[2], domain.max[2], divisions[2]),
    )
}

/// `n` unit cubes stacked along z from z = 0.
pub fn stacked_column(n: usize) -> Mesh {
    box_grid(Aabb::new([0.0; 3], [1.0, 1.0, n as f64]), [1, 1, n])
}

/// Structured quadrilateral mesh of the image of the unit square under `map`.
pub fn mapped_quads(nu: usize, nv: usize, map: impl Fn(f64, f64) -> [f64; 2]) -> PolygonMesh2d {
    let mut points = Vec::with_capacity((nu + 1) * (nv + 1));
    for j in 0..=nv {
        for i in 0..=nu {
            points.push(map(i as f64 / nu as f64, j as f64 / nv as f64));
        }
    }
    let id = |i: usize, j: usize| j * (nu + 1) + i;
    let mut cells = Vec::with_capacity(nu * nv);
    for j in 0..nv {
        for i in 0..nu {
            cells.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    PolygonMesh2d { points, cells }
}

/// Pointy-top hexagonal tiling of the rectangle `[x0, x1] × [z0, z1]`, clipped
/// to the rectangle.
///
/// Cell centres sit on `rows + 1` horizontal lines `z0 + r·Δz`. Centres on the
/// top line are at `x0 + (k + ½)·width`, so the top boundary carries nodes at
/// every multiple of `width`; neighbouring lines alternate.
pub fn hexagonal_tiling(
    (x0, x1): (f64, f64),
    (z0, z1): (f64, f64),
    width: f64,
    rows: usize,
) -> PolygonMesh2d {
    let dz = (z1 - z0) / rows as f64;
    let scale = (x1 - x0).max(z1 - z0);
    let tol = 1e-9 * scale;
    let mut points: Vec<[f64; 2]> = Vec::new();
    let mut index: HashMap<(i64, i64), usize> = HashMap::new();
    let mut cells = Vec::new();
    let ncols = ((x1 - x0) / width).ceil() as i64;
    for r in 0..=rows {
        let cz = z0 + r as f64 * dz;
        let shift = if (rows - r) % 2 == 0 { 0.5 } else { 0.0 };
        for k in -1..=ncols + 1 {
            let cx = x0 + (k as f64 + shift) * width;
            let hw = 0.5 * width;
            let hex = vec![
                [cx + hw, cz - 0.25 * dz],
                [cx + hw, cz + 0.25 * dz],
                [cx, cz + 0.75 * dz],
                [cx - hw, cz + 0.25 * dz],
                [cx - hw, cz - 0.25 * dz],
                [cx, cz - 0.75 * dz],
            ];
            let clipped = clip_rect(hex, x0, x1, z0, z1);
            let cleaned = clean_polygon(clipped, tol);
            if cleaned.len() < 3 || polygon2_area(&cleaned) < tol * scale {
                continue;
            }
            let cell = cleaned
                .iter()
                .map(|p| {
                    let key = ((p[0] / tol).round() as i64, (p[1] / tol).round() as i64);
                    *index.entry(key).or_insert_with(|| {
                        points.push(*p);
                        points.len() - 1
                    })
                })
                .collect();
            cells.push(cell);
        }
    }
    PolygonMesh2d { points, cells }
}

fn clip_rect(poly: Vec<[f64; 2]>, x0: f64, x1: f64, z0: f64, z1: f64) -> Vec<[f64; 2]> {
    let mut out = poly;
    for (axis, bound, keep_above) in [(0, x0, true), (0, x1, false), (1, z0, true), (1, z1, false)]
    {
        out = clip_half_plane(&out, axis, bound, keep_above);
        if out.is_empty() {
            break;
        }
    }
    out
}

fn clip_half_plane(poly: &[[f64; 2]], axis: usize, bound: f64, keep_above: bool) -> Vec<[f64; 2]> {
    let inside = |p: &[f64; 2]| {
        if keep_above {
            p[axis] >= bound
        } else {
            p[axis] <= bound
        }
    };
    let mut out = Vec::new();
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let (ia, ib) = (inside(&a), inside(&b));
        if ia {
            out.push(a);
        }
        if ia != ib {
            let t = (bound - a[axis]) / (b[axis] - a[axis]);
            let mut p = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            p[axis] = bound;
            out.push(p);
        }
    }
    out
}

/// Removes repeated and collinear vertices.
fn clean_polygon(poly: Vec<[f64; 2]>, tol: f64) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = Vec::with_capacity(poly.len());
    for p in poly {
        if let Some(q) = pts.last() {
            if (p[0] - q[0]).abs() < tol && (p[1] - q[1]).abs() < tol {
                continue;
            }
        }
        pts.push(p);
    }
    while pts.len() > 1 {
        let (a, b) = (pts[0], pts[pts.len() - 1]);
        if (a[0] - b[0]).abs() < tol && (a[1] - b[1]).abs() < tol {
            pts.pop();
        } else {
            break;
        }
    }
    let mut changed = true;
    while changed && pts.len() >= 3 {
        changed = false;
        for i in 0..pts.len() {
            let a = pts[(i + pts.len() - 1) % pts.len()];
            let b = pts[i];
            let c = pts[(i + 1) % pts.len()];
            let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
            let len = ((c[0] - a[0]).powi(2) + (c[1] - a[1]).powi(2)).sqrt();
            if cross.abs() <= tol * len {
                pts.remove(i);
                changed = true;
                break;
            }
        }
    }
    pts
}

fn polygon2_area(pts: &[[f64; 2]]) -> f64 {
    let mut a = 0.0;
    for i in 0..pts.len() {
        let p = pts[i];
        let q = pts[(i + 1) % pts.len()];
        a += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * a
}

/// Extrudes a cross-section in the (x, z) plane along y through `layers`.
///
/// A section point `(u, v)` on layer `y` becomes `(u, y, v)`.
pub fn extrude_polygons(section: &PolygonMesh2d, layers: &[f64]) -> Mesh {
    let np = section.points.len();
    let mut nodes = Vec::with_capacity(np * layers.len());
    for &y in layers {
        for p in &section.points {
            nodes.push(Point3::new(p[0], y, p[1]));
        }
    }
    let mut b = MeshBuilder::new(nodes);
    for l in 0..layers.len() - 1 {
        for cell in &section.cells {
            let lower: Vec<usize> = cell.iter().map(|&p| l * np + p).collect();
            let upper: Vec<usize> = cell.iter().map(|&p| (l + 1) * np + p).collect();
            let mut loops = vec![lower.clone(), upper.clone()];
            for i in 0..cell.len() {
                let j = (i + 1) % cell.len();
                loops.push(vec![lower[i], lower[j], upper[j], upper[i]]);
            }
            b.add_element(loops);
        }
    }
    b.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::validate_mesh;

    #[test]
    fn grid_counts() {
        let m = box_grid(Aabb::new([0.0; 3], [1.0; 3]), [2, 3, 4]);
        assert_eq!(m.num_elements(), 24);
        assert_eq!(m.num_nodes(), 3 * 4 * 5);
        assert_eq!(m.faces.len(), 3 * 3 * 4 + 2 * 4 * 4 + 2 * 3 * 5);
        assert!(validate_mesh(&m).is_empty());
    }

    #[test]
    fn hexagonal_tiling_covers_rectangle() {
        let t = hexagonal_tiling((0.0, 240.0), (0.0, 55.0), 20.0, 3);
        let area: f64 = (0..t.cells.len()).map(|c| t.cell_area(c)).sum();
        assert!((area - 240.0 * 55.0).abs() < 1e-8 * area);
        assert!((0..t.cells.len()).all(|c| t.cell_area(c) > 0.0));
        for x in [80.0, 160.0] {
            assert!(t
                .points
                .iter()
                .any(|p| (p[0] - x).abs() < 1e-9 && (p[1] - 55.0).abs() < 1e-9));
        }
    }

    #[test]
    fn extruded_tiling_is_valid() {
        let t = hexagonal_tiling((0.0, 60.0), (0.0, 30.0), 10.0, 3);
        let m = extrude_polygons(&t, &[0.0, 10.0, 20.0]);
        let report = validate_mesh(&m);
        assert!(report.is_empty(), "{report}");
        let v: f64 = (0..m.num_elements()).map(|e| m.element_volume(e)).sum();
        assert!((v - 60.0 * 30.0 * 20.0).abs() < 1e-8 * v);
    }
}
