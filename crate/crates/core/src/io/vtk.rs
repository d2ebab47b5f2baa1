//! Legacy ASCII VTK unstructured grids. Elements that are topological
//! hexahedra are written as VTK hexahedra (type 12), everything else as
//! polyhedron cells (type 42) with an outward face stream.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::{FaceRef, Mesh};

pub const VTK_HEXAHEDRON: u8 = 12;
pub const VTK_POLYHEDRON: u8 = 42;

/// Named data attached to points and cells.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VtkFields {
    pub point_scalars: Vec<(String, Vec<f64>)>,
    pub cell_scalars: Vec<(String, Vec<f64>)>,
    pub cell_vectors: Vec<(String, Vec<[f64; 3]>)>,
}

impl VtkFields {
    /// Head and pressure head at nodes, Darcy flux and its magnitude per
    /// cell.
    pub fn seepage(mesh: &Mesh, heads: &[f64], flux: &[[f64; 3]]) -> Self {
        let pressure = heads
            .iter()
            .zip(&mesh.nodes)
            .map(|(h, p)| h - p.z)
            .collect();
        let magnitude = flux
            .iter()
            .map(|q| (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]).sqrt())
            .collect();
        Self {
            point_scalars: vec![
                ("head".into(), heads.to_vec()),
                ("pressure_head".into(), pressure),
            ],
            cell_scalars: vec![("flux_magnitude".into(), magnitude)],
            cell_vectors: vec![("flux".into(), flux.to_vec())],
        }
    }
}

/// VTK ordering of a hexahedral element: bottom loop with its normal towards
/// the top, then the matching top nodes.
fn hex_connectivity(mesh: &Mesh, e: usize) -> Option<[usize; 8]> {
    let el = &mesh.elements[e];
    if el.faces.len() != 6 || el.faces.iter().any(|f| mesh.faces[f.face].len() != 4) {
        return None;
    }
    let nodes = mesh.element_nodes(e);
    if nodes.len() != 8 {
        return None;
    }
    let mut edges = BTreeSet::new();
    for f in &el.faces {
        let l = &mesh.faces[f.face].nodes;
        for i in 0..4 {
            let (a, b) = (l[i], l[(i + 1) % 4]);
            edges.insert((a.min(b), a.max(b)));
        }
    }
    let mut bottom = mesh.oriented_loop(el.faces[0]);
    bottom.reverse();
    let mut out = [0; 8];
    for (i, &b) in bottom.iter().enumerate() {
        out[i] = b;
        let up: Vec<usize> = nodes
            .iter()
            .copied()
            .filter(|&n| !bottom.contains(&n) && edges.contains(&(b.min(n), b.max(n))))
            .collect();
        if up.len() != 1 {
            return None;
        }
        out[i + 4] = up[0];
    }
    Some(out)
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Config(format!(
            "field {what} has {got} values, expected {want}"
        )));
    }
    Ok(())
}

/// Renders the mesh and fields as a legacy VTK document.
pub fn vtk_string(mesh: &Mesh, fields: &VtkFields, title: &str) -> Result<String> {
    let n = mesh.num_nodes();
    let ne = mesh.num_elements();
    for (name, v) in &fields.point_scalars {
        check_len(name, v.len(), n)?;
    }
    for (name, v) in &fields.cell_scalars {
        check_len(name, v.len(), ne)?;
    }
    for (name, v) in &fields.cell_vectors {
        check_len(name, v.len(), ne)?;
    }
    let mut s = String::new();
    let title: String = title.chars().filter(|c| *c != '\n').take(255).collect();
    writeln!(
        s,
        "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID"
    )
    .unwrap();
    writeln!(s, "POINTS {n} double").unwrap();
    for p in &mesh.nodes {
        writeln!(s, "{:e} {:e} {:e}", p.x, p.y, p.z).unwrap();
    }
    let mut cells: Vec<(u8, Vec<usize>)> = Vec::with_capacity(ne);
    for e in 0..ne {
        if let Some(h) = hex_connectivity(mesh, e) {
            cells.push((VTK_HEXAHEDRON, h.to_vec()));
            continue;
        }
        let faces = &mesh.elements[e].faces;
        let mut stream = vec![faces.len()];
        for &fr in faces {
            let l = mesh.oriented_loop(fr);
            stream.push(l.len());
            stream.extend(l);
        }
        cells.push((VTK_POLYHEDRON, stream));
    }
    let size: usize = cells.iter().map(|c| c.1.len() + 1).sum();
    writeln!(s, "CELLS {ne} {size}").unwrap();
    for (_, c) in &cells {
        write!(s, "{}", c.len()).unwrap();
        for v in c {
            write!(s, " {v}").unwrap();
        }
        s.push('\n');
    }
    writeln!(s, "CELL_TYPES {ne}").unwrap();
    for (t, _) in &cells {
        writeln!(s, "{t}").unwrap();
    }
    if !fields.point_scalars.is_empty() {
        writeln!(s, "POINT_DATA {n}").unwrap();
        for (name, v) in &fields.point_scalars {
            scalars(&mut s, name, v);
        }
    }
    if !fields.cell_scalars.is_empty() || !fields.cell_vectors.is_empty() {
        writeln!(s, "CELL_DATA {ne}").unwrap();
        for (name, v) in &fields.cell_scalars {
            scalars(&mut s, name, v);
        }
        for (name, v) in &fields.cell_vectors {
            writeln!(s, "VECTORS {name} double").unwrap();
            for q in v {
                writeln!(s, "{:e} {:e} {:e}", q[0], q[1], q[2]).unwrap();
            }
        }
    }
    Ok(s)
}

fn scalars(s: &mut String, name: &str, v: &[f64]) {
    writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default").unwrap();
    for x in v {
        writeln!(s, "{x:e}").unwrap();
    }
}

pub fn write_vtk(
    path: impl AsRef<Path>,
    mesh: &Mesh,
    fields: &VtkFields,
    title: &str,
) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, vtk_string(mesh, fields, title)?).map_err(|e| Error::io(path, e))
}

/// Contents of a legacy unstructured-grid file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VtkGrid {
    pub points: Vec<[f64; 3]>,
    /// Raw connectivity per cell: node ids, or the face stream of a
    /// polyhedron.
    pub cells: Vec<Vec<usize>>,
    pub cell_types: Vec<u8>,
    pub point_data: BTreeMap<String, Vec<f64>>,
    pub cell_data: BTreeMap<String, Vec<f64>>,
    pub cell_vectors: BTreeMap<String, Vec<[f64; 3]>>,
}

impl VtkGrid {
    /// Faces of cell `c` as node loops; hexahedra are expanded.
    pub fn cell_faces(&self, c: usize) -> Vec<Vec<usize>> {
        let conn = &self.cells[c];
        match self.cell_types[c] {
            VTK_POLYHEDRON => {
                let mut out = Vec::new();
                let mut i = 1;
                for _ in 0..conn[0] {
                    let k = conn[i];
                    out.push(conn[i + 1..i + 1 + k].to_vec());
                    i += k + 1;
                }
                out
            }
            VTK_HEXAHEDRON => [
                [0, 3, 2, 1],
                [4, 5, 6, 7],
                [0, 1, 5, 4],
                [1, 2, 6, 5],
                [2, 3, 7, 6],
                [3, 0, 4, 7],
            ]
            .iter()
            .map(|f| f.iter().map(|&i| conn[i]).collect())
            .collect(),
            _ => Vec::new(),
        }
    }
}

struct Tokens<'a> {
    it: std::iter::Peekable<std::str::SplitWhitespace<'a>>,
}

impl<'a> Tokens<'a> {
    fn next(&mut self, what: &str) -> Result<&'a str> {
        self.it
            .next()
            .ok_or_else(|| Error::Parse(format!("vtk: unexpected end of file reading {what}")))
    }
    fn num<T: std::str::FromStr>(&mut self, what: &str) -> Result<T> {
        let t = self.next(what)?;
        t.parse()
            .map_err(|_| Error::Parse(format!("vtk: bad {what} '{t}'")))
    }
}

/// Reads the subset of the legacy format produced by [`vtk_string`].
pub fn parse_vtk(text: &str) -> Result<VtkGrid> {
    let mut lines = text.splitn(4, '\n');
    let magic = lines.next().unwrap_or("");
    if !magic.starts_with("# vtk DataFile") {
        return Err(Error::Parse("vtk: missing header".into()));
    }
    let _title = lines.next();
    if lines.next().map(str::trim) != Some("ASCII") {
        return Err(Error::Parse("vtk: only ASCII files are supported".into()));
    }
    let mut tk = Tokens {
        it: lines.next().unwrap_or("").split_whitespace().peekable(),
    };
    if tk.next("DATASET")? != "DATASET" || tk.next("dataset type")? != "UNSTRUCTURED_GRID" {
        return Err(Error::Parse(
            "vtk: expected DATASET UNSTRUCTURED_GRID".into(),
        ));
    }
    let mut g = VtkGrid::default();
    // Which attribute section we are in and its length.
    let mut section: Option<(bool, usize)> = None;
    while let Some(key) = tk.it.next() {
        match key {
            "POINTS" => {
                let n: usize = tk.num("point count")?;
                tk.next("point type")?;
                for _ in 0..n {
                    g.points.push([
                        tk.num("coordinate")?,
                        tk.num("coordinate")?,
                        tk.num("coordinate")?,
                    ]);
                }
            }
            "CELLS" => {
                let n: usize = tk.num("cell count")?;
                let _size: usize = tk.num("cell list size")?;
                for _ in 0..n {
                    let k: usize = tk.num("cell size")?;
                    g.cells.push(
                        (0..k)
                            .map(|_| tk.num("cell entry"))
                            .collect::<Result<_>>()?,
                    );
                }
            }
            "CELL_TYPES" => {
                let n: usize = tk.num("cell type count")?;
                g.cell_types = (0..n).map(|_| tk.num("cell type")).collect::<Result<_>>()?;
            }
            "POINT_DATA" => section = Some((true, tk.num("point data count")?)),
            "CELL_DATA" => section = Some((false, tk.num("cell data count")?)),
            "SCALARS" => {
                let (on_points, n) = section
                    .ok_or_else(|| Error::Parse("vtk: SCALARS outside a data section".into()))?;
                let name = tk.next("scalar name")?.to_string();
                tk.next("scalar type")?;
                if tk.it.peek() == Some(&"1") {
                    tk.it.next();
                }
                if tk.next("LOOKUP_TABLE")? != "LOOKUP_TABLE" {
                    return Err(Error::Parse("vtk: expected LOOKUP_TABLE".into()));
                }
                tk.next("table name")?;
                let v = (0..n)
                    .map(|_| tk.num("scalar"))
                    .collect::<Result<Vec<f64>>>()?;
                if on_points {
                    g.point_data.insert(name, v)
                } else {
                    g.cell_data.insert(name, v)
                };
            }
            "VECTORS" => {
                let (on_points, n) = section
                    .ok_or_else(|| Error::Parse("vtk: VECTORS outside a data section".into()))?;
                if on_points {
                    return Err(Error::Parse("vtk: point vectors are not supported".into()));
                }
                let name = tk.next("vector name")?.to_string();
                tk.next("vector type")?;
                let v = (0..n)
                    .map(|_| Ok([tk.num("vector")?, tk.num("vector")?, tk.num("vector")?]))
                    .collect::<Result<Vec<[f64; 3]>>>()?;
                g.cell_vectors.insert(name, v);
            }
            other => return Err(Error::Parse(format!("vtk: unexpected keyword {other}"))),
        }
    }
    if g.cell_types.len() != g.cells.len() {
        return Err(Error::Parse(
            "vtk: CELL_TYPES count differs from CELLS".into(),
        ));
    }
    Ok(g)
}

/// Element face loops as written: outward loops for each element.
pub fn element_face_loops(mesh: &Mesh, e: usize) -> Vec<Vec<usize>> {
    mesh.elements[e]
        .faces
        .iter()
        .map(|&fr: &FaceRef| mesh.oriented_loop(fr))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::patch_test;
    use crate::mesh::{box_grid, polygon_area_normal, Aabb, Point3};

    #[test]
    fn unit_cube_constant_head() {
        let mesh = box_grid(Aabb::new([0.0; 3], [1.0; 3]), [1, 1, 1]);
        let f = VtkFields::seepage(&mesh, &[1.0; 8], &[[0.0; 3]]);
        let g = parse_vtk(&vtk_string(&mesh, &f, "cube").unwrap()).unwrap();
        assert_eq!(g.points.len(), 8);
        assert_eq!(g.cell_types, vec![VTK_HEXAHEDRON]);
        assert!(g.point_data["head"].iter().all(|&h| h == 1.0));
        assert_eq!(g.cell_data["flux_magnitude"], vec![0.0]);
    }

    #[test]
    fn hex_ordering_has_positive_volume() {
        let mesh = box_grid(Aabb::new([0.0; 3], [2.0, 1.0, 3.0]), [2, 1, 1]);
        for e in 0..2 {
            let h = hex_connectivity(&mesh, e).unwrap();
            let p: Vec<Point3> = h.iter().map(|&n| mesh.nodes[n]).collect();
            let bottom_normal = polygon_area_normal(&p[0..4]);
            assert!(bottom_normal.dot(&(p[4] - p[0])) > 0.0);
        }
    }

    #[test]
    fn polyhedral_face_stream_round_trip() {
        let p = patch_test();
        let heads: Vec<f64> = p.mesh.nodes.iter().map(|q| q.z * 0.5).collect();
        let flux = vec![[0.0, 0.0, -1.0]; 5];
        let text = vtk_string(
            &p.mesh,
            &VtkFields::seepage(&p.mesh, &heads, &flux),
            "patch",
        )
        .unwrap();
        let g = parse_vtk(&text).unwrap();
        assert_eq!(g.points.len(), p.mesh.num_nodes());
        for (a, b) in g.points.iter().zip(&p.mesh.nodes) {
            assert_eq!(a, &[b.x, b.y, b.z]);
        }
        // Four hexahedra and the nine-faced cap.
        assert_eq!(
            g.cell_types
                .iter()
                .filter(|&&t| t == VTK_HEXAHEDRON)
                .count(),
            4
        );
        assert_eq!(g.cell_types[4], VTK_POLYHEDRON);
        assert_eq!(g.cell_faces(4), element_face_loops(&p.mesh, 4));
        assert_eq!(g.point_data["head"], heads);
        assert_eq!(g.cell_vectors["flux"], flux);
        // Pressure head at the apex (z = 2): 1 − 2.
        assert!(g.point_data["pressure_head"].iter().any(|&v| v == -1.0));
    }

    #[test]
    fn mismatched_field_rejected() {
        let mesh = box_grid(Aabb::new([0.0; 3], [1.0; 3]), [1, 1, 1]);
        let f = VtkFields {
            point_scalars: vec![("h".into(), vec![0.0; 3])],
            ..Default::default()
        };
        assert!(vtk_string(&mesh, &f, "x").is_err());
    }
}
