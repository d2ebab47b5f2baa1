use std::collections::{HashMap, VecDeque};
use std::fmt;

use super::{diameter, polygon_area_normal, polygon_centroid, Mesh, Point3, Vector3};

/// Relative planarity tolerance (fraction of the face diameter).
pub const TOL_PLANAR: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    IndexRange,
    NonFinite,
    OrphanFace,
    NonManifoldFace,
    TooFewNodes,
    Planarity,
    Convexity,
    Closedness,
    Orientation,
    StarConvexity,
    Degenerate,
}

impl ViolationKind {
    pub fn label(self) -> &'static str {
        match self {
            ViolationKind::IndexRange => "index out of range",
            ViolationKind::NonFinite => "non-finite coordinate",
            ViolationKind::OrphanFace => "orphan face",
            ViolationKind::NonManifoldFace => "face shared by more than two elements",
            ViolationKind::TooFewNodes => "fewer than 3 distinct nodes",
            ViolationKind::Planarity => "non-planar face",
            ViolationKind::Convexity => "non-convex face",
            ViolationKind::Closedness => "open surface",
            ViolationKind::Orientation => "non-outward normal",
            ViolationKind::StarConvexity => "not star-convex",
            ViolationKind::Degenerate => "degenerate element",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub element: Option<usize>,
    pub face: Option<usize>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind.label())?;
        if let Some(e) = self.element {
            write!(f, ", element {e}")?;
        }
        if let Some(k) = self.face {
            write!(f, ", face {k}")?;
        }
        if !self.detail.is_empty() {
            write!(f, " ({})", self.detail)?;
        }
        Ok(())
    }
}

/// Validation report; empty iff the mesh is analysis-ready.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Diagnostics {
    pub violations: Vec<Violation>,
}

impl Diagnostics {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }

    fn push(
        &mut self,
        kind: ViolationKind,
        element: Option<usize>,
        face: Option<usize>,
        detail: String,
    ) {
        self.violations.push(Violation {
            kind,
            element,
            face,
            detail,
        });
    }
}

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

pub fn validate_mesh(mesh: &Mesh) -> Diagnostics {
    let mut d = Diagnostics::default();
    for (i, p) in mesh.nodes.iter().enumerate() {
        if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
            d.push(ViolationKind::NonFinite, None, None, format!("node {i}"));
        }
    }
    let mut faces_ok = vec![true; mesh.faces.len()];
    for (f, face) in mesh.faces.iter().enumerate() {
        if let Some(&n) = face.nodes.iter().find(|&&n| n >= mesh.nodes.len()) {
            d.push(
                ViolationKind::IndexRange,
                None,
                Some(f),
                format!("node {n}"),
            );
            faces_ok[f] = false;
        }
    }
    let mut uses = vec![0usize; mesh.faces.len()];
    let mut elements_ok = vec![true; mesh.elements.len()];
    for (e, el) in mesh.elements.iter().enumerate() {
        for fr in &el.faces {
            if fr.face >= mesh.faces.len() {
                d.push(
                    ViolationKind::IndexRange,
                    Some(e),
                    Some(fr.face),
                    String::new(),
                );
                elements_ok[e] = false;
            } else {
                uses[fr.face] += 1;
            }
        }
        if el.faces.len() < 4 {
            d.push(
                ViolationKind::Closedness,
                Some(e),
                None,
                format!("{} faces", el.faces.len()),
            );
            elements_ok[e] = false;
        }
    }
    for (f, &u) in uses.iter().enumerate() {
        if u == 0 {
            d.push(ViolationKind::OrphanFace, None, Some(f), String::new());
        } else if u > 2 {
            d.push(
                ViolationKind::NonManifoldFace,
                None,
                Some(f),
                format!("{u} elements"),
            );
        }
    }
    for f in 0..mesh.faces.len() {
        if faces_ok[f] {
            faces_ok[f] = check_face(mesh, f, &mut d);
        }
    }
    for e in 0..mesh.elements.len() {
        if elements_ok[e] && mesh.elements[e].faces.iter().all(|fr| faces_ok[fr.face]) {
            check_element(mesh, e, &mut d);
        }
    }
    d
}

fn check_face(mesh: &Mesh, f: usize, d: &mut Diagnostics) -> bool {
    let nodes = &mesh.faces[f].nodes;
    let mut distinct = nodes.clone();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 || distinct.len() != nodes.len() {
        d.push(
            ViolationKind::TooFewNodes,
            None,
            Some(f),
            format!("{} nodes, {} distinct", nodes.len(), distinct.len()),
        );
        return false;
    }
    let pts: Vec<Point3> = nodes.iter().map(|&n| mesh.nodes[n]).collect();
    let diam = diameter(&pts);
    let normal = polygon_area_normal(&pts);
    if normal.norm() <= 1e-14 * diam * diam {
        d.push(
            ViolationKind::Degenerate,
            None,
            Some(f),
            "zero-area face".into(),
        );
        return false;
    }
    let n = normal.normalize();
    let c = polygon_centroid(&pts);
    let dev = pts
        .iter()
        .map(|p| (p - c).dot(&n).abs())
        .fold(0.0, f64::max);
    let mut ok = true;
    if dev > TOL_PLANAR * diam {
        d.push(
            ViolationKind::Planarity,
            None,
            Some(f),
            format!(
                "out-of-plane deviation {:.3e} > {:.3e}",
                dev,
                TOL_PLANAR * diam
            ),
        );
        ok = false;
    }
    for i in 0..pts.len() {
        let a = pts[(i + pts.len() - 1) % pts.len()];
        let b = pts[i];
        let c = pts[(i + 1) % pts.len()];
        let (e1, e2) = (b - a, c - b);
        let turn = e1.cross(&e2).dot(&n);
        if turn <= 1e-10 * e1.norm() * e2.norm() {
            d.push(
                ViolationKind::Convexity,
                None,
                Some(f),
                format!("vertex {} (node {})", i, nodes[i]),
            );
            ok = false;
            break;
        }
    }
    ok
}

fn check_element(mesh: &Mesh, e: usize, d: &mut Diagnostics) {
    let el = &mesh.elements[e];
    let loops: Vec<Vec<usize>> = el.faces.iter().map(|fr| mesh.oriented_loop(*fr)).collect();

    // Undirected edge -> (local face, traversed forward as (min, max)).
    let mut edges: HashMap<(usize, usize), Vec<(usize, bool)>> = HashMap::new();
    for (lf, l) in loops.iter().enumerate() {
        for i in 0..l.len() {
            let (a, b) = (l[i], l[(i + 1) % l.len()]);
            edges
                .entry((a.min(b), a.max(b)))
                .or_default()
                .push((lf, a < b));
        }
    }
    let mut open = false;
    for (key, users) in &edges {
        if users.len() != 2 {
            d.push(
                ViolationKind::Closedness,
                Some(e),
                None,
                format!("edge ({}, {}) used by {} faces", key.0, key.1, users.len()),
            );
            open = true;
            break;
        }
    }
    if open {
        return;
    }

    // Relative orientation of each face with respect to local face 0.
    let nf = loops.len();
    let mut flip: Vec<Option<bool>> = vec![None; nf];
    let mut adjacency: Vec<Vec<(usize, bool)>> = vec![Vec::new(); nf];
    for users in edges.values() {
        let ((f1, d1), (f2, d2)) = (users[0], users[1]);
        // Consistent orientation traverses the shared edge in opposite directions.
        let same = d1 == d2;
        adjacency[f1].push((f2, same));
        adjacency[f2].push((f1, same));
    }
    flip[0] = Some(false);
    let mut queue = VecDeque::from([0usize]);
    let mut inconsistent = false;
    while let Some(f) = queue.pop_front() {
        let ff = flip[f].unwrap();
        for &(g, same) in &adjacency[f] {
            let want = ff ^ same;
            match flip[g] {
                None => {
                    flip[g] = Some(want);
                    queue.push_back(g);
                }
                Some(v) if v != want => inconsistent = true,
                _ => {}
            }
        }
    }
    if inconsistent || flip.iter().any(|f| f.is_none()) {
        d.push(
            ViolationKind::Closedness,
            Some(e),
            None,
            "surface is not an orientable connected 2-manifold".into(),
        );
        return;
    }

    // Volume with the consistent orientation decides which labelling is outward.
    let reference = vertex_mean(mesh, &loops);
    let mut volume = 0.0;
    for (lf, l) in loops.iter().enumerate() {
        let s = if flip[lf].unwrap() { -1.0 } else { 1.0 };
        volume += s * loop_pyramid_volume(mesh, l, &reference);
    }
    let outward_flip = volume < 0.0;
    let mut misoriented = false;
    for (lf, fr) in el.faces.iter().enumerate() {
        if flip[lf].unwrap() != outward_flip {
            d.push(
                ViolationKind::Orientation,
                Some(e),
                Some(fr.face),
                String::new(),
            );
            misoriented = true;
        }
    }
    if misoriented {
        return;
    }
    let volume = volume.abs();
    let scale = mesh.element_bounding_box(e).diagonal();
    if volume <= 1e-12 * scale.powi(3) {
        d.push(
            ViolationKind::Degenerate,
            Some(e),
            None,
            format!("volume {volume:.3e}"),
        );
        return;
    }

    let (_, centre) = mesh.element_volume_centroid(e);
    for (l, fr) in loops.iter().zip(&el.faces) {
        let v = loop_pyramid_volume(mesh, l, &centre);
        if v <= 1e-10 * volume {
            d.push(
                ViolationKind::StarConvexity,
                Some(e),
                Some(fr.face),
                format!("face pyramid volume {v:.3e} about the centroid"),
            );
        }
    }
}

fn vertex_mean(mesh: &Mesh, loops: &[Vec<usize>]) -> Point3 {
    let mut nodes: Vec<usize> = loops.iter().flatten().copied().collect();
    nodes.sort_unstable();
    nodes.dedup();
    let mut c = Vector3::zeros();
    for &n in &nodes {
        c += mesh.nodes[n].coords;
    }
    Point3::from(c / nodes.len() as f64)
}

/// Volume of the pyramid with apex `apex` over a planar loop.
fn loop_pyramid_volume(mesh: &Mesh, l: &[usize], apex: &Point3) -> f64 {
    let pts: Vec<Point3> = l.iter().map(|&n| mesh.nodes[n]).collect();
    let normal = polygon_area_normal(&pts);
    (polygon_centroid(&pts) - apex).dot(&normal) / 6.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{box_grid, rectilinear_grid, Aabb, FaceRef, Polyhedron};

    fn cube() -> Mesh {
        box_grid(Aabb::new([0.0; 3], [1.0; 3]), [1, 1, 1])
    }

    #[test]
    fn valid_cube_has_empty_report() {
        assert!(validate_mesh(&cube()).is_empty());
    }

    #[test]
    fn inward_face_is_reported() {
        let mut m = cube();
        m.elements[0].faces[2].reversed = !m.elements[0].faces[2].reversed;
        let r = validate_mesh(&m);
        assert_eq!(r.len(), 1);
        let face = m.elements[0].faces[2].face;
        assert_eq!(
            r.violations[0].to_string(),
            format!("non-outward normal, element 0, face {face}")
        );
    }

    #[test]
    fn warped_face_is_reported() {
        let mut m = cube();
        let top = m.select_nodes(|p| p.z > 0.5 && p.x > 0.5 && p.y > 0.5)[0];
        m.nodes[top].z += 1e-3;
        let r = validate_mesh(&m);
        assert!(r.has(ViolationKind::Planarity));
    }

    #[test]
    fn collinear_vertex_is_reported() {
        let mut m = cube();
        let n = m.nodes.len();
        m.nodes.push(Point3::new(0.5, 0.0, 0.0));
        let f = m.elements[0].faces[0].face;
        let pos = m.faces[f].nodes.len();
        m.faces[f].nodes.insert(pos, n);
        assert!(validate_mesh(&m).has(ViolationKind::Convexity));
    }

    #[test]
    fn l_shaped_element_is_not_star_convex() {
        // Merge three hexahedra of an L-shaped footprint into one element.
        let mut m = rectilinear_grid(&[0.0, 1.0, 3.0], &[0.0, 1.0, 3.0], &[0.0, 1.0]);
        let keep = [0usize, 1, 2];
        let mut uses: HashMap<usize, Vec<FaceRef>> = HashMap::new();
        for &e in &keep {
            for fr in &m.elements[e].faces {
                uses.entry(fr.face).or_default().push(*fr);
            }
        }
        let mut refs: Vec<FaceRef> = uses
            .values()
            .filter(|v| v.len() == 1)
            .map(|v| v[0])
            .collect();
        refs.sort_by_key(|fr| fr.face);
        m.elements = vec![Polyhedron::new(refs.clone())];
        let used: Vec<usize> = refs.iter().map(|fr| fr.face).collect();
        let faces = used.iter().map(|&f| m.faces[f].clone()).collect();
        m.faces = faces;
        m.elements[0].faces = refs
            .iter()
            .enumerate()
            .map(|(i, fr)| FaceRef::new(i, fr.reversed))
            .collect();
        // Lengthen the legs so the centroid leaves the notch pyramids.
        for p in &mut m.nodes {
            if p.x > 2.0 {
                p.x = 6.0;
            }
            if p.y > 2.0 {
                p.y = 6.0;
            }
        }
        let r = validate_mesh(&m);
        assert!(r.has(ViolationKind::StarConvexity), "{r}");
        assert!(!r.has(ViolationKind::Orientation));
    }

    #[test]
    fn orphan_face_is_reported() {
        let mut m = cube();
        m.faces.push(m.faces[0].clone());
        assert!(validate_mesh(&m).has(ViolationKind::OrphanFace));
    }
}
