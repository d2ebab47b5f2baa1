//! Face-based polyhedral mesh.
//!
//! A [`Mesh`] stores nodes, polygonal faces (ordered node loops) and elements
//! that reference faces with an orientation flag. A face is stored once and
//! shared by the (at most two) elements on either side of it; the element on
//! the "reversed" side traverses the loop backwards so that, seen from each
//! element, the loop is counter-clockwise when viewed from outside.

mod generate;
mod io;
mod locate;
mod octree;
mod validate;

use std::collections::{BTreeMap, HashMap};

pub use generate::{
    box_grid, extrude_polygons, hexagonal_tiling, mapped_quads, rectilinear_grid, stacked_column,
    PolygonMesh2d,
};
pub use io::{load_mesh, parse_inp, parse_json, save_mesh, to_json, MeshFormat};
pub use locate::ElementLocator;
pub use octree::{octree_refine_box, Aabb};
pub use validate::{validate_mesh, Diagnostics, Violation, ViolationKind};

use crate::error::{Error, Result};

pub type Point3 = nalgebra::Point3<f64>;
pub type Vector3 = nalgebra::Vector3<f64>;

/// Polygonal face given by its ordered node loop.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolygonFace {
    pub nodes: Vec<usize>,
}

impl PolygonFace {
    pub fn new(nodes: Vec<usize>) -> Self {
        Self { nodes }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Reference from an element to one of its faces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FaceRef {
    pub face: usize,
    /// Traverse the stored loop backwards when seen from this element.
    pub reversed: bool,
}

impl FaceRef {
    pub fn new(face: usize, reversed: bool) -> Self {
        Self { face, reversed }
    }

    /// Signed 1-based encoding used by the mesh file formats.
    pub fn signed(&self) -> i64 {
        let id = self.face as i64 + 1;
        if self.reversed {
            -id
        } else {
            id
        }
    }

    pub fn from_signed(value: i64) -> Option<Self> {
        if value == 0 {
            return None;
        }
        Some(Self {
            face: (value.unsigned_abs() - 1) as usize,
            reversed: value < 0,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Polyhedron {
    pub faces: Vec<FaceRef>,
}

impl Polyhedron {
    pub fn new(faces: Vec<FaceRef>) -> Self {
        Self { faces }
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Mesh {
    pub nodes: Vec<Point3>,
    pub faces: Vec<PolygonFace>,
    pub elements: Vec<Polyhedron>,
    pub node_sets: BTreeMap<String, Vec<usize>>,
    pub face_sets: BTreeMap<String, Vec<usize>>,
}

impl Mesh {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    /// Node loop of a face as seen from the referencing element.
    pub fn oriented_loop(&self, face_ref: FaceRef) -> Vec<usize> {
        let mut nodes = self.faces[face_ref.face].nodes.clone();
        if face_ref.reversed {
            nodes.reverse();
        }
        nodes
    }

    /// Distinct nodes of an element in order of first appearance.
    ///
    /// This order defines the element-local numbering used by the element
    /// operators.
    pub fn element_nodes(&self, element: usize) -> Vec<usize> {
        let mut seen = HashMap::new();
        let mut out = Vec::new();
        for fr in &self.elements[element].faces {
            for &n in &self.faces[fr.face].nodes {
                if seen.insert(n, out.len()).is_none() {
                    out.push(n);
                }
            }
        }
        out
    }

    pub fn face_points(&self, face_ref: FaceRef) -> Vec<Point3> {
        self.oriented_loop(face_ref)
            .into_iter()
            .map(|n| self.nodes[n])
            .collect()
    }

    /// Newell normal of the oriented loop; see [`polygon_area_normal`].
    pub fn face_area_normal(&self, face_ref: FaceRef) -> Vector3 {
        polygon_area_normal(&self.face_points(face_ref))
    }

    pub fn face_centroid(&self, face: usize) -> Point3 {
        let pts: Vec<Point3> = self.faces[face]
            .nodes
            .iter()
            .map(|&n| self.nodes[n])
            .collect();
        polygon_centroid(&pts)
    }

    /// Signed volume and volume centroid by pyramid decomposition about the
    /// vertex average.
    pub fn element_volume_centroid(&self, element: usize) -> (f64, Point3) {
        let nodes = self.element_nodes(element);
        let mut reference = Vector3::zeros();
        for &n in &nodes {
            reference += self.nodes[n].coords;
        }
        let reference = Point3::from(reference / nodes.len() as f64);
        let mut volume = 0.0;
        let mut moment = Vector3::zeros();
        for fr in &self.elements[element].faces {
            let pts = self.face_points(*fr);
            let fc = polygon_centroid(&pts);
            for i in 0..pts.len() {
                let a = pts[i];
                let b = pts[(i + 1) % pts.len()];
                let v = tet_volume(&reference, &fc, &a, &b);
                volume += v;
                moment += v * (reference.coords + fc.coords + a.coords + b.coords) / 4.0;
            }
        }
        let centroid = if volume.abs() > 0.0 {
            Point3::from(moment / volume)
        } else {
            reference
        };
        (volume, centroid)
    }

    pub fn element_volume(&self, element: usize) -> f64 {
        self.element_volume_centroid(element).0
    }

    pub fn bounding_box(&self) -> Aabb {
        Aabb::from_points(self.nodes.iter())
    }

    pub fn element_bounding_box(&self, element: usize) -> Aabb {
        let nodes = self.element_nodes(element);
        Aabb::from_points(nodes.iter().map(|&n| &self.nodes[n]))
    }

    /// Nodes whose coordinates satisfy `pred`.
    pub fn select_nodes(&self, pred: impl Fn(&Point3) -> bool) -> Vec<usize> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, p)| pred(p))
            .map(|(i, _)| i)
            .collect()
    }

    /// Boundary faces (referenced by exactly one element).
    pub fn boundary_faces(&self) -> Vec<usize> {
        let mut count = vec![0usize; self.faces.len()];
        for e in &self.elements {
            for fr in &e.faces {
                count[fr.face] += 1;
            }
        }
        count
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == 1)
            .map(|(i, _)| i)
            .collect()
    }

    /// Boundary faces whose nodes all satisfy `pred`.
    pub fn select_boundary_faces(&self, pred: impl Fn(&Point3) -> bool) -> Vec<usize> {
        self.boundary_faces()
            .into_iter()
            .filter(|&f| self.faces[f].nodes.iter().all(|&n| pred(&self.nodes[n])))
            .collect()
    }
}

/// Incremental mesh construction from per-element face loops.
///
/// Loops may be given in either winding; each is oriented outward with respect
/// to the element's vertex average and shared faces are stored once.
#[derive(Default)]
pub struct MeshBuilder {
    mesh: Mesh,
    face_index: HashMap<Vec<usize>, usize>,
}

impl MeshBuilder {
    pub fn new(nodes: Vec<Point3>) -> Self {
        Self {
            mesh: Mesh {
                nodes,
                ..Default::default()
            },
            face_index: HashMap::new(),
        }
    }

    pub fn nodes(&self) -> &[Point3] {
        &self.mesh.nodes
    }

    pub fn add_node(&mut self, p: Point3) -> usize {
        self.mesh.nodes.push(p);
        self.mesh.nodes.len() - 1
    }

    pub fn add_element(&mut self, loops: Vec<Vec<usize>>) -> usize {
        let mut centre = Vector3::zeros();
        let mut count = 0.0;
        for l in &loops {
            for &n in l {
                centre += self.mesh.nodes[n].coords;
                count += 1.0;
            }
        }
        let centre = centre / count;
        let mut refs = Vec::with_capacity(loops.len());
        for mut l in loops {
            let pts: Vec<Point3> = l.iter().map(|&n| self.mesh.nodes[n]).collect();
            let normal = polygon_area_normal(&pts);
            if normal.dot(&(polygon_centroid(&pts).coords - centre)) < 0.0 {
                l.reverse();
            }
            let mut key = l.clone();
            key.sort_unstable();
            let fr = match self.face_index.get(&key) {
                Some(&f) => {
                    let stored = &self.mesh.faces[f].nodes;
                    FaceRef::new(f, !same_cyclic_order(stored, &l))
                }
                None => {
                    self.mesh.faces.push(PolygonFace::new(l));
                    let f = self.mesh.faces.len() - 1;
                    self.face_index.insert(key, f);
                    FaceRef::new(f, false)
                }
            };
            refs.push(fr);
        }
        self.mesh.elements.push(Polyhedron::new(refs));
        self.mesh.elements.len() - 1
    }

    pub fn finish(self) -> Mesh {
        self.mesh
    }
}

fn same_cyclic_order(a: &[usize], b: &[usize]) -> bool {
    let Some(start) = b.iter().position(|&n| n == a[0]) else {
        return false;
    };
    a.len() > 1 && b[(start + 1) % b.len()] == a[1]
}

/// Volume centroid of an element; the scaling centre of the element.
pub fn scaling_centre(mesh: &Mesh, element: usize) -> Result<Point3> {
    let (volume, centroid) = mesh.element_volume_centroid(element);
    let bbox = mesh.element_bounding_box(element);
    let scale = bbox.diagonal().max(f64::MIN_POSITIVE);
    if volume <= 1e-14 * scale.powi(3) {
        return Err(Error::DegenerateElement {
            element,
            detail: format!("non-positive volume {volume:.3e}"),
        });
    }
    Ok(centroid)
}

/// Newell normal of a closed loop; the norm equals twice the polygon area.
pub fn polygon_area_normal(pts: &[Point3]) -> Vector3 {
    let mut n = Vector3::zeros();
    let c = polygon_mean(pts);
    for i in 0..pts.len() {
        let a = pts[i] - c;
        let b = pts[(i + 1) % pts.len()] - c;
        n += a.cross(&b);
    }
    n
}

pub fn polygon_area(pts: &[Point3]) -> f64 {
    0.5 * polygon_area_normal(pts).norm()
}

fn polygon_mean(pts: &[Point3]) -> Point3 {
    let mut c = Vector3::zeros();
    for p in pts {
        c += p.coords;
    }
    Point3::from(c / pts.len() as f64)
}

/// Area centroid of a planar polygon.
pub fn polygon_centroid(pts: &[Point3]) -> Point3 {
    let m = polygon_mean(pts);
    let normal = polygon_area_normal(pts);
    let nn = normal.norm_squared();
    if nn == 0.0 {
        return m;
    }
    let mut acc = Vector3::zeros();
    let mut total = 0.0;
    for i in 0..pts.len() {
        let a = pts[i];
        let b = pts[(i + 1) % pts.len()];
        let w = (a - m).cross(&(b - m)).dot(&normal) / nn;
        acc += w * (m.coords + a.coords + b.coords) / 3.0;
        total += w;
    }
    Point3::from(acc / total)
}

pub(crate) fn tet_volume(a: &Point3, b: &Point3, c: &Point3, d: &Point3) -> f64 {
    (b - a).dot(&(c - a).cross(&(d - a))) / 6.0
}

/// Distance-based diameter of a point set.
pub(crate) fn diameter(pts: &[Point3]) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            d = d.max((pts[i] - pts[j]).norm());
        }
    }
    d
}
