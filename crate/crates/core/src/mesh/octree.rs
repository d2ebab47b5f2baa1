//! Box octree refinement producing a conforming polyhedral mesh.
//!
//! Cells overlapping the refine region are split eight ways per level. The
//! side of a cell is partitioned by its finer neighbours into sub-faces. A
//! sub-face that carries hanging nodes on its edges is fanned into triangles
//! about an added face-centre node so that every face stays strictly convex.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{Mesh, MeshBuilder, Point3};
use crate::error::{Error, Result};

/// Axis-aligned box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Self {
        Self { min, max }
    }

    pub fn from_points<'a>(pts: impl IntoIterator<Item = &'a Point3>) -> Self {
        let mut b = Aabb::new([f64::INFINITY; 3], [f64::NEG_INFINITY; 3]);
        for p in pts {
            for a in 0..3 {
                b.min[a] = b.min[a].min(p[a]);
                b.max[a] = b.max[a].max(p[a]);
            }
        }
        b
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.max[axis] - self.min[axis]
    }

    pub fn diagonal(&self) -> f64 {
        (0..3).map(|a| self.extent(a).powi(2)).sum::<f64>().sqrt()
    }

    pub fn volume(&self) -> f64 {
        (0..3).map(|a| self.extent(a)).product()
    }

    pub fn contains_box(&self, other: &Aabb) -> bool {
        (0..3).all(|a| other.min[a] >= self.min[a] && other.max[a] <= self.max[a])
    }

    pub fn contains(&self, p: &Point3, tol: f64) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] - tol && p[a] <= self.max[a] + tol)
    }

    /// Intersection with positive volume.
    pub fn overlaps(&self, other: &Aabb) -> bool {
        (0..3).all(|a| self.min[a] < other.max[a] && other.min[a] < self.max[a])
    }
}

/// Leaf cell on the finest lattice: origin and edge length in lattice units.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct Cell {
    o: [i64; 3],
    s: i64,
}

/// Square on a cell side: fixed `axis` coordinate `c`, origin `o` and size `s`
/// in the two remaining axes.
#[derive(Clone, Copy, Debug)]
struct Square {
    axis: usize,
    c: i64,
    o: [i64; 2],
    s: i64,
}

fn other_axes(axis: usize) -> [usize; 2] {
    match axis {
        0 => [1, 2],
        1 => [2, 0],
        _ => [0, 1],
    }
}

impl Square {
    fn corner(&self, u: i64, v: i64) -> [i64; 3] {
        let [a, b] = other_axes(self.axis);
        let mut p = [0; 3];
        p[self.axis] = self.c;
        p[a] = self.o[0] + u;
        p[b] = self.o[1] + v;
        p
    }
}

pub fn octree_refine_box(
    domain: Aabb,
    base_divisions: [usize; 3],
    refine_region: Aabb,
    levels: usize,
) -> Result<Mesh> {
    if !domain.contains_box(&refine_region) {
        return Err(Error::Config(
            "refine region must lie inside the domain".into(),
        ));
    }
    if base_divisions.iter().any(|&n| n == 0) || (0..3).any(|a| domain.extent(a) <= 0.0) {
        return Err(Error::Config("empty octree domain".into()));
    }
    let base = 1i64 << levels;
    let n = base_divisions.map(|v| v as i64);
    // Lattice unit -> coordinates. Node keys use doubled lattice coordinates so
    // face centres of the finest squares are representable.
    let to_box = |c: &Cell| {
        let mut min = [0.0; 3];
        let mut max = [0.0; 3];
        for a in 0..3 {
            let h = domain.extent(a) / (n[a] * base) as f64;
            min[a] = domain.min[a] + c.o[a] as f64 * h;
            max[a] = domain.min[a] + (c.o[a] + c.s) as f64 * h;
        }
        Aabb::new(min, max)
    };

    let mut cells = Vec::new();
    for k in 0..n[2] {
        for j in 0..n[1] {
            for i in 0..n[0] {
                cells.push(Cell {
                    o: [i * base, j * base, k * base],
                    s: base,
                });
            }
        }
    }
    for _ in 0..levels {
        let mut next = Vec::with_capacity(cells.len());
        for c in cells {
            if refine_region.overlaps(&to_box(&c)) {
                let h = c.s / 2;
                for dz in 0..2 {
                    for dy in 0..2 {
                        for dx in 0..2 {
                            next.push(Cell {
                                o: [c.o[0] + dx * h, c.o[1] + dy * h, c.o[2] + dz * h],
                                s: h,
                            });
                        }
                    }
                }
            } else {
                next.push(c);
            }
        }
        cells = next;
    }

    let leaves: HashSet<Cell> = cells.iter().copied().collect();
    let limit = [n[0] * base, n[1] * base, n[2] * base];

    // Pass 1: side squares of every cell and the set of square corners.
    let mut cell_squares = Vec::with_capacity(cells.len());
    let mut corners: HashSet<[i64; 3]> = HashSet::new();
    for c in &cells {
        let mut squares = Vec::new();
        for axis in 0..3 {
            for side in [0, 1] {
                let plane = c.o[axis] + side * c.s;
                let [a, b] = other_axes(axis);
                let sq = Square {
                    axis,
                    c: plane,
                    o: [c.o[a], c.o[b]],
                    s: c.s,
                };
                let outside = plane == 0 || plane == limit[axis];
                if outside {
                    squares.push(sq);
                } else {
                    partition_side(&leaves, sq, side == 1, base, &mut squares);
                }
            }
        }
        for sq in &squares {
            for (u, v) in [(0, 0), (sq.s, 0), (sq.s, sq.s), (0, sq.s)] {
                corners.insert(sq.corner(u, v));
            }
        }
        cell_squares.push(squares);
    }

    // Pass 2: loops with hanging nodes, fanned when needed.
    let mut keys: BTreeMap<[i64; 3], usize> = BTreeMap::new();
    let mut nodes: Vec<Point3> = Vec::new();
    let mut node_id = |key: [i64; 3], nodes: &mut Vec<Point3>| -> usize {
        *keys.entry(key).or_insert_with(|| {
            let mut p = [0.0; 3];
            for a in 0..3 {
                let h = domain.extent(a) / (2 * n[a] * base) as f64;
                p[a] = if key[a] == 2 * limit[a] {
                    domain.max[a]
                } else {
                    domain.min[a] + key[a] as f64 * h
                };
            }
            nodes.push(Point3::new(p[0], p[1], p[2]));
            nodes.len() - 1
        })
    };
    let mut element_loops = Vec::with_capacity(cells.len());
    for squares in &cell_squares {
        let mut loops = Vec::new();
        for sq in squares {
            let ring = square_ring(sq, &corners);
            let dbl = |p: [i64; 3]| [2 * p[0], 2 * p[1], 2 * p[2]];
            if ring.len() == 4 {
                loops.push(
                    ring.into_iter()
                        .map(|p| node_id(dbl(p), &mut nodes))
                        .collect(),
                );
            } else {
                let mut centre = sq.corner(0, 0).map(|v| 2 * v);
                let [a, b] = other_axes(sq.axis);
                centre[a] += sq.s;
                centre[b] += sq.s;
                let cid = node_id(centre, &mut nodes);
                let ids: Vec<usize> = ring
                    .into_iter()
                    .map(|p| node_id(dbl(p), &mut nodes))
                    .collect();
                for i in 0..ids.len() {
                    loops.push(vec![cid, ids[i], ids[(i + 1) % ids.len()]]);
                }
            }
        }
        element_loops.push(loops);
    }
    let mut builder = MeshBuilder::new(nodes);
    for loops in element_loops {
        builder.add_element(loops);
    }
    Ok(builder.finish())
}

/// Splits the side of a cell into the sides of the leaves across it.
fn partition_side(
    leaves: &HashSet<Cell>,
    sq: Square,
    positive: bool,
    base: i64,
    out: &mut Vec<Square>,
) {
    let [a, b] = other_axes(sq.axis);
    let mut o = [0; 3];
    o[sq.axis] = if positive { sq.c } else { sq.c - sq.s };
    o[a] = sq.o[0];
    o[b] = sq.o[1];
    let neighbour = Cell { o, s: sq.s };
    if leaves.contains(&neighbour) || has_leaf_ancestor(leaves, neighbour, base) {
        out.push(sq);
        return;
    }
    if sq.s == 1 {
        // Unreachable for a consistent leaf set; keep the square whole.
        out.push(sq);
        return;
    }
    let h = sq.s / 2;
    for dv in 0..2 {
        for du in 0..2 {
            partition_side(
                leaves,
                Square {
                    axis: sq.axis,
                    c: sq.c,
                    o: [sq.o[0] + du * h, sq.o[1] + dv * h],
                    s: h,
                },
                positive,
                base,
                out,
            );
        }
    }
}

fn has_leaf_ancestor(leaves: &HashSet<Cell>, c: Cell, base: i64) -> bool {
    let mut s = c.s * 2;
    while s <= base {
        let o = c.o.map(|v| v.div_euclid(s) * s);
        if leaves.contains(&Cell { o, s }) {
            return true;
        }
        s *= 2;
    }
    false
}

/// Counter-clockwise (about the square's axis) boundary lattice points of a
/// square, including corners of other squares lying on its edges.
fn square_ring(sq: &Square, corners: &HashSet<[i64; 3]>) -> Vec<[i64; 3]> {
    let mut ring = Vec::new();
    let path = [
        ((0, 0), (1, 0)),
        ((sq.s, 0), (0, 1)),
        ((sq.s, sq.s), (-1, 0)),
        ((0, sq.s), (0, -1)),
    ];
    for ((u0, v0), (du, dv)) in path {
        ring.push(sq.corner(u0, v0));
        for t in 1..sq.s {
            let p = sq.corner(u0 + du * t, v0 + dv * t);
            if corners.contains(&p) {
                ring.push(p);
            }
        }
    }
    ring
}
