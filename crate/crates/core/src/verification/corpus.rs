use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mesh::{validate_mesh, Mesh, MeshBuilder, Point3, Vector3};

/// Convex polyhedron `{x : nᵢ·x ≤ dᵢ}` meshed as a single element.
///
/// Returns `None` when the planes do not bound a well shaped solid: short
/// edges, face angles outside [20°, 160°] or vertices shared by more than
/// three planes. Nearly straight face angles put poles of the rational face
/// basis next to the face.
pub fn halfspace_polyhedron(planes: &[(Vector3, f64)]) -> Option<Mesh> {
    let m = planes.len();
    let mut verts: Vec<(Point3, Vec<usize>)> = Vec::new();
    let tol = 1e-9;
    for i in 0..m {
        for j in i + 1..m {
            for k in j + 1..m {
                let a = nalgebra::Matrix3::from_rows(&[
                    planes[i].0.transpose(),
                    planes[j].0.transpose(),
                    planes[k].0.transpose(),
                ]);
                if a.determinant().abs() < 1e-6 {
                    continue;
                }
                let x = a
                    .lu()
                    .solve(&Vector3::new(planes[i].1, planes[j].1, planes[k].1))?;
                if planes.iter().all(|(n, d)| n.dot(&x) <= d + tol) {
                    let p = Point3::from(x);
                    if verts.iter().any(|(q, _)| (q - p).norm() < 1e-6) {
                        // Four planes through one vertex.
                        return None;
                    }
                    let on: Vec<usize> = (0..m)
                        .filter(|&l| (planes[l].0.dot(&x) - planes[l].1).abs() < tol)
                        .collect();
                    verts.push((p, on));
                }
            }
        }
    }
    if verts.len() < 4 {
        return None;
    }
    let nodes: Vec<Point3> = verts.iter().map(|v| v.0).collect();
    let diam = nodes
        .iter()
        .flat_map(|p| nodes.iter().map(move |q| (p - q).norm()))
        .fold(0.0, f64::max);
    let mut loops = Vec::new();
    for (l, (n, _)) in planes.iter().enumerate() {
        let on: Vec<usize> = (0..verts.len())
            .filter(|&v| verts[v].1.contains(&l))
            .collect();
        if on.is_empty() {
            continue;
        }
        if on.len() < 3 {
            return None;
        }
        let c = on
            .iter()
            .fold(Vector3::zeros(), |s, &v| s + nodes[v].coords)
            / on.len() as f64;
        let u = (nodes[on[0]].coords - c).normalize();
        let w = n.cross(&u);
        let mut ordered: Vec<(f64, usize)> = on
            .iter()
            .map(|&v| {
                let d = nodes[v].coords - c;
                (d.dot(&w).atan2(d.dot(&u)), v)
            })
            .collect();
        ordered.sort_by(|a, b| a.0.total_cmp(&b.0));
        let lp: Vec<usize> = ordered.iter().map(|o| o.1).collect();
        let k = lp.len();
        for e in 0..k {
            let (prev, here, next) = (
                nodes[lp[(e + k - 1) % k]],
                nodes[lp[e]],
                nodes[lp[(e + 1) % k]],
            );
            if (next - here).norm() < 0.08 * diam {
                return None;
            }
            let (a, b) = (prev - here, next - here);
            let angle = (a.dot(&b) / (a.norm() * b.norm()))
                .clamp(-1.0, 1.0)
                .acos()
                .to_degrees();
            if !(20.0..=160.0).contains(&angle) {
                return None;
            }
        }
        loops.push(lp);
    }
    let mut b = MeshBuilder::new(nodes);
    b.add_element(loops);
    let mesh = b.finish();
    validate_mesh(&mesh).is_empty().then_some(mesh)
}

fn unit_vector(rng: &mut impl Rng) -> Vector3 {
    loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.2 && n <= 1.0 {
            return v / n;
        }
    }
}

/// One random convex polyhedron: a tilted, stretched box with a few corners
/// cut off, so faces range from triangles to hexagons.
pub fn random_polyhedron(rng: &mut impl Rng) -> Mesh {
    loop {
        let mut planes = Vec::new();
        for axis in 0..3 {
            for sign in [-1.0, 1.0] {
                let mut n = Vector3::zeros();
                n[axis] = sign;
                let n = (n + 0.25 * unit_vector(rng)).normalize();
                planes.push((n, rng.random_range(0.6..1.4)));
            }
        }
        for _ in 0..rng.random_range(0..5) {
            planes.push((unit_vector(rng), rng.random_range(1.0..1.5)));
        }
        let Some(mut mesh) = halfspace_polyhedron(&planes) else {
            continue;
        };
        // Random scale and offset so physical units vary too.
        let s = 10f64.powf(rng.random_range(-1.0..1.0));
        let off = Vector3::new(
            rng.random_range(-5.0..5.0),
            rng.random_range(-5.0..5.0),
            rng.random_range(-5.0..5.0),
        );
        for p in &mut mesh.nodes {
            *p = Point3::from(p.coords * s + off);
        }
        return mesh;
    }
}

/// Seeded corpus of single-element meshes.
pub fn random_corpus(seed: u64, count: usize) -> Vec<Mesh> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_polyhedron(&mut rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_from_planes() {
        let planes: Vec<(Vector3, f64)> = (0..3)
            .flat_map(|a| {
                [-1.0, 1.0].map(|s| {
                    let mut n = Vector3::zeros();
                    n[a] = s;
                    (n, 1.0)
                })
            })
            .collect();
        let m = halfspace_polyhedron(&planes).unwrap();
        assert_eq!(m.num_nodes(), 8);
        assert_eq!(m.faces.len(), 6);
        assert!((m.element_volume(0) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn corpus_is_reproducible_and_varied() {
        let a = random_corpus(7, 12);
        let b = random_corpus(7, 12);
        assert_eq!(a, b);
        let sizes: std::collections::BTreeSet<usize> = a
            .iter()
            .flat_map(|m| m.faces.iter().map(|f| f.len()))
            .collect();
        assert!(sizes.len() >= 3, "face sizes {sizes:?}");
        for m in &a {
            assert!(m.element_volume(0) > 0.0);
        }
    }
}
