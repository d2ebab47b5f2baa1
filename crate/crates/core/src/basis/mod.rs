//! Wachspress shape functions on planar convex polygons and polygon quadrature.

mod quadrature;

pub use quadrature::{subdivided_rule, triangle_rule, triangulate_and_quadrature, QuadratureRule};

use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::mesh::{polygon_area_normal, Point3, Vector3};

pub type Point2 = nalgebra::Point2<f64>;

/// Polygon expressed in an orthonormal in-plane frame.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalPolygon {
    /// Counter-clockwise vertices in frame coordinates `(η, ζ)`.
    pub vertices: Vec<Point2>,
    pub origin: Point3,
    pub axis_eta: Vector3,
    pub axis_zeta: Vector3,
    pub normal: Vector3,
}

impl LocalPolygon {
    /// Frame from an oriented planar loop: first axis along the first edge,
    /// normal by Newell's method, second axis `normal × first`.
    pub fn from_points(points: &[Point3]) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::Validation(format!(
                "polygon with {} vertices",
                points.len()
            )));
        }
        let normal = polygon_area_normal(points);
        let first = points[1] - points[0];
        if normal.norm() == 0.0 || first.norm() == 0.0 {
            return Err(Error::Validation("degenerate polygon".into()));
        }
        let normal = normal.normalize();
        let axis_eta = (first - normal * first.dot(&normal)).normalize();
        let axis_zeta = normal.cross(&axis_eta);
        let origin = points[0];
        let vertices = points
            .iter()
            .map(|p| {
                let d = p - origin;
                Point2::new(d.dot(&axis_eta), d.dot(&axis_zeta))
            })
            .collect();
        Ok(Self {
            vertices,
            origin,
            axis_eta,
            axis_zeta,
            normal,
        })
    }

    /// Polygon given directly in the plane z = 0.
    pub fn planar(vertices: Vec<Point2>) -> Self {
        Self {
            vertices,
            origin: Point3::origin(),
            axis_eta: Vector3::x(),
            axis_zeta: Vector3::y(),
            normal: Vector3::z(),
        }
    }

    pub fn regular(n: usize, circumradius: f64) -> Self {
        let v = (0..n)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                Point2::new(circumradius * t.cos(), circumradius * t.sin())
            })
            .collect();
        Self::planar(v)
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn to_global(&self, p: &Point2) -> Point3 {
        self.origin + self.axis_eta * p.x + self.axis_zeta * p.y
    }

    pub fn area(&self) -> f64 {
        let v = &self.vertices;
        let mut a = 0.0;
        for i in 0..v.len() {
            let (p, q) = (v[i], v[(i + 1) % v.len()]);
            a += p.x * q.y - q.x * p.y;
        }
        0.5 * a
    }

    pub fn centroid(&self) -> Point2 {
        let v = &self.vertices;
        let mut c = Vector2::zeros();
        let mut a = 0.0;
        for i in 0..v.len() {
            let (p, q) = (v[i], v[(i + 1) % v.len()]);
            let w = p.x * q.y - q.x * p.y;
            a += w;
            c += (p.coords + q.coords) * w;
        }
        Point2::from(c / (3.0 * a))
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, p) in self.vertices.iter().enumerate() {
            for q in &self.vertices[i + 1..] {
                d = d.max((p - q).norm());
            }
        }
        d
    }

    /// Unit outward normal of edge `i` (from vertex `i` to `i + 1`).
    fn edge_normal(&self, i: usize) -> Vector2<f64> {
        let a = self.vertices[i];
        let b = self.vertices[(i + 1) % self.vertices.len()];
        let d = b - a;
        Vector2::new(d.y, -d.x).normalize()
    }
}

/// Shape values and in-plane gradients at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisEval {
    pub n: Vec<f64>,
    pub dn_deta: Vec<f64>,
    pub dn_dzeta: Vec<f64>,
}

/// Wachspress coordinates and their gradients at an interior point.
pub fn wachspress_eval(poly: &LocalPolygon, p: &Point2) -> Result<BasisEval> {
    let nv = poly.len();
    let tol = 1e-14 * poly.diameter();
    let mut scaled = Vec::with_capacity(nv);
    for i in 0..nv {
        let normal = poly.edge_normal(i);
        let h = (poly.vertices[i] - p).dot(&normal);
        if h.is_nan() || h <= tol {
            return Err(Error::EvaluationDomain(format!(
                "({}, {}) is not strictly inside the polygon (edge {i}, distance {h:.3e})",
                p.x, p.y
            )));
        }
        scaled.push(normal / h);
    }
    let mut w = vec![0.0; nv];
    let mut r = vec![Vector2::zeros(); nv];
    for i in 0..nv {
        let (a, b) = (scaled[(i + nv - 1) % nv], scaled[i]);
        w[i] = a.x * b.y - a.y * b.x;
        r[i] = a + b;
    }
    let total: f64 = w.iter().sum();
    let n: Vec<f64> = w.iter().map(|wi| wi / total).collect();
    let mut mean = Vector2::zeros();
    for i in 0..nv {
        mean += r[i] * n[i];
    }
    let mut dn_deta = vec![0.0; nv];
    let mut dn_dzeta = vec![0.0; nv];
    for i in 0..nv {
        let g = (r[i] - mean) * n[i];
        dn_deta[i] = g.x;
        dn_dzeta[i] = g.y;
    }
    Ok(BasisEval {
        n,
        dn_deta,
        dn_dzeta,
    })
}

/// Largest difference between analytic gradients and central differences.
pub fn wachspress_grad_check(poly: &LocalPolygon, p: &Point2, step: f64) -> Result<f64> {
    let at = wachspress_eval(poly, p)?;
    let mut worst: f64 = 0.0;
    for (axis, analytic) in [(0, &at.dn_deta), (1, &at.dn_dzeta)] {
        let mut dp = Vector2::zeros();
        dp[axis] = step;
        let plus = wachspress_eval(poly, &(p + dp))?;
        let minus = wachspress_eval(poly, &(p - dp))?;
        for i in 0..poly.len() {
            let fd = (plus.n[i] - minus.n[i]) / (2.0 * step);
            worst = worst.max((fd - analytic[i]).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> LocalPolygon {
        LocalPolygon::planar(vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ])
    }

    fn triangle() -> LocalPolygon {
        LocalPolygon::planar(vec![
            Point2::new(0.1, -0.2),
            Point2::new(1.3, 0.25),
            Point2::new(0.4, 0.9),
        ])
    }

    fn areal(t: &LocalPolygon, p: &Point2) -> [f64; 3] {
        let v = &t.vertices;
        let area = |a: &Point2, b: &Point2, c: &Point2| {
            0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y))
        };
        let total = area(&v[0], &v[1], &v[2]);
        [
            area(p, &v[1], &v[2]) / total,
            area(&v[0], p, &v[2]) / total,
            area(&v[0], &v[1], p) / total,
        ]
    }

    #[test]
    fn regular_polygon_centroid_is_uniform() {
        for n in 3..=9 {
            let b = wachspress_eval(&LocalPolygon::regular(n, 1.3), &Point2::origin()).unwrap();
            for v in b.n {
                assert!((v - 1.0 / n as f64).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn square_matches_bilinear() {
        let b = wachspress_eval(&square(), &Point2::new(0.25, 0.25)).unwrap();
        let expect = [0.5625, 0.1875, 0.0625, 0.1875];
        for (a, e) in b.n.iter().zip(expect) {
            assert!((a - e).abs() < 1e-15);
        }
        let (x, y) = (0.3, 0.7);
        let b = wachspress_eval(&square(), &Point2::new(x, y)).unwrap();
        let bilinear = [(1.0 - x) * (1.0 - y), x * (1.0 - y), x * y, (1.0 - x) * y];
        let dx = [-(1.0 - y), 1.0 - y, y, -y];
        for i in 0..4 {
            assert!((b.n[i] - bilinear[i]).abs() < 1e-15);
            assert!((b.dn_deta[i] - dx[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn triangle_matches_areal_coordinates() {
        let t = triangle();
        for p in [
            Point2::new(0.5, 0.3),
            Point2::new(0.2, -0.1),
            Point2::new(0.45, 0.8),
        ] {
            let b = wachspress_eval(&t, &p).unwrap();
            for (a, e) in b.n.iter().zip(areal(&t, &p)) {
                assert!((a - e).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn gradient_checks() {
        assert!(wachspress_grad_check(&square(), &Point2::new(0.3, 0.4), 1e-6).unwrap() <= 1e-8);
        assert!(wachspress_grad_check(&triangle(), &Point2::new(0.5, 0.3), 1e-6).unwrap() <= 1e-10);
        let hex = LocalPolygon::regular(6, 1.0);
        let b = wachspress_eval(&hex, &Point2::origin()).unwrap();
        assert!(b.dn_deta.iter().sum::<f64>().abs() < 1e-12);
        assert!(b.dn_dzeta.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn outside_point_is_rejected() {
        for p in [
            Point2::new(1.5, 0.5),
            Point2::new(1.0, 0.5),
            Point2::new(0.0, 0.0),
        ] {
            assert!(matches!(
                wachspress_eval(&square(), &p),
                Err(Error::EvaluationDomain(_))
            ));
        }
    }

    #[test]
    fn edge_limit_is_linear() {
        let pent = LocalPolygon::regular(5, 1.0);
        let (a, b) = (pent.vertices[1], pent.vertices[2]);
        let t = 0.3;
        let on_edge = a + (b - a) * t;
        // Approach the edge from inside.
        let inward = (pent.centroid() - on_edge) * 1e-9;
        let e = wachspress_eval(&pent, &(on_edge + inward)).unwrap();
        assert!((e.n[1] - (1.0 - t)).abs() < 1e-7);
        assert!((e.n[2] - t).abs() < 1e-7);
        let near_vertex = a + (pent.centroid() - a) * 1e-9;
        let v = wachspress_eval(&pent, &near_vertex).unwrap();
        assert!((v.n[1] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn frame_from_points() {
        let pts = [
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(1.0, 1.0, 0.0),
            Point3::new(1.0, 1.0, 1.0),
            Point3::new(1.0, 0.0, 1.0),
        ];
        let lp = LocalPolygon::from_points(&pts).unwrap();
        assert!((lp.normal - Vector3::x()).norm() < 1e-15);
        assert!((lp.area() - 1.0).abs() < 1e-15);
        for (p, v) in pts.iter().zip(&lp.vertices) {
            assert!((lp.to_global(v) - p).norm() < 1e-15);
        }
    }
}
