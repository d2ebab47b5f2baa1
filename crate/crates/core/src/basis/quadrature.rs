use super::{LocalPolygon, Point2};
use crate::error::{Error, Result};

/// Points and area weights of a polygon rule.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<Point2>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate(&self, f: impl Fn(&Point2) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p))
            .sum()
    }
}

/// Symmetric triangle rule: barycentric points and weights summing to one,
/// plus the polynomial degree integrated exactly.
pub fn triangle_rule(points: usize) -> Result<(Vec<[f64; 3]>, Vec<f64>, usize)> {
    fn orbit3(a: f64, w: f64, pts: &mut Vec<[f64; 3]>, ws: &mut Vec<f64>) {
        let b = 1.0 - 2.0 * a;
        for p in [[b, a, a], [a, b, a], [a, a, b]] {
            pts.push(p);
            ws.push(w);
        }
    }
    let mut pts = Vec::new();
    let mut ws = Vec::new();
    let degree = match points {
        1 => {
            pts.push([1.0 / 3.0; 3]);
            ws.push(1.0);
            1
        }
        3 => {
            orbit3(1.0 / 6.0, 1.0 / 3.0, &mut pts, &mut ws);
            2
        }
        6 => {
            orbit3(0.445948490915965, 0.223381589678011, &mut pts, &mut ws);
            orbit3(0.091576213509771, 0.109951743655322, &mut pts, &mut ws);
            4
        }
        12 => {
            orbit3(0.249286745170910, 0.116786275726379, &mut pts, &mut ws);
            orbit3(0.063089014491502, 0.050844906370207, &mut pts, &mut ws);
            let (a, b) = (0.053145049844817, 0.310352451033784);
            let c = 1.0 - a - b;
            for p in [
                [a, b, c],
                [b, c, a],
                [c, a, b],
                [b, a, c],
                [a, c, b],
                [c, b, a],
            ] {
                pts.push(p);
                ws.push(0.082851075618374);
            }
            6
        }
        other => return Err(Error::UnsupportedQuadrature(other)),
    };
    // Tabulated weights carry 15 digits; normalize so constants are exact.
    let s: f64 = ws.iter().sum();
    for w in &mut ws {
        *w /= s;
    }
    Ok((pts, ws, degree))
}

/// Fans the polygon about its centroid and applies a triangle rule with
/// `gauss_order` points on each sub-triangle.
pub fn triangulate_and_quadrature(
    poly: &LocalPolygon,
    gauss_order: usize,
) -> Result<QuadratureRule> {
    subdivided_rule(poly, gauss_order, 1)
}

/// As [`triangulate_and_quadrature`], with every centroid triangle further
/// split into `subdivisions²` congruent triangles.
pub fn subdivided_rule(
    poly: &LocalPolygon,
    gauss_order: usize,
    subdivisions: usize,
) -> Result<QuadratureRule> {
    let (bary, ws, _) = triangle_rule(gauss_order)?;
    let c = poly.centroid();
    let nv = poly.len();
    let m = subdivisions.max(1);
    let mut points = Vec::with_capacity(nv * m * m * ws.len());
    let mut weights = Vec::with_capacity(points.capacity());
    for i in 0..nv {
        let a = poly.vertices[i];
        let b = poly.vertices[(i + 1) % nv];
        for (p0, p1, p2) in sub_triangles(c, a, b, m) {
            let area = 0.5 * ((p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y));
            for (l, w) in bary.iter().zip(&ws) {
                points.push(Point2::from(
                    p0.coords * l[0] + p1.coords * l[1] + p2.coords * l[2],
                ));
                weights.push(w * area);
            }
        }
    }
    Ok(QuadratureRule { points, weights })
}

fn sub_triangles(p0: Point2, p1: Point2, p2: Point2, m: usize) -> Vec<(Point2, Point2, Point2)> {
    if m == 1 {
        return vec![(p0, p1, p2)];
    }
    let at = |i: usize, j: usize| {
        let (u, v) = (i as f64 / m as f64, j as f64 / m as f64);
        Point2::from(p0.coords * (1.0 - u - v) + p1.coords * u + p2.coords * v)
    };
    let mut out = Vec::with_capacity(m * m);
    for j in 0..m {
        for i in 0..m - j {
            out.push((at(i, j), at(i + 1, j), at(i, j + 1)));
            if i + j + 1 < m {
                out.push((at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> LocalPolygon {
        LocalPolygon::planar(vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ])
    }

    #[test]
    fn square_area_for_every_order() {
        for order in [1, 3, 6, 12] {
            let r = triangulate_and_quadrature(&unit_square(), order).unwrap();
            assert!((r.total_weight() - 1.0).abs() < 1e-14);
            assert!(r.weights.iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn square_bilinear_monomial() {
        let r = triangulate_and_quadrature(&unit_square(), 3).unwrap();
        assert!((r.integrate(|p| p.x * p.y) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn pentagon_area() {
        let r = triangulate_and_quadrature(&LocalPolygon::regular(5, 1.0), 6).unwrap();
        let exact = 2.5 * (72f64).to_radians().sin();
        assert!((r.total_weight() - exact).abs() < 1e-12 * exact);
        assert!((exact - 2.377641).abs() < 1e-6);
    }

    #[test]
    fn unsupported_order() {
        assert!(matches!(
            triangulate_and_quadrature(&unit_square(), 4),
            Err(Error::UnsupportedQuadrature(4))
        ));
    }

    #[test]
    fn subdivision_keeps_area_and_degree() {
        let poly = LocalPolygon::regular(7, 2.0);
        let r = subdivided_rule(&poly, 6, 3).unwrap();
        assert!((r.total_weight() - poly.area()).abs() < 1e-13 * poly.area());
        let coarse = triangulate_and_quadrature(&poly, 6).unwrap();
        let f = |p: &Point2| p.x.powi(4) * p.y.powi(0) + p.x * p.y.powi(3);
        assert!((r.integrate(f) - coarse.integrate(f)).abs() < 1e-12);
    }
}
