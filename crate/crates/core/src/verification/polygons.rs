use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::basis::{wachspress_eval, wachspress_grad_check, LocalPolygon, Point2};
use crate::error::Result;

/// Convex polygon with 3 to 10 vertices on a random rotated ellipse; angular
/// gaps are kept above a fifth of the uniform spacing so no vertex is nearly
/// straight.
pub fn random_convex_polygon(rng: &mut impl Rng) -> LocalPolygon {
    let n = rng.random_range(3..=10);
    let min_gap = 0.2 * std::f64::consts::TAU / n as f64;
    let angles = loop {
        let mut a: Vec<f64> = (0..n)
            .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
            .collect();
        a.sort_by(f64::total_cmp);
        let wrap = a[0] + std::f64::consts::TAU - a[n - 1];
        if wrap >= min_gap && a.windows(2).all(|w| w[1] - w[0] >= min_gap) {
            break a;
        }
    };
    let (ra, rb) = (rng.random_range(0.5..2.0), rng.random_range(0.5..2.0));
    let rot = rng.random_range(0.0..std::f64::consts::PI);
    let centre = Point2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
    let (s, c) = rot.sin_cos();
    let v = angles
        .iter()
        .map(|t| {
            let (x, y) = (ra * t.cos(), rb * t.sin());
            centre + nalgebra::Vector2::new(c * x - s * y, s * x + c * y)
        })
        .collect();
    LocalPolygon::planar(v)
}

/// Uniform point in the polygon shrunk by `shrink` about its vertex mean,
/// drawn through the fan of triangles from that mean.
fn interior_point(poly: &LocalPolygon, shrink: f64, rng: &mut impl Rng) -> Point2 {
    let n = poly.len();
    let mean = Point2::from(
        poly.vertices
            .iter()
            .map(|p| p.coords)
            .sum::<nalgebra::Vector2<f64>>()
            / n as f64,
    );
    let areas: Vec<f64> = (0..n)
        .map(|i| {
            let (a, b) = (poly.vertices[i] - mean, poly.vertices[(i + 1) % n] - mean);
            0.5 * (a.x * b.y - a.y * b.x)
        })
        .collect();
    let mut pick = rng.random_range(0.0..areas.iter().sum::<f64>());
    let mut i = 0;
    while i + 1 < n && pick > areas[i] {
        pick -= areas[i];
        i += 1;
    }
    let (mut u, mut w): (f64, f64) = (rng.random(), rng.random());
    if u + w > 1.0 {
        (u, w) = (1.0 - u, 1.0 - w);
    }
    let (a, b) = (poly.vertices[i] - mean, poly.vertices[(i + 1) % n] - mean);
    mean + (a * u + b * w) * shrink
}

#[derive(Clone, Debug, Serialize)]
pub struct WachspressReport {
    pub polygons: usize,
    pub points: usize,
    /// Worst `|Σ Nᵢ − 1|`.
    pub partition_error: f64,
    /// Worst `|Σ Nᵢ xᵢ − x|` over the polygon diameter.
    pub linear_error: f64,
    /// Worst gradient mismatch against central differences, times the diameter.
    pub gradient_error: f64,
}

/// Shape function checks on `points` random points spread over random convex
/// polygons, ten points per polygon.
pub fn wachspress_suite(seed: u64, points: usize) -> Result<WachspressReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = WachspressReport {
        polygons: 0,
        points: 0,
        partition_error: 0.0,
        linear_error: 0.0,
        gradient_error: 0.0,
    };
    while r.points < points {
        let poly = random_convex_polygon(&mut rng);
        r.polygons += 1;
        let d = poly.diameter();
        for _ in 0..10.min(points - r.points) {
            let p = interior_point(&poly, 0.9, &mut rng);
            let e = wachspress_eval(&poly, &p)?;
            let sum: f64 = e.n.iter().sum();
            let x = poly
                .vertices
                .iter()
                .zip(&e.n)
                .fold(nalgebra::Vector2::zeros(), |s, (v, n)| s + v.coords * *n);
            r.partition_error = r.partition_error.max((sum - 1.0).abs());
            r.linear_error = r.linear_error.max((x - p.coords).norm() / d);
            r.gradient_error = r
                .gradient_error
                .max(wachspress_grad_check(&poly, &p, 1e-6 * d)? * d);
            r.points += 1;
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polygons_are_convex_and_counter_clockwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let p = random_convex_polygon(&mut rng);
            let n = p.len();
            for i in 0..n {
                let (a, b, c) = (
                    p.vertices[i],
                    p.vertices[(i + 1) % n],
                    p.vertices[(i + 2) % n],
                );
                let (u, v) = (b - a, c - b);
                assert!(u.x * v.y - u.y * v.x > 0.0);
            }
        }
    }

    #[test]
    fn small_suite_passes() {
        let r = wachspress_suite(1, 100).unwrap();
        assert_eq!(r.points, 100);
        assert!(
            r.partition_error < 1e-12 && r.linear_error < 1e-12 && r.gradient_error < 1e-7,
            "{r:?}"
        );
    }
}
