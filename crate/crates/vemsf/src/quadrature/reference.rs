//! Reference polygon integration used to cross-check the SBC rule: a signed
//! fan triangulation with tensor-product rules collapsed onto each triangle.
//!
//! The construction is deliberately different from SBC (per-triangle Duffy
//! maps instead of the boundary-scaled parametrization) and is itself
//! validated against closed-form monomial integrals in the test suite.

use super::{gauss_1d, QuadratureRule};
use nalgebra::Point2;

/// Rule over a single triangle, exact for total degree ≤ `degree`.
///
/// Uses the collapsed-square map p(u,v) = a + u[(1−v)(b−a) + v(c−a)] with
/// Jacobian 2|T|u; orientation is carried by the signed area, so inverted
/// triangles produce negative weights.
pub fn triangle_rule(tri: &[Point2<f64>; 3], degree: usize) -> QuadratureRule {
    let n = (degree + 2).div_ceil(2);
    let (nodes, wts) = gauss_1d(n).expect("triangle_rule degree out of range");
    let [a, b, c] = *tri;
    let signed_area2 = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (&u, &wu) in nodes.iter().zip(&wts) {
        for (&v, &wv) in nodes.iter().zip(&wts) {
            let dir = (b - a) * (1.0 - v) + (c - a) * v;
            points.push(a + dir * u);
            weights.push(signed_area2 * u * wu * wv);
        }
    }
    QuadratureRule { points, weights }
}

/// Reference rule over a simple polygon: signed fan of triangles rooted at
/// the first vertex. Winding cancellation makes the fan exact for nonconvex
/// polygons as well.
pub fn polygon_reference_rule(pts: &[Point2<f64>], degree: usize) -> QuadratureRule {
    assert!(pts.len() >= 3, "polygon needs at least 3 vertices");
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for i in 1..pts.len() - 1 {
        let tri = [pts[0], pts[i], pts[i + 1]];
        let rule = triangle_rule(&tri, degree);
        points.extend(rule.points);
        weights.extend(rule.weights);
    }
    QuadratureRule { points, weights }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn fan_rule_unit_square_products() {
        let square = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ];
        for d in 0..=10usize {
            let rule = polygon_reference_rule(&square, d);
            for a in 0..=d {
                for b in 0..=(d - a) {
                    let exact = 1.0 / ((a as f64 + 1.0) * (b as f64 + 1.0));
                    let num = rule.integrate(|p| p.x.powi(a as i32) * p.y.powi(b as i32));
                    assert_relative_eq!(num, exact, epsilon = 1e-13);
                }
            }
        }
    }

    #[test]
    fn fan_rule_nonconvex_equals_subpolygon_sum() {
        // An L-shape integrated directly vs as two rectangles.
        let ell = [
            Point2::new(0.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(2.0, 1.0),
            Point2::new(1.0, 1.0),
            Point2::new(1.0, 2.0),
            Point2::new(0.0, 2.0),
        ];
        let lower = [
            Point2::new(0.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(2.0, 1.0),
            Point2::new(0.0, 1.0),
        ];
        let upper = [
            Point2::new(0.0, 1.0),
            Point2::new(1.0, 1.0),
            Point2::new(1.0, 2.0),
            Point2::new(0.0, 2.0),
        ];
        let f = |p: Point2<f64>| p.x.powi(3) * p.y + 2.0 * p.y * p.y;
        let whole = polygon_reference_rule(&ell, 4).integrate(f);
        let parts = polygon_reference_rule(&lower, 4).integrate(f)
            + polygon_reference_rule(&upper, 4).integrate(f);
        assert_relative_eq!(whole, parts, epsilon = 1e-13);
    }

    #[test]
    fn fan_rule_weights_sum_to_signed_area() {
        let pent = [
            Point2::new(0.3, 0.0),
            Point2::new(1.4, 0.4),
            Point2::new(1.0, 1.5),
            Point2::new(0.9, 0.6), // reflex: fan triangles overlap with signs
            Point2::new(-0.2, 1.0),
        ];
        let rule = polygon_reference_rule(&pent, 0);
        let area = crate::mesh::polygon_signed_area(&pent);
        let total: f64 = rule.weights.iter().sum();
        assert_relative_eq!(total, area, epsilon = 1e-14);
    }
}
