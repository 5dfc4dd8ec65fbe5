//! Numerical integration: scaled-boundary cubature (SBC) over polygons,
//! Gauss rules on edges, and Gauss–Lobatto node layouts for edge DOFs.
//!
//! The SBC rule maps each boundary edge to the unit square through
//! x = x₀ + ξ(c_i(t) − x₀) and integrates with a tensor-product Gauss rule,
//! so a single scheme covers convex and nonconvex polygons (negative
//! sub-cell weights are permitted for the latter).

pub mod reference;

use crate::mesh::ElementGeometry;
use nalgebra::Point2;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QuadratureError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate edge of length {0}")]
    DegenerateEdge(f64),
}

/// Points and weights of a cubature rule. Weights carry the measure of the
/// integration region (area for polygon rules, arclength for edge rules).
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<Point2<f64>>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn integrate(&self, f: impl Fn(Point2<f64>) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&p, &w)| w * f(p))
            .sum()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Gauss–Legendre rule with `n` points on [0,1]; exact for polynomials of
/// degree ≤ 2n−1. Nodes are found by Newton iteration on P_n.
pub fn gauss_1d(n: usize) -> Result<(Vec<f64>, Vec<f64>), QuadratureError> {
    if n < 1 || n > 30 {
        return Err(QuadratureError::InvalidParameter(format!(
            "gauss_1d supports 1..=30 points, got {n}"
        )));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev-like initial guess on [-1,1].
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        nodes[i] = 0.5 * (x + 1.0);
        weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    nodes.reverse();
    weights.reverse();
    Ok((nodes, weights))
}

/// Evaluates (P_n(x), P_n'(x)) by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss–Lobatto parameters on [0,1] for order-k edge interpolation:
/// the two endpoints plus k−1 interior points, k ≤ 6.
pub fn lobatto_edge_nodes(k: usize) -> Vec<f64> {
    assert!((1..=6).contains(&k), "lobatto_edge_nodes supports k in 1..=6");
    // Interior Lobatto nodes on [-1,1] in closed form.
    let interior: Vec<f64> = match k {
        1 => vec![],
        2 => vec![0.0],
        3 => {
            let a = 1.0 / 5f64.sqrt();
            vec![-a, a]
        }
        4 => {
            let a = (3.0f64 / 7.0).sqrt();
            vec![-a, 0.0, a]
        }
        5 => {
            let s = 2.0 * 7f64.sqrt() / 21.0;
            let a = (1.0 / 3.0 - s).sqrt();
            let b = (1.0 / 3.0 + s).sqrt();
            vec![-b, -a, a, b]
        }
        6 => {
            let s = 2.0 / 11.0 * (5.0f64 / 3.0).sqrt();
            let a = (5.0 / 11.0 - s).sqrt();
            let b = (5.0 / 11.0 + s).sqrt();
            vec![-b, -a, 0.0, a, b]
        }
        _ => unreachable!(),
    };
    let mut out = Vec::with_capacity(k + 1);
    out.push(0.0);
    out.extend(interior.iter().map(|x| 0.5 * (x + 1.0)));
    out.push(1.0);
    out
}

/// Arclength rule on the segment a–b, exact for polynomial traces of the
/// given degree; weights sum to the edge length.
pub fn edge_rule(
    a: Point2<f64>,
    b: Point2<f64>,
    degree: usize,
) -> Result<QuadratureRule, QuadratureError> {
    let length = (b - a).norm();
    if length == 0.0 {
        return Err(QuadratureError::DegenerateEdge(0.0));
    }
    let n = degree / 2 + 1;
    let (nodes, weights) = gauss_1d(n)?;
    let points = nodes.iter().map(|&t| a + (b - a) * t).collect();
    let weights = weights.iter().map(|&w| w * length).collect();
    Ok(QuadratureRule { points, weights })
}

/// Scaled-boundary cubature over a simple polygon, exact for bivariate
/// polynomials of total degree ≤ `degree`.
///
/// Each edge contributes ℓ_i·|e_i|·∫₀¹∫₀¹ ξ f(x₀ + ξ(c_i(t) − x₀)) dξ dt
/// with ℓ_i the signed distance from `base_point` to the edge line, so the
/// rule is valid for nonconvex polygons (sub-cell weights may be negative,
/// and points may fall outside the polygon).
pub fn sbc_polygon_rule(
    geom: &ElementGeometry,
    base_point: Point2<f64>,
    degree: usize,
) -> Result<QuadratureRule, QuadratureError> {
    if degree > 40 {
        return Err(QuadratureError::InvalidParameter(format!(
            "SBC degree cap is 40, got {degree}"
        )));
    }
    // The radial factor ξ multiplies a degree-(degree) integrand in ξ, so
    // one extra ξ-degree must be integrated exactly.
    let n = (degree + 2).div_ceil(2);
    let (nodes, wts) = gauss_1d(n)?;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for edge in &geom.edges {
        if edge.length == 0.0 {
            return Err(QuadratureError::DegenerateEdge(0.0));
        }
        // ℓ_i·|e_i| equals the cross product of the endpoint offsets from
        // the base point (twice the signed area of the sub-triangle).
        let u = edge.start - base_point;
        let v = edge.end - base_point;
        let factor = u.x * v.y - u.y * v.x;
        if factor == 0.0 {
            continue; // edge collinear with the base point
        }
        for (&xi, &wxi) in nodes.iter().zip(&wts) {
            for (&t, &wt) in nodes.iter().zip(&wts) {
                let c = edge.start + (edge.end - edge.start) * t;
                points.push(base_point + (c - base_point) * xi);
                weights.push(factor * wxi * wt * xi);
            }
        }
    }
    Ok(QuadratureRule { points, weights })
}
