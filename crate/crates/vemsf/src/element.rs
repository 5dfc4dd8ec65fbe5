//! Element-level stiffness and load computation. The stiffness is assembled
//! purely from the L² strain projection — K_E = Πᵀ H Π with
//! H = ∫ (N^p)ᵀ C N^p — with no added stabilization term.

use crate::mesh::ElementGeometry;
use crate::polyspace::{scalar_monomials, scalar_space_dim, MaterialMatrix, MatrixMonomialBasis, VectorMonomialBasis};
use crate::projectors::{build_projectors, lagrange_value, ProjectorError, ProjectorSet};
use crate::quadrature::{edge_rule, sbc_polygon_rule, QuadratureError};
use nalgebra::{DMatrix, DVector, Point2, Vector2};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ElementError {
    #[error(transparent)]
    Projector(#[from] ProjectorError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error("strain order ell={ell} must be at least k-1={min}")]
    EllTooSmall { ell: usize, min: usize },
    #[error("energy matrix lost positive definiteness (degenerate element geometry)")]
    IndefiniteEnergy,
}

/// Strategy for choosing the strain space order ℓ per element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EllRule {
    /// ℓ = max(k−1, ⌈(N_E + 2k − 5)/2⌉), which makes the strain space rich
    /// enough for a full-rank projection on any supported element.
    SufficientBound,
    /// A fixed ℓ for every element, used by the spectral sweeps.
    Fixed(usize),
}

/// Resolves the strain order for an element with `n_e` edges at order `k`.
pub fn select_ell(rule: EllRule, k: usize, n_e: usize) -> usize {
    match rule {
        EllRule::SufficientBound => {
            let bound = (n_e + 2 * k).saturating_sub(5).div_ceil(2);
            bound.max(k - 1)
        }
        EllRule::Fixed(ell) => ell,
    }
}

/// One element's discrete operators: stiffness, projectors, geometry.
#[derive(Debug)]
pub struct ElementOperators {
    pub geom: ElementGeometry,
    pub projectors: ProjectorSet,
    pub stiffness: DMatrix<f64>,
}

/// The Voigt-energy matrix H = ∫ (N^p)ᵀ C N^p = kron(moment matrix, C).
fn energy_matrix(
    geom: &ElementGeometry,
    mat_basis: &MatrixMonomialBasis,
    material: &MaterialMatrix,
) -> Result<DMatrix<f64>, QuadratureError> {
    let l = mat_basis.l;
    let p = scalar_space_dim(l);
    let rule = sbc_polygon_rule(geom, geom.vertices[0], 2 * l)?;
    let mut moments = DMatrix::zeros(p, p);
    for (&x, &w) in rule.points.iter().zip(&rule.weights) {
        let (xi, eta) = mat_basis.scaled(x);
        let mono = DVector::from_vec(scalar_monomials(l, xi, eta));
        moments.syger(w, &mono, &mono, 1.0);
    }
    let mut h = DMatrix::zeros(3 * p, 3 * p);
    for i in 0..p {
        for j in 0..p {
            let m = moments[(i.max(j), i.min(j))];
            for a in 0..3 {
                for b in 0..3 {
                    h[(3 * i + a, 3 * j + b)] = m * material.c[(a, b)];
                }
            }
        }
    }
    Ok(h)
}

/// Builds projectors and the stabilization-free stiffness K_E = Πᵀ H Π for
/// one element.
pub fn element_operators(
    geom: ElementGeometry,
    k: usize,
    ell_rule: EllRule,
    material: &MaterialMatrix,
) -> Result<ElementOperators, ElementError> {
    let ell = select_ell(ell_rule, k, geom.vertices.len());
    if ell + 1 < k {
        return Err(ElementError::EllTooSmall { ell, min: k - 1 });
    }
    let projectors = build_projectors(&geom, k, ell)?;
    let mat_basis = MatrixMonomialBasis::new(ell, geom.centroid, geom.diameter);
    let h = energy_matrix(&geom, &mat_basis, material)?;
    // The exact Πᵀ H Π is symmetric, but a floating-point triple product is
    // not: rounding amplified through the projector solve can leave an
    // asymmetry well above 1e-12 on near-degenerate elements. Writing
    // H = LLᵀ and forming the Gram matrix of W = LᵀΠ keeps the computed
    // stiffness exactly symmetric and positive semidefinite.
    let chol = h.cholesky().ok_or(ElementError::IndefiniteEnergy)?;
    let w = chol.l().transpose() * &projectors.pi;
    let stiffness = w.transpose() * &w;
    Ok(ElementOperators {
        geom,
        projectors,
        stiffness,
    })
}

/// Volume load vector b_E = Π̃⁰ᵀ ∫ (Ñ^p)ᵀ f. `extra_degree` raises the
/// quadrature degree above 2k for non-polynomial body forces.
pub fn element_body_force(
    ops: &ElementOperators,
    f: impl Fn(Point2<f64>) -> Vector2<f64>,
    extra_degree: usize,
) -> Result<DVector<f64>, ElementError> {
    let geom = &ops.geom;
    let k = ops.projectors.layout.k;
    let basis = VectorMonomialBasis::new(k, geom.centroid, geom.diameter);
    let rule = sbc_polygon_rule(geom, geom.vertices[0], 2 * k + extra_degree)?;
    let mut rhs = DVector::zeros(basis.size());
    for (&x, &w) in rule.points.iter().zip(&rule.weights) {
        let np = basis.eval(x);
        let fv = f(x);
        rhs += np.transpose() * fv * w;
    }
    Ok(ops.projectors.pi0_tilde.transpose() * rhs)
}

/// Traction load on one element edge: ∫_e φ_i · t ds accumulated on the
/// edge's DOFs through their exact Lagrange traces. `extra_degree` raises
/// the quadrature degree above 2k+2 for non-polynomial tractions.
pub fn element_edge_traction(
    ops: &ElementOperators,
    local_edge: usize,
    t: impl Fn(Point2<f64>) -> Vector2<f64>,
    extra_degree: usize,
) -> Result<DVector<f64>, ElementError> {
    let layout = &ops.projectors.layout;
    let k = layout.k;
    let s = layout.n_sites();
    let edge = &ops.geom.edges[local_edge];
    let sites = layout.edge_sites(local_edge);
    let params = layout.edge_node_params();
    let rule = edge_rule(edge.start, edge.end, 2 * k + 2 + extra_degree)?;
    let mut out = DVector::zeros(layout.n_dofs());
    for (&x, &w) in rule.points.iter().zip(&rule.weights) {
        let tq = (x - edge.start).norm() / edge.length;
        let tv = t(x);
        for (m, &site) in sites.iter().enumerate() {
            let lag = lagrange_value(params, m, tq);
            out[site] += w * lag * tv.x;
            out[s + site] += w * lag * tv.y;
        }
    }
    Ok(out)
}
