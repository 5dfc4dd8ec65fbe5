//! Scaled monomial polynomial spaces on one element, Voigt-notation strain
//! machinery, and plane-stress/plane-strain material matrices.
//!
//! All polynomials are expressed in the scaled coordinates
//! ξ = (x − x_E)/h_E, η = (y − y_E)/h_E so that projector systems stay
//! well-conditioned independent of element size. Derivatives come from
//! closed-form monomial rules, never from finite differences.

use nalgebra::{DMatrix, Matrix3, Point2};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PolyspaceError {
    #[error("material is singular or out of range: {0}")]
    SingularMaterial(String),
}

/// Number of scalar monomials of total degree ≤ l.
pub fn scalar_space_dim(l: usize) -> usize {
    (l + 1) * (l + 2) / 2
}

/// Flat index of the scalar monomial ξ^(d−j) η^j; monomials are ordered by
/// total degree, then by descending ξ power.
pub fn scalar_monomial_index(d: usize, j: usize) -> usize {
    d * (d + 1) / 2 + j
}

/// Exponents (a, b) of scalar monomial `idx`, inverse of
/// [`scalar_monomial_index`].
pub fn scalar_monomial_exponents(idx: usize) -> (usize, usize) {
    let mut d = 0;
    while (d + 1) * (d + 2) / 2 <= idx {
        d += 1;
    }
    let j = idx - d * (d + 1) / 2;
    (d - j, j)
}

/// Values of all scalar monomials of degree ≤ l at scaled point (ξ, η).
pub fn scalar_monomials(l: usize, xi: f64, eta: f64) -> Vec<f64> {
    let mut vals = Vec::with_capacity(scalar_space_dim(l));
    for d in 0..=l {
        for j in 0..=d {
            vals.push(xi.powi((d - j) as i32) * eta.powi(j as i32));
        }
    }
    vals
}

/// Values and scaled-coordinate derivatives (∂ξ, ∂η) of all scalar
/// monomials of degree ≤ l.
pub fn scalar_monomials_with_derivatives(
    l: usize,
    xi: f64,
    eta: f64,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let dim = scalar_space_dim(l);
    let mut vals = Vec::with_capacity(dim);
    let mut dxi = Vec::with_capacity(dim);
    let mut deta = Vec::with_capacity(dim);
    for d in 0..=l {
        for j in 0..=d {
            let (a, b) = ((d - j) as i32, j as i32);
            vals.push(xi.powi(a) * eta.powi(b));
            dxi.push(if a == 0 {
                0.0
            } else {
                a as f64 * xi.powi(a - 1) * eta.powi(b)
            });
            deta.push(if b == 0 {
                0.0
            } else {
                b as f64 * xi.powi(a) * eta.powi(b - 1)
            });
        }
    }
    (vals, dxi, deta)
}

/// The scaled monomial vector basis of order k on one element, with
/// N_k = (k+1)(k+2) members:
///
/// (1,0), (0,1), (−η,ξ), (η,ξ), (ξ,0), (0,η), then for each degree
/// d = 2..k and each scalar monomial μ of degree d (descending ξ power)
/// the pair (μ,0), (0,μ). The first 2·dim P_d entries always span [P_d]².
#[derive(Debug, Clone)]
pub struct VectorMonomialBasis {
    pub k: usize,
    pub center: Point2<f64>,
    pub h: f64,
}

impl VectorMonomialBasis {
    pub fn new(k: usize, center: Point2<f64>, h: f64) -> Self {
        assert!(h > 0.0, "element diameter must be positive");
        Self { k, center, h }
    }

    /// N_k = (k+1)(k+2).
    pub fn size(&self) -> usize {
        (self.k + 1) * (self.k + 2)
    }

    pub fn scaled(&self, x: Point2<f64>) -> (f64, f64) {
        ((x.x - self.center.x) / self.h, (x.y - self.center.y) / self.h)
    }

    /// The 2×N_k matrix Ñ^p(x) whose column α is m_α(x).
    pub fn eval(&self, x: Point2<f64>) -> DMatrix<f64> {
        let (xi, eta) = self.scaled(x);
        let mono = scalar_monomials(self.k, xi, eta);
        let mut m = DMatrix::zeros(2, self.size());
        m[(0, 0)] = 1.0;
        m[(1, 1)] = 1.0;
        m[(0, 2)] = -eta;
        m[(1, 2)] = xi;
        m[(0, 3)] = eta;
        m[(1, 3)] = xi;
        m[(0, 4)] = xi;
        m[(1, 5)] = eta;
        let mut col = 6;
        for d in 2..=self.k {
            for j in 0..=d {
                let v = mono[scalar_monomial_index(d, j)];
                m[(0, col)] = v;
                m[(1, col + 1)] = v;
                col += 2;
            }
        }
        m
    }

    /// The 3×N_k matrix of Voigt strains: column α is
    /// (∂x m_α,1, ∂y m_α,2, ∂y m_α,1 + ∂x m_α,2) at x. The two translations
    /// and the rotation (−η, ξ) map to zero columns.
    pub fn strain(&self, x: Point2<f64>) -> DMatrix<f64> {
        let (xi, eta) = self.scaled(x);
        let (_, dxi, deta) = scalar_monomials_with_derivatives(self.k, xi, eta);
        let ih = 1.0 / self.h;
        let mut m = DMatrix::zeros(3, self.size());
        // Columns 0,1 (translations) and 2 (rotation) are zero.
        // (η, ξ): strain (0, 0, ∂y η + ∂x ξ) = (0, 0, 2/h).
        m[(2, 3)] = 2.0 * ih;
        // (ξ, 0): (1/h, 0, 0); (0, η): (0, 1/h, 0).
        m[(0, 4)] = ih;
        m[(1, 5)] = ih;
        let mut col = 6;
        for d in 2..=self.k {
            for j in 0..=d {
                let idx = scalar_monomial_index(d, j);
                // (μ, 0): (∂x μ, 0, ∂y μ)
                m[(0, col)] = dxi[idx] * ih;
                m[(2, col)] = deta[idx] * ih;
                // (0, μ): (0, ∂y μ, ∂x μ)
                m[(1, col + 1)] = deta[idx] * ih;
                m[(2, col + 1)] = dxi[idx] * ih;
                col += 2;
            }
        }
        m
    }
}

/// The Voigt matrix basis of order ℓ: for each scalar monomial μ (degree
/// order) three columns μ·e₁, μ·e₂, μ·e₃ in Voigt slots (11, 22, 12).
/// Column count is 3·dim P_ℓ.
#[derive(Debug, Clone)]
pub struct MatrixMonomialBasis {
    pub l: usize,
    pub center: Point2<f64>,
    pub h: f64,
}

impl MatrixMonomialBasis {
    pub fn new(l: usize, center: Point2<f64>, h: f64) -> Self {
        assert!(h > 0.0, "element diameter must be positive");
        Self { l, center, h }
    }

    pub fn size(&self) -> usize {
        3 * scalar_space_dim(self.l)
    }

    pub fn scaled(&self, x: Point2<f64>) -> (f64, f64) {
        ((x.x - self.center.x) / self.h, (x.y - self.center.y) / self.h)
    }

    /// The 3×(3·dim P_ℓ) matrix N^p(x): block j equals μ_j(x)·I₃.
    pub fn eval(&self, x: Point2<f64>) -> DMatrix<f64> {
        let (xi, eta) = self.scaled(x);
        let mono = scalar_monomials(self.l, xi, eta);
        let mut m = DMatrix::zeros(3, self.size());
        for (j, &v) in mono.iter().enumerate() {
            for s in 0..3 {
                m[(s, 3 * j + s)] = v;
            }
        }
        m
    }

    /// The 2×(3·dim P_ℓ) divergence matrix ∂N^p(x), applying the operator
    /// [[∂x, 0, ∂y], [0, ∂y, ∂x]] to each Voigt column.
    pub fn divergence(&self, x: Point2<f64>) -> DMatrix<f64> {
        let (xi, eta) = self.scaled(x);
        let (_, dxi, deta) = scalar_monomials_with_derivatives(self.l, xi, eta);
        let ih = 1.0 / self.h;
        let mut m = DMatrix::zeros(2, self.size());
        for j in 0..scalar_space_dim(self.l) {
            let (dx, dy) = (dxi[j] * ih, deta[j] * ih);
            m[(0, 3 * j)] = dx;
            m[(1, 3 * j + 1)] = dy;
            m[(0, 3 * j + 2)] = dy;
            m[(1, 3 * j + 2)] = dx;
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaterialMode {
    PlaneStress,
    PlaneStrain,
}

/// Voigt material matrix C with its defining constants.
#[derive(Debug, Clone)]
pub struct MaterialMatrix {
    pub c: Matrix3<f64>,
    pub mode: MaterialMode,
    pub e_y: f64,
    pub nu: f64,
}

/// Builds the 3×3 Voigt material matrix for an isotropic material.
pub fn material_matrix(
    e_y: f64,
    nu: f64,
    mode: MaterialMode,
) -> Result<MaterialMatrix, PolyspaceError> {
    if e_y <= 0.0 {
        return Err(PolyspaceError::SingularMaterial(format!(
            "Young's modulus must be positive, got {e_y}"
        )));
    }
    let admissible = match mode {
        MaterialMode::PlaneStress => nu > -1.0 && nu < 0.5,
        MaterialMode::PlaneStrain => nu > -1.0 && nu < 0.5,
    };
    if !admissible {
        return Err(PolyspaceError::SingularMaterial(format!(
            "Poisson ratio {nu} out of range for {mode:?}"
        )));
    }
    let c = match mode {
        MaterialMode::PlaneStress => {
            let f = e_y / (1.0 - nu * nu);
            Matrix3::new(
                f,
                f * nu,
                0.0,
                f * nu,
                f,
                0.0,
                0.0,
                0.0,
                f * (1.0 - nu) / 2.0,
            )
        }
        MaterialMode::PlaneStrain => {
            let f = e_y / ((1.0 + nu) * (1.0 - 2.0 * nu));
            Matrix3::new(
                f * (1.0 - nu),
                f * nu,
                0.0,
                f * nu,
                f * (1.0 - nu),
                0.0,
                0.0,
                0.0,
                f * (1.0 - 2.0 * nu) / 2.0,
            )
        }
    };
    Ok(MaterialMatrix { c, mode, e_y, nu })
}
