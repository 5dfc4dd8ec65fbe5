//! Per-element projection matrices: the serendipity projector Π^S built
//! from boundary DOFs alone, the L² displacement projector Π̃⁰, and the L²
//! strain projector Π onto the Voigt space of order ℓ.
//!
//! Everything here is pure per-element computation; elements can be
//! processed concurrently.

use crate::mesh::ElementGeometry;
use crate::polyspace::{scalar_space_dim, MatrixMonomialBasis, VectorMonomialBasis};
use crate::quadrature::{edge_rule, lobatto_edge_nodes, sbc_polygon_rule, QuadratureError};
use nalgebra::{DMatrix, DVector, Matrix2x3, Point2};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProjectorError {
    #[error(
        "element with {n_e} edges on {eta} distinct lines does not support order k={k} \
         (boundary DOFs suffice only for k < {eta})"
    )]
    UnsupportedElement { n_e: usize, eta: usize, k: usize },
    #[error("DOF matrix is rank deficient: rank {rank} < {expected}")]
    RankDeficient { rank: usize, expected: usize },
    #[error("{matrix} matrix is ill-conditioned (1-norm estimate {estimate:.3e})")]
    IllConditioned { matrix: &'static str, estimate: f64 },
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// Condition threshold beyond which projector systems are rejected.
pub const CONDITION_LIMIT: f64 = 1e14;

/// Boundary DOF layout of one element: S = k·N_E scalar sites (the vertices
/// followed by k−1 interior Gauss–Lobatto nodes per edge), each carrying an
/// x- and a y-component DOF. DOF j < S is the x-component at site j; DOF
/// S + j is the y-component.
#[derive(Debug, Clone)]
pub struct DofLayout {
    pub k: usize,
    pub n_e: usize,
    /// Scalar DOF site positions: vertices first, then edge nodes in edge
    /// order, each edge's interior nodes ordered along the edge direction.
    pub sites: Vec<Point2<f64>>,
    /// Interior Lobatto parameters shared by all edges.
    edge_params: Vec<f64>,
}

impl DofLayout {
    /// Scalar site count S = k·N_E.
    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    /// Total DOF count 2S.
    pub fn n_dofs(&self) -> usize {
        2 * self.sites.len()
    }

    /// Site indices of the k+1 nodes on edge `e`, ordered from the edge's
    /// start vertex to its end vertex.
    pub fn edge_sites(&self, e: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.k + 1);
        out.push(e);
        for m in 0..self.k - 1 {
            out.push(self.n_e + e * (self.k - 1) + m);
        }
        out.push((e + 1) % self.n_e);
        out
    }

    /// Arclength parameters (in [0,1]) of the k+1 nodes on any edge.
    pub fn edge_node_params(&self) -> &[f64] {
        &self.edge_params
    }

    /// DOF vector of a displacement field evaluated at the sites.
    pub fn interpolate(&self, u: impl Fn(Point2<f64>) -> (f64, f64)) -> DVector<f64> {
        let s = self.n_sites();
        let mut d = DVector::zeros(2 * s);
        for (j, &x) in self.sites.iter().enumerate() {
            let (ux, uy) = u(x);
            d[j] = ux;
            d[s + j] = uy;
        }
        d
    }
}

/// Minimum number of distinct straight lines covering the element boundary,
/// computed by grouping edges with equal canonicalized line coefficients in
/// scaled coordinates (tolerance 1e-10).
pub fn eta_e(geom: &ElementGeometry) -> usize {
    let tol = 1e-10;
    let mut groups: Vec<[f64; 3]> = Vec::new();
    for edge in &geom.edges {
        let d = (edge.end - edge.start) / edge.length;
        let mut a = d.y;
        let mut b = -d.x;
        let mut c = (a * (edge.start.x - geom.centroid.x)
            + b * (edge.start.y - geom.centroid.y))
            / geom.diameter;
        if a < -tol || (a.abs() <= tol && b < 0.0) {
            a = -a;
            b = -b;
            c = -c;
        }
        let found = groups
            .iter()
            .any(|g| (g[0] - a).abs() <= tol && (g[1] - b).abs() <= tol && (g[2] - c).abs() <= tol);
        if !found {
            groups.push([a, b, c]);
        }
    }
    groups.len()
}

/// Builds the boundary DOF layout for order k, requiring k < η_E.
pub fn build_dof_layout(geom: &ElementGeometry, k: usize) -> Result<DofLayout, ProjectorError> {
    assert!((1..=3).contains(&k), "supported orders are k in 1..=3");
    let eta = eta_e(geom);
    if k >= eta {
        return Err(ProjectorError::UnsupportedElement {
            n_e: geom.vertices.len(),
            eta,
            k,
        });
    }
    let params = lobatto_edge_nodes(k);
    let interior = &params[1..k];
    let mut sites = geom.vertices.clone();
    for edge in &geom.edges {
        for &t in interior {
            sites.push(edge.start + (edge.end - edge.start) * t);
        }
    }
    Ok(DofLayout {
        k,
        n_e: geom.vertices.len(),
        sites,
        edge_params: params,
    })
}

/// The 2S×N_k DOF matrix D with D_{jα} = δ_j(m_α): the DOF-j component of
/// basis member m_α at DOF j's site.
pub fn dof_matrix_d(layout: &DofLayout, basis: &VectorMonomialBasis) -> DMatrix<f64> {
    let s = layout.n_sites();
    let nk = basis.size();
    let mut d = DMatrix::zeros(2 * s, nk);
    for (j, &x) in layout.sites.iter().enumerate() {
        let m = basis.eval(x);
        for alpha in 0..nk {
            d[(j, alpha)] = m[(0, alpha)];
            d[(s + j, alpha)] = m[(1, alpha)];
        }
    }
    d
}

/// Hager-style 1-norm condition estimate of a square matrix given a solver
/// for Ax = b (A is symmetric here, so no transpose solve is needed).
fn condition_estimate_1norm(a: &DMatrix<f64>, solve: impl Fn(&DVector<f64>) -> DVector<f64>) -> f64 {
    let n = a.ncols();
    let norm_a = (0..n)
        .map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0f64, f64::max);
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut est = 0.0;
    for _ in 0..5 {
        let y = solve(&x);
        est = y.iter().map(|v| v.abs()).sum::<f64>();
        let xi = y.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
        let z = solve(&xi);
        let (mut jmax, mut zmax) = (0, 0.0);
        for (j, &v) in z.iter().enumerate() {
            if v.abs() > zmax {
                zmax = v.abs();
                jmax = j;
            }
        }
        if zmax <= z.dot(&x) {
            break;
        }
        x = DVector::zeros(n);
        x[jmax] = 1.0;
    }
    norm_a * est
}

/// Result of the serendipity solve: Π^S together with Ĝ = DᵀD and its
/// condition estimate.
#[derive(Debug)]
pub struct SerendipityProjector {
    pub pi_s: DMatrix<f64>,
    pub g_hat: DMatrix<f64>,
    pub cond_g_hat: f64,
}

/// Solves Ĝ Π^S = B̂ with Ĝ = DᵀD and B̂ = Dᵀ (the double sum
/// B̂_{αi} = Σ_j δ_j(φ_i) δ_j(m_α) collapses to Dᵀ because δ_j(φ_i) = δ_ij).
pub fn serendipity_projector(
    layout: &DofLayout,
    basis: &VectorMonomialBasis,
) -> Result<SerendipityProjector, ProjectorError> {
    let d = dof_matrix_d(layout, basis);
    let nk = basis.size();
    let rank = d.clone().svd(false, false).rank(1e-12 * d.norm());
    if rank < nk {
        return Err(ProjectorError::RankDeficient { rank, expected: nk });
    }
    let g_hat = d.transpose() * &d;
    let qr = g_hat.clone().col_piv_qr();
    let pi_s = qr
        .solve(&d.transpose())
        .expect("full-rank Gram matrix solve");
    let cond = condition_estimate_1norm(&g_hat, |b| {
        qr.solve(b).expect("full-rank Gram matrix solve")
    });
    if cond > CONDITION_LIMIT {
        return Err(ProjectorError::IllConditioned {
            matrix: "serendipity Gram",
            estimate: cond,
        });
    }
    Ok(SerendipityProjector {
        pi_s,
        g_hat,
        cond_g_hat: cond,
    })
}

/// Result of the L² displacement solve: Π̃⁰ with G̃ and its condition
/// estimate. For boundary-only DOF layouts Π̃⁰ coincides with Π^S; this is
/// asserted after the solve rather than assumed.
#[derive(Debug)]
pub struct L2DisplacementProjector {
    pub pi0_tilde: DMatrix<f64>,
    pub g_tilde: DMatrix<f64>,
    pub cond_g_tilde: f64,
}

pub fn l2_displacement_projector(
    geom: &ElementGeometry,
    basis: &VectorMonomialBasis,
    pi_s: &DMatrix<f64>,
) -> Result<L2DisplacementProjector, ProjectorError> {
    let nk = basis.size();
    let rule = sbc_polygon_rule(geom, geom.vertices[0], 2 * basis.k)?;
    let mut g_tilde = DMatrix::zeros(nk, nk);
    let mut b_tilde = DMatrix::zeros(nk, pi_s.ncols());
    for (&x, &w) in rule.points.iter().zip(&rule.weights) {
        let np = basis.eval(x);
        let npt = np.transpose();
        g_tilde += &npt * &np * w;
        // The test-space slot of v_h is replaced by its serendipity
        // polynomial Ñ^p Π^S.
        b_tilde += npt * (&np * pi_s) * w;
    }
    let qr = g_tilde.clone().col_piv_qr();
    let pi0_tilde = qr.solve(&b_tilde).expect("displacement Gram solve");
    let cond = condition_estimate_1norm(&g_tilde, |b| qr.solve(b).expect("Gram solve"));
    if cond > CONDITION_LIMIT {
        return Err(ProjectorError::IllConditioned {
            matrix: "displacement Gram",
            estimate: cond,
        });
    }
    let scale = pi_s.amax().max(1.0);
    let dev = (&pi0_tilde - pi_s).amax();
    assert!(
        dev <= 1e-9 * scale,
        "L² displacement projector deviates from the serendipity projector by {dev:.3e}"
    );
    Ok(L2DisplacementProjector {
        pi0_tilde,
        g_tilde,
        cond_g_tilde: cond,
    })
}

/// Result of the strain solve: Π with G and its condition estimate.
#[derive(Debug)]
pub struct L2StrainProjector {
    pub pi: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub cond_g: f64,
}

/// Builds the L² strain projector of order ℓ from the boundary term
/// Σ_e ∫_e (N^{∂E} N^p)ᵀ N^v ds and the volume term ∫ (∂N^p)ᵀ (Ñ^p Π^S):
/// Π = G⁻¹B. Edge traces of the canonical basis functions are the exact
/// degree-k Lagrange polynomials on the edge's Lobatto nodes.
pub fn l2_strain_projector(
    geom: &ElementGeometry,
    layout: &DofLayout,
    vec_basis: &VectorMonomialBasis,
    mat_basis: &MatrixMonomialBasis,
    pi_s: &DMatrix<f64>,
) -> Result<L2StrainProjector, ProjectorError> {
    let k = layout.k;
    let l = mat_basis.l;
    let p3 = mat_basis.size();
    let n_dofs = layout.n_dofs();
    let s = layout.n_sites();

    // G = ∫ (N^p)ᵀ N^p expands as kron(moment matrix, I₃) because
    // N^p(x) = kron(monomial row, I₃).
    let p = scalar_space_dim(l);
    let rule = sbc_polygon_rule(geom, geom.vertices[0], 2 * l)?;
    let mut moments = DMatrix::zeros(p, p);
    for (&x, &w) in rule.points.iter().zip(&rule.weights) {
        let (xi, eta) = mat_basis.scaled(x);
        let mono = DVector::from_vec(crate::polyspace::scalar_monomials(l, xi, eta));
        moments.syger(w, &mono, &mono, 1.0);
    }
    let mut g = DMatrix::zeros(p3, p3);
    for i in 0..p {
        for j in 0..p {
            let m = moments[(i.max(j), i.min(j))];
            for t in 0..3 {
                g[(3 * i + t, 3 * j + t)] = m;
            }
        }
    }

    // Boundary term of B.
    let mut b = DMatrix::zeros(p3, n_dofs);
    let params = layout.edge_node_params();
    for (e, edge) in geom.edges.iter().enumerate() {
        let nd = Matrix2x3::new(
            edge.normal.x,
            0.0,
            edge.normal.y,
            0.0,
            edge.normal.y,
            edge.normal.x,
        );
        let sites = layout.edge_sites(e);
        let erule = edge_rule(edge.start, edge.end, l + k)?;
        for (&x, &w) in erule.points.iter().zip(&erule.weights) {
            // Arclength parameter of the quadrature point along the edge.
            let t = (x - edge.start).norm() / edge.length;
            let np = mat_basis.eval(x);
            let prod = nd * np; // 2×3p
            for (m, &site) in sites.iter().enumerate() {
                let lag = lagrange_value(params, m, t);
                if lag == 0.0 {
                    continue;
                }
                for row in 0..p3 {
                    b[(row, site)] += w * lag * prod[(0, row)];
                    b[(row, s + site)] += w * lag * prod[(1, row)];
                }
            }
        }
    }

    // Volume term: ∫ (∂N^p)ᵀ Ñ^p dx applied to Π^S.
    let vol_degree = (l.max(1) - 1) + k;
    let vrule = sbc_polygon_rule(geom, geom.vertices[0], vol_degree)?;
    let mut v = DMatrix::zeros(p3, vec_basis.size());
    for (&x, &w) in vrule.points.iter().zip(&vrule.weights) {
        let div = mat_basis.divergence(x);
        let nv = vec_basis.eval(x);
        v += div.transpose() * nv * w;
    }
    b -= &v * pi_s;

    let qr = g.clone().col_piv_qr();
    let pi = qr.solve(&b).expect("strain Gram solve");
    let cond = condition_estimate_1norm(&g, |rhs| qr.solve(rhs).expect("Gram solve"));
    if cond > CONDITION_LIMIT {
        return Err(ProjectorError::IllConditioned {
            matrix: "strain Gram",
            estimate: cond,
        });
    }
    Ok(L2StrainProjector { pi, g, cond_g: cond })
}

/// Lagrange basis value L_m(t) on the given interpolation nodes.
pub fn lagrange_value(nodes: &[f64], m: usize, t: f64) -> f64 {
    let mut v = 1.0;
    for (j, &tj) in nodes.iter().enumerate() {
        if j != m {
            v *= (t - tj) / (nodes[m] - tj);
        }
    }
    v
}

/// Condition estimates of the three Gram matrices.
#[derive(Debug, Clone, Copy)]
pub struct Conditioning {
    pub g_hat: f64,
    pub g_tilde: f64,
    pub g: f64,
}

/// The three projector matrices of one element plus diagnostics.
#[derive(Debug)]
pub struct ProjectorSet {
    pub layout: DofLayout,
    pub pi_s: DMatrix<f64>,
    pub pi0_tilde: DMatrix<f64>,
    pub pi: DMatrix<f64>,
    pub ell: usize,
    pub conditioning: Conditioning,
}

/// Builds all three projectors for one element at the given strain order ℓ.
pub fn build_projectors(
    geom: &ElementGeometry,
    k: usize,
    ell: usize,
) -> Result<ProjectorSet, ProjectorError> {
    let layout = build_dof_layout(geom, k)?;
    let vec_basis = VectorMonomialBasis::new(k, geom.centroid, geom.diameter);
    let mat_basis = MatrixMonomialBasis::new(ell, geom.centroid, geom.diameter);
    let seren = serendipity_projector(&layout, &vec_basis)?;
    let disp = l2_displacement_projector(geom, &vec_basis, &seren.pi_s)?;
    let strain = l2_strain_projector(geom, &layout, &vec_basis, &mat_basis, &seren.pi_s)?;
    Ok(ProjectorSet {
        layout,
        pi_s: seren.pi_s,
        pi0_tilde: disp.pi0_tilde,
        pi: strain.pi,
        ell,
        conditioning: Conditioning {
            g_hat: seren.cond_g_hat,
            g_tilde: disp.cond_g_tilde,
            g: strain.cond_g,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{element_geometry, element_geometry_of_ring, generate_mesh};
    use crate::mesh::{InsertedNodesParams, MeshParams, NgonParams, VoronoiParams};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_square_geom() -> ElementGeometry {
        element_geometry_of_ring(&[
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ])
    }

    fn ngon_geom(n: usize) -> ElementGeometry {
        let mesh = generate_mesh(&MeshParams::RegularNgon(NgonParams::unit(n)), 0).unwrap();
        element_geometry(&mesh, 0)
    }

    #[test]
    fn eta_of_basic_shapes() {
        assert_eq!(eta_e(&unit_square_geom()), 4);
        assert_eq!(eta_e(&ngon_geom(3)), 3);
        assert_eq!(eta_e(&ngon_geom(8)), 8);
    }

    #[test]
    fn eta_ignores_collinear_subdivision() {
        // The central cell of the node-inserted grid keeps η = 4 no matter
        // how many collinear vertices its sides carry.
        for extra in [1usize, 5, 8] {
            let mesh = generate_mesh(
                &MeshParams::GridWithInsertedNodes(InsertedNodesParams { extra_nodes: extra }),
                0,
            )
            .unwrap();
            let g = element_geometry(&mesh, 4);
            assert_eq!(g.vertices.len(), 4 + extra);
            assert_eq!(eta_e(&g), 4, "extra={extra}");
        }
    }

    #[test]
    fn dof_counts() {
        let layout = build_dof_layout(&unit_square_geom(), 2).unwrap();
        assert_eq!(layout.n_dofs(), 16);
        let layout = build_dof_layout(&ngon_geom(6), 3).unwrap();
        assert_eq!(layout.n_dofs(), 36);
    }

    #[test]
    fn triangle_k3_unsupported() {
        let err = build_dof_layout(&ngon_geom(3), 3).unwrap_err();
        assert!(matches!(
            err,
            ProjectorError::UnsupportedElement { eta: 3, k: 3, .. }
        ));
    }

    #[test]
    fn edge_sites_wrap_around() {
        let layout = build_dof_layout(&unit_square_geom(), 3).unwrap();
        assert_eq!(layout.edge_sites(3), vec![3, 4 + 3 * 2, 4 + 3 * 2 + 1, 0]);
    }

    #[test]
    fn d_matrix_constant_columns_are_indicators() {
        let geom = unit_square_geom();
        let layout = build_dof_layout(&geom, 2).unwrap();
        let basis = VectorMonomialBasis::new(2, geom.centroid, geom.diameter);
        let d = dof_matrix_d(&layout, &basis);
        let s = layout.n_sites();
        for j in 0..s {
            assert_eq!(d[(j, 0)], 1.0);
            assert_eq!(d[(s + j, 0)], 0.0);
            assert_eq!(d[(j, 1)], 0.0);
            assert_eq!(d[(s + j, 1)], 1.0);
        }
        assert_eq!(d.nrows(), 16);
        assert_eq!(d.ncols(), 12);
        assert_eq!(d.svd(false, false).rank(1e-10), 12);
    }

    #[test]
    fn serendipity_reproduces_basis() {
        // Π^S·D = I on a Voronoi polygon.
        let mesh = generate_mesh(&MeshParams::VoronoiLloyd(VoronoiParams::unit(9, 2)), 3).unwrap();
        for cell in 0..mesh.n_cells() {
            let geom = element_geometry(&mesh, cell);
            for k in [1usize, 2] {
                let layout = build_dof_layout(&geom, k).unwrap();
                let basis = VectorMonomialBasis::new(k, geom.centroid, geom.diameter);
                let seren = serendipity_projector(&layout, &basis).unwrap();
                let d = dof_matrix_d(&layout, &basis);
                let prod = &seren.pi_s * d;
                let eye = DMatrix::identity(basis.size(), basis.size());
                assert!((prod - eye).amax() < 1e-10, "cell {cell} k {k}");
            }
        }
    }

    #[test]
    fn serendipity_rotation_column() {
        let geom = ngon_geom(5);
        let layout = build_dof_layout(&geom, 2).unwrap();
        let basis = VectorMonomialBasis::new(2, geom.centroid, geom.diameter);
        let seren = serendipity_projector(&layout, &basis).unwrap();
        let (c, h) = (geom.centroid, geom.diameter);
        let dofs = layout.interpolate(|x| (-(x.y - c.y) / h, (x.x - c.x) / h));
        let coeffs = &seren.pi_s * dofs;
        for alpha in 0..basis.size() {
            let expect = if alpha == 2 { 1.0 } else { 0.0 };
            assert_relative_eq!(coeffs[alpha], expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn serendipity_exact_quadratic_coefficients() {
        // p(x) = (x², 0) on the unit square: expand in scaled monomials
        // about (x_E, h_E) = ((.5,.5), √2): x² = (x_E + h ξ)² =
        // x_E² + 2 x_E h ξ + h² ξ².
        let geom = unit_square_geom();
        let layout = build_dof_layout(&geom, 2).unwrap();
        let basis = VectorMonomialBasis::new(2, geom.centroid, geom.diameter);
        let seren = serendipity_projector(&layout, &basis).unwrap();
        let dofs = layout.interpolate(|x| (x.x * x.x, 0.0));
        let coeffs = &seren.pi_s * dofs;
        let (xe, h) = (0.5, geom.diameter);
        let mut expect = DVector::zeros(12);
        expect[0] = xe * xe; // (1, 0)
        expect[4] = 2.0 * xe * h; // (ξ, 0)
        expect[6] = h * h; // (ξ², 0)
        assert!((coeffs - expect).amax() < 1e-12);
    }

    #[test]
    fn displacement_projector_equals_serendipity() {
        let mesh =
            generate_mesh(&MeshParams::VoronoiLloyd(VoronoiParams::unit(6, 3)), 11).unwrap();
        for cell in 0..mesh.n_cells() {
            let geom = element_geometry(&mesh, cell);
            for k in [1usize, 2] {
                let layout = build_dof_layout(&geom, k).unwrap();
                let basis = VectorMonomialBasis::new(k, geom.centroid, geom.diameter);
                let seren = serendipity_projector(&layout, &basis).unwrap();
                let disp = l2_displacement_projector(&geom, &basis, &seren.pi_s).unwrap();
                assert!((&disp.pi0_tilde - &seren.pi_s).amax() < 1e-12);
            }
        }
    }

    #[test]
    fn displacement_gram_constant_entry_is_area() {
        let geom = unit_square_geom();
        let layout = build_dof_layout(&geom, 1).unwrap();
        let basis = VectorMonomialBasis::new(1, geom.centroid, geom.diameter);
        let seren = serendipity_projector(&layout, &basis).unwrap();
        let disp = l2_displacement_projector(&geom, &basis, &seren.pi_s).unwrap();
        assert_relative_eq!(disp.g_tilde[(0, 0)], 1.0, epsilon = 1e-13);
    }

    #[test]
    fn strain_projector_translation_and_uniaxial() {
        let geom = ngon_geom(6);
        let k = 2;
        let ell = 3;
        let set = build_projectors(&geom, k, ell).unwrap();
        // Rigid translation: zero strain coefficients.
        let d_trans = set.layout.interpolate(|_| (1.0, 0.0));
        assert!((&set.pi * d_trans).amax() < 1e-10 * set.pi.amax().max(1.0));
        // p = (x, 0): Voigt strain (1, 0, 0) — the constant-block
        // coefficients, everything else zero.
        let d_uni = set.layout.interpolate(|x| (x.x, 0.0));
        let coeffs = &set.pi * d_uni;
        assert_relative_eq!(coeffs[0], 1.0, epsilon = 1e-10);
        for i in 1..coeffs.len() {
            assert!(coeffs[i].abs() < 1e-10, "coefficient {i}");
        }
    }

    #[test]
    fn strain_consistency_on_random_polynomials() {
        // Π applied to DOFs of p ∈ [P_k]² reproduces ε̄(p) pointwise.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mesh =
            generate_mesh(&MeshParams::VoronoiLloyd(VoronoiParams::unit(5, 3)), 29).unwrap();
        for cell in 0..mesh.n_cells() {
            let geom = element_geometry(&mesh, cell);
            let eta = eta_e(&geom);
            for k in 1..=3usize {
                if k >= eta {
                    continue;
                }
                let ell = k.max(2); // any ℓ ≥ k−1 works for consistency
                let set = build_projectors(&geom, k, ell).unwrap();
                let basis = VectorMonomialBasis::new(k, geom.centroid, geom.diameter);
                let mat_basis = MatrixMonomialBasis::new(ell, geom.centroid, geom.diameter);
                let p_coeffs =
                    DVector::from_fn(basis.size(), |_, _| rng.gen_range(-1.0..1.0));
                let dofs = set.layout.interpolate(|x| {
                    let v = basis.eval(x) * &p_coeffs;
                    (v[0], v[1])
                });
                let strain_coeffs = &set.pi * dofs;
                for _ in 0..5 {
                    let x = geom.centroid
                        + nalgebra::Vector2::new(
                            rng.gen_range(-0.3..0.3) * geom.diameter,
                            rng.gen_range(-0.3..0.3) * geom.diameter,
                        );
                    let projected = mat_basis.eval(x) * &strain_coeffs;
                    let exact = basis.strain(x) * &p_coeffs;
                    assert!(
                        (projected - exact).amax() < 1e-9,
                        "cell {cell} k {k}"
                    );
                }
            }
        }
    }

    #[test]
    fn strain_projector_annihilates_rigid_modes() {
        let geom = ngon_geom(7);
        let set = build_projectors(&geom, 2, 4).unwrap();
        let (c, h) = (geom.centroid, geom.diameter);
        let modes: [Box<dyn Fn(Point2<f64>) -> (f64, f64)>; 3] = [
            Box::new(|_| (1.0, 0.0)),
            Box::new(|_| (0.0, 1.0)),
            Box::new(move |x| (-(x.y - c.y) / h, (x.x - c.x) / h)),
        ];
        let scale = set.pi.amax();
        for mode in modes {
            let dofs = set.layout.interpolate(mode);
            assert!((&set.pi * dofs).amax() < 1e-10 * scale.max(1.0));
        }
    }

    #[test]
    fn gram_matrices_symmetric_positive() {
        let geom = ngon_geom(5);
        let layout = build_dof_layout(&geom, 2).unwrap();
        let basis = VectorMonomialBasis::new(2, geom.centroid, geom.diameter);
        let seren = serendipity_projector(&layout, &basis).unwrap();
        let disp = l2_displacement_projector(&geom, &basis, &seren.pi_s).unwrap();
        for (name, m) in [("g_hat", &seren.g_hat), ("g_tilde", &disp.g_tilde)] {
            let asym = (m - m.transpose()).amax();
            assert!(asym <= 1e-13 * m.amax(), "{name} asymmetry {asym}");
            assert!(
                m.clone().cholesky().is_some(),
                "{name} not positive definite"
            );
        }
    }

    #[test]
    fn full_bhat_double_sum_collapses_to_d_transpose() {
        // Oracle for the B̂ = Dᵀ simplification: build the double sum
        // B̂_{αi} = Σ_j δ_j(φ_i) δ_j(m_α) with δ_j(φ_i) = δ_ij explicitly.
        let geom = ngon_geom(6);
        let layout = build_dof_layout(&geom, 3).unwrap();
        let basis = VectorMonomialBasis::new(3, geom.centroid, geom.diameter);
        let d = dof_matrix_d(&layout, &basis);
        let n = layout.n_dofs();
        let mut b_hat = DMatrix::zeros(basis.size(), n);
        for alpha in 0..basis.size() {
            for i in 0..n {
                let mut sum = 0.0;
                for j in 0..n {
                    let delta_phi = if i == j { 1.0 } else { 0.0 };
                    sum += delta_phi * d[(j, alpha)];
                }
                b_hat[(alpha, i)] = sum;
            }
        }
        assert_eq!(b_hat, d.transpose());
    }

    #[test]
    fn conditioning_estimates_are_finite_and_modest() {
        let geom = ngon_geom(9);
        let set = build_projectors(&geom, 2, 4).unwrap();
        for c in [
            set.conditioning.g_hat,
            set.conditioning.g_tilde,
            set.conditioning.g,
        ] {
            assert!(c.is_finite() && c >= 1.0 && c < CONDITION_LIMIT);
        }
    }
}
