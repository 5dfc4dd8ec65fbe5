//! Randomized structural checks of the element operators over arbitrary
//! star-shaped polygons: projector polynomial reproduction, strain
//! consistency, rigid-body kernels, stiffness symmetry and positive
//! semidefiniteness, DOF-matrix rank, the displacement-projector identity,
//! and global assembly symmetry.

use nalgebra::{DMatrix, DVector, Point2, Vector2};
use proptest::prelude::*;
use std::collections::BTreeMap;
use vemsf::element::{element_operators, EllRule};
use vemsf::mesh::{
    element_geometry_of_ring, generate_mesh, ElementGeometry, MeshParams, VoronoiParams,
};
use vemsf::polyspace::{material_matrix, MaterialMatrix, MaterialMode, VectorMonomialBasis};
use vemsf::projectors::{build_dof_layout, build_projectors, dof_matrix_d};
use vemsf::system::{assemble, build_dof_map, BoundaryCondition, BoundaryValueProblem};

/// Every (k, ℓ) pair the solver and the spectrum sweeps exercise, down to
/// the minimal legal strain order ℓ = k−1.
const KL_PAIRS: [(usize, usize); 9] = [
    (2, 1),
    (2, 2),
    (2, 3),
    (2, 4),
    (2, 5),
    (3, 2),
    (3, 3),
    (3, 4),
    (3, 5),
];

fn material() -> MaterialMatrix {
    material_matrix(200.0, 0.3, MaterialMode::PlaneStrain).unwrap()
}

/// A random simple polygon, star-shaped about its construction center:
/// vertices at jittered angles and radii, then rotated, scaled, and
/// translated. Gap weights are bounded away from zero so no edge collapses.
fn polygon() -> impl Strategy<Value = ElementGeometry> {
    (4usize..=10)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(0.15f64..1.0, n),
                prop::collection::vec(0.5f64..1.5, n),
                0.0..std::f64::consts::TAU,
                0.05f64..4.0,
                -3.0f64..3.0,
                -3.0f64..3.0,
            )
        })
        .prop_map(|(gaps, radii, rot, scale, cx, cy)| {
            let total: f64 = gaps.iter().sum();
            let mut theta = rot;
            let pts: Vec<Point2<f64>> = gaps
                .iter()
                .zip(&radii)
                .map(|(g, r)| {
                    theta += g / total * std::f64::consts::TAU;
                    Point2::new(
                        cx + scale * r * theta.cos(),
                        cy + scale * r * theta.sin(),
                    )
                })
                .collect();
            element_geometry_of_ring(&pts)
        })
}

/// DOF vector of a random [P_k]² field together with its coefficients.
fn random_poly_dofs(
    basis: &VectorMonomialBasis,
    d: &DMatrix<f64>,
    seed: &[f64],
) -> (DVector<f64>, DVector<f64>) {
    let coeffs = DVector::from_fn(basis.size(), |i, _| seed[i % seed.len()] * (1.0 + i as f64));
    (d * &coeffs, coeffs)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Π^S applied to the DOF vector of any p ∈ [P_k]² recovers p's exact
    /// coefficients.
    #[test]
    fn serendipity_reproduces_polynomials(geom in polygon(), seed in prop::collection::vec(-1.0f64..1.0, 8)) {
        for (k, ell) in KL_PAIRS {
            let set = build_projectors(&geom, k, ell).unwrap();
            let basis = VectorMonomialBasis::new(k, geom.centroid, geom.diameter);
            let d = dof_matrix_d(&set.layout, &basis);
            let (dofs, coeffs) = random_poly_dofs(&basis, &d, &seed);
            let got = &set.pi_s * dofs;
            let err = (&got - &coeffs).norm();
            prop_assert!(err <= 1e-9 * coeffs.norm(), "k={k} ell={ell} err={err:.3e}");
        }
    }

    /// Π applied to the DOF vector of p ∈ [P_k]² returns a strain field that
    /// equals ε̄(p) at every DOF site and at the centroid.
    #[test]
    fn strain_projection_consistent_for_polynomials(geom in polygon(), seed in prop::collection::vec(-1.0f64..1.0, 8)) {
        for (k, ell) in KL_PAIRS {
            let set = build_projectors(&geom, k, ell).unwrap();
            let basis = VectorMonomialBasis::new(k, geom.centroid, geom.diameter);
            let mat_basis = vemsf::polyspace::MatrixMonomialBasis::new(ell, geom.centroid, geom.diameter);
            let d = dof_matrix_d(&set.layout, &basis);
            let (dofs, coeffs) = random_poly_dofs(&basis, &d, &seed);
            let proj = &set.pi * dofs;
            let mut sample: Vec<Point2<f64>> = set.layout.sites.clone();
            sample.push(geom.centroid);
            let scale = coeffs.amax().max(1.0);
            for x in sample {
                let got = mat_basis.eval(x) * &proj;
                let want = basis.strain(x) * &coeffs;
                prop_assert!(
                    (got - want).amax() <= 1e-9 * scale,
                    "k={k} ell={ell} at {x:?}"
                );
            }
        }
    }

    /// The two translations and the rotation are annihilated by both the
    /// strain projector and the stiffness matrix.
    #[test]
    fn rigid_modes_in_kernel_of_strain_projector_and_stiffness(geom in polygon()) {
        let (c, h) = (geom.centroid, geom.diameter);
        let mat = material();
        for (k, ell) in KL_PAIRS {
            let ops = element_operators(geom.clone(), k, EllRule::Fixed(ell), &mat).unwrap();
            let modes: [Box<dyn Fn(Point2<f64>) -> (f64, f64)>; 3] = [
                Box::new(|_| (1.0, 0.0)),
                Box::new(|_| (0.0, 1.0)),
                Box::new(move |x| (-(x.y - c.y) / h, (x.x - c.x) / h)),
            ];
            for (m, mode) in modes.into_iter().enumerate() {
                let dofs = ops.projectors.layout.interpolate(mode);
                let strain = (&ops.projectors.pi * &dofs).amax();
                let force = (&ops.stiffness * &dofs).amax();
                prop_assert!(
                    strain <= 1e-10 * ops.projectors.pi.amax() * dofs.norm(),
                    "k={k} ell={ell} mode {m}: |Pi d| = {strain:.3e}"
                );
                prop_assert!(
                    force <= 1e-10 * ops.stiffness.amax() * dofs.norm(),
                    "k={k} ell={ell} mode {m}: |K d| = {force:.3e}"
                );
            }
        }
    }

    /// K_E is symmetric and positive semidefinite for every (k, ℓ) pair.
    #[test]
    fn stiffness_symmetric_positive_semidefinite(geom in polygon()) {
        let mat = material();
        for (k, ell) in KL_PAIRS {
            let ops = element_operators(geom.clone(), k, EllRule::Fixed(ell), &mat).unwrap();
            let ke = &ops.stiffness;
            let asym = (ke - ke.transpose()).amax();
            prop_assert!(asym <= 1e-12 * ke.amax(), "k={k} ell={ell} asym={asym:.3e}");
            let eig = ke.clone().symmetric_eigen().eigenvalues;
            let lmax = eig.amax();
            prop_assert!(eig.min() >= -1e-10 * lmax, "k={k} ell={ell} lmin={:.3e}", eig.min());
        }
    }

    /// The DOF matrix D has full column rank N_k on every supported shape.
    #[test]
    fn dof_matrix_full_rank(geom in polygon()) {
        for k in [1usize, 2, 3] {
            let layout = build_dof_layout(&geom, k).unwrap();
            let basis = VectorMonomialBasis::new(k, geom.centroid, geom.diameter);
            let d = dof_matrix_d(&layout, &basis);
            let sv = d.svd(false, false).singular_values;
            let rank = sv.iter().filter(|&&s| s > 1e-10 * sv.max()).count();
            prop_assert_eq!(rank, basis.size(), "k={} rank deficient", k);
        }
    }

    /// The L² displacement projector coincides with the serendipity
    /// projector entry-wise.
    #[test]
    fn displacement_projector_equals_serendipity(geom in polygon()) {
        for (k, ell) in KL_PAIRS {
            let set = build_projectors(&geom, k, ell).unwrap();
            let diff = (&set.pi0_tilde - &set.pi_s).amax();
            prop_assert!(diff <= 1e-12 * set.pi_s.amax(), "k={k} ell={ell} diff={diff:.3e}");
        }
    }

    /// The assembled global matrix is symmetric on random Voronoi meshes.
    #[test]
    fn assembly_symmetric(n_seeds in 4usize..=12, seed in 0u64..1000, k in 2usize..=3) {
        let mut params = VoronoiParams::unit(n_seeds, 2);
        params.min_cell_vertices = if k >= 3 { 4 } else { 3 };
        let mesh = generate_mesh(&MeshParams::VoronoiLloyd(params), seed).unwrap();
        let mut conditions = BTreeMap::new();
        for g in ["left", "right", "bottom"] {
            conditions.insert(
                g.to_string(),
                BoundaryCondition::Dirichlet(std::sync::Arc::new(|_| Vector2::zeros())),
            );
        }
        conditions.insert(
            "top".to_string(),
            BoundaryCondition::Neumann(std::sync::Arc::new(|x: Point2<f64>| Vector2::new(x.x, -1.0))),
        );
        let bvp = BoundaryValueProblem {
            mesh: &mesh,
            k,
            ell_rule: EllRule::SufficientBound,
            material: material(),
            body_force: None,
            body_force_extra_degree: 0,
            traction_extra_degree: 0,
            conditions,
        };
        let dofmap = build_dof_map(&mesh, k).unwrap();
        let sys = assemble(&bvp, &dofmap).unwrap();
        let dense = DMatrix::from(&sys.matrix);
        let asym = (&dense - dense.transpose()).amax();
        prop_assert!(asym <= 1e-12 * dense.amax(), "asym={asym:.3e}");
    }
}
