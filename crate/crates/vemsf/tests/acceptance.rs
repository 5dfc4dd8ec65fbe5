//! End-to-end acceptance checks, one test per criterion:
//!
//! - A1: scaled-boundary cubature matches a fan-triangulation oracle
//! - A2: displacement patch tests are exact to solver precision
//! - A3: equilibrium patch tests on the bar are exact to solver precision
//! - A4: spurious-mode counts flip exactly at the vertex-count thresholds
//! - A5: perturbing the octagon removes its k=3, ℓ=4 spurious modes
//! - A6: manufactured solutions converge at the optimal rates
//! - A7: the sinusoidal beam converges at the optimal rates on convex and
//!   nonconvex ladders
//! - A8: the plate with a hole loses the optimal energy rate on straight-edge
//!   hole approximations
//! - A9: projector/stiffness invariants hold over random polygon shapes
//!
//! The convergence tests (A6–A8) serialize on a mutex so each one's runtime
//! budget is measured against its own work, not contention for the shared
//! thread pool.

use nalgebra::{DMatrix, DVector, Point2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};
use vemsf::element::{element_operators, EllRule};
use vemsf::mesh::{
    element_geometry_of_ring, generate_mesh, ElementGeometry, MeshParams, VoronoiParams,
};
use vemsf::polyspace::{
    material_matrix, MaterialMatrix, MaterialMode, MatrixMonomialBasis, VectorMonomialBasis,
};
use vemsf::projectors::{build_dof_layout, build_projectors, dof_matrix_d};
use vemsf::quadrature::{gauss_1d, sbc_polygon_rule};
use vemsf::study::{run_convergence, run_patch_tests, BeamSolution, StudyKind};
use vemsf::system::{assemble, build_dof_map, BoundaryCondition, BoundaryValueProblem};

static CONVERGENCE_LOCK: Mutex<()> = Mutex::new(());

/// Mesh seed for the patch suites (the CLI default). Roughly one random
/// realization of the 8:1 bar in ten contains sliver cells whose reduced
/// systems cannot reach the solver's residual gate; those runs abort with
/// a solver error by design, so the tests pin a well-conditioned
/// realization.
const PATCH_SEED: u64 = 4;

fn material() -> MaterialMatrix {
    material_matrix(1.0, 0.3, MaterialMode::PlaneStress).unwrap()
}

/// Random star-shaped polygon: n vertices at jittered angles around a
/// center, on a circle (`convex`) or at jittered radii (usually nonconvex).
fn star_polygon(rng: &mut ChaCha8Rng, n: usize, convex: bool) -> Vec<Point2<f64>> {
    let center = Point2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
    let scale = rng.gen_range(0.1..3.0);
    let gaps: Vec<f64> = (0..n).map(|_| rng.gen_range(0.15..1.0)).collect();
    let total: f64 = gaps.iter().sum();
    let mut theta = rng.gen_range(0.0..std::f64::consts::TAU);
    gaps.iter()
        .map(|g| {
            theta += g / total * std::f64::consts::TAU;
            let r = if convex { 1.0 } else { rng.gen_range(0.5..1.5) };
            Point2::new(
                center.x + scale * r * theta.cos(),
                center.y + scale * r * theta.sin(),
            )
        })
        .collect()
}

/// ∫ over the polygon by fan triangulation from the first vertex: signed
/// triangles make this exact (to quadrature degree) on nonconvex rings too.
fn fan_integral(ring: &[Point2<f64>], f: impl Fn(Point2<f64>) -> f64) -> f64 {
    let (nodes, weights) = gauss_1d(8).unwrap();
    let base = ring[0];
    let mut total = 0.0;
    for w in ring.windows(2).skip(1) {
        let (p, q) = (w[0], w[1]);
        let det = (p.x - base.x) * (q.y - base.y) - (p.y - base.y) * (q.x - base.x);
        for (&u, &wu) in nodes.iter().zip(&weights) {
            for (&v, &wv) in nodes.iter().zip(&weights) {
                // Map the unit square onto the triangle (base, p, q); the
                // collapsed direction contributes the extra factor u.
                let (xi, eta) = (u * (1.0 - v), u * v);
                let x = Point2::new(
                    base.x + xi * (p.x - base.x) + eta * (q.x - base.x),
                    base.y + xi * (p.y - base.y) + eta * (q.y - base.y),
                );
                total += wu * wv * u * det * f(x);
            }
        }
    }
    total
}

#[test]
fn a1_quadrature_exactness_against_fan_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for shape in 0..50 {
        let n = rng.gen_range(4..=12);
        let ring = star_polygon(&mut rng, n, shape % 2 == 0);
        let geom = element_geometry_of_ring(&ring);
        let rule = sbc_polygon_rule(&geom, geom.vertices[0], 10).unwrap();
        for a in 0..=10usize {
            for b in 0..=(10 - a) {
                let f = |x: Point2<f64>| x.x.powi(a as i32) * x.y.powi(b as i32);
                let got = rule.integrate(f);
                let want = fan_integral(&ring, f);
                let scale = fan_integral(&ring, |x| f(x).abs()).max(1e-300);
                assert!(
                    (got - want).abs() <= 1e-12 * scale,
                    "shape {shape} x^{a} y^{b}: sbc {got:.17e} vs fan {want:.17e}"
                );
            }
        }
    }
    assert!(start.elapsed() < Duration::from_secs(10), "{:?}", start.elapsed());
}

#[test]
fn a2_displacement_patch_tests() {
    let start = Instant::now();
    for k in [2usize, 3] {
        let report = run_patch_tests(k, false, PATCH_SEED).unwrap();
        assert_eq!(report.rows.len(), 4);
        let worst = report.worst_error();
        assert!(worst < 1e-10, "k={k} worst patch error {worst:.3e}");
    }
    assert!(start.elapsed() < Duration::from_secs(30), "{:?}", start.elapsed());
}

#[test]
fn a3_equilibrium_patch_tests() {
    let start = Instant::now();
    for k in [2usize, 3] {
        let report = run_patch_tests(k, true, PATCH_SEED).unwrap();
        assert_eq!(report.rows.len(), 3);
        let worst = report.worst_error();
        assert!(worst < 1e-8, "k={k} worst equilibrium error {worst:.3e}");
    }
    assert!(start.elapsed() < Duration::from_secs(30), "{:?}", start.elapsed());
}

#[test]
fn a4_spurious_mode_thresholds_on_regular_polygons() {
    let start = Instant::now();
    let mat = material();
    for k in [2usize, 3] {
        let n_min = if k == 3 { 4 } else { 3 };
        for ell in [3usize, 4, 5] {
            let bound = 2 * ell + 5 - 2 * k; // 2ℓ+1 for k=2, 2ℓ−1 for k=3
            let reports = vemsf::eigenanalysis::sweep_regular(k, ell, n_min..=16, &mat).unwrap();
            for r in &reports {
                let n = r.n_or_delta as usize;
                assert_eq!(
                    r.spurious_count == 0,
                    n <= bound,
                    "k={k} ell={ell} n={n}: {} spurious modes",
                    r.spurious_count
                );
            }
            let first_violation = reports
                .iter()
                .find(|r| (r.n_or_delta as usize) > bound)
                .unwrap();
            assert!(first_violation.spurious_count >= 1);
        }
    }
    assert!(start.elapsed() < Duration::from_secs(60), "{:?}", start.elapsed());
}

#[test]
fn a5_perturbation_removes_octagon_spurious_modes() {
    let start = Instant::now();
    let sweep = vemsf::eigenanalysis::sweep_perturbed(
        3,
        4,
        8,
        &vemsf::eigenanalysis::PERTURBATION_DELTAS,
        &material(),
    );
    assert!(sweep.failures.is_empty());
    let at_zero = sweep.reports.iter().find(|r| r.n_or_delta == 0.0).unwrap();
    assert!(at_zero.spurious_count >= 1, "regular octagon should be rank deficient");
    assert!(
        sweep
            .reports
            .iter()
            .any(|r| r.n_or_delta > 0.0 && r.n_or_delta <= 0.2 && r.spurious_count == 0),
        "some perturbation in (0, 0.2] should remove all spurious modes"
    );
    assert!(start.elapsed() < Duration::from_secs(10), "{:?}", start.elapsed());
}

fn assert_optimal_rates(kind: StudyKind, k: usize, levels: usize) {
    let report = run_convergence(kind, k, levels, 0).unwrap();
    let l2 = report.asymptotic_rate_l2().unwrap();
    let energy = report.asymptotic_rate_energy().unwrap();
    let (l2_want, e_want) = ((k + 1) as f64, k as f64);
    assert!(
        (l2 - l2_want).abs() <= 0.3,
        "{} k={k}: L2 slope {l2:.3} not within ±0.3 of {l2_want}",
        report.study
    );
    assert!(
        (energy - e_want).abs() <= 0.3,
        "{} k={k}: energy slope {energy:.3} not within ±0.3 of {e_want}",
        report.study
    );
}

#[test]
fn a6_manufactured_solutions_converge_optimally() {
    let _guard = CONVERGENCE_LOCK.lock().unwrap();
    let start = Instant::now();
    for kind in [StudyKind::Manufactured1, StudyKind::Manufactured2] {
        for k in [2usize, 3] {
            let report = run_convergence(kind, k, 4, 0).unwrap();
            assert!(report.levels.iter().all(|l| l.n_elems <= 4100));
            let l2 = report.asymptotic_rate_l2().unwrap();
            let energy = report.asymptotic_rate_energy().unwrap();
            assert!(
                (l2 - (k + 1) as f64).abs() <= 0.3,
                "{} k={k}: L2 slope {l2:.3}",
                report.study
            );
            assert!(
                (energy - k as f64).abs() <= 0.3,
                "{} k={k}: energy slope {energy:.3}",
                report.study
            );
        }
    }
    assert!(start.elapsed() < Duration::from_secs(600), "{:?}", start.elapsed());
}

#[test]
fn a7_beam_converges_optimally_on_convex_and_nonconvex_ladders() {
    let _guard = CONVERGENCE_LOCK.lock().unwrap();
    let start = Instant::now();
    let residual = BeamSolution::new().traction_residual();
    assert!(residual < 1e-8, "beam self-check residual {residual:.3e}");
    for k in [2usize, 3] {
        assert_optimal_rates(StudyKind::Beam, k, 4);
    }
    // The split-cell bar superconverges on coarse meshes, so k=2 needs the
    // fifth level before the rate settles; at k=3 the fifth level's error
    // (5e-11) would sit at the linear-solver floor, so it stops at four.
    assert_optimal_rates(StudyKind::BeamNonconvex, 2, 5);
    assert_optimal_rates(StudyKind::BeamNonconvex, 3, 4);
    assert!(start.elapsed() < Duration::from_secs(600), "{:?}", start.elapsed());
}

#[test]
fn a8_plate_with_hole_loses_the_optimal_energy_rate() {
    let _guard = CONVERGENCE_LOCK.lock().unwrap();
    let start = Instant::now();
    for k in [2usize, 3] {
        let report = run_convergence(StudyKind::PlateHole, k, 3, 0).unwrap();
        assert_eq!(report.levels.len(), 3);
        let energy = report.asymptotic_rate_energy().unwrap();
        assert!(
            energy > 0.0,
            "k={k}: energy error should still decrease (slope {energy:.3})"
        );
        assert!(
            energy < k as f64 - 0.3,
            "k={k}: energy slope {energy:.3} should fall below {}",
            k as f64 - 0.3
        );
    }
    assert!(start.elapsed() < Duration::from_secs(600), "{:?}", start.elapsed());
}

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

fn check_element_invariants(geom: &ElementGeometry, k: usize, ell: usize, rng: &mut ChaCha8Rng) {
    let tag = format!("k={k} ell={ell}");
    let set = build_projectors(geom, k, ell).unwrap();
    let basis = VectorMonomialBasis::new(k, geom.centroid, geom.diameter);
    let mat_basis = MatrixMonomialBasis::new(ell, geom.centroid, geom.diameter);
    let d = dof_matrix_d(&set.layout, &basis);

    // D has full column rank.
    let sv = d.clone().svd(false, false).singular_values;
    let rank = sv.iter().filter(|&&s| s > 1e-10 * sv.max()).count();
    assert_eq!(rank, basis.size(), "{tag}: D rank deficient");

    // Polynomial reproduction of Π^S and strain consistency of Π.
    let coeffs = DVector::from_fn(basis.size(), |_, _| rng.gen_range(-1.0..1.0));
    let dofs = &d * &coeffs;
    let reproduced = &set.pi_s * &dofs;
    assert!(
        (&reproduced - &coeffs).norm() <= 1e-9 * coeffs.norm(),
        "{tag}: reproduction"
    );
    let proj = &set.pi * &dofs;
    for &x in set.layout.sites.iter().chain([&geom.centroid]) {
        let got = mat_basis.eval(x) * &proj;
        let want = basis.strain(x) * &coeffs;
        assert!(
            (got - want).amax() <= 1e-9 * coeffs.amax().max(1.0),
            "{tag}: strain consistency at {x:?}"
        );
    }

    // Π̃⁰ coincides with Π^S.
    assert!(
        (&set.pi0_tilde - &set.pi_s).amax() <= 1e-12 * set.pi_s.amax(),
        "{tag}: displacement projector"
    );

    // Stiffness: symmetric, PSD, rigid modes in the kernel of Π and K_E.
    let ops = element_operators(geom.clone(), k, EllRule::Fixed(ell), &material()).unwrap();
    let ke = &ops.stiffness;
    assert!((ke - ke.transpose()).amax() <= 1e-12 * ke.amax(), "{tag}: symmetry");
    let eig = ke.clone().symmetric_eigen().eigenvalues;
    assert!(eig.min() >= -1e-10 * eig.amax(), "{tag}: not PSD");
    let (c, h) = (geom.centroid, geom.diameter);
    let modes: [Box<dyn Fn(Point2<f64>) -> (f64, f64)>; 3] = [
        Box::new(|_| (1.0, 0.0)),
        Box::new(|_| (0.0, 1.0)),
        Box::new(move |x| (-(x.y - c.y) / h, (x.x - c.x) / h)),
    ];
    for mode in modes {
        let v = set.layout.interpolate(mode);
        assert!(
            (&set.pi * &v).amax() <= 1e-10 * set.pi.amax() * v.norm(),
            "{tag}: rigid mode not in ker Π"
        );
        assert!(
            (ke * &v).amax() <= 1e-10 * ke.amax() * v.norm(),
            "{tag}: rigid mode not in ker K"
        );
    }
}

#[test]
fn a9_element_invariants_over_random_shapes() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (k, ell) in KL_PAIRS {
        for shape in 0..20 {
            let n = rng.gen_range(4..=10);
            let ring = star_polygon(&mut rng, n, shape % 3 == 0);
            let geom = element_geometry_of_ring(&ring);
            check_element_invariants(&geom, k, ell, &mut rng);
        }
    }
    // Global assembly symmetry on random Voronoi meshes.
    for (i, k) in [(0u64, 2usize), (1, 2), (2, 2), (3, 3), (4, 3), (5, 3)] {
        let mut params = VoronoiParams::unit(5 + i as usize, 2);
        params.min_cell_vertices = if k >= 3 { 4 } else { 3 };
        let mesh = generate_mesh(&MeshParams::VoronoiLloyd(params), 40 + i).unwrap();
        let mut conditions = BTreeMap::new();
        for g in ["left", "right", "bottom"] {
            conditions.insert(
                g.to_string(),
                BoundaryCondition::Dirichlet(Arc::new(|_| Vector2::zeros())),
            );
        }
        conditions.insert(
            "top".to_string(),
            BoundaryCondition::Neumann(Arc::new(|x: Point2<f64>| Vector2::new(x.x, -1.0))),
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
        assert!(
            (&dense - dense.transpose()).amax() <= 1e-12 * dense.amax(),
            "assembly asymmetric (mesh {i}, k={k})"
        );
    }
    assert!(start.elapsed() < Duration::from_secs(120), "{:?}", start.elapsed());
}

#[test]
fn a9_dof_layout_rejects_unsupported_elements() {
    // Companion boundary case: the DOF layout refuses k = 3 on triangles
    // (three covering lines), so the invariants above never see them.
    let tri = element_geometry_of_ring(&[
        Point2::new(0.0, 0.0),
        Point2::new(1.0, 0.0),
        Point2::new(0.4, 0.9),
    ]);
    assert!(build_dof_layout(&tri, 3).is_err());
    assert!(build_dof_layout(&tri, 2).is_ok());
}
