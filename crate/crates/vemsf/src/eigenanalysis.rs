//! Element-eigenvalue studies: counting spurious zero-energy modes of the
//! stabilization-free stiffness across polygon families, strain orders,
//! vertex perturbations, and collinear node insertion.

use crate::element::{element_operators, ElementError, EllRule};
use crate::mesh::{
    element_geometry, element_geometry_of_ring, generate_mesh, is_simple_polygon,
    polygon_signed_area, InsertedNodesParams, MeshParams, NgonParams,
};
use crate::polyspace::MaterialMatrix;
use nalgebra::{DMatrix, DVector, Point2, Vector2};

/// Fraction of λ_max below which an eigenvalue counts as zero.
pub const ZERO_THRESHOLD: f64 = 1e-8;

/// Eigenvalue statistics of one element stiffness matrix.
#[derive(Debug, Clone)]
pub struct ElementSpectrum {
    /// Ascending eigenvalues.
    pub eigenvalues: DVector<f64>,
    pub zero_count: usize,
    /// zero_count − 3 (rigid-body modes are always zero).
    pub spurious_count: usize,
    /// Smallest eigenvalue above the zero threshold (NaN if none).
    pub lambda_min_nonzero: f64,
    pub lambda_max: f64,
}

/// One row of a sweep: an element descriptor plus its spectrum statistics.
#[derive(Debug, Clone)]
pub struct SpectrumReport {
    /// "regular", "perturbed", or "inserted".
    pub family: &'static str,
    /// Vertex count (regular), relative perturbation δ (perturbed), or
    /// central-cell node count (inserted).
    pub n_or_delta: f64,
    pub k: usize,
    pub ell: usize,
    pub zero_count: usize,
    pub spurious_count: usize,
    pub lambda_min_nonzero: f64,
    pub lambda_max: f64,
}

/// Whether the sufficient rank condition N_E ≤ 2ℓ − 2k + 5 holds, i.e. the
/// strain space is provably rich enough for zero spurious modes.
pub fn sufficient_inequality(k: usize, ell: usize, n_e: usize) -> bool {
    n_e as i64 <= 2 * ell as i64 - 2 * k as i64 + 5
}

/// Full symmetric eigen-decomposition of K_E with zero threshold
/// |λ| < 1e-8·λ_max.
pub fn element_spectrum(k_e: &DMatrix<f64>) -> ElementSpectrum {
    let mut eigenvalues: Vec<f64> = k_e
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    eigenvalues.sort_by(|a, b| a.total_cmp(b));
    let lambda_max = eigenvalues.last().copied().unwrap_or(0.0);
    let cut = ZERO_THRESHOLD * lambda_max.abs();
    let zero_count = eigenvalues.iter().filter(|v| v.abs() <= cut).count();
    let lambda_min_nonzero = eigenvalues
        .iter()
        .copied()
        .find(|v| v.abs() > cut)
        .unwrap_or(f64::NAN);
    ElementSpectrum {
        eigenvalues: DVector::from_vec(eigenvalues),
        zero_count,
        spurious_count: zero_count.saturating_sub(3),
        lambda_min_nonzero,
        lambda_max,
    }
}

fn spectrum_of_ring(
    ring: &[Point2<f64>],
    k: usize,
    ell: usize,
    material: &MaterialMatrix,
) -> Result<ElementSpectrum, ElementError> {
    let geom = element_geometry_of_ring(ring);
    let ops = element_operators(geom, k, EllRule::Fixed(ell), material)?;
    Ok(element_spectrum(&ops.stiffness))
}

fn report(
    family: &'static str,
    n_or_delta: f64,
    k: usize,
    ell: usize,
    s: &ElementSpectrum,
) -> SpectrumReport {
    SpectrumReport {
        family,
        n_or_delta,
        k,
        ell,
        zero_count: s.zero_count,
        spurious_count: s.spurious_count,
        lambda_min_nonzero: s.lambda_min_nonzero,
        lambda_max: s.lambda_max,
    }
}

fn ngon_ring(n: usize) -> Vec<Point2<f64>> {
    let mesh = generate_mesh(&MeshParams::RegularNgon(NgonParams::unit(n)), 0)
        .expect("regular polygon generation");
    mesh.cells[0].iter().map(|&v| mesh.vertices[v]).collect()
}

/// Spectra of regular n-gons for n across `n_range`; the unsupported pair
/// (k=3, triangle) is skipped.
pub fn sweep_regular(
    k: usize,
    ell: usize,
    n_range: std::ops::RangeInclusive<usize>,
    material: &MaterialMatrix,
) -> Result<Vec<SpectrumReport>, ElementError> {
    let mut out = Vec::new();
    for n in n_range {
        if k == 3 && n == 3 {
            continue;
        }
        let s = spectrum_of_ring(&ngon_ring(n), k, ell, material)?;
        out.push(report("regular", n as f64, k, ell, &s));
    }
    Ok(out)
}

/// Sweep result for perturbed polygons: per-δ reports plus any geometry
/// failures (δ values whose polygon became invalid), which do not abort the
/// sweep.
#[derive(Debug)]
pub struct PerturbSweep {
    pub reports: Vec<SpectrumReport>,
    pub failures: Vec<(f64, String)>,
}

/// Relative perturbation magnitudes δ (in units of h_E) used by the studies.
pub const PERTURBATION_DELTAS: [f64; 6] = [0.0, 1e-3, 1e-2, 0.05, 0.1, 0.2];

/// Spectra of a regular n-gon with vertex 0's y-coordinate shifted by
/// δ·h_E for each δ in `deltas`. Vertex 0 sits on the x-axis, so the shift
/// breaks the polygon's axial symmetry (an x-shift would preserve it and
/// with it any symmetry-protected spurious mode).
pub fn sweep_perturbed(
    k: usize,
    ell: usize,
    base_ngon: usize,
    deltas: &[f64],
    material: &MaterialMatrix,
) -> PerturbSweep {
    let base = ngon_ring(base_ngon);
    let h = element_geometry_of_ring(&base).diameter;
    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for &delta in deltas {
        let mut ring = base.clone();
        ring[0] += Vector2::new(0.0, delta * h);
        if !is_simple_polygon(&ring) || polygon_signed_area(&ring) <= 0.0 {
            failures.push((delta, "perturbed polygon is not simple".to_string()));
            continue;
        }
        match spectrum_of_ring(&ring, k, ell, material) {
            Ok(s) => reports.push(report("perturbed", delta, k, ell, &s)),
            Err(e) => failures.push((delta, e.to_string())),
        }
    }
    PerturbSweep { reports, failures }
}

/// Spectra of the 3×3 grid whose central cell gains collinear edge nodes:
/// one report per central node count in 4..=max_nodes, aggregating the
/// worst element of the mesh (max zero/spurious counts, widest λ range).
pub fn sweep_inserted_nodes(
    k: usize,
    ell: usize,
    max_nodes: usize,
    material: &MaterialMatrix,
) -> Result<Vec<SpectrumReport>, ElementError> {
    assert!(max_nodes >= 4);
    let mut out = Vec::new();
    for total in 4..=max_nodes {
        let mesh = generate_mesh(
            &MeshParams::GridWithInsertedNodes(InsertedNodesParams {
                extra_nodes: total - 4,
            }),
            0,
        )
        .expect("inserted-node mesh generation");
        let mut worst_zero = 0usize;
        let mut worst_spurious = 0usize;
        let mut lmin = f64::INFINITY;
        let mut lmax: f64 = 0.0;
        for cell in 0..mesh.n_cells() {
            let geom = element_geometry(&mesh, cell);
            let ops = element_operators(geom, k, EllRule::Fixed(ell), material)?;
            let s = element_spectrum(&ops.stiffness);
            worst_zero = worst_zero.max(s.zero_count);
            worst_spurious = worst_spurious.max(s.spurious_count);
            if s.lambda_min_nonzero.is_finite() {
                lmin = lmin.min(s.lambda_min_nonzero);
            }
            lmax = lmax.max(s.lambda_max);
        }
        out.push(SpectrumReport {
            family: "inserted",
            n_or_delta: total as f64,
            k,
            ell,
            zero_count: worst_zero,
            spurious_count: worst_spurious,
            lambda_min_nonzero: if lmin.is_finite() { lmin } else { f64::NAN },
            lambda_max: lmax,
        });
    }
    Ok(out)
}

/// Renders sweep rows as CSV with a header line.
pub fn spectrum_csv(reports: &[SpectrumReport]) -> String {
    let mut s =
        String::from("family,n_or_delta,k,ell,zero_count,spurious_count,lambda_min_nonzero,lambda_max\n");
    for r in reports {
        s.push_str(&format!(
            "{},{},{},{},{},{},{:.17e},{:.17e}\n",
            r.family,
            r.n_or_delta,
            r.k,
            r.ell,
            r.zero_count,
            r.spurious_count,
            r.lambda_min_nonzero,
            r.lambda_max
        ));
    }
    s
}
