//! Global DOF numbering, assembly, boundary conditions, the sparse linear
//! solve, and the discrete error measures.

use crate::element::{
    element_body_force, element_edge_traction, element_operators, ElementError, EllRule,
};
use crate::mesh::{element_geometry, MeshError, PolygonalMesh};
use crate::polyspace::{MaterialMatrix, MatrixMonomialBasis, VectorMonomialBasis};
use crate::projectors::eta_e;
use crate::quadrature::{lobatto_edge_nodes, sbc_polygon_rule, QuadratureError};
use nalgebra::{DMatrix, DVector, Point2, Vector2, Vector3};
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};
use rayon::prelude::*;
use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SystemError {
    #[error("cell {cell}: {source}")]
    Element {
        cell: usize,
        #[source]
        source: ElementError,
    },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error("boundary configuration: {0}")]
    Configuration(String),
    #[error("linear solver: {0}")]
    Solver(String),
}

pub type VectorField = Arc<dyn Fn(Point2<f64>) -> Vector2<f64> + Send + Sync>;
pub type ScalarField = Arc<dyn Fn(Point2<f64>) -> f64 + Send + Sync>;
pub type VoigtField = Arc<dyn Fn(Point2<f64>) -> Vector3<f64> + Send + Sync>;

/// Global scalar-site numbering: mesh vertices first, then the k−1 interior
/// nodes of each undirected edge (edges numbered in first-encounter order
/// over cells). Edge-interior nodes are ordered along the canonical
/// direction from the smaller to the larger vertex index. The x-component
/// DOF of site s is s; the y-component DOF is n_sites + s.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub k: usize,
    pub n_sites: usize,
    /// Per cell, local site index (DofLayout order) → global site index.
    pub cell_sites: Vec<Vec<usize>>,
    pub site_positions: Vec<Point2<f64>>,
    /// Per boundary group: sorted unique global site indices.
    pub group_sites: BTreeMap<String, Vec<usize>>,
    /// Per boundary group: (cell, local edge) pairs.
    pub group_edges: BTreeMap<String, Vec<(usize, usize)>>,
}

impl DofMap {
    pub fn n_dofs(&self) -> usize {
        2 * self.n_sites
    }

    /// Global DOF index of (site, component).
    pub fn dof(&self, site: usize, component: usize) -> usize {
        component * self.n_sites + site
    }
}

/// Builds the global conforming DOF numbering for order k. Errors if any
/// cell does not satisfy k < η_E.
pub fn build_dof_map(mesh: &PolygonalMesh, k: usize) -> Result<DofMap, SystemError> {
    for cell in 0..mesh.n_cells() {
        let geom = element_geometry(mesh, cell);
        let eta = eta_e(&geom);
        if k >= eta {
            return Err(SystemError::Element {
                cell,
                source: ElementError::Projector(
                    crate::projectors::ProjectorError::UnsupportedElement {
                        n_e: geom.vertices.len(),
                        eta,
                        k,
                    },
                ),
            });
        }
    }
    let n_vertices = mesh.n_vertices();
    let per_edge = k - 1;
    let mut edge_ids: HashMap<(usize, usize), usize> = HashMap::new();
    let mut next_edge = 0usize;
    let mut cell_sites = Vec::with_capacity(mesh.n_cells());
    for ring in &mesh.cells {
        let n_e = ring.len();
        let mut sites: Vec<usize> = ring.clone();
        for e in 0..n_e {
            let (a, b) = (ring[e], ring[(e + 1) % n_e]);
            let key = (a.min(b), a.max(b));
            let eid = *edge_ids.entry(key).or_insert_with(|| {
                let id = next_edge;
                next_edge += 1;
                id
            });
            let base = n_vertices + eid * per_edge;
            for m in 0..per_edge {
                // Interior nodes run along the cell's traversal direction;
                // flip when that is opposite the canonical min→max order.
                let canon = if a < b { m } else { per_edge - 1 - m };
                sites.push(base + canon);
            }
        }
        cell_sites.push(sites);
    }
    let n_sites = n_vertices + next_edge * per_edge;
    let mut site_positions = mesh.vertices.clone();
    site_positions.resize(n_sites, Point2::origin());
    let params = lobatto_edge_nodes(k);
    for (&(a, b), &eid) in &edge_ids {
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        for m in 0..per_edge {
            site_positions[n_vertices + eid * per_edge + m] = pa + (pb - pa) * params[m + 1];
        }
    }
    let mut group_sites: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let mut group_edges: BTreeMap<String, Vec<(usize, usize)>> = BTreeMap::new();
    for be in &mesh.boundary_edges {
        group_edges
            .entry(be.group.clone())
            .or_default()
            .push((be.cell, be.local_edge));
        let ring = &mesh.cells[be.cell];
        let n_e = ring.len();
        let sites = group_sites.entry(be.group.clone()).or_default();
        sites.push(ring[be.local_edge]);
        sites.push(ring[(be.local_edge + 1) % n_e]);
        for m in 0..per_edge {
            sites.push(cell_sites[be.cell][n_e + be.local_edge * per_edge + m]);
        }
    }
    for sites in group_sites.values_mut() {
        sites.sort_unstable();
        sites.dedup();
    }
    Ok(DofMap {
        k,
        n_sites,
        cell_sites,
        site_positions,
        group_sites,
        group_edges,
    })
}

/// Boundary condition attached to one boundary group.
#[derive(Clone)]
pub enum BoundaryCondition {
    /// Both displacement components prescribed by nodal interpolation.
    Dirichlet(VectorField),
    /// A single component prescribed (e.g. a symmetry roller); the other
    /// component stays free.
    DirichletComponent { component: usize, value: ScalarField },
    /// Prescribed traction t₀.
    Neumann(VectorField),
}

/// A linear elastostatic boundary-value problem on a polygonal mesh.
pub struct BoundaryValueProblem<'a> {
    pub mesh: &'a PolygonalMesh,
    pub k: usize,
    pub ell_rule: EllRule,
    pub material: MaterialMatrix,
    pub body_force: Option<VectorField>,
    /// Extra quadrature degree for non-polynomial body forces.
    pub body_force_extra_degree: usize,
    /// Extra quadrature degree for non-polynomial tractions.
    pub traction_extra_degree: usize,
    pub conditions: BTreeMap<String, BoundaryCondition>,
}

/// An analytic displacement field with optional derived quantities, used as
/// boundary data and as the reference in error measurement.
#[derive(Clone)]
pub struct AnalyticField {
    pub label: String,
    pub displacement: VectorField,
    /// Voigt strain (ε₁₁, ε₂₂, γ₁₂) with engineering shear.
    pub strain: Option<VoigtField>,
    /// Voigt stress (σ₁₁, σ₂₂, σ₁₂).
    pub stress: Option<VoigtField>,
    pub body_force: Option<VectorField>,
    /// Extra quadrature degree for non-polynomial fields.
    pub extra_degree: usize,
}

impl AnalyticField {
    /// Traction σ·n on a boundary with outward normal n, from the stress
    /// closure.
    pub fn traction(&self, x: Point2<f64>, n: Vector2<f64>) -> Vector2<f64> {
        let s = self
            .stress
            .as_ref()
            .expect("traction evaluation needs a stress closure")(x);
        Vector2::new(s[0] * n.x + s[2] * n.y, s[2] * n.x + s[1] * n.y)
    }
}

/// Assembled (unconstrained) global system.
pub struct AssembledSystem {
    pub matrix: CscMatrix<f64>,
    pub rhs: DVector<f64>,
}

fn validate_conditions(bvp: &BoundaryValueProblem) -> Result<(), SystemError> {
    let mut mesh_groups: Vec<&str> = bvp
        .mesh
        .boundary_edges
        .iter()
        .map(|b| b.group.as_str())
        .collect();
    mesh_groups.sort_unstable();
    mesh_groups.dedup();
    for g in &mesh_groups {
        if !bvp.conditions.contains_key(*g) {
            return Err(SystemError::Configuration(format!(
                "boundary group '{g}' has no condition"
            )));
        }
    }
    for g in bvp.conditions.keys() {
        if !mesh_groups.contains(&g.as_str()) {
            return Err(SystemError::Configuration(format!(
                "condition refers to unknown boundary group '{g}'"
            )));
        }
    }
    Ok(())
}

struct CellContribution {
    triplets: Vec<(usize, usize, f64)>,
    rhs: Vec<(usize, f64)>,
}

/// Assembles the global stiffness matrix and load vector. Element work runs
/// in parallel; contributions are merged in cell order, so the result is
/// deterministic.
pub fn assemble(
    bvp: &BoundaryValueProblem,
    dofmap: &DofMap,
) -> Result<AssembledSystem, SystemError> {
    validate_conditions(bvp)?;
    let mesh = bvp.mesh;
    let n = dofmap.n_dofs();
    // Neumann edges per cell.
    let mut neumann: Vec<Vec<(usize, VectorField)>> = vec![Vec::new(); mesh.n_cells()];
    for be in &mesh.boundary_edges {
        if let Some(BoundaryCondition::Neumann(t)) = bvp.conditions.get(&be.group) {
            neumann[be.cell].push((be.local_edge, t.clone()));
        }
    }

    let contributions: Result<Vec<CellContribution>, SystemError> = (0..mesh.n_cells())
        .into_par_iter()
        .map(|cell| {
            let geom = element_geometry(mesh, cell);
            let ops = element_operators(geom, bvp.k, bvp.ell_rule, &bvp.material)
                .map_err(|source| SystemError::Element { cell, source })?;
            let n_local = ops.projectors.layout.n_dofs();
            let s_local = ops.projectors.layout.n_sites();
            let mut b_local = DVector::zeros(n_local);
            if let Some(f) = &bvp.body_force {
                b_local += element_body_force(&ops, |x| f(x), bvp.body_force_extra_degree)
                    .map_err(|source| SystemError::Element { cell, source })?;
            }
            for (edge, t) in &neumann[cell] {
                b_local += element_edge_traction(&ops, *edge, |x| t(x), bvp.traction_extra_degree)
                    .map_err(|source| SystemError::Element { cell, source })?;
            }
            let sites = &dofmap.cell_sites[cell];
            let global = |l: usize| {
                if l < s_local {
                    sites[l]
                } else {
                    dofmap.n_sites + sites[l - s_local]
                }
            };
            let mut triplets = Vec::with_capacity(n_local * n_local);
            for i in 0..n_local {
                for j in 0..n_local {
                    triplets.push((global(i), global(j), ops.stiffness[(i, j)]));
                }
            }
            let rhs = (0..n_local).map(|i| (global(i), b_local[i])).collect();
            Ok(CellContribution { triplets, rhs })
        })
        .collect();

    let mut coo = CooMatrix::new(n, n);
    let mut rhs = DVector::zeros(n);
    for c in contributions? {
        for (i, j, v) in c.triplets {
            coo.push(i, j, v);
        }
        for (i, v) in c.rhs {
            rhs[i] += v;
        }
    }
    Ok(AssembledSystem {
        matrix: CscMatrix::from(&coo),
        rhs,
    })
}

/// The system after symmetric elimination of the Dirichlet DOFs.
pub struct ReducedSystem {
    pub matrix: CscMatrix<f64>,
    pub rhs: DVector<f64>,
    /// Global indices of the free DOFs, ascending.
    pub free: Vec<usize>,
    /// Full-length vector holding the prescribed values (zero on free DOFs).
    pub constrained_values: DVector<f64>,
}

/// Applies the Dirichlet conditions of `bvp` by nodal interpolation (exact
/// here because every DOF is a point value) and eliminates the constrained
/// rows and columns symmetrically.
pub fn apply_dirichlet(
    system: &AssembledSystem,
    dofmap: &DofMap,
    bvp: &BoundaryValueProblem,
) -> Result<ReducedSystem, SystemError> {
    let n = dofmap.n_dofs();
    let mut constrained = vec![false; n];
    let mut values = DVector::zeros(n);
    for (group, condition) in &bvp.conditions {
        let sites = dofmap
            .group_sites
            .get(group)
            .ok_or_else(|| SystemError::Configuration(format!("unknown group '{group}'")))?;
        match condition {
            BoundaryCondition::Dirichlet(u0) => {
                for &s in sites {
                    let u = u0(dofmap.site_positions[s]);
                    for comp in 0..2 {
                        let g = dofmap.dof(s, comp);
                        constrained[g] = true;
                        values[g] = u[comp];
                    }
                }
            }
            BoundaryCondition::DirichletComponent { component, value } => {
                for &s in sites {
                    let g = dofmap.dof(s, *component);
                    constrained[g] = true;
                    values[g] = value(dofmap.site_positions[s]);
                }
            }
            BoundaryCondition::Neumann(_) => {}
        }
    }
    let free: Vec<usize> = (0..n).filter(|&i| !constrained[i]).collect();
    let mut to_free = vec![usize::MAX; n];
    for (fi, &g) in free.iter().enumerate() {
        to_free[g] = fi;
    }
    let mut rhs = DVector::from_iterator(free.len(), free.iter().map(|&g| system.rhs[g]));
    let mut coo = CooMatrix::new(free.len(), free.len());
    for (i, j, &v) in system.matrix.triplet_iter() {
        match (constrained[i], constrained[j]) {
            (false, false) => coo.push(to_free[i], to_free[j], v),
            (false, true) => rhs[to_free[i]] -= v * values[j],
            _ => {}
        }
    }
    values
        .iter_mut()
        .zip(&constrained)
        .for_each(|(v, &c)| *v = if c { *v } else { 0.0 });
    Ok(ReducedSystem {
        matrix: CscMatrix::from(&coo),
        rhs,
        free,
        constrained_values: values,
    })
}

/// Sparse matrix–vector product (the sparse crate's operator overloads are
/// avoided to keep the dependency surface small).
fn spmv(a: &CscMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    let mut y = DVector::zeros(a.nrows());
    for (i, j, &v) in a.triplet_iter() {
        y[i] += v * x[j];
    }
    y
}

/// Reverse Cuthill–McKee ordering of a symmetric sparsity pattern, for
/// factorization fill-in reduction.
fn rcm_permutation(a: &CscMatrix<f64>) -> Vec<usize> {
    let n = a.ncols();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, j, _) in a.triplet_iter() {
        if i != j {
            adj[j].push(i);
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(|l| l.len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    loop {
        // Start each component from an unvisited vertex of minimum degree.
        let start = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| (degree[i], i));
        let Some(start) = start else { break };
        visited[start] = true;
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree[w], w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// Solves the reduced SPD system by sparse Cholesky with fill-reducing
/// ordering and iterative refinement, then expands back to the full DOF
/// vector. The relative residual must reach 1e-10.
pub fn solve(reduced: &ReducedSystem) -> Result<DVector<f64>, SystemError> {
    let nf = reduced.free.len();
    let mut full = reduced.constrained_values.clone();
    if nf == 0 {
        return Ok(full);
    }
    let order = rcm_permutation(&reduced.matrix);
    let mut inv = vec![0usize; nf];
    for (new, &old) in order.iter().enumerate() {
        inv[old] = new;
    }
    let mut coo = CooMatrix::new(nf, nf);
    for (i, j, &v) in reduced.matrix.triplet_iter() {
        coo.push(inv[i], inv[j], v);
    }
    let pa = CscMatrix::from(&coo);
    let pb = DVector::from_fn(nf, |i, _| reduced.rhs[order[i]]);
    let chol = CscCholesky::factor(&pa).map_err(|e| SystemError::Solver(format!("{e:?}")))?;
    let solve_once = |rhs: &DVector<f64>| -> DVector<f64> {
        let b = DMatrix::from_column_slice(nf, 1, rhs.as_slice());
        DVector::from_column_slice(chol.solve(&b).as_slice())
    };
    let mut x = solve_once(&pb);
    // Iterative refinement: each pass gains a factor of roughly κ(A)·ε
    // until the residual stagnates at the attainable accuracy.
    let scale = pb.norm().max(1e-300);
    let mut residual = (&pb - spmv(&pa, &x)).norm();
    for _ in 0..4 {
        if residual / scale <= 1e-12 {
            break;
        }
        let r = &pb - spmv(&pa, &x);
        let x_next = &x + solve_once(&r);
        let r_next = (&pb - spmv(&pa, &x_next)).norm();
        if r_next >= residual {
            break; // stagnated
        }
        x = x_next;
        residual = r_next;
    }
    if !(residual / scale <= 1e-10) {
        return Err(SystemError::Solver(format!(
            "relative residual {:.3e} exceeds 1e-10 (singular or ill-conditioned system)",
            residual / scale
        )));
    }
    for (new, &old) in order.iter().enumerate() {
        full[reduced.free[old]] = x[new];
    }
    Ok(full)
}

/// Convenience wrapper: assemble, constrain, and solve a BVP.
pub fn solve_bvp(bvp: &BoundaryValueProblem) -> Result<(DofMap, DVector<f64>), SystemError> {
    let dofmap = build_dof_map(bvp.mesh, bvp.k)?;
    let assembled = assemble(bvp, &dofmap)?;
    let reduced = apply_dirichlet(&assembled, &dofmap, bvp)?;
    let solution = solve(&reduced)?;
    Ok((dofmap, solution))
}

/// The three discrete error measures.
#[derive(Debug, Clone, Copy)]
pub struct ErrorMeasures {
    /// Max Euclidean displacement error over all DOF sites.
    pub linf: f64,
    /// L² norm of u − Π^S u_h.
    pub l2: f64,
    /// Energy norm of the strain defect ε̄(u) − Π ε(u_h).
    pub energy: f64,
}

/// Computes the error measures of a solved displacement vector against an
/// analytic field. The energy measure requires the field's strain closure.
pub fn error_norms(
    bvp: &BoundaryValueProblem,
    dofmap: &DofMap,
    solution: &DVector<f64>,
    exact: &AnalyticField,
) -> Result<ErrorMeasures, SystemError> {
    let strain = exact.strain.as_ref().ok_or_else(|| {
        SystemError::Configuration("energy norm needs the exact strain closure".into())
    })?;
    let mesh = bvp.mesh;
    let linf = (0..dofmap.n_sites)
        .map(|s| {
            let x = dofmap.site_positions[s];
            let u = (exact.displacement)(x);
            let uh = Vector2::new(solution[dofmap.dof(s, 0)], solution[dofmap.dof(s, 1)]);
            (u - uh).norm()
        })
        .fold(0.0f64, f64::max);

    let sums: Result<Vec<(f64, f64)>, SystemError> = (0..mesh.n_cells())
        .into_par_iter()
        .map(|cell| {
            let geom = element_geometry(mesh, cell);
            let ops = element_operators(geom, bvp.k, bvp.ell_rule, &bvp.material)
                .map_err(|source| SystemError::Element { cell, source })?;
            let geom = &ops.geom;
            let layout = &ops.projectors.layout;
            let s_local = layout.n_sites();
            let sites = &dofmap.cell_sites[cell];
            let d = DVector::from_fn(layout.n_dofs(), |l, _| {
                if l < s_local {
                    solution[dofmap.dof(sites[l], 0)]
                } else {
                    solution[dofmap.dof(sites[l - s_local], 1)]
                }
            });
            let k = layout.k;
            let ell = ops.projectors.ell;
            let vec_basis = VectorMonomialBasis::new(k, geom.centroid, geom.diameter);
            let mat_basis = MatrixMonomialBasis::new(ell, geom.centroid, geom.diameter);
            let disp_coeffs = &ops.projectors.pi_s * &d;
            let strain_coeffs = &ops.projectors.pi * &d;

            let l2_rule = sbc_polygon_rule(geom, geom.vertices[0], 2 * k + 2 + exact.extra_degree)?;
            let mut l2 = 0.0;
            for (&x, &w) in l2_rule.points.iter().zip(&l2_rule.weights) {
                let diff = (exact.displacement)(x) - vec_basis.eval(x) * &disp_coeffs;
                l2 += w * diff.norm_squared();
            }
            let en_rule =
                sbc_polygon_rule(geom, geom.vertices[0], 2 * ell + 2 + exact.extra_degree)?;
            let mut energy = 0.0;
            for (&x, &w) in en_rule.points.iter().zip(&en_rule.weights) {
                let diff = strain(x) - mat_basis.eval(x) * &strain_coeffs;
                energy += w * (bvp.material.c * diff).dot(&diff);
            }
            Ok((l2, energy))
        })
        .collect();
    let (l2_sum, energy_sum) = sums?
        .into_iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    Ok(ErrorMeasures {
        linf,
        l2: l2_sum.sqrt(),
        energy: energy_sum.max(0.0).sqrt(),
    })
}

/// Per-pair convergence slopes against √N: −log(e_{i+1}/e_i)/log(√(N_{i+1}/N_i)).
/// `None` marks pairs with nonpositive errors where the rate is undefined.
pub fn convergence_rate(errors: &[f64], dof_counts: &[usize]) -> Vec<Option<f64>> {
    assert_eq!(errors.len(), dof_counts.len());
    assert!(dof_counts.windows(2).all(|w| w[0] < w[1]));
    errors
        .windows(2)
        .zip(dof_counts.windows(2))
        .map(|(e, n)| {
            if e[0] > 0.0 && e[1] > 0.0 {
                Some(-(e[1] / e[0]).ln() / (0.5 * (n[1] as f64 / n[0] as f64).ln()))
            } else {
                None
            }
        })
        .collect()
}
