//! Mesh generators for the seven families used by the studies. All families
//! are deterministic in (params, seed); randomness comes from a ChaCha8
//! stream cipher, whose counter-based design gives identical output across
//! platforms.

use super::{
    polygon_centroid, polygon_signed_area, BoundaryEdge, MeshError, PolygonalMesh,
};
use nalgebra::{Point2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

/// Family names, used by the CLI and in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFamily {
    Uniform,
    VoronoiRandom,
    VoronoiLloyd,
    VoronoiHole,
    NonconvexSplit,
    RegularNgon,
    GridWithInsertedNodes,
}

impl std::str::FromStr for MeshFamily {
    type Err = MeshError;
    fn from_str(s: &str) -> Result<Self, MeshError> {
        Ok(match s {
            "uniform" => Self::Uniform,
            "voronoi_random" => Self::VoronoiRandom,
            "voronoi_lloyd" => Self::VoronoiLloyd,
            "voronoi_hole" => Self::VoronoiHole,
            "nonconvex_split" => Self::NonconvexSplit,
            "regular_ngon" => Self::RegularNgon,
            "grid_with_inserted_nodes" => Self::GridWithInsertedNodes,
            other => {
                return Err(MeshError::InvalidParameter(format!(
                    "unknown mesh family '{other}'"
                )))
            }
        })
    }
}

impl std::fmt::Display for MeshFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::Uniform => "uniform",
            Self::VoronoiRandom => "voronoi_random",
            Self::VoronoiLloyd => "voronoi_lloyd",
            Self::VoronoiHole => "voronoi_hole",
            Self::NonconvexSplit => "nonconvex_split",
            Self::RegularNgon => "regular_ngon",
            Self::GridWithInsertedNodes => "grid_with_inserted_nodes",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct GridParams {
    pub nx: usize,
    pub ny: usize,
    pub lo: Point2<f64>,
    pub hi: Point2<f64>,
}

impl GridParams {
    pub fn unit(nx: usize, ny: usize) -> Self {
        Self {
            nx,
            ny,
            lo: Point2::new(0.0, 0.0),
            hi: Point2::new(1.0, 1.0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct VoronoiParams {
    pub n_seeds: usize,
    pub lloyd_iters: usize,
    pub lo: Point2<f64>,
    pub hi: Point2<f64>,
    /// Cells with fewer vertices are eliminated by extra Lloyd smoothing or
    /// reseeding; set to 4 when triangles are not admissible (k = 3).
    pub min_cell_vertices: usize,
}

impl VoronoiParams {
    pub fn unit(n_seeds: usize, lloyd_iters: usize) -> Self {
        Self {
            n_seeds,
            lloyd_iters,
            lo: Point2::new(0.0, 0.0),
            hi: Point2::new(1.0, 1.0),
            min_cell_vertices: 3,
        }
    }
}

/// Lloyd-relaxed Voronoi tessellation of a box minus a circular hole. Cells
/// overlapping the hole are cut back to the chords between the points where
/// their edges cross the circle, so the discrete hole boundary is an
/// irregular polyline inscribed in the circle.
#[derive(Debug, Clone)]
pub struct HoledVoronoiParams {
    pub n_seeds: usize,
    pub lloyd_iters: usize,
    pub lo: Point2<f64>,
    pub hi: Point2<f64>,
    pub hole_center: Point2<f64>,
    pub hole_radius: f64,
    /// See [`VoronoiParams::min_cell_vertices`].
    pub min_cell_vertices: usize,
}

#[derive(Debug, Clone)]
pub struct NonconvexParams {
    pub nx: usize,
    pub ny: usize,
    pub lo: Point2<f64>,
    pub hi: Point2<f64>,
}

#[derive(Debug, Clone)]
pub struct NgonParams {
    pub n: usize,
    pub circumradius: f64,
    pub center: Point2<f64>,
}

impl NgonParams {
    pub fn unit(n: usize) -> Self {
        Self {
            n,
            circumradius: 1.0,
            center: Point2::new(0.0, 0.0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct InsertedNodesParams {
    /// Extra vertices added to the central cell of the fixed 3×3 grid on
    /// (0,1)², distributed round-robin over its four edges. The central
    /// vertex count becomes 4 + extra_nodes.
    pub extra_nodes: usize,
}

/// Family selector with its family-specific parameters.
#[derive(Debug, Clone)]
pub enum MeshParams {
    Uniform(GridParams),
    VoronoiRandom(VoronoiParams),
    VoronoiLloyd(VoronoiParams),
    VoronoiHole(HoledVoronoiParams),
    NonconvexSplit(NonconvexParams),
    RegularNgon(NgonParams),
    GridWithInsertedNodes(InsertedNodesParams),
}

impl MeshParams {
    pub fn family(&self) -> MeshFamily {
        match self {
            Self::Uniform(_) => MeshFamily::Uniform,
            Self::VoronoiRandom(_) => MeshFamily::VoronoiRandom,
            Self::VoronoiLloyd(_) => MeshFamily::VoronoiLloyd,
            Self::VoronoiHole(_) => MeshFamily::VoronoiHole,
            Self::NonconvexSplit(_) => MeshFamily::NonconvexSplit,
            Self::RegularNgon(_) => MeshFamily::RegularNgon,
            Self::GridWithInsertedNodes(_) => MeshFamily::GridWithInsertedNodes,
        }
    }
}

/// Generates a mesh of the requested family. Identical (params, seed) pairs
/// produce bit-identical meshes.
pub fn generate_mesh(params: &MeshParams, seed: u64) -> Result<PolygonalMesh, MeshError> {
    let mesh = match params {
        MeshParams::Uniform(p) => uniform_grid(p)?,
        MeshParams::VoronoiRandom(p) => voronoi_mesh(p, 0, seed)?,
        MeshParams::VoronoiLloyd(p) => voronoi_mesh(p, p.lloyd_iters, seed)?,
        MeshParams::VoronoiHole(p) => voronoi_mesh_with_hole(p, seed)?,
        MeshParams::NonconvexSplit(p) => nonconvex_split(p)?,
        MeshParams::RegularNgon(p) => regular_ngon(p)?,
        MeshParams::GridWithInsertedNodes(p) => grid_with_inserted_nodes(p)?,
    };
    debug_assert!(mesh.validate().is_ok());
    Ok(mesh)
}

fn check_box(lo: Point2<f64>, hi: Point2<f64>) -> Result<(), MeshError> {
    if !(hi.x > lo.x && hi.y > lo.y) {
        return Err(MeshError::InvalidParameter(format!(
            "domain box ({},{})–({},{}) has no area",
            lo.x, lo.y, hi.x, hi.y
        )));
    }
    Ok(())
}

fn uniform_grid(p: &GridParams) -> Result<PolygonalMesh, MeshError> {
    check_box(p.lo, p.hi)?;
    if p.nx == 0 || p.ny == 0 {
        return Err(MeshError::InvalidParameter(
            "grid needs at least one cell per direction".into(),
        ));
    }
    let (nx, ny) = (p.nx, p.ny);
    let dx = (p.hi.x - p.lo.x) / nx as f64;
    let dy = (p.hi.y - p.lo.y) / ny as f64;
    let v = |i: usize, j: usize| j * (nx + 1) + i;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push(Point2::new(
                p.lo.x + i as f64 * dx,
                p.lo.y + j as f64 * dy,
            ));
        }
    }
    let mut cells = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            cells.push(vec![v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1)]);
        }
    }
    let mut mesh = PolygonalMesh {
        vertices,
        cells,
        boundary_edges: vec![],
    };
    tag_box_boundary(&mut mesh, p.lo, p.hi)?;
    Ok(mesh)
}

fn regular_ngon(p: &NgonParams) -> Result<PolygonalMesh, MeshError> {
    if p.n < 3 {
        return Err(MeshError::InvalidParameter(format!(
            "regular polygon needs n >= 3, got {}",
            p.n
        )));
    }
    if p.circumradius <= 0.0 {
        return Err(MeshError::InvalidParameter(
            "circumradius must be positive".into(),
        ));
    }
    let vertices = (0..p.n)
        .map(|i| {
            let t = 2.0 * std::f64::consts::PI * i as f64 / p.n as f64;
            p.center + Vector2::new(p.circumradius * t.cos(), p.circumradius * t.sin())
        })
        .collect();
    Ok(PolygonalMesh {
        vertices,
        cells: vec![(0..p.n).collect()],
        boundary_edges: (0..p.n)
            .map(|e| BoundaryEdge {
                cell: 0,
                local_edge: e,
                group: "boundary".into(),
            })
            .collect(),
    })
}

/// Splits every rectangle of a uniform grid into a convex quadrilateral and
/// a nonconvex hexagon along a three-segment zig-zag of amplitude
/// 0.25·cell-height.
fn nonconvex_split(p: &NonconvexParams) -> Result<PolygonalMesh, MeshError> {
    check_box(p.lo, p.hi)?;
    if p.nx == 0 || p.ny == 0 {
        return Err(MeshError::InvalidParameter(
            "grid needs at least one cell per direction".into(),
        ));
    }
    let (nx, ny) = (p.nx, p.ny);
    let dx = (p.hi.x - p.lo.x) / nx as f64;
    let dy = (p.hi.y - p.lo.y) / ny as f64;
    let v = |i: usize, j: usize| j * (nx + 1) + i;
    let mut vertices: Vec<Point2<f64>> = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push(Point2::new(
                p.lo.x + i as f64 * dx,
                p.lo.y + j as f64 * dy,
            ));
        }
    }
    let mut cells = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let x0 = p.lo.x + i as f64 * dx;
            let y0 = p.lo.y + j as f64 * dy;
            let p1 = vertices.len();
            vertices.push(Point2::new(x0 + dx / 3.0, y0 + 0.25 * dy));
            let p2 = vertices.len();
            vertices.push(Point2::new(x0 + 2.0 * dx / 3.0, y0 + 0.25 * dy));
            let (a, b, c, d) = (v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1));
            cells.push(vec![a, b, p2, p1]); // convex quadrilateral
            cells.push(vec![a, p1, p2, b, c, d]); // nonconvex hexagon
        }
    }
    let mut mesh = PolygonalMesh {
        vertices,
        cells,
        boundary_edges: vec![],
    };
    tag_box_boundary(&mut mesh, p.lo, p.hi)?;
    Ok(mesh)
}

/// 3×3 uniform grid on (0,1)² with `extra_nodes` additional vertices placed
/// round-robin on the central cell's edges (bottom, right, top, left). The
/// collinear vertices also join the neighboring cells' rings, so the mesh
/// stays conforming and only connectivity changes.
fn grid_with_inserted_nodes(p: &InsertedNodesParams) -> Result<PolygonalMesh, MeshError> {
    let base = GridParams::unit(3, 3);
    let mut mesh = uniform_grid(&base)?;
    // Central cell is (1,1) in row-major order, its neighbors share one
    // edge each: below, right, above, left.
    let central = 4usize;
    let neighbors = [1usize, 5, 7, 3];
    let mut per_edge = [0usize; 4];
    for t in 0..p.extra_nodes {
        per_edge[t % 4] += 1;
    }
    // Corner pairs of the central square, captured before any insertion
    // shifts the ring positions.
    let base_ring = mesh.cells[central].clone();
    let corners: Vec<(usize, usize)> = (0..4)
        .map(|e| (base_ring[e], base_ring[(e + 1) % 4]))
        .collect();
    for ((&q, &nb), &(a, b)) in per_edge.iter().zip(&neighbors).zip(&corners) {
        if q == 0 {
            continue;
        }
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        let ids: Vec<usize> = (1..=q)
            .map(|j| {
                let t = j as f64 / (q + 1) as f64;
                mesh.vertices.push(pa + (pb - pa) * t);
                mesh.vertices.len() - 1
            })
            .collect();
        insert_between(&mut mesh.cells[central], a, b, &ids);
        let mut rev = ids.clone();
        rev.reverse();
        insert_between(&mut mesh.cells[nb], b, a, &rev);
    }
    // Boundary tags are rebuilt because insertions shift local edge indices.
    mesh.boundary_edges.clear();
    tag_box_boundary(&mut mesh, base.lo, base.hi)?;
    Ok(mesh)
}

/// Inserts `ids` after `a` in the cyclic ring containing consecutive (a, b).
fn insert_between(ring: &mut Vec<usize>, a: usize, b: usize, ids: &[usize]) {
    let n = ring.len();
    let pos = (0..n)
        .find(|&i| ring[i] == a && ring[(i + 1) % n] == b)
        .expect("edge not found in ring");
    let mut out = Vec::with_capacity(n + ids.len());
    out.extend_from_slice(&ring[..=pos]);
    out.extend_from_slice(ids);
    out.extend_from_slice(&ring[pos + 1..]);
    *ring = out;
}

/// Internal settings shared by the plain and holed Voronoi families.
struct VoronoiSpec {
    n_seeds: usize,
    lloyd_iters: usize,
    lo: Point2<f64>,
    hi: Point2<f64>,
    min_cell_vertices: usize,
    /// (center, radius) of a circular hole to cut out, if any.
    hole: Option<(Point2<f64>, f64)>,
}

fn voronoi_mesh(
    p: &VoronoiParams,
    lloyd_iters: usize,
    seed: u64,
) -> Result<PolygonalMesh, MeshError> {
    voronoi_driver(
        &VoronoiSpec {
            n_seeds: p.n_seeds,
            lloyd_iters,
            lo: p.lo,
            hi: p.hi,
            min_cell_vertices: p.min_cell_vertices,
            hole: None,
        },
        seed,
    )
}

fn voronoi_mesh_with_hole(
    p: &HoledVoronoiParams,
    seed: u64,
) -> Result<PolygonalMesh, MeshError> {
    if !(p.hole_radius > 0.0) {
        return Err(MeshError::InvalidParameter(
            "hole radius must be positive".into(),
        ));
    }
    voronoi_driver(
        &VoronoiSpec {
            n_seeds: p.n_seeds,
            lloyd_iters: p.lloyd_iters,
            lo: p.lo,
            hi: p.hi,
            min_cell_vertices: p.min_cell_vertices,
            hole: Some((p.hole_center, p.hole_radius)),
        },
        seed,
    )
}

/// Clipped Voronoi diagram of random seeds in a box, with optional Lloyd
/// relaxation (seeds replaced by cell centroids) and an optional circular
/// hole. Conformity is obtained by welding the per-cell clip vertices into a
/// shared vertex pool, after which edges much shorter than their cells are
/// collapsed. A finalization failure spends a bonus smoothing iteration when
/// any remain and otherwise reseeds from the same deterministic stream.
fn voronoi_driver(spec: &VoronoiSpec, seed: u64) -> Result<PolygonalMesh, MeshError> {
    check_box(spec.lo, spec.hi)?;
    if spec.n_seeds == 0 {
        return Err(MeshError::InvalidParameter("need at least one seed".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last_err = None;
    for _attempt in 0..16 {
        let mut seeds = sample_seeds(spec, &mut rng)?;
        let mut iters_left = spec.lloyd_iters + 8;
        let mut done_requested = 0usize;
        loop {
            let mut cells = clip_all_cells(&seeds, spec.lo, spec.hi);
            if let Some((hc, a)) = spec.hole {
                for ring in &mut cells {
                    *ring = clip_circle_exterior(ring, hc, a);
                }
            }
            let smallest = cells.iter().map(Vec::len).min().unwrap_or(0);
            let smooth_more = done_requested < spec.lloyd_iters
                || (smallest < spec.min_cell_vertices && iters_left > 0);
            if !smooth_more {
                match finalize_voronoi(&cells, spec) {
                    Ok(mesh) => return Ok(mesh),
                    Err(e) => last_err = Some(e),
                }
                if iters_left == 0 {
                    break; // reseed
                }
            } else if iters_left == 0 {
                last_err = Some(MeshError::InvalidParameter(format!(
                    "Voronoi smoothing left a cell with fewer than {} vertices",
                    spec.min_cell_vertices
                )));
                break;
            }
            seeds = lloyd_step(&cells, &seeds, spec.hole);
            iters_left -= 1;
            done_requested += 1;
        }
    }
    Err(last_err.unwrap_or_else(|| {
        MeshError::InvalidParameter("Voronoi generation failed".into())
    }))
}

/// Welds the per-cell rings, collapses short edges, and validates and tags
/// the result.
fn finalize_voronoi(
    cells: &[Vec<Point2<f64>>],
    spec: &VoronoiSpec,
) -> Result<PolygonalMesh, MeshError> {
    let mut mesh = weld_cells(cells, spec.lo, spec.hi)?;
    collapse_short_edges(&mut mesh, spec);
    if mesh.cells.iter().map(Vec::len).min().unwrap_or(0) < spec.min_cell_vertices
        || mesh.validate().is_err()
    {
        return Err(MeshError::InvalidParameter(
            "welded Voronoi mesh failed validation".into(),
        ));
    }
    match spec.hole {
        None => tag_box_boundary(&mut mesh, spec.lo, spec.hi)?,
        Some((hc, a)) => tag_holed_boundary(&mut mesh, spec.lo, spec.hi, hc, a)?,
    }
    Ok(mesh)
}

/// Draws seeds uniformly in the box, rejecting any that fall inside the hole.
fn sample_seeds(
    spec: &VoronoiSpec,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Point2<f64>>, MeshError> {
    let mut seeds = Vec::with_capacity(spec.n_seeds);
    let mut rejected = 0usize;
    while seeds.len() < spec.n_seeds {
        let q = Point2::new(
            spec.lo.x + rng.gen::<f64>() * (spec.hi.x - spec.lo.x),
            spec.lo.y + rng.gen::<f64>() * (spec.hi.y - spec.lo.y),
        );
        if let Some((hc, a)) = spec.hole {
            if (q - hc).norm_squared() <= a * a {
                rejected += 1;
                if rejected > 100 * (spec.n_seeds + 100) {
                    return Err(MeshError::InvalidParameter(
                        "hole leaves almost no room for seeds".into(),
                    ));
                }
                continue;
            }
        }
        seeds.push(q);
    }
    Ok(seeds)
}

/// Moves every seed to the centroid of its (clipped) cell. Degenerate rings
/// keep their old seed, and a centroid that fell inside the hole is pushed
/// just outside so the next Voronoi pass stays well defined.
fn lloyd_step(
    cells: &[Vec<Point2<f64>>],
    seeds: &[Point2<f64>],
    hole: Option<(Point2<f64>, f64)>,
) -> Vec<Point2<f64>> {
    cells
        .iter()
        .zip(seeds)
        .map(|(ring, &old)| {
            if ring.len() < 3 {
                return old;
            }
            let area = polygon_signed_area(ring);
            if !(area > 0.0) {
                return old;
            }
            let mut c = polygon_centroid(ring, area);
            if let Some((hc, a)) = hole {
                let d = c - hc;
                let r = d.norm();
                if r <= 0.0 {
                    c = hc + Vector2::new(1.0001 * a, 0.0);
                } else if r < a {
                    c = hc + d * (1.0001 * a / r);
                }
            }
            c
        })
        .collect()
}

/// Edges shorter than this fraction of the smaller adjacent cell diameter
/// are collapsed. Near-cocircular seed quadruples give Voronoi vertices
/// arbitrarily close together; the resulting micro-edges carry nearly
/// coincident high-order edge nodes and wreck the conditioning of the
/// assembled system.
const COLLAPSE_RATIO: f64 = 0.05;

fn collapse_short_edges(mesh: &mut PolygonalMesh, spec: &VoronoiSpec) {
    for _pass in 0..8 {
        if !collapse_pass(mesh, spec) {
            break;
        }
    }
}

/// Collapses every edge below the length threshold whose endpoints have
/// compatible boundary constraints, at most one collapse per vertex per
/// pass. Returns whether anything changed.
fn collapse_pass(mesh: &mut PolygonalMesh, spec: &VoronoiSpec) -> bool {
    let diam: Vec<f64> = (0..mesh.cells.len())
        .map(|c| {
            let ring = &mesh.cells[c];
            let mut d = 0.0f64;
            for i in 0..ring.len() {
                for j in i + 1..ring.len() {
                    d = d.max((mesh.vertices[ring[j]] - mesh.vertices[ring[i]]).norm());
                }
            }
            d
        })
        .collect();
    let mut h_loc: HashMap<(usize, usize), f64> = HashMap::new();
    for (c, ring) in mesh.cells.iter().enumerate() {
        for i in 0..ring.len() {
            let (a, b) = (ring[i], ring[(i + 1) % ring.len()]);
            let e = h_loc.entry((a.min(b), a.max(b))).or_insert(f64::INFINITY);
            *e = e.min(diam[c]);
        }
    }
    // Shortest first, with the index pair as a deterministic tie-break.
    let mut cands: Vec<((usize, usize), f64)> = h_loc
        .iter()
        .filter_map(|(&(a, b), &h)| {
            let len = (mesh.vertices[b] - mesh.vertices[a]).norm();
            (len < COLLAPSE_RATIO * h).then_some(((a, b), len))
        })
        .collect();
    cands.sort_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)));
    let mut target: Vec<usize> = (0..mesh.vertices.len()).collect();
    let mut touched = vec![false; mesh.vertices.len()];
    let mut changed = false;
    for ((a, b), _) in cands {
        if touched[a] || touched[b] {
            continue;
        }
        let Some(m) = merged_position(mesh.vertices[a], mesh.vertices[b], spec) else {
            continue; // incompatible constraints: keep the short edge
        };
        touched[a] = true;
        touched[b] = true;
        target[b] = a;
        mesh.vertices[a] = m;
        changed = true;
    }
    if !changed {
        return false;
    }
    for ring in &mut mesh.cells {
        let mut out: Vec<usize> = Vec::with_capacity(ring.len());
        for &v in ring.iter() {
            let w = target[v];
            if out.last() != Some(&w) {
                out.push(w);
            }
        }
        while out.len() > 1 && out.first() == out.last() {
            out.pop();
        }
        *ring = out;
    }
    compact_vertices(mesh);
    true
}

/// Drops vertices no ring references and renumbers the rest in place,
/// preserving their relative order.
fn compact_vertices(mesh: &mut PolygonalMesh) {
    let mut used = vec![false; mesh.vertices.len()];
    for ring in &mesh.cells {
        for &v in ring {
            used[v] = true;
        }
    }
    let mut remap = vec![usize::MAX; mesh.vertices.len()];
    let mut kept = Vec::with_capacity(mesh.vertices.len());
    for (old, &u) in used.iter().enumerate() {
        if u {
            remap[old] = kept.len();
            kept.push(mesh.vertices[old]);
        }
    }
    for ring in &mut mesh.cells {
        for v in ring.iter_mut() {
            *v = remap[*v];
        }
    }
    mesh.vertices = kept;
}

/// Position for a merged vertex pair, or None when the endpoints carry
/// incompatible boundary constraints (say, a box side and the hole circle):
/// the merged vertex must stay on every boundary entity either endpoint
/// lies on, or tagged boundary polylines would bend.
fn merged_position(
    pa: Point2<f64>,
    pb: Point2<f64>,
    spec: &VoronoiSpec,
) -> Option<Point2<f64>> {
    let ca = boundary_entities(pa, spec);
    let cb = boundary_entities(pb, spec);
    if ca == cb {
        let mut m = Point2::from((pa.coords + pb.coords) * 0.5);
        // Same box sides: exact side coordinates average to themselves.
        // On the circle the midpoint of a chord is pulled back to the arc.
        if ca & CIRCLE_BIT != 0 {
            let (hc, a) = spec.hole?;
            let d = m - hc;
            let r = d.norm();
            if r < 0.5 * a {
                return None;
            }
            m = hc + d * (a / r);
        }
        Some(m)
    } else if cb & !ca == 0 {
        Some(pa)
    } else if ca & !cb == 0 {
        Some(pb)
    } else {
        None
    }
}

const CIRCLE_BIT: u8 = 16;

/// Bitmask of boundary entities (4 box sides, the hole circle) the point
/// lies on, using the same tolerances as the boundary taggers.
fn boundary_entities(p: Point2<f64>, spec: &VoronoiSpec) -> u8 {
    let tol = 1e-9 * (spec.hi - spec.lo).norm();
    let mut bits = 0u8;
    if p.x < spec.lo.x + tol {
        bits |= 1;
    }
    if p.x > spec.hi.x - tol {
        bits |= 2;
    }
    if p.y < spec.lo.y + tol {
        bits |= 4;
    }
    if p.y > spec.hi.y - tol {
        bits |= 8;
    }
    if let Some((hc, a)) = spec.hole {
        if ((p - hc).norm() - a).abs() <= 1e-6 * a {
            bits |= CIRCLE_BIT;
        }
    }
    bits
}

/// Clips a polygon to the exterior of the circle with center `c` and radius
/// `a`: vertices inside the circle are dropped and every edge–circle
/// crossing point is inserted, so each removed arc is replaced by its chord.
/// Assumes the polygon is small relative to the circle, which keeps the
/// clipped region connected.
fn clip_circle_exterior(poly: &[Point2<f64>], c: Point2<f64>, a: f64) -> Vec<Point2<f64>> {
    let mut out: Vec<Point2<f64>> = Vec::with_capacity(poly.len() + 4);
    for i in 0..poly.len() {
        let p0 = poly[i];
        let p1 = poly[(i + 1) % poly.len()];
        if (p0 - c).norm_squared() >= a * a {
            out.push(p0);
        }
        // Roots of |p0 + t (p1 - p0) - c|^2 = a^2, written with half the
        // linear coefficient: qa t^2 + 2 qb t + qc = 0.
        let d = p1 - p0;
        let f = p0 - c;
        let qa = d.norm_squared();
        let qb = f.dot(&d);
        let qc = f.norm_squared() - a * a;
        let disc = qb * qb - qa * qc;
        if disc <= 0.0 || qa == 0.0 {
            continue; // no crossing (tangency keeps the straight edge)
        }
        let s = -(qb + qb.signum() * disc.sqrt());
        let (mut t0, mut t1) = (s / qa, qc / s);
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
        }
        for t in [t0, t1] {
            if t > 0.0 && t < 1.0 {
                out.push(p0 + d * t);
            }
        }
    }
    out
}

/// Computes the clipped Voronoi cell of every seed. A uniform bucket grid
/// limits the half-plane clips to nearby seeds: once the next candidate ring
/// is farther than twice the current cell radius, no later seed can cut.
fn clip_all_cells(
    seeds: &[Point2<f64>],
    lo: Point2<f64>,
    hi: Point2<f64>,
) -> Vec<Vec<Point2<f64>>> {
    let n = seeds.len();
    let g = ((n as f64 / 2.0).sqrt().ceil() as usize).max(1);
    let bw = (hi.x - lo.x) / g as f64;
    let bh = (hi.y - lo.y) / g as f64;
    let bucket_of = |p: Point2<f64>| {
        let bx = (((p.x - lo.x) / bw) as usize).min(g - 1);
        let by = (((p.y - lo.y) / bh) as usize).min(g - 1);
        (bx, by)
    };
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); g * g];
    for (i, s) in seeds.iter().enumerate() {
        let (bx, by) = bucket_of(*s);
        buckets[by * g + bx].push(i);
    }
    let min_pitch = bw.min(bh);
    let box_poly = vec![
        Point2::new(lo.x, lo.y),
        Point2::new(hi.x, lo.y),
        Point2::new(hi.x, hi.y),
        Point2::new(lo.x, hi.y),
    ];
    (0..n)
        .map(|i| {
            let si = seeds[i];
            let (bx, by) = bucket_of(si);
            let mut poly = box_poly.clone();
            let mut r_max = poly
                .iter()
                .map(|v| (v - si).norm())
                .fold(0.0f64, f64::max);
            let mut ring = 0usize;
            loop {
                // Conservative distance lower bound to ring `ring`.
                if ring > 1 && (ring - 1) as f64 * min_pitch > 2.0 * r_max {
                    break;
                }
                let mut candidates: Vec<usize> = Vec::new();
                let r = ring as isize;
                let (bxi, byi) = (bx as isize, by as isize);
                for dy in -r..=r {
                    for dx in -r..=r {
                        if dx.abs().max(dy.abs()) != r {
                            continue;
                        }
                        let (cx, cy) = (bxi + dx, byi + dy);
                        if cx < 0 || cy < 0 || cx >= g as isize || cy >= g as isize {
                            continue;
                        }
                        candidates
                            .extend(buckets[cy as usize * g + cx as usize].iter().copied());
                    }
                }
                candidates.retain(|&j| j != i);
                candidates.sort_by(|&a, &b| {
                    (seeds[a] - si)
                        .norm_squared()
                        .total_cmp(&(seeds[b] - si).norm_squared())
                });
                for j in candidates {
                    let d = (seeds[j] - si).norm();
                    if d * 0.5 > r_max {
                        continue;
                    }
                    clip_by_bisector(&mut poly, si, seeds[j]);
                    if poly.is_empty() {
                        break;
                    }
                    r_max = poly.iter().map(|v| (v - si).norm()).fold(0.0f64, f64::max);
                }
                if poly.is_empty() || (ring + 1) >= 2 * g {
                    break;
                }
                ring += 1;
            }
            poly
        })
        .collect()
}

/// Sutherland–Hodgman clip of a convex polygon by the half-plane of points
/// closer to `keep` than to `other`.
fn clip_by_bisector(poly: &mut Vec<Point2<f64>>, keep: Point2<f64>, other: Point2<f64>) {
    let n = other - keep;
    let c = n.dot(&((keep.coords + other.coords) * 0.5));
    let inside = |p: &Point2<f64>| n.dot(&p.coords) <= c;
    let mut out: Vec<Point2<f64>> = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let curr = poly[i];
        let next = poly[(i + 1) % poly.len()];
        let (ci, ni) = (inside(&curr), inside(&next));
        if ci {
            out.push(curr);
        }
        if ci != ni {
            let denom = n.dot(&(next - curr));
            let t = (c - n.dot(&curr.coords)) / denom;
            out.push(curr + (next - curr) * t);
        }
    }
    *poly = out;
}

/// Merges the per-cell vertex lists of clipped Voronoi cells into a shared
/// vertex pool (tolerance 1e-9 of the box diagonal), snapping coordinates
/// onto the box lines so boundary classification is exact.
fn weld_cells(
    cells: &[Vec<Point2<f64>>],
    lo: Point2<f64>,
    hi: Point2<f64>,
) -> Result<PolygonalMesh, MeshError> {
    let diag = (hi - lo).norm();
    let tol = 1e-9 * diag;
    let snap_tol = 1e-12 * diag;
    let snap = |p: Point2<f64>| {
        let mut q = p;
        if (q.x - lo.x).abs() < snap_tol {
            q.x = lo.x;
        }
        if (q.x - hi.x).abs() < snap_tol {
            q.x = hi.x;
        }
        if (q.y - lo.y).abs() < snap_tol {
            q.y = lo.y;
        }
        if (q.y - hi.y).abs() < snap_tol {
            q.y = hi.y;
        }
        q
    };
    let key = |p: Point2<f64>| {
        (
            ((p.x - lo.x) / tol).floor() as i64,
            ((p.y - lo.y) / tol).floor() as i64,
        )
    };
    let mut pool: Vec<Point2<f64>> = Vec::new();
    let mut index: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let mut rings: Vec<Vec<usize>> = Vec::with_capacity(cells.len());
    for cell in cells {
        if cell.len() < 3 {
            return Err(MeshError::InvalidParameter(
                "clipped cell degenerated to fewer than 3 vertices".into(),
            ));
        }
        let mut ring: Vec<usize> = Vec::with_capacity(cell.len());
        for &raw in cell {
            let p = snap(raw);
            let (kx, ky) = key(p);
            let mut found = None;
            'search: for dx in -1..=1 {
                for dy in -1..=1 {
                    if let Some(ids) = index.get(&(kx + dx, ky + dy)) {
                        for &id in ids {
                            if (pool[id] - p).norm() <= tol {
                                found = Some(id);
                                break 'search;
                            }
                        }
                    }
                }
            }
            let id = found.unwrap_or_else(|| {
                pool.push(p);
                index.entry((kx, ky)).or_default().push(pool.len() - 1);
                pool.len() - 1
            });
            if ring.last() != Some(&id) {
                ring.push(id);
            }
        }
        while ring.len() > 1 && ring.first() == ring.last() {
            ring.pop();
        }
        if ring.len() < 3 {
            return Err(MeshError::InvalidParameter(
                "welding collapsed a Voronoi cell".into(),
            ));
        }
        rings.push(ring);
    }
    Ok(PolygonalMesh {
        vertices: pool,
        cells: rings,
        boundary_edges: vec![],
    })
}

/// Tags every once-used edge with the box side it lies on.
fn tag_box_boundary(
    mesh: &mut PolygonalMesh,
    lo: Point2<f64>,
    hi: Point2<f64>,
) -> Result<(), MeshError> {
    let tol = 1e-9 * (hi - lo).norm();
    tag_once_used_edges(mesh, "box side", |pa, pb| box_side(pa, pb, lo, hi, tol))
}

/// Like [`tag_box_boundary`], but edges whose endpoints both lie on the hole
/// circle are tagged `hole`. Box sides take precedence, so a chord that
/// degenerates onto a box line keeps the box tag.
fn tag_holed_boundary(
    mesh: &mut PolygonalMesh,
    lo: Point2<f64>,
    hi: Point2<f64>,
    hole_center: Point2<f64>,
    hole_radius: f64,
) -> Result<(), MeshError> {
    let tol = 1e-9 * (hi - lo).norm();
    let rtol = 1e-6 * hole_radius;
    tag_once_used_edges(mesh, "box side or hole chord", move |pa, pb| {
        box_side(pa, pb, lo, hi, tol).or_else(|| {
            let on = |p: Point2<f64>| ((p - hole_center).norm() - hole_radius).abs() <= rtol;
            (on(pa) && on(pb)).then_some("hole")
        })
    })
}

fn box_side(
    pa: Point2<f64>,
    pb: Point2<f64>,
    lo: Point2<f64>,
    hi: Point2<f64>,
    tol: f64,
) -> Option<&'static str> {
    if pa.x.max(pb.x) < lo.x + tol {
        Some("left")
    } else if pa.x.min(pb.x) > hi.x - tol {
        Some("right")
    } else if pa.y.max(pb.y) < lo.y + tol {
        Some("bottom")
    } else if pa.y.min(pb.y) > hi.y - tol {
        Some("top")
    } else {
        None
    }
}

/// Finds every once-used edge, classifies it with `classify`, and writes the
/// tag list. An unclassifiable boundary edge is a conformity defect.
fn tag_once_used_edges<F>(
    mesh: &mut PolygonalMesh,
    expected: &str,
    classify: F,
) -> Result<(), MeshError>
where
    F: Fn(Point2<f64>, Point2<f64>) -> Option<&'static str>,
{
    let mut counts: HashMap<(usize, usize), usize> = HashMap::new();
    for ring in &mesh.cells {
        for i in 0..ring.len() {
            let (a, b) = (ring[i], ring[(i + 1) % ring.len()]);
            *counts.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    let mut tags = Vec::new();
    for (c, ring) in mesh.cells.iter().enumerate() {
        for i in 0..ring.len() {
            let (a, b) = (ring[i], ring[(i + 1) % ring.len()]);
            if counts[&(a.min(b), a.max(b))] != 1 {
                continue;
            }
            let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
            let Some(group) = classify(pa, pb) else {
                return Err(MeshError::NotConforming(format!(
                    "boundary edge {i} of cell {c} lies on no {expected}"
                )));
            };
            tags.push(BoundaryEdge {
                cell: c,
                local_edge: i,
                group: group.into(),
            });
        }
    }
    mesh.boundary_edges = tags;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::element_geometry;
    use approx::assert_relative_eq;

    #[test]
    fn uniform_4x4_counts() {
        let mesh = generate_mesh(&MeshParams::Uniform(GridParams::unit(4, 4)), 0).unwrap();
        assert_eq!(mesh.n_cells(), 16);
        assert_eq!(mesh.n_vertices(), 25);
        mesh.validate().unwrap();
        let total: f64 = (0..16).map(|c| element_geometry(&mesh, c).area).sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-12);
        // 16 boundary edges, 4 per side.
        assert_eq!(mesh.boundary_edges.len(), 16);
        for side in ["left", "right", "bottom", "top"] {
            assert_eq!(
                mesh.boundary_edges.iter().filter(|b| b.group == side).count(),
                4
            );
        }
    }

    #[test]
    fn regular_hexagon_mesh() {
        let mesh = generate_mesh(&MeshParams::RegularNgon(NgonParams::unit(6)), 0).unwrap();
        assert_eq!(mesh.n_cells(), 1);
        assert_eq!(mesh.n_vertices(), 6);
        let g = element_geometry(&mesh, 0);
        assert_relative_eq!(g.area, 1.5 * 3f64.sqrt(), epsilon = 1e-13);
    }

    #[test]
    fn ngon_rejects_small_n() {
        assert!(generate_mesh(&MeshParams::RegularNgon(NgonParams::unit(2)), 0).is_err());
    }

    #[test]
    fn nonconvex_split_structure() {
        let p = NonconvexParams {
            nx: 4,
            ny: 2,
            lo: Point2::new(0.0, 0.0),
            hi: Point2::new(1.0, 1.0),
        };
        let mesh = generate_mesh(&MeshParams::NonconvexSplit(p), 0).unwrap();
        assert_eq!(mesh.n_cells(), 16);
        mesh.validate().unwrap();
        let total: f64 = (0..mesh.n_cells())
            .map(|c| element_geometry(&mesh, c).area)
            .sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-12);
        // Even cells are the convex quads, odd cells the hexagons.
        for c in 0..mesh.n_cells() {
            let expect = if c % 2 == 0 { 4 } else { 6 };
            assert_eq!(mesh.cells[c].len(), expect, "cell {c}");
        }
    }

    #[test]
    fn voronoi_deterministic_and_conforming() {
        let p = VoronoiParams::unit(16, 0);
        let a = generate_mesh(&MeshParams::VoronoiRandom(p.clone()), 42).unwrap();
        let b = generate_mesh(&MeshParams::VoronoiRandom(p), 42).unwrap();
        assert_eq!(a, b);
        a.validate().unwrap();
        assert_eq!(a.n_cells(), 16);
        let total: f64 = (0..a.n_cells()).map(|c| element_geometry(&a, c).area).sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn voronoi_seed_changes_mesh() {
        let p = VoronoiParams::unit(16, 0);
        let a = generate_mesh(&MeshParams::VoronoiRandom(p.clone()), 1).unwrap();
        let b = generate_mesh(&MeshParams::VoronoiRandom(p), 2).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn lloyd_iterations_shrink_centroid_drift() {
        // After the relaxation the seed-to-centroid drift must be small
        // relative to the typical cell size.
        let p = VoronoiParams::unit(16, 3);
        let mesh = generate_mesh(&MeshParams::VoronoiLloyd(p), 42).unwrap();
        mesh.validate().unwrap();
        assert_eq!(mesh.n_cells(), 16);
        let h_typ = (1.0f64 / 16.0).sqrt();
        // One more Lloyd pass moves centroids by less than 0.15·h.
        let centroids: Vec<_> = (0..16)
            .map(|c| element_geometry(&mesh, c).centroid)
            .collect();
        let again = {
            let cells = super::clip_all_cells(
                &centroids,
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 1.0),
            );
            cells
                .iter()
                .map(|ring| polygon_centroid(ring, polygon_signed_area(ring)))
                .collect::<Vec<_>>()
        };
        for (c0, c1) in centroids.iter().zip(&again) {
            assert!((c1 - c0).norm() < 0.15 * h_typ);
        }
    }

    #[test]
    fn voronoi_larger_mesh_valid() {
        let p = VoronoiParams::unit(256, 3);
        let mesh = generate_mesh(&MeshParams::VoronoiLloyd(p), 7).unwrap();
        mesh.validate().unwrap();
        assert_eq!(mesh.n_cells(), 256);
        let total: f64 = (0..mesh.n_cells())
            .map(|c| element_geometry(&mesh, c).area)
            .sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn voronoi_min_vertices_respected() {
        let mut p = VoronoiParams::unit(64, 3);
        p.min_cell_vertices = 4;
        let mesh = generate_mesh(&MeshParams::VoronoiLloyd(p), 5).unwrap();
        assert!(mesh.cells.iter().all(|r| r.len() >= 4));
    }

    #[test]
    fn circle_clip_bites_a_corner() {
        // Square corner overlapping the circle: the clipped polygon keeps
        // the outside vertices and closes with the chord (0,1)-(1,0).
        let square = vec![
            Point2::new(0.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(2.0, 2.0),
            Point2::new(0.0, 2.0),
        ];
        let clipped = clip_circle_exterior(&square, Point2::new(0.0, 0.0), 1.0);
        assert_eq!(clipped.len(), 5);
        assert_relative_eq!(polygon_signed_area(&clipped), 3.5, epsilon = 1e-12);
    }

    #[test]
    fn circle_clip_keeps_vertices_on_the_circle() {
        // Crossing points that coincide with polygon vertices must not be
        // duplicated: the unit square loses only its inside corner.
        let square = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ];
        let clipped = clip_circle_exterior(&square, Point2::new(0.0, 0.0), 1.0);
        assert_eq!(clipped.len(), 3);
        assert_relative_eq!(polygon_signed_area(&clipped), 0.5, epsilon = 1e-12);
    }

    fn quarter_plate_params(n_seeds: usize, min_cell_vertices: usize) -> HoledVoronoiParams {
        HoledVoronoiParams {
            n_seeds,
            lloyd_iters: 3,
            lo: Point2::new(0.0, 0.0),
            hi: Point2::new(5.0, 5.0),
            hole_center: Point2::new(0.0, 0.0),
            hole_radius: 1.0,
            min_cell_vertices,
        }
    }

    #[test]
    fn holed_voronoi_cuts_and_tags_the_hole() {
        let mesh =
            generate_mesh(&MeshParams::VoronoiHole(quarter_plate_params(250, 3)), 0).unwrap();
        mesh.validate().unwrap();
        assert_eq!(mesh.n_cells(), 250);
        // No vertex inside the hole. The chords over-cover the curved
        // boundary, so the total area exceeds the holed box by the (small)
        // circular segments between each chord and its arc.
        for v in &mesh.vertices {
            assert!(v.coords.norm() >= 1.0 - 1e-9);
        }
        let total: f64 = (0..mesh.n_cells())
            .map(|c| element_geometry(&mesh, c).area)
            .sum();
        let exact = 25.0 - 0.25 * std::f64::consts::PI;
        assert!(total > exact);
        assert!(total < exact + 0.05);
        let mut groups: Vec<_> = mesh
            .boundary_edges
            .iter()
            .map(|b| b.group.as_str())
            .collect();
        groups.sort_unstable();
        groups.dedup();
        assert_eq!(groups, ["bottom", "hole", "left", "right", "top"]);
        // The hole polyline is a chain of chords inscribed in the circle.
        let mut chord_len = 0.0;
        for be in mesh.boundary_edges.iter().filter(|b| b.group == "hole") {
            let (a, b) = mesh.edge_endpoints(be.cell, be.local_edge);
            let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
            assert_relative_eq!(pa.coords.norm(), 1.0, epsilon = 1e-9);
            assert_relative_eq!(pb.coords.norm(), 1.0, epsilon = 1e-9);
            chord_len += (pb - pa).norm();
        }
        let arc = std::f64::consts::FRAC_PI_2;
        assert!(chord_len < arc);
        assert!(chord_len > 0.95 * arc);
    }

    #[test]
    fn holed_voronoi_is_deterministic() {
        let a = generate_mesh(&MeshParams::VoronoiHole(quarter_plate_params(120, 3)), 9).unwrap();
        let b = generate_mesh(&MeshParams::VoronoiHole(quarter_plate_params(120, 3)), 9).unwrap();
        assert_eq!(a, b);
        let c = generate_mesh(&MeshParams::VoronoiHole(quarter_plate_params(120, 3)), 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn holed_voronoi_min_vertices_respected() {
        let mesh =
            generate_mesh(&MeshParams::VoronoiHole(quarter_plate_params(250, 4)), 0).unwrap();
        assert!(mesh.cells.iter().all(|r| r.len() >= 4));
    }

    #[test]
    fn inserted_nodes_geometry_is_base_grid() {
        for extra in [0usize, 3, 8] {
            let mesh = generate_mesh(
                &MeshParams::GridWithInsertedNodes(InsertedNodesParams {
                    extra_nodes: extra,
                }),
                0,
            )
            .unwrap();
            mesh.validate().unwrap();
            assert_eq!(mesh.n_cells(), 9);
            assert_eq!(mesh.cells[4].len(), 4 + extra);
            let total: f64 = (0..9).map(|c| element_geometry(&mesh, c).area).sum();
            assert_relative_eq!(total, 1.0, epsilon = 1e-12);
            // Every cell keeps the area of the base grid cell.
            for c in 0..9 {
                assert_relative_eq!(
                    element_geometry(&mesh, c).area,
                    1.0 / 9.0,
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn degenerate_box_rejected() {
        let p = GridParams {
            nx: 2,
            ny: 2,
            lo: Point2::new(0.0, 0.0),
            hi: Point2::new(0.0, 1.0),
        };
        assert!(generate_mesh(&MeshParams::Uniform(p), 0).is_err());
    }
}
