//! Polygonal meshes: storage, validation, per-element geometry, generators,
//! and a plain-text file format.

mod generate;
mod io;

pub use generate::{
    generate_mesh, GridParams, HoledVoronoiParams, InsertedNodesParams, MeshFamily, MeshParams,
    NgonParams, NonconvexParams, VoronoiParams,
};
pub use io::{read_mesh, write_mesh};

use nalgebra::{Point2, Vector2};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("cell {cell} is degenerate: {reason}")]
    DegenerateCell { cell: usize, reason: String },
    #[error("mesh is not conforming: {0}")]
    NotConforming(String),
    #[error("vertex perturbation makes cell {cell} self-intersecting")]
    SelfIntersection { cell: usize },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// A boundary edge reference: local edge `local_edge` of cell `cell`,
/// tagged with the boundary group it belongs to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub cell: usize,
    pub local_edge: usize,
    pub group: String,
}

/// A conforming decomposition of a planar region into simple polygons.
///
/// Cells are stored as counterclockwise rings of vertex indices. Interior
/// edges are shared by exactly two cells with opposite orientation; boundary
/// edges belong to exactly one cell and carry a group label.
#[derive(Debug, Clone, PartialEq)]
pub struct PolygonalMesh {
    pub vertices: Vec<Point2<f64>>,
    pub cells: Vec<Vec<usize>>,
    pub boundary_edges: Vec<BoundaryEdge>,
}

/// Geometric quantities of one polygonal cell used throughout assembly.
#[derive(Debug, Clone)]
pub struct ElementGeometry {
    /// Area centroid x_E.
    pub centroid: Point2<f64>,
    /// Diameter h_E: maximum pairwise vertex distance.
    pub diameter: f64,
    pub area: f64,
    /// Vertex ring (counterclockwise).
    pub vertices: Vec<Point2<f64>>,
    pub edges: Vec<EdgeGeometry>,
}

#[derive(Debug, Clone)]
pub struct EdgeGeometry {
    pub start: Point2<f64>,
    pub end: Point2<f64>,
    pub length: f64,
    /// Unit outward normal (n1, n2).
    pub normal: Vector2<f64>,
}

impl PolygonalMesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    /// Endpoint indices of local edge `e` of cell `c`.
    pub fn edge_endpoints(&self, c: usize, e: usize) -> (usize, usize) {
        let ring = &self.cells[c];
        (ring[e], ring[(e + 1) % ring.len()])
    }

    /// Checks every type invariant: ring sizes, orientation, vertex
    /// distinctness, and edge conformity. Returns the first violation found.
    pub fn validate(&self) -> Result<(), MeshError> {
        let diag = self.domain_diagonal();
        let tol = 1e-12 * diag;
        for (c, ring) in self.cells.iter().enumerate() {
            if ring.len() < 3 {
                return Err(MeshError::DegenerateCell {
                    cell: c,
                    reason: format!("ring has {} vertices", ring.len()),
                });
            }
            let mut sorted = ring.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != ring.len() {
                return Err(MeshError::DegenerateCell {
                    cell: c,
                    reason: "repeated vertex index in ring".into(),
                });
            }
            for i in 0..ring.len() {
                if ring[i] >= self.vertices.len() {
                    return Err(MeshError::DegenerateCell {
                        cell: c,
                        reason: format!("vertex index {} out of range", ring[i]),
                    });
                }
                let a = self.vertices[ring[i]];
                let b = self.vertices[ring[(i + 1) % ring.len()]];
                if (b - a).norm() <= tol {
                    return Err(MeshError::DegenerateCell {
                        cell: c,
                        reason: format!("edge {i} has zero length"),
                    });
                }
            }
            let pts: Vec<_> = ring.iter().map(|&v| self.vertices[v]).collect();
            if polygon_signed_area(&pts) <= 0.0 {
                return Err(MeshError::DegenerateCell {
                    cell: c,
                    reason: "ring is not counterclockwise".into(),
                });
            }
        }
        self.check_conformity()?;
        Ok(())
    }

    fn check_conformity(&self) -> Result<(), MeshError> {
        use std::collections::HashMap;
        // (min, max) vertex pair -> list of (cell, oriented forward?)
        let mut edge_map: HashMap<(usize, usize), Vec<(usize, bool)>> = HashMap::new();
        for (c, ring) in self.cells.iter().enumerate() {
            for i in 0..ring.len() {
                let (a, b) = (ring[i], ring[(i + 1) % ring.len()]);
                let key = (a.min(b), a.max(b));
                edge_map.entry(key).or_default().push((c, a < b));
            }
        }
        for (key, users) in &edge_map {
            match users.len() {
                1 => {}
                2 => {
                    if users[0].1 == users[1].1 {
                        return Err(MeshError::NotConforming(format!(
                            "edge {:?} traversed in the same direction by cells {} and {}",
                            key, users[0].0, users[1].0
                        )));
                    }
                }
                n => {
                    return Err(MeshError::NotConforming(format!(
                        "edge {key:?} is shared by {n} cells"
                    )))
                }
            }
        }
        // Every tagged boundary edge must be a true boundary edge.
        for be in &self.boundary_edges {
            if be.cell >= self.cells.len() || be.local_edge >= self.cells[be.cell].len() {
                return Err(MeshError::NotConforming(format!(
                    "boundary tag refers to missing edge {} of cell {}",
                    be.local_edge, be.cell
                )));
            }
            let (a, b) = self.edge_endpoints(be.cell, be.local_edge);
            let key = (a.min(b), a.max(b));
            if edge_map.get(&key).map(Vec::len) != Some(1) {
                return Err(MeshError::NotConforming(format!(
                    "boundary tag on interior edge {} of cell {}",
                    be.local_edge, be.cell
                )));
            }
        }
        Ok(())
    }

    fn domain_diagonal(&self) -> f64 {
        let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.vertices {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        if self.vertices.is_empty() {
            0.0
        } else {
            (hi - lo).norm()
        }
    }
}

/// Computes centroid, diameter, area, and per-edge data of cell `cell`.
pub fn element_geometry(mesh: &PolygonalMesh, cell: usize) -> ElementGeometry {
    let ring = &mesh.cells[cell];
    let pts: Vec<Point2<f64>> = ring.iter().map(|&v| mesh.vertices[v]).collect();
    element_geometry_of_ring(&pts)
}

/// Geometry of a standalone counterclockwise vertex ring.
pub fn element_geometry_of_ring(pts: &[Point2<f64>]) -> ElementGeometry {
    let n = pts.len();
    let area = polygon_signed_area(pts);
    let centroid = polygon_centroid(pts, area);
    let mut diameter: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            diameter = diameter.max((pts[j] - pts[i]).norm());
        }
    }
    let edges = (0..n)
        .map(|i| {
            let a = pts[i];
            let b = pts[(i + 1) % n];
            let d = b - a;
            let length = d.norm();
            EdgeGeometry {
                start: a,
                end: b,
                length,
                // For a counterclockwise ring the outward normal is the
                // edge direction rotated clockwise by 90 degrees.
                normal: Vector2::new(d.y, -d.x) / length,
            }
        })
        .collect();
    ElementGeometry {
        centroid,
        diameter,
        area,
        vertices: pts.to_vec(),
        edges,
    }
}

/// Shoelace signed area; positive for counterclockwise rings.
pub fn polygon_signed_area(pts: &[Point2<f64>]) -> f64 {
    let n = pts.len();
    let mut twice = 0.0;
    for i in 0..n {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        twice += a.x * b.y - b.x * a.y;
    }
    0.5 * twice
}

/// Area centroid of a simple polygon with precomputed signed area.
pub fn polygon_centroid(pts: &[Point2<f64>], area: f64) -> Point2<f64> {
    let n = pts.len();
    let (mut cx, mut cy) = (0.0, 0.0);
    for i in 0..n {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        let w = a.x * b.y - b.x * a.y;
        cx += (a.x + b.x) * w;
        cy += (a.y + b.y) * w;
    }
    Point2::new(cx / (6.0 * area), cy / (6.0 * area))
}

/// Returns a copy of the mesh with one coordinate of one vertex shifted by
/// `delta`. Fails if any incident cell becomes non-simple or flips.
pub fn perturb_vertex(
    mesh: &PolygonalMesh,
    vertex: usize,
    component: usize,
    delta: f64,
) -> Result<PolygonalMesh, MeshError> {
    assert!(component < 2, "component must be 0 (x) or 1 (y)");
    let mut out = mesh.clone();
    out.vertices[vertex][component] += delta;
    for (c, ring) in out.cells.iter().enumerate() {
        if !ring.contains(&vertex) {
            continue;
        }
        let pts: Vec<_> = ring.iter().map(|&v| out.vertices[v]).collect();
        if polygon_signed_area(&pts) <= 0.0 || !is_simple_polygon(&pts) {
            return Err(MeshError::SelfIntersection { cell: c });
        }
    }
    Ok(out)
}

/// Tests that no two non-adjacent edges of the ring intersect.
pub fn is_simple_polygon(pts: &[Point2<f64>]) -> bool {
    let n = pts.len();
    for i in 0..n {
        let (a1, a2) = (pts[i], pts[(i + 1) % n]);
        for j in i + 1..n {
            // Skip edges adjacent to edge i (they share a vertex).
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            let (b1, b2) = (pts[j], pts[(j + 1) % n]);
            if segments_intersect(a1, a2, b1, b2) {
                return false;
            }
        }
    }
    true
}

fn segments_intersect(a1: Point2<f64>, a2: Point2<f64>, b1: Point2<f64>, b2: Point2<f64>) -> bool {
    let cross = |o: Point2<f64>, p: Point2<f64>, q: Point2<f64>| {
        (p.x - o.x) * (q.y - o.y) - (q.x - o.x) * (p.y - o.y)
    };
    let d1 = cross(b1, b2, a1);
    let d2 = cross(b1, b2, a2);
    let d3 = cross(a1, a2, b1);
    let d4 = cross(a1, a2, b2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on_segment = |p: Point2<f64>, q: Point2<f64>, r: Point2<f64>| {
        r.x >= p.x.min(q.x) && r.x <= p.x.max(q.x) && r.y >= p.y.min(q.y) && r.y <= p.y.max(q.y)
    };
    (d1 == 0.0 && on_segment(b1, b2, a1))
        || (d2 == 0.0 && on_segment(b1, b2, a2))
        || (d3 == 0.0 && on_segment(a1, a2, b1))
        || (d4 == 0.0 && on_segment(a1, a2, b2))
}
