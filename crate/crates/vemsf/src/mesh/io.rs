//! Plain-text mesh files.
//!
//! Format (line oriented):
//! ```text
//! vemsf-mesh 1
//! vertices N
//! x y                  (N lines, 17 significant digits)
//! cells M
//! n i1 ... in          (M lines)
//! boundary B
//! cell local_edge group  (B lines)
//! ```

use super::{polygon_signed_area, BoundaryEdge, MeshError, PolygonalMesh};
use nalgebra::Point2;
use std::fmt::Write as _;
use std::path::Path;

pub fn write_mesh(mesh: &PolygonalMesh, path: &Path) -> Result<(), MeshError> {
    let mut out = String::new();
    out.push_str("vemsf-mesh 1\n");
    let _ = writeln!(out, "vertices {}", mesh.vertices.len());
    for v in &mesh.vertices {
        let _ = writeln!(out, "{:.16e} {:.16e}", v.x, v.y);
    }
    let _ = writeln!(out, "cells {}", mesh.cells.len());
    for ring in &mesh.cells {
        let _ = write!(out, "{}", ring.len());
        for &i in ring {
            let _ = write!(out, " {i}");
        }
        out.push('\n');
    }
    let _ = writeln!(out, "boundary {}", mesh.boundary_edges.len());
    for be in &mesh.boundary_edges {
        let _ = writeln!(out, "{} {} {}", be.cell, be.local_edge, be.group);
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads and validates a mesh file. Clockwise rings are reoriented in place
/// and reported in the returned warning list (boundary tags are remapped to
/// the reversed local edge indices).
pub fn read_mesh(path: &Path) -> Result<(PolygonalMesh, Vec<String>), MeshError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let mut warnings = Vec::new();

    let mut next_line = |expect: &str| -> Result<(usize, &str), MeshError> {
        lines
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or_else(|| MeshError::Parse {
                line: 0,
                message: format!("unexpected end of file, expected {expect}"),
            })
    };

    let (lineno, header) = next_line("header")?;
    if header.trim() != "vemsf-mesh 1" {
        return Err(MeshError::Parse {
            line: lineno,
            message: format!("bad header '{header}', expected 'vemsf-mesh 1'"),
        });
    }

    let parse_count = |line: &str, lineno: usize, keyword: &str| -> Result<usize, MeshError> {
        let mut it = line.split_whitespace();
        match (it.next(), it.next(), it.next()) {
            (Some(k), Some(n), None) if k == keyword => {
                n.parse().map_err(|_| MeshError::Parse {
                    line: lineno,
                    message: format!("bad count '{n}'"),
                })
            }
            _ => Err(MeshError::Parse {
                line: lineno,
                message: format!("expected '{keyword} <count>', got '{line}'"),
            }),
        }
    };

    let (lineno, l) = next_line("vertices")?;
    let n_vertices = parse_count(l, lineno, "vertices")?;
    let mut vertices = Vec::with_capacity(n_vertices);
    for _ in 0..n_vertices {
        let (lineno, l) = next_line("vertex coordinates")?;
        let nums: Vec<&str> = l.split_whitespace().collect();
        if nums.len() != 2 {
            return Err(MeshError::Parse {
                line: lineno,
                message: format!("expected 'x y', got '{l}'"),
            });
        }
        let parse = |s: &str| -> Result<f64, MeshError> {
            s.parse().map_err(|_| MeshError::Parse {
                line: lineno,
                message: format!("bad coordinate '{s}'"),
            })
        };
        vertices.push(Point2::new(parse(nums[0])?, parse(nums[1])?));
    }

    let (lineno, l) = next_line("cells")?;
    let n_cells = parse_count(l, lineno, "cells")?;
    let mut cells = Vec::with_capacity(n_cells);
    for _ in 0..n_cells {
        let (lineno, l) = next_line("cell ring")?;
        let mut it = l.split_whitespace();
        let n: usize = it
            .next()
            .ok_or(MeshError::Parse {
                line: lineno,
                message: "empty cell line".into(),
            })?
            .parse()
            .map_err(|_| MeshError::Parse {
                line: lineno,
                message: "bad vertex count".into(),
            })?;
        let ring: Vec<usize> = it
            .map(|s| {
                s.parse().map_err(|_| MeshError::Parse {
                    line: lineno,
                    message: format!("bad vertex index '{s}'"),
                })
            })
            .collect::<Result<_, _>>()?;
        if ring.len() != n {
            return Err(MeshError::Parse {
                line: lineno,
                message: format!("cell declares {n} vertices but lists {}", ring.len()),
            });
        }
        cells.push(ring);
    }

    let (lineno, l) = next_line("boundary")?;
    let n_boundary = parse_count(l, lineno, "boundary")?;
    let mut boundary_edges = Vec::with_capacity(n_boundary);
    for _ in 0..n_boundary {
        let (lineno, l) = next_line("boundary edge")?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(MeshError::Parse {
                line: lineno,
                message: format!("expected 'cell local_edge group', got '{l}'"),
            });
        }
        let parse = |s: &str| -> Result<usize, MeshError> {
            s.parse().map_err(|_| MeshError::Parse {
                line: lineno,
                message: format!("bad index '{s}'"),
            })
        };
        boundary_edges.push(BoundaryEdge {
            cell: parse(toks[0])?,
            local_edge: parse(toks[1])?,
            group: toks[2].to_string(),
        });
    }

    let mut mesh = PolygonalMesh {
        vertices,
        cells,
        boundary_edges,
    };

    // Reorient clockwise rings, remapping boundary tags on those cells.
    for c in 0..mesh.cells.len() {
        let pts: Vec<_> = mesh.cells[c].iter().map(|&v| mesh.vertices[v]).collect();
        if pts.len() >= 3 && polygon_signed_area(&pts) < 0.0 {
            let n = mesh.cells[c].len();
            mesh.cells[c].reverse();
            for be in &mut mesh.boundary_edges {
                if be.cell == c {
                    be.local_edge = if be.local_edge == n - 1 {
                        n - 1
                    } else {
                        n - 2 - be.local_edge
                    };
                }
            }
            warnings.push(format!("cell {c}: clockwise ring reoriented"));
        }
    }

    mesh.validate()?;
    Ok((mesh, warnings))
}
