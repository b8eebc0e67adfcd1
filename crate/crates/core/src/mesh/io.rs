//! Plain-text mesh format and legacy VTK output.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use super::{BoundaryEdge, BoundaryLabel, Mesh, Region};
use crate::error::{FsiError, Result};

/// Writes the three-section text format with 17 significant digits.
pub fn write_text<W: Write>(mesh: &Mesh, mut w: W) -> Result<()> {
    writeln!(w, "# next_id {}", mesh.next_id)?;
    writeln!(w, "vertices {}", mesh.vertices.len())?;
    for (id, p) in mesh.vertex_ids.iter().zip(&mesh.vertices) {
        writeln!(w, "{id} {:.16e} {:.16e}", p[0], p[1])?;
    }
    writeln!(w, "triangles {}", mesh.triangles.len())?;
    for (t, (tri, r)) in mesh.triangles.iter().zip(&mesh.regions).enumerate() {
        let ids = tri.map(|v| mesh.vertex_ids[v]);
        writeln!(w, "{t} {} {} {} {}", ids[0], ids[1], ids[2], r.as_str())?;
    }
    writeln!(w, "boundary_edges {}", mesh.boundary_edges.len())?;
    for e in &mesh.boundary_edges {
        writeln!(w, "{} {} {}", mesh.vertex_ids[e.v[0]], mesh.vertex_ids[e.v[1]], e.label.as_str())?;
    }
    Ok(())
}

fn perr(line: usize, msg: impl Into<String>) -> FsiError {
    FsiError::Parse { line, msg: msg.into() }
}

/// Reads a mesh written by [`write_text`].
pub fn read_text<R: BufRead>(r: R) -> Result<Mesh> {
    let mut lines = Vec::new();
    let mut next_id = None;
    for (k, l) in r.lines().enumerate() {
        let l = l?;
        let t = l.trim();
        if let Some(rest) = t.strip_prefix("# next_id") {
            next_id = Some(rest.trim().parse::<u64>().map_err(|e| perr(k + 1, e.to_string()))?);
        } else if !t.is_empty() && !t.starts_with('#') {
            lines.push((k + 1, t.to_string()));
        }
    }
    let mut it = lines.into_iter();
    let mut section = |name: &str| -> Result<(usize, Vec<(usize, Vec<String>)>)> {
        let (ln, head) = it.next().ok_or_else(|| perr(0, format!("missing section {name}")))?;
        let mut parts = head.split_whitespace();
        if parts.next() != Some(name) {
            return Err(perr(ln, format!("expected section {name}")));
        }
        let n: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(|| perr(ln, "bad count"))?;
        let mut rows = Vec::with_capacity(n);
        for _ in 0..n {
            let (l, s) = it.next().ok_or_else(|| perr(ln, format!("section {name} is truncated")))?;
            rows.push((l, s.split_whitespace().map(str::to_string).collect()));
        }
        Ok((ln, rows))
    };
    let num = |l: usize, s: &str| s.parse::<f64>().map_err(|e| perr(l, e.to_string()));
    let int = |l: usize, s: &str| s.parse::<u64>().map_err(|e| perr(l, e.to_string()));

    let (_, vrows) = section("vertices")?;
    let mut vertices = Vec::with_capacity(vrows.len());
    let mut vertex_ids = Vec::with_capacity(vrows.len());
    let mut index = HashMap::new();
    for (l, f) in &vrows {
        if f.len() != 3 {
            return Err(perr(*l, "vertex line needs id x y"));
        }
        let id = int(*l, &f[0])?;
        if index.insert(id, vertices.len()).is_some() {
            return Err(perr(*l, format!("duplicate vertex id {id}")));
        }
        vertex_ids.push(id);
        vertices.push([num(*l, &f[1])?, num(*l, &f[2])?]);
    }
    let lookup = |l: usize, s: &str| -> Result<usize> {
        let id = int(l, s)?;
        index.get(&id).copied().ok_or_else(|| perr(l, format!("unknown vertex id {id}")))
    };
    let (_, trows) = section("triangles")?;
    let mut triangles = Vec::with_capacity(trows.len());
    let mut regions = Vec::with_capacity(trows.len());
    for (l, f) in &trows {
        if f.len() != 5 {
            return Err(perr(*l, "triangle line needs id v1 v2 v3 region"));
        }
        triangles.push([lookup(*l, &f[1])?, lookup(*l, &f[2])?, lookup(*l, &f[3])?]);
        regions.push(match f[4].as_str() {
            "fluid" => Region::Fluid,
            "solid" => Region::Solid,
            other => return Err(perr(*l, format!("unknown region {other}"))),
        });
    }
    let (_, brows) = section("boundary_edges")?;
    let mut boundary_edges = Vec::with_capacity(brows.len());
    for (l, f) in &brows {
        if f.len() != 3 {
            return Err(perr(*l, "edge line needs v1 v2 label"));
        }
        let label = BoundaryLabel::parse(&f[2]).ok_or_else(|| perr(*l, format!("unknown label {}", f[2])))?;
        boundary_edges.push(BoundaryEdge { v: [lookup(*l, &f[0])?, lookup(*l, &f[1])?], label });
    }
    let n_solid_vertices = triangles
        .iter()
        .zip(&regions)
        .filter(|(_, r)| **r == Region::Solid)
        .flat_map(|(t, _)| t.iter().copied())
        .max()
        .map_or(0, |m| m + 1);
    Ok(Mesh {
        next_id: next_id.unwrap_or_else(|| vertex_ids.iter().max().map_or(0, |m| m + 1)),
        vertices,
        vertex_ids,
        triangles,
        regions,
        boundary_edges,
        n_solid_vertices,
    })
}

/// Point fields written alongside the mesh.
#[derive(Default)]
pub struct VtkFields<'a> {
    pub velocity: Option<&'a [[f64; 2]]>,
    pub pressure: Option<&'a [f64]>,
    pub displacement: Option<&'a [[f64; 2]]>,
}

/// Legacy ASCII unstructured grid with point data and a per-cell region tag.
pub fn write_vtk<W: Write>(mesh: &Mesh, fields: &VtkFields<'_>, mut w: W) -> Result<()> {
    let n = mesh.num_vertices();
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "monofsi snapshot")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {n} double")?;
    for p in &mesh.vertices {
        writeln!(w, "{:.16e} {:.16e} 0", p[0], p[1])?;
    }
    let m = mesh.triangles.len();
    writeln!(w, "CELLS {m} {}", 4 * m)?;
    for t in &mesh.triangles {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(w, "CELL_TYPES {m}")?;
    for _ in 0..m {
        writeln!(w, "5")?;
    }
    writeln!(w, "CELL_DATA {m}")?;
    writeln!(w, "SCALARS cell_region int 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for r in &mesh.regions {
        writeln!(w, "{}", (*r == Region::Solid) as i32)?;
    }
    writeln!(w, "POINT_DATA {n}")?;
    let vec_field = |w: &mut W, name: &str, f: Option<&[[f64; 2]]>| -> Result<()> {
        writeln!(w, "VECTORS {name} double")?;
        for i in 0..n {
            let v = f.and_then(|f| f.get(i)).copied().unwrap_or([0.0; 2]);
            writeln!(w, "{:.16e} {:.16e} 0", v[0], v[1])?;
        }
        Ok(())
    };
    vec_field(&mut w, "velocity", fields.velocity)?;
    writeln!(w, "SCALARS pressure double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for i in 0..n {
        writeln!(w, "{:.16e}", fields.pressure.and_then(|p| p.get(i)).copied().unwrap_or(0.0))?;
    }
    vec_field(&mut w, "displacement", fields.displacement)?;
    writeln!(w, "SCALARS region int 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for i in 0..n {
        writeln!(w, "{}", (i < mesh.n_solid_vertices) as i32)?;
    }
    Ok(())
}
