//! Regeneration of the fluid triangulation around a moved solid.

use std::collections::HashMap;

use super::build::{combine, FluidInput};
use super::{check_valid, BoundaryLabel, Mesh, Point, Region};
use crate::error::{FsiError, Result};

/// Retriangulates the fluid with the largest fluid triangle area of `mesh`
/// (ignoring triangles attached to the solid) as the size bound.
pub fn remesh_fluid(mesh: &Mesh, min_angle_deg: f64) -> Result<Mesh> {
    let max_area = mesh
        .fluid_triangles()
        .filter(|&t| mesh.triangles[t].iter().all(|&v| v >= mesh.n_solid_vertices))
        .map(|t| mesh.area(t))
        .fold(0.0, f64::max);
    let max_area = if max_area > 0.0 { max_area } else { mesh.total_area() };
    remesh_fluid_with_area(mesh, min_angle_deg, max_area)
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let s = if len2 > 0.0 { (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
    ((p[0] - a[0] - s * d[0]).powi(2) + (p[1] - a[1] - s * d[1]).powi(2)).sqrt()
}

/// Crossing-number test against a set of closed edge loops.
fn inside_edges(p: Point, verts: &[Point], edges: &[[usize; 2]]) -> bool {
    let mut inside = false;
    for e in edges {
        let (a, b) = (verts[e[0]], verts[e[1]]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Rebuilds the fluid region by constrained Delaunay triangulation.
///
/// The fluid boundary (outer walls and interface) keeps its vertices and
/// edges, the solid is copied unchanged, and the interior vertices of the
/// previous fluid mesh are reused as seeds unless the solid has moved onto or
/// next to them.
pub fn remesh_fluid_with_area(mesh: &Mesh, min_angle_deg: f64, max_area: f64) -> Result<Mesh> {
    if mesh.fluid_triangles().next().is_none() {
        return Ok(mesh.clone());
    }
    let ns = mesh.n_solid_vertices;
    let edges = mesh.edge_map();
    let mut on_fluid_boundary = vec![false; mesh.num_vertices()];
    let mut fluid_boundary = Vec::new();
    let mut sigma = Vec::new();
    let mut solid_boundary = Vec::new();
    for owners in edges.values() {
        let fluid: Vec<_> = owners.iter().filter(|(t, _)| mesh.regions[*t] == Region::Fluid).collect();
        let solid: Vec<_> = owners.iter().filter(|(t, _)| mesh.regions[*t] == Region::Solid).collect();
        if fluid.len() == 1 {
            let d = fluid[0].1;
            fluid_boundary.push(d);
            on_fluid_boundary[d[0]] = true;
            on_fluid_boundary[d[1]] = true;
            if solid.len() == 1 {
                sigma.push(d);
            }
        }
        if solid.len() == 1 {
            solid_boundary.push(solid[0].1);
        }
    }
    let in_fluid = mesh.fluid_vertex_mask();

    let mut input = FluidInput { points: Vec::new(), solid_of: Vec::new(), ids: Vec::new(), segments: Vec::new() };
    let mut slot = vec![usize::MAX; mesh.num_vertices()];
    for v in (0..mesh.num_vertices()).filter(|&v| on_fluid_boundary[v]) {
        slot[v] = input.points.len();
        input.points.push(mesh.vertices[v]);
        input.solid_of.push((v < ns).then_some(v));
        input.ids.push((v >= ns).then_some(mesh.vertex_ids[v]));
    }
    for d in &fluid_boundary {
        input.segments.push([slot[d[0]], slot[d[1]]]);
    }
    for v in ns..mesh.num_vertices() {
        if on_fluid_boundary[v] || !in_fluid[v] {
            continue;
        }
        let p = mesh.vertices[v];
        if inside_edges(p, &mesh.vertices, &solid_boundary) {
            continue;
        }
        let near = sigma.iter().any(|e| {
            let (a, b) = (mesh.vertices[e[0]], mesh.vertices[e[1]]);
            let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
            segment_distance(p, a, b) < 0.5 * len
        });
        if near {
            continue;
        }
        input.points.push(p);
        input.solid_of.push(None);
        input.ids.push(Some(mesh.vertex_ids[v]));
    }

    let mut labels: HashMap<(u64, u64), BoundaryLabel> = HashMap::new();
    let mut outer: Vec<(Point, Point, BoundaryLabel)> = Vec::new();
    for e in mesh.boundary_edges.iter().filter(|e| e.label != BoundaryLabel::Sigma) {
        let (a, b) = (mesh.vertex_ids[e.v[0]], mesh.vertex_ids[e.v[1]]);
        labels.insert((a.min(b), a.max(b)), e.label);
        outer.push((mesh.vertices[e.v[0]], mesh.vertices[e.v[1]], e.label));
    }
    let scale = mesh.total_area().abs().sqrt().max(1e-300);
    let labeler = move |p: &[Point], ids: &[u64], e: [usize; 2]| {
        let (a, b) = (ids[e[0]], ids[e[1]]);
        if let Some(l) = labels.get(&(a.min(b), a.max(b))) {
            return *l;
        }
        let m = [(p[e[0]][0] + p[e[1]][0]) / 2.0, (p[e[0]][1] + p[e[1]][1]) / 2.0];
        outer
            .iter()
            .map(|(a, b, l)| (segment_distance(m, *a, *b), *l))
            .filter(|(d, _)| *d < 1e-9 * scale)
            .map(|(_, l)| l)
            .next()
            .unwrap_or(BoundaryLabel::GammaWall)
    };

    let (solid_vertices, solid_tris) = mesh.solid_part();
    let out = combine(
        &solid_vertices,
        &mesh.vertex_ids[..ns],
        &solid_tris,
        &input,
        max_area,
        min_angle_deg,
        mesh.next_id,
        &labeler,
    )?;
    if let super::Validity::Invalid(bad) = check_valid(&out) {
        return Err(FsiError::Remesh(format!("{} degenerate triangle(s) after remeshing", bad.len())));
    }
    Ok(out)
}
