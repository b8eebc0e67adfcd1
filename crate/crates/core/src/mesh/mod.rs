//! Region-labelled triangulations of the fluid–solid domain.
//!
//! Solid vertices always occupy the index range `0..n_solid_vertices`, in the
//! same order as the reference configuration, and solid triangles keep their
//! index triples across motion and remeshing.

mod build;
mod io;
mod locate;
mod remesh;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{FsiError, Result};

pub use build::{build_solid_block, DEFAULT_MIN_ANGLE, build_box_with_solid_squares, build_channel_mesh, build_flustruk_mesh, FlustrukGeometry};
pub use io::{read_text, write_text, write_vtk, VtkFields};
pub use locate::{interpolate_to_new_mesh, Location, Locator};
pub(crate) use locate::transfer_with;
pub use remesh::{remesh_fluid, remesh_fluid_with_area};

pub type Point = [f64; 2];

/// Smallest signed area accepted by [`check_valid`].
pub const AREA_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    Fluid,
    Solid,
}

impl Region {
    pub fn as_str(self) -> &'static str {
        match self {
            Region::Fluid => "fluid",
            Region::Solid => "solid",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BoundaryLabel {
    GammaIn,
    GammaOut,
    GammaWall,
    Sigma,
}

impl BoundaryLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryLabel::GammaIn => "Gamma_in",
            BoundaryLabel::GammaOut => "Gamma_out",
            BoundaryLabel::GammaWall => "Gamma_wall",
            BoundaryLabel::Sigma => "Sigma",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "Gamma_in" => Some(BoundaryLabel::GammaIn),
            "Gamma_out" => Some(BoundaryLabel::GammaOut),
            "Gamma_wall" => Some(BoundaryLabel::GammaWall),
            "Sigma" => Some(BoundaryLabel::Sigma),
            _ => None,
        }
    }
}

/// A labelled edge. Outer edges are directed with the mesh on their left,
/// interface edges with the fluid on their left.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub v: [usize; 2],
    pub label: BoundaryLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    pub vertex_ids: Vec<u64>,
    pub triangles: Vec<[usize; 3]>,
    pub regions: Vec<Region>,
    pub boundary_edges: Vec<BoundaryEdge>,
    pub n_solid_vertices: usize,
    /// First id not yet handed out.
    pub next_id: u64,
}

/// Result of [`check_valid`].
#[derive(Debug, Clone, PartialEq)]
pub enum Validity {
    Ok,
    /// Triangles whose signed area is at or below the floor, with that area.
    Invalid(Vec<(usize, f64)>),
}

impl Validity {
    pub fn is_ok(&self) -> bool {
        matches!(self, Validity::Ok)
    }
}

/// One connected component of the fluid–solid interface.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Polyline {
    /// Vertex indices in traversal order; a closed loop does not repeat its first vertex.
    pub vertices: Vec<usize>,
    pub ids: Vec<u64>,
    pub closed: bool,
}

pub fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

impl Mesh {
    /// Assembles a mesh from vertices and region-tagged triangles, deriving the
    /// boundary and interface edges. `label_outer` names every edge that lies on
    /// the outer boundary of the whole mesh.
    pub fn from_parts(
        vertices: Vec<Point>,
        vertex_ids: Vec<u64>,
        triangles: Vec<[usize; 3]>,
        regions: Vec<Region>,
        label_outer: &dyn Fn(&[Point], &[u64], [usize; 2]) -> BoundaryLabel,
    ) -> Result<Mesh> {
        if vertex_ids.len() != vertices.len() {
            return Err(FsiError::LengthMismatch { expected: vertices.len(), got: vertex_ids.len() });
        }
        if regions.len() != triangles.len() {
            return Err(FsiError::LengthMismatch { expected: triangles.len(), got: regions.len() });
        }
        let mut solid_max = 0usize;
        let mut has_solid = false;
        for (t, r) in triangles.iter().zip(&regions) {
            if *r == Region::Solid {
                has_solid = true;
                solid_max = solid_max.max(*t.iter().max().unwrap());
            }
        }
        let n_solid_vertices = if has_solid { solid_max + 1 } else { 0 };
        let mut mesh = Mesh {
            next_id: vertex_ids.iter().max().map_or(0, |m| m + 1),
            vertices,
            vertex_ids,
            triangles,
            regions,
            boundary_edges: Vec::new(),
            n_solid_vertices,
        };
        mesh.boundary_edges = mesh.derive_boundary_edges(label_outer)?;
        Ok(mesh)
    }

    fn derive_boundary_edges(
        &self,
        label_outer: &dyn Fn(&[Point], &[u64], [usize; 2]) -> BoundaryLabel,
    ) -> Result<Vec<BoundaryEdge>> {
        let mut edges = Vec::new();
        for (key, owners) in self.edge_map() {
            match owners.as_slice() {
                [(_, dir)] => edges.push(BoundaryEdge { v: *dir, label: label_outer(&self.vertices, &self.vertex_ids, *dir) }),
                [(t0, d0), (t1, d1)] => {
                    let (r0, r1) = (self.regions[*t0], self.regions[*t1]);
                    if r0 != r1 {
                        let dir = if r0 == Region::Fluid { *d0 } else { *d1 };
                        edges.push(BoundaryEdge { v: dir, label: BoundaryLabel::Sigma });
                    }
                }
                _ => {
                    return Err(FsiError::Topology(format!(
                        "edge ({}, {}) is shared by {} triangles",
                        key.0,
                        key.1,
                        owners.len()
                    )))
                }
            }
        }
        Ok(edges)
    }

    /// Every undirected edge with the triangles that own it and its direction inside each.
    pub fn edge_map(&self) -> BTreeMap<(usize, usize), Vec<(usize, [usize; 2])>> {
        let mut map: BTreeMap<(usize, usize), Vec<(usize, [usize; 2])>> = BTreeMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let a = tri[k];
                let b = tri[(k + 1) % 3];
                map.entry((a.min(b), a.max(b))).or_default().push((t, [a, b]));
            }
        }
        map
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        signed_area(self.vertices[a], self.vertices[b], self.vertices[c])
    }

    pub fn region_area(&self, region: Region) -> f64 {
        (0..self.triangles.len()).filter(|&t| self.regions[t] == region).map(|t| self.area(t)).sum()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.area(t)).sum()
    }

    /// Area enclosed by the outer boundary, from the directed boundary edges.
    pub fn boundary_polygon_area(&self) -> f64 {
        self.boundary_edges
            .iter()
            .filter(|e| e.label != BoundaryLabel::Sigma)
            .map(|e| {
                let (p, q) = (self.vertices[e.v[0]], self.vertices[e.v[1]]);
                0.5 * (p[0] * q[1] - q[0] * p[1])
            })
            .sum()
    }

    /// Gradients of the three P1 basis functions on triangle `t`, with its area.
    pub fn gradients(&self, t: usize) -> ([[f64; 2]; 3], f64) {
        let [a, b, c] = self.triangles[t];
        p1_gradients(self.vertices[a], self.vertices[b], self.vertices[c])
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        [(pa[0] + pb[0] + pc[0]) / 3.0, (pa[1] + pb[1] + pc[1]) / 3.0]
    }

    /// `true` for vertices that belong to at least one fluid triangle.
    pub fn fluid_vertex_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.vertices.len()];
        for (tri, r) in self.triangles.iter().zip(&self.regions) {
            if *r == Region::Fluid {
                for &v in tri {
                    mask[v] = true;
                }
            }
        }
        mask
    }

    pub fn solid_triangles(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.triangles.len()).filter(|&t| self.regions[t] == Region::Solid)
    }

    pub fn fluid_triangles(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.triangles.len()).filter(|&t| self.regions[t] == Region::Fluid)
    }

    /// Per-vertex set of boundary labels touching it.
    pub fn vertex_labels(&self) -> Vec<Vec<BoundaryLabel>> {
        let mut labels: Vec<Vec<BoundaryLabel>> = vec![Vec::new(); self.vertices.len()];
        for e in &self.boundary_edges {
            for &v in &e.v {
                if !labels[v].contains(&e.label) {
                    labels[v].push(e.label);
                }
            }
        }
        labels
    }

    pub fn has_label(&self, label: BoundaryLabel) -> bool {
        self.boundary_edges.iter().any(|e| e.label == label)
    }

    /// Mean length of the edges of fluid triangles.
    pub fn mean_fluid_edge_length(&self) -> f64 {
        let mut sum = 0.0;
        let mut n = 0usize;
        for (key, owners) in self.edge_map() {
            if owners.iter().any(|(t, _)| self.regions[*t] == Region::Fluid) {
                let (p, q) = (self.vertices[key.0], self.vertices[key.1]);
                sum += ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
                n += 1;
            }
        }
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }

    /// Extracts the solid sub-mesh: its vertices and triangles.
    pub fn solid_part(&self) -> (Vec<Point>, Vec<[usize; 3]>) {
        let verts = self.vertices[..self.n_solid_vertices].to_vec();
        let tris = self.solid_triangles().map(|t| self.triangles[t]).collect();
        (verts, tris)
    }
}

pub fn p1_gradients(a: Point, b: Point, c: Point) -> ([[f64; 2]; 3], f64) {
    let area = signed_area(a, b, c);
    let inv = 1.0 / (2.0 * area);
    let g = [
        [(b[1] - c[1]) * inv, (c[0] - b[0]) * inv],
        [(c[1] - a[1]) * inv, (a[0] - c[0]) * inv],
        [(a[1] - b[1]) * inv, (b[0] - a[0]) * inv],
    ];
    (g, area)
}

/// Reports every triangle whose signed area is not above [`AREA_FLOOR`].
pub fn check_valid(mesh: &Mesh) -> Validity {
    let bad: Vec<(usize, f64)> = (0..mesh.triangles.len())
        .map(|t| (t, mesh.area(t)))
        .filter(|(_, a)| !(*a > AREA_FLOOR))
        .collect();
    if bad.is_empty() {
        Validity::Ok
    } else {
        Validity::Invalid(bad)
    }
}

/// Moves every solid vertex by `dt * u`; `u` is indexed like the solid vertices.
///
/// Fluid triangles touching the solid are not checked here since the fluid is
/// regenerated by [`remesh_fluid`].
pub fn move_solid_vertices(mesh: &Mesh, u: &[[f64; 2]], dt: f64) -> Result<Mesh> {
    if u.len() < mesh.n_solid_vertices {
        return Err(FsiError::LengthMismatch { expected: mesh.n_solid_vertices, got: u.len() });
    }
    let mut out = mesh.clone();
    for (i, p) in out.vertices[..mesh.n_solid_vertices].iter_mut().enumerate() {
        p[0] += dt * u[i][0];
        p[1] += dt * u[i][1];
    }
    let flipped: Vec<usize> = out.solid_triangles().filter(|&t| !(out.area(t) > AREA_FLOOR)).collect();
    if flipped.is_empty() {
        Ok(out)
    } else {
        Err(FsiError::FlipOver { triangles: flipped })
    }
}

/// Orders the interface edges into polylines with the fluid on their left.
pub fn extract_interface(mesh: &Mesh) -> Result<Vec<Polyline>> {
    let mut next: BTreeMap<usize, usize> = BTreeMap::new();
    let mut has_prev: BTreeMap<usize, usize> = BTreeMap::new();
    for (key, owners) in mesh.edge_map() {
        if owners.len() > 2 {
            return Err(FsiError::Topology(format!("edge ({}, {}) has {} triangles", key.0, key.1, owners.len())));
        }
    }
    for e in mesh.boundary_edges.iter().filter(|e| e.label == BoundaryLabel::Sigma) {
        let [a, b] = e.v;
        if next.insert(a, b).is_some() || has_prev.insert(b, a).is_some() {
            return Err(FsiError::Topology(format!("interface branches at vertex {}", mesh.vertex_ids[a])));
        }
    }
    let mut visited: BTreeMap<usize, bool> = next.keys().map(|&k| (k, false)).collect();
    let mut lines = Vec::new();
    let starts: Vec<usize> = next.keys().copied().filter(|v| !has_prev.contains_key(v)).collect();
    let walk = |start: usize, visited: &mut BTreeMap<usize, bool>| -> (Vec<usize>, bool) {
        let mut verts = vec![start];
        let mut cur = start;
        visited.insert(start, true);
        while let Some(&n) = next.get(&cur) {
            if n == start {
                return (verts, true);
            }
            verts.push(n);
            visited.insert(n, true);
            cur = n;
        }
        (verts, false)
    };
    for s in starts {
        let (v, closed) = walk(s, &mut visited);
        lines.push((v, closed));
    }
    let loop_starts: Vec<usize> = next.keys().copied().collect();
    for s in loop_starts {
        if !visited[&s] {
            let (v, closed) = walk(s, &mut visited);
            lines.push((v, closed));
        }
    }
    Ok(lines
        .into_iter()
        .map(|(vertices, closed)| Polyline {
            ids: vertices.iter().map(|&v| mesh.vertex_ids[v]).collect(),
            vertices,
            closed,
        })
        .collect())
}

#[cfg(test)]
mod tests;
