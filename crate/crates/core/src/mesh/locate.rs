//! Point location and P1 transfer between meshes.

use std::collections::HashMap;

use super::{Mesh, Point, Region};
use crate::error::{FsiError, Result};

const BARY_TOL: f64 = 1e-12;

/// Point locator over a fixed mesh, optionally restricted to one region.
///
/// Queries walk across neighbouring triangles from a hint; when the walk hits
/// the boundary the bucket grid is searched, and points outside the mesh are
/// projected onto the nearest boundary edge.
pub struct Locator<'a> {
    mesh: &'a Mesh,
    active: Vec<bool>,
    /// Neighbour across the edge opposite each local vertex.
    neighbors: Vec<[Option<usize>; 3]>,
    /// Boundary edges of the active set as `(triangle, local edge)`.
    boundary: Vec<(usize, usize)>,
    origin: Point,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

/// Where a point was found: its triangle, barycentric weights and how far it
/// had to be moved onto the mesh (zero when inside).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Location {
    pub triangle: usize,
    pub bary: [f64; 3],
    pub distance: f64,
}

fn bary(p: Point, a: Point, b: Point, c: Point) -> [f64; 3] {
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    let l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p[1] - a[1])) / det;
    let l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
    [1.0 - l1 - l2, l1, l2]
}

impl<'a> Locator<'a> {
    pub fn new(mesh: &'a Mesh, region: Option<Region>) -> Self {
        let nt = mesh.triangles.len();
        let active: Vec<bool> = (0..nt).map(|t| region.map_or(true, |r| mesh.regions[t] == r)).collect();
        let mut neighbors = vec![[None; 3]; nt];
        let mut boundary = Vec::new();
        for owners in mesh.edge_map().values() {
            let act: Vec<_> = owners.iter().filter(|(t, _)| active[*t]).collect();
            let local = |t: usize, dir: [usize; 2]| {
                let tri = mesh.triangles[t];
                (0..3).find(|&k| tri[k] != dir[0] && tri[k] != dir[1]).unwrap()
            };
            match act.as_slice() {
                [(t, d)] => boundary.push((*t, local(*t, *d))),
                [(t0, d0), (t1, d1)] => {
                    neighbors[*t0][local(*t0, *d0)] = Some(*t1);
                    neighbors[*t1][local(*t1, *d1)] = Some(*t0);
                }
                _ => {}
            }
        }
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in &mesh.vertices {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let n_act = active.iter().filter(|a| **a).count().max(1);
        let (w, h) = ((hi[0] - lo[0]).max(1e-300), (hi[1] - lo[1]).max(1e-300));
        let cell = ((w * h) / n_act as f64).sqrt().max(1e-300) * 2.0;
        let nx = ((w / cell).ceil() as usize).clamp(1, 4096);
        let ny = ((h / cell).ceil() as usize).clamp(1, 4096);
        let mut buckets = vec![Vec::new(); nx * ny];
        let cell_of = |x: f64, n: usize, o: f64| (((x - o) / cell).floor().max(0.0) as usize).min(n - 1);
        for t in (0..nt).filter(|&t| active[t]) {
            let tri = mesh.triangles[t];
            let xs = tri.map(|v| mesh.vertices[v][0]);
            let ys = tri.map(|v| mesh.vertices[v][1]);
            let (x0, x1) = (xs.iter().cloned().fold(f64::INFINITY, f64::min), xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
            let (y0, y1) = (ys.iter().cloned().fold(f64::INFINITY, f64::min), ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
            for j in cell_of(y0, ny, lo[1])..=cell_of(y1, ny, lo[1]) {
                for i in cell_of(x0, nx, lo[0])..=cell_of(x1, nx, lo[0]) {
                    buckets[j * nx + i].push(t);
                }
            }
        }
        Locator { mesh, active, neighbors, boundary, origin: lo, cell, nx, ny, buckets }
    }

    pub fn mesh(&self) -> &Mesh {
        self.mesh
    }

    fn bary_in(&self, t: usize, p: Point) -> [f64; 3] {
        let [a, b, c] = self.mesh.triangles[t];
        bary(p, self.mesh.vertices[a], self.mesh.vertices[b], self.mesh.vertices[c])
    }

    fn walk(&self, p: Point, start: usize) -> Option<(usize, [f64; 3])> {
        let mut t = start;
        for _ in 0..self.mesh.triangles.len().min(10_000) {
            let l = self.bary_in(t, p);
            let (k, min) = (0..3).map(|k| (k, l[k])).fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
            if min >= -BARY_TOL {
                return Some((t, l));
            }
            t = self.neighbors[t][k]?;
        }
        None
    }

    fn bucket_search(&self, p: Point) -> Option<(usize, [f64; 3])> {
        let fx = ((p[0] - self.origin[0]) / self.cell).floor();
        let fy = ((p[1] - self.origin[1]) / self.cell).floor();
        if fx < 0.0 || fy < 0.0 || fx >= self.nx as f64 || fy >= self.ny as f64 {
            return None;
        }
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &t in &self.buckets[fy as usize * self.nx + fx as usize] {
            let l = self.bary_in(t, p);
            let min = l[0].min(l[1]).min(l[2]);
            if best.as_ref().map_or(true, |b| min > b.2) {
                best = Some((t, l, min));
            }
        }
        best.filter(|b| b.2 >= -BARY_TOL).map(|b| (b.0, b.1))
    }

    /// Finds the triangle containing `p`, starting the walk at `hint` when given.
    pub fn locate(&self, p: Point, hint: Option<usize>) -> Option<(usize, [f64; 3])> {
        if let Some(h) = hint.filter(|&h| h < self.active.len() && self.active[h]) {
            if let Some(found) = self.walk(p, h) {
                return Some(found);
            }
        }
        self.bucket_search(p)
    }

    /// Nearest point of the active boundary.
    pub fn project(&self, p: Point) -> Option<Location> {
        let mut best: Option<Location> = None;
        for &(t, k) in &self.boundary {
            let tri = self.mesh.triangles[t];
            let (ia, ib) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
            let (a, b) = (self.mesh.vertices[ia], self.mesh.vertices[ib]);
            let d = [b[0] - a[0], b[1] - a[1]];
            let len2 = d[0] * d[0] + d[1] * d[1];
            let s = (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0);
            let q = [a[0] + s * d[0], a[1] + s * d[1]];
            let dist = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
            if best.as_ref().map_or(true, |b| dist < b.distance) {
                let mut l = [0.0; 3];
                l[(k + 1) % 3] = 1.0 - s;
                l[(k + 2) % 3] = s;
                best = Some(Location { triangle: t, bary: l, distance: dist });
            }
        }
        best
    }

    /// Locates `p`, projecting it onto the boundary when it lies outside.
    /// Returns the location even when the projection distance is large.
    pub fn locate_or_project(&self, p: Point, hint: Option<usize>) -> Option<Location> {
        match self.locate(p, hint) {
            Some((t, l)) => Some(Location { triangle: t, bary: l, distance: 0.0 }),
            None => self.project(p),
        }
    }

    /// Locates `p` and fails when it lies farther than `tol` outside the mesh.
    pub fn locate_within(&self, p: Point, hint: Option<usize>, tol: f64) -> Result<Location> {
        match self.locate_or_project(p, hint) {
            Some(loc) if loc.distance <= tol => Ok(loc),
            Some(loc) => Err(FsiError::PointOutside { x: p[0], y: p[1], distance: loc.distance }),
            None => Err(FsiError::PointOutside { x: p[0], y: p[1], distance: f64::INFINITY }),
        }
    }

    /// P1 interpolation of a nodal field at a located point.
    pub fn eval<const N: usize>(&self, loc: &Location, field: &[[f64; N]]) -> [f64; N] {
        let tri = self.mesh.triangles[loc.triangle];
        let mut out = [0.0; N];
        for k in 0..3 {
            for c in 0..N {
                out[c] += loc.bary[k] * field[tri[k]][c];
            }
        }
        out
    }
}

/// Transfers a nodal field from `old` to `new`. Vertices present in both meshes
/// (same id) copy their value; the rest are interpolated, with points outside
/// `old` by at most `tol` projected onto its boundary.
pub fn interpolate_to_new_mesh<const N: usize>(
    old: &Mesh,
    field: &[[f64; N]],
    new: &Mesh,
    tol: f64,
) -> Result<Vec<[f64; N]>> {
    let locator = Locator::new(old, None);
    transfer_with(&locator, field, new, tol, |_| true)
}

/// Transfer restricted to the vertices selected by `want`; others get zero.
pub(crate) fn transfer_with<const N: usize>(
    locator: &Locator<'_>,
    field: &[[f64; N]],
    new: &Mesh,
    tol: f64,
    want: impl Fn(usize) -> bool,
) -> Result<Vec<[f64; N]>> {
    let old = locator.mesh();
    if field.len() != old.num_vertices() {
        return Err(FsiError::LengthMismatch { expected: old.num_vertices(), got: field.len() });
    }
    let by_id: HashMap<u64, usize> = old.vertex_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let mut out = vec![[0.0; N]; new.num_vertices()];
    let mut hint = None;
    for (v, p) in new.vertices.iter().enumerate() {
        if !want(v) {
            continue;
        }
        if let Some(&i) = by_id.get(&new.vertex_ids[v]) {
            if old.vertices[i] == *p {
                out[v] = field[i];
                continue;
            }
        }
        let loc = locator.locate_within(*p, hint, tol)?;
        hint = Some(loc.triangle);
        out[v] = locator.eval(&loc, field);
    }
    Ok(out)
}
