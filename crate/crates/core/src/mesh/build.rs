//! Mesh construction: constrained Delaunay triangulation of the fluid region
//! around structured solid parts.

use std::collections::HashSet;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use spade::{AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation};

use super::{BoundaryLabel, Mesh, Point, Region};
use crate::error::{FsiError, Result};

pub const DEFAULT_MIN_ANGLE: f64 = 25.0;

/// Channel with a cylinder and an elastic flag attached to its downstream side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlustrukGeometry {
    pub length: f64,
    pub height: f64,
    pub flag_length: f64,
    pub flag_thickness: f64,
    /// Both coordinates of the cylinder centre.
    pub center: f64,
    pub radius: f64,
    pub target_vertex_count: usize,
}

impl Default for FlustrukGeometry {
    fn default() -> Self {
        FlustrukGeometry {
            length: 2.5,
            height: 0.41,
            flag_length: 0.35,
            flag_thickness: 0.02,
            center: 0.2,
            radius: 0.05,
            target_vertex_count: 2500,
        }
    }
}

impl FlustrukGeometry {
    pub fn validate(&self) -> Result<()> {
        let g = self;
        let ok = g.flag_thickness > 0.0
            && g.flag_thickness < g.height
            && g.center - g.radius > 0.0
            && g.center + g.radius < g.height
            && g.flag_length > 0.0
            && g.flag_length + g.center + g.radius < g.length
            && g.target_vertex_count >= 50;
        if !ok {
            return Err(FsiError::Geometry(format!("inconsistent channel geometry {g:?}")));
        }
        if g.flag_thickness >= 2.0 * g.radius {
            return Err(FsiError::Geometry("flag is thicker than the cylinder it is clamped to".into()));
        }
        Ok(())
    }

    /// Midpoint of the flag's free end in the reference configuration.
    pub fn tip(&self) -> Point {
        [self.center + self.radius + self.flag_length, self.center]
    }
}

/// Input of the fluid triangulation: boundary points, constraint segments and free seeds.
pub(crate) struct FluidInput {
    pub points: Vec<Point>,
    /// Solid vertex index for points that are solid vertices.
    pub solid_of: Vec<Option<usize>>,
    /// Existing id for retained non-solid points.
    pub ids: Vec<Option<u64>>,
    pub segments: Vec<[usize; 2]>,
}

/// Constrained Delaunay triangulation with quality refinement. Returned triangle
/// indices below `points.len()` refer to input points, the rest to the extra points.
pub(crate) fn triangulate(
    points: &[Point],
    segments: &[[usize; 2]],
    max_area: f64,
    min_angle_deg: f64,
    max_extra: usize,
) -> Result<(Vec<Point>, Vec<[usize; 3]>)> {
    let mut cdt: ConstrainedDelaunayTriangulation<Point2<f64>> = ConstrainedDelaunayTriangulation::new();
    let mut handles = Vec::with_capacity(points.len());
    for p in points {
        let h = cdt
            .insert(Point2::new(p[0], p[1]))
            .map_err(|e| FsiError::Remesh(format!("cannot insert ({}, {}): {e:?}", p[0], p[1])))?;
        handles.push(h);
    }
    let mut owner = vec![usize::MAX; cdt.num_vertices()];
    for (i, h) in handles.iter().enumerate() {
        if owner[h.index()] != usize::MAX {
            return Err(FsiError::Remesh(format!("duplicate point ({}, {})", points[i][0], points[i][1])));
        }
        owner[h.index()] = i;
    }
    for s in segments {
        let (a, b) = (handles[s[0]], handles[s[1]]);
        if a == b || cdt.exists_constraint(a, b) {
            continue;
        }
        if !cdt.can_add_constraint(a, b) {
            return Err(FsiError::Remesh(format!(
                "boundary self-intersection at ({:.6}, {:.6})",
                points[s[0]][0], points[s[0]][1]
            )));
        }
        cdt.add_constraint(a, b);
    }
    if cdt.num_vertices() != points.len() {
        return Err(FsiError::Remesh("a constraint passes through a vertex".into()));
    }
    let params = RefinementParameters::<f64>::new()
        .with_angle_limit(AngleLimit::from_deg(min_angle_deg))
        .with_max_allowed_area(max_area)
        .with_max_additional_vertices(max_extra)
        .keep_constraint_edges()
        .exclude_outer_faces(true);
    let result = cdt.refine(params);
    let excluded: HashSet<_> = result.excluded_faces.into_iter().collect();

    let mut index = vec![usize::MAX; cdt.num_vertices()];
    let mut extra = Vec::new();
    for v in cdt.fixed_vertices() {
        let k = v.index();
        if k < owner.len() && owner[k] != usize::MAX {
            index[k] = owner[k];
        } else {
            index[k] = points.len() + extra.len();
            let p = cdt.vertex(v).position();
            extra.push([p.x, p.y]);
        }
    }
    let mut tris = Vec::new();
    for f in cdt.inner_faces() {
        if excluded.contains(&f.fix()) {
            continue;
        }
        let vs = f.vertices();
        tris.push([index[vs[0].fix().index()], index[vs[1].fix().index()], index[vs[2].fix().index()]]);
    }
    Ok((extra, tris))
}

/// Triangulates the fluid and merges it with the solid part. Vertex order is
/// solid vertices, then referenced input points, then refinement points.
#[allow(clippy::too_many_arguments)]
pub(crate) fn combine(
    solid_vertices: &[Point],
    solid_ids: &[u64],
    solid_tris: &[[usize; 3]],
    input: &FluidInput,
    max_area: f64,
    min_angle_deg: f64,
    mut next_id: u64,
    label_outer: &dyn Fn(&[Point], &[u64], [usize; 2]) -> BoundaryLabel,
) -> Result<Mesh> {
    let max_extra = 20 * (input.points.len() + 1000);
    let (extra, fluid) = triangulate(&input.points, &input.segments, max_area, min_angle_deg, max_extra)?;
    let n_in = input.points.len();
    let mut used = vec![false; n_in + extra.len()];
    for t in &fluid {
        for &v in t {
            used[v] = true;
        }
    }
    let mut vertices = solid_vertices.to_vec();
    let mut ids = solid_ids.to_vec();
    let mut map = vec![usize::MAX; n_in + extra.len()];
    for k in 0..n_in + extra.len() {
        if k < n_in {
            if let Some(s) = input.solid_of[k] {
                map[k] = s;
                continue;
            }
        }
        if !used[k] {
            continue;
        }
        map[k] = vertices.len();
        if k < n_in {
            vertices.push(input.points[k]);
            ids.push(match input.ids[k] {
                Some(id) => id,
                None => {
                    next_id += 1;
                    next_id - 1
                }
            });
        } else {
            vertices.push(extra[k - n_in]);
            ids.push(next_id);
            next_id += 1;
        }
    }
    let mut triangles: Vec<[usize; 3]> = solid_tris.to_vec();
    let mut regions = vec![Region::Solid; solid_tris.len()];
    for t in &fluid {
        triangles.push([map[t[0]], map[t[1]], map[t[2]]]);
        regions.push(Region::Fluid);
    }
    let mut mesh = Mesh::from_parts(vertices, ids, triangles, regions, label_outer)?;
    mesh.next_id = mesh.next_id.max(next_id);
    if mesh.n_solid_vertices != solid_vertices.len() {
        return Err(FsiError::Geometry("solid vertices must all belong to solid triangles".into()));
    }
    Ok(mesh)
}

/// Points `a` (excluded) to `b` (excluded) in `n` equal steps.
fn interior_points(a: Point, b: Point, n: usize) -> Vec<Point> {
    (1..n)
        .map(|k| {
            let s = k as f64 / n as f64;
            [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]
        })
        .collect()
}

/// Counter-clockwise rectangle boundary with spacing close to `h`.
fn rectangle_loop(x0: f64, y0: f64, x1: f64, y1: f64, h: f64) -> Vec<Point> {
    let corners = [[x0, y0], [x1, y0], [x1, y1], [x0, y1]];
    let mut pts = Vec::new();
    for k in 0..4 {
        let (a, b) = (corners[k], corners[(k + 1) % 4]);
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        pts.push(a);
        pts.extend(interior_points(a, b, ((len / h).ceil() as usize).max(1)));
    }
    pts
}

fn loop_segments(start: usize, n: usize) -> Vec<[usize; 2]> {
    (0..n).map(|k| [start + k, start + (k + 1) % n]).collect()
}

/// Labels outer edges of an axis-aligned channel by position.
fn channel_labeler(length: f64) -> impl Fn(&[Point], &[u64], [usize; 2]) -> BoundaryLabel {
    let tol = 1e-9 * length.max(1.0);
    move |p: &[Point], _: &[u64], e: [usize; 2]| {
        let (a, b) = (p[e[0]], p[e[1]]);
        if a[0].abs() < tol && b[0].abs() < tol {
            BoundaryLabel::GammaIn
        } else if (a[0] - length).abs() < tol && (b[0] - length).abs() < tol {
            BoundaryLabel::GammaOut
        } else {
            BoundaryLabel::GammaWall
        }
    }
}

/// Structured triangulation of a quadrilateral grid with alternating diagonals.
fn grid_triangles(nx: usize, ny: usize) -> Vec<[usize; 3]> {
    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let mut tris = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (p00, p10, p11, p01) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            if (i + j) % 2 == 0 {
                tris.push([p00, p10, p11]);
                tris.push([p00, p11, p01]);
            } else {
                tris.push([p00, p10, p01]);
                tris.push([p10, p11, p01]);
            }
        }
    }
    tris
}

/// Boundary of an `(nx+1) x (ny+1)` grid, counter-clockwise from the origin corner.
fn grid_boundary(nx: usize, ny: usize) -> Vec<usize> {
    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let mut b = Vec::new();
    b.extend((0..nx).map(|i| idx(i, 0)));
    b.extend((0..ny).map(|j| idx(nx, j)));
    b.extend((1..=nx).rev().map(|i| idx(i, ny)));
    b.extend((1..=ny).rev().map(|j| idx(0, j)));
    b
}

/// Repeats `build(h)` with a rescaled spacing until the vertex count is close to `target`.
fn calibrate(target: usize, h0: f64, build: &dyn Fn(f64) -> Result<Mesh>) -> Result<Mesh> {
    let mut h = h0;
    let mut best: Option<(f64, Mesh)> = None;
    for _ in 0..12 {
        let mesh = build(h)?;
        let n = mesh.num_vertices() as f64;
        let err = (n / target as f64 - 1.0).abs();
        if best.as_ref().map_or(true, |(e, _)| err < *e) {
            best = Some((err, mesh));
        }
        if err < 0.03 {
            break;
        }
        h *= (n / target as f64).sqrt();
    }
    let (err, mesh) = best.unwrap();
    if err > 0.2 {
        return Err(FsiError::Geometry(format!(
            "could not reach {target} vertices (closest had {})",
            mesh.num_vertices()
        )));
    }
    Ok(mesh)
}

/// Far-field spacing as a multiple of the spacing on the cylinder and flag.
const COARSENING: f64 = 3.0;

/// Builds the channel–cylinder–flag mesh with about `target_vertex_count` vertices.
pub fn build_flustruk_mesh(geom: &FlustrukGeometry) -> Result<Mesh> {
    geom.validate()?;
    let area = geom.length * geom.height;
    let h0 = (area / geom.target_vertex_count as f64).sqrt() / COARSENING;
    calibrate(geom.target_vertex_count, h0, &|h| flustruk_with_spacing(geom, h))
}

fn flustruk_with_spacing(g: &FlustrukGeometry, h: f64) -> Result<Mesh> {
    let (c, r) = (g.center, g.radius);
    let ny = ((g.flag_thickness / h).ceil() as usize).max(3);
    let nx = ((g.flag_length / h).ceil() as usize).max(4);
    let x_tip = c + r + g.flag_length;
    let mut solid = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        let y = c - 0.5 * g.flag_thickness + g.flag_thickness * j as f64 / ny as f64;
        let x_root = c + (r * r - (y - c).powi(2)).sqrt();
        for i in 0..=nx {
            solid.push([x_root + (x_tip - x_root) * i as f64 / nx as f64, y]);
        }
    }
    let solid_tris = grid_triangles(nx, ny);
    let idx = |i: usize, j: usize| j * (nx + 1) + i;

    let mut input = FluidInput { points: Vec::new(), solid_of: Vec::new(), ids: Vec::new(), segments: Vec::new() };
    // Interface from the upper root corner around the tip to the lower root corner.
    let mut sigma: Vec<usize> = (0..=nx).map(|i| idx(i, ny)).collect();
    sigma.extend((0..ny).rev().map(|j| idx(nx, j)));
    sigma.extend((0..nx).rev().map(|i| idx(i, 0)));
    for &s in &sigma {
        input.points.push(solid[s]);
        input.solid_of.push(Some(s));
        input.ids.push(None);
    }
    for k in 0..sigma.len() - 1 {
        input.segments.push([k, k + 1]);
    }
    // Cylinder arc outside the clamped root, from the lower root corner back to the upper one.
    let theta_root = (0.5 * g.flag_thickness / r).asin();
    let arc = 2.0 * PI - 2.0 * theta_root;
    let m = ((arc * r / h).ceil() as usize).max(8);
    let first_arc = input.points.len();
    for k in 1..m {
        let t = -theta_root - arc * k as f64 / m as f64;
        input.points.push([c + r * t.cos(), c + r * t.sin()]);
        input.solid_of.push(None);
        input.ids.push(None);
    }
    input.segments.push([sigma.len() - 1, first_arc]);
    for k in first_arc..input.points.len() - 1 {
        input.segments.push([k, k + 1]);
    }
    input.segments.push([input.points.len() - 1, 0]);
    let hc = COARSENING * h;
    let rect = rectangle_loop(0.0, 0.0, g.length, g.height, hc);
    let first_rect = input.points.len();
    for p in &rect {
        input.points.push(*p);
        input.solid_of.push(None);
        input.ids.push(None);
    }
    input.segments.extend(loop_segments(first_rect, rect.len()));

    let ids: Vec<u64> = (0..solid.len() as u64).collect();
    let max_area = 3f64.sqrt() / 4.0 * hc * hc;
    combine(
        &solid,
        &ids,
        &solid_tris,
        &input,
        max_area,
        DEFAULT_MIN_ANGLE,
        solid.len() as u64,
        &channel_labeler(g.length),
    )
}

/// Fluid-only rectangular channel `[0, length] x [0, height]` with inflow on the left.
pub fn build_channel_mesh(length: f64, height: f64, target_vertex_count: usize) -> Result<Mesh> {
    if !(length > 0.0 && height > 0.0) || target_vertex_count < 10 {
        return Err(FsiError::Geometry("channel needs positive size and at least 10 vertices".into()));
    }
    let h0 = (length * height / target_vertex_count as f64).sqrt();
    calibrate(target_vertex_count, h0, &|h| {
        let rect = rectangle_loop(0.0, 0.0, length, height, h);
        let n = rect.len();
        let input = FluidInput {
            solid_of: vec![None; n],
            ids: vec![None; n],
            segments: loop_segments(0, n),
            points: rect,
        };
        let max_area = 3f64.sqrt() / 4.0 * h * h;
        combine(&[], &[], &[], &input, max_area, DEFAULT_MIN_ANGLE, 0, &channel_labeler(length))
    })
}

/// A closed box with walls on all sides containing square solid blocks.
///
/// Each square is `(lower-left corner, side, cells per side)`; `h` is the fluid spacing.
pub fn build_box_with_solid_squares(
    width: f64,
    height: f64,
    squares: &[(Point, f64, usize)],
    h: f64,
) -> Result<Mesh> {
    let mut solid = Vec::new();
    let mut solid_tris = Vec::new();
    let mut input = FluidInput { points: Vec::new(), solid_of: Vec::new(), ids: Vec::new(), segments: Vec::new() };
    for &(corner, side, n) in squares {
        let n = n.max(1);
        let base = solid.len();
        for j in 0..=n {
            for i in 0..=n {
                solid.push([corner[0] + side * i as f64 / n as f64, corner[1] + side * j as f64 / n as f64]);
            }
        }
        solid_tris.extend(grid_triangles(n, n).into_iter().map(|t| t.map(|v| v + base)));
        let first = input.points.len();
        let ring = grid_boundary(n, n);
        for &b in &ring {
            input.points.push(solid[base + b]);
            input.solid_of.push(Some(base + b));
            input.ids.push(None);
        }
        input.segments.extend(loop_segments(first, ring.len()));
    }
    let rect = rectangle_loop(0.0, 0.0, width, height, h);
    let first = input.points.len();
    for p in &rect {
        input.points.push(*p);
        input.solid_of.push(None);
        input.ids.push(None);
    }
    input.segments.extend(loop_segments(first, rect.len()));
    let ids: Vec<u64> = (0..solid.len() as u64).collect();
    let max_area = 3f64.sqrt() / 4.0 * h * h;
    combine(
        &solid,
        &ids,
        &solid_tris,
        &input,
        max_area,
        DEFAULT_MIN_ANGLE,
        solid.len() as u64,
        &|_: &[Point], _: &[u64], _| BoundaryLabel::GammaWall,
    )
}

/// A solid rectangle `[0, width] × [0, height]` on an `nx × ny` grid with no fluid,
/// its whole boundary labelled as wall.
pub fn build_solid_block(width: f64, height: f64, nx: usize, ny: usize) -> Result<Mesh> {
    if !(width > 0.0 && height > 0.0) || nx == 0 || ny == 0 {
        return Err(FsiError::Geometry("solid block needs positive size and cell counts".into()));
    }
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push([width * i as f64 / nx as f64, height * j as f64 / ny as f64]);
        }
    }
    let ids = (0..vertices.len() as u64).collect();
    let triangles = grid_triangles(nx, ny);
    let regions = vec![Region::Solid; triangles.len()];
    Mesh::from_parts(vertices, ids, triangles, regions, &|_: &[Point], _: &[u64], _| BoundaryLabel::GammaWall)
}
