//! Backward characteristics `Y(x) = x - dt u(x)` and composition of old fields with them.

use rayon::prelude::*;

use crate::error::{FsiError, Result};
use crate::fem::{QuadField, Quadrature};
use crate::mesh::{Locator, Mesh, Point};

/// Foot of the characteristic through a point of `mesh`, from a nodal velocity on `mesh`.
#[derive(Clone, Copy)]
pub struct BackwardMap<'a> {
    pub mesh: &'a Mesh,
    pub velocity: &'a [[f64; 2]],
    pub dt: f64,
}

impl BackwardMap<'_> {
    /// `Y` at barycentric point `bary` of triangle `t`.
    pub fn at(&self, t: usize, bary: [f64; 3]) -> Point {
        let tri = self.mesh.triangles[t];
        let mut x = [0.0; 2];
        let mut u = [0.0; 2];
        for k in 0..3 {
            for c in 0..2 {
                x[c] += bary[k] * self.mesh.vertices[tri[k]][c];
                u[c] += bary[k] * self.velocity[tri[k]][c];
            }
        }
        [x[0] - self.dt * u[0], x[1] - self.dt * u[1]]
    }

    pub fn at_vertex(&self, v: usize) -> Point {
        let (x, u) = (self.mesh.vertices[v], self.velocity[v]);
        [x[0] - self.dt * u[0], x[1] - self.dt * u[1]]
    }
}

/// What to do with feet that fall outside the old mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExitPolicy {
    /// Project onto the nearest boundary point if within `tol`, fail otherwise.
    Strict { tol: f64 },
    /// Always take the value at the nearest boundary point.
    Project,
}

fn evaluate(
    locator: &Locator<'_>,
    field: &[[f64; 2]],
    y: Point,
    hint: Option<usize>,
    policy: ExitPolicy,
) -> Result<([f64; 2], usize)> {
    let loc = locator
        .locate_or_project(y, hint)
        .ok_or(FsiError::CharacteristicsExit { x: y[0], y: y[1], distance: f64::INFINITY })?;
    if let ExitPolicy::Strict { tol } = policy {
        if loc.distance > tol {
            return Err(FsiError::CharacteristicsExit { x: y[0], y: y[1], distance: loc.distance });
        }
    }
    Ok((locator.eval(&loc, field), loc.triangle))
}

/// `field_old ∘ Y` at the quadrature points of the triangles selected by `select`;
/// the other triangles get zeros.
pub fn compose_at_quadrature(
    field_old: &[[f64; 2]],
    old: &Locator<'_>,
    map: &BackwardMap<'_>,
    rule: &Quadrature,
    policy: ExitPolicy,
    select: &(dyn Fn(usize) -> bool + Sync),
) -> Result<QuadField> {
    if field_old.len() != old.mesh().num_vertices() {
        return Err(FsiError::LengthMismatch { expected: old.mesh().num_vertices(), got: field_old.len() });
    }
    let nq = rule.len();
    let per: Vec<Vec<[f64; 2]>> = (0..map.mesh.triangles.len())
        .into_par_iter()
        .map(|t| {
            if !select(t) {
                return Ok(vec![[0.0; 2]; nq]);
            }
            let mut hint = None;
            rule.points
                .iter()
                .map(|l| {
                    let (v, found) = evaluate(old, field_old, map.at(t, *l), hint, policy)?;
                    hint = Some(found);
                    Ok(v)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(QuadField { per_triangle: nq, values: per.into_iter().flatten().collect() })
}

/// `field_old ∘ Y` at the vertices of the map's mesh.
pub fn compose_at_vertices(
    field_old: &[[f64; 2]],
    old: &Locator<'_>,
    map: &BackwardMap<'_>,
    policy: ExitPolicy,
) -> Result<Vec<[f64; 2]>> {
    let mut hint = None;
    (0..map.mesh.num_vertices())
        .map(|v| {
            let (val, t) = evaluate(old, field_old, map.at_vertex(v), hint, policy)?;
            hint = Some(t);
            Ok(val)
        })
        .collect()
}

/// Interpolates nodal values at quadrature points (used with vertex-wise composition).
pub fn nodal_to_quadrature(mesh: &Mesh, nodal: &[[f64; 2]], rule: &Quadrature) -> QuadField {
    let mut values = Vec::with_capacity(mesh.triangles.len() * rule.len());
    for tri in &mesh.triangles {
        for l in &rule.points {
            let mut v = [0.0; 2];
            for k in 0..3 {
                v[0] += l[k] * nodal[tri[k]][0];
                v[1] += l[k] * nodal[tri[k]][1];
            }
            values.push(v);
        }
    }
    QuadField { per_triangle: rule.len(), values }
}

/// Moves the displacement with the vertices: `d_new = d_old + dt u_new` per solid vertex.
pub fn displacement_update_by_vertex_motion(d_old: &[[f64; 2]], u_new: &[[f64; 2]], dt: f64) -> Result<Vec<[f64; 2]>> {
    if u_new.len() < d_old.len() {
        return Err(FsiError::LengthMismatch { expected: d_old.len(), got: u_new.len() });
    }
    Ok(d_old.iter().zip(u_new).map(|(d, u)| [d[0] + dt * u[0], d[1] + dt * u[1]]).collect())
}
