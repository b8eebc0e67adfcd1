//! One time step: fixed-point iteration over velocity and geometry, then the
//! displacement, density and energy bookkeeping.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use crate::constitutive::{kinematics_from_grad, psi, Mat2, MaterialParams};
use crate::error::{FsiError, Result};
use crate::fem::{
    apply_boundary_conditions, assemble_monolithic, element_gradient, fluid_dissipation_rate, kinetic_energy, solve,
    split_solution, AssemblyInput, DofMap, InflowProfile, QuadField, Quadrature, SolidElement, TimeMode,
};
use crate::mesh::{
    self, move_solid_vertices, remesh_fluid_with_area, BoundaryLabel, Locator, Mesh, Point, Region,
};
use crate::transport::{compose_at_quadrature, compose_at_vertices, nodal_to_quadrature, BackwardMap, ExitPolicy};

/// Snapshot of the discrete solution at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub mesh: Mesh,
    /// Velocity at every vertex.
    pub u: Vec<[f64; 2]>,
    /// Pressure at every vertex (zero away from the fluid). With gravity this is
    /// the deviation from the hydrostatic pressure.
    pub p: Vec<f64>,
    /// Displacement of each solid vertex.
    pub d: Vec<[f64; 2]>,
    /// Density of each triangle.
    pub rho: Vec<f64>,
    /// Undeformed solid; vertex `i` is solid vertex `i` of `mesh`.
    pub reference_solid: Mesh,
    pub time: f64,
    pub step_index: u64,
    /// Sum over past steps of `dt ∫ μ_f/2 |Du|² + ε |∇p|²`.
    pub dissipation_cumulative: f64,
    /// Largest fluid triangle area allowed by remeshing.
    pub remesh_max_area: f64,
}

fn element_densities(mesh: &Mesh, reference: &Mesh, mat: &MaterialParams) -> Vec<f64> {
    let mut solid = 0;
    (0..mesh.triangles.len())
        .map(|t| match mesh.regions[t] {
            Region::Fluid => mat.rho0_f,
            Region::Solid => {
                solid += 1;
                mat.rho0_s * reference.area(solid - 1) / mesh.area(t)
            }
        })
        .collect()
}

impl State {
    /// Fluid and solid at rest in the configuration of `mesh`.
    pub fn at_rest(mesh: Mesh, mat: &MaterialParams) -> Result<State> {
        Self::with_displacement(mesh, mat, &|_| [0.0, 0.0])
    }

    /// Solid displaced by `d0(x0)` from the configuration of `reference`, fluid at rest.
    pub fn with_displacement(reference: Mesh, mat: &MaterialParams, d0: &dyn Fn(Point) -> [f64; 2]) -> Result<State> {
        mat.validate()?;
        let ns = reference.n_solid_vertices;
        let (sv, st) = reference.solid_part();
        let ref_ids = reference.vertex_ids[..ns].to_vec();
        let reference_solid = Mesh::from_parts(sv, ref_ids, st, vec![Region::Solid; reference.solid_triangles().count()], &|_: &[Point], _: &[u64], _| BoundaryLabel::GammaWall)?;
        let remesh_max_area = default_max_area(&reference);
        let d: Vec<[f64; 2]> = reference.vertices[..ns].iter().map(|p| d0(*p)).collect();
        let mesh = if d.iter().any(|v| *v != [0.0, 0.0]) {
            let moved = move_solid_vertices(&reference, &d, 1.0)?;
            remesh_fluid_with_area(&moved, mesh::DEFAULT_MIN_ANGLE, remesh_max_area)?
        } else {
            reference
        };
        let rho = element_densities(&mesh, &reference_solid, mat);
        let n = mesh.num_vertices();
        Ok(State {
            mesh,
            u: vec![[0.0; 2]; n],
            p: vec![0.0; n],
            d,
            rho,
            reference_solid,
            time: 0.0,
            step_index: 0,
            dissipation_cumulative: 0.0,
            remesh_max_area,
        })
    }

    /// Displacement extended by zero to every vertex.
    pub fn displacement_field(&self) -> Vec<[f64; 2]> {
        let mut full = vec![[0.0; 2]; self.mesh.num_vertices()];
        full[..self.d.len()].copy_from_slice(&self.d);
        full
    }

    pub fn max_speed(&self) -> f64 {
        self.u.iter().map(|v| v[0].abs().max(v[1].abs())).fold(0.0, f64::max)
    }

    pub fn solid_mass(&self) -> f64 {
        self.mesh.solid_triangles().map(|t| self.rho[t] * self.mesh.area(t)).sum()
    }

    /// Smallest ratio of current to reference area over solid triangles.
    pub fn min_solid_area_ratio(&self) -> f64 {
        self.mesh
            .solid_triangles()
            .enumerate()
            .map(|(k, t)| self.mesh.area(t) / self.reference_solid.area(k))
            .fold(f64::INFINITY, f64::min)
    }
}

fn default_max_area(mesh: &Mesh) -> f64 {
    let a = mesh
        .fluid_triangles()
        .filter(|&t| mesh.triangles[t].iter().all(|&v| v >= mesh.n_solid_vertices))
        .map(|t| mesh.area(t))
        .fold(0.0, f64::max);
    if a > 0.0 {
        a
    } else {
        mesh.total_area()
    }
}

/// How `uⁿ ∘ Y` enters the right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComposeMode {
    /// Evaluate the composition at every quadrature point.
    Quadrature,
    /// Compose at vertices and interpolate.
    Vertex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOptions {
    pub dt: f64,
    pub fp_tol: f64,
    pub fp_max_iter: usize,
    pub energy_stable: bool,
    pub inflow: Option<InflowProfile>,
    pub compose: ComposeMode,
    pub min_angle_deg: f64,
    /// Times a failed step is retried with half the step.
    pub max_halvings: usize,
    /// Aitken relaxation of the fixed-point iterates, driven by the solid velocities.
    pub relaxation: bool,
    /// When set, the first linear system of each step is written here in MatrixMarket format.
    pub dump_matrix_dir: Option<std::path::PathBuf>,
}

impl Default for StepOptions {
    fn default() -> Self {
        StepOptions {
            dt: 0.005,
            fp_tol: 1e-6,
            fp_max_iter: 30,
            energy_stable: true,
            inflow: None,
            compose: ComposeMode::Quadrature,
            min_angle_deg: mesh::DEFAULT_MIN_ANGLE,
            max_halvings: 3,
            relaxation: true,
            dump_matrix_dir: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointReport {
    pub iterations: usize,
    pub increment: f64,
    pub mesh_rebuilds: usize,
    pub converged: bool,
}

fn domain_height(mesh: &Mesh) -> f64 {
    let (lo, hi) = mesh.vertices.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| (l.min(p[1]), h.max(p[1])));
    hi - lo
}

/// Moves a velocity field to a new mesh: solid vertices by index, the rest by
/// id or by interpolation.
fn transfer_velocity(old: &Mesh, u: &[[f64; 2]], new: &Mesh) -> Result<Vec<[f64; 2]>> {
    let ns = new.n_solid_vertices;
    let locator = Locator::new(old, None);
    let mut out = mesh::transfer_with(&locator, u, new, 1e-6 * domain_height(old), |v| v >= ns)?;
    out[..ns].copy_from_slice(&u[..ns]);
    Ok(out)
}

/// Moves a pressure field using only the fluid triangles of the old mesh.
fn transfer_pressure(old: &Mesh, p: &[f64], new: &Mesh) -> Result<Vec<f64>> {
    let locator = Locator::new(old, Some(Region::Fluid));
    let field: Vec<[f64; 1]> = p.iter().map(|v| [*v]).collect();
    let mask = new.fluid_vertex_mask();
    let out = mesh::transfer_with(&locator, &field, new, f64::INFINITY, |v| mask[v])?;
    Ok(out.into_iter().map(|v| v[0]).collect())
}

fn max_abs(u: &[[f64; 2]]) -> f64 {
    u.iter().map(|v| v[0].abs().max(v[1].abs())).fold(0.0, f64::max)
}

/// Advances by one step of `opts.dt`.
pub fn advance(state: &State, mat: &MaterialParams, opts: &StepOptions) -> Result<(State, FixedPointReport)> {
    let dt = opts.dt;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(FsiError::Config(format!("time step must be positive, got {dt}")));
    }
    let mesh_n = &state.mesh;
    let ns = mesh_n.n_solid_vertices;
    let rule = Quadrature::degree5();
    let locator_n = Locator::new(mesh_n, None);

    let mut mesh_prev = mesh_n.clone();
    let mut u_k = state.u.clone();
    let mut report = FixedPointReport { iterations: 0, increment: f64::INFINITY, mesh_rebuilds: 0, converged: false };
    let mut last: Option<(Mesh, Vec<f64>, f64)> = None;
    let mut omega = 1.0;
    let mut prev_residual: Option<Vec<f64>> = None;

    for iter in 1..=opts.fp_max_iter {
        let mesh_k = match (iter > 1).then(|| place_solid(&mesh_prev, mesh_n, &u_k, dt)).flatten() {
            Some(m) => m,
            None => {
                report.mesh_rebuilds += 1;
                let moved = move_solid_vertices(mesh_n, &u_k[..ns], dt)?;
                remesh_fluid_with_area(&moved, opts.min_angle_deg, state.remesh_max_area)?
            }
        };
        let u_lag = transfer_velocity(&mesh_prev, &u_k, &mesh_k)?;

        let mut d_full = vec![[0.0; 2]; mesh_k.num_vertices()];
        d_full[..ns].copy_from_slice(&state.d);
        let solid: Vec<Option<SolidElement>> = (0..mesh_k.triangles.len())
            .map(|t| match mesh_k.regions[t] {
                Region::Fluid => Ok(None),
                Region::Solid => SolidElement::new(
                    mat,
                    element_gradient(&mesh_k, t, &d_full),
                    element_gradient(&mesh_k, t, &u_lag),
                    dt,
                    opts.energy_stable,
                )
                .map(Some),
            })
            .collect::<Result<_>>()?;

        let map = BackwardMap { mesh: &mesh_k, velocity: &u_lag, dt };
        let is_fluid = |t: usize| mesh_k.regions[t] == Region::Fluid;
        let mut composed = match opts.compose {
            ComposeMode::Quadrature => {
                compose_at_quadrature(&state.u, &locator_n, &map, &rule, ExitPolicy::Project, &is_fluid)?
            }
            ComposeMode::Vertex => {
                let mut nodal = compose_at_vertices(&state.u, &locator_n, &map, ExitPolicy::Project)?;
                nodal[..ns].copy_from_slice(&state.u[..ns]);
                nodal_to_quadrature(&mesh_k, &nodal, &rule)
            }
        };
        fill_solid_identity(&mut composed, &mesh_k, &state.u, &rule);

        let dofs = DofMap::new(&mesh_k);
        let sys = assemble_monolithic(&AssemblyInput {
            mesh: &mesh_k,
            dofs: &dofs,
            mat,
            time: TimeMode::Transient { dt },
            rule: &rule,
            composed: Some(&composed),
            solid: &solid,
        })?;
        let reduced = apply_boundary_conditions(&sys, &mesh_k, &dofs, opts.inflow.as_ref())?;
        if let (Some(dir), 1) = (&opts.dump_matrix_dir, iter) {
            let path = dir.join(format!("system_{:06}.mtx", state.step_index + 1));
            reduced.write_matrix_market(BufWriter::new(fs::File::create(path)?))?;
        }
        let (u_new, p_new) = split_solution(&solve(&reduced)?, &dofs);

        let residual: Vec<[f64; 2]> = u_new.iter().zip(&u_lag).map(|(a, b)| [a[0] - b[0], a[1] - b[1]]).collect();
        report.iterations = iter;
        report.increment = max_abs(&residual) / max_abs(&u_new).max(1.0);
        let rate = fluid_dissipation_rate(&mesh_k, &u_new, &p_new, mat);
        last = Some((mesh_k.clone(), p_new, rate));
        if report.increment <= opts.fp_tol {
            report.converged = true;
            u_k = u_new;
            break;
        }
        if opts.relaxation {
            let r: Vec<f64> = residual[..ns].iter().flatten().copied().collect();
            if let Some(prev) = &prev_residual {
                omega = aitken(omega, prev, &r);
            }
            prev_residual = Some(r);
        }
        u_k = u_lag.iter().zip(&residual).map(|(b, r)| [b[0] + omega * r[0], b[1] + omega * r[1]]).collect();
        mesh_prev = mesh_k;
    }
    if !report.converged {
        return Err(FsiError::FixedPoint { iterations: report.iterations, increment: report.increment });
    }
    let (mesh_k, p_k, rate) = last.expect("at least one iteration");

    // Final geometry: vertices moved by the converged velocity.
    let mesh_new = match place_solid(&mesh_k, mesh_n, &u_k, dt) {
        Some(m) => m,
        None => {
            report.mesh_rebuilds += 1;
            let moved = move_solid_vertices(mesh_n, &u_k[..ns], dt)?;
            remesh_fluid_with_area(&moved, opts.min_angle_deg, state.remesh_max_area)?
        }
    };
    let u = transfer_velocity(&mesh_k, &u_k, &mesh_new)?;
    let p = transfer_pressure(&mesh_k, &p_k, &mesh_new)?;
    let d: Vec<[f64; 2]> = state.d.iter().zip(&u_k).map(|(d, v)| [d[0] + dt * v[0], d[1] + dt * v[1]]).collect();
    let rho = element_densities(&mesh_new, &state.reference_solid, mat);
    Ok((
        State {
            mesh: mesh_new,
            u,
            p,
            d,
            rho,
            reference_solid: state.reference_solid.clone(),
            time: state.time + dt,
            step_index: state.step_index + 1,
            dissipation_cumulative: state.dissipation_cumulative + dt * rate,
            remesh_max_area: state.remesh_max_area,
        },
        report,
    ))
}

/// `mesh` with its solid vertices placed at `xⁿ + dt u`, if no triangle inverts.
fn place_solid(mesh: &Mesh, mesh_n: &Mesh, u: &[[f64; 2]], dt: f64) -> Option<Mesh> {
    let mut m = mesh.clone();
    for i in 0..m.n_solid_vertices {
        let (x, v) = (mesh_n.vertices[i], u[i]);
        m.vertices[i] = [x[0] + dt * v[0], x[1] + dt * v[1]];
    }
    (mesh::check_valid(&m) == mesh::Validity::Ok).then_some(m)
}

/// Aitken update of the relaxation factor from two consecutive residuals.
fn aitken(omega: f64, prev: &[f64], r: &[f64]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (p, c) in prev.iter().zip(r) {
        num += p * (c - p);
        den += (c - p) * (c - p);
    }
    if den > 0.0 {
        (-omega * num / den).clamp(AITKEN_MIN, AITKEN_MAX)
    } else {
        omega
    }
}

const AITKEN_MIN: f64 = 0.1;
const AITKEN_MAX: f64 = 20.0;

fn fill_solid_identity(q: &mut QuadField, mesh: &Mesh, u_old: &[[f64; 2]], rule: &Quadrature) {
    for t in mesh.solid_triangles() {
        let tri = mesh.triangles[t];
        for (k, l) in rule.points.iter().enumerate() {
            let mut v = [0.0; 2];
            for a in 0..3 {
                v[0] += l[a] * u_old[tri[a]][0];
                v[1] += l[a] * u_old[tri[a]][1];
            }
            q.values[t * rule.len() + k] = v;
        }
    }
}

/// A step that may have been split into smaller sub-steps.
#[derive(Debug, Clone)]
pub struct SubStep {
    pub state: State,
    pub report: FixedPointReport,
    pub dt: f64,
}

fn retryable(e: &FsiError) -> bool {
    matches!(
        e,
        FsiError::FixedPoint { .. }
            | FsiError::FlipOver { .. }
            | FsiError::SingularDeformation { .. }
            | FsiError::Remesh(_)
            | FsiError::Solver(_)
            | FsiError::CharacteristicsExit { .. }
    )
}

/// Advances by `opts.dt`, replacing a failed step by two half steps, recursively
/// up to `opts.max_halvings` times.
pub fn advance_with_retry(state: &State, mat: &MaterialParams, opts: &StepOptions) -> Result<Vec<SubStep>> {
    fn go(state: &State, mat: &MaterialParams, opts: &StepOptions, left: usize) -> Result<Vec<SubStep>> {
        match advance(state, mat, opts) {
            Ok((s, r)) => Ok(vec![SubStep { state: s, report: r, dt: opts.dt }]),
            Err(e) if left > 0 && retryable(&e) => {
                let half = StepOptions { dt: 0.5 * opts.dt, ..opts.clone() };
                let mut first = go(state, mat, &half, left - 1)?;
                let mid = first.last().expect("non-empty").state.clone();
                first.extend(go(&mid, mat, &half, left - 1)?);
                Ok(first)
            }
            Err(e) => Err(e),
        }
    }
    go(state, mat, opts, opts.max_halvings)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    pub kinetic: f64,
    pub elastic: f64,
    pub dissipation_step: f64,
    pub dissipation_cumulative: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyVerdict {
    Pass,
    Fail,
    NotApplicable,
}

/// Default relative slack of the energy inequality.
pub const ENERGY_TOLERANCE: f64 = 1e-6;

/// Kinetic energy, stored elastic energy `∫_{Ω₀ˢ} ρ₀ Ψ` and the dissipation so far.
pub fn energy_of(state: &State, mat: &MaterialParams) -> Result<EnergyReport> {
    let kinetic = kinetic_energy(&state.mesh, &state.u, &state.rho);
    let d = state.displacement_field();
    let mut elastic = 0.0;
    for t in state.mesh.solid_triangles() {
        let g: Mat2 = element_gradient(&state.mesh, t, &d);
        let kin = kinematics_from_grad(&g)?;
        // ρ₀ ∫_{T₀} Ψ = ρ₀ ∫_T det(I - ∇d) Ψ.
        elastic += mat.rho0_s * (Mat2::identity() - g).determinant() * state.mesh.area(t) * psi(&kin, mat);
    }
    Ok(EnergyReport {
        kinetic,
        elastic,
        dissipation_step: 0.0,
        dissipation_cumulative: state.dissipation_cumulative,
        total: kinetic + elastic + state.dissipation_cumulative,
    })
}

/// Energy of `new` and whether the discrete energy inequality holds against `prev`.
/// The inequality only applies to unforced runs (`forcing_free`).
pub fn energy_audit(prev: &State, new: &State, mat: &MaterialParams, forcing_free: bool) -> Result<(EnergyReport, EnergyVerdict)> {
    let before = energy_of(prev, mat)?;
    let mut after = energy_of(new, mat)?;
    after.dissipation_step = new.dissipation_cumulative - prev.dissipation_cumulative;
    let verdict = if !forcing_free {
        EnergyVerdict::NotApplicable
    } else if after.total <= before.total * (1.0 + ENERGY_TOLERANCE) {
        EnergyVerdict::Pass
    } else {
        EnergyVerdict::Fail
    };
    Ok((after, verdict))
}

/// Current position of the vertex with id `id`.
pub fn tip_tracker(state: &State, id: u64) -> Result<Point> {
    state
        .mesh
        .vertex_ids
        .iter()
        .position(|&v| v == id)
        .map(|i| state.mesh.vertices[i])
        .ok_or(FsiError::IdNotFound(id))
}

/// Id of the solid vertex closest to `target`.
pub fn nearest_solid_vertex(mesh: &Mesh, target: Point) -> Option<u64> {
    (0..mesh.n_solid_vertices)
        .min_by(|&a, &b| {
            let da = (mesh.vertices[a][0] - target[0]).powi(2) + (mesh.vertices[a][1] - target[1]).powi(2);
            let db = (mesh.vertices[b][0] - target[0]).powi(2) + (mesh.vertices[b][1] - target[1]).powi(2);
            da.total_cmp(&db)
        })
        .map(|i| mesh.vertex_ids[i])
}

/// Smallest distance from a solid vertex to the top, bottom or right channel wall.
pub fn solid_wall_gap(state: &State) -> f64 {
    let m = &state.mesh;
    let (mut lo, mut hi, mut right) = (f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in &m.vertices[m.n_solid_vertices..] {
        lo = lo.min(p[1]);
        hi = hi.max(p[1]);
        right = right.max(p[0]);
    }
    m.vertices[..m.n_solid_vertices]
        .iter()
        .map(|p| (p[1] - lo).min(hi - p[1]).min(right - p[0]))
        .fold(f64::INFINITY, f64::min)
}

fn write_vec2<W: Write>(w: &mut W, name: &str, v: &[[f64; 2]]) -> Result<()> {
    writeln!(w, "{name} {}", v.len())?;
    for x in v {
        writeln!(w, "{:.16e} {:.16e}", x[0], x[1])?;
    }
    Ok(())
}

fn write_scalars<W: Write>(w: &mut W, name: &str, v: &[f64]) -> Result<()> {
    writeln!(w, "{name} {}", v.len())?;
    for x in v {
        writeln!(w, "{x:.16e}")?;
    }
    Ok(())
}

/// Writes `mesh.txt`, `reference.txt` and `fields.txt` into `dir`.
pub fn write_checkpoint(state: &State, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    mesh::write_text(&state.mesh, BufWriter::new(fs::File::create(dir.join("mesh.txt"))?))?;
    mesh::write_text(&state.reference_solid, BufWriter::new(fs::File::create(dir.join("reference.txt"))?))?;
    let mut w = BufWriter::new(fs::File::create(dir.join("fields.txt"))?);
    writeln!(w, "time {:.16e}", state.time)?;
    writeln!(w, "step {}", state.step_index)?;
    writeln!(w, "dissipation {:.16e}", state.dissipation_cumulative)?;
    writeln!(w, "remesh_max_area {:.16e}", state.remesh_max_area)?;
    write_vec2(&mut w, "u", &state.u)?;
    write_scalars(&mut w, "p", &state.p)?;
    write_vec2(&mut w, "d", &state.d)?;
    write_scalars(&mut w, "rho", &state.rho)?;
    w.flush()?;
    Ok(())
}

struct Cursor<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl Cursor<'_> {
    fn line(&mut self, what: &str) -> Result<(usize, &str)> {
        let (n, l) = self.lines.next().ok_or_else(|| FsiError::Parse { line: 0, msg: format!("missing {what}") })?;
        Ok((n + 1, l))
    }

    fn keyed(&mut self, key: &str) -> Result<(usize, String)> {
        let (n, l) = self.line(key)?;
        let rest = l.strip_prefix(key).ok_or_else(|| FsiError::Parse { line: n, msg: format!("expected {key}") })?;
        Ok((n, rest.trim().to_string()))
    }

    fn number(&mut self, key: &str) -> Result<f64> {
        let (n, s) = self.keyed(key)?;
        s.parse().map_err(|_| FsiError::Parse { line: n, msg: format!("bad {key}") })
    }

    fn rows(&mut self, key: &str) -> Result<Vec<Vec<f64>>> {
        let count = self.number(key)? as usize;
        (0..count)
            .map(|_| {
                let (n, l) = self.line(key)?;
                l.split_whitespace()
                    .map(|s| s.parse::<f64>().map_err(|e| FsiError::Parse { line: n, msg: e.to_string() }))
                    .collect()
            })
            .collect()
    }
}

pub fn read_checkpoint(dir: &Path) -> Result<State> {
    let mesh = mesh::read_text(BufReader::new(fs::File::open(dir.join("mesh.txt"))?))?;
    let reference_solid = mesh::read_text(BufReader::new(fs::File::open(dir.join("reference.txt"))?))?;
    let text = fs::read_to_string(dir.join("fields.txt"))?;
    let mut c = Cursor { lines: text.lines().enumerate() };
    let time = c.number("time")?;
    let step_index = c.number("step")? as u64;
    let dissipation_cumulative = c.number("dissipation")?;
    let remesh_max_area = c.number("remesh_max_area")?;
    let vec2 = |r: Vec<Vec<f64>>| r.into_iter().map(|v| [v[0], v[1]]).collect::<Vec<_>>();
    let u = vec2(c.rows("u")?);
    let p = c.rows("p")?.into_iter().map(|v| v[0]).collect();
    let d = vec2(c.rows("d")?);
    let rho = c.rows("rho")?.into_iter().map(|v| v[0]).collect();
    if u.len() != mesh.num_vertices() {
        return Err(FsiError::LengthMismatch { expected: mesh.num_vertices(), got: u.len() });
    }
    Ok(State { mesh, u, p, d, rho, reference_solid, time, step_index, dissipation_cumulative, remesh_max_area })
}
