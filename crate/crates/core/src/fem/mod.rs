//! Stabilized P1–P1 discretization of the monolithic fluid–solid system.
//!
//! Unknowns are two velocity components at every vertex followed by one
//! pressure per fluid vertex. The pressure block carries the Brezzi–Pitkäranta
//! term `-ε ∫ ∇p·∇q`.

use std::io::Write;

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use rayon::prelude::*;

use crate::constitutive::{coefficients, kinematics_from_grad, Mat2, MaterialParams};
use crate::error::{FsiError, Result};
use crate::mesh::{BoundaryLabel, Mesh, Point, Region};

/// Symmetric quadrature rule on the reference triangle, in barycentric
/// coordinates with weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl Quadrature {
    /// Three interior points, exact for quadratics.
    pub fn degree2() -> Self {
        let (a, b) = (2.0 / 3.0, 1.0 / 6.0);
        Quadrature { points: vec![[a, b, b], [b, a, b], [b, b, a]], weights: vec![1.0 / 3.0; 3] }
    }

    /// Seven points, exact for polynomials of degree five.
    pub fn degree5() -> Self {
        let s = 15f64.sqrt();
        let (b1, b2) = ((6.0 - s) / 21.0, (6.0 + s) / 21.0);
        let (a1, a2) = (1.0 - 2.0 * b1, 1.0 - 2.0 * b2);
        let (w1, w2) = ((155.0 - s) / 1200.0, (155.0 + s) / 1200.0);
        Quadrature {
            points: vec![
                [1.0 / 3.0; 3],
                [a1, b1, b1],
                [b1, a1, b1],
                [b1, b1, a1],
                [a2, b2, b2],
                [b2, a2, b2],
                [b2, b2, a2],
            ],
            weights: vec![9.0 / 40.0, w1, w1, w1, w2, w2, w2],
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Physical coordinates of the quadrature points of triangle `t`.
    pub fn physical_points(&self, mesh: &Mesh, t: usize) -> Vec<Point> {
        let tri = mesh.triangles[t];
        self.points
            .iter()
            .map(|l| {
                let mut p = [0.0; 2];
                for k in 0..3 {
                    p[0] += l[k] * mesh.vertices[tri[k]][0];
                    p[1] += l[k] * mesh.vertices[tri[k]][1];
                }
                p
            })
            .collect()
    }
}

/// `∫_T φ_a φ_b` evaluated with `rule`.
pub fn element_mass(area: f64, rule: &Quadrature) -> [[f64; 3]; 3] {
    let mut m = [[0.0; 3]; 3];
    for (l, w) in rule.points.iter().zip(&rule.weights) {
        for a in 0..3 {
            for b in 0..3 {
                m[a][b] += w * area * l[a] * l[b];
            }
        }
    }
    m
}

/// Degree-of-freedom numbering.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    pub n_vertices: usize,
    /// Pressure unknown of each vertex, for vertices touching the fluid.
    pub pressure: Vec<Option<usize>>,
    pub n_dofs: usize,
}

impl DofMap {
    pub fn new(mesh: &Mesh) -> Self {
        let nv = mesh.num_vertices();
        let mut next = 2 * nv;
        let pressure = mesh
            .fluid_vertex_mask()
            .into_iter()
            .map(|f| {
                f.then(|| {
                    next += 1;
                    next - 1
                })
            })
            .collect();
        DofMap { n_vertices: nv, pressure, n_dofs: next }
    }

    pub fn velocity(&self, v: usize, k: usize) -> usize {
        2 * v + k
    }

    pub fn n_pressure(&self) -> usize {
        self.n_dofs - 2 * self.n_vertices
    }
}

/// Frozen data of one solid element for one fixed-point iterate.
///
/// The scalars already include the `J²` factor, so that
/// `ρ (beta C : Dv + (kappa + lambda_eff tr G) div v)` is the exact
/// St Venant–Kirchhoff virtual work.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolidElement {
    pub rho: f64,
    pub beta: f64,
    pub kappa: f64,
    pub lambda_eff: f64,
    /// Gradient of the transported displacement.
    pub grad_d: Mat2,
    /// `dt` times the gradient of the lagged velocity (zero without the energy-stable term).
    pub lag: Mat2,
}

impl SolidElement {
    /// Coefficients frozen at `grad_d + dt grad_u` (energy-stable form) or at `grad_d`.
    pub fn new(
        mat: &MaterialParams,
        grad_d: Mat2,
        grad_u_lagged: Mat2,
        dt: f64,
        energy_stable: bool,
    ) -> Result<Self> {
        let g_eval = if energy_stable { grad_d + dt * grad_u_lagged } else { grad_d };
        let kin = kinematics_from_grad(&g_eval)?;
        let co = coefficients(&kin, mat);
        let j2 = kin.j * kin.j;
        Ok(SolidElement {
            rho: mat.rho0_s / kin.j,
            beta: j2 * co.b,
            kappa: j2 * co.c,
            lambda_eff: j2 * mat.lambda_s,
            grad_d,
            lag: if energy_stable { dt * grad_u_lagged } else { Mat2::zeros() },
        })
    }

    fn is_finite(&self) -> bool {
        [self.rho, self.beta, self.kappa, self.lambda_eff].iter().all(|x| x.is_finite())
            && self.grad_d.iter().all(|x| x.is_finite())
            && self.lag.iter().all(|x| x.is_finite())
    }
}

/// Gradient (row index = derivative) of a P1 vector field on triangle `t`.
pub fn element_gradient(mesh: &Mesh, t: usize, field: &[[f64; 2]]) -> Mat2 {
    let (g, _) = mesh.gradients(t);
    let tri = mesh.triangles[t];
    let mut m = Mat2::zeros();
    for a in 0..3 {
        for i in 0..2 {
            for j in 0..2 {
                m[(i, j)] += g[a][i] * field[tri[a]][j];
            }
        }
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeMode {
    Transient { dt: f64 },
    /// Drops the inertia term; only valid without solid elements.
    Steady,
}

/// Values of a vector field at the quadrature points of every triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadField {
    pub per_triangle: usize,
    pub values: Vec<[f64; 2]>,
}

impl QuadField {
    pub fn at(&self, t: usize, q: usize) -> [f64; 2] {
        self.values[t * self.per_triangle + q]
    }
}

pub struct AssemblyInput<'a> {
    pub mesh: &'a Mesh,
    pub dofs: &'a DofMap,
    pub mat: &'a MaterialParams,
    pub time: TimeMode,
    pub rule: &'a Quadrature,
    /// Previous velocity composed with the backward characteristic map.
    pub composed: Option<&'a QuadField>,
    /// Indexed by triangle; `None` for fluid triangles. Empty when there is no solid.
    pub solid: &'a [Option<SolidElement>],
}

/// Global system in coordinate form; duplicate entries are summed.
#[derive(Debug, Clone, PartialEq)]
pub struct AssembledSystem {
    pub n: usize,
    pub entries: Vec<(usize, usize, f64)>,
    pub rhs: Vec<f64>,
}

struct Local {
    dofs: [usize; 9],
    n: usize,
    k: [[f64; 9]; 9],
    f: [f64; 9],
}

fn basis_grad(g: &[[f64; 2]; 3], a: usize, k: usize) -> Mat2 {
    let mut m = Mat2::zeros();
    m[(0, k)] = g[a][0];
    m[(1, k)] = g[a][1];
    m
}

fn sym(m: &Mat2) -> Mat2 {
    m + m.transpose()
}

/// Hydrostatic pressure `ρ_f g·(x - x_ref)` with `x_ref` on the highest vertex,
/// so it vanishes at the top of the domain.
pub fn hydrostatic_pressure(mesh: &Mesh, mat: &MaterialParams, p: Point) -> f64 {
    let top = mesh.vertices.iter().map(|v| v[1]).fold(f64::NEG_INFINITY, f64::max);
    mat.rho0_f * (mat.gravity[0] * p[0] + mat.gravity[1] * (p[1] - top))
}

fn has_gravity(mat: &MaterialParams) -> bool {
    mat.gravity != [0.0, 0.0]
}

/// Builds the linear system of one fixed-point iterate.
///
/// With gravity the unknown pressure is the deviation from the hydrostatic
/// pressure; the outflow then carries the hydrostatic traction.
pub fn assemble_monolithic(input: &AssemblyInput<'_>) -> Result<AssembledSystem> {
    let mesh = input.mesh;
    let mat = input.mat;
    let dofs = input.dofs;
    let dt = match input.time {
        TimeMode::Transient { dt } => {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(FsiError::Config(format!("time step must be positive, got {dt}")));
            }
            Some(dt)
        }
        TimeMode::Steady => None,
    };
    if let Some(c) = input.composed {
        if c.per_triangle != input.rule.len() || c.values.len() != c.per_triangle * mesh.triangles.len() {
            return Err(FsiError::LengthMismatch {
                expected: input.rule.len() * mesh.triangles.len(),
                got: c.values.len(),
            });
        }
    }
    let gravity = has_gravity(mat);
    let top = mesh.vertices.iter().map(|v| v[1]).fold(f64::NEG_INFINITY, f64::max);
    let p_h = |p: Point| mat.rho0_f * (mat.gravity[0] * p[0] + mat.gravity[1] * (p[1] - top));

    let locals: Vec<Local> = (0..mesh.triangles.len())
        .into_par_iter()
        .map(|t| -> Result<Local> {
            let tri = mesh.triangles[t];
            let (g, area) = mesh.gradients(t);
            let mut loc = Local { dofs: [0; 9], n: 6, k: [[0.0; 9]; 9], f: [0.0; 9] };
            for a in 0..3 {
                loc.dofs[2 * a] = dofs.velocity(tri[a], 0);
                loc.dofs[2 * a + 1] = dofs.velocity(tri[a], 1);
            }
            let solid = match mesh.regions[t] {
                Region::Solid => {
                    let s = input
                        .solid
                        .get(t)
                        .copied()
                        .flatten()
                        .ok_or_else(|| FsiError::Assembly { element: t, detail: "missing solid data".into() })?;
                    if !s.is_finite() {
                        return Err(FsiError::Assembly { element: t, detail: format!("non-finite coefficients {s:?}") });
                    }
                    Some(s)
                }
                Region::Fluid => None,
            };
            let rho = solid.map_or(mat.rho0_f, |s| s.rho);
            let grads: Vec<Mat2> = (0..6).map(|i| basis_grad(&g, i / 2, i % 2)).collect();

            if let Some(dt) = dt {
                let m = element_mass(area, input.rule);
                for a in 0..3 {
                    for b in 0..3 {
                        for k in 0..2 {
                            loc.k[2 * a + k][2 * b + k] += rho / dt * m[a][b];
                        }
                    }
                }
                if let Some(c) = input.composed {
                    for (q, (l, w)) in input.rule.points.iter().zip(&input.rule.weights).enumerate() {
                        let v = c.at(t, q);
                        for a in 0..3 {
                            for k in 0..2 {
                                loc.f[2 * a + k] += rho / dt * w * area * l[a] * v[k];
                            }
                        }
                    }
                }
            }
            for a in 0..3 {
                for k in 0..2 {
                    loc.f[2 * a + k] += rho * mat.gravity[k] * area / 3.0;
                }
            }

            match solid {
                Some(s) => {
                    let dt = dt.ok_or_else(|| FsiError::Assembly {
                        element: t,
                        detail: "solid elements need a transient time mode".into(),
                    })?;
                    let a_left = s.grad_d + s.lag;
                    let c_d = sym(&s.grad_d) - s.grad_d * s.grad_d.transpose();
                    let tr_d = s.grad_d.trace();
                    for i in 0..6 {
                        let dv = sym(&grads[i]);
                        let div_v = grads[i].trace();
                        for j in 0..6 {
                            let gu = &grads[j];
                            let lin = sym(gu) - a_left * gu.transpose() - gu * s.grad_d.transpose();
                            let val = s.beta * lin.component_mul(&dv).sum() + s.lambda_eff * gu.trace() * div_v;
                            loc.k[i][j] += dt * s.rho * area * val;
                        }
                        loc.f[i] -= s.rho
                            * area
                            * (s.beta * c_d.component_mul(&dv).sum() + (s.kappa + s.lambda_eff * tr_d) * div_v);
                    }
                }
                None => {
                    loc.n = 9;
                    for a in 0..3 {
                        loc.dofs[6 + a] = dofs.pressure[tri[a]].ok_or_else(|| FsiError::Assembly {
                            element: t,
                            detail: "fluid vertex without pressure unknown".into(),
                        })?;
                    }
                    for i in 0..6 {
                        let dv = sym(&grads[i]);
                        for j in 0..6 {
                            loc.k[i][j] += 0.5 * mat.mu_f * area * sym(&grads[j]).component_mul(&dv).sum();
                        }
                        // -∫ p div v and -∫ q div u with P1 pressure: ∫ φ_b = area / 3.
                        let div_v = grads[i].trace();
                        for b in 0..3 {
                            loc.k[i][6 + b] -= area / 3.0 * div_v;
                            loc.k[6 + b][i] -= area / 3.0 * div_v;
                        }
                    }
                    for a in 0..3 {
                        for b in 0..3 {
                            loc.k[6 + a][6 + b] -=
                                mat.epsilon_stab * area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                        }
                    }
                    if gravity {
                        let ph = p_h(mesh.centroid(t));
                        for i in 0..6 {
                            loc.f[i] += ph * area * grads[i].trace();
                        }
                    }
                }
            }
            Ok(loc)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut entries = Vec::with_capacity(locals.iter().map(|l| l.n * l.n).sum());
    let mut rhs = vec![0.0; dofs.n_dofs];
    for loc in &locals {
        for i in 0..loc.n {
            rhs[loc.dofs[i]] += loc.f[i];
            for j in 0..loc.n {
                if loc.k[i][j] != 0.0 {
                    entries.push((loc.dofs[i], loc.dofs[j], loc.k[i][j]));
                }
            }
        }
    }
    if gravity {
        for e in mesh.boundary_edges.iter().filter(|e| e.label == BoundaryLabel::GammaOut) {
            let (a, b) = (mesh.vertices[e.v[0]], mesh.vertices[e.v[1]]);
            let d = [b[0] - a[0], b[1] - a[1]];
            let normal_len = [d[1], -d[0]];
            let (pa, pb) = (p_h(a), p_h(b));
            for (v, w) in [(e.v[0], (2.0 * pa + pb) / 6.0), (e.v[1], (pa + 2.0 * pb) / 6.0)] {
                for k in 0..2 {
                    rhs[dofs.velocity(v, k)] -= w * normal_len[k];
                }
            }
        }
    }
    Ok(AssembledSystem { n: dofs.n_dofs, entries, rhs })
}

/// Parabolic inflow `u_x = ramp · ubar · 6 y (H - y) / H²`, peak `1.5 ubar`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InflowProfile {
    pub ubar: f64,
    pub height: f64,
    pub ramp: f64,
}

impl InflowProfile {
    pub fn velocity(&self, y: f64) -> [f64; 2] {
        [self.ramp * self.ubar * 6.0 * y * (self.height - y) / (self.height * self.height), 0.0]
    }
}

/// Prescribed values: zero velocity on walls (including the clamped root),
/// the inflow profile on the inlet, and a pinned pressure when no boundary
/// carries a natural condition.
pub fn dirichlet_values(mesh: &Mesh, dofs: &DofMap, inflow: Option<&InflowProfile>) -> Result<Vec<(usize, f64)>> {
    if inflow.is_some() && !mesh.has_label(BoundaryLabel::GammaIn) {
        return Err(FsiError::Config("inflow given but the mesh has no inlet".into()));
    }
    let labels = mesh.vertex_labels();
    let mut out = Vec::new();
    for (v, ls) in labels.iter().enumerate() {
        let value = if ls.contains(&BoundaryLabel::GammaWall) {
            Some([0.0, 0.0])
        } else if ls.contains(&BoundaryLabel::GammaIn) {
            Some(inflow.map_or([0.0, 0.0], |f| f.velocity(mesh.vertices[v][1])))
        } else {
            None
        };
        if let Some(val) = value {
            out.push((dofs.velocity(v, 0), val[0]));
            out.push((dofs.velocity(v, 1), val[1]));
        }
    }
    let open = mesh.has_label(BoundaryLabel::GammaOut) || mesh.n_solid_vertices > 0;
    if !open {
        if let Some(p) = dofs.pressure.iter().flatten().next() {
            out.push((*p, 0.0));
        }
    }
    Ok(out)
}

/// System restricted to the free unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSystem {
    pub n_full: usize,
    /// Full index of each reduced unknown.
    pub free: Vec<usize>,
    pub fixed: Vec<(usize, f64)>,
    pub entries: Vec<(usize, usize, f64)>,
    pub rhs: Vec<f64>,
}

/// Eliminates prescribed unknowns, moving their columns to the right-hand side.
pub fn apply_dirichlet(sys: &AssembledSystem, fixed: &[(usize, f64)]) -> ReducedSystem {
    let mut value = vec![None; sys.n];
    for &(i, v) in fixed {
        value[i] = Some(v);
    }
    let mut map = vec![usize::MAX; sys.n];
    let mut free = Vec::new();
    for i in 0..sys.n {
        if value[i].is_none() {
            map[i] = free.len();
            free.push(i);
        }
    }
    let mut rhs: Vec<f64> = free.iter().map(|&i| sys.rhs[i]).collect();
    let mut entries = Vec::with_capacity(sys.entries.len());
    for &(i, j, a) in &sys.entries {
        if value[i].is_some() {
            continue;
        }
        match value[j] {
            Some(v) => rhs[map[i]] -= a * v,
            None => entries.push((map[i], map[j], a)),
        }
    }
    let mut fixed: Vec<(usize, f64)> = value.iter().enumerate().filter_map(|(i, v)| v.map(|v| (i, v))).collect();
    fixed.sort_by_key(|f| f.0);
    ReducedSystem { n_full: sys.n, free, fixed, entries, rhs }
}

pub fn apply_boundary_conditions(
    sys: &AssembledSystem,
    mesh: &Mesh,
    dofs: &DofMap,
    inflow: Option<&InflowProfile>,
) -> Result<ReducedSystem> {
    Ok(apply_dirichlet(sys, &dirichlet_values(mesh, dofs, inflow)?))
}

impl ReducedSystem {
    fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rhs.len()];
        for &(i, j, a) in &self.entries {
            y[i] += a * x[j];
        }
        y
    }

    /// Writes the reduced matrix in MatrixMarket coordinate format.
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.rhs.len(), self.rhs.len(), self.entries.len())?;
        for &(i, j, a) in &self.entries {
            writeln!(w, "{} {} {:.17e}", i + 1, j + 1, a)?;
        }
        Ok(())
    }
}

/// Relative residual accepted from the direct solver.
pub const SOLVER_TOLERANCE: f64 = 1e-10;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Sparse LU solve with iterative refinement; returns the full unknown vector.
pub fn solve(sys: &ReducedSystem) -> Result<Vec<f64>> {
    let n = sys.rhs.len();
    let mut full = vec![0.0; sys.n_full];
    for &(i, v) in &sys.fixed {
        full[i] = v;
    }
    let bnorm = norm(&sys.rhs);
    if n == 0 || bnorm == 0.0 {
        return Ok(full);
    }
    static SEQUENTIAL: std::sync::Once = std::sync::Once::new();
    SEQUENTIAL.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
    let triplets: Vec<Triplet<usize, usize, f64>> =
        sys.entries.iter().map(|&(i, j, a)| Triplet::new(i, j, a)).collect();
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| FsiError::Solver(format!("matrix construction failed: {e:?}")))?;
    let lu = a.sp_lu().map_err(|e| FsiError::Solver(format!("factorization failed: {e:?}")))?;
    let mut x = vec![0.0; n];
    let mut r = sys.rhs.clone();
    let mut rel = 1.0;
    for _ in 0..4 {
        let mut b = faer::Mat::<f64>::from_fn(n, 1, |i, _| r[i]);
        lu.solve_in_place(b.as_mut());
        for i in 0..n {
            x[i] += b[(i, 0)];
        }
        let ax = sys.matvec(&x);
        r = sys.rhs.iter().zip(&ax).map(|(b, y)| b - y).collect();
        rel = norm(&r) / bnorm;
        if !rel.is_finite() {
            return Err(FsiError::Solver("singular system (non-finite solution)".into()));
        }
        if rel <= SOLVER_TOLERANCE {
            break;
        }
    }
    if rel > SOLVER_TOLERANCE {
        return Err(FsiError::Solver(format!("relative residual {rel:.3e} above {SOLVER_TOLERANCE:e}")));
    }
    for (k, &i) in sys.free.iter().enumerate() {
        full[i] = x[k];
    }
    Ok(full)
}

/// Splits a full unknown vector into nodal velocity and pressure (zero off the fluid).
pub fn split_solution(x: &[f64], dofs: &DofMap) -> (Vec<[f64; 2]>, Vec<f64>) {
    let u = (0..dofs.n_vertices).map(|v| [x[2 * v], x[2 * v + 1]]).collect();
    let p = dofs.pressure.iter().map(|p| p.map_or(0.0, |i| x[i])).collect();
    (u, p)
}

/// Pressure stabilization `ε0 h̄² / μ_f` from the mean fluid edge length.
pub fn stabilization_epsilon(mesh: &Mesh, epsilon0: f64, mu_f: f64) -> f64 {
    let h = mesh.mean_fluid_edge_length();
    epsilon0 * h * h / if mu_f > 0.0 { mu_f } else { 1.0 }
}

/// `∫ ρ/2 |u|²` with element densities (`rho[t]`).
pub fn kinetic_energy(mesh: &Mesh, u: &[[f64; 2]], rho: &[f64]) -> f64 {
    let rule = Quadrature::degree2();
    (0..mesh.triangles.len())
        .map(|t| {
            let m = element_mass(mesh.area(t), &rule);
            let tri = mesh.triangles[t];
            let mut e = 0.0;
            for a in 0..3 {
                for b in 0..3 {
                    e += m[a][b] * (u[tri[a]][0] * u[tri[b]][0] + u[tri[a]][1] * u[tri[b]][1]);
                }
            }
            0.5 * rho[t] * e
        })
        .sum()
}

/// `∫_fluid μ_f/2 |Du|² + ε |∇p|²`, the dissipation rate of the fluid.
pub fn fluid_dissipation_rate(mesh: &Mesh, u: &[[f64; 2]], p: &[f64], mat: &MaterialParams) -> f64 {
    mesh.fluid_triangles()
        .map(|t| {
            let (g, area) = mesh.gradients(t);
            let du = sym(&element_gradient(mesh, t, u));
            let tri = mesh.triangles[t];
            let gp = (0..3).fold([0.0; 2], |acc, a| {
                [acc[0] + g[a][0] * p[tri[a]], acc[1] + g[a][1] * p[tri[a]]]
            });
            area * (0.5 * mat.mu_f * du.norm_squared() + mat.epsilon_stab * (gp[0] * gp[0] + gp[1] * gp[1]))
        })
        .sum()
}
