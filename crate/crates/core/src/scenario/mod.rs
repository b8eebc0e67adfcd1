//! Benchmark configurations and the run driver.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::constitutive::{Mat2, MaterialParams};
use crate::error::{FsiError, Result};
use crate::fem::{element_gradient, stabilization_epsilon, InflowProfile};
use crate::mesh::{self, build_channel_mesh, build_flustruk_mesh, FlustrukGeometry, Mesh, Point, VtkFields};
use crate::timestepper::{
    advance_with_retry, energy_audit, energy_of, nearest_solid_vertex, solid_wall_gap, tip_tracker, ComposeMode,
    EnergyVerdict, State, StepOptions,
};

mod output;

pub use output::{
    estimate_frequency_amplitude, plot_from_csv, read_timeseries, write_manifest, TimeSeriesRow, CSV_HEADER,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Flag falling under its own weight in a closed channel.
    Fsi2star,
    /// Flag fluttering in the wake of the cylinder.
    Fsi3,
    /// Flustruk geometry with no forcing.
    Rest,
    /// Empty channel with parabolic inflow.
    Poiseuille,
    /// Initially bent flag released in still fluid.
    FreeDecay,
}

impl Scenario {
    pub const ALL: [Scenario; 5] =
        [Scenario::Fsi2star, Scenario::Fsi3, Scenario::Rest, Scenario::Poiseuille, Scenario::FreeDecay];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Fsi2star => "fsi2star",
            Scenario::Fsi3 => "fsi3",
            Scenario::Rest => "rest",
            Scenario::Poiseuille => "poiseuille",
            Scenario::FreeDecay => "free_decay",
        }
    }

    pub fn config(self) -> RunConfig {
        match self {
            Scenario::Fsi2star => scenario_fsi2star(),
            Scenario::Fsi3 => scenario_fsi3(),
            Scenario::Rest => scenario_rest(),
            Scenario::Poiseuille => scenario_poiseuille(),
            Scenario::FreeDecay => scenario_free_decay(),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = FsiError;
    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| FsiError::Config(format!("unknown scenario '{s}'")))
    }
}

/// Physical inputs. Solid moduli are given in Pa and divided by the solid
/// density; `scaled_mu_s` and `scaled_lambda_s` replace the derived values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialConfig {
    /// Shear modulus (Pa).
    pub mu_s: f64,
    pub poisson: f64,
    pub rho_s: f64,
    pub rho_f: f64,
    /// Kinematic viscosity of the fluid (m²/s).
    pub nu_f: f64,
    pub gravity: [f64; 2],
    /// Pressure stabilization is `epsilon0 h² / μ_f` with `h` the mean fluid edge length.
    pub epsilon0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaled_mu_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaled_lambda_s: Option<f64>,
}

impl MaterialConfig {
    pub fn params(&self, epsilon_stab: f64) -> MaterialParams {
        let mu_f = self.rho_f * self.nu_f;
        let mut m = MaterialParams::from_shear_modulus(
            self.mu_s,
            self.poisson,
            self.rho_s,
            mu_f,
            self.rho_f,
            epsilon_stab,
            self.gravity,
        );
        if let Some(v) = self.scaled_mu_s {
            m.mu_s = v;
        }
        if let Some(v) = self.scaled_lambda_s {
            m.lambda_s = v;
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub scenario: Scenario,
    /// Mean inflow velocity (m/s); zero closes the inlet.
    pub ubar: f64,
    /// Time over which the inflow grows linearly from zero (s).
    pub ramp_time: f64,
    pub dt: f64,
    pub t_end: f64,
    /// Vertical tip deflection of the initial cantilever shape (m).
    pub tip_deflection: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub snapshot_stride: usize,
    pub fp_tol: f64,
    pub fp_max_iter: usize,
    pub energy_stable: bool,
    /// Recorded in the manifest. Mesh generation is deterministic and does not draw from it.
    pub seed: u64,
    pub geometry: FlustrukGeometry,
    pub material: MaterialConfig,
}

fn fsi3_material() -> MaterialConfig {
    MaterialConfig {
        mu_s: 2.0e6,
        poisson: 0.4,
        rho_s: 1.0e3,
        rho_f: 1.0e3,
        nu_f: 1.0e-3,
        gravity: [0.0, 0.0],
        epsilon0: 1e-2,
        scaled_mu_s: None,
        scaled_lambda_s: None,
    }
}

fn base(scenario: Scenario) -> RunConfig {
    RunConfig {
        scenario,
        ubar: 0.0,
        ramp_time: 0.0,
        dt: 0.005,
        t_end: 1.0,
        tip_deflection: 0.0,
        output_dir: None,
        snapshot_stride: 20,
        fp_tol: 1e-6,
        fp_max_iter: 30,
        energy_stable: true,
        seed: 0,
        geometry: FlustrukGeometry::default(),
        material: fsi3_material(),
    }
}

pub fn scenario_fsi2star() -> RunConfig {
    RunConfig {
        material: MaterialConfig { mu_s: 0.135e6, rho_s: 2.0e4, gravity: [0.0, -9.81], ..fsi3_material() },
        ..base(Scenario::Fsi2star)
    }
}

pub fn scenario_fsi3() -> RunConfig {
    RunConfig { ubar: 2.0, ramp_time: 0.5, t_end: 5.0, ..base(Scenario::Fsi3) }
}

pub fn scenario_rest() -> RunConfig {
    RunConfig { t_end: 0.1, ..base(Scenario::Rest) }
}

pub fn scenario_poiseuille() -> RunConfig {
    RunConfig {
        ubar: 1.0,
        t_end: 0.5,
        geometry: FlustrukGeometry { target_vertex_count: 2000, ..FlustrukGeometry::default() },
        ..base(Scenario::Poiseuille)
    }
}

pub fn scenario_free_decay() -> RunConfig {
    RunConfig {
        tip_deflection: 0.05,
        t_end: 0.5,
        geometry: FlustrukGeometry { target_vertex_count: 600, ..FlustrukGeometry::default() },
        ..base(Scenario::FreeDecay)
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(FsiError::Config(m.to_string()));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if !(self.t_end >= self.dt) {
            return bad("t_end must be at least dt");
        }
        if self.snapshot_stride == 0 {
            return bad("snapshot_stride must be at least 1");
        }
        if !(self.fp_tol > 0.0) || self.fp_max_iter == 0 {
            return bad("fixed-point tolerance and iteration limit must be positive");
        }
        if !(self.ubar >= 0.0 && self.ramp_time >= 0.0) {
            return bad("ubar and ramp_time must be non-negative");
        }
        if self.scenario == Scenario::Poiseuille && self.tip_deflection != 0.0 {
            return bad("the empty channel has no flag to bend");
        }
        let m = &self.material;
        if !(m.poisson > -1.0 && m.poisson < 0.5) {
            return bad("poisson ratio must lie in (-1, 0.5)");
        }
        if !(m.epsilon0 > 0.0 && m.nu_f > 0.0) {
            return bad("epsilon0 and nu_f must be positive");
        }
        self.geometry.validate()?;
        self.material.params(1.0).validate()
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| FsiError::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| FsiError::Config(e.to_string()))
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round().max(1.0) as usize
    }

    pub fn inflow_ramp(&self, t: f64) -> f64 {
        if self.ramp_time > 0.0 {
            (t / self.ramp_time).min(1.0)
        } else {
            1.0
        }
    }

    pub fn initial_mesh(&self) -> Result<Mesh> {
        match self.scenario {
            Scenario::Poiseuille => {
                build_channel_mesh(self.geometry.length, self.geometry.height, self.geometry.target_vertex_count)
            }
            _ => build_flustruk_mesh(&self.geometry),
        }
    }
}

/// Initial bending of the flag: centreline deflection
/// `w(s) = w_tip (s/l)² (3 - s/l) / 2` from the root, cross sections kept normal
/// to the centreline and its length kept to second order.
pub fn cantilever_deflection(geometry: &FlustrukGeometry, tip: f64) -> impl Fn(Point) -> [f64; 2] {
    let root = geometry.center + geometry.radius;
    let mid = geometry.center;
    let l = geometry.flag_length;
    move |p: Point| {
        let s = ((p[0] - root) / l).clamp(0.0, 1.0);
        let w = tip * s * s * (3.0 - s) / 2.0;
        let theta = (1.5 * tip / l * s * (2.0 - s)).atan();
        let shortening = 9.0 * tip * tip / (8.0 * l) * (4.0 / 3.0 * s.powi(3) - s.powi(4) + s.powi(5) / 5.0);
        let eta = p[1] - mid;
        [-eta * theta.sin() - shortening, w + eta * (theta.cos() - 1.0)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Completed,
    /// The flag came within half a mesh spacing of a wall.
    ContactImminent,
}

/// Everything a run produces besides files.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub rows: Vec<TimeSeriesRow>,
    /// Largest nodal speed after each accepted step.
    pub max_speed: Vec<f64>,
    pub verdicts: Vec<EnergyVerdict>,
    /// Solid mass after each accepted step, preceded by the initial mass.
    pub solid_mass: Vec<f64>,
    /// Largest `|det(I - ∇d)⁻¹ - area/area₀|` over solid triangles after each step.
    pub geometry_mismatch: Vec<f64>,
    pub stop: StopReason,
    pub final_state: State,
    pub epsilon_stab: f64,
}

fn geometry_mismatch(state: &State) -> f64 {
    let d = state.displacement_field();
    state
        .mesh
        .solid_triangles()
        .enumerate()
        .map(|(k, t)| {
            let g = element_gradient(&state.mesh, t, &d);
            let ratio = state.mesh.area(t) / state.reference_solid.area(k);
            ((Mat2::identity() - g).determinant().recip() - ratio).abs()
        })
        .fold(0.0, f64::max)
}

fn row(state: &State, mat: &MaterialParams, tip: Option<u64>, fp_iterations: usize) -> Result<TimeSeriesRow> {
    let e = energy_of(state, mat)?;
    let [tip_x, tip_y] = match tip {
        Some(id) => tip_tracker(state, id)?,
        None => [f64::NAN, f64::NAN],
    };
    let ratio = state.min_solid_area_ratio();
    Ok(TimeSeriesRow {
        t: state.time,
        tip_x,
        tip_y,
        e_kinetic: e.kinetic,
        e_elastic: e.elastic,
        e_dissip_cum: e.dissipation_cumulative,
        e_total: e.total,
        fp_iterations,
        min_solid_area_ratio: if ratio.is_finite() { ratio } else { f64::NAN },
    })
}

fn write_snapshot(dir: &std::path::Path, index: usize, state: &State) -> Result<()> {
    let d = state.displacement_field();
    let fields = VtkFields { velocity: Some(&state.u), pressure: Some(&state.p), displacement: Some(&d) };
    let file = fs::File::create(dir.join(format!("snap_{index:06}.vtk")))?;
    mesh::write_vtk(&state.mesh, &fields, BufWriter::new(file))
}

/// Runs the time loop, writing artifacts when `config.output_dir` is set.
pub fn run(config: &RunConfig) -> Result<RunSummary> {
    config.validate()?;
    let mesh0 = config.initial_mesh()?;
    let mu_f = config.material.rho_f * config.material.nu_f;
    let epsilon_stab = stabilization_epsilon(&mesh0, config.material.epsilon0, mu_f);
    let mat = config.material.params(epsilon_stab);
    let spacing = mesh0.mean_fluid_edge_length();
    let g = &config.geometry;
    let tip = nearest_solid_vertex(&mesh0, [g.center + g.radius + g.flag_length, g.center + 0.5 * g.flag_thickness]);
    let mut state = if config.tip_deflection != 0.0 {
        State::with_displacement(mesh0, &mat, &cantilever_deflection(g, config.tip_deflection))?
    } else {
        State::at_rest(mesh0, &mat)?
    };
    let forcing_free = config.ubar == 0.0 && mat.gravity == [0.0, 0.0];

    let mut csv = None;
    if let Some(dir) = &config.output_dir {
        fs::create_dir_all(dir)?;
        write_manifest(config, &dir.join("manifest.txt"))?;
        let mut w = BufWriter::new(fs::File::create(dir.join("timeseries.csv"))?);
        writeln!(w, "{CSV_HEADER}")?;
        write_snapshot(dir, 0, &state)?;
        csv = Some(w);
    }

    let first = row(&state, &mat, tip, 0)?;
    if let Some(w) = csv.as_mut() {
        first.write_csv(w)?;
    }
    let mut summary = RunSummary {
        rows: vec![first],
        max_speed: Vec::new(),
        verdicts: Vec::new(),
        solid_mass: vec![state.solid_mass()],
        geometry_mismatch: Vec::new(),
        stop: StopReason::Completed,
        final_state: state.clone(),
        epsilon_stab,
    };

    for step in 1..=config.steps() {
        let t_next = step as f64 * config.dt;
        let opts = StepOptions {
            dt: config.dt,
            fp_tol: config.fp_tol,
            fp_max_iter: config.fp_max_iter,
            energy_stable: config.energy_stable,
            inflow: (config.ubar > 0.0).then(|| InflowProfile {
                ubar: config.ubar,
                height: g.height,
                ramp: config.inflow_ramp(t_next),
            }),
            compose: ComposeMode::Quadrature,
            ..StepOptions::default()
        };
        for sub in advance_with_retry(&state, &mat, &opts)? {
            let (_, verdict) = energy_audit(&state, &sub.state, &mat, forcing_free)?;
            summary.verdicts.push(verdict);
            summary.max_speed.push(sub.state.max_speed());
            summary.solid_mass.push(sub.state.solid_mass());
            summary.geometry_mismatch.push(geometry_mismatch(&sub.state));
            let r = row(&sub.state, &mat, tip, sub.report.iterations)?;
            if let Some(w) = csv.as_mut() {
                r.write_csv(w)?;
                w.flush()?;
            }
            summary.rows.push(r);
            state = sub.state;
        }
        if let Some(dir) = &config.output_dir {
            if step % config.snapshot_stride == 0 {
                write_snapshot(dir, step, &state)?;
            }
        }
        if state.mesh.n_solid_vertices > 0 && solid_wall_gap(&state) < 0.5 * spacing {
            summary.stop = StopReason::ContactImminent;
            break;
        }
    }
    if let (Some(mut w), Some(dir)) = (csv, &config.output_dir) {
        w.flush()?;
        drop(w);
        plot_from_csv(&dir.join("timeseries.csv"), dir)?;
    }
    summary.final_state = state;
    Ok(summary)
}
