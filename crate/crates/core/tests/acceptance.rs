//! Acceptance criteria, one test each. Every test prints a single
//! `PASS` or `FAIL` line before asserting.

use std::io::Write;
use std::path::PathBuf;
use std::sync::OnceLock;

use monofsi::constitutive::{coefficients, kinematics_from_grad, stress_direct, stress_from_ab, Mat2, MaterialParams};
use monofsi::fem::{
    apply_boundary_conditions, assemble_monolithic, solve, split_solution, stabilization_epsilon, AssemblyInput,
    DofMap, InflowProfile, Quadrature, TimeMode,
};
use monofsi::mesh::{build_channel_mesh, Locator};
use monofsi::scenario::{
    estimate_frequency_amplitude, run, scenario_free_decay, scenario_fsi2star, scenario_fsi3, scenario_rest,
    RunConfig, RunSummary, StopReason,
};
use monofsi::timestepper::EnergyVerdict;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn verdict(id: u32, title: &str, pass: bool, detail: String) {
    let line = format!("{} criterion {id:>2} {title}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
    assert!(pass, "criterion {id} ({title}) failed: {detail}");
}

fn material(lambda_s: f64, mu_s: f64) -> MaterialParams {
    MaterialParams { lambda_s, mu_s, rho0_s: 1.0, mu_f: 1.0, rho0_f: 1.0, epsilon_stab: 1.0, gravity: [0.0, 0.0] }
}

/// Displacement gradients with `‖G‖ < 0.3` and `det(I - G) > 0.2`.
fn sample_gradients(n: usize) -> Vec<Mat2> {
    let mut rng = StdRng::seed_from_u64(20240611);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let g = Mat2::from_fn(|_, _| rng.random_range(-0.3..0.3));
        if g.norm() < 0.3 && (Mat2::identity() - g).determinant() > 0.2 {
            out.push(g);
        }
    }
    out
}

fn out_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("monofsi-acceptance-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

#[test]
fn criterion_01_stress_routes_agree() {
    let mat = material(8000.0, 2000.0);
    let worst = sample_gradients(1000)
        .iter()
        .map(|g| {
            let kin = kinematics_from_grad(g).unwrap();
            let direct = stress_direct(&kin, &mat);
            (stress_from_ab(&kin, &coefficients(&kin, &mat)) - direct).norm() / direct.norm()
        })
        .fold(0.0, f64::max);
    verdict(1, "stress from (a, b) equals direct stress", worst < 1e-10, format!("max relative difference {worst:.3e}"));
}

#[test]
fn criterion_02_cayley_hamilton() {
    let worst = sample_gradients(1000)
        .iter()
        .map(|g| {
            let k = kinematics_from_grad(g).unwrap();
            (k.b * k.b - k.gamma * k.b + k.j * k.j * Mat2::identity()).norm()
        })
        .fold(0.0, f64::max);
    verdict(2, "Cayley-Hamilton residual", worst < 1e-10, format!("max residual {worst:.3e}"));
}

#[test]
fn criterion_03_zero_strain_limits() {
    let mat = material(8000.0, 2000.0);
    let zero = coefficients(&kinematics_from_grad(&Mat2::zeros()).unwrap(), &mat);
    let g0 = Mat2::new(0.3, -0.7, 0.4, 0.2);
    let ratios: Vec<f64> = [1e-1, 1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&s| coefficients(&kinematics_from_grad(&(s * g0)).unwrap(), &mat).c.abs() / (s * s))
        .collect();
    let last_decade = (ratios[3] - ratios[2]).abs() / ratios[2];
    let pass = zero.a == 0.0 && zero.b == 0.5 * mat.mu_s && last_decade < 0.05;
    verdict(
        3,
        "zero-strain limits",
        pass,
        format!("a(0) = {}, b(0) = {}, |c|/s^2 = {ratios:.6?}, last-decade change {last_decade:.3e}", zero.a, zero.b),
    );
}

#[test]
fn criterion_04_small_strain_recovery() {
    let (lam, mu) = (8000.0, 2000.0);
    let mat = material(lam, mu);
    let s = 1e-4;
    let worst = sample_gradients(50)
        .iter()
        .map(|g0| {
            let kin = kinematics_from_grad(&(s * g0)).unwrap();
            let slope = stress_from_ab(&kin, &coefficients(&kin, &mat)) / s;
            let linear = mu * (g0 + g0.transpose()) + lam * g0.trace() * Mat2::identity();
            (slope - linear).norm() / linear.norm()
        })
        .fold(0.0, f64::max);
    verdict(4, "small-strain slope matches linear elasticity", worst < 0.01, format!("max relative deviation {worst:.3e}"));
}

#[test]
fn criterion_05_poiseuille() {
    let (len, h) = (2.5, 0.41);
    let mesh = build_channel_mesh(len, h, 2000).unwrap();
    let mut mat = material(0.0, 1.0);
    mat.epsilon_stab = stabilization_epsilon(&mesh, 1e-2, mat.mu_f);
    let dofs = DofMap::new(&mesh);
    let solid = vec![None; mesh.triangles.len()];
    let rule = Quadrature::degree5();
    let sys = assemble_monolithic(&AssemblyInput {
        mesh: &mesh,
        dofs: &dofs,
        mat: &mat,
        time: TimeMode::Steady,
        rule: &rule,
        composed: None,
        solid: &solid,
    })
    .unwrap();
    let inflow = InflowProfile { ubar: 1.0, height: h, ramp: 1.0 };
    let x = solve(&apply_boundary_conditions(&sys, &mesh, &dofs, Some(&inflow)).unwrap()).unwrap();
    let (u, _) = split_solution(&x, &dofs);
    let loc = Locator::new(&mesh, None);
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..=200 {
        let y = h * k as f64 / 200.0;
        let v = loc.eval(&loc.locate_or_project([0.5 * len, y], None).unwrap(), &u);
        let exact = 6.0 * y * (h - y) / (h * h);
        num += (v[0] - exact).powi(2) + v[1] * v[1];
        den += exact * exact;
    }
    let err = (num / den).sqrt();
    verdict(
        5,
        "Stokes channel reproduces the parabola",
        err < 0.02,
        format!("{} vertices, L2 relative error {err:.3e}", mesh.num_vertices()),
    );
}

#[test]
fn criterion_06_rest_is_preserved() {
    let config = RunConfig { t_end: 20.0 * 0.005, ..scenario_rest() };
    let summary = run(&config).unwrap();
    let worst = summary.max_speed.iter().copied().fold(0.0, f64::max);
    let pass = summary.max_speed.len() == 20 && worst < 1e-8;
    verdict(6, "rest is preserved", pass, format!("{} steps, max |u| {worst:.3e}", summary.max_speed.len()));
}

fn free_decay() -> &'static (RunConfig, RunSummary) {
    static RUN: OnceLock<(RunConfig, RunSummary)> = OnceLock::new();
    RUN.get_or_init(|| {
        let config = RunConfig { output_dir: Some(out_dir("free-decay-a")), ..scenario_free_decay() };
        let summary = run(&config).unwrap();
        (config, summary)
    })
}

#[test]
fn criterion_07_energy_inequality() {
    let (config, s) = free_decay();
    let accepted = s.verdicts.len();
    let failures = s.verdicts.iter().filter(|v| **v != EnergyVerdict::Pass).count();
    let pass = failures == 0 && s.rows.last().unwrap().t >= config.t_end - 1e-9 && s.stop == StopReason::Completed;
    let first = s.rows.first().unwrap().e_total;
    let last = s.rows.last().unwrap().e_total;
    verdict(
        7,
        "discrete energy inequality",
        pass,
        format!(
            "{} vertices, {accepted} accepted steps, {failures} failures, total energy {first:.6e} -> {last:.6e}",
            s.final_state.mesh.num_vertices()
        ),
    );
}

#[test]
fn criterion_08_solid_mass() {
    let (_, s) = free_decay();
    let m0 = s.solid_mass[0];
    let drift = s.solid_mass.iter().map(|m| (m - m0).abs() / m0).fold(0.0, f64::max);
    verdict(8, "solid mass conservation", drift < 1e-8, format!("max relative drift {drift:.3e}"));
}

#[test]
fn criterion_09_geometry_consistency() {
    let (_, s) = free_decay();
    let worst = s.geometry_mismatch.iter().copied().fold(0.0, f64::max);
    let pass = !s.geometry_mismatch.is_empty() && worst < 1e-10;
    verdict(9, "det(I - grad d)^-1 equals the area ratio", pass, format!("max difference {worst:.3e}"));
}

#[test]
fn criterion_10_free_fall() {
    let config = RunConfig { output_dir: Some(out_dir("fsi2star")), snapshot_stride: 1000, ..scenario_fsi2star() };
    let s = run(&config).unwrap();
    let y: Vec<f64> = s.rows.iter().map(|r| r.tip_y).collect();
    let first_min = (1..y.len().saturating_sub(1)).find(|&i| y[i] < y[i - 1] && y[i] <= y[i + 1]);
    let (t_min, how) = match (first_min, s.stop) {
        (Some(i), _) => (s.rows[i].t, "local minimum"),
        (None, StopReason::ContactImminent) => (s.rows.last().unwrap().t, "contact with the wall"),
        (None, StopReason::Completed) => (f64::NAN, "no minimum"),
    };
    let pass = (0.39..=0.59).contains(&t_min);
    verdict(
        10,
        "free fall reaches its first minimum",
        pass,
        format!(
            "{} vertices, {how} of tip y = {:.4} at t = {t_min:.3} s",
            s.final_state.mesh.num_vertices(),
            first_min.map_or(*y.last().unwrap(), |i| y[i])
        ),
    );
}

#[test]
fn criterion_11_flutter() {
    let config = RunConfig { output_dir: Some(out_dir("fsi3")), snapshot_stride: 1000, ..scenario_fsi3() };
    let s = run(&config).unwrap();
    let t: Vec<f64> = s.rows.iter().map(|r| r.t).collect();
    let y: Vec<f64> = s.rows.iter().map(|r| r.tip_y).collect();
    let reached = *t.last().unwrap();
    match estimate_frequency_amplitude(&t, &y) {
        Ok((f, a)) => verdict(
            11,
            "flutter frequency and amplitude",
            (4.0..=6.0).contains(&f) && (0.02..=0.045).contains(&a) && reached >= config.t_end - 1e-9,
            format!("up to t = {reached:.3} s: frequency {f:.3} Hz, amplitude {a:.4} m"),
        ),
        Err(e) => verdict(11, "flutter frequency and amplitude", false, format!("up to t = {reached:.3} s: {e}")),
    }
}

#[test]
fn criterion_12_determinism() {
    let (config, _) = free_decay();
    let dir_b = out_dir("free-decay-b");
    let second = RunConfig { output_dir: Some(dir_b.clone()), ..config.clone() };
    run(&second).unwrap();
    let a = std::fs::read(config.output_dir.as_ref().unwrap().join("timeseries.csv")).unwrap();
    let b = std::fs::read(dir_b.join("timeseries.csv")).unwrap();
    verdict(12, "repeated runs give identical time series", a == b, format!("{} bytes compared", a.len()));
}
