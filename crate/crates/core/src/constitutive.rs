//! Pointwise St Venant–Kirchhoff algebra in the Eulerian setting.
//!
//! The displacement gradient is stored row-wise as `G[(i, j)] = ∂_i d_j`, so
//! `F = (I - G)^{-T}` is the usual deformation gradient and `∇d ∇ᵀd = G Gᵀ`.
//! Elastic moduli are density-scaled: the Cauchy stress is `ρ` times the
//! quantities returned here, and they carry units of m²/s².

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{FsiError, Result};

pub type Mat2 = Matrix2<f64>;

/// Smallest admissible `det(I - G)`.
pub const DET_FLOOR: f64 = 1e-8;

/// Material data for both phases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    /// First Lamé coefficient of the solid divided by its density.
    pub lambda_s: f64,
    /// Shear modulus of the solid divided by its density.
    pub mu_s: f64,
    pub rho0_s: f64,
    /// Dynamic viscosity of the fluid.
    pub mu_f: f64,
    pub rho0_f: f64,
    /// Pressure stabilization coefficient.
    pub epsilon_stab: f64,
    pub gravity: [f64; 2],
}

impl MaterialParams {
    /// Builds density-scaled solid moduli from a shear modulus in Pa and a Poisson ratio.
    ///
    /// `E = 2 mu (1 + sigma) / rho_s` and `lambda = E sigma / ((1 + sigma)(1 - 2 sigma))`.
    pub fn from_shear_modulus(
        mu_pa: f64,
        poisson: f64,
        rho0_s: f64,
        mu_f: f64,
        rho0_f: f64,
        epsilon_stab: f64,
        gravity: [f64; 2],
    ) -> Self {
        let young = 2.0 * mu_pa * (1.0 + poisson) / rho0_s;
        let lambda_s = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
        MaterialParams {
            lambda_s,
            mu_s: mu_pa / rho0_s,
            rho0_s,
            mu_f,
            rho0_f,
            epsilon_stab,
            gravity,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.mu_s > 0.0
            && self.lambda_s >= 0.0
            && self.rho0_s > 0.0
            && self.rho0_f > 0.0
            && self.mu_f >= 0.0
            && self.epsilon_stab > 0.0
            && self.gravity.iter().all(|g| g.is_finite());
        if ok {
            Ok(())
        } else {
            Err(FsiError::Config(format!("invalid material parameters {self:?}")))
        }
    }
}

/// Deformation quantities derived from one displacement gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinematics {
    pub g: Mat2,
    pub f: Mat2,
    pub j: f64,
    /// `tr(F Fᵀ)` computed as a trace.
    pub gamma: f64,
    /// `(2 - 2 tr G + |G|²) J²`.
    pub gamma_closed: f64,
    pub gamma_tilde: f64,
    pub b: Mat2,
    /// `G + Gᵀ - G Gᵀ`.
    pub c_tensor: Mat2,
    pub e_green: Mat2,
}

/// Computes [`Kinematics`] from `G = ∇d`.
pub fn kinematics_from_grad(g: &Mat2) -> Result<Kinematics> {
    let m = Mat2::identity() - g;
    let det = m.determinant();
    if !(det > DET_FLOOR) {
        return Err(FsiError::SingularDeformation { det });
    }
    let m_inv = Mat2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]) / det;
    let f = m_inv.transpose();
    let j = 1.0 / det;
    let b = f * f.transpose();
    let gamma = b.trace();
    let gamma_closed = (2.0 - 2.0 * g.trace() + g.norm_squared()) * j * j;
    let c_tensor = g + g.transpose() - g * g.transpose();
    let e_green = 0.5 * (f.transpose() * f - Mat2::identity());
    Ok(Kinematics {
        g: *g,
        f,
        j,
        gamma,
        gamma_closed,
        gamma_tilde: gamma / (j * j),
        b,
        c_tensor,
        e_green,
    })
}

/// Scalar factors of the stress in the `a I + 2 b C` representation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub a: f64,
    pub b: f64,
    /// `a - lambda_s tr G`, the part of `a` that is at least quadratic in `G`.
    pub c: f64,
}

pub fn coefficients(kin: &Kinematics, mat: &MaterialParams) -> Coefficients {
    let (lam, mu) = (mat.lambda_s, mat.mu_s);
    let g = kin.gamma;
    let gt = kin.gamma_tilde;
    let j2 = kin.j * kin.j;
    let a = lam * (0.5 * g - 1.0) * (gt - 1.0) + mu * (g - j2 - 1.0) * gt;
    let b = 0.5 * (0.5 * lam + mu) * (g - 1.0) - 0.25 * lam;
    let c = a - lam * kin.g.trace();
    Coefficients { a: c + lam * kin.g.trace(), b, c }
}

/// Stored energy per unit reference mass, `λ/2 (tr E)² + μ tr(E²)`.
pub fn psi(kin: &Kinematics, mat: &MaterialParams) -> f64 {
    let e = &kin.e_green;
    0.5 * mat.lambda_s * e.trace().powi(2) + mat.mu_s * (e * e).trace()
}

/// `F (λ tr E I + 2 μ E) Fᵀ`, the Cauchy stress divided by the current density.
pub fn stress_direct(kin: &Kinematics, mat: &MaterialParams) -> Mat2 {
    let e = &kin.e_green;
    let s = mat.lambda_s * e.trace() * Mat2::identity() + 2.0 * mat.mu_s * e;
    let out = kin.f * s * kin.f.transpose();
    0.5 * (out + out.transpose())
}

/// The same stress rebuilt from `a`, `b` and `C`: `J² (a I + 2 b C)`.
///
/// The `J²` factor comes from writing `B` and `B²` in terms of `C` through
/// `B = (γ - J²) I + J² C`; without it the two routes differ at finite strain.
pub fn stress_from_ab(kin: &Kinematics, coef: &Coefficients) -> Mat2 {
    kin.j * kin.j * (coef.a * Mat2::identity() + 2.0 * coef.b * kin.c_tensor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_material() -> MaterialParams {
        MaterialParams {
            lambda_s: 1.0,
            mu_s: 1.0,
            rho0_s: 1.0,
            mu_f: 1.0,
            rho0_f: 1.0,
            epsilon_stab: 1.0,
            gravity: [0.0, 0.0],
        }
    }

    fn rel(a: &Mat2, b: &Mat2) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn identity_gradient() {
        let kin = kinematics_from_grad(&Mat2::zeros()).unwrap();
        assert_eq!(kin.f, Mat2::identity());
        assert_eq!(kin.j, 1.0);
        assert_eq!(kin.gamma, 2.0);
        assert_eq!(kin.gamma_tilde, 2.0);
        assert_eq!(kin.b, Mat2::identity());
        assert_eq!(kin.e_green, Mat2::zeros());
        let mat = MaterialParams { lambda_s: 3.0, mu_s: 7.0, ..unit_material() };
        let co = coefficients(&kin, &mat);
        assert_eq!(co.a, 0.0);
        assert_eq!(co.b, 3.5);
        assert_eq!(co.c, 0.0);
        assert_eq!(psi(&kin, &mat), 0.0);
        assert_eq!(stress_direct(&kin, &mat), Mat2::zeros());
        assert_eq!(stress_from_ab(&kin, &co), Mat2::zeros());
    }

    #[test]
    fn uniaxial_stretch_matches_scalar_arithmetic() {
        // Scalar oracle for G = diag(g, 0): every tensor is diagonal.
        let g = 0.1_f64;
        let j = 1.0 / (1.0 - g);
        let gamma = j * j + 1.0;
        let gamma_tilde = gamma / (j * j);
        let e11 = 0.5 * (j * j - 1.0);
        let a = (0.5 * gamma - 1.0) * (gamma_tilde - 1.0) + (gamma - j * j - 1.0) * gamma_tilde;
        let b = 0.5 * 1.5 * (gamma - 1.0) - 0.25;
        let psi_ref = 0.5 * e11 * e11 + e11 * e11;
        let s11 = j * j * (e11 + 2.0 * e11);
        let s22 = e11;

        let kin = kinematics_from_grad(&Mat2::new(g, 0.0, 0.0, 0.0)).unwrap();
        let mat = unit_material();
        let co = coefficients(&kin, &mat);
        assert!((kin.j - j).abs() < 1e-15);
        assert!((kin.gamma - gamma).abs() < 1e-14);
        assert!((kin.gamma - 2.234568).abs() < 1e-6);
        assert!((kin.gamma_tilde - 1.81).abs() < 1e-14);
        assert!((co.a - a).abs() < 1e-15);
        assert!((co.a - 0.095).abs() < 1e-14);
        assert!((co.c + 0.005).abs() < 1e-14);
        assert!((co.b - b).abs() < 1e-15);
        assert!((co.b - 0.675926).abs() < 1e-6);
        assert!((kin.e_green[(0, 0)] - 0.117284).abs() < 1e-6);
        assert!((psi(&kin, &mat) - psi_ref).abs() < 1e-15);
        assert!((psi(&kin, &mat) - 0.020634).abs() < 1e-6);
        let sd = stress_direct(&kin, &mat);
        assert!((sd[(0, 0)] - s11).abs() < 1e-14 && (sd[(1, 1)] - s22).abs() < 1e-14);
        assert!((sd[(0, 0)] - 0.434387).abs() < 1e-5);
        let sab = stress_from_ab(&kin, &co);
        assert!(rel(&sab, &sd) < 1e-14);
    }

    #[test]
    fn collapsed_element_is_rejected() {
        let err = kinematics_from_grad(&Mat2::new(1.0, 0.0, 0.0, 0.0)).unwrap_err();
        assert!(matches!(err, FsiError::SingularDeformation { .. }));
        assert!(kinematics_from_grad(&Mat2::new(2.0, 0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn rotation_has_no_energy() {
        for theta in [0.1_f64, 0.7, 2.0, -1.3] {
            let r = Mat2::new(theta.cos(), -theta.sin(), theta.sin(), theta.cos());
            let kin = kinematics_from_grad(&(Mat2::identity() - r)).unwrap();
            assert!(rel(&kin.f, &r) < 1e-14);
            assert!(psi(&kin, &unit_material()).abs() < 1e-28);
        }
    }

    #[test]
    fn c_is_second_order() {
        let g0 = Mat2::new(0.3, -0.7, 0.4, 0.5);
        let mat = MaterialParams { lambda_s: 2.0, mu_s: 1.3, ..unit_material() };
        let ratios: Vec<f64> = [1e-1, 1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&s| {
                let kin = kinematics_from_grad(&(s * g0)).unwrap();
                coefficients(&kin, &mat).c.abs() / (s * s)
            })
            .collect();
        assert!(ratios.iter().all(|r| r.is_finite() && *r < 10.0));
        assert!((ratios[3] - ratios[2]).abs() / ratios[3] < 0.05);
    }

    fn small_grad() -> impl Strategy<Value = Mat2> {
        prop::array::uniform4(-0.15..0.15f64).prop_map(|v| Mat2::new(v[0], v[1], v[2], v[3]))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn two_stress_routes_agree(g in small_grad(), lam in 0.0..10.0f64, mu in 0.1..10.0f64) {
            prop_assume!((Mat2::identity() - g).determinant() > 0.2);
            let mat = MaterialParams { lambda_s: lam, mu_s: mu, ..unit_material() };
            let kin = kinematics_from_grad(&g).unwrap();
            let sd = stress_direct(&kin, &mat);
            let sab = stress_from_ab(&kin, &coefficients(&kin, &mat));
            prop_assume!(sd.norm() > 1e-12);
            prop_assert!(rel(&sab, &sd) < 1e-10);
        }

        #[test]
        fn cayley_hamilton_and_invariants(g in small_grad()) {
            let kin = kinematics_from_grad(&g).unwrap();
            let res = kin.b * kin.b - kin.gamma * kin.b + kin.j * kin.j * Mat2::identity();
            prop_assert!(res.norm() < 1e-10);
            prop_assert!((kin.gamma - kin.gamma_closed).abs() <= 1e-12 * kin.gamma);
            prop_assert!((kin.j * (Mat2::identity() - g).determinant() - 1.0).abs() < 1e-12);
            prop_assert_eq!(kin.b, kin.b.transpose());
        }

        #[test]
        fn energy_is_nonnegative(g in small_grad(), lam in 0.0..10.0f64, mu in 0.0..10.0f64) {
            let mat = MaterialParams { lambda_s: lam, mu_s: mu, ..unit_material() };
            let kin = kinematics_from_grad(&g).unwrap();
            prop_assert!(psi(&kin, &mat) >= 0.0);
            let s = stress_direct(&kin, &mat);
            prop_assert_eq!(s, s.transpose());
            let co = coefficients(&kin, &mat);
            prop_assert_eq!(co.c + lam * g.trace(), co.a);
        }

        #[test]
        fn linear_elasticity_limit(g in small_grad(), lam in 0.0..10.0f64, mu in 0.1..10.0f64) {
            prop_assume!(g.norm() > 1e-3);
            let mat = MaterialParams { lambda_s: lam, mu_s: mu, ..unit_material() };
            let lin = mu * (g + g.transpose()) + lam * g.trace() * Mat2::identity();
            prop_assume!(lin.norm() > 1e-3 * g.norm());
            for s in [1e-2, 1e-4] {
                let kin = kinematics_from_grad(&(s * g)).unwrap();
                let slope = stress_from_ab(&kin, &coefficients(&kin, &mat)) / s;
                prop_assert!((slope - lin).norm() <= 100.0 * s * (lam + mu) * g.norm_squared().max(g.norm()) + 1e-9);
            }
        }
    }
}
