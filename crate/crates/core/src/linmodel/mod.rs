//! Operating points, linearization of the aerodynamic torque and
//! zero-order-hold discretization of the resulting linear model.
//!
//! All linear models are in deviation (δ) coordinates around an
//! [`OperatingPoint`]: `δx = x − x̄`, `δu = u − ū`, `δv = v − v̄`.

mod expm;

pub use expm::matrix_exponential;

use nalgebra::{DMatrix, Matrix2x5, Matrix5, Matrix5x2, Vector5};

use crate::error::{Error, Result};
use crate::plant::{
    aerodynamic_torque, derivatives, ControlInput, PlantState, TurbineParams, CUT_IN_WIND,
    RATED_WIND,
};

/// Maximum-power equilibrium at a mean wind speed together with the local
/// torque gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatingPoint {
    pub v_bar: f64,
    pub x_bar: PlantState,
    pub u_bar: ControlInput,
    /// Aerodynamic torque at the equilibrium, N·m.
    pub t_t_bar: f64,
    /// ∂T_t/∂ω_t, N·m/(rad/s).
    pub l_omega: f64,
    /// ∂T_t/∂v, N·m/(m/s).
    pub l_v: f64,
    /// ∂T_t/∂β, N·m/deg.
    pub l_beta: f64,
}

impl OperatingPoint {
    /// Generator power at the equilibrium.
    pub fn p_g_bar(&self, params: &TurbineParams) -> f64 {
        params.eta * self.x_bar.t_g * self.x_bar.omega_g
    }
}

/// `δẋ = A_c δx + B_cu δu + B_cv δv`, `δy = C_c δx` with `y = [ω_g, P_g]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousLinearModel {
    pub a_c: Matrix5<f64>,
    pub b_cu: Matrix5x2<f64>,
    pub b_cv: Vector5<f64>,
    pub c_c: Matrix2x5<f64>,
}

/// ZOH-sampled counterpart of [`ContinuousLinearModel`]; `b_d` carries the
/// scalar wind-speed disturbance channel.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteLinearModel {
    pub a_d: Matrix5<f64>,
    pub b_du: Matrix5x2<f64>,
    pub b_d: Vector5<f64>,
    pub c_d: Matrix2x5<f64>,
    pub t_s: f64,
}

fn fd_step(x: f64) -> f64 {
    1e-6 * x.abs().max(1.0)
}

fn central_gradients(
    omega_t: f64,
    v: f64,
    beta: f64,
    params: &TurbineParams,
    shrink: f64,
) -> Result<(f64, f64, f64)> {
    let torque = |w: f64, v: f64, b: f64| aerodynamic_torque(w, v, b, params);
    let h = fd_step(omega_t) * shrink;
    let l_omega = (torque(omega_t + h, v, beta)? - torque(omega_t - h, v, beta)?) / (2.0 * h);
    let h = fd_step(v) * shrink;
    let l_v = (torque(omega_t, v + h, beta)? - torque(omega_t, v - h, beta)?) / (2.0 * h);
    let h = fd_step(beta) * shrink;
    let l_beta = (torque(omega_t, v, beta + h)? - torque(omega_t, v, beta - h)?) / (2.0 * h);
    Ok((l_omega, l_v, l_beta))
}

/// Partial derivatives `(L_ω, L_v, L_β)` of the aerodynamic torque by central
/// differences, cross-checked against a half-step recomputation.
pub fn torque_gradients(
    omega_t_bar: f64,
    v_bar: f64,
    beta_bar: f64,
    params: &TurbineParams,
) -> Result<(f64, f64, f64)> {
    if !(omega_t_bar > 0.0 && v_bar > 0.0) {
        return Err(Error::Domain(format!(
            "operating point needs positive rotor speed and wind, got ω_t={omega_t_bar}, v={v_bar}"
        )));
    }
    let full = central_gradients(omega_t_bar, v_bar, beta_bar, params, 1.0)?;
    let half = central_gradients(omega_t_bar, v_bar, beta_bar, params, 0.5)?;
    for (a, b) in [(full.0, half.0), (full.1, half.1), (full.2, half.2)] {
        let scale = b.abs().max(1e-9);
        if (a - b).abs() / scale >= 1e-4 {
            return Err(Error::Domain(format!(
                "torque gradient not resolved by finite differences ({a} vs {b})"
            )));
        }
    }
    Ok(half)
}

/// Maximum-power steady state at mean wind `v_bar` (ω̄_t = λ_opt·v̄/R, β̄ = β_opt).
pub fn equilibrium(v_bar: f64, params: &TurbineParams) -> Result<OperatingPoint> {
    if !(CUT_IN_WIND..=RATED_WIND).contains(&v_bar) {
        return Err(Error::OutOfRange {
            v: v_bar,
            min: CUT_IN_WIND,
            max: RATED_WIND,
        });
    }
    let omega_t = params.lambda_opt * v_bar / params.radius;
    let beta = params.beta_opt;
    let t_t = aerodynamic_torque(omega_t, v_bar, beta, params)?;
    let t_tw = t_t / params.n_g;
    let x_bar = PlantState {
        omega_t,
        omega_g: params.n_g * omega_t,
        t_tw,
        t_g: t_tw,
        beta,
    };
    let u_bar = ControlInput {
        t_g_ref: t_tw,
        beta_ref: beta,
    };

    let residual = derivatives(&x_bar, &u_bar, v_bar, params)?.to_vector();
    let state = x_bar.to_vector();
    for i in 0..5 {
        if residual[i].abs() >= 1e-6 * state[i].abs().max(1.0) {
            return Err(Error::Domain(format!(
                "equilibrium residual {} in state {i} at v = {v_bar}",
                residual[i]
            )));
        }
    }

    let (l_omega, l_v, l_beta) = torque_gradients(omega_t, v_bar, beta, params)?;
    Ok(OperatingPoint {
        v_bar,
        x_bar,
        u_bar,
        t_t_bar: t_t,
        l_omega,
        l_v,
        l_beta,
    })
}

/// Linearized continuous-time model around `op`.
pub fn continuous_model(op: &OperatingPoint, params: &TurbineParams) -> ContinuousLinearModel {
    let TurbineParams {
        j_t,
        j_g,
        n_g,
        k_s,
        b_s,
        tau,
        tau_g,
        eta,
        ..
    } = *params;
    let coupling = n_g * b_s / j_t;
    let phi = k_s * n_g + coupling * op.l_omega;
    let psi = -(n_g * n_g * b_s / j_t + b_s / j_g);
    #[rustfmt::skip]
    let a_c = Matrix5::new(
        op.l_omega / j_t, 0.0,  -n_g / j_t, 0.0,          op.l_beta / j_t,
        0.0,              0.0,  1.0 / j_g,  -1.0 / j_g,   0.0,
        phi,              -k_s, psi,        b_s / j_g,    coupling * op.l_beta,
        0.0,              0.0,  0.0,        -1.0 / tau_g, 0.0,
        0.0,              0.0,  0.0,        0.0,          -1.0 / tau,
    );
    #[rustfmt::skip]
    let b_cu = Matrix5x2::new(
        0.0,         0.0,
        0.0,         0.0,
        0.0,         0.0,
        1.0 / tau_g, 0.0,
        0.0,         1.0 / tau,
    );
    let b_cv = Vector5::new(op.l_v / j_t, 0.0, coupling * op.l_v, 0.0, 0.0);
    #[rustfmt::skip]
    let c_c = Matrix2x5::new(
        0.0, 1.0,                    0.0, 0.0,                        0.0,
        0.0, eta * op.x_bar.t_g,     0.0, eta * op.x_bar.omega_g,     0.0,
    );
    ContinuousLinearModel {
        a_c,
        b_cu,
        b_cv,
        c_c,
    }
}

/// Exact ZOH discretization through the exponential of the block matrix
/// `[[A_c, B_cu, B_cv], [0, 0, 0]]·T_s`.
pub fn discretize(cm: &ContinuousLinearModel, t_s: f64) -> Result<DiscreteLinearModel> {
    if !(t_s > 0.0 && t_s.is_finite()) {
        return Err(Error::Domain(format!("sampling time must be positive, got {t_s}")));
    }
    let mut block = DMatrix::<f64>::zeros(8, 8);
    block.view_mut((0, 0), (5, 5)).copy_from(&cm.a_c);
    block.view_mut((0, 5), (5, 2)).copy_from(&cm.b_cu);
    block.view_mut((0, 7), (5, 1)).copy_from(&cm.b_cv);
    let e = matrix_exponential(&(block * t_s))?;
    Ok(DiscreteLinearModel {
        a_d: e.fixed_view::<5, 5>(0, 0).into_owned(),
        b_du: e.fixed_view::<5, 2>(0, 5).into_owned(),
        b_d: e.fixed_view::<5, 1>(0, 7).into_owned(),
        c_d: cm.c_c,
        t_s,
    })
}

/// Equilibrium, continuous model and discretization in one call.
pub fn linearize(v_bar: f64, params: &TurbineParams) -> Result<(OperatingPoint, DiscreteLinearModel)> {
    let op = equilibrium(v_bar, params)?;
    let dm = discretize(&continuous_model(&op, params), params.t_s)?;
    Ok((op, dm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::plant_jacobian;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn equilibrium_at_8_7() {
        let p = TurbineParams::default();
        let op = equilibrium(8.7, &p).unwrap();
        assert!((op.x_bar.omega_t - 2.013_428_571_428_571).abs() < 1e-12);
        assert!((op.x_bar.omega_g - 126.040_628_571_428_57).abs() < 1e-10);
        assert!(rel(op.u_bar.t_g_ref, op.t_t_bar / p.n_g) < 1e-15);
        assert_eq!(op.x_bar.t_g, op.x_bar.t_tw);
    }

    #[test]
    fn equilibrium_range() {
        let p = TurbineParams::default();
        assert!(equilibrium(3.9, &p).is_err());
        assert!(equilibrium(11.1, &p).is_err());
        assert!(equilibrium(4.0, &p).is_ok());
        assert!(equilibrium(11.0, &p).is_ok());
        let op = equilibrium(10.0, &p).unwrap();
        assert!(rel(op.x_bar.t_g, 7_810.030_916_986_498) < 1e-12);
    }

    #[test]
    fn gradient_signs_and_peak_identity() {
        let p = TurbineParams::default();
        for v in [4.0, 6.4, 8.0, 10.0, 11.0] {
            let op = equilibrium(v, &p).unwrap();
            assert!(op.l_v > 0.0);
            assert!(op.l_beta < 0.0);
            let expected = -op.t_t_bar / op.x_bar.omega_t;
            assert!(rel(op.l_omega, expected) < 1e-2, "v={v}: {} vs {expected}", op.l_omega);
        }
    }

    #[test]
    fn gradient_step_halving_consistent() {
        let p = TurbineParams::default();
        let w = 8.1 * 7.3 / 35.0;
        let a = central_gradients(w, 7.3, 0.0, &p, 1.0).unwrap();
        let b = central_gradients(w, 7.3, 0.0, &p, 0.5).unwrap();
        assert!(rel(a.0, b.0) < 1e-4);
        assert!(rel(a.1, b.1) < 1e-4);
        assert!(rel(a.2, b.2) < 1e-4);
        assert!(torque_gradients(0.0, 7.0, 0.0, &p).is_err());
    }

    #[test]
    fn continuous_model_entries() {
        let p = TurbineParams::default();
        let op = equilibrium(8.0, &p).unwrap();
        let cm = continuous_model(&op, &p);
        assert_eq!(cm.a_c[(4, 4)], -10.0);
        assert_eq!(cm.a_c[(3, 3)], -50.0);
        assert_eq!(cm.b_cu.fixed_view::<3, 2>(0, 0).amax(), 0.0);
        assert_eq!(cm.c_c[(1, 1)], op.x_bar.t_g);
        assert_eq!(cm.c_c[(1, 3)], op.x_bar.omega_g);
        assert_eq!(cm.b_cv[1], 0.0);
    }

    #[test]
    fn continuous_model_matches_numerical_jacobian() {
        let p = TurbineParams::default();
        for v in [4.0, 6.4, 8.7, 10.0, 11.0] {
            let op = equilibrium(v, &p).unwrap();
            let cm = continuous_model(&op, &p);
            let jac = plant_jacobian(&op.x_bar, &op.u_bar, v, &p).unwrap();
            let check = |a: f64, b: f64| {
                let m = a.abs().max(b.abs());
                m < 1e-12 || (a - b).abs() <= 1e-4 * m
            };
            for i in 0..5 {
                for j in 0..5 {
                    assert!(check(cm.a_c[(i, j)], jac.a[(i, j)]), "A[{i},{j}] at v={v}");
                }
                for j in 0..2 {
                    assert!(check(cm.b_cu[(i, j)], jac.b_u[(i, j)]), "Bu[{i},{j}]");
                }
                assert!(check(cm.b_cv[i], jac.b_v[i]), "Bv[{i}] at v={v}");
            }
        }
    }

    #[test]
    fn discrete_actuator_poles() {
        let p = TurbineParams::default();
        let (_, dm) = linearize(8.0, &p).unwrap();
        assert!((dm.a_d[(4, 4)] - 0.606_530_659_712_633_4).abs() < 1e-9);
        assert!((dm.a_d[(3, 3)] - 0.082_084_998_623_898_8).abs() < 1e-9);
        assert_eq!(dm.c_d, continuous_model(&equilibrium(8.0, &p).unwrap(), &p).c_c);
    }

    #[test]
    fn zero_dynamics_discretize_to_euler() {
        let cm = ContinuousLinearModel {
            a_c: Matrix5::zeros(),
            b_cu: Matrix5x2::from_fn(|i, j| (i * 2 + j) as f64),
            b_cv: Vector5::new(1.0, 2.0, 3.0, 4.0, 5.0),
            c_c: Matrix2x5::zeros(),
        };
        let dm = discretize(&cm, 0.05).unwrap();
        assert_eq!(dm.a_d, Matrix5::identity());
        assert!((dm.b_du - cm.b_cu * 0.05).amax() < 1e-15);
        assert!((dm.b_d - cm.b_cv * 0.05).amax() < 1e-15);
        assert!(discretize(&cm, 0.0).is_err());
    }

    #[test]
    fn exponential_inverse_identity() {
        let p = TurbineParams::default();
        for v in [4.0, 7.0, 11.0] {
            let op = equilibrium(v, &p).unwrap();
            let cm = continuous_model(&op, &p);
            let a = DMatrix::from_iterator(5, 5, cm.a_c.iter().copied()) * p.t_s;
            let e = matrix_exponential(&a).unwrap();
            let einv = matrix_exponential(&(-a)).unwrap();
            let prod = &e * &einv;
            // Entries of differing physical units: compare relative to the
            // magnitude of each row-column product.
            let mag = e.abs() * einv.abs();
            for i in 0..5 {
                for j in 0..5 {
                    let target = if i == j { 1.0 } else { 0.0 };
                    assert!(
                        (prod[(i, j)] - target).abs() <= 1e-10 * mag[(i, j)].max(1.0),
                        "({i},{j}) = {}",
                        prod[(i, j)]
                    );
                }
            }
        }
    }

    #[test]
    fn spectrum_maps_through_exponential() {
        let p = TurbineParams::default();
        let op = equilibrium(8.0, &p).unwrap();
        let cm = continuous_model(&op, &p);
        let dm = discretize(&cm, p.t_s).unwrap();
        let ec = cm.a_c.complex_eigenvalues();
        let ed = dm.a_d.complex_eigenvalues();
        let rho_c = ec.iter().map(|z| (z.re * p.t_s).exp()).fold(0.0, f64::max);
        let rho_d = ed.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!((rho_c - rho_d).abs() < 1e-8, "{rho_c} vs {rho_d}");
    }

    #[test]
    fn discretization_matches_fine_rk4() {
        // RK4 on δẋ = A_c δx over one sample. A single RK4 step of length T_s is
        // outside its stability region for the 12.6 Hz torsional mode, so the
        // reference uses 500 substeps.
        let p = TurbineParams::default();
        let op = equilibrium(9.0, &p).unwrap();
        let cm = continuous_model(&op, &p);
        let dm = discretize(&cm, p.t_s).unwrap();
        let dx0 = Vector5::new(0.05, 2.0, 300.0, -150.0, 1.0);
        let n = 500;
        let h = p.t_s / n as f64;
        let mut x = dx0;
        for _ in 0..n {
            let k1 = cm.a_c * x;
            let k2 = cm.a_c * (x + k1 * (h / 2.0));
            let k3 = cm.a_c * (x + k2 * (h / 2.0));
            let k4 = cm.a_c * (x + k3 * h);
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
        let exact = dm.a_d * dx0;
        let scale = Vector5::new(0.05, 2.0, 300.0, 300.0, 1.0);
        let err = (x - exact).component_div(&scale).amax();
        assert!(err < 1e-8, "relative error {err}");
    }
}
