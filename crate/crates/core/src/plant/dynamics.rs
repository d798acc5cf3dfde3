use nalgebra::{Matrix5, Matrix5x2, Vector5};

use crate::error::{Error, Result};

use super::{aerodynamic_torque, ControlInput, PlantState, TurbineParams};

/// RK4 substeps per controller interval.
pub const DEFAULT_SUBSTEPS: usize = 10;

/// State derivative from the drive-train, pitch and generator ODEs.
///
/// The torsional torque row is the time derivative of
/// `T_tw = K_s(N_g θ_t − θ_g) + B_s(N_g ω_t − ω_g)`.
pub fn derivatives(
    state: &PlantState,
    input: &ControlInput,
    v: f64,
    params: &TurbineParams,
) -> Result<PlantState> {
    let t_t = aerodynamic_torque(state.omega_t, v, state.beta, params)?;
    let d_omega_t = (t_t - params.n_g * state.t_tw) / params.j_t;
    let d_omega_g = (state.t_tw - state.t_g) / params.j_g;
    let d_t_tw = params.k_s * (params.n_g * state.omega_t - state.omega_g)
        + params.b_s * (params.n_g * d_omega_t - d_omega_g);
    Ok(PlantState {
        omega_t: d_omega_t,
        omega_g: d_omega_g,
        t_tw: d_t_tw,
        t_g: (input.t_g_ref - state.t_g) / params.tau_g,
        beta: (input.beta_ref - state.beta) / params.tau,
    })
}

/// `(A, B, B₂)` of the unified model `ẋ = Ax + Bu + B₂T_t`.
///
/// The pitch entry of `A` is `−1/τ`, the stable first-order actuator.
pub fn unified_matrices(params: &TurbineParams) -> (Matrix5<f64>, Matrix5x2<f64>, Vector5<f64>) {
    let TurbineParams {
        j_t,
        j_g,
        n_g,
        k_s,
        b_s,
        tau,
        tau_g,
        ..
    } = *params;
    #[rustfmt::skip]
    let a = Matrix5::new(
        0.0,      0.0,  -n_g / j_t,                            0.0,          0.0,
        0.0,      0.0,  1.0 / j_g,                             -1.0 / j_g,   0.0,
        k_s * n_g, -k_s, -(n_g * n_g * b_s / j_t + b_s / j_g), b_s / j_g,    0.0,
        0.0,      0.0,  0.0,                                   -1.0 / tau_g, 0.0,
        0.0,      0.0,  0.0,                                   0.0,          -1.0 / tau,
    );
    #[rustfmt::skip]
    let b = Matrix5x2::new(
        0.0,         0.0,
        0.0,         0.0,
        0.0,         0.0,
        1.0 / tau_g, 0.0,
        0.0,         1.0 / tau,
    );
    let b2 = Vector5::new(1.0 / j_t, 0.0, n_g * b_s / j_t, 0.0, 0.0);
    (a, b, b2)
}

/// Same derivative as [`derivatives`], evaluated through the unified matrix form.
pub fn derivatives_matrix_form(
    state: &PlantState,
    input: &ControlInput,
    v: f64,
    params: &TurbineParams,
) -> Result<PlantState> {
    let (a, b, b2) = unified_matrices(params);
    let t_t = aerodynamic_torque(state.omega_t, v, state.beta, params)?;
    let dx = a * state.to_vector() + b * input.to_vector() + b2 * t_t;
    Ok(PlantState::from_vector(&dx))
}

/// P_g = T_g·ω_g·η.
pub fn generator_power(t_g: f64, omega_g: f64, params: &TurbineParams) -> f64 {
    t_g * omega_g * params.eta
}

/// Advances the plant by `dt` starting at time `t0` with [`DEFAULT_SUBSTEPS`] RK4 substeps.
///
/// `wind` gives the effective wind speed at any time in `[t0, t0 + dt]`.
/// Pitch and generator torque are clamped to their physical ranges afterwards.
pub fn step<F>(
    state: &PlantState,
    input: &ControlInput,
    wind: F,
    t0: f64,
    dt: f64,
    params: &TurbineParams,
) -> Result<PlantState>
where
    F: Fn(f64) -> f64,
{
    step_with_substeps(state, input, wind, t0, dt, DEFAULT_SUBSTEPS, params)
}

pub fn step_with_substeps<F>(
    state: &PlantState,
    input: &ControlInput,
    wind: F,
    t0: f64,
    dt: f64,
    substeps: usize,
    params: &TurbineParams,
) -> Result<PlantState>
where
    F: Fn(f64) -> f64,
{
    if !(dt > 0.0 && dt.is_finite()) || substeps == 0 {
        return Err(Error::Domain(format!("invalid step size {dt} / {substeps} substeps")));
    }
    let h = dt / substeps as f64;
    let f = |t: f64, x: &Vector5<f64>| -> Result<Vector5<f64>> {
        derivatives(&PlantState::from_vector(x), input, wind(t), params).map(|d| d.to_vector())
    };

    let mut x = state.to_vector();
    let mut t = t0;
    for _ in 0..substeps {
        let k1 = f(t, &x)?;
        let k2 = f(t + 0.5 * h, &(x + k1 * (0.5 * h)))?;
        let k3 = f(t + 0.5 * h, &(x + k2 * (0.5 * h)))?;
        let k4 = f(t + h, &(x + k3 * h))?;
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        t += h;
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::Integration { t });
        }
    }

    let mut next = PlantState::from_vector(&x);
    next.beta = next.beta.clamp(params.beta_min, params.beta_max);
    next.t_g = next.t_g.clamp(0.0, params.t_g_max);
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linmodel::equilibrium;
    use proptest::prelude::*;

    fn scale(x: &PlantState) -> Vector5<f64> {
        x.to_vector().map(|v| v.abs().max(1.0))
    }

    #[test]
    fn settled_actuators_have_zero_rate() {
        let p = TurbineParams::default();
        let x = PlantState {
            omega_t: 1.9,
            omega_g: 118.0,
            t_tw: 4000.0,
            t_g: 3900.0,
            beta: 2.5,
        };
        let u = ControlInput {
            t_g_ref: 3900.0,
            beta_ref: 2.5,
        };
        let d = derivatives(&x, &u, 8.0, &p).unwrap();
        assert_eq!(d.t_g, 0.0);
        assert_eq!(d.beta, 0.0);
    }

    #[test]
    fn equilibrium_is_stationary() {
        let p = TurbineParams::default();
        for v in [4.0, 6.4, 8.7, 10.0, 11.0] {
            let op = equilibrium(v, &p).unwrap();
            let d = derivatives(&op.x_bar, &op.u_bar, v, &p).unwrap().to_vector();
            let s = scale(&op.x_bar);
            for i in 0..5 {
                assert!(d[i].abs() / s[i] < 1e-6, "v={v} component {i}: {}", d[i]);
            }
        }
    }

    #[test]
    fn equilibrium_hold_does_not_drift() {
        let p = TurbineParams::default();
        let op = equilibrium(7.0, &p).unwrap();
        let mut x = op.x_bar;
        for k in 0..200 {
            x = step(&x, &op.u_bar, |_| 7.0, k as f64 * p.t_s, p.t_s, &p).unwrap();
        }
        let (a, b) = (x.to_vector(), op.x_bar.to_vector());
        for i in 0..5 {
            assert!((a[i] - b[i]).abs() <= 1e-6 * b[i].abs().max(1.0), "component {i}");
        }
    }

    #[test]
    fn pitch_first_order_response() {
        let p = TurbineParams::default();
        let op = equilibrium(7.0, &p).unwrap();
        let u = ControlInput {
            t_g_ref: op.u_bar.t_g_ref,
            beta_ref: 45.0,
        };
        let mut x = op.x_bar;
        let n = 10; // 0.5 s = 5τ
        for k in 0..n {
            x = step(&x, &u, |_| 7.0, k as f64 * p.t_s, p.t_s, &p).unwrap();
        }
        let t = n as f64 * p.t_s;
        let expected = 45.0 * (1.0 - (-t / p.tau).exp());
        assert!((x.beta - expected).abs() < 1e-4, "{} vs {expected}", x.beta);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let p = TurbineParams::default();
        let op = equilibrium(8.0, &p).unwrap();
        let x0 = PlantState {
            omega_t: op.x_bar.omega_t * 0.95,
            omega_g: op.x_bar.omega_g * 0.95,
            ..op.x_bar
        };
        let u = ControlInput {
            t_g_ref: op.u_bar.t_g_ref * 1.2,
            beta_ref: 3.0,
        };
        let wind = |t: f64| 8.0 + 0.5 * (0.7 * t).sin();
        let run = |substeps: usize| {
            step_with_substeps(&x0, &u, wind, 0.0, 0.2, substeps, &p)
                .unwrap()
                .to_vector()
        };
        let (coarse, mid, fine) = (run(10), run(20), run(40));
        let e1 = (coarse - mid).component_div(&scale(&x0)).norm();
        let e2 = (mid - fine).component_div(&scale(&x0)).norm();
        assert!(e1 / e2 >= 8.0, "convergence ratio {}", e1 / e2);
    }

    #[test]
    fn lossless_power_balance_at_steady_state() {
        let p = TurbineParams::default();
        let t_t = 312_905.906_776_311_9;
        let pg = generator_power(t_t / 62.6, 62.6 * 1.8514, &p);
        assert!((pg - 579_313.997).abs() / 579_313.997 < 1e-6);
        assert_eq!(generator_power(0.0, 123.0, &p), 0.0);
        assert_eq!(generator_power(100.0, 10.0, &p), 1000.0);
    }

    #[test]
    fn step_rejects_bad_dt() {
        let p = TurbineParams::default();
        let op = equilibrium(7.0, &p).unwrap();
        assert!(step(&op.x_bar, &op.u_bar, |_| 7.0, 0.0, 0.0, &p).is_err());
    }

    #[test]
    fn step_clamps_pitch() {
        let p = TurbineParams::default();
        let op = equilibrium(7.0, &p).unwrap();
        let u = ControlInput {
            t_g_ref: op.u_bar.t_g_ref,
            beta_ref: -20.0,
        };
        let x = step(&op.x_bar, &u, |_| 7.0, 0.0, p.t_s, &p).unwrap();
        assert_eq!(x.beta, 0.0);
    }

    proptest! {
        #[test]
        fn explicit_and_matrix_forms_agree(
            omega_t in 0.5f64..3.0,
            ratio in 0.8f64..1.2,
            t_tw in 0.0f64..10_000.0,
            t_g in 0.0f64..10_000.0,
            beta in 0.0f64..45.0,
            t_ref in 0.0f64..10_000.0,
            b_ref in 0.0f64..45.0,
            v in 4.0f64..11.0,
        ) {
            let p = TurbineParams::default();
            let x = PlantState { omega_t, omega_g: 62.6 * omega_t * ratio, t_tw, t_g, beta };
            let u = ControlInput { t_g_ref: t_ref, beta_ref: b_ref };
            let a = derivatives(&x, &u, v, &p).unwrap().to_vector();
            let b = derivatives_matrix_form(&x, &u, v, &p).unwrap().to_vector();
            // The torsional row cancels terms of order K_s·N_g·ω_t, so compare
            // against the magnitude of the largest contributing term.
            let row_scale = [
                1.0 / p.j_t * (aerodynamic_torque(omega_t, v, beta, &p).unwrap() + p.n_g * t_tw),
                (t_tw + t_g) / p.j_g,
                p.k_s * (p.n_g * omega_t + x.omega_g) + p.b_s * (t_tw + t_g) / p.j_g * 2.0,
                (t_ref + t_g) / p.tau_g,
                (b_ref + beta) / p.tau,
            ];
            for i in 0..5 {
                prop_assert!((a[i] - b[i]).abs() <= 1e-10 * row_scale[i].max(1e-12), "row {}", i);
            }
        }
    }
}
