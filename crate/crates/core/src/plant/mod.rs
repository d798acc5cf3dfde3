//! Nonlinear continuous-time wind turbine model.
//!
//! State `x = [ω_t, ω_g, T_tw, T_g, β]`, input `u = [T_g,ref, β_ref]`. Shaft
//! speeds are in rad/s, torques in N·m and every pitch quantity in degrees.

mod aero;
mod dynamics;

pub use aero::{aerodynamic_power, aerodynamic_torque, power_coefficient, tip_speed_ratio};
pub use dynamics::{
    derivatives, derivatives_matrix_form, generator_power, step, step_with_substeps,
    unified_matrices, DEFAULT_SUBSTEPS,
};

use nalgebra::{Vector2, Vector5};

use crate::error::{Error, Result};

/// Physical constants of the turbine plus the controller sampling time.
#[derive(Debug, Clone, PartialEq)]
pub struct TurbineParams {
    /// Air density, kg/m³.
    pub rho: f64,
    /// Blade length, m.
    pub radius: f64,
    /// Rotor inertia, kg·m².
    pub j_t: f64,
    /// Generator inertia, kg·m².
    pub j_g: f64,
    /// Gear ratio.
    pub n_g: f64,
    /// Shaft stiffness, N·m/rad.
    pub k_s: f64,
    /// Shaft damping, N·m/(rad/s).
    pub b_s: f64,
    /// Pitch actuator time constant, s.
    pub tau: f64,
    /// Generator/converter time constant, s.
    pub tau_g: f64,
    /// Generator efficiency.
    pub eta: f64,
    pub lambda_opt: f64,
    /// Optimal pitch, deg.
    pub beta_opt: f64,
    pub cp_opt: f64,
    /// Controller sampling time, s.
    pub t_s: f64,
    pub beta_min: f64,
    pub beta_max: f64,
    /// Pitch rate limits, deg/s.
    pub beta_rate_min: f64,
    pub beta_rate_max: f64,
    /// Generator torque ceiling, N·m.
    pub t_g_max: f64,
    /// Generator speed ceiling, rad/s.
    pub omega_g_max: f64,
    /// Generator power ceiling, W.
    pub p_g_max: f64,
}

/// Top of the partial-load wind range, m/s.
pub const RATED_WIND: f64 = 11.0;
/// Bottom of the partial-load wind range, m/s.
pub const CUT_IN_WIND: f64 = 4.0;

impl Default for TurbineParams {
    fn default() -> Self {
        let mut p = TurbineParams {
            rho: 1.225,
            radius: 35.0,
            j_t: 1.86e6,
            j_g: 56.29,
            n_g: 62.6,
            k_s: 31.8e4,
            b_s: 212.2,
            tau: 0.1,
            tau_g: 0.02,
            eta: 1.0,
            lambda_opt: 8.1,
            beta_opt: 0.0,
            cp_opt: 0.48,
            t_s: 0.05,
            beta_min: 0.0,
            beta_max: 45.0,
            beta_rate_min: -10.0,
            beta_rate_max: 10.0,
            t_g_max: 0.0,
            omega_g_max: 0.0,
            p_g_max: 0.0,
        };
        p.set_rated_bounds(RATED_WIND);
        p
    }
}

impl TurbineParams {
    /// Sets ω_g,max, P_g,max and T_g,max to the maximum-power operating
    /// values at wind speed `v_rated`.
    pub fn set_rated_bounds(&mut self, v_rated: f64) {
        self.omega_g_max = self.n_g * self.lambda_opt * v_rated / self.radius;
        self.p_g_max = self.swept_area_factor() * v_rated.powi(3) * self.cp_opt;
        self.t_g_max = self.p_g_max / self.omega_g_max;
    }

    /// ½ρπR², the factor multiplying v³·Cp in the aerodynamic power.
    pub fn swept_area_factor(&self) -> f64 {
        0.5 * self.rho * std::f64::consts::PI * self.radius * self.radius
    }

    /// Maximum aerodynamic power available at wind speed `v`.
    pub fn max_power(&self, v: f64) -> f64 {
        self.swept_area_factor() * v.powi(3) * self.cp_opt
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rho", self.rho),
            ("radius", self.radius),
            ("j_t", self.j_t),
            ("j_g", self.j_g),
            ("n_g", self.n_g),
            ("k_s", self.k_s),
            ("b_s", self.b_s),
            ("tau", self.tau),
            ("tau_g", self.tau_g),
            ("t_s", self.t_s),
            ("lambda_opt", self.lambda_opt),
            ("t_g_max", self.t_g_max),
            ("omega_g_max", self.omega_g_max),
            ("p_g_max", self.p_g_max),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {value}")));
            }
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::Config(format!("eta must lie in (0, 1], got {}", self.eta)));
        }
        if self.beta_min.partial_cmp(&self.beta_max) != Some(std::cmp::Ordering::Less) {
            return Err(Error::Config("beta_min must be below beta_max".into()));
        }
        if !(self.beta_rate_min < 0.0 && self.beta_rate_max > 0.0) {
            return Err(Error::Config("pitch rate limits must bracket zero".into()));
        }
        if !(self.cp_opt > 0.0 && self.cp_opt < 16.0 / 27.0) {
            return Err(Error::Config(format!(
                "cp_opt must lie below the Betz limit, got {}",
                self.cp_opt
            )));
        }
        Ok(())
    }
}

/// Turbine state `[ω_t, ω_g, T_tw, T_g, β]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantState {
    pub omega_t: f64,
    pub omega_g: f64,
    pub t_tw: f64,
    pub t_g: f64,
    pub beta: f64,
}

impl PlantState {
    pub fn to_vector(&self) -> Vector5<f64> {
        Vector5::new(self.omega_t, self.omega_g, self.t_tw, self.t_g, self.beta)
    }

    pub fn from_vector(x: &Vector5<f64>) -> Self {
        PlantState {
            omega_t: x[0],
            omega_g: x[1],
            t_tw: x[2],
            t_g: x[3],
            beta: x[4],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|v| v.is_finite())
    }
}

/// Actuator references `[T_g,ref, β_ref]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlInput {
    pub t_g_ref: f64,
    pub beta_ref: f64,
}

impl ControlInput {
    pub fn to_vector(&self) -> Vector2<f64> {
        Vector2::new(self.t_g_ref, self.beta_ref)
    }

    pub fn from_vector(u: &Vector2<f64>) -> Self {
        ControlInput {
            t_g_ref: u[0],
            beta_ref: u[1],
        }
    }
}
