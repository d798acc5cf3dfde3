use crate::error::{Error, Result};

use super::TurbineParams;

/// Power coefficient Cp(λ, β) with β in degrees, floored at zero.
pub fn power_coefficient(lambda: f64, beta: f64) -> Result<f64> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::Domain(format!("tip-speed ratio must be positive, got {lambda}")));
    }
    if !beta.is_finite() {
        return Err(Error::Domain(format!("pitch angle must be finite, got {beta}")));
    }
    let inv_lambda_i = 1.0 / (lambda + 0.08 * beta) - 0.035 / (beta.powi(3) + 1.0);
    let cp = 0.5176 * (116.0 * inv_lambda_i - 0.4 * beta - 5.0) * (-21.0 * inv_lambda_i).exp()
        + 0.0068 * lambda;
    Ok(cp.max(0.0))
}

/// λ = ω_t·R / v.
pub fn tip_speed_ratio(omega_t: f64, v: f64, params: &TurbineParams) -> Result<f64> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::Domain(format!("wind speed must be positive, got {v}")));
    }
    Ok(omega_t * params.radius / v)
}

/// Aerodynamic power captured by the rotor, W.
pub fn aerodynamic_power(v: f64, lambda: f64, beta: f64, params: &TurbineParams) -> Result<f64> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::Domain(format!("wind speed must be positive, got {v}")));
    }
    Ok(params.swept_area_factor() * v.powi(3) * power_coefficient(lambda, beta)?)
}

/// Aerodynamic torque on the rotor shaft, N·m, in the (Cp/λ)·½ρπR³v² form.
pub fn aerodynamic_torque(omega_t: f64, v: f64, beta: f64, params: &TurbineParams) -> Result<f64> {
    if !(omega_t.is_finite() && omega_t > 0.0) {
        return Err(Error::Domain(format!("rotor speed must be positive, got {omega_t}")));
    }
    let lambda = tip_speed_ratio(omega_t, v, params)?;
    let cp = power_coefficient(lambda, beta)?;
    Ok(cp / lambda * params.swept_area_factor() * params.radius * v * v)
}
