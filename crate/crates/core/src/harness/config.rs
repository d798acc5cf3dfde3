use crate::ctrl::Mode;
use crate::error::{Error, Result};
use crate::plant::RATED_WIND;

use super::sim::ExperimentConfig;
use super::wind::{TurbulenceParams, WindKind};

/// Parses `key = value` lines. Blank lines and `#` comments are skipped;
/// a repeated key keeps its last value.
pub fn parse_entries(text: &str) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value', got '{line}'", i + 1)))?;
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        if k.is_empty() || v.is_empty() {
            return Err(Error::Config(format!("line {}: empty key or value", i + 1)));
        }
        out.retain(|(old, _)| *old != k);
        out.push((k, v));
    }
    Ok(out)
}

fn float(key: &str, value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .ok()
        .filter(|v| !v.is_nan())
        .ok_or_else(|| Error::Config(format!("{key}: expected a number, got '{value}'")))
}

fn integer(key: &str, value: &str) -> Result<u64> {
    value
        .parse::<u64>()
        .map_err(|_| Error::Config(format!("{key}: expected a nonnegative integer, got '{value}'")))
}

fn boolean(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got '{value}'"))),
    }
}

const BOUND_KEYS: [&str; 3] = ["t_g_max", "omega_g_max", "p_g_max"];

/// Applies `entries` on top of `cfg`.
///
/// Turbine bounds not given explicitly are recomputed from the (possibly
/// changed) turbine data at `v_rated`.
pub fn apply_entries(cfg: &mut ExperimentConfig, entries: &[(String, String)]) -> Result<()> {
    let mut v_rated = RATED_WIND;
    let mut turbulence: Option<TurbulenceParams> = None;
    let mut physical_changed = false;

    for (key, value) in entries {
        let (k, v) = (key.as_str(), value.as_str());
        let p = &mut cfg.params;
        let c = &mut cfg.controller;
        let slot: Option<&mut f64> = match k {
            "rho" => Some(&mut p.rho),
            "radius" => Some(&mut p.radius),
            "j_t" => Some(&mut p.j_t),
            "j_g" => Some(&mut p.j_g),
            "n_g" => Some(&mut p.n_g),
            "k_s" => Some(&mut p.k_s),
            "b_s" => Some(&mut p.b_s),
            "tau" => Some(&mut p.tau),
            "tau_g" => Some(&mut p.tau_g),
            "eta" => Some(&mut p.eta),
            "lambda_opt" => Some(&mut p.lambda_opt),
            "beta_opt" => Some(&mut p.beta_opt),
            "cp_opt" => Some(&mut p.cp_opt),
            "t_s" => Some(&mut p.t_s),
            "beta_min" => Some(&mut p.beta_min),
            "beta_max" => Some(&mut p.beta_max),
            "beta_rate_min" => Some(&mut p.beta_rate_min),
            "beta_rate_max" => Some(&mut p.beta_rate_max),
            "q1" => Some(&mut c.weights.q[(0, 0)]),
            "q2" => Some(&mut c.weights.q[(1, 1)]),
            "r1" => Some(&mut c.weights.r[(0, 0)]),
            "r2" => Some(&mut c.weights.r[(1, 1)]),
            "r_u1" => Some(&mut c.weights.r_u[(0, 0)]),
            "r3" | "r_u2" => Some(&mut c.weights.r_u[(1, 1)]),
            "kappa" => Some(&mut c.kappa),
            "d_hat_limit" => Some(&mut c.d_hat_limit),
            "v_switch" => Some(&mut c.v_switch),
            "hysteresis" => Some(&mut c.hysteresis),
            "op_low" => Some(&mut c.offline_points[0]),
            "op_high" => Some(&mut c.offline_points[1]),
            "duration" => Some(&mut cfg.duration),
            "wind_bias" => Some(&mut cfg.wind_bias),
            _ => None,
        };
        if let Some(slot) = slot {
            *slot = float(k, v)?;
            physical_changed |= matches!(k, "rho" | "radius" | "n_g" | "lambda_opt" | "cp_opt");
            continue;
        }
        match k {
            "n_p" => cfg.controller.weights.n_p = integer(k, v)? as usize,
            "n_c" => cfg.controller.weights.n_c = integer(k, v)? as usize,
            "output_constraints" => cfg.controller.output_constraints = boolean(k, v)?,
            "seed" => cfg.seed = integer(k, v)?,
            "substeps" => cfg.substeps = integer(k, v)? as usize,
            "controller" | "mode" => cfg.mode = v.parse::<Mode>()?,
            "wind" => cfg.wind = v.parse::<WindKind>()?,
            "v_rated" => {
                v_rated = float(k, v)?;
                physical_changed = true;
            }
            "turbulence_mean" | "turbulence_std" | "turbulence_tau" => {
                let tp = turbulence.get_or_insert_with(TurbulenceParams::default);
                let x = float(k, v)?;
                match k {
                    "turbulence_mean" => tp.mean = x,
                    "turbulence_std" => tp.std = x,
                    _ => tp.time_constant = x,
                }
            }
            _ if BOUND_KEYS.contains(&k) => {}
            _ => return Err(Error::Config(format!("unknown key '{k}'"))),
        }
    }

    if physical_changed {
        cfg.params.set_rated_bounds(v_rated);
    }
    for (key, value) in entries {
        match key.as_str() {
            "t_g_max" => cfg.params.t_g_max = float(key, value)?,
            "omega_g_max" => cfg.params.omega_g_max = float(key, value)?,
            "p_g_max" => cfg.params.p_g_max = float(key, value)?,
            _ => {}
        }
    }
    if let Some(tp) = turbulence {
        match &mut cfg.wind {
            WindKind::Turbulent(current) => {
                let mean_given = entries.iter().any(|(k, _)| k == "turbulence_mean");
                *current = TurbulenceParams { mean: if mean_given { tp.mean } else { current.mean }, ..tp };
            }
            _ => return Err(Error::Config("turbulence_* keys need wind = turbulent".into())),
        }
    }
    cfg.params.validate()?;
    cfg.controller.weights.validate()
}

/// Defaults overridden by the contents of a config file.
pub fn load_config(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    apply_entries(&mut cfg, &parse_entries(text)?)?;
    Ok(cfg)
}
