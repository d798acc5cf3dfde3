use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::ctrl::{reference, Controller, ControllerConfig, Mode};
use crate::error::{Error, Result};
use crate::linmodel::equilibrium;
use crate::plant::{aerodynamic_torque, generator_power, step_with_substeps, PlantState, TurbineParams, DEFAULT_SUBSTEPS};

use super::metrics::{compute_metrics, Metrics};
use super::wind::{generate_wind, WindKind, WindProfile};

/// One controller sample. Field order matches the CSV columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRecord {
    pub t: f64,
    pub v: f64,
    pub omega_t: f64,
    pub omega_g: f64,
    pub t_tw: f64,
    pub t_g: f64,
    pub beta: f64,
    pub t_g_ref: f64,
    pub beta_ref: f64,
    pub p_g: f64,
    pub p_t: f64,
    pub p_max: f64,
    pub omega_g_ref: f64,
    pub mode: String,
    pub qp_iters: usize,
    pub qp_status: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimLog {
    pub records: Vec<SimRecord>,
    /// QP solve time per step, s.
    pub qp_times: Vec<f64>,
    /// Whole controller step time per step, s.
    pub step_times: Vec<f64>,
}

impl SimLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub params: TurbineParams,
    pub controller: ControllerConfig,
    /// Controller used by single-run experiments.
    pub mode: Mode,
    pub wind: WindKind,
    pub seed: u64,
    pub duration: f64,
    /// Initial plant state; defaults to the equilibrium at the first wind sample.
    pub initial_state: Option<PlantState>,
    /// Offset added to the wind seen by the plant but not by the controller.
    pub wind_bias: f64,
    pub substeps: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            params: TurbineParams::default(),
            controller: ControllerConfig::default(),
            mode: Mode::Online,
            wind: WindKind::Constant(7.0),
            seed: 0,
            duration: 60.0,
            initial_state: None,
            wind_bias: 0.0,
            substeps: DEFAULT_SUBSTEPS,
        }
    }
}

impl ExperimentConfig {
    pub fn profile(&self) -> Result<WindProfile> {
        generate_wind(self.wind, self.seed, self.duration, self.params.t_s)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub mode: Mode,
    pub log: SimLog,
    pub metrics: Metrics,
}

/// Closed loop of one controller on `profile`.
pub fn simulate(mode: Mode, profile: &WindProfile, config: &ExperimentConfig) -> Result<SimLog> {
    let p = &config.params;
    let mut log = SimLog::default();
    let Some(&v0) = profile.v.first() else {
        return Ok(log);
    };
    let op0 = equilibrium(v0, p)?;
    let mut x = config.initial_state.unwrap_or(op0.x_bar);
    let mut ctrl = Controller::new(mode, p.clone(), config.controller.clone(), op0.u_bar)?;
    let bias = config.wind_bias;
    let plant_wind = |t: f64| profile.at(t) + bias;
    let fail = |step: usize, cause: Error| Error::Simulation { step, cause: Box::new(cause) };

    log.records.reserve(profile.len());
    for (k, (&t, &v)) in profile.t.iter().zip(&profile.v).enumerate() {
        let started = Instant::now();
        let out = ctrl.step(&x, v).map_err(|e| fail(k, e))?;
        let step_time = started.elapsed().as_secs_f64();

        let v_plant = v + bias;
        let p_t = aerodynamic_torque(x.omega_t, v_plant, x.beta, p).map_err(|e| fail(k, e))? * x.omega_t;
        let r = reference(v, p).map_err(|e| fail(k, e))?;
        log.records.push(SimRecord {
            t,
            v,
            omega_t: x.omega_t,
            omega_g: x.omega_g,
            t_tw: x.t_tw,
            t_g: x.t_g,
            beta: x.beta,
            t_g_ref: out.input.t_g_ref,
            beta_ref: out.input.beta_ref,
            p_g: generator_power(x.t_g, x.omega_g, p),
            p_t,
            p_max: p.max_power(v),
            omega_g_ref: r.omega_g_ref,
            mode: mode.as_str().to_string(),
            qp_iters: out.qp_iters,
            qp_status: out.status.as_str().to_string(),
        });
        log.qp_times.push(out.qp_time.as_secs_f64());
        log.step_times.push(step_time);

        x = step_with_substeps(&x, &out.input, plant_wind, t, p.t_s, config.substeps, p).map_err(|e| fail(k, e))?;
    }
    Ok(log)
}

/// Runs every mode in `modes` on one shared profile and initial state,
/// each closed loop on its own thread.
pub fn run_experiment(config: &ExperimentConfig, modes: &[Mode]) -> Result<Vec<ExperimentResult>> {
    config.params.validate()?;
    let profile = config.profile()?;
    let profile = &profile;
    let logs: Vec<Result<SimLog>> = std::thread::scope(|s| {
        let handles: Vec<_> = modes
            .iter()
            .map(|&mode| s.spawn(move || simulate(mode, profile, config)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Simulation { step: 0, cause: Box::new(Error::Domain("controller thread panicked".into())) })))
            .collect()
    });
    modes
        .iter()
        .zip(logs)
        .map(|(&mode, log)| {
            let log = log?;
            let metrics = compute_metrics(&log, &config.params);
            Ok(ExperimentResult { mode, log, metrics })
        })
        .collect()
}
