//! Offline (switched-model) and online (re-linearized) MPC controllers.
//!
//! Both controllers share one step routine: convert the measured state to
//! deviation coordinates of a linearization point, solve the condensed QP,
//! apply the first move on top of the previous absolute input and saturate.
//! They differ only in where the linear model comes from: a two-entry bank
//! built once, or a fresh linearization at the measured wind every sample.

mod estimator;

pub use estimator::estimate_disturbance;

use std::fmt;
use std::time::Duration;

use nalgebra::{DVector, Vector2, Vector5};

use crate::error::{Error, Result};
use crate::linmodel::{linearize, DiscreteLinearModel, OperatingPoint};
use crate::mpc::{
    augment_disturbance, augment_velocity, mpc_step, ActiveSetSolver, ConstraintSet, MpcProblem,
    MpcStepResult, MpcWeights, SolveStatus,
};
use crate::plant::{ControlInput, PlantState, TurbineParams, CUT_IN_WIND, RATED_WIND};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Offline,
    Online,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Offline => "offline",
            Mode::Online => "online",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "offline" => Ok(Mode::Offline),
            "online" => Ok(Mode::Online),
            other => Err(Error::Config(format!("unknown controller mode '{other}'"))),
        }
    }
}

/// Maximum-power tracking targets at the measured wind speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceSignal {
    pub omega_g_ref: f64,
    pub p_g_ref: f64,
}

/// `ω_g,ref = N_g·λ_opt·v/R`, `P_g,ref = ½ρπR²v³·Cp_opt·η`.
pub fn reference(v: f64, params: &TurbineParams) -> Result<ReferenceSignal> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::Domain(format!("wind speed must be positive, got {v}")));
    }
    Ok(ReferenceSignal {
        omega_g_ref: params.n_g * params.lambda_opt * v / params.radius,
        p_g_ref: params.max_power(v) * params.eta,
    })
}

/// Absolute actuator and output limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbsoluteBounds {
    pub t_g_min: f64,
    pub t_g_max: f64,
    pub beta_min: f64,
    pub beta_max: f64,
    /// Per-sample pitch reference move limits, deg.
    pub beta_step_min: f64,
    pub beta_step_max: f64,
    pub omega_g_max: f64,
    pub p_g_max: f64,
}

impl AbsoluteBounds {
    /// Pitch rate limits integrate over one sampling interval into per-step move limits.
    pub fn from_params(params: &TurbineParams) -> Self {
        AbsoluteBounds {
            t_g_min: 0.0,
            t_g_max: params.t_g_max,
            beta_min: params.beta_min,
            beta_max: params.beta_max,
            beta_step_min: params.beta_rate_min * params.t_s,
            beta_step_max: params.beta_rate_max * params.t_s,
            omega_g_max: params.omega_g_max,
            p_g_max: params.p_g_max,
        }
    }

    pub fn saturate(&self, u: ControlInput) -> ControlInput {
        ControlInput {
            t_g_ref: u.t_g_ref.clamp(self.t_g_min, self.t_g_max),
            beta_ref: u.beta_ref.clamp(self.beta_min, self.beta_max),
        }
    }
}

/// Expresses the absolute bounds in deviation coordinates of `op`.
///
/// Output bounds are upper bounds only. With `output_bounds` off the output
/// rows are left infinite.
pub fn shift_constraints(
    op: &OperatingPoint,
    bounds: &AbsoluteBounds,
    params: &TurbineParams,
    output_bounds: bool,
) -> ConstraintSet {
    let inf = f64::INFINITY;
    let u_bar = op.u_bar.to_vector();
    let y_max = if output_bounds {
        Vector2::new(
            bounds.omega_g_max - op.x_bar.omega_g,
            bounds.p_g_max - op.p_g_bar(params),
        )
    } else {
        Vector2::repeat(inf)
    };
    ConstraintSet {
        du_min: Vector2::new(-inf, bounds.beta_step_min),
        du_max: Vector2::new(inf, bounds.beta_step_max),
        u_min: Vector2::new(bounds.t_g_min, bounds.beta_min) - u_bar,
        u_max: Vector2::new(bounds.t_g_max, bounds.beta_max) - u_bar,
        y_min: Vector2::repeat(-inf),
        y_max,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    pub weights: MpcWeights,
    /// Disturbance estimator gain.
    pub kappa: f64,
    /// Clamp on the disturbance estimate, m/s.
    pub d_hat_limit: f64,
    /// Wind speed separating the two offline models.
    pub v_switch: f64,
    /// Half-width of an optional switching band around `v_switch`.
    pub hysteresis: f64,
    /// Linearization wind speeds of the low and high offline models.
    pub offline_points: [f64; 2],
    /// Include the ω_g and P_g ceilings in the QP.
    pub output_constraints: bool,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            weights: MpcWeights::default(),
            kappa: 0.1,
            d_hat_limit: 5.0,
            v_switch: 8.7,
            hysteresis: 0.0,
            offline_points: [6.4, 10.0],
            output_constraints: true,
        }
    }
}

/// A linearization point with its discrete model and condensed QP.
#[derive(Debug, Clone)]
pub struct LinearizedEntry {
    pub op: OperatingPoint,
    pub model: DiscreteLinearModel,
    pub problem: MpcProblem,
}

impl LinearizedEntry {
    pub fn build(v_bar: f64, params: &TurbineParams, config: &ControllerConfig) -> Result<Self> {
        let (op, model) = linearize(v_bar, params)?;
        let (a_p, b_p, c_p) = augment_disturbance(&model);
        let am = augment_velocity(&a_p, &b_p, &c_p);
        let cs = shift_constraints(
            &op,
            &AbsoluteBounds::from_params(params),
            params,
            config.output_constraints,
        );
        let problem = MpcProblem::new(am, config.weights.clone(), cs)?;
        Ok(LinearizedEntry { op, model, problem })
    }
}

/// The two precomputed models of the offline controller.
#[derive(Debug, Clone)]
pub struct OfflineBank {
    pub entries: [LinearizedEntry; 2],
    pub v_switch: f64,
    pub hysteresis: f64,
}

impl OfflineBank {
    pub fn build(params: &TurbineParams, config: &ControllerConfig) -> Result<Self> {
        Ok(OfflineBank {
            entries: [
                LinearizedEntry::build(config.offline_points[0], params, config)?,
                LinearizedEntry::build(config.offline_points[1], params, config)?,
            ],
            v_switch: config.v_switch,
            hysteresis: config.hysteresis,
        })
    }

    /// Bank index for wind `v`. With zero hysteresis this depends on `v` only.
    pub fn select(&self, v: f64, current: Option<usize>) -> usize {
        match current {
            Some(0) if self.hysteresis > 0.0 => usize::from(v >= self.v_switch + self.hysteresis),
            Some(1) if self.hysteresis > 0.0 => usize::from(v >= self.v_switch - self.hysteresis),
            _ => usize::from(v >= self.v_switch),
        }
    }
}

/// One-step-ahead state prediction kept for the disturbance estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Predicted absolute state at the next sample.
    pub x_pred: Vector5<f64>,
    /// Disturbance input column of the model that made the prediction.
    pub b_d: Vector5<f64>,
}

#[derive(Debug, Clone)]
pub struct ControllerState {
    pub mode: Mode,
    pub active_op: Option<OperatingPoint>,
    /// Index into the offline bank, if any.
    pub active_entry: Option<usize>,
    pub d_hat: f64,
    pub u_prev: ControlInput,
    pub warm_start: ActiveSetSolver,
    pub pending: Option<Prediction>,
    pub switches: usize,
}

impl ControllerState {
    pub fn new(mode: Mode, u_init: ControlInput) -> Self {
        ControllerState {
            mode,
            active_op: None,
            active_entry: None,
            d_hat: 0.0,
            u_prev: u_init,
            warm_start: ActiveSetSolver::new(),
            pending: None,
            switches: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepStatus {
    Solved(SolveStatus),
    /// The online pipeline failed; the previous input was held.
    Held,
}

impl StepStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            StepStatus::Solved(s) => s.as_str(),
            StepStatus::Held => "held",
        }
    }
}

#[derive(Debug, Clone)]
pub struct StepOutput {
    pub input: ControlInput,
    pub status: StepStatus,
    pub reference: ReferenceSignal,
    /// Linearization wind speed of the model used.
    pub op_v: f64,
    pub qp_iters: usize,
    pub qp_time: Duration,
    pub mpc: Option<MpcStepResult>,
}

fn check_range(v: f64) -> Result<()> {
    if (CUT_IN_WIND..RATED_WIND).contains(&v) {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            v,
            min: CUT_IN_WIND,
            max: RATED_WIND,
        })
    }
}

/// Augmented state `[δx; d; δu(k−1)]` for the model linearized at `op`.
pub fn augmented_state(op: &OperatingPoint, x_meas: &PlantState, v: f64, d_hat: f64, u_prev: &ControlInput) -> DVector<f64> {
    let dx = x_meas.to_vector() - op.x_bar.to_vector();
    let du = u_prev.to_vector() - op.u_bar.to_vector();
    let mut x_a = DVector::zeros(8);
    x_a.rows_mut(0, 5).copy_from(&dx);
    x_a[5] = (v - op.v_bar) + d_hat;
    x_a.rows_mut(6, 2).copy_from(&du);
    x_a
}

fn step_with_entry(
    entry: &LinearizedEntry,
    cs: &mut ControllerState,
    x_meas: &PlantState,
    v: f64,
    params: &TurbineParams,
    config: &ControllerConfig,
) -> Result<StepOutput> {
    if !x_meas.is_finite() {
        return Err(Error::Domain("non-finite state measurement".into()));
    }
    if let Some(pred) = cs.pending.take() {
        cs.d_hat = estimate_disturbance(
            cs.d_hat,
            &x_meas.to_vector(),
            &pred.x_pred,
            &pred.b_d,
            config.kappa,
            config.d_hat_limit,
        );
    }

    let op = &entry.op;
    let x_a = augmented_state(op, x_meas, v, cs.d_hat, &cs.u_prev);
    let reference = reference(v, params)?;
    let y_ref = Vector2::new(
        reference.omega_g_ref - op.x_bar.omega_g,
        reference.p_g_ref - op.p_g_bar(params),
    );
    let r_s = entry.problem.stack_reference(&y_ref);
    let result = mpc_step(&entry.problem, &mut cs.warm_start, &x_a, &r_s)?;
    if !result.du.iter().all(|d| d.is_finite()) {
        return Err(Error::Domain("non-finite control move".into()));
    }

    let bounds = AbsoluteBounds::from_params(params);
    let du = Vector2::new(
        result.du[0],
        result.du[1].clamp(bounds.beta_step_min, bounds.beta_step_max),
    );
    let input = bounds.saturate(ControlInput::from_vector(&(cs.u_prev.to_vector() + du)));

    let model = &entry.model;
    let dx = x_a.rows(0, 5).into_owned();
    let du_applied = input.to_vector() - op.u_bar.to_vector();
    cs.pending = Some(Prediction {
        x_pred: op.x_bar.to_vector() + model.a_d * dx + model.b_du * du_applied + model.b_d * x_a[5],
        b_d: model.b_d,
    });
    cs.u_prev = input;
    cs.active_op = Some(op.clone());

    Ok(StepOutput {
        input,
        status: StepStatus::Solved(result.status),
        reference,
        op_v: op.v_bar,
        qp_iters: result.iterations,
        qp_time: result.solve_time,
        mpc: Some(result),
    })
}

/// Offline controller: pick the bank entry by wind speed and solve its cached QP.
pub fn offline_controller_step(
    cs: &mut ControllerState,
    bank: &OfflineBank,
    x_meas: &PlantState,
    v: f64,
    params: &TurbineParams,
    config: &ControllerConfig,
) -> Result<StepOutput> {
    check_range(v)?;
    let idx = bank.select(v, cs.active_entry);
    if cs.active_entry.is_some_and(|i| i != idx) {
        cs.switches += 1;
    }
    cs.active_entry = Some(idx);
    step_with_entry(&bank.entries[idx], cs, x_meas, v, params, config)
}

/// Online controller: linearize at the measured wind, condense and solve.
///
/// Any numerical failure along the pipeline holds the previous input.
pub fn online_controller_step(
    cs: &mut ControllerState,
    x_meas: &PlantState,
    v: f64,
    params: &TurbineParams,
    config: &ControllerConfig,
) -> Result<StepOutput> {
    check_range(v)?;
    let attempt = LinearizedEntry::build(v, params, config)
        .and_then(|entry| step_with_entry(&entry, cs, x_meas, v, params, config));
    match attempt {
        Ok(out) => Ok(out),
        Err(_) => {
            cs.pending = None;
            cs.warm_start.reset();
            Ok(StepOutput {
                input: cs.u_prev,
                status: StepStatus::Held,
                reference: reference(v, params)?,
                op_v: v,
                qp_iters: 0,
                qp_time: Duration::ZERO,
                mpc: None,
            })
        }
    }
}

/// A controller of either kind owning its state.
#[derive(Debug, Clone)]
pub struct Controller {
    pub params: TurbineParams,
    pub config: ControllerConfig,
    pub state: ControllerState,
    bank: Option<OfflineBank>,
}

impl Controller {
    pub fn new(mode: Mode, params: TurbineParams, config: ControllerConfig, u_init: ControlInput) -> Result<Self> {
        params.validate()?;
        config.weights.validate()?;
        let bank = match mode {
            Mode::Offline => Some(OfflineBank::build(&params, &config)?),
            Mode::Online => None,
        };
        Ok(Controller {
            params,
            config,
            state: ControllerState::new(mode, u_init),
            bank,
        })
    }

    pub fn mode(&self) -> Mode {
        self.state.mode
    }

    pub fn bank(&self) -> Option<&OfflineBank> {
        self.bank.as_ref()
    }

    pub fn step(&mut self, x_meas: &PlantState, v: f64) -> Result<StepOutput> {
        match &self.bank {
            Some(bank) => offline_controller_step(&mut self.state, bank, x_meas, v, &self.params, &self.config),
            None => online_controller_step(&mut self.state, x_meas, v, &self.params, &self.config),
        }
    }
}
