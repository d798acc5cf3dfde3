use wtmpc::ctrl::{reference, Controller, ControllerConfig, Mode, StepStatus};
use wtmpc::harness::{run_experiment, ExperimentConfig, WindKind};
use wtmpc::linmodel::equilibrium;
use wtmpc::plant::{step, PlantState, TurbineParams};

fn perturbed(v: f64, p: &TurbineParams, factor: f64) -> PlantState {
    let mut x = equilibrium(v, p).unwrap().x_bar;
    x.omega_t *= factor;
    x.omega_g *= factor;
    x
}

fn final_speed_error(mode: Mode, v: f64) -> f64 {
    let p = TurbineParams::default();
    let cfg = ExperimentConfig {
        mode,
        wind: WindKind::Constant(v),
        duration: 30.0,
        initial_state: Some(perturbed(v, &p, 0.9)),
        ..Default::default()
    };
    let res = run_experiment(&cfg, &[mode]).unwrap();
    let last = res[0].log.records.last().unwrap();
    (last.omega_g - last.omega_g_ref).abs() / last.omega_g_ref
}

#[test]
fn both_controllers_regulate_on_the_wind_grid() {
    for v in [5.0, 6.4, 7.0, 8.7, 10.0] {
        for mode in [Mode::Offline, Mode::Online] {
            let e = final_speed_error(mode, v);
            assert!(e < 0.01, "{mode} at {v} m/s: relative error {e}");
        }
    }
}

#[test]
fn controllers_coincide_at_the_low_operating_point() {
    let p = TurbineParams::default();
    let op = equilibrium(6.4, &p).unwrap();
    let x = perturbed(6.4, &p, 0.97);
    let mut off = Controller::new(Mode::Offline, p.clone(), ControllerConfig::default(), op.u_bar).unwrap();
    let mut on = Controller::new(Mode::Online, p.clone(), ControllerConfig::default(), op.u_bar).unwrap();
    let a = off.step(&x, 6.4).unwrap();
    let b = on.step(&x, 6.4).unwrap();
    assert!((a.input.t_g_ref - b.input.t_g_ref).abs() < 1e-6);
    assert!((a.input.beta_ref - b.input.beta_ref).abs() < 1e-6);
}

#[test]
fn estimator_recovers_hidden_wind_bias() {
    let p = TurbineParams::default();
    let v = 7.0;
    let bias = 0.5;
    let op = equilibrium(v, &p).unwrap();
    let mut ctrl = Controller::new(Mode::Online, p.clone(), ControllerConfig::default(), op.u_bar).unwrap();
    let mut x = op.x_bar;
    for k in 0..200 {
        let t = k as f64 * p.t_s;
        let out = ctrl.step(&x, v).unwrap();
        x = step(&x, &out.input, |_| v + bias, t, p.t_s, &p).unwrap();
    }
    let d = ctrl.state.d_hat;
    assert!((d - bias).abs() < 0.1, "d_hat after 10 s: {d}");
}

#[test]
fn estimate_stays_zero_without_mismatch() {
    let p = TurbineParams::default();
    let op = equilibrium(7.0, &p).unwrap();
    let mut ctrl = Controller::new(Mode::Online, p.clone(), ControllerConfig::default(), op.u_bar).unwrap();
    let mut x = op.x_bar;
    for k in 0..100 {
        let out = ctrl.step(&x, 7.0).unwrap();
        x = step(&x, &out.input, |_| 7.0, k as f64 * p.t_s, p.t_s, &p).unwrap();
    }
    assert!(ctrl.state.d_hat.abs() < 1e-9, "{}", ctrl.state.d_hat);
}

#[test]
fn offline_switch_is_a_function_of_wind_only() {
    let p = TurbineParams::default();
    let op = equilibrium(8.69, &p).unwrap();
    let mut ctrl = Controller::new(Mode::Offline, p.clone(), ControllerConfig::default(), op.u_bar).unwrap();
    let a = ctrl.step(&op.x_bar, 8.69).unwrap();
    let b = ctrl.step(&op.x_bar, 8.71).unwrap();
    let c = ctrl.step(&op.x_bar, 8.71).unwrap();
    assert_eq!((a.op_v, b.op_v, c.op_v), (6.4, 10.0, 10.0));
    assert_eq!(ctrl.state.switches, 1);
}

#[test]
fn inputs_stay_within_bounds_on_steps() {
    let p = TurbineParams::default();
    let cfg = ExperimentConfig { wind: WindKind::Steps, duration: 120.0, ..Default::default() };
    for r in run_experiment(&cfg, &[Mode::Offline, Mode::Online]).unwrap() {
        assert_eq!(r.metrics.input_violations, 0, "{}", r.mode);
        assert_eq!(r.metrics.held_steps, 0);
        for rec in &r.log.records {
            assert!((0.0..=45.0).contains(&rec.beta_ref));
            assert!((0.0..=p.t_g_max).contains(&rec.t_g_ref));
        }
        assert!(r.log.records.iter().all(|rec| rec.qp_status != StepStatus::Held.as_str()));
    }
}

#[test]
fn reference_arithmetic() {
    let p = TurbineParams::default();
    assert!((reference(8.7, &p).unwrap().omega_g_ref - 126.0406285714).abs() < 1e-8);
    assert!((reference(14.0, &p).unwrap().omega_g_ref - 2.0 * reference(7.0, &p).unwrap().omega_g_ref).abs() < 1e-12);
}
