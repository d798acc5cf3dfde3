use crate::plant::TurbineParams;

use super::sim::SimLog;

/// Relative tolerance applied to every bound check.
pub const VIOLATION_TOL: f64 = 1e-6;

/// Summary statistics of one closed-loop run. All fields are nonnegative.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metrics {
    pub samples: usize,
    /// rms(P_max − P_t), W.
    pub rms_power_error: f64,
    /// rms(ω_g,ref − ω_g), rad/s.
    pub rms_speed_error: f64,
    /// Input plus output bound breaches.
    pub constraint_violations: usize,
    /// Breaches of the pitch range, pitch move limit or torque range.
    pub input_violations: usize,
    /// Breaches of the ω_g or P_g ceilings.
    pub output_violations: usize,
    pub mean_qp_time: f64,
    pub max_qp_time: f64,
    pub mean_step_time: f64,
    pub max_step_time: f64,
    /// Σ P_g·T_s, J.
    pub energy: f64,
    /// Σ |T_g,ref(k) − T_g,ref(k−1)|, N·m.
    pub torque_variation: f64,
    pub fallback_steps: usize,
    pub held_steps: usize,
}

fn above(value: f64, bound: f64) -> bool {
    value > bound + VIOLATION_TOL * bound.abs().max(1.0)
}

fn below(value: f64, bound: f64) -> bool {
    value < bound - VIOLATION_TOL * bound.abs().max(1.0)
}

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), e| (s + e * e, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

fn mean_max(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let max = values.iter().copied().fold(0.0, f64::max);
    (values.iter().sum::<f64>() / values.len() as f64, max)
}

pub fn compute_metrics(log: &SimLog, params: &TurbineParams) -> Metrics {
    let recs = &log.records;
    if recs.is_empty() {
        return Metrics::default();
    }
    let step_max = params.beta_rate_max * params.t_s;
    let step_min = params.beta_rate_min * params.t_s;

    let mut input_violations = 0;
    let mut output_violations = 0;
    for (k, r) in recs.iter().enumerate() {
        let mut bad = below(r.beta_ref, params.beta_min)
            || above(r.beta_ref, params.beta_max)
            || below(r.t_g_ref, 0.0)
            || above(r.t_g_ref, params.t_g_max);
        if k > 0 {
            let d = r.beta_ref - recs[k - 1].beta_ref;
            bad |= above(d, step_max) || below(d, step_min);
        }
        input_violations += usize::from(bad);
        output_violations += usize::from(above(r.omega_g, params.omega_g_max) || above(r.p_g, params.p_g_max));
    }

    let (mean_qp_time, max_qp_time) = mean_max(&log.qp_times);
    let (mean_step_time, max_step_time) = mean_max(&log.step_times);
    Metrics {
        samples: recs.len(),
        rms_power_error: rms(recs.iter().map(|r| r.p_max - r.p_t)),
        rms_speed_error: rms(recs.iter().map(|r| r.omega_g_ref - r.omega_g)),
        constraint_violations: input_violations + output_violations,
        input_violations,
        output_violations,
        mean_qp_time,
        max_qp_time,
        mean_step_time,
        max_step_time,
        energy: recs.iter().map(|r| r.p_g * params.t_s).sum(),
        torque_variation: recs.windows(2).map(|w| (w[1].t_g_ref - w[0].t_g_ref).abs()).sum(),
        fallback_steps: recs.iter().filter(|r| r.qp_status == "fallback").count(),
        held_steps: recs.iter().filter(|r| r.qp_status == "held").count(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::SimRecord;

    fn record(t: f64, p_max: f64, p_t: f64) -> SimRecord {
        SimRecord {
            t,
            v: 7.0,
            omega_t: 1.6,
            omega_g: 100.0,
            t_tw: 4000.0,
            t_g: 4000.0,
            beta: 0.0,
            t_g_ref: 4000.0,
            beta_ref: 0.0,
            p_g: 4e5,
            p_t,
            p_max,
            omega_g_ref: 100.0,
            mode: "online".into(),
            qp_iters: 1,
            qp_status: "optimal".into(),
        }
    }

    fn log_of(records: Vec<SimRecord>) -> SimLog {
        let n = records.len();
        SimLog { records, qp_times: vec![1e-4; n], step_times: vec![2e-4; n] }
    }

    #[test]
    fn perfect_tracking_has_zero_error() {
        let m = compute_metrics(&log_of((0..10).map(|k| record(k as f64, 5e5, 5e5)).collect()), &TurbineParams::default());
        assert_eq!(m.rms_power_error, 0.0);
        assert_eq!(m.rms_speed_error, 0.0);
        assert_eq!(m.constraint_violations, 0);
        assert_eq!(m.samples, 10);
        assert!((m.energy - 10.0 * 4e5 * 0.05).abs() < 1e-6);
    }

    #[test]
    fn single_record_error() {
        let m = compute_metrics(&log_of(vec![record(0.0, 600.0, 500.0)]), &TurbineParams::default());
        assert_eq!(m.rms_power_error, 100.0);
    }

    #[test]
    fn sinusoid_rms() {
        let amp = 250.0;
        let n = 4000;
        let recs = (0..n)
            .map(|k| {
                let phase = 2.0 * std::f64::consts::PI * k as f64 / n as f64 * 7.0;
                record(k as f64, 1e5 + amp * phase.sin(), 1e5)
            })
            .collect();
        let m = compute_metrics(&log_of(recs), &TurbineParams::default());
        assert!((m.rms_power_error - amp / 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn counts_each_violation_kind() {
        let p = TurbineParams::default();
        let mut recs: Vec<_> = (0..5).map(|k| record(k as f64, 1.0, 1.0)).collect();
        recs[1].beta_ref = -0.01;
        recs[2].t_g_ref = p.t_g_max * 1.001;
        recs[3].beta_ref = 0.6;
        recs[4].omega_g = p.omega_g_max + 1.0;
        let m = compute_metrics(&log_of(recs), &p);
        assert_eq!(m.input_violations, 4);
        assert_eq!(m.output_violations, 1);
        assert_eq!(m.constraint_violations, 5);
    }

    #[test]
    fn tolerance_absorbs_rounding() {
        let p = TurbineParams::default();
        let mut recs: Vec<_> = (0..2).map(|k| record(k as f64, 1.0, 1.0)).collect();
        recs[0].t_g_ref = p.t_g_max * (1.0 + 1e-9);
        recs[1].beta_ref = 0.5 + 1e-9;
        assert_eq!(compute_metrics(&log_of(recs), &p).constraint_violations, 0);
    }
}
