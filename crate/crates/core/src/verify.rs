//! Brute-force reference computations.
//!
//! Nothing here shares code with the paths it checks: the plant Jacobian is
//! taken numerically from [`derivatives`] over the full state, QPs are solved by
//! enumerating every candidate active set, and MPC costs are evaluated by
//! rolling the velocity-form model forward one step at a time.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, Matrix5, Matrix5x2, Vector5};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::linmodel::{continuous_model, discretize, equilibrium, matrix_exponential};
use crate::mpc::{kkt_residuals, solve_qp, AugmentedModel, ConstraintRow, ConstraintSet, MpcWeights};
use crate::plant::{derivatives, ControlInput, PlantState, TurbineParams};

/// Numerical Jacobian of the nonlinear state derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantJacobian {
    pub a: Matrix5<f64>,
    pub b_u: Matrix5x2<f64>,
    pub b_v: Vector5<f64>,
}

/// Richardson-extrapolated central differences of [`derivatives`] with
/// respect to the state, the inputs and the wind speed.
pub fn plant_jacobian(
    x: &PlantState,
    u: &ControlInput,
    v: f64,
    params: &TurbineParams,
) -> Result<PlantJacobian> {
    // z = [x (5), u (2), v]
    let mut z = [0.0; 8];
    z[..5].copy_from_slice(x.to_vector().as_slice());
    z[5] = u.t_g_ref;
    z[6] = u.beta_ref;
    z[7] = v;
    let eval = |z: &[f64; 8]| -> Result<Vector5<f64>> {
        let x = PlantState::from_vector(&Vector5::from_column_slice(&z[..5]));
        let u = ControlInput {
            t_g_ref: z[5],
            beta_ref: z[6],
        };
        Ok(derivatives(&x, &u, z[7], params)?.to_vector())
    };
    let central = |j: usize, h: f64| -> Result<Vector5<f64>> {
        let (mut up, mut dn) = (z, z);
        up[j] += h;
        dn[j] -= h;
        Ok((eval(&up)? - eval(&dn)?) / (2.0 * h))
    };
    let mut cols = Vec::with_capacity(8);
    for (j, zj) in z.iter().enumerate() {
        let h = 1e-4 * zj.abs().max(1.0);
        let coarse = central(j, h)?;
        let fine = central(j, h / 2.0)?;
        cols.push((fine * 4.0 - coarse) / 3.0);
    }
    Ok(PlantJacobian {
        a: Matrix5::from_columns(&cols[..5]),
        b_u: Matrix5x2::from_columns(&cols[5..7]),
        b_v: cols[7],
    })
}

/// Relative entrywise mismatch; entries that are both below `1e-12` count as equal.
pub fn relative_mismatch(a: f64, b: f64) -> f64 {
    let m = a.abs().max(b.abs());
    if m < 1e-12 {
        0.0
    } else {
        (a - b).abs() / m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinCheckRow {
    pub v: f64,
    /// Largest entrywise relative mismatch over A_c, B_cu and B_cv.
    pub jacobian_error: f64,
    /// `|a_d[4][4] − e^(−T_s/τ)|` and `|a_d[3][3] − e^(−T_s/τ_g)|`, the larger.
    pub actuator_pole_error: f64,
    /// Largest `|exp(A)exp(−A) − I|` entry, scaled by the product magnitude.
    pub inverse_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinCheckReport {
    pub rows: Vec<LinCheckRow>,
    pub elapsed: Duration,
}

impl LinCheckReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn worst_jacobian_error(&self) -> f64 {
        self.rows.iter().map(|r| r.jacobian_error).fold(0.0, f64::max)
    }
}

pub const LINCHECK_JACOBIAN_TOL: f64 = 1e-4;
pub const LINCHECK_POLE_TOL: f64 = 1e-9;
pub const LINCHECK_INVERSE_TOL: f64 = 1e-10;

/// Grid of wind speeds `start, start + step, …` up to `stop` inclusive.
pub fn wind_grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| start + i as f64 * step).collect()
}

/// Compares the linearization pipeline to the nonlinear plant on each wind speed.
pub fn lincheck(speeds: &[f64], params: &TurbineParams) -> Result<LinCheckReport> {
    let start = Instant::now();
    let mut rows = Vec::with_capacity(speeds.len());
    for &v in speeds {
        let op = equilibrium(v, params)?;
        let cm = continuous_model(&op, params);
        let jac = plant_jacobian(&op.x_bar, &op.u_bar, v, params)?;
        let mut err: f64 = 0.0;
        for (a, b) in cm.a_c.iter().zip(jac.a.iter()) {
            err = err.max(relative_mismatch(*a, *b));
        }
        for (a, b) in cm.b_cu.iter().zip(jac.b_u.iter()) {
            err = err.max(relative_mismatch(*a, *b));
        }
        for (a, b) in cm.b_cv.iter().zip(jac.b_v.iter()) {
            err = err.max(relative_mismatch(*a, *b));
        }

        let dm = discretize(&cm, params.t_s)?;
        let pole_err = (dm.a_d[(4, 4)] - (-params.t_s / params.tau).exp())
            .abs()
            .max((dm.a_d[(3, 3)] - (-params.t_s / params.tau_g).exp()).abs());

        let a = DMatrix::from_iterator(5, 5, cm.a_c.iter().copied()) * params.t_s;
        let e = matrix_exponential(&a)?;
        let einv = matrix_exponential(&(-a))?;
        let prod = &e * &einv;
        let mag = e.abs() * einv.abs();
        let mut inv_err: f64 = 0.0;
        for i in 0..5 {
            for j in 0..5 {
                let target = if i == j { 1.0 } else { 0.0 };
                inv_err = inv_err.max((prod[(i, j)] - target).abs() / mag[(i, j)].max(1.0));
            }
        }

        rows.push(LinCheckRow {
            v,
            jacobian_error: err,
            actuator_pole_error: pole_err,
            inverse_error: inv_err,
            pass: err < LINCHECK_JACOBIAN_TOL
                && pole_err < LINCHECK_POLE_TOL
                && inv_err < LINCHECK_INVERSE_TOL,
        });
    }
    Ok(LinCheckReport {
        rows,
        elapsed: start.elapsed(),
    })
}

/// Exhaustive active-set enumeration for `min ½xᵀHx + fᵀx s.t. Gx ≤ b`.
///
/// Every subset of at most `n` rows is solved as an equality-constrained
/// problem through the full KKT system; the first candidate that is primal
/// feasible with nonnegative multipliers is the unique optimum. Returns
/// `None` when no subset qualifies (infeasible problem).
pub fn enumerate_qp(
    h: &DMatrix<f64>,
    f: &DVector<f64>,
    g: &DMatrix<f64>,
    b: &DVector<f64>,
) -> Option<DVector<f64>> {
    let n = h.nrows();
    let m = g.nrows();
    let mut subset = Vec::new();
    let mut best = None;
    enumerate_subsets(m, n, 0, &mut subset, &mut |rows| {
        if best.is_some() {
            return;
        }
        let k = rows.len();
        let mut kkt = DMatrix::zeros(n + k, n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(h);
        let mut rhs = DVector::zeros(n + k);
        rhs.rows_mut(0, n).copy_from(&(-f));
        for (c, &r) in rows.iter().enumerate() {
            for j in 0..n {
                kkt[(n + c, j)] = g[(r, j)];
                kkt[(j, n + c)] = g[(r, j)];
            }
            rhs[n + c] = b[r];
        }
        let lu = kkt.lu();
        let det = lu.determinant();
        if !det.is_finite() || det.abs() < 1e-12 {
            return;
        }
        let Some(sol) = lu.solve(&rhs) else { return };
        let x = sol.rows(0, n).into_owned();
        if sol.rows(n, k).iter().any(|&l| l < -1e-9) {
            return;
        }
        if (g * &x - b).iter().any(|&s| s > 1e-9) {
            return;
        }
        best = Some(x);
    });
    best
}

fn enumerate_subsets(
    m: usize,
    max_size: usize,
    start: usize,
    current: &mut Vec<usize>,
    visit: &mut dyn FnMut(&[usize]),
) {
    visit(current);
    if current.len() == max_size {
        return;
    }
    for i in start..m {
        current.push(i);
        enumerate_subsets(m, max_size, i + 1, current, visit);
        current.pop();
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpBenchReport {
    pub instances: usize,
    pub matched: usize,
    pub infeasible: usize,
    pub max_solution_error: f64,
    pub max_stationarity: f64,
    pub max_primal: f64,
    pub max_complementarity: f64,
    pub kkt_failures: usize,
    pub elapsed: Duration,
}

impl QpBenchReport {
    pub fn all_pass(&self) -> bool {
        self.matched == self.instances && self.kkt_failures == 0
    }
}

/// Random strictly convex QP with at most 4 variables and 6 constraints.
pub fn random_small_qp(rng: &mut impl Rng) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>, DVector<f64>) {
    let n = rng.random_range(1..=4);
    let m = rng.random_range(0..=6);
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let h = a.transpose() * &a + DMatrix::identity(n, n) * 0.1;
    let f = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
    let g = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
    let b = DVector::from_fn(m, |_, _| rng.random_range(-0.5..1.0));
    (h, f, g, b)
}

/// Active-set solver against [`enumerate_qp`] on seeded random instances.
pub fn qpbench(instances: usize, seed: u64) -> QpBenchReport {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = QpBenchReport {
        instances,
        matched: 0,
        infeasible: 0,
        max_solution_error: 0.0,
        max_stationarity: 0.0,
        max_primal: 0.0,
        max_complementarity: 0.0,
        kkt_failures: 0,
        elapsed: Duration::ZERO,
    };
    for _ in 0..instances {
        let (h, f, g, b) = random_small_qp(&mut rng);
        let oracle = enumerate_qp(&h, &f, &g, &b);
        match (solve_qp(&h, &f, &g, &b), oracle) {
            (Ok(sol), Some(x)) => {
                let err = (&sol.x - &x).amax();
                report.max_solution_error = report.max_solution_error.max(err);
                if err < 1e-6 {
                    report.matched += 1;
                }
                let kkt = kkt_residuals(&h, &f, &g, &b, &sol);
                report.max_stationarity = report.max_stationarity.max(kkt.stationarity);
                report.max_primal = report.max_primal.max(kkt.primal);
                report.max_complementarity = report.max_complementarity.max(kkt.complementarity);
                if !kkt.acceptable(f.amax()) {
                    report.kkt_failures += 1;
                }
            }
            (Err(crate::Error::Infeasible { .. }), None) => {
                report.matched += 1;
                report.infeasible += 1;
            }
            _ => {}
        }
    }
    report.elapsed = start.elapsed();
    report
}

/// Predicted outputs, inputs and moves from stepping the velocity-form model.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    /// `y(k+1) … y(k+N_p)`
    pub outputs: Vec<DVector<f64>>,
    /// `u(k) … u(k+N_c−1)`
    pub inputs: Vec<DVector<f64>>,
    /// `Δu(k) … Δu(k+N_c−1)`
    pub moves: Vec<DVector<f64>>,
}

pub fn rollout(am: &AugmentedModel, n_p: usize, n_c: usize, x_a: &DVector<f64>, du_seq: &DVector<f64>) -> Rollout {
    let m = am.n_inputs();
    let n = am.n_states();
    let mut x = x_a.clone();
    let mut u = x_a.rows(n - m, m).into_owned();
    let mut out = Rollout {
        outputs: Vec::with_capacity(n_p),
        inputs: Vec::with_capacity(n_c),
        moves: Vec::with_capacity(n_c),
    };
    for j in 0..n_p {
        let du = if j < n_c {
            du_seq.rows(j * m, m).into_owned()
        } else {
            DVector::zeros(m)
        };
        if j < n_c {
            u += &du;
            out.inputs.push(u.clone());
            out.moves.push(du.clone());
        }
        x = &am.a_a * &x + &am.b_a * &du;
        out.outputs.push(&am.c_a * &x);
    }
    out
}

/// Horizon cost `Σ eᵀQe + Σ ΔuᵀRΔu + Σ uᵀR_u u` from an explicit rollout.
pub fn simulated_cost(
    am: &AugmentedModel,
    w: &MpcWeights,
    x_a: &DVector<f64>,
    r_s: &DVector<f64>,
    du_seq: &DVector<f64>,
) -> f64 {
    let ro = rollout(am, w.n_p, w.n_c, x_a, du_seq);
    let q = DMatrix::from_iterator(2, 2, w.q.iter().copied());
    let r = DMatrix::from_iterator(2, 2, w.r.iter().copied());
    let ru = DMatrix::from_iterator(2, 2, w.r_u.iter().copied());
    let mut cost = 0.0;
    for (j, y) in ro.outputs.iter().enumerate() {
        let e = r_s.rows(2 * j, 2) - y;
        cost += e.dot(&(&q * &e));
    }
    for (du, u) in ro.moves.iter().zip(&ro.inputs) {
        cost += du.dot(&(&r * du)) + u.dot(&(&ru * u));
    }
    cost
}

/// Whether the scalar bound encoded by `row` holds along the rollout.
pub fn row_satisfied(row: ConstraintRow, ro: &Rollout, cs: &ConstraintSet) -> bool {
    match row {
        ConstraintRow::OutputMax { step, index } => ro.outputs[step][index] <= cs.y_max[index],
        ConstraintRow::OutputMin { step, index } => ro.outputs[step][index] >= cs.y_min[index],
        ConstraintRow::InputMax { step, index } => ro.inputs[step][index] <= cs.u_max[index],
        ConstraintRow::InputMin { step, index } => ro.inputs[step][index] >= cs.u_min[index],
        ConstraintRow::MoveMax { step, index } => ro.moves[step][index] <= cs.du_max[index],
        ConstraintRow::MoveMin { step, index } => ro.moves[step][index] >= cs.du_min[index],
    }
}

/// Whether every finite bound holds along the rollout, checked without the
/// condensed row list.
pub fn rollout_feasible(ro: &Rollout, cs: &ConstraintSet) -> bool {
    let within = |v: &DVector<f64>, lo: &nalgebra::Vector2<f64>, hi: &nalgebra::Vector2<f64>| {
        (0..2).all(|i| v[i] >= lo[i] && v[i] <= hi[i])
    };
    ro.outputs.iter().all(|y| within(y, &cs.y_min, &cs.y_max))
        && ro.inputs.iter().all(|u| within(u, &cs.u_min, &cs.u_max))
        && ro.moves.iter().all(|d| within(d, &cs.du_min, &cs.du_max))
}
