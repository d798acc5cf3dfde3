use std::time::{Duration, Instant};

use nalgebra::{DVector, Vector2};

use crate::error::{Error, Result};

use super::condense::stacked_weights;
use super::{
    prediction_matrices, ActiveSetSolver, AugmentedModel, CondensedQp, ConstraintSet, MpcWeights,
    PredictionMatrices,
};

/// Model, horizons, weights and bounds with their condensed matrices.
///
/// Everything here depends only on the linear model and the configuration;
/// a receding-horizon loop rebuilds only the linear term and the bound
/// vector from the current state and reference.
#[derive(Debug, Clone)]
pub struct MpcProblem {
    pub model: AugmentedModel,
    pub weights: MpcWeights,
    pub constraints: ConstraintSet,
    pub prediction: PredictionMatrices,
    pub qp: CondensedQp,
}

impl MpcProblem {
    pub fn new(model: AugmentedModel, weights: MpcWeights, constraints: ConstraintSet) -> Result<Self> {
        weights.validate()?;
        let prediction = prediction_matrices(&model, weights.n_p, weights.n_c)?;
        let qp = CondensedQp::new(&prediction, &weights, &constraints)?;
        Ok(MpcProblem {
            model,
            weights,
            constraints,
            prediction,
            qp,
        })
    }

    /// The ΔU-independent part of the horizon cost.
    pub fn constant_cost(&self, x_a: &DVector<f64>, r_s: &DVector<f64>) -> f64 {
        let pm = &self.prediction;
        let (q1, _, ru1) = stacked_weights(pm, &self.weights);
        let e = &pm.c1 * (&pm.t1 * x_a) - r_s;
        let u = &pm.l1 * x_a;
        e.dot(&(&q1 * &e)) + u.dot(&(&ru1 * &u))
    }

    /// Stacks a constant per-step output reference over the prediction horizon.
    pub fn stack_reference(&self, y_ref: &Vector2<f64>) -> DVector<f64> {
        DVector::from_fn(2 * self.weights.n_p, |i, _| y_ref[i % 2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    /// The previous working set was reused without iterating.
    WarmStart,
    /// The constrained problem was infeasible; the saturated unconstrained
    /// minimizer was applied.
    Fallback,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::WarmStart => "warm",
            SolveStatus::Fallback => "fallback",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcStepResult {
    /// First move Δu(k) of the optimal sequence.
    pub du: Vector2<f64>,
    /// Full optimal move sequence.
    pub du_seq: DVector<f64>,
    /// Predicted horizon cost including the ΔU-independent part.
    pub cost: f64,
    pub active_set: usize,
    pub iterations: usize,
    pub status: SolveStatus,
    /// Row that made the problem infeasible, for fallback solves.
    pub infeasible_row: Option<usize>,
    pub solve_time: Duration,
}

/// One receding-horizon solve from augmented state `x_a` and stacked reference `r_s`.
pub fn mpc_step(
    problem: &MpcProblem,
    solver: &mut ActiveSetSolver,
    x_a: &DVector<f64>,
    r_s: &DVector<f64>,
) -> Result<MpcStepResult> {
    let n = problem.model.n_states();
    if x_a.len() != n || r_s.len() != 2 * problem.weights.n_p {
        return Err(Error::Dimension(format!(
            "state {} / reference {} do not match the problem",
            x_a.len(),
            r_s.len()
        )));
    }
    let start = Instant::now();
    let qp = &problem.qp;
    let f = qp.linear_term(x_a, r_s);
    let b = qp.bound(x_a, r_s);
    let constant = problem.constant_cost(x_a, r_s);

    match solver.solve(&qp.h, &f, &qp.g, &b) {
        Ok(sol) => Ok(MpcStepResult {
            du: Vector2::new(sol.x[0], sol.x[1]),
            cost: sol.objective + constant,
            active_set: sol.active.len(),
            iterations: sol.iterations,
            status: if sol.warm_started {
                SolveStatus::WarmStart
            } else {
                SolveStatus::Optimal
            },
            infeasible_row: None,
            du_seq: sol.x,
            solve_time: start.elapsed(),
        }),
        Err(Error::Infeasible { row }) => {
            solver.reset();
            let du_seq = saturated_unconstrained(problem, x_a, &f)?;
            let cost = 0.5 * du_seq.dot(&(&qp.h * &du_seq)) + f.dot(&du_seq) + constant;
            Ok(MpcStepResult {
                du: Vector2::new(du_seq[0], du_seq[1]),
                du_seq,
                cost,
                active_set: 0,
                iterations: 0,
                status: SolveStatus::Fallback,
                infeasible_row: Some(row),
                solve_time: start.elapsed(),
            })
        }
        Err(e) => Err(e),
    }
}

/// `−H⁻¹f` clipped step by step to the move bounds and the input bounds.
fn saturated_unconstrained(
    problem: &MpcProblem,
    x_a: &DVector<f64>,
    f: &DVector<f64>,
) -> Result<DVector<f64>> {
    let h = &problem.qp.h;
    let chol = h
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Domain("QP Hessian is not positive definite".into()))?;
    let mut du = -chol.solve(f);
    let cs = &problem.constraints;
    let n = x_a.len();
    let mut u = Vector2::new(x_a[n - 2], x_a[n - 1]);
    for step in 0..problem.weights.n_c {
        for i in 0..2 {
            let k = 2 * step + i;
            let mut v = du[k].clamp(cs.du_min[i], cs.du_max[i]);
            let lo = cs.u_min[i] - u[i];
            let hi = cs.u_max[i] - u[i];
            if lo <= hi {
                v = v.clamp(lo, hi);
            }
            du[k] = v;
            u[i] += v;
        }
    }
    Ok(du)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mpc::{augment_disturbance, augment_velocity};
    use nalgebra::{DMatrix, Matrix2};

    /// One state, one output, the 2-input velocity form with scalar dynamics.
    fn tiny_problem(cs: ConstraintSet) -> MpcProblem {
        let a_p = DMatrix::from_row_slice(2, 2, &[0.9, 0.0, 0.0, 0.5]);
        let b_p = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        let c_p = DMatrix::identity(2, 2);
        let am = augment_velocity(&a_p, &b_p, &c_p);
        let w = MpcWeights {
            q: Matrix2::new(2.0, 0.0, 0.0, 1.0),
            r: Matrix2::new(0.5, 0.0, 0.0, 0.25),
            r_u: Matrix2::new(0.0, 0.0, 0.0, 0.1),
            n_p: 1,
            n_c: 1,
        };
        MpcProblem::new(am, w, cs).unwrap()
    }

    #[test]
    fn horizon_one_matches_hand_solution() {
        let p = tiny_problem(ConstraintSet::unbounded());
        let x = DVector::from_vec(vec![1.0, -0.5, 0.2, 0.3]);
        let r = DVector::from_vec(vec![0.7, 0.1]);
        let mut solver = ActiveSetSolver::new();
        let res = mpc_step(&p, &mut solver, &x, &r).unwrap();

        // y(k+1) = A_p x_p + B_p (u_prev + Δu); u(k) = u_prev + Δu.
        // Cost: (y−r)ᵀQ(y−r) + ΔuᵀRΔu + uᵀR_u u. Normal equations by hand:
        // (2BᵀQB + 2R + 2R_u) Δu = −2Bᵀ Q (A x_p + B u_prev − r) − 2R_u u_prev
        let a_p = DMatrix::from_row_slice(2, 2, &[0.9, 0.0, 0.0, 0.5]);
        let b_p = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        let q = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let rr = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.25]);
        let ru = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 0.1]);
        let xp = x.rows(0, 2).into_owned();
        let up = x.rows(2, 2).into_owned();
        let free = &a_p * &xp + &b_p * &up - &r;
        let lhs = b_p.transpose() * &q * &b_p + &rr + &ru;
        let rhs = -(b_p.transpose() * &q * free + &ru * &up);
        let du = lhs.lu().solve(&rhs).unwrap();
        assert!((res.du[0] - du[0]).abs() < 1e-8);
        assert!((res.du[1] - du[1]).abs() < 1e-8);

        let y = &a_p * &xp + &b_p * (&up + &du);
        let u = &up + &du;
        let direct = (&y - &r).dot(&(&q * (&y - &r))) + du.dot(&(&rr * &du)) + u.dot(&(&ru * &u));
        assert!((res.cost - direct).abs() < 1e-10);
    }

    #[test]
    fn move_bounds_are_respected() {
        let mut cs = ConstraintSet::unbounded();
        cs.du_min = Vector2::new(-0.05, -0.05);
        cs.du_max = Vector2::new(0.05, 0.05);
        let p = tiny_problem(cs);
        let x = DVector::from_vec(vec![5.0, -3.0, 0.0, 0.0]);
        let r = DVector::zeros(2);
        let res = mpc_step(&p, &mut ActiveSetSolver::new(), &x, &r).unwrap();
        assert!(res.du.amax() <= 0.05 + 1e-9);
        assert!(res.active_set > 0);
    }

    #[test]
    fn infeasible_outputs_fall_back_to_saturated_minimizer() {
        let mut cs = ConstraintSet::unbounded();
        cs.du_min = Vector2::new(-0.1, -0.1);
        cs.du_max = Vector2::new(0.1, 0.1);
        cs.y_max = Vector2::new(-100.0, f64::INFINITY);
        let p = tiny_problem(cs);
        let x = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        let res = mpc_step(&p, &mut ActiveSetSolver::new(), &x, &DVector::zeros(2)).unwrap();
        assert_eq!(res.status, SolveStatus::Fallback);
        assert!(res.infeasible_row.is_some());
        assert!(res.du.amax() <= 0.1 + 1e-12);
    }

    #[test]
    fn regulator_fixed_point() {
        use crate::linmodel::linearize;
        use crate::plant::TurbineParams;
        let params = TurbineParams::default();
        let (_, dm) = linearize(8.0, &params).unwrap();
        let (a_p, b_p, c_p) = augment_disturbance(&dm);
        let am = augment_velocity(&a_p, &b_p, &c_p);
        let mut cs = ConstraintSet::unbounded();
        cs.du_min[1] = -0.5;
        cs.du_max[1] = 0.5;
        let p = MpcProblem::new(am, MpcWeights::default(), cs).unwrap();
        let res = mpc_step(&p, &mut ActiveSetSolver::new(), &DVector::zeros(8), &DVector::zeros(40)).unwrap();
        assert!(res.du_seq.amax() < 1e-12);
        assert!(res.cost.abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let p = tiny_problem(ConstraintSet::unbounded());
        let err = mpc_step(&p, &mut ActiveSetSolver::new(), &DVector::zeros(3), &DVector::zeros(2));
        assert!(matches!(err, Err(Error::Dimension(_))));
    }
}
