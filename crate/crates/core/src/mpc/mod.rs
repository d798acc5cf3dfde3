//! Tracking MPC in velocity form, condensed into a dense QP over the stacked
//! move sequence ΔU.

mod condense;
mod model;
mod qp;
mod step;

pub use condense::{
    condense_constraints, condense_cost, CondensedConstraints, prediction_matrices, ConstraintRow, CondensedQp,
    PredictionMatrices,
};
pub use model::{augment_disturbance, augment_velocity, AugmentedModel};
pub use qp::{kkt_residuals, solve_qp, ActiveSetSolver, KktResiduals, QpSolution};
pub use step::{mpc_step, MpcProblem, MpcStepResult, SolveStatus};

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};

/// Stage weights and horizons of the tracking cost.
#[derive(Debug, Clone, PartialEq)]
pub struct MpcWeights {
    /// Output tracking weight on `[ω_g, P_g]`.
    pub q: Matrix2<f64>,
    /// Move weight on `[ΔT_g,ref, Δβ_ref]`.
    pub r: Matrix2<f64>,
    /// Weight on the input deviation `[δT_g,ref, δβ_ref]`.
    pub r_u: Matrix2<f64>,
    pub n_p: usize,
    pub n_c: usize,
}

impl Default for MpcWeights {
    fn default() -> Self {
        MpcWeights::diagonal([100.0, 0.0], [1e-6, 1e3], [0.0, 1e3], 20, 5)
    }
}

impl MpcWeights {
    pub fn diagonal(q: [f64; 2], r: [f64; 2], r_u: [f64; 2], n_p: usize, n_c: usize) -> Self {
        MpcWeights {
            q: Matrix2::from_diagonal(&Vector2::from(q)),
            r: Matrix2::from_diagonal(&Vector2::from(r)),
            r_u: Matrix2::from_diagonal(&Vector2::from(r_u)),
            n_p,
            n_c,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_c == 0 || self.n_c > self.n_p {
            return Err(Error::Config(format!(
                "horizons must satisfy 1 <= n_c <= n_p, got n_c={} n_p={}",
                self.n_c, self.n_p
            )));
        }
        for (name, m) in [("q", &self.q), ("r", &self.r), ("r_u", &self.r_u)] {
            if (m - m.transpose()).amax() > 0.0 || m.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("weight {name} must be finite and symmetric")));
            }
            let min_eig = m.symmetric_eigenvalues().min();
            if min_eig < 0.0 {
                return Err(Error::Config(format!("weight {name} must be positive semidefinite")));
            }
        }
        if self.r.symmetric_eigenvalues().min() <= 0.0 {
            return Err(Error::Config("move weight r must be positive definite".into()));
        }
        Ok(())
    }
}

/// Per-step bounds in deviation coordinates. Infinite entries drop the
/// corresponding rows from the condensed constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    pub du_min: Vector2<f64>,
    pub du_max: Vector2<f64>,
    pub u_min: Vector2<f64>,
    pub u_max: Vector2<f64>,
    pub y_min: Vector2<f64>,
    pub y_max: Vector2<f64>,
}

impl ConstraintSet {
    pub fn unbounded() -> Self {
        let inf = Vector2::repeat(f64::INFINITY);
        ConstraintSet {
            du_min: -inf,
            du_max: inf,
            u_min: -inf,
            u_max: inf,
            y_min: -inf,
            y_max: inf,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (lo, hi, name) in [
            (&self.du_min, &self.du_max, "du"),
            (&self.u_min, &self.u_max, "u"),
            (&self.y_min, &self.y_max, "y"),
        ] {
            for i in 0..2 {
                if lo[i].is_nan() || hi[i].is_nan() || lo[i] >= hi[i] {
                    return Err(Error::Config(format!(
                        "{name} bounds must satisfy min < max, got [{}, {}]",
                        lo[i], hi[i]
                    )));
                }
            }
        }
        Ok(())
    }
}
