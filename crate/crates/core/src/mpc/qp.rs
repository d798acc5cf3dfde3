//! Dense strictly convex QP solver
//!
//! ```text
//!     minimize     ½ xᵀ H x + fᵀ x
//!     subject to   G x ≤ b
//! ```
//!
//! Dual active-set iteration in the style of Goldfarb and Idnani: start from
//! the unconstrained minimizer, repeatedly add the most violated constraint
//! and drop active constraints whose multiplier would turn negative. No
//! feasible starting point is needed and infeasibility is detected when a
//! violated row is linearly dependent on the active rows with no multiplier
//! left to release.
//!
//! Variables are scaled to unit Hessian diagonal and rows to unit norm
//! before iterating; multipliers are reported for the original rows.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// One multiplier per row of `G`, zero for inactive rows.
    pub lambda: DVector<f64>,
    /// Rows of `G` held as equalities at the solution.
    pub active: Vec<usize>,
    pub iterations: usize,
    pub objective: f64,
    /// The previous working set was optimal and no iteration was needed.
    pub warm_started: bool,
}

/// Residuals of the first-order optimality conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    /// `‖Hx + f + Gᵀλ‖∞`
    pub stationarity: f64,
    /// `max(0, max(Gx − b))`
    pub primal: f64,
    /// `max |λᵢ (bᵢ − gᵢx)|`
    pub complementarity: f64,
    /// `max(0, −min λ)`
    pub dual: f64,
}

impl KktResiduals {
    /// The acceptance thresholds used across the crate.
    pub fn acceptable(&self, f_norm: f64) -> bool {
        self.stationarity < 1e-8 * (1.0 + f_norm)
            && self.primal <= 1e-9
            && self.complementarity < 1e-8
            && self.dual == 0.0
    }
}

pub fn kkt_residuals(
    h: &DMatrix<f64>,
    f: &DVector<f64>,
    g: &DMatrix<f64>,
    b: &DVector<f64>,
    sol: &QpSolution,
) -> KktResiduals {
    let x = &sol.x;
    let stat = h * x + f + g.tr_mul(&sol.lambda);
    let slack = b - g * x;
    KktResiduals {
        stationarity: stat.amax(),
        primal: slack.iter().fold(0.0, |acc, s| acc.max(-s)),
        complementarity: sol
            .lambda
            .iter()
            .zip(slack.iter())
            .fold(0.0, |acc, (l, s)| acc.max((l * s).abs())),
        dual: sol.lambda.iter().fold(0.0, |acc, l| acc.max(-l)),
    }
}

/// Solves the QP from a cold start.
pub fn solve_qp(
    h: &DMatrix<f64>,
    f: &DVector<f64>,
    g: &DMatrix<f64>,
    b: &DVector<f64>,
) -> Result<QpSolution> {
    ActiveSetSolver::new().solve(h, f, g, b)
}

/// Active-set solver that remembers its last working set.
///
/// When the row layout of `G` is unchanged between calls (as in a receding
/// horizon loop) the previous working set is tried first; if it already
/// satisfies the optimality conditions no iteration is performed.
#[derive(Debug, Clone, Default)]
pub struct ActiveSetSolver {
    working_set: Vec<usize>,
}

struct Scaled {
    hinv: DMatrix<f64>,
    f: DVector<f64>,
    g: DMatrix<f64>,
    b: DVector<f64>,
    var_scale: DVector<f64>,
    row_norm: Vec<f64>,
    tol: Vec<f64>,
}

impl Scaled {
    fn new(h: &DMatrix<f64>, f: &DVector<f64>, g: &DMatrix<f64>, b: &DVector<f64>) -> Result<Self> {
        let n = h.nrows();
        let var_scale = DVector::from_fn(n, |i, _| {
            let d = h[(i, i)];
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                1.0
            }
        });
        let hs = DMatrix::from_fn(n, n, |i, j| h[(i, j)] * var_scale[i] * var_scale[j]);
        let chol = Cholesky::new(hs)
            .ok_or_else(|| Error::Domain("QP Hessian is not positive definite".into()))?;
        let hinv = chol.inverse();
        let fs = f.component_mul(&var_scale);

        let m = g.nrows();
        let mut gs = DMatrix::zeros(m, n);
        let mut bs = DVector::zeros(m);
        let mut row_norm = vec![0.0; m];
        let mut tol = vec![0.0; m];
        for i in 0..m {
            let row = g.row(i).transpose().component_mul(&var_scale);
            let norm = row.norm();
            row_norm[i] = norm;
            if norm == 0.0 {
                if b[i] < 0.0 {
                    return Err(Error::Infeasible { row: i });
                }
                continue;
            }
            gs.row_mut(i).copy_from(&(row / norm).transpose());
            bs[i] = b[i] / norm;
            tol[i] = (1e-10 / norm).max(1e-14 * (1.0 + bs[i].abs()));
        }
        Ok(Scaled {
            hinv,
            f: fs,
            g: gs,
            b: bs,
            var_scale,
            row_norm,
            tol,
        })
    }

    fn active_rows(&self, active: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(active.len(), self.g.ncols(), |i, j| self.g[(active[i], j)])
    }

    /// Minimizer with `active` rows held as equalities.
    fn equality_solve(&self, active: &[usize]) -> Option<(DVector<f64>, DVector<f64>)> {
        if active.is_empty() {
            return Some((-(&self.hinv * &self.f), DVector::zeros(0)));
        }
        let ga = self.active_rows(active);
        let hga = &self.hinv * ga.transpose();
        let m = &ga * &hga;
        let chol = Cholesky::<f64, Dyn>::new(m)?;
        let ba = DVector::from_fn(active.len(), |i, _| self.b[active[i]]);
        let rhs = -(ba + &ga * (&self.hinv * &self.f));
        let lam = chol.solve(&rhs);
        let y = -(&self.hinv * (&self.f + ga.tr_mul(&lam)));
        Some((y, lam))
    }

    /// Index and size of the largest violation outside `active`.
    fn most_violated(&self, y: &DVector<f64>, active: &[usize]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.g.nrows() {
            if self.row_norm[i] == 0.0 || active.contains(&i) {
                continue;
            }
            let viol = self.g.row(i).dot(&y.transpose()) - self.b[i];
            if viol > self.tol[i] && best.is_none_or(|(_, v)| viol > v) {
                best = Some((i, viol));
            }
        }
        best
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        h: &DMatrix<f64>,
        f: &DVector<f64>,
        y: DVector<f64>,
        active: &[usize],
        lam: &[f64],
        iterations: usize,
        warm_started: bool,
    ) -> QpSolution {
        let x = y.component_mul(&self.var_scale);
        let mut lambda = DVector::zeros(self.g.nrows());
        for (&i, &l) in active.iter().zip(lam) {
            lambda[i] = l.max(0.0) / self.row_norm[i];
        }
        let objective = 0.5 * x.dot(&(h * &x)) + f.dot(&x);
        QpSolution {
            x,
            lambda,
            active: active.to_vec(),
            iterations,
            objective,
            warm_started,
        }
    }
}

impl ActiveSetSolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn working_set(&self) -> &[usize] {
        &self.working_set
    }

    pub fn reset(&mut self) {
        self.working_set.clear();
    }

    pub fn solve(
        &mut self,
        h: &DMatrix<f64>,
        f: &DVector<f64>,
        g: &DMatrix<f64>,
        b: &DVector<f64>,
    ) -> Result<QpSolution> {
        let n = h.nrows();
        if !h.is_square() || f.len() != n || g.ncols() != n || g.nrows() != b.len() {
            return Err(Error::Dimension(format!(
                "QP shapes H {:?}, f {}, G {:?}, b {}",
                h.shape(),
                f.len(),
                g.shape(),
                b.len()
            )));
        }
        let sc = Scaled::new(h, f, g, b)?;

        if let Some(sol) = self.try_warm_start(&sc, h, f) {
            return Ok(sol);
        }
        let sol = self.cold_solve(&sc, h, f)?;
        self.working_set = sol.active.clone();
        Ok(sol)
    }

    fn try_warm_start(&self, sc: &Scaled, h: &DMatrix<f64>, f: &DVector<f64>) -> Option<QpSolution> {
        let m = sc.g.nrows();
        if self.working_set.is_empty() || self.working_set.iter().any(|&i| i >= m) {
            return None;
        }
        if self.working_set.iter().any(|&i| sc.row_norm[i] == 0.0) {
            return None;
        }
        let (y, lam) = sc.equality_solve(&self.working_set)?;
        let lam_scale = 1.0 + lam.amax();
        if lam.iter().any(|&l| l < -1e-10 * lam_scale) {
            return None;
        }
        if sc.most_violated(&y, &self.working_set).is_some() {
            return None;
        }
        Some(sc.finish(h, f, y, &self.working_set, lam.as_slice(), 0, true))
    }

    fn cold_solve(&self, sc: &Scaled, h: &DMatrix<f64>, f: &DVector<f64>) -> Result<QpSolution> {
        let n = sc.g.ncols();
        let max_iter = 50 * n.max(1);
        let mut y = -(&sc.hinv * &sc.f);
        let mut active: Vec<usize> = Vec::new();
        let mut lam: Vec<f64> = Vec::new();
        let mut iterations = 0;

        while let Some((p, _)) = sc.most_violated(&y, &active) {
            let gp = sc.g.row(p).transpose();
            let mut lam_p = 0.0;
            loop {
                iterations += 1;
                if iterations > max_iter {
                    return Err(Error::NotConverged { iterations: max_iter });
                }
                let hg = &sc.hinv * &gp;
                let (z, r) = if active.is_empty() {
                    (-hg.clone(), DVector::zeros(0))
                } else {
                    let ga = sc.active_rows(&active);
                    let hga = &sc.hinv * ga.transpose();
                    let chol = Cholesky::<f64, Dyn>::new(&ga * &hga)
                        .ok_or_else(|| Error::Domain("dependent active constraints".into()))?;
                    let r = -chol.solve(&(&ga * &hg));
                    let z = -(&hg + &hga * &r);
                    (z, r)
                };

                // Partial (dual) step: first active multiplier to reach zero.
                let mut t1 = f64::INFINITY;
                let mut drop = None;
                for (j, (&l, &rj)) in lam.iter().zip(r.iter()).enumerate() {
                    if rj < 0.0 {
                        let t = -l / rj;
                        if t < t1 {
                            t1 = t;
                            drop = Some(j);
                        }
                    }
                }

                // Full (primal) step: constraint p becomes active.
                let gz = gp.dot(&z);
                let proj = gp.dot(&hg);
                let viol = gp.dot(&y) - sc.b[p];
                let t2 = if -gz > 1e-12 * proj {
                    viol.max(0.0) / -gz
                } else {
                    f64::INFINITY
                };

                if t2.is_infinite() {
                    let Some(k) = drop else {
                        return Err(Error::Infeasible { row: p });
                    };
                    for (l, rj) in lam.iter_mut().zip(r.iter()) {
                        *l += t1 * rj;
                    }
                    lam_p += t1;
                    active.remove(k);
                    lam.remove(k);
                    continue;
                }

                let t = t1.min(t2);
                y += &z * t;
                for (l, rj) in lam.iter_mut().zip(r.iter()) {
                    *l += t * rj;
                }
                lam_p += t;
                if t2 <= t1 {
                    active.push(p);
                    lam.push(lam_p);
                    break;
                }
                let k = drop.expect("finite partial step has a row to drop");
                active.remove(k);
                lam.remove(k);
            }
        }

        // Re-solve the final equality problem to remove accumulated drift.
        if let Some((yp, lp)) = sc.equality_solve(&active) {
            let lam_scale = 1.0 + lp.amax();
            if lp.iter().all(|&l| l >= -1e-10 * lam_scale) && sc.most_violated(&yp, &active).is_none() {
                return Ok(sc.finish(h, f, yp, &active, lp.as_slice(), iterations, false));
            }
        }
        Ok(sc.finish(h, f, y, &active, &lam, iterations, false))
    }
}
