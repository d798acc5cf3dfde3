use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::{AugmentedModel, ConstraintSet, MpcWeights};

/// Batch prediction maps over the horizon:
///
/// ```text
/// X = T₁ x(k) + S₁ ΔU,   Y = C₁ X,   U = L₁ x(k) + L₂ ΔU
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrices {
    pub t1: DMatrix<f64>,
    pub s1: DMatrix<f64>,
    pub c1: DMatrix<f64>,
    pub l1: DMatrix<f64>,
    pub l2: DMatrix<f64>,
    pub n_p: usize,
    pub n_c: usize,
    pub n_u: usize,
    pub n_y: usize,
}

/// Which scalar inequality a condensed constraint row encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintRow {
    /// `y_i(k+step+1) ≤ y_max`
    OutputMax { step: usize, index: usize },
    OutputMin { step: usize, index: usize },
    /// `u_i(k+step) ≤ u_max`
    InputMax { step: usize, index: usize },
    InputMin { step: usize, index: usize },
    /// `Δu_i(k+step) ≤ Δu_max`
    MoveMax { step: usize, index: usize },
    MoveMin { step: usize, index: usize },
}

/// Dense QP `min ½ΔUᵀHΔU + [xᵀ R_sᵀ] F ΔU  s.t.  G ΔU ≤ W + S [x; R_s]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CondensedQp {
    pub h: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub w: DVector<f64>,
    pub s: DMatrix<f64>,
    pub rows: Vec<ConstraintRow>,
}

pub fn prediction_matrices(
    am: &AugmentedModel,
    n_p: usize,
    n_c: usize,
) -> Result<PredictionMatrices> {
    if n_c == 0 || n_c > n_p {
        return Err(Error::Config(format!(
            "horizons must satisfy 1 <= n_c <= n_p, got n_c={n_c} n_p={n_p}"
        )));
    }
    let n = am.n_states();
    let m = am.n_inputs();
    let p = am.n_outputs();

    // A^i for i = 0..=n_p and A^i B for i = 0..n_p
    let mut powers = Vec::with_capacity(n_p + 1);
    powers.push(DMatrix::<f64>::identity(n, n));
    for i in 0..n_p {
        powers.push(&am.a_a * &powers[i]);
    }
    let ab: Vec<DMatrix<f64>> = powers[..n_p].iter().map(|a| a * &am.b_a).collect();

    let mut t1 = DMatrix::zeros(n * n_p, n);
    let mut s1 = DMatrix::zeros(n * n_p, m * n_c);
    for i in 0..n_p {
        t1.view_mut((i * n, 0), (n, n)).copy_from(&powers[i + 1]);
        for j in 0..n_c.min(i + 1) {
            s1.view_mut((i * n, j * m), (n, m)).copy_from(&ab[i - j]);
        }
    }

    let mut c1 = DMatrix::zeros(p * n_p, n * n_p);
    for i in 0..n_p {
        c1.view_mut((i * p, i * n), (p, n)).copy_from(&am.c_a);
    }

    // x_u occupies the last m entries of the augmented state.
    let mut l1 = DMatrix::zeros(m * n_c, n);
    let mut l2 = DMatrix::zeros(m * n_c, m * n_c);
    for i in 0..n_c {
        l1.view_mut((i * m, n - m), (m, m)).fill_with_identity();
        for j in 0..=i {
            l2.view_mut((i * m, j * m), (m, m)).fill_with_identity();
        }
    }

    Ok(PredictionMatrices {
        t1,
        s1,
        c1,
        l1,
        l2,
        n_p,
        n_c,
        n_u: m,
        n_y: p,
    })
}

fn block_diag(block: &DMatrix<f64>, count: usize) -> DMatrix<f64> {
    let (r, c) = block.shape();
    let mut out = DMatrix::zeros(r * count, c * count);
    for i in 0..count {
        out.view_mut((i * r, i * c), (r, c)).copy_from(block);
    }
    out
}

fn dyn2(m: &nalgebra::Matrix2<f64>) -> DMatrix<f64> {
    DMatrix::from_iterator(2, 2, m.iter().copied())
}

/// `(Q₁, R₁, R_u1)`: the stage weights repeated block-diagonally.
pub(crate) fn stacked_weights(
    pm: &PredictionMatrices,
    w: &MpcWeights,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    (
        block_diag(&dyn2(&w.q), pm.n_p),
        block_diag(&dyn2(&w.r), pm.n_c),
        block_diag(&dyn2(&w.r_u), pm.n_c),
    )
}

/// Hessian `H` and linear map `F` of the condensed cost.
pub fn condense_cost(pm: &PredictionMatrices, w: &MpcWeights) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if pm.n_u != 2 || pm.n_y != 2 {
        return Err(Error::Dimension(format!(
            "weights are 2x2 but the model has {} inputs and {} outputs",
            pm.n_u, pm.n_y
        )));
    }
    let (q1, r1, ru1) = stacked_weights(pm, w);
    let cs = &pm.c1 * &pm.s1;
    let ct = &pm.c1 * &pm.t1;
    let q_cs = &q1 * &cs;

    let mut h = (cs.transpose() * &q_cs + &r1 + pm.l2.transpose() * &ru1 * &pm.l2) * 2.0;
    let sym = (&h + h.transpose()) * 0.5;
    h = sym;

    let upper = (ct.transpose() * &q_cs + pm.l1.transpose() * &ru1 * &pm.l2) * 2.0;
    let lower = &q_cs * -2.0;
    let n = pm.t1.ncols();
    let mut f = DMatrix::zeros(n + lower.nrows(), h.ncols());
    f.view_mut((0, 0), (n, h.ncols())).copy_from(&upper);
    f.view_mut((n, 0), (lower.nrows(), h.ncols())).copy_from(&lower);
    Ok((h, f))
}

/// `(G, W, S, rows)` of the stacked inequality.
pub type CondensedConstraints = (DMatrix<f64>, DVector<f64>, DMatrix<f64>, Vec<ConstraintRow>);

/// Stacked inequality `G ΔU ≤ W + S [x; R_s]`; rows with infinite bounds are dropped.
pub fn condense_constraints(
    pm: &PredictionMatrices,
    cs: &ConstraintSet,
) -> Result<CondensedConstraints> {
    cs.validate()?;
    let n = pm.t1.ncols();
    let nv = pm.s1.ncols();
    let n_ref = pm.n_y * pm.n_p;
    let c_s = &pm.c1 * &pm.s1;
    let c_t = &pm.c1 * &pm.t1;

    let mut g_rows: Vec<DVector<f64>> = Vec::new();
    let mut w_vals: Vec<f64> = Vec::new();
    let mut s_rows: Vec<DVector<f64>> = Vec::new();
    let mut tags = Vec::new();

    let zero_s = DVector::zeros(n + n_ref);
    let mut push = |g: DVector<f64>, w: f64, s: DVector<f64>, tag: ConstraintRow| {
        g_rows.push(g);
        w_vals.push(w);
        s_rows.push(s);
        tags.push(tag);
    };
    let with_state = |row: DVector<f64>| {
        let mut s = DVector::zeros(n + n_ref);
        s.rows_mut(0, n).copy_from(&row);
        s
    };

    for (sign, bound) in [(1.0, &cs.y_max), (-1.0, &cs.y_min)] {
        for step in 0..pm.n_p {
            for index in 0..pm.n_y {
                if !bound[index].is_finite() {
                    continue;
                }
                let r = step * pm.n_y + index;
                let g = c_s.row(r).transpose() * sign;
                let s = with_state(c_t.row(r).transpose() * -sign);
                let tag = if sign > 0.0 {
                    ConstraintRow::OutputMax { step, index }
                } else {
                    ConstraintRow::OutputMin { step, index }
                };
                push(g, sign * bound[index], s, tag);
            }
        }
    }
    for (sign, bound) in [(1.0, &cs.u_max), (-1.0, &cs.u_min)] {
        for step in 0..pm.n_c {
            for index in 0..pm.n_u {
                if !bound[index].is_finite() {
                    continue;
                }
                let r = step * pm.n_u + index;
                let g = pm.l2.row(r).transpose() * sign;
                let s = with_state(pm.l1.row(r).transpose() * -sign);
                let tag = if sign > 0.0 {
                    ConstraintRow::InputMax { step, index }
                } else {
                    ConstraintRow::InputMin { step, index }
                };
                push(g, sign * bound[index], s, tag);
            }
        }
    }
    for (sign, bound) in [(1.0, &cs.du_max), (-1.0, &cs.du_min)] {
        for step in 0..pm.n_c {
            for index in 0..pm.n_u {
                if !bound[index].is_finite() {
                    continue;
                }
                let mut g = DVector::zeros(nv);
                g[step * pm.n_u + index] = sign;
                let tag = if sign > 0.0 {
                    ConstraintRow::MoveMax { step, index }
                } else {
                    ConstraintRow::MoveMin { step, index }
                };
                push(g, sign * bound[index], zero_s.clone(), tag);
            }
        }
    }

    let m = g_rows.len();
    let g = DMatrix::from_fn(m, nv, |i, j| g_rows[i][j]);
    let s = DMatrix::from_fn(m, n + n_ref, |i, j| s_rows[i][j]);
    Ok((g, DVector::from_vec(w_vals), s, tags))
}

impl CondensedQp {
    pub fn new(pm: &PredictionMatrices, w: &MpcWeights, cs: &ConstraintSet) -> Result<Self> {
        let (h, f) = condense_cost(pm, w)?;
        let (g, w, s, rows) = condense_constraints(pm, cs)?;
        Ok(CondensedQp { h, f, g, w, s, rows })
    }

    fn stacked(x: &DVector<f64>, r_s: &DVector<f64>) -> DVector<f64> {
        let mut z = DVector::zeros(x.len() + r_s.len());
        z.rows_mut(0, x.len()).copy_from(x);
        z.rows_mut(x.len(), r_s.len()).copy_from(r_s);
        z
    }

    /// Linear term `Fᵀ [x; R_s]`.
    pub fn linear_term(&self, x: &DVector<f64>, r_s: &DVector<f64>) -> DVector<f64> {
        self.f.tr_mul(&Self::stacked(x, r_s))
    }

    /// Right-hand side `W + S [x; R_s]`.
    pub fn bound(&self, x: &DVector<f64>, r_s: &DVector<f64>) -> DVector<f64> {
        &self.w + &self.s * Self::stacked(x, r_s)
    }
}
