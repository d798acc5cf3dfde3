use nalgebra::DMatrix;

use crate::linmodel::DiscreteLinearModel;

/// Velocity-form prediction model `x_a(k+1) = A_a x_a(k) + B_a Δu(k)`,
/// `y(k) = C_a x_a(k)` with `x_a = [δx; d; u(k−1)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedModel {
    pub a_a: DMatrix<f64>,
    pub b_a: DMatrix<f64>,
    pub c_a: DMatrix<f64>,
}

impl AugmentedModel {
    pub fn n_states(&self) -> usize {
        self.a_a.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b_a.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.c_a.nrows()
    }
}

/// Appends the constant disturbance `d(k+1) = d(k)` entering through `B_d`.
pub fn augment_disturbance(
    dm: &DiscreteLinearModel,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let mut a_p = DMatrix::zeros(6, 6);
    a_p.view_mut((0, 0), (5, 5)).copy_from(&dm.a_d);
    a_p.view_mut((0, 5), (5, 1)).copy_from(&dm.b_d);
    a_p[(5, 5)] = 1.0;
    let mut b_p = DMatrix::zeros(6, 2);
    b_p.view_mut((0, 0), (5, 2)).copy_from(&dm.b_du);
    let mut c_p = DMatrix::zeros(2, 6);
    c_p.view_mut((0, 0), (2, 5)).copy_from(&dm.c_d);
    (a_p, b_p, c_p)
}

/// Adds the previous input as state so the model is driven by moves Δu.
pub fn augment_velocity(
    a_p: &DMatrix<f64>,
    b_p: &DMatrix<f64>,
    c_p: &DMatrix<f64>,
) -> AugmentedModel {
    let (n, m, p) = (a_p.nrows(), b_p.ncols(), c_p.nrows());
    let mut a_a = DMatrix::zeros(n + m, n + m);
    a_a.view_mut((0, 0), (n, n)).copy_from(a_p);
    a_a.view_mut((0, n), (n, m)).copy_from(b_p);
    a_a.view_mut((n, n), (m, m)).fill_with_identity();
    let mut b_a = DMatrix::zeros(n + m, m);
    b_a.view_mut((0, 0), (n, m)).copy_from(b_p);
    b_a.view_mut((n, 0), (m, m)).fill_with_identity();
    let mut c_a = DMatrix::zeros(p, n + m);
    c_a.view_mut((0, 0), (p, n)).copy_from(c_p);
    AugmentedModel { a_a, b_a, c_a }
}
