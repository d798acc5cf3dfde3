use nalgebra::Vector5;

/// Constant-disturbance update along the `B_d` channel:
/// `d̂ ← d̂ + κ·pinv(B_d)·(x_meas − x_pred)`, clamped to `±limit`.
pub fn estimate_disturbance(
    d_hat: f64,
    x_meas: &Vector5<f64>,
    x_pred: &Vector5<f64>,
    b_d: &Vector5<f64>,
    kappa: f64,
    limit: f64,
) -> f64 {
    let norm2 = b_d.norm_squared();
    if norm2 == 0.0 || kappa == 0.0 {
        return d_hat;
    }
    let innovation = b_d.dot(&(x_meas - x_pred)) / norm2;
    (d_hat + kappa * innovation).clamp(-limit, limit)
}
