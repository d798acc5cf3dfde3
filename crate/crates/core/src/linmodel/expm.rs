use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
///
/// The matrix is first balanced with a power-of-two diagonal similarity
/// (exact in floating point), which keeps the number of squarings small for
/// the badly scaled drive-train matrices. The balanced matrix is scaled by
/// `2^-k` until its 1-norm is at most 0.5, the series is summed until a term
/// falls below 1e-16, and the result is squared `k` times.
pub fn matrix_exponential(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "matrix exponential needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::Domain("matrix exponential of non-finite matrix".into()));
    }
    let n = m.nrows();
    let (balanced, d) = balance(m);

    let norm = one_norm(&balanced);
    let mut squarings = 0u32;
    if norm > 0.5 {
        squarings = (norm / 0.5).log2().ceil() as u32;
    }
    let scaled = &balanced * 0.5f64.powi(squarings as i32);

    let mut result = DMatrix::<f64>::identity(n, n);
    let mut term = DMatrix::<f64>::identity(n, n);
    for k in 1..=64 {
        term = &term * &scaled / k as f64;
        result += &term;
        if term.amax() < 1e-16 {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }

    // Undo the similarity: exp(D⁻¹AD) = D⁻¹ exp(A) D.
    for i in 0..n {
        for j in 0..n {
            result[(i, j)] *= d[i] / d[j];
        }
    }
    if !result.iter().all(|v| v.is_finite()) {
        return Err(Error::Overflow);
    }
    Ok(result)
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Returns `(D⁻¹ M D, diag(D))` with `D` a diagonal of powers of two.
fn balance(m: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let n = m.nrows();
    let mut b = m.clone();
    let mut d = vec![1.0; n];
    for _ in 0..100 {
        let mut converged = true;
        for i in 0..n {
            let c: f64 = (0..n).filter(|&j| j != i).map(|j| b[(j, i)].abs()).sum();
            let r: f64 = (0..n).filter(|&j| j != i).map(|j| b[(i, j)].abs()).sum();
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let mut f = 1.0;
            let (mut cc, mut rr) = (c, r);
            while cc < rr / 2.0 {
                cc *= 2.0;
                rr /= 2.0;
                f *= 2.0;
            }
            while cc >= rr * 2.0 {
                cc /= 2.0;
                rr *= 2.0;
                f /= 2.0;
            }
            if (cc + rr) < 0.95 * (c + r) {
                converged = false;
                d[i] *= f;
                for j in 0..n {
                    b[(i, j)] /= f;
                    b[(j, i)] *= f;
                }
            }
        }
        if converged {
            break;
        }
    }
    (b, d)
}
