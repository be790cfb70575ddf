//! Product quadrature for the periodic logarithmic singularity.

use std::f64::consts::PI;

/// Weights `R_k`, `k = 0..N`, such that for a `2 pi`-periodic trigonometric
/// polynomial `f` of degree below `N / 2`
/// `int_0^{2 pi} ln(4 sin^2((t_i - s) / 2)) f(s) ds = sum_j R_{|i-j|} f(t_j)`.
pub(crate) fn log_weights(n: usize) -> Vec<f64> {
    let nf = n as f64;
    let half = n / 2;
    (0..n)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / nf;
            let top = if n % 2 == 0 { half - 1 } else { half };
            let mut sum: f64 = (1..=top).map(|m| (m as f64 * t).cos() / m as f64).sum();
            sum *= -4.0 * PI / nf;
            if n % 2 == 0 {
                sum -= 4.0 * PI / (nf * nf) * (half as f64 * t).cos();
            }
            sum
        })
        .collect()
}
