use crate::scalar::Scalar;

/// Rotates a stationary `αβ` pair into the synchronous frame at angle `theta`.
///
/// With `v_alpha = V cos θ` and `v_beta = V sin θ` the result is `(V, 0)`:
/// the voltage sits on the d-axis and `v_q` vanishes.
#[inline]
pub fn alpha_beta_to_dq<T: Scalar>(v_alpha: T, v_beta: T, theta: T) -> (T, T) {
    let (s, c) = theta.sin_cos();
    (v_alpha * c + v_beta * s, -v_alpha * s + v_beta * c)
}

#[inline]
pub fn dq_to_alpha_beta<T: Scalar>(v_d: T, v_q: T, theta: T) -> (T, T) {
    let (s, c) = theta.sin_cos();
    (v_d * c - v_q * s, v_d * s + v_q * c)
}
