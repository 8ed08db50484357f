use crate::scalar::Scalar;

/// Second-order generalized integrator used as a quadrature signal generator.
///
/// `v_alpha` follows the input at the tuned frequency; `v_beta` is the same
/// waveform delayed by a quarter period. Integration is trapezoidal, which
/// keeps the resonator undamped apart from the `gain` feedback.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QsgState<T> {
    pub v_alpha: T,
    pub v_beta: T,
    pub gain: T,
    last_input: T,
}

impl<T: Scalar> QsgState<T> {
    pub fn new(gain: T) -> Self {
        Self { v_alpha: T::zero(), v_beta: T::zero(), gain, last_input: T::zero() }
    }

    /// Default damping `k = √2`.
    pub fn standard() -> Self {
        Self::new(T::SQRT_2())
    }

    pub fn step(self, v_in: T, omega: T, dt: T) -> Self {
        let half = T::lit(0.5);
        let h = half * dt * omega;
        let k = self.gain;
        let u = half * dt * omega * k * (v_in + self.last_input);
        let (a, b) = (self.v_alpha, self.v_beta);
        // (I + hA) x + Bu   with A = [[-k, -1], [1, 0]]
        let r0 = (T::one() - h * k) * a - h * b + u;
        let r1 = h * a + b;
        // (I - hA)^-1
        let det = T::one() + h * k + h * h;
        let v_alpha = (r0 - h * r1) / det;
        let v_beta = (h * r0 + (T::one() + h * k) * r1) / det;
        Self { v_alpha, v_beta, gain: k, last_input: v_in }
    }

    pub fn update(&mut self, v_in: T, omega: T, dt: T) -> (T, T) {
        *self = self.step(v_in, omega, dt);
        (self.v_alpha, self.v_beta)
    }
}

pub fn qsg_step<T: Scalar>(state: QsgState<T>, v_in: T, omega: T, dt: T) -> QsgState<T> {
    state.step(v_in, omega, dt)
}
