use super::SignalError;
use crate::scalar::Scalar;

/// First-order low-pass filter with exact zero-order-hold discretization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpfState<T> {
    pub output: T,
    /// Corner frequency in rad/s.
    pub cutoff: T,
}

impl<T: Scalar> LpfState<T> {
    pub fn new(cutoff: T, initial: T) -> Result<Self, SignalError> {
        if !(cutoff > T::zero()) || !cutoff.is_finite() {
            return Err(SignalError::InvalidParameter { name: "cutoff", reason: format!("must be > 0, got {cutoff}") });
        }
        Ok(Self { output: initial, cutoff })
    }

    /// `y[k] = y[k-1]·e^(−ω_c·dt) + u·(1 − e^(−ω_c·dt))`
    #[inline]
    pub fn step(self, input: T, dt: T) -> Self {
        let decay = (-self.cutoff * dt).exp();
        Self { output: self.output * decay + input * (T::one() - decay), ..self }
    }

    #[inline]
    pub fn update(&mut self, input: T, dt: T) -> T {
        *self = self.step(input, dt);
        self.output
    }

    pub fn reset(&mut self, value: T) {
        self.output = value;
    }
}
