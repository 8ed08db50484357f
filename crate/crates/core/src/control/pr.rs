use super::{require, ControlError};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonantTerm<T> {
    pub harmonic: u32,
    pub k_r: T,
}

/// Proportional-resonant regulator settings.
#[derive(Debug, Clone, PartialEq)]
pub struct PrParams<T> {
    pub k_p: T,
    /// Resonator bandwidth, rad/s.
    pub omega_c: T,
    pub resonant_terms: Vec<ResonantTerm<T>>,
    /// Fundamental the harmonics are multiples of, rad/s.
    pub omega_0: T,
}

impl<T: Scalar> PrParams<T> {
    pub fn validate(&self) -> Result<(), ControlError> {
        require(self.k_p > T::zero(), "k_p", "must be > 0")?;
        require(self.omega_c > T::zero(), "omega_c", "must be > 0")?;
        require(self.omega_0 > T::zero(), "omega_0", "must be > 0")?;
        for (i, t) in self.resonant_terms.iter().enumerate() {
            require(t.harmonic >= 1, "harmonic", "harmonic order must be >= 1")?;
            require(
                self.resonant_terms[..i].iter().all(|o| o.harmonic != t.harmonic),
                "harmonic",
                format!("harmonic {} listed twice", t.harmonic),
            )?;
        }
        Ok(())
    }
}

/// `2·k_r·ω_c·s / (s² + 2·ω_c·s + ω_k²)` through a Tustin map prewarped at `ω_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Resonator<T> {
    b0: T,
    a1: T,
    a2: T,
    z1: T,
    z2: T,
}

impl<T: Scalar> Resonator<T> {
    fn design(k_r: T, omega_c: T, omega_k: T, dt: T) -> Self {
        let two = T::lit(2.0);
        let k = omega_k / (omega_k * dt / two).tan();
        let wk2 = omega_k * omega_k;
        let a0 = k * k + two * omega_c * k + wk2;
        Self {
            b0: two * k_r * omega_c * k / a0,
            a1: two * (wk2 - k * k) / a0,
            a2: (k * k - two * omega_c * k + wk2) / a0,
            z1: T::zero(),
            z2: T::zero(),
        }
    }

    #[inline]
    fn step(&mut self, x: T) -> T {
        // b1 = 0, b2 = −b0
        let y = self.b0 * x + self.z1;
        self.z1 = -self.a1 * y + self.z2;
        self.z2 = -self.b0 * x - self.a2 * y;
        y
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrController<T> {
    params: PrParams<T>,
    resonators: Vec<Resonator<T>>,
    dt: T,
}

impl<T: Scalar> PrController<T> {
    pub fn new(params: PrParams<T>, dt: T) -> Result<Self, ControlError> {
        params.validate()?;
        require(dt > T::zero(), "dt", "must be > 0")?;
        let resonators = params
            .resonant_terms
            .iter()
            .map(|t| {
                let wk = params.omega_0 * T::from_u32(t.harmonic).unwrap();
                Resonator::design(t.k_r, params.omega_c, wk, dt)
            })
            .collect();
        Ok(Self { params, resonators, dt })
    }

    pub fn params(&self) -> &PrParams<T> {
        &self.params
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    /// Regulator output for the current tracking error.
    pub fn step(&mut self, error: T) -> T {
        let mut out = self.params.k_p * error;
        for r in &mut self.resonators {
            out += r.step(error);
        }
        out
    }

    /// Sum of the resonator outputs' internal states; useful for bounding checks.
    pub fn state_norm(&self) -> T {
        self.resonators.iter().fold(T::zero(), |acc, r| acc + r.z1.abs() + r.z2.abs())
    }

    pub fn reset(&mut self) {
        for r in &mut self.resonators {
            r.z1 = T::zero();
            r.z2 = T::zero();
        }
    }
}
