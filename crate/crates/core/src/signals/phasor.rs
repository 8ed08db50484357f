use num_complex::Complex;

use super::SignalError;
use crate::scalar::{wrap_pi, Scalar};

/// Fundamental-frequency phasor in polar form (peak magnitude).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Phasor<T> {
    pub magnitude: T,
    pub angle: T,
}

impl<T: Scalar> Phasor<T> {
    /// Builds a phasor, folding negative magnitudes into the angle and
    /// normalising the angle into `(-π, π]`.
    pub fn new(magnitude: T, angle: T) -> Self {
        if magnitude < T::zero() {
            Self { magnitude: -magnitude, angle: wrap_pi(angle + T::PI()) }
        } else {
            Self { magnitude, angle: wrap_pi(angle) }
        }
    }

    pub fn from_degrees(magnitude: T, degrees: T) -> Self {
        Self::new(magnitude, degrees.to_radians())
    }

    pub fn from_complex(z: Complex<T>) -> Self {
        let magnitude = z.norm();
        let angle = if magnitude == T::zero() { T::zero() } else { z.arg() };
        Self::new(magnitude, angle)
    }

    pub fn to_complex(self) -> Complex<T> {
        Complex::from_polar(self.magnitude, self.angle)
    }

    pub fn scale(self, k: T) -> Self {
        Self::new(self.magnitude * k, self.angle)
    }
}

/// Zero / positive / negative sequence decomposition of a three-phase set.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SymmetricalComponents<T> {
    pub zero: Phasor<T>,
    pub positive: Phasor<T>,
    pub negative: Phasor<T>,
}

impl<T: Scalar> SymmetricalComponents<T> {
    pub fn scale(self, k: T) -> Self {
        Self { zero: self.zero.scale(k), positive: self.positive.scale(k), negative: self.negative.scale(k) }
    }
}

fn alpha<T: Scalar>() -> Complex<T> {
    Complex::from_polar(T::one(), T::TAU() / T::lit(3.0))
}

/// Fortescue transform of an `abc` phasor triple.
pub fn fortescue<T: Scalar>(a: Phasor<T>, b: Phasor<T>, c: Phasor<T>) -> SymmetricalComponents<T> {
    let (a, b, c) = (a.to_complex(), b.to_complex(), c.to_complex());
    let al = alpha::<T>();
    let al2 = al * al;
    let third = T::one() / T::lit(3.0);
    SymmetricalComponents {
        zero: Phasor::from_complex((a + b + c) * third),
        positive: Phasor::from_complex((a + b * al + c * al2) * third),
        negative: Phasor::from_complex((a + b * al2 + c * al) * third),
    }
}

/// Rebuilds the `abc` phasors from their sequence components.
pub fn inverse_fortescue<T: Scalar>(s: &SymmetricalComponents<T>) -> [Phasor<T>; 3] {
    let (z, p, n) = (s.zero.to_complex(), s.positive.to_complex(), s.negative.to_complex());
    let al = alpha::<T>();
    let al2 = al * al;
    [
        Phasor::from_complex(z + p + n),
        Phasor::from_complex(z + p * al2 + n * al),
        Phasor::from_complex(z + p * al + n * al2),
    ]
}

/// Voltage unbalance factor, `100 · |V−| / |V+|`, in percent.
pub fn vuf<T: Scalar>(s: &SymmetricalComponents<T>) -> Result<T, SignalError> {
    let pos = s.positive.magnitude;
    if !(pos > T::zero()) {
        return Err(SignalError::DegeneratePositiveSequence);
    }
    Ok(T::lit(100.0) * s.negative.magnitude / pos)
}
