use std::collections::VecDeque;

use num_complex::Complex;

use super::{Phasor, SignalError};
use crate::scalar::Scalar;

/// Samples needed for one fundamental period at `omega`.
pub fn required_samples<T: Scalar>(dt: T, omega: T) -> usize {
    (T::TAU() / (omega * dt)).round().to_usize().unwrap_or(usize::MAX).max(2)
}

/// Least-squares fit of `M·cos(ωt + φ)` over a uniformly sampled window.
///
/// Time zero is the first sample. For a pure sinusoid at `omega` the fit is
/// exact even when the window is not an integer number of samples per cycle.
pub fn phasor_estimate<T: Scalar>(window: &[T], dt: T, omega: T) -> Result<Phasor<T>, SignalError> {
    let required = required_samples(dt, omega);
    if window.len() < required {
        return Err(SignalError::WindowTooShort { samples: window.len(), required });
    }
    let mut acc = Correlator::new(1);
    acc.run(omega * dt, window.iter().map(std::slice::from_ref));
    Ok(acc.solve()[0])
}

struct Correlator<T> {
    scc: T,
    sss: T,
    scs: T,
    vc: Vec<T>,
    vs: Vec<T>,
}

impl<T: Scalar> Correlator<T> {
    fn new(channels: usize) -> Self {
        Self { scc: T::zero(), sss: T::zero(), scs: T::zero(), vc: vec![T::zero(); channels], vs: vec![T::zero(); channels] }
    }

    fn run<'a, I>(&mut self, step_angle: T, rows: I)
    where
        I: Iterator<Item = &'a [T]>,
        T: 'a,
    {
        let rot = Complex::from_polar(T::one(), step_angle);
        let mut basis = Complex::new(T::one(), T::zero());
        for (k, row) in rows.enumerate() {
            // renormalise periodically to stop the recurrence drifting
            if k % 256 == 255 {
                basis = Complex::from_polar(T::one(), step_angle * T::from_usize(k).unwrap());
            }
            let (c, s) = (basis.re, basis.im);
            self.scc += c * c;
            self.sss += s * s;
            self.scs += c * s;
            for (j, &v) in row.iter().enumerate() {
                self.vc[j] += v * c;
                self.vs[j] += v * s;
            }
            basis *= rot;
        }
    }

    fn solve(&self) -> Vec<Phasor<T>> {
        let det = self.scc * self.sss - self.scs * self.scs;
        self.vc
            .iter()
            .zip(&self.vs)
            .map(|(&vc, &vs)| {
                let a = (vc * self.sss - vs * self.scs) / det;
                let b = (vs * self.scc - vc * self.scs) / det;
                // a·cos + b·sin = M·cos(ωt + φ) with a = M cos φ, b = −M sin φ
                Phasor::from_complex(Complex::new(a, -b))
            })
            .collect()
    }
}

/// One-cycle sliding phasor estimator over several channels sharing a time base.
///
/// Angles are referred to the oldest sample in the window, so only relative
/// angles between channels are meaningful.
#[derive(Debug, Clone)]
pub struct SlidingPhasor<T> {
    dt: T,
    len: usize,
    channels: usize,
    rows: VecDeque<Vec<T>>,
}

impl<T: Scalar> SlidingPhasor<T> {
    pub fn new(channels: usize, dt: T, omega_nominal: T) -> Self {
        let len = required_samples(dt, omega_nominal);
        Self { dt, len, channels, rows: VecDeque::with_capacity(len + 1) }
    }

    pub fn window_len(&self) -> usize {
        self.len
    }

    pub fn is_full(&self) -> bool {
        self.rows.len() >= self.len
    }

    pub fn push(&mut self, samples: &[T]) {
        debug_assert_eq!(samples.len(), self.channels);
        if self.rows.len() == self.len {
            let mut recycled = self.rows.pop_front().unwrap();
            recycled.copy_from_slice(samples);
            self.rows.push_back(recycled);
        } else {
            self.rows.push_back(samples.to_vec());
        }
    }

    /// Phasors of every channel fitted at `omega`, or `None` until a full
    /// period has been collected.
    pub fn estimate(&self, omega: T) -> Option<Vec<Phasor<T>>> {
        if !self.is_full() {
            return None;
        }
        let mut acc = Correlator::new(self.channels);
        acc.run(omega * self.dt, self.rows.iter().map(|r| r.as_slice()));
        Some(acc.solve())
    }
}
