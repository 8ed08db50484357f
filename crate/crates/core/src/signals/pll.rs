use super::{alpha_beta_to_dq, LpfState, QsgState, SignalError};
use crate::scalar::{wrap_tau, Scalar};

/// Loop-filter and limit settings of the synchronous-reference-frame PLL.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PllConfig<T> {
    pub k_p: T,
    pub k_i: T,
    pub omega_nominal: T,
    pub omega_min: T,
    pub omega_max: T,
    /// Corner of the magnitude-tracking low-pass, rad/s.
    pub magnitude_cutoff: T,
    pub sogi_gain: T,
}

impl<T: Scalar> PllConfig<T> {
    /// PI gains placing the linearised loop at natural frequency `omega_n`
    /// with damping `zeta` for an input of peak amplitude `v_nominal`:
    /// `k_p = 2ζω_n / V`, `k_i = ω_n² / V`. Frequency clamp is ±20 %.
    pub fn design(v_nominal: T, omega_nominal: T, zeta: T, omega_n: T) -> Result<Self, SignalError> {
        if !(v_nominal > T::zero()) {
            return Err(SignalError::InvalidParameter { name: "v_nominal", reason: "must be > 0".into() });
        }
        if !(omega_nominal > T::zero()) || !(omega_n > T::zero()) || !(zeta > T::zero()) {
            return Err(SignalError::InvalidParameter {
                name: "omega",
                reason: "nominal frequency, natural frequency and damping must be > 0".into(),
            });
        }
        Ok(Self {
            k_p: T::lit(2.0) * zeta * omega_n / v_nominal,
            k_i: omega_n * omega_n / v_nominal,
            omega_nominal,
            omega_min: T::lit(0.8) * omega_nominal,
            omega_max: T::lit(1.2) * omega_nominal,
            magnitude_cutoff: T::TAU() * T::lit(20.0),
            sogi_gain: T::SQRT_2(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PllState<T> {
    /// Phase of the tracked signal, `[0, 2π)`.
    pub theta: T,
    pub omega_estimate: T,
    /// Integral-path contribution to the frequency estimate (offset from nominal), rad/s.
    pub integrator: T,
    /// Filtered peak amplitude.
    pub magnitude_estimate: T,
}

impl<T: Scalar> PllState<T> {
    pub fn at_nominal(cfg: &PllConfig<T>) -> Self {
        Self { theta: T::zero(), omega_estimate: cfg.omega_nominal, integrator: T::zero(), magnitude_estimate: T::zero() }
    }

    /// One loop update from the synchronous-frame components of the input.
    pub fn step(self, cfg: &PllConfig<T>, v_d: T, v_q: T, dt: T) -> Self {
        let lo = cfg.omega_min - cfg.omega_nominal;
        let hi = cfg.omega_max - cfg.omega_nominal;
        let integrator = clamp(self.integrator + cfg.k_i * v_q * dt, lo, hi);
        let omega_estimate = clamp(cfg.omega_nominal + cfg.k_p * v_q + integrator, cfg.omega_min, cfg.omega_max);
        let theta = wrap_tau(self.theta + omega_estimate * dt);
        let mag = LpfState { output: self.magnitude_estimate, cutoff: cfg.magnitude_cutoff }.step(v_d.hypot(v_q), dt);
        Self { theta, omega_estimate, integrator, magnitude_estimate: mag.output }
    }
}

fn clamp<T: Scalar>(x: T, lo: T, hi: T) -> T {
    x.max(lo).min(hi)
}

/// Snapshot produced by one [`Pll::update`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PllSample<T> {
    /// Angle the dq projection of this sample used.
    pub theta: T,
    pub omega: T,
    pub magnitude: T,
    pub v_alpha: T,
    pub v_beta: T,
    pub v_d: T,
    pub v_q: T,
}

/// Single-phase SOGI front end feeding an SRF-PLL.
#[derive(Debug, Clone, PartialEq)]
pub struct Pll<T> {
    pub config: PllConfig<T>,
    pub qsg: QsgState<T>,
    pub state: PllState<T>,
}

impl<T: Scalar> Pll<T> {
    pub fn new(config: PllConfig<T>) -> Self {
        Self { qsg: QsgState::new(config.sogi_gain), state: PllState::at_nominal(&config), config }
    }

    pub fn update(&mut self, v: T, dt: T) -> PllSample<T> {
        let (v_alpha, v_beta) = self.qsg.update(v, self.state.omega_estimate, dt);
        let theta = self.state.theta;
        let (v_d, v_q) = alpha_beta_to_dq(v_alpha, v_beta, theta);
        self.state = self.state.step(&self.config, v_d, v_q, dt);
        PllSample { theta, omega: self.state.omega_estimate, magnitude: self.state.magnitude_estimate, v_alpha, v_beta, v_d, v_q }
    }
}
