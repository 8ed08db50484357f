use super::{require, ControlError};
use crate::scalar::{wrap_tau, Scalar};
use crate::signals::{LpfState, QsgState};

/// Conventional droop coefficients of a voltage-controlled inverter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DroopParams<T> {
    /// (rad/s)/W
    pub m_p: T,
    /// V/var
    pub n_q: T,
    pub w_nom: T,
    /// Peak phase voltage.
    pub v_nom: T,
}

impl<T: Scalar> DroopParams<T> {
    /// Sizes the slopes so that rated active power sags frequency by
    /// `freq_sag` (fraction) and rated reactive power sags voltage by `volt_sag`.
    pub fn from_ratings(
        w_nom: T,
        v_nom: T,
        rated_p: T,
        rated_q: T,
        freq_sag: T,
        volt_sag: T,
    ) -> Result<Self, ControlError> {
        require(rated_p > T::zero() && rated_q > T::zero(), "rating", "ratings must be > 0")?;
        let p = Self { m_p: freq_sag * w_nom / rated_p, n_q: volt_sag * v_nom / rated_q, w_nom, v_nom };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ControlError> {
        require(self.m_p > T::zero(), "m_p", "must be > 0")?;
        require(self.n_q > T::zero(), "n_q", "must be > 0")?;
        require(self.w_nom > T::zero(), "w_nom", "must be > 0")?;
        require(self.v_nom > T::zero(), "v_nom", "must be > 0")
    }
}

/// `ω = ω_nom − m_p·P`, `V = V_nom − n_q·Q`.
#[inline]
pub fn conventional_droop_step<T: Scalar>(p_meas: T, q_meas: T, params: &DroopParams<T>) -> (T, T) {
    (params.w_nom - params.m_p * p_meas, params.v_nom - params.n_q * q_meas)
}

/// Grid-forming droop controller for one or three phase legs.
///
/// Each leg measures its delivered active and reactive power from the
/// terminal voltage (with a SOGI quadrature copy) and its output current,
/// both low-pass filtered. Frequency follows total active power; each leg's
/// voltage amplitude follows its own reactive power.
#[derive(Debug, Clone)]
pub struct DroopController<T> {
    pub params: DroopParams<T>,
    legs: Vec<Leg<T>>,
    theta: T,
    omega: T,
    /// Reactive power offset subtracted before the Q–V droop (var).
    pub q_setpoint: T,
}

#[derive(Debug, Clone)]
struct Leg<T> {
    qsg: QsgState<T>,
    p: LpfState<T>,
    q: LpfState<T>,
    amplitude: T,
    offset: T,
}

/// Latest operating point of a droop controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DroopReport<T> {
    pub omega: T,
    pub total_p: T,
    pub total_q: T,
}

impl<T: Scalar> DroopController<T> {
    pub fn new(params: DroopParams<T>, phases: usize, power_cutoff: T) -> Result<Self, ControlError> {
        params.validate()?;
        require(phases == 1 || phases == 3, "phases", "droop inverter must have 1 or 3 legs")?;
        let third = T::TAU() / T::lit(3.0);
        let legs = (0..phases)
            .map(|k| {
                Ok(Leg {
                    qsg: QsgState::standard(),
                    p: LpfState::new(power_cutoff, T::zero())?,
                    q: LpfState::new(power_cutoff, T::zero())?,
                    amplitude: params.v_nom,
                    offset: -third * T::from_usize(k).unwrap(),
                })
            })
            .collect::<Result<Vec<_>, crate::signals::SignalError>>()?;
        Ok(Self { params, legs, theta: T::zero(), omega: params.w_nom, q_setpoint: T::zero() })
    }

    pub fn phases(&self) -> usize {
        self.legs.len()
    }

    pub fn omega(&self) -> T {
        self.omega
    }

    pub fn theta(&self) -> T {
        self.theta
    }

    /// Filtered delivered active power of leg `k`.
    pub fn leg_power(&self, k: usize) -> (T, T) {
        (self.legs[k].p.output, self.legs[k].q.output)
    }

    pub fn report(&self) -> DroopReport<T> {
        let (p, q) = self.legs.iter().fold((T::zero(), T::zero()), |(p, q), l| (p + l.p.output, q + l.q.output));
        DroopReport { omega: self.omega, total_p: p, total_q: q }
    }

    /// Internal EMF of each leg for the instant `dt` ahead, given the present
    /// terminal voltages and output currents.
    pub fn step(&mut self, v_terminal: &[T], i_out: &[T], dt: T, out: &mut [T]) {
        debug_assert!(v_terminal.len() == self.legs.len() && i_out.len() == self.legs.len());
        let w = self.omega;
        for (leg, (&v, &i)) in self.legs.iter_mut().zip(v_terminal.iter().zip(i_out)) {
            let (_, v_beta) = leg.qsg.update(v, w, dt);
            leg.p.update(v * i, dt);
            leg.q.update(v_beta * i, dt);
        }
        let total_p = self.legs.iter().fold(T::zero(), |acc, l| acc + l.p.output);
        let (omega, _) = conventional_droop_step(total_p, T::zero(), &self.params);
        self.omega = omega;
        self.theta = wrap_tau(self.theta + omega * dt);
        let per_leg_setpoint = self.q_setpoint / T::from_usize(self.legs.len()).unwrap();
        for (leg, e) in self.legs.iter_mut().zip(out.iter_mut()) {
            let (_, v_cmd) = conventional_droop_step(T::zero(), leg.q.output - per_leg_setpoint, &self.params);
            leg.amplitude = v_cmd.max(T::zero());
            *e = leg.amplitude * (self.theta + leg.offset).cos();
        }
    }
}
