//! Modified reverse droop chain for the single-phase energy-storage inverter.
//!
//! Current convention: `i_s` is the ESS output current (flowing into the
//! bus), so positive `i_d` exports active power and, with the projection
//! used by [`dq_to_instantaneous_current`], positive `i_q` leads the bus
//! voltage and absorbs reactive power from the network.

use super::{require, ControlError};
use crate::scalar::Scalar;
use crate::signals::{alpha_beta_to_dq, LpfState, Pll, PllConfig, PllSample, QsgState};

/// Branch of the square root used for `Q_s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QsSign {
    Positive,
    Negative,
}

impl QsSign {
    pub fn value<T: Scalar>(self) -> T {
        match self {
            QsSign::Positive => T::one(),
            QsSign::Negative => -T::one(),
        }
    }

    pub fn from_i8(v: i8) -> Option<Self> {
        match v {
            1 => Some(QsSign::Positive),
            -1 => Some(QsSign::Negative),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MrdcParams<T> {
    /// (rad/s)/W
    pub n_r: T,
    /// V/var
    pub m_r: T,
    /// V/var, weight of `V_a − V_b`.
    pub d_r: T,
    /// V/var, weight of `V_c − V_a`.
    pub c_r: T,
    pub w_ref: T,
    /// Peak.
    pub v_ref: T,
    pub qs_sign: QsSign,
    /// Cutoff of the averaging filter on `P_s` (rad/s).
    pub lpf_cutoff: T,
    /// Cutoff of the smoothing filter on `Q_ref` (rad/s).
    pub q_ref_cutoff: T,
    /// `|v_sd|` below this fraction of `v_ref` freezes the current references.
    pub undervoltage_fraction: T,
    /// Use `2·P_ref / v_sd` for the d-axis reference.
    pub power_consistent: bool,
    /// Hand `Q_ref` to the single-phase PV inverter as its reactive setpoint.
    pub forward_q_ref: bool,
}

impl<T: Scalar> MrdcParams<T> {
    pub fn validate(&self) -> Result<(), ControlError> {
        for (name, v) in [("n_r", self.n_r), ("m_r", self.m_r), ("d_r", self.d_r), ("c_r", self.c_r)] {
            require(v != T::zero() && v.is_finite(), name, "must be finite and non-zero")?;
        }
        require(self.w_ref > T::zero(), "w_ref", "must be > 0")?;
        require(self.v_ref > T::zero(), "v_ref", "must be > 0")?;
        require(self.lpf_cutoff > T::zero(), "lpf_cutoff", "must be > 0")?;
        require(self.q_ref_cutoff > T::zero(), "q_ref_cutoff", "must be > 0")?;
        require(
            self.undervoltage_fraction >= T::zero() && self.undervoltage_fraction < T::one(),
            "undervoltage_fraction",
            "must lie in [0, 1)",
        )
    }

    pub fn undervoltage_floor(&self) -> T {
        self.undervoltage_fraction * self.v_ref
    }
}

/// Internal signals of the chain at the latest step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MrdcState<T> {
    pub p_s_filtered: T,
    pub q_s: T,
    pub p_ref: T,
    pub q_ref: T,
    pub q_vcc: T,
    pub id_ref: T,
    pub iq_ref: T,
}

/// `P_ESS = P_MPPT − P_L`.
#[inline]
pub fn compute_p_ess<T: Scalar>(p_mppt: T, p_load: T) -> T {
    p_mppt - p_load
}

/// Instantaneous single-phase power from peak dq quantities, `½·v_sd·i_sd`.
#[inline]
pub fn compute_ps<T: Scalar>(v_sd: T, i_sd: T) -> T {
    T::lit(0.5) * v_sd * i_sd
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QsOutcome<T> {
    pub q_s: T,
    /// The ESS had no apparent-power headroom left.
    pub clamped: bool,
}

/// Reactive capacity `2·(±√(P_ESS² − P_s²))`, zero when `|P_s| > |P_ESS|`.
pub fn compute_qs<T: Scalar>(p_ess: T, p_s: T, sign: QsSign) -> QsOutcome<T> {
    let head = p_ess * p_ess - p_s * p_s;
    if p_s.abs() > p_ess.abs() || !(head >= T::zero()) {
        return QsOutcome { q_s: T::zero(), clamped: p_s.abs() > p_ess.abs() };
    }
    QsOutcome { q_s: sign.value::<T>() * T::lit(2.0) * head.sqrt(), clamped: false }
}

/// `Q_vcc = (V_a − V_b)/d_r + (V_c − V_a)/c_r` on peak magnitudes.
#[inline]
pub fn voltage_compensator<T: Scalar>(v_a: T, v_b: T, v_c: T, params: &MrdcParams<T>) -> T {
    (v_a - v_b) / params.d_r + (v_c - v_a) / params.c_r
}

/// Reverse droop: `P_ref = P_s + (w_ref − w_M)/n_r`, `Q_ref = Q_s − (V_ref − V_M)/m_r − Q_vcc`.
#[inline]
pub fn rpc_references<T: Scalar>(p_s: T, q_s: T, v_m: T, w_m: T, q_vcc: T, params: &MrdcParams<T>) -> (T, T) {
    let p_ref = p_s + (params.w_ref - w_m) / params.n_r;
    let q_ref = q_s - (params.v_ref - v_m) / params.m_r - q_vcc;
    (p_ref, q_ref)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurrentReferences<T> {
    pub id: T,
    pub iq: T,
    /// The previous references were held because `|v_sd|` fell below the floor.
    pub undervoltage: bool,
}

/// `i_d = P_ref/v_sd`, `i_q = Q_ref/v_sd` (or `2·P_ref/v_sd` when `power_consistent`).
///
/// Below `floor` the division is not attempted and `previous` is returned.
pub fn current_references<T: Scalar>(
    p_ref: T,
    q_ref: T,
    v_sd: T,
    floor: T,
    previous: (T, T),
    power_consistent: bool,
) -> CurrentReferences<T> {
    if !(v_sd.abs() >= floor) || v_sd == T::zero() {
        return CurrentReferences { id: previous.0, iq: previous.1, undervoltage: true };
    }
    let p_gain = if power_consistent { T::lit(2.0) } else { T::one() };
    CurrentReferences { id: p_gain * p_ref / v_sd, iq: q_ref / v_sd, undervoltage: false }
}

/// α-axis projection of the rotated reference, `i_d·cos θ − i_q·sin θ`.
#[inline]
pub fn dq_to_instantaneous_current<T: Scalar>(id: T, iq: T, theta: T) -> T {
    id * theta.cos() - iq * theta.sin()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MrdcFlags {
    pub qs_clamped: bool,
    pub undervoltage: bool,
}

/// Samples consumed by one controller step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MrdcMeasurements<T> {
    /// Bus voltage at the ESS terminal.
    pub v_s: T,
    /// ESS output current.
    pub i_s: T,
    /// Peak PCC magnitudes `[V_a, V_b, V_c]`, `None` until an estimate is available.
    pub pcc_magnitudes: Option<[T; 3]>,
    pub p_mppt: T,
    pub p_load: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MrdcOutput<T> {
    /// Instantaneous current reference for the next sample.
    pub i_ref: T,
    pub flags: MrdcFlags,
    /// Reactive setpoint for the single-phase PV inverter, if forwarding is on.
    pub forwarded_q_ref: Option<T>,
}

/// Full measurement and reference chain of the ESS inverter.
///
/// While disabled the chain keeps tracking the bus (PLL, power filter) but
/// commands zero current and holds the `Q_ref` filter at zero, so enabling it
/// ramps the reactive reference in smoothly.
#[derive(Debug, Clone)]
pub struct MrdcController<T> {
    params: MrdcParams<T>,
    pll: Pll<T>,
    current_qsg: QsgState<T>,
    ps_filter: LpfState<T>,
    q_ref_filter: LpfState<T>,
    state: MrdcState<T>,
    last_sample: Option<PllSample<T>>,
    enabled: bool,
}

impl<T: Scalar> MrdcController<T> {
    pub fn new(params: MrdcParams<T>, pll: PllConfig<T>) -> Result<Self, ControlError> {
        params.validate()?;
        Ok(Self {
            params,
            current_qsg: QsgState::new(pll.sogi_gain),
            pll: Pll::new(pll),
            ps_filter: LpfState::new(params.lpf_cutoff, T::zero())?,
            q_ref_filter: LpfState::new(params.q_ref_cutoff, T::zero())?,
            state: MrdcState::default(),
            last_sample: None,
            enabled: false,
        })
    }

    pub fn params(&self) -> &MrdcParams<T> {
        &self.params
    }

    pub fn state(&self) -> &MrdcState<T> {
        &self.state
    }

    pub fn pll_sample(&self) -> Option<&PllSample<T>> {
        self.last_sample.as_ref()
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    pub fn set_enabled(&mut self, on: bool) {
        if !on {
            self.q_ref_filter.reset(T::zero());
        }
        self.enabled = on;
    }

    pub fn step(&mut self, m: &MrdcMeasurements<T>, dt: T) -> MrdcOutput<T> {
        let sample = self.pll.update(m.v_s, dt);
        let (i_alpha, i_beta) = self.current_qsg.update(m.i_s, sample.omega, dt);
        let (i_d, _) = alpha_beta_to_dq(i_alpha, i_beta, sample.theta);
        let v_sd = sample.v_d;

        let p_s = self.ps_filter.update(compute_ps(v_sd, i_d), dt);
        let p_ess = compute_p_ess(m.p_mppt, m.p_load);
        let qs = compute_qs(p_ess, p_s, self.params.qs_sign);
        let q_vcc = m
            .pcc_magnitudes
            .map(|[a, b, c]| voltage_compensator(a, b, c, &self.params))
            .unwrap_or_else(T::zero);
        let (p_ref, q_ref_raw) = rpc_references(p_s, qs.q_s, sample.magnitude, sample.omega, q_vcc, &self.params);
        let q_ref = if self.enabled { self.q_ref_filter.update(q_ref_raw, dt) } else { T::zero() };

        let previous = (self.state.id_ref, self.state.iq_ref);
        let refs = current_references(
            p_ref,
            q_ref,
            v_sd,
            self.params.undervoltage_floor(),
            previous,
            self.params.power_consistent,
        );
        self.state = MrdcState { p_s_filtered: p_s, q_s: qs.q_s, p_ref, q_ref, q_vcc, id_ref: refs.id, iq_ref: refs.iq };
        self.last_sample = Some(sample);

        let i_ref = if self.enabled {
            dq_to_instantaneous_current(refs.id, refs.iq, self.pll.state.theta)
        } else {
            T::zero()
        };
        MrdcOutput {
            i_ref,
            flags: MrdcFlags { qs_clamped: qs.clamped, undervoltage: refs.undervoltage },
            forwarded_q_ref: (self.enabled && self.params.forward_q_ref).then_some(q_ref),
        }
    }
}
