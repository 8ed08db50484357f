//! Power and power-quality measurements over simulation traces.
//!
//! Reactive power is reported in the load convention: positive Q is inductive
//! consumption by the measured element, with the current taken as flowing
//! into it.

mod trace;

pub use trace::{format_sig, SimulationTrace, TraceMetadata};

use crate::scenario::ScenarioConfig;
use crate::signals::{fortescue, phasor_estimate, required_samples, vuf, SignalError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("{what}: {samples} samples, at least {required} needed")]
    TooShort { what: String, samples: usize, required: usize },
    #[error("channel lengths differ: {0} vs {1}")]
    Misaligned(usize, usize),
    #[error("missing channel `{0}`")]
    MissingChannel(String),
    #[error("window [{start}, {end}] s is outside the trace")]
    WindowOutOfRange { start: f64, end: f64 },
    #[error("not settled: peak-to-peak {ripple:.6} exceeds {allowed:.6} around mean {mean:.6}")]
    NotSettled { mean: f64, ripple: f64, allowed: f64 },
    #[error("scenario has no enable_mrdc event")]
    MissingEvent,
    #[error(transparent)]
    Signal(#[from] SignalError),
}

/// Sliding one-cycle power of an element, one value per full window.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSeries {
    /// Index of the last sample of the first window.
    pub first: usize,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

/// Active and reactive power from the fundamental phasors of one-cycle windows.
///
/// `P = ½·Re(V·I*)`, `Q = ½·Im(V·I*)` on peak phasors, with `i` flowing into
/// the element. For sinusoids this equals `mean(v·i)` and the quadrature
/// correlation.
pub fn pq_measure(v: &[f64], i: &[f64], dt: f64, omega: f64) -> Result<PowerSeries, MetricsError> {
    if v.len() != i.len() {
        return Err(MetricsError::Misaligned(v.len(), i.len()));
    }
    let n = required_samples(dt, omega);
    if v.len() < n || n < 2 {
        return Err(MetricsError::TooShort { what: "power window".into(), samples: v.len(), required: n });
    }
    let mut out = PowerSeries { first: n - 1, p: Vec::with_capacity(v.len() - n + 1), q: Vec::new() };
    for start in 0..=v.len() - n {
        let (p, q) = window_pq(&v[start..start + n], &i[start..start + n], dt, omega)?;
        out.p.push(p);
        out.q.push(q);
    }
    Ok(out)
}

fn window_pq(v: &[f64], i: &[f64], dt: f64, omega: f64) -> Result<(f64, f64), MetricsError> {
    let vp = phasor_estimate(v, dt, omega)?.to_complex();
    let ip = phasor_estimate(i, dt, omega)?.to_complex();
    let s = vp * ip.conj() * 0.5;
    Ok((s.re, s.im))
}

/// Average P and Q over `[start, end]` of a trace, computed on back-to-back cycles.
pub fn mean_pq(
    trace: &SimulationTrace,
    v: &str,
    i: &str,
    sign: f64,
    omega: f64,
    start: f64,
    end: f64,
) -> Result<(Vec<f64>, Vec<f64>), MetricsError> {
    let dt = trace.dt().ok_or(MetricsError::TooShort { what: "trace".into(), samples: trace.len(), required: 2 })?;
    let vs = trace.channel(v).ok_or_else(|| MetricsError::MissingChannel(v.into()))?;
    let is = trace.channel(i).ok_or_else(|| MetricsError::MissingChannel(i.into()))?;
    let range = window_range(trace, start, end)?;
    let n = required_samples(dt, omega);
    let mut p = Vec::new();
    let mut q = Vec::new();
    let mut k = range.start;
    let scaled: Vec<f64> = is[range.clone()].iter().map(|x| sign * x).collect();
    while k + n <= range.end {
        let off = k - range.start;
        let (pp, qq) = window_pq(&vs[k..k + n], &scaled[off..off + n], dt, omega)?;
        p.push(pp);
        q.push(qq);
        k += n;
    }
    if p.is_empty() {
        return Err(MetricsError::TooShort { what: "power window".into(), samples: range.len(), required: n });
    }
    Ok((p, q))
}

/// Per-cycle VUF of three phase-voltage channels.
#[derive(Debug, Clone, PartialEq)]
pub struct VufSeries {
    /// End time of each cycle.
    pub time: Vec<f64>,
    pub vuf: Vec<f64>,
}

/// One VUF value per fundamental cycle: phasor fit of each phase, Fortescue, ratio.
pub fn vuf_series(trace: &SimulationTrace, channels: [&str; 3], omega: f64) -> Result<VufSeries, MetricsError> {
    let dt = trace.dt().ok_or(MetricsError::TooShort { what: "trace".into(), samples: trace.len(), required: 2 })?;
    let cols = channels
        .iter()
        .map(|c| trace.channel(c).ok_or_else(|| MetricsError::MissingChannel((*c).into())))
        .collect::<Result<Vec<_>, _>>()?;
    let n = required_samples(dt, omega);
    let mut out = VufSeries { time: Vec::new(), vuf: Vec::new() };
    let mut k = 0;
    while k + n <= trace.len() {
        let ph = cols
            .iter()
            .map(|c| phasor_estimate(&c[k..k + n], dt, omega))
            .collect::<Result<Vec<_>, _>>()?;
        out.vuf.push(vuf(&fortescue(ph[0], ph[1], ph[2]))?);
        out.time.push(trace.time[k + n - 1]);
        k += n;
    }
    if out.vuf.is_empty() {
        return Err(MetricsError::TooShort { what: "vuf window".into(), samples: trace.len(), required: n });
    }
    Ok(out)
}

fn window_range(trace: &SimulationTrace, start: f64, end: f64) -> Result<std::ops::Range<usize>, MetricsError> {
    let (Some(first), Some(last)) = (trace.time.first(), trace.time.last()) else {
        return Err(MetricsError::WindowOutOfRange { start, end });
    };
    let slack = trace.dt().unwrap_or(0.0);
    if !(start < end && start >= first - slack && end <= last + slack) {
        return Err(MetricsError::WindowOutOfRange { start, end });
    }
    Ok(trace.index_range(start, end))
}

/// Mean of `values` over `[start, end]`, rejected if the peak-to-peak spread
/// exceeds `tol·|mean|`.
pub fn steady_state(time: &[f64], values: &[f64], start: f64, end: f64, tol: f64) -> Result<f64, MetricsError> {
    steady_state_with_floor(time, values, start, end, tol, 0.0)
}

/// [`steady_state`] with the allowed spread never below `floor`; used for
/// quantities whose settled value is near zero.
pub fn steady_state_with_floor(
    time: &[f64],
    values: &[f64],
    start: f64,
    end: f64,
    tol: f64,
    floor: f64,
) -> Result<f64, MetricsError> {
    if time.len() != values.len() {
        return Err(MetricsError::Misaligned(time.len(), values.len()));
    }
    let (Some(&first), Some(&last)) = (time.first(), time.last()) else {
        return Err(MetricsError::WindowOutOfRange { start, end });
    };
    if !(start < end && start >= first && end <= last + 1e-12 * last.abs().max(1.0)) {
        return Err(MetricsError::WindowOutOfRange { start, end });
    }
    let sel: Vec<f64> = time.iter().zip(values).filter(|(t, _)| **t >= start && **t <= end).map(|(_, v)| *v).collect();
    if sel.is_empty() {
        return Err(MetricsError::WindowOutOfRange { start, end });
    }
    let mean = sel.iter().sum::<f64>() / sel.len() as f64;
    let (lo, hi) = sel.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    let ripple = hi - lo;
    let allowed = (tol * mean.abs()).max(floor);
    if ripple > allowed {
        return Err(MetricsError::NotSettled { mean, ripple, allowed });
    }
    Ok(mean)
}

/// Steady-state figures before and after the compensator is switched on.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SummaryReport {
    /// PCC VUF before enabling, percent.
    pub vuf_pre: f64,
    pub vuf_post: f64,
    /// Relative VUF reduction, percent; `None` when there was no unbalance to remove.
    pub improvement: Option<f64>,
    /// Active power of the three-phase PV inverter after enabling.
    pub p_three_phase: f64,
    pub p_single_phase: Option<f64>,
    /// `p_three_phase / p_single_phase`.
    pub sharing_ratio: Option<f64>,
    pub q_three_phase: f64,
    pub q_single_phase: Option<f64>,
    pub q_sharing_ratio: Option<f64>,
    /// Reactive power drawn by the single-phase load bus from the PCC.
    pub q_load_pre: Option<f64>,
    pub q_load_post: Option<f64>,
    /// Reactive power of the ESS (load convention: negative means injecting).
    pub q_ess_pre: Option<f64>,
    pub q_ess: Option<f64>,
}

/// Length of the steady-state windows (s).
pub const SETTLING_WINDOW_S: f64 = 0.3;
/// Relative peak-to-peak tolerance of the windows.
pub const SETTLING_TOL: f64 = 0.02;
/// Below this pre-compensation VUF (percent) there is nothing to improve.
pub const VUF_NOISE_FLOOR: f64 = 1e-3;

/// Fills a [`SummaryReport`] from the last window before `enable_mrdc` and the
/// last window of the run.
///
/// Spread tolerances are relative, with an absolute floor of `SETTLING_TOL`
/// times a reference value (1 % for VUF, the single-phase PV rating for
/// powers) so that quantities settling near zero can be judged at all.
pub fn summarize(trace: &SimulationTrace, cfg: &ScenarioConfig) -> Result<SummaryReport, MetricsError> {
    let t_on = cfg.enable_time().ok_or(MetricsError::MissingEvent)?;
    let t_end = *trace.time.last().ok_or(MetricsError::WindowOutOfRange { start: 0.0, end: 0.0 })?;
    let pre = (t_on - SETTLING_WINDOW_S, t_on);
    let post = (t_end - SETTLING_WINDOW_S, t_end);
    let omega = settled_omega(trace, cfg, post);
    let omega_pre = settled_omega(trace, cfg, pre);

    let series_pre = vuf_series(trace, ["v_pcc_a", "v_pcc_b", "v_pcc_c"], omega_pre)?;
    let series_post = vuf_series(trace, ["v_pcc_a", "v_pcc_b", "v_pcc_c"], omega)?;
    let vuf_floor = SETTLING_TOL * 1.0;
    // cycles are whole, so the last one may end a few samples before the window does
    let settled_vuf = |s: &VufSeries, (a, b): (f64, f64)| {
        let b = s.time.iter().copied().rfind(|t| *t <= b).unwrap_or(b);
        steady_state_with_floor(&s.time, &s.vuf, a, b, SETTLING_TOL, vuf_floor)
    };
    let vuf_pre = settled_vuf(&series_pre, pre)?;
    let vuf_post = settled_vuf(&series_post, post)?;
    let improvement = (vuf_pre > VUF_NOISE_FLOOR).then(|| 100.0 * (vuf_pre - vuf_post) / vuf_pre);

    let power_floor = SETTLING_TOL * cfg.single_phase_pv.rated_power_w;
    let settled = |v: &str, i: &str, sign: f64, win: (f64, f64), w: f64| -> Result<(f64, f64), MetricsError> {
        let (p, q) = mean_pq(trace, v, i, sign, w, win.0, win.1)?;
        let idx: Vec<f64> = (0..p.len()).map(|k| k as f64).collect();
        let end = idx.last().copied().unwrap_or(0.0);
        let mean = |s: &[f64]| {
            if s.len() == 1 {
                Ok(s[0])
            } else {
                steady_state_with_floor(&idx, s, 0.0, end, SETTLING_TOL, power_floor)
            }
        };
        Ok((mean(&p)?, mean(&q)?))
    };

    let mut p3 = 0.0;
    let mut q3 = 0.0;
    for ph in ["a", "b", "c"] {
        let (p, q) = settled(&format!("v_t_{ph}"), &format!("i_inv3_{ph}"), 1.0, post, omega)?;
        p3 += p;
        q3 += q;
    }
    let has = |c: &str| trace.channel(c).is_some();
    let (p1, q1) = if has("i_pv1") {
        let (p, q) = settled("v_bus_b", "i_pv1", 1.0, post, omega)?;
        (Some(p), Some(q))
    } else {
        (None, None)
    };
    let ratio = |a: f64, b: Option<f64>| b.filter(|b| b.abs() > f64::EPSILON).map(|b| a / b);
    let (q_load_pre, q_load_post) = if has("i_tie") {
        (Some(settled("v_bus_b", "i_tie", 1.0, pre, omega_pre)?.1), Some(settled("v_bus_b", "i_tie", 1.0, post, omega)?.1))
    } else {
        (None, None)
    };
    let (q_ess_pre, q_ess) = if has("i_ess") {
        (Some(settled("v_bus_b", "i_ess", -1.0, pre, omega_pre)?.1), Some(settled("v_bus_b", "i_ess", -1.0, post, omega)?.1))
    } else {
        (None, None)
    };

    Ok(SummaryReport {
        vuf_pre,
        vuf_post,
        improvement,
        p_three_phase: p3,
        p_single_phase: p1,
        sharing_ratio: ratio(p3, p1),
        q_three_phase: q3,
        q_single_phase: q1,
        q_sharing_ratio: ratio(q3, q1),
        q_load_pre,
        q_load_post,
        q_ess_pre,
        q_ess,
    })
}

/// System frequency in a window: the three-phase droop frequency if recorded.
fn settled_omega(trace: &SimulationTrace, cfg: &ScenarioConfig, win: (f64, f64)) -> f64 {
    let nominal = cfg.omega_nominal();
    let Some(w) = trace.channel("omega_3ph") else { return nominal };
    let r = trace.index_range(win.0, win.1);
    if r.is_empty() {
        return nominal;
    }
    w[r.clone()].iter().sum::<f64>() / r.len() as f64
}

impl SummaryReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}
