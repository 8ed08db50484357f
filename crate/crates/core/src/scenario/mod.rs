//! Scenario files: TOML experiment descriptions with strict key checking,
//! command-line overrides and physics plausibility warnings.
//!
//! Units are part of the key names (`filter_l_mh`, `dt_plant_us`, ...).
//! Unknown keys are rejected so a misspelt coefficient fails loudly.

mod config;

pub use config::{
    ActionKind, ControlSection, DroopSection, Event, EventAction, FrequencyUnit, LineSection, LoadSection,
    OutputSection, PllSection, PrSection, ResonantSection, RunSection, ScenarioConfig, SystemSection,
    TopologySection,
};

use crate::control::{MrdcParams, PrParams, QsSign, ResonantTerm};
use crate::plant::TopologyParams;
use crate::signals::PllConfig;
use sha2::{Digest, Sha256};
use std::f64::consts::TAU;
use std::path::Path;
use thiserror::Error;

/// The reference scenario shipped with the crate.
pub const DEFAULT_TABLE1: &str = include_str!("../../scenarios/default_table1.toml");

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("{}", match line { Some(l) => format!("parse error at line {l}: {message}"), None => format!("parse error: {message}") })]
    Parse { line: Option<usize>, message: String },
    #[error("override `{key}`: {reason}")]
    Override { key: String, reason: String },
    #[error("invalid `{field}`: {constraint}")]
    Invalid { field: String, constraint: String },
}

fn invalid(field: impl Into<String>, constraint: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid { field: field.into(), constraint: constraint.into() }
}

/// Suspicious but legal setting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Warning {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for Warning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Reads, parses and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig, ScenarioError> {
    load_scenario_with(path, &[])
}

/// [`load_scenario`] plus `section.key=value` overrides applied before validation.
pub fn load_scenario_with(path: impl AsRef<Path>, overrides: &[String]) -> Result<ScenarioConfig, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| ScenarioError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_scenario(&text, overrides)
}

/// The bundled reference scenario.
pub fn default_scenario() -> ScenarioConfig {
    parse_scenario(DEFAULT_TABLE1, &[]).expect("bundled scenario is valid")
}

pub fn parse_scenario(text: &str, overrides: &[String]) -> Result<ScenarioConfig, ScenarioError> {
    let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| parse_error(text, &e))?;
    let cfg = if overrides.is_empty() { cfg } else { apply_overrides(text, overrides)? };
    validate(&cfg)?;
    Ok(cfg)
}

fn parse_error(text: &str, e: &toml::de::Error) -> ScenarioError {
    let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
    ScenarioError::Parse { line, message: e.message().to_string() }
}

fn apply_overrides(text: &str, overrides: &[String]) -> Result<ScenarioConfig, ScenarioError> {
    let mut root: toml::Table = toml::from_str(text).map_err(|e| parse_error(text, &e))?;
    for ov in overrides {
        let (key, raw) = ov
            .split_once('=')
            .ok_or_else(|| ScenarioError::Override { key: ov.clone(), reason: "expected key=value".into() })?;
        let key = key.trim();
        let value = parse_value(raw.trim());
        set_path(&mut root, key, value).map_err(|reason| ScenarioError::Override { key: key.into(), reason })?;
        let probe: Result<ScenarioConfig, _> = root.clone().try_into();
        if let Err(e) = probe {
            return Err(ScenarioError::Override { key: key.into(), reason: e.message().to_string() });
        }
    }
    root.try_into().map_err(|e: toml::de::Error| ScenarioError::Parse { line: None, message: e.message().to_string() })
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_path(root: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), String> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err("empty key segment".into());
    }
    let (last, parents) = parts.split_last().expect("split yields at least one segment");
    let mut cur = root;
    for (depth, seg) in parents.iter().enumerate() {
        let next = cur.get_mut(*seg).ok_or_else(|| format!("no section `{}`", parts[..=depth].join(".")))?;
        cur = match next {
            toml::Value::Table(t) => t,
            toml::Value::Array(items) => return set_in_array(items, &parts[depth + 1..], value),
            _ => return Err(format!("`{}` is not a section", parts[..=depth].join("."))),
        };
    }
    cur.insert((*last).to_string(), value);
    Ok(())
}

fn set_in_array(items: &mut [toml::Value], rest: &[&str], value: toml::Value) -> Result<(), String> {
    let idx: usize = rest[0].parse().map_err(|_| format!("`{}` is not an array index", rest[0]))?;
    let len = items.len();
    let item = items.get_mut(idx).ok_or_else(|| format!("index {idx} out of range (len {len})"))?;
    match (item, rest.len()) {
        (slot, 1) => {
            *slot = value;
            Ok(())
        }
        (toml::Value::Table(t), _) => {
            let mut sub = std::mem::take(t);
            let r = set_path(&mut sub, &rest[1..].join("."), value);
            *t = sub;
            r
        }
        _ => Err("array element is not a table".into()),
    }
}

/// Canonical TOML text of a config; reparses to an identical value.
pub fn to_toml_string(cfg: &ScenarioConfig) -> String {
    toml::to_string(cfg).expect("scenario config always serializes")
}

/// SHA-256 of the canonical serialization.
pub fn scenario_hash(cfg: &ScenarioConfig) -> String {
    hex::encode(Sha256::digest(to_toml_string(cfg).as_bytes()))
}

/// Nodes that carry a resistive load a `load_step` can target.
pub fn load_nodes(cfg: &ScenarioConfig) -> Vec<&'static str> {
    let mut v = vec!["pcc_a", "pcc_b", "pcc_c"];
    if cfg.topology.include_single_phase {
        v.insert(0, "bus_b");
    }
    v
}

fn positive(field: &str, x: f64) -> Result<(), ScenarioError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be positive and finite (got {x})")))
    }
}

fn integer_ratio(a: f64, b: f64) -> bool {
    let r = a / b;
    r >= 1.0 - 1e-9 && (r - r.round()).abs() <= 1e-9 * r.max(1.0)
}

/// Checks every constraint of the schema. Returns the first violation.
pub fn validate(cfg: &ScenarioConfig) -> Result<(), ScenarioError> {
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(invalid("schema_version", format!("must be {SCHEMA_VERSION}")));
    }
    let run = &cfg.run;
    positive("run.duration_s", run.duration_s)?;
    positive("run.dt_plant_us", run.dt_plant_us)?;
    positive("run.dt_control_us", run.dt_control_us)?;
    positive("run.trace_interval_us", run.trace_interval_us)?;
    if !integer_ratio(run.dt_control_us, run.dt_plant_us) {
        return Err(invalid("run.dt_control_us", "must be an integer multiple of run.dt_plant_us"));
    }
    if !integer_ratio(run.trace_interval_us, run.dt_plant_us) {
        return Err(invalid("run.trace_interval_us", "must be an integer multiple of run.dt_plant_us"));
    }

    let sys = &cfg.system;
    match (sys.frequency_rad_s, sys.frequency_hz) {
        (Some(_), Some(_)) => return Err(invalid("system", "give frequency_rad_s or frequency_hz, not both")),
        (None, None) => return Err(invalid("system", "frequency_rad_s or frequency_hz is required")),
        (None, Some(_)) if sys.frequency_interpretation.is_some() => {
            return Err(invalid("system.frequency_interpretation", "only applies to frequency_rad_s"))
        }
        _ => {}
    }
    positive("system frequency", cfg.omega_nominal())?;
    positive("system.phase_voltage_rms_v", sys.phase_voltage_rms_v)?;
    positive("system.dc_link_v", sys.dc_link_v)?;
    positive("system.filter_l_mh", sys.filter_l_mh)?;
    positive("system.filter_c_uf", sys.filter_c_uf)?;

    let c = &cfg.control;
    if QsSign::from_i8(c.qs_sign).is_none() {
        return Err(invalid("control.qs_sign", "must be +1 or -1"));
    }
    mrdc_params(cfg).validate().map_err(|e| control_field("control", e))?;
    if !c.p_mppt_w.is_finite() {
        return Err(invalid("control.p_mppt_w", "must be finite"));
    }
    positive("control.modulation_limit", c.modulation_limit)?;
    positive("control.load_power_cutoff_hz", c.load_power_cutoff_hz)?;
    pr_params(cfg).validate().map_err(|e| control_field("pr", e))?;
    pll_config(cfg).map_err(|e| invalid("pll", e.to_string()))?;
    if !(cfg.pll.omega_min_pu < 1.0 && cfg.pll.omega_max_pu > 1.0) {
        return Err(invalid("pll", "omega_min_pu < 1 < omega_max_pu required"));
    }

    for (sec, d) in [("three_phase_pv", &cfg.three_phase_pv), ("single_phase_pv", &cfg.single_phase_pv)] {
        positive(&format!("{sec}.rated_power_w"), d.rated_power_w)?;
        positive(&format!("{sec}.rated_reactive_per_phase_var"), d.rated_reactive_per_phase_var)?;
        positive(&format!("{sec}.frequency_droop_pct"), d.frequency_droop_pct)?;
        positive(&format!("{sec}.voltage_droop_pct"), d.voltage_droop_pct)?;
        positive(&format!("{sec}.power_filter_hz"), d.power_filter_hz)?;
    }

    positive("loads.single_phase_r_ohm", cfg.loads.single_phase_r_ohm)?;
    if let Some(l) = cfg.loads.single_phase_l_mh {
        positive("loads.single_phase_l_mh", l)?;
    }
    positive("loads.three_phase_total_w", cfg.loads.three_phase_total_w)?;
    positive("lines.feeder_r_ohm", cfg.lines.feeder_r_ohm)?;
    positive("lines.feeder_l_mh", cfg.lines.feeder_l_mh)?;
    positive("lines.tie_r_ohm", cfg.lines.tie_r_ohm)?;
    positive("lines.tie_l_mh", cfg.lines.tie_l_mh)?;

    let mut last = 0.0;
    for (k, ev) in cfg.events.iter().enumerate() {
        let field = format!("events[{k}]");
        if !(ev.time_s >= 0.0 && ev.time_s <= run.duration_s) {
            return Err(invalid(format!("{field}.time_s"), "must lie within [0, run.duration_s]"));
        }
        if ev.time_s < last {
            return Err(invalid(format!("{field}.time_s"), "events must be sorted by time"));
        }
        last = ev.time_s;
        match ev.resolve().map_err(|m| invalid(&field, m))? {
            EventAction::LoadStep { node, ohms } => {
                if !load_nodes(cfg).contains(&node.as_str()) {
                    return Err(invalid(format!("{field}.node"), format!("no resistive load at `{node}`")));
                }
                positive(&format!("{field}.ohms"), ohms)?;
            }
            EventAction::SetPMppt { watts } if !watts.is_finite() => {
                return Err(invalid(format!("{field}.watts"), "must be finite"))
            }
            _ => {}
        }
    }

    let available = crate::sim::available_channels(cfg);
    for ch in &cfg.outputs.channels {
        if !available.iter().any(|a| a == ch) {
            return Err(invalid("outputs.channels", format!("unknown channel `{ch}`")));
        }
    }
    Ok(())
}

fn control_field(section: &str, e: crate::control::ControlError) -> ScenarioError {
    match e {
        crate::control::ControlError::InvalidParameter { name, reason } => invalid(format!("{section}.{name}"), reason),
        other => invalid(section, other.to_string()),
    }
}

/// Plausibility checks that do not block a run.
pub fn validate_physics(cfg: &ScenarioConfig) -> Vec<Warning> {
    let mut out = Vec::new();
    let sys = &cfg.system;
    if let Some(x) = sys.frequency_rad_s {
        match sys.frequency_interpretation {
            Some(FrequencyUnit::Hz) => out.push(Warning {
                field: "system.frequency_rad_s".into(),
                message: format!("value {x} is given in rad/s but interpreted as {x} Hz ({:.2} rad/s)", TAU * x),
            }),
            _ if x < TAU * 40.0 => out.push(Warning {
                field: "system.frequency_rad_s".into(),
                message: format!("{x} rad/s ({:.2} Hz) is far below any power-system frequency", x / TAU),
            }),
            _ => {}
        }
    }
    if cfg.v_peak() > sys.dc_link_v * cfg.control.modulation_limit {
        out.push(Warning {
            field: "system.dc_link_v".into(),
            message: "bridge cannot synthesize the nominal peak voltage".into(),
        });
    }
    let f_lc = 1.0 / (TAU * (sys.filter_l_mh * 1e-3 * sys.filter_c_uf * 1e-6).sqrt());
    if cfg.dt_plant() > 1.0 / (20.0 * f_lc) {
        out.push(Warning {
            field: "run.dt_plant_us".into(),
            message: format!("fewer than 20 steps per LC resonance period ({f_lc:.0} Hz)"),
        });
    }
    out
}

pub fn mrdc_params(cfg: &ScenarioConfig) -> MrdcParams<f64> {
    let c = &cfg.control;
    MrdcParams {
        n_r: c.n_r,
        m_r: c.m_r,
        d_r: c.d_r,
        c_r: c.c_r,
        w_ref: c.w_ref_rad_s.unwrap_or_else(|| cfg.omega_nominal()),
        v_ref: c.v_ref_rms_v * std::f64::consts::SQRT_2,
        qs_sign: QsSign::from_i8(c.qs_sign).unwrap_or(QsSign::Positive),
        lpf_cutoff: TAU * c.ps_lpf_cutoff_hz,
        q_ref_cutoff: c.q_ref_cutoff_rad_s,
        undervoltage_fraction: c.undervoltage_fraction,
        power_consistent: c.power_consistent,
        forward_q_ref: c.forward_q_ref,
    }
}

pub fn pr_params(cfg: &ScenarioConfig) -> PrParams<f64> {
    PrParams {
        k_p: cfg.pr.k_p,
        omega_c: cfg.pr.omega_c_rad_s,
        resonant_terms: cfg.pr.resonant.iter().map(|r| ResonantTerm { harmonic: r.harmonic, k_r: r.k_r }).collect(),
        omega_0: cfg.omega_nominal(),
    }
}

pub fn pll_config(cfg: &ScenarioConfig) -> Result<PllConfig<f64>, crate::signals::SignalError> {
    let w = cfg.omega_nominal();
    let mut p = PllConfig::design(cfg.v_peak(), w, cfg.pll.zeta, TAU * cfg.pll.natural_frequency_hz)?;
    p.omega_min = cfg.pll.omega_min_pu * w;
    p.omega_max = cfg.pll.omega_max_pu * w;
    p.magnitude_cutoff = TAU * cfg.pll.magnitude_cutoff_hz;
    p.sogi_gain = cfg.pll.sogi_gain;
    Ok(p)
}

pub fn topology_params(cfg: &ScenarioConfig) -> TopologyParams<f64> {
    let v = cfg.system.phase_voltage_rms_v;
    TopologyParams {
        filter_l: cfg.system.filter_l_mh * 1e-3,
        filter_c: cfg.system.filter_c_uf * 1e-6,
        feeder_r: cfg.lines.feeder_r_ohm,
        feeder_l: cfg.lines.feeder_l_mh * 1e-3,
        tie_r: cfg.lines.tie_r_ohm,
        tie_l: cfg.lines.tie_l_mh * 1e-3,
        three_phase_load_r: 3.0 * v * v / cfg.loads.three_phase_total_w,
        single_phase_load_r: cfg.loads.single_phase_r_ohm,
        single_phase_load_l: cfg.loads.single_phase_l_mh.map(|l| l * 1e-3),
        include_single_phase: cfg.topology.include_single_phase,
        include_ess: cfg.topology.include_ess,
    }
}
