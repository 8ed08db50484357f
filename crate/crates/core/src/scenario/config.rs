use serde::{Deserialize, Serialize};

/// Complete, declarative description of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub schema_version: u32,
    pub run: RunSection,
    pub system: SystemSection,
    pub control: ControlSection,
    pub pr: PrSection,
    pub pll: PllSection,
    pub three_phase_pv: DroopSection,
    pub single_phase_pv: DroopSection,
    pub loads: LoadSection,
    pub lines: LineSection,
    #[serde(default)]
    pub topology: TopologySection,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<Event>,
    #[serde(default)]
    pub outputs: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub duration_s: f64,
    pub dt_plant_us: f64,
    pub dt_control_us: f64,
    pub trace_interval_us: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyUnit {
    RadS,
    Hz,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    /// Value as written in the source parameter table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency_rad_s: Option<f64>,
    /// How `frequency_rad_s` is to be read; `hz` treats the number as hertz.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency_interpretation: Option<FrequencyUnit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency_hz: Option<f64>,
    pub phase_voltage_rms_v: f64,
    pub dc_link_v: f64,
    pub filter_l_mh: f64,
    pub filter_c_uf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSection {
    pub n_r: f64,
    pub m_r: f64,
    pub d_r: f64,
    pub c_r: f64,
    /// +1 or −1.
    pub qs_sign: i8,
    /// Defaults to the system frequency.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_ref_rad_s: Option<f64>,
    pub v_ref_rms_v: f64,
    pub ps_lpf_cutoff_hz: f64,
    pub q_ref_cutoff_rad_s: f64,
    pub undervoltage_fraction: f64,
    #[serde(default)]
    pub power_consistent: bool,
    #[serde(default)]
    pub forward_q_ref: bool,
    pub p_mppt_w: f64,
    pub modulation_limit: f64,
    /// Averaging cutoff of the measured single-phase load power.
    pub load_power_cutoff_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonantSection {
    pub harmonic: u32,
    pub k_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrSection {
    pub k_p: f64,
    pub omega_c_rad_s: f64,
    pub resonant: Vec<ResonantSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PllSection {
    pub zeta: f64,
    pub natural_frequency_hz: f64,
    pub omega_min_pu: f64,
    pub omega_max_pu: f64,
    pub magnitude_cutoff_hz: f64,
    pub sogi_gain: f64,
}

/// Droop settings of a voltage-controlled PV inverter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DroopSection {
    pub rated_power_w: f64,
    /// Reactive rating of each leg.
    pub rated_reactive_per_phase_var: f64,
    pub frequency_droop_pct: f64,
    pub voltage_droop_pct: f64,
    pub power_filter_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadSection {
    pub single_phase_r_ohm: f64,
    /// Inductive branch in parallel with the single-phase resistor; absent means purely resistive.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub single_phase_l_mh: Option<f64>,
    pub three_phase_total_w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineSection {
    pub feeder_r_ohm: f64,
    pub feeder_l_mh: f64,
    pub tie_r_ohm: f64,
    pub tie_l_mh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySection {
    /// Single-phase PV inverter and single-phase load.
    pub include_single_phase: bool,
    pub include_ess: bool,
}

impl Default for TopologySection {
    fn default() -> Self {
        Self { include_single_phase: true, include_ess: true }
    }
}

/// One timed action, as written in the file.
///
/// Parameters sit next to `action`; [`Event::resolve`] checks that exactly the
/// parameters of that action are present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Event {
    pub time_s: f64,
    pub action: ActionKind,
    /// `bus_b`, `pcc_a`, `pcc_b` or `pcc_c` for `load_step`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ohms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub watts: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    EnableMrdc,
    DisableMrdc,
    LoadStep,
    SetPMppt,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventAction {
    EnableMrdc,
    DisableMrdc,
    /// New resistance of the load attached to `node`.
    LoadStep { node: String, ohms: f64 },
    SetPMppt { watts: f64 },
}

impl Event {
    pub fn resolve(&self) -> Result<EventAction, String> {
        let extra = |allowed: &[&str]| {
            let present = [("node", self.node.is_some()), ("ohms", self.ohms.is_some()), ("watts", self.watts.is_some())];
            match present.iter().find(|(k, p)| *p && !allowed.contains(k)) {
                Some((k, _)) => Err(format!("`{k}` is not a parameter of this action")),
                None => Ok(()),
            }
        };
        match self.action {
            ActionKind::EnableMrdc => extra(&[]).map(|_| EventAction::EnableMrdc),
            ActionKind::DisableMrdc => extra(&[]).map(|_| EventAction::DisableMrdc),
            ActionKind::LoadStep => {
                extra(&["node", "ohms"])?;
                match (&self.node, self.ohms) {
                    (Some(node), Some(ohms)) => Ok(EventAction::LoadStep { node: node.clone(), ohms }),
                    _ => Err("load_step needs `node` and `ohms`".into()),
                }
            }
            ActionKind::SetPMppt => {
                extra(&["watts"])?;
                self.watts.map(|watts| EventAction::SetPMppt { watts }).ok_or_else(|| "set_p_mppt needs `watts`".into())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Channels to record; empty records every channel.
    #[serde(default)]
    pub channels: Vec<String>,
}

impl ScenarioConfig {
    pub fn omega_nominal(&self) -> f64 {
        let tau = std::f64::consts::TAU;
        match (self.system.frequency_hz, self.system.frequency_rad_s, self.system.frequency_interpretation) {
            (Some(f), _, _) => tau * f,
            (None, Some(x), Some(FrequencyUnit::Hz)) => tau * x,
            (None, Some(x), _) => x,
            (None, None, _) => f64::NAN,
        }
    }

    pub fn v_peak(&self) -> f64 {
        self.system.phase_voltage_rms_v * std::f64::consts::SQRT_2
    }

    pub fn dt_plant(&self) -> f64 {
        self.run.dt_plant_us * 1e-6
    }

    pub fn dt_control(&self) -> f64 {
        self.run.dt_control_us * 1e-6
    }

    /// Plant steps per controller update.
    pub fn control_ratio(&self) -> usize {
        (self.run.dt_control_us / self.run.dt_plant_us).round() as usize
    }

    /// Plant steps per recorded trace sample.
    pub fn trace_ratio(&self) -> usize {
        (self.run.trace_interval_us / self.run.dt_plant_us).round() as usize
    }

    pub fn total_steps(&self) -> u64 {
        (self.run.duration_s / self.dt_plant()).round() as u64
    }

    /// Time of the first `enable_mrdc` event.
    pub fn enable_time(&self) -> Option<f64> {
        self.events.iter().find(|e| e.action == ActionKind::EnableMrdc).map(|e| e.time_s)
    }
}
