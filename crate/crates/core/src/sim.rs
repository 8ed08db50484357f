//! Closed-loop simulation of a scenario: plant, droop units, ESS and events.

use crate::control::{ControlError, DroopParams, MrdcMeasurements};
use crate::{DroopController, MrdcController, PrController};
use crate::metrics::{SimulationTrace, TraceMetadata};
use crate::plant::{
    default_topology, AveragedInverter, BranchId, InverterCommand, InverterMode, Network, NodeId, PlantError,
};
use crate::scenario::{self, EventAction, ScenarioConfig, ScenarioError};
use crate::signals::{fortescue, vuf, LpfState, SignalError, SlidingPhasor};
use std::f64::consts::TAU;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("building the network: {0}")]
    Build(PlantError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    /// The solution stopped being finite or a controller produced a non-finite command.
    #[error("numeric fault at t = {time:.6} s: {source}")]
    Numeric { time: f64, source: PlantError },
}

impl SimError {
    /// Process exit code: 3 for numeric faults, 2 for everything rejected up front.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Numeric { .. } => 3,
            _ => 2,
        }
    }
}

const PHASES: [&str; 3] = ["a", "b", "c"];

/// Every channel a run of `cfg` can record, in recording order.
pub fn available_channels(cfg: &ScenarioConfig) -> Vec<String> {
    let mut v = Vec::new();
    let per_phase = |v: &mut Vec<String>, prefix: &str| v.extend(PHASES.map(|p| format!("{prefix}_{p}")));
    per_phase(&mut v, "v_pcc");
    per_phase(&mut v, "v_t");
    per_phase(&mut v, "i_inv3");
    v.extend(["vuf_pcc", "omega_3ph", "p_3ph_meas", "q_3ph_meas"].map(String::from));
    let topo = &cfg.topology;
    if topo.include_single_phase || topo.include_ess {
        v.extend(["v_bus_b", "i_tie"].map(String::from));
    }
    if topo.include_single_phase {
        v.extend(["i_pv1", "i_load1", "omega_1ph", "p_1ph_meas", "q_1ph_meas", "p_load_meas"].map(String::from));
    }
    if topo.include_ess {
        v.extend(
            [
                "i_ess",
                "i_ref",
                "mrdc_enabled",
                "mrdc_p_s",
                "mrdc_q_s",
                "mrdc_p_ref",
                "mrdc_q_ref",
                "mrdc_q_vcc",
                "mrdc_id_ref",
                "mrdc_iq_ref",
                "mrdc_qs_clamped",
                "pll_omega",
                "pll_v_m",
                "ess_saturated",
            ]
            .map(String::from),
        );
        per_phase(&mut v, "pcc_mag");
    }
    v
}

struct DroopUnit {
    ctl: DroopController,
    legs: Vec<AveragedInverter<f64>>,
    terminals: Vec<NodeId>,
    emf: Vec<f64>,
}

impl DroopUnit {
    fn update(&mut self, net: &mut Network<f64>, dt: f64) -> Result<(), PlantError> {
        let v: Vec<f64> = self.terminals.iter().map(|n| net.voltage(*n)).collect();
        let i: Vec<f64> = self.legs.iter().map(|l| net.current(l.branch)).collect();
        self.ctl.step(&v, &i, dt, &mut self.emf);
        for (leg, e) in self.legs.iter_mut().zip(&self.emf) {
            leg.inject(net, InverterCommand::Modulation(e / leg.dc_link))?;
        }
        Ok(())
    }
}

struct Ess {
    mrdc: MrdcController,
    pr: PrController,
    bridge: AveragedInverter<f64>,
    bus: NodeId,
    i_ref: f64,
    qs_clamped: bool,
    saturated: bool,
    qs_clamped_steps: u64,
    undervoltage_steps: u64,
}

struct Sim {
    net: Network<f64>,
    three: DroopUnit,
    pv1: Option<DroopUnit>,
    ess: Option<Ess>,
    pcc: [NodeId; 3],
    bus: Option<NodeId>,
    tie: Option<BranchId>,
    load1: Option<(BranchId, Option<BranchId>)>,
    pcc_window: SlidingPhasor<f64>,
    pcc_mags: Option<[f64; 3]>,
    pcc_vuf: f64,
    p_load: LpfState<f64>,
    p_mppt: f64,
}

fn droop_unit(
    net: &Network<f64>,
    cfg: &ScenarioConfig,
    section: &scenario::DroopSection,
    sites: &[crate::plant::InverterSite],
) -> Result<DroopUnit, SimError> {
    let phases = sites.len();
    let params = DroopParams::from_ratings(
        cfg.omega_nominal(),
        cfg.v_peak(),
        section.rated_power_w,
        section.rated_reactive_per_phase_var,
        section.frequency_droop_pct / 100.0,
        section.voltage_droop_pct / 100.0,
    )?;
    let ctl = DroopController::new(params, phases, TAU * section.power_filter_hz)?;
    let legs = sites
        .iter()
        .map(|s| {
            AveragedInverter::new(net, &s.branch, InverterMode::Vcm, cfg.system.dc_link_v, cfg.control.modulation_limit)
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(SimError::Build)?;
    let terminals = sites.iter().map(|s| net.node(&s.terminal).expect("terminal exists")).collect();
    Ok(DroopUnit { ctl, legs, terminals, emf: vec![0.0; phases] })
}

impl Sim {
    fn new(cfg: &ScenarioConfig) -> Result<Self, SimError> {
        let topo = default_topology(&scenario::topology_params(cfg));
        let dt = cfg.dt_plant();
        let net = Network::build(&topo.description, dt).map_err(SimError::Build)?;
        let three = droop_unit(&net, cfg, &cfg.three_phase_pv, &topo.three_phase)?;
        let pv1 = match &topo.single_phase_pv {
            Some(site) => Some(droop_unit(&net, cfg, &cfg.single_phase_pv, std::slice::from_ref(site))?),
            None => None,
        };
        let ess = match &topo.ess {
            Some(site) => {
                let mrdc = MrdcController::new(scenario::mrdc_params(cfg), scenario::pll_config(cfg)?)?;
                let pr = PrController::new(scenario::pr_params(cfg), cfg.dt_control())?;
                let bridge = AveragedInverter::new(
                    &net,
                    &site.branch,
                    InverterMode::Ccm,
                    cfg.system.dc_link_v,
                    cfg.control.modulation_limit,
                )
                .map_err(SimError::Build)?;
                Some(Ess {
                    mrdc,
                    pr,
                    bridge,
                    bus: net.node(&site.terminal).expect("terminal exists"),
                    i_ref: 0.0,
                    qs_clamped: false,
                    saturated: false,
                    qs_clamped_steps: 0,
                    undervoltage_steps: 0,
                })
            }
            None => None,
        };
        let pcc = topo.pcc.clone().map(|n| net.node(&n).expect("pcc exists"));
        let bus = topo.load_bus.as_deref().and_then(|n| net.node(n));
        let tie = topo.tie_line.as_deref().and_then(|b| net.branch(b));
        let load1 = topo.single_phase_load.as_deref().and_then(|b| net.branch(b)).map(|r| {
            (r, topo.single_phase_load_inductor.as_deref().and_then(|b| net.branch(b)))
        });
        Ok(Self {
            pcc_window: SlidingPhasor::new(3, dt, cfg.omega_nominal()),
            net,
            three,
            pv1,
            ess,
            pcc,
            bus,
            tie,
            load1,
            pcc_mags: None,
            pcc_vuf: 0.0,
            p_load: LpfState::new(TAU * cfg.control.load_power_cutoff_hz, 0.0)?,
            p_mppt: cfg.control.p_mppt_w,
        })
    }

    fn load_current(&self) -> f64 {
        match self.load1 {
            Some((r, l)) => self.net.current(r) + l.map_or(0.0, |l| self.net.current(l)),
            None => 0.0,
        }
    }

    /// Returns whether the next network step must be damped.
    fn apply(&mut self, action: &EventAction) -> Result<bool, PlantError> {
        match action {
            EventAction::EnableMrdc | EventAction::DisableMrdc => {
                if let Some(ess) = &mut self.ess {
                    ess.mrdc.set_enabled(matches!(action, EventAction::EnableMrdc));
                }
                Ok(false)
            }
            EventAction::SetPMppt { watts } => {
                self.p_mppt = *watts;
                Ok(false)
            }
            EventAction::LoadStep { node, ohms } => {
                let branch = match node.as_str() {
                    "bus_b" => "load1_r".to_string(),
                    pcc => format!("load3_{}", pcc.trim_start_matches("pcc_")),
                };
                let id = self.net.branch(&branch).ok_or_else(|| PlantError::UnknownNode { branch: branch.clone(), node: node.clone() })?;
                self.net.set_resistance(id, *ohms)?;
                Ok(true)
            }
        }
    }

    /// Measurement blocks that run every plant step.
    fn measure(&mut self, dt: f64) {
        let v = self.pcc.map(|n| self.net.voltage(n));
        self.pcc_window.push(&v);
        if let Some(bus) = self.bus {
            let p = self.net.voltage(bus) * self.load_current();
            self.p_load.update(p, dt);
        }
    }

    fn control(&mut self, dt: f64) -> Result<(), PlantError> {
        let omega = self
            .ess
            .as_ref()
            .and_then(|e| e.mrdc.pll_sample())
            .map_or(self.three.ctl.omega(), |s| s.omega);
        if let Some(ph) = self.pcc_window.estimate(omega) {
            self.pcc_mags = Some([ph[0].magnitude, ph[1].magnitude, ph[2].magnitude]);
            self.pcc_vuf = vuf(&fortescue(ph[0], ph[1], ph[2])).unwrap_or(0.0);
        }

        self.three.update(&mut self.net, dt)?;
        if let Some(ess) = &mut self.ess {
            let v_s = self.net.voltage(ess.bus);
            let i_s = self.net.current(ess.bridge.branch);
            let out = ess.mrdc.step(
                &MrdcMeasurements {
                    v_s,
                    i_s,
                    pcc_magnitudes: self.pcc_mags,
                    p_mppt: self.p_mppt,
                    p_load: self.p_load.output,
                },
                dt,
            );
            ess.i_ref = out.i_ref;
            ess.qs_clamped = out.flags.qs_clamped;
            ess.qs_clamped_steps += out.flags.qs_clamped as u64;
            ess.undervoltage_steps += out.flags.undervoltage as u64;
            if let Some(pv1) = &mut self.pv1 {
                pv1.ctl.q_setpoint = out.forwarded_q_ref.unwrap_or(0.0);
            }
            // bus-voltage feed-forward plus PR correction of the bridge current
            let u = v_s + ess.pr.step(out.i_ref - i_s);
            let o = ess.bridge.inject(&mut self.net, InverterCommand::Modulation(u / ess.bridge.dc_link))?;
            ess.saturated = o.saturated;
        }
        if let Some(pv1) = &mut self.pv1 {
            pv1.update(&mut self.net, dt)?;
        }
        Ok(())
    }

    fn sample(&self, out: &mut Vec<f64>) {
        out.clear();
        let net = &self.net;
        out.extend(self.pcc.map(|n| net.voltage(n)));
        out.extend(self.three.terminals.iter().map(|n| net.voltage(*n)));
        out.extend(self.three.legs.iter().map(|l| net.current(l.branch)));
        let r3 = self.three.ctl.report();
        out.extend([self.pcc_vuf, r3.omega, r3.total_p, r3.total_q]);
        if let Some(bus) = self.bus {
            out.push(net.voltage(bus));
            out.push(self.tie.map_or(0.0, |t| net.current(t)));
        }
        if let Some(pv1) = &self.pv1 {
            let r = pv1.ctl.report();
            out.extend([net.current(pv1.legs[0].branch), self.load_current(), r.omega, r.total_p, r.total_q]);
            out.push(self.p_load.output);
        }
        if let Some(ess) = &self.ess {
            let s = ess.mrdc.state();
            let pll = ess.mrdc.pll_sample();
            out.extend([
                net.current(ess.bridge.branch),
                ess.i_ref,
                ess.mrdc.is_enabled() as u8 as f64,
                s.p_s_filtered,
                s.q_s,
                s.p_ref,
                s.q_ref,
                s.q_vcc,
                s.id_ref,
                s.iq_ref,
                ess.qs_clamped as u8 as f64,
                pll.map_or(0.0, |p| p.omega),
                pll.map_or(0.0, |p| p.magnitude),
                ess.saturated as u8 as f64,
            ]);
            out.extend(self.pcc_mags.unwrap_or([0.0; 3]));
        }
    }
}

/// Runs `cfg` to completion and returns the recorded trace.
///
/// Within each plant step the order is: due events, measurement blocks,
/// controllers (every control step), network solve. The first step and the
/// step after any load change use the damped integrator so that the
/// discontinuity does not ring.
pub fn run(cfg: &ScenarioConfig) -> Result<SimulationTrace, SimError> {
    scenario::validate(cfg)?;
    let mut sim = Sim::new(cfg)?;
    let names = available_channels(cfg);
    let selected: Vec<usize> = if cfg.outputs.channels.is_empty() {
        (0..names.len()).collect()
    } else {
        cfg.outputs.channels.iter().map(|c| names.iter().position(|n| n == c).expect("validated")).collect()
    };
    let mut trace = SimulationTrace::new(selected.iter().map(|&k| names[k].clone()));

    let dt = cfg.dt_plant();
    let dt_c = cfg.dt_control();
    let ratio = cfg.control_ratio().max(1) as u64;
    let trace_ratio = cfg.trace_ratio().max(1) as u64;
    let steps = cfg.total_steps();
    let events: Vec<(f64, EventAction)> = cfg
        .events
        .iter()
        .map(|e| (e.time_s, e.resolve().expect("validated")))
        .collect();
    let mut next_event = 0;
    let mut damp = true;
    let mut row = Vec::with_capacity(names.len());
    let mut picked = Vec::with_capacity(selected.len());
    let mut max_residual: f64 = 0.0;

    let mut record = |sim: &Sim, t: f64, trace: &mut SimulationTrace, row: &mut Vec<f64>| {
        sim.sample(row);
        debug_assert_eq!(row.len(), names.len());
        picked.clear();
        picked.extend(selected.iter().map(|&k| row[k]));
        trace.push_row(t, &picked);
    };
    record(&sim, 0.0, &mut trace, &mut row);

    for k in 0..steps {
        let t = k as f64 * dt;
        let fault = |source| SimError::Numeric { time: t, source };
        while next_event < events.len() && events[next_event].0 <= t + 0.5 * dt {
            damp |= sim.apply(&events[next_event].1).map_err(fault)?;
            next_event += 1;
        }
        sim.measure(dt);
        if k % ratio == 0 {
            sim.control(dt_c).map_err(fault)?;
        }
        if damp {
            sim.net.step_damped().map_err(fault)?;
            damp = false;
        } else {
            sim.net.step().map_err(fault)?;
        }
        let a = sim.net.last_audit();
        let scale = a.supplied.abs().max(a.dissipated);
        if scale > 0.0 {
            max_residual = max_residual.max(a.residual().abs() / scale);
        }
        if (k + 1) % trace_ratio == 0 {
            record(&sim, (k + 1) as f64 * dt, &mut trace, &mut row);
        }
    }

    let ess = sim.ess.as_ref();
    trace.metadata = TraceMetadata {
        scenario_name: cfg.name.clone(),
        scenario_hash: scenario::scenario_hash(cfg),
        version: env!("CARGO_PKG_VERSION").to_string(),
        max_energy_residual: max_residual,
        ess_saturated_steps: ess.map_or(0, |e| e.bridge.saturated_steps()),
        qs_clamped_steps: ess.map_or(0, |e| e.qs_clamped_steps),
        undervoltage_steps: ess.map_or(0, |e| e.undervoltage_steps),
    };
    Ok(trace)
}
