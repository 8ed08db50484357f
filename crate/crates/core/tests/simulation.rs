use std::f64::consts::{PI, TAU};

use mmg_core::control::{DroopParams, MrdcParams};
use mmg_core::metrics::{mean_pq, summarize, vuf_series, MetricsError};
use mmg_core::plant::{
    AveragedInverter, BranchKind, InverterCommand, InverterMode, Network, NetworkDescription, SeriesImpedance, GROUND,
};
use mmg_core::scenario::{self, parse_scenario, DEFAULT_TABLE1};
use mmg_core::sim::{self, SimError};
use mmg_core::DroopController;

const W: f64 = 2.0 * PI * 60.0;
const DT: f64 = 15e-6;

fn scenario_with(overrides: &[&str]) -> scenario::ScenarioConfig {
    let ov: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    parse_scenario(DEFAULT_TABLE1, &ov).unwrap()
}

/// Two single-phase droop units, rated 4:1, feeding one resistive load.
#[test]
fn droop_units_share_in_proportion_to_rating() {
    let vp = 120.0 * 2f64.sqrt();
    let mut d = NetworkDescription::new();
    d.node("t1").node("t2").node("bus");
    let bridge = BranchKind::VoltageSource { series: SeriesImpedance::Inductance(1.5e-3) };
    d.branch("inv1", bridge, "t1", GROUND)
        .branch("c1", BranchKind::Capacitor { farads: 100e-6 }, "t1", GROUND)
        .branch("line1", BranchKind::Resistor { ohms: 0.05 }, "t1", "bus")
        .branch("inv2", bridge, "t2", GROUND)
        .branch("c2", BranchKind::Capacitor { farads: 100e-6 }, "t2", GROUND)
        .branch("line2", BranchKind::Resistor { ohms: 0.05 }, "t2", "bus")
        .branch("load", BranchKind::Resistor { ohms: 6.0 }, "bus", GROUND);
    let mut net = Network::build(&d, DT).unwrap();

    let unit = |rated: f64| {
        let p = DroopParams::from_ratings(W, vp, rated, rated, 0.005, 0.02).unwrap();
        DroopController::new(p, 1, TAU * 5.0).unwrap()
    };
    let mut ctl = [unit(4000.0), unit(1000.0)];
    let mut legs = ["inv1", "inv2"].map(|b| AveragedInverter::new(&net, b, InverterMode::Vcm, 300.0, 1.0).unwrap());
    let terminals = ["t1", "t2"].map(|n| net.node(n).unwrap());

    let steps = (1.5 / DT) as usize;
    let mut record: Vec<[f64; 4]> = Vec::new();
    for k in 0..steps {
        for j in 0..2 {
            let (v, i) = (net.voltage(terminals[j]), net.current(legs[j].branch));
            let mut e = [0.0];
            ctl[j].step(&[v], &[i], DT, &mut e);
            legs[j].inject(&mut net, InverterCommand::Modulation(e[0] / 300.0)).unwrap();
        }
        if k == 0 { net.step_damped() } else { net.step() }.unwrap();
        if k as f64 * DT >= 1.0 {
            record.push([
                net.voltage(terminals[0]),
                net.current(legs[0].branch),
                net.voltage(terminals[1]),
                net.current(legs[1].branch),
            ]);
        }
    }
    let col = |c: usize| record.iter().map(|r| r[c]).collect::<Vec<_>>();
    let omega = ctl[0].omega();
    assert!((omega - ctl[1].omega()).abs() < 0.1, "units must agree on frequency");
    let p1 = mmg_core::metrics::pq_measure(&col(0), &col(1), DT, omega).unwrap();
    let p2 = mmg_core::metrics::pq_measure(&col(2), &col(3), DT, omega).unwrap();
    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    let ratio = mean(&p1.p) / mean(&p2.p);
    assert!((ratio - 4.0).abs() <= 0.02 * 4.0, "ratio {ratio}");
}

#[test]
fn balanced_system_has_negligible_unbalance() {
    let cfg = scenario_with(&[
        "topology.include_single_phase=false",
        "topology.include_ess=false",
        "run.duration_s=0.6",
        "events.0.time_s=0.3",
    ]);
    let trace = sim::run(&cfg).unwrap();
    let w = trace.channel("omega_3ph").unwrap();
    let omega = w[w.len() / 2..].iter().sum::<f64>() / (w.len() - w.len() / 2) as f64;
    let s = vuf_series(&trace, ["v_pcc_a", "v_pcc_b", "v_pcc_c"], omega).unwrap();
    let tail = &s.vuf[s.vuf.len() / 2..];
    assert!(tail.iter().all(|v| *v < 0.05), "{tail:?}");
    let live = trace.channel("vuf_pcc").unwrap();
    assert!(live[live.len() / 2..].iter().all(|v| *v < 0.05));
}

#[test]
fn removing_the_ess_leaves_the_unbalance_in_place() {
    let cfg = scenario_with(&["topology.include_ess=false"]);
    let trace = sim::run(&cfg).unwrap();
    assert!(trace.channel("i_ess").is_none());
    let s = summarize(&trace, &cfg).unwrap();
    assert!(s.vuf_pre > 2.0);
    assert!((s.vuf_post - s.vuf_pre).abs() < 0.05 * s.vuf_pre);
    assert!(s.q_ess.is_none());
}

#[test]
fn compensation_opposes_the_load_bus_demand_and_slews() {
    let cfg = scenario::default_scenario();
    let trace = sim::run(&cfg).unwrap();
    let t_on = cfg.enable_time().unwrap();
    let (_, q_pre) = mean_pq(&trace, "v_bus_b", "i_tie", 1.0, W, t_on - 0.3, t_on).unwrap();
    let q_pre = q_pre.iter().sum::<f64>() / q_pre.len() as f64;
    assert!(q_pre > 0.0, "load bus draws vars before compensation ({q_pre})");

    let q_ref = trace.channel("mrdc_q_ref").unwrap();
    let iq = trace.channel("mrdc_iq_ref").unwrap();
    let on = trace.time.iter().position(|t| *t > t_on).unwrap();
    let settled = q_ref[q_ref.len() - 1];
    assert!(settled * q_pre < 0.0, "q_ref {settled} must oppose {q_pre}");
    assert!(q_ref[..on].iter().all(|q| *q == 0.0));

    // first-order filtered: no jump at enable, bounded slope afterwards
    let iq_settled = iq[iq.len() - 1].abs();
    assert!(q_ref[on].abs() < 0.02 * settled.abs());
    for w in iq[on - 1..].windows(2) {
        assert!((w[1] - w[0]).abs() < 0.02 * iq_settled, "iq jumps by {}", w[1] - w[0]);
    }
}

#[test]
fn load_step_event_changes_the_load() {
    let text = format!(
        "{DEFAULT_TABLE1}\n[[events]]\ntime_s = 0.5\naction = \"load_step\"\nnode = \"pcc_b\"\nohms = 7.2\n"
    )
    .replace("time_s = 1.0\naction = \"enable_mrdc\"", "time_s = 0.2\naction = \"enable_mrdc\"")
    .replace("duration_s = 2.0", "duration_s = 0.8");
    let cfg = parse_scenario(&text, &[]).unwrap();
    let trace = sim::run(&cfg).unwrap();
    let p = trace.channel("p_3ph_meas").unwrap();
    let at = |t: f64| p[trace.time.iter().position(|x| *x >= t).unwrap()];
    // phase b load doubles: roughly half of the PCC load again
    assert!(at(0.79) > at(0.49) + 400.0, "{} -> {}", at(0.49), at(0.79));
}

#[test]
fn summary_needs_an_enable_event_and_a_settled_window() {
    let cfg = scenario_with(&["run.duration_s=0.5", "events.0.time_s=0.4"]);
    let mut no_event = cfg.clone();
    no_event.events.clear();
    let trace = sim::run(&no_event).unwrap();
    assert!(matches!(summarize(&trace, &no_event), Err(MetricsError::MissingEvent)));

    let early = scenario_with(&["run.duration_s=1.15"]);
    let trace = sim::run(&early).unwrap();
    assert!(matches!(summarize(&trace, &early), Err(MetricsError::NotSettled { .. })));
}

#[test]
fn selected_channels_only() {
    let cfg =
        scenario_with(&["run.duration_s=0.05", "events.0.time_s=0", "outputs.channels=[\"vuf_pcc\", \"i_ess\"]"]);
    let trace = sim::run(&cfg).unwrap();
    assert_eq!(trace.names().collect::<Vec<_>>(), ["vuf_pcc", "i_ess"]);
    assert_eq!(trace.len(), 1 + (0.05 / 150e-6f64).round() as usize);
}

#[test]
fn unstable_current_loop_is_a_numeric_fault() {
    let cfg =
        scenario_with(&["pr.k_p=1e5", "system.dc_link_v=1e300", "events.0.time_s=0.0", "run.duration_s=0.5"]);
    match sim::run(&cfg) {
        Err(e @ SimError::Numeric { .. }) => assert_eq!(e.exit_code(), 3),
        other => panic!("expected a numeric fault, got {:?}", other.map(|t| t.len())),
    }
}

#[test]
fn sign_choice_only_moves_the_headroom_term() {
    let p: MrdcParams<f64> = scenario::mrdc_params(&scenario_with(&["control.qs_sign=-1"]));
    assert_eq!(p.qs_sign.value::<f64>(), -1.0);
}
