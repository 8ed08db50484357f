use super::{BranchKind, NetworkDescription, PlantScalar, SeriesImpedance, GROUND};

/// Electrical parameters of the two-microgrid test system. SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopologyParams<T> {
    pub filter_l: T,
    pub filter_c: T,
    pub feeder_r: T,
    pub feeder_l: T,
    pub tie_r: T,
    pub tie_l: T,
    /// Per-phase resistance of the balanced load at the PCC.
    pub three_phase_load_r: T,
    pub single_phase_load_r: T,
    /// Optional inductive branch in parallel with the single-phase load.
    pub single_phase_load_l: Option<T>,
    /// Single-phase PV inverter and single-phase load.
    pub include_single_phase: bool,
    pub include_ess: bool,
}

/// Where an inverter leg sits: its source branch and the node it regulates or measures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InverterSite {
    pub branch: String,
    pub terminal: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DefaultTopology<T> {
    pub description: NetworkDescription<T>,
    pub three_phase: [InverterSite; 3],
    pub single_phase_pv: Option<InverterSite>,
    pub ess: Option<InverterSite>,
    pub pcc: [String; 3],
    /// Bus of the single-phase microgrid, absent when nothing is attached to it.
    pub load_bus: Option<String>,
    /// Line from PCC phase a to the load bus.
    pub tie_line: Option<String>,
    pub single_phase_load: Option<String>,
    pub single_phase_load_inductor: Option<String>,
}

impl<T> DefaultTopology<T> {
    /// Number of inverter units (a three-phase unit counts once).
    pub fn inverter_units(&self) -> usize {
        1 + self.single_phase_pv.is_some() as usize + self.ess.is_some() as usize
    }

    /// Number of single-phase bridge legs.
    pub fn inverter_legs(&self) -> usize {
        3 + self.single_phase_pv.is_some() as usize + self.ess.is_some() as usize
    }
}

const PHASES: [&str; 3] = ["a", "b", "c"];

/// Three-phase PV microgrid feeding a PCC with a balanced load, plus a single-phase
/// microgrid (PV, load and ESS on one bus) tied to PCC phase a. Neutral is ground.
pub fn default_topology<T: PlantScalar>(p: &TopologyParams<T>) -> DefaultTopology<T> {
    let mut d = NetworkDescription::new();
    let bridge = BranchKind::VoltageSource { series: SeriesImpedance::Inductance(p.filter_l) };
    for ph in PHASES {
        let (t, f, pcc) = (format!("t_{ph}"), format!("f_{ph}"), format!("pcc_{ph}"));
        d.node(t.clone()).node(f.clone()).node(pcc.clone());
        d.branch(format!("inv3_{ph}"), bridge, &t, GROUND)
            .branch(format!("c3_{ph}"), BranchKind::Capacitor { farads: p.filter_c }, &t, GROUND)
            .branch(format!("feeder_r_{ph}"), BranchKind::Resistor { ohms: p.feeder_r }, &t, &f)
            .branch(format!("feeder_l_{ph}"), BranchKind::Inductor { henries: p.feeder_l }, &f, &pcc)
            .branch(format!("load3_{ph}"), BranchKind::Resistor { ohms: p.three_phase_load_r }, &pcc, GROUND);
    }
    let site = |b: &str, t: &str| InverterSite { branch: b.into(), terminal: t.into() };
    let three_phase = PHASES.map(|ph| site(&format!("inv3_{ph}"), &format!("t_{ph}")));

    let mut topo = DefaultTopology {
        description: NetworkDescription::new(),
        three_phase,
        single_phase_pv: None,
        ess: None,
        pcc: PHASES.map(|ph| format!("pcc_{ph}")),
        load_bus: None,
        tie_line: None,
        single_phase_load: None,
        single_phase_load_inductor: None,
    };

    if p.include_single_phase || p.include_ess {
        d.node("tie_m").node("bus_b");
        d.branch("tie_r", BranchKind::Resistor { ohms: p.tie_r }, "pcc_a", "tie_m")
            .branch("tie_l", BranchKind::Inductor { henries: p.tie_l }, "tie_m", "bus_b");
        topo.load_bus = Some("bus_b".into());
        topo.tie_line = Some("tie_l".into());
    }
    if p.include_single_phase {
        d.branch("pv1", bridge, "bus_b", GROUND)
            .branch("c_pv1", BranchKind::Capacitor { farads: p.filter_c }, "bus_b", GROUND)
            .branch("load1_r", BranchKind::Resistor { ohms: p.single_phase_load_r }, "bus_b", GROUND);
        topo.single_phase_pv = Some(site("pv1", "bus_b"));
        topo.single_phase_load = Some("load1_r".into());
        if let Some(l) = p.single_phase_load_l {
            d.branch("load1_l", BranchKind::Inductor { henries: l }, "bus_b", GROUND);
            topo.single_phase_load_inductor = Some("load1_l".into());
        }
    }
    if p.include_ess {
        d.branch("ess", bridge, "bus_b", GROUND)
            .branch("c_ess", BranchKind::Capacitor { farads: p.filter_c }, "bus_b", GROUND);
        topo.ess = Some(site("ess", "bus_b"));
    }
    topo.description = d;
    topo
}
