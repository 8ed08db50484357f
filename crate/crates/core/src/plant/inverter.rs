use super::{BranchId, BranchKind, Network, PlantError, PlantScalar};
use num_traits::Float;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InverterMode {
    /// Imposes its output voltage.
    Vcm,
    /// Imposes its output current.
    Ccm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InverterCommand<T> {
    /// Duty-cycle average in per unit of the DC link; drives a bridge EMF.
    Modulation(T),
    /// Ideal current injection into the filter node (amperes).
    Current(T),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InjectionOutcome<T> {
    /// Value applied to the source branch.
    pub value: T,
    pub saturated: bool,
}

/// Switching-averaged inverter leg bound to one source branch of a [`Network`].
///
/// A modulation command becomes `m·V_dc` on a voltage-source branch (the
/// bridge behind its filter inductor); a current command drives a
/// current-source branch directly. Voltage-controlled legs only accept
/// modulation commands.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedInverter<T> {
    pub mode: InverterMode,
    pub dc_link: T,
    pub modulation_limit: T,
    pub branch: BranchId,
    name: String,
    saturated: bool,
    saturated_steps: u64,
}

impl<T: PlantScalar> AveragedInverter<T> {
    pub fn new(
        net: &Network<T>,
        branch: &str,
        mode: InverterMode,
        dc_link: T,
        modulation_limit: T,
    ) -> Result<Self, PlantError> {
        let invalid = |reason: &str| PlantError::InvalidCommand { branch: branch.into(), reason: reason.into() };
        let id = net.branch(branch).ok_or_else(|| invalid("no such branch"))?;
        if !(dc_link > T::zero() && modulation_limit > T::zero()) {
            return Err(invalid("dc link and modulation limit must be positive"));
        }
        match (mode, net.branch_kind(id)) {
            (_, BranchKind::VoltageSource { .. }) => {}
            (InverterMode::Ccm, BranchKind::CurrentSource) => {}
            _ => return Err(invalid("branch kind does not match the inverter mode")),
        }
        Ok(Self { mode, dc_link, modulation_limit, branch: id, name: branch.into(), saturated: false, saturated_steps: 0 })
    }

    pub fn saturated(&self) -> bool {
        self.saturated
    }

    /// Number of injections that hit the modulation limit.
    pub fn saturated_steps(&self) -> u64 {
        self.saturated_steps
    }

    /// Converts a command to a source value, saturating at the modulation limit.
    pub fn inject(&mut self, net: &mut Network<T>, command: InverterCommand<T>) -> Result<InjectionOutcome<T>, PlantError> {
        let invalid = |reason: &str| PlantError::InvalidCommand { branch: self.name.clone(), reason: reason.into() };
        let kind = net.branch_kind(self.branch);
        let outcome = match command {
            InverterCommand::Modulation(m) => {
                if !Float::is_finite(m) {
                    return Err(invalid("non-finite modulation"));
                }
                if !matches!(kind, BranchKind::VoltageSource { .. }) {
                    return Err(invalid("modulation command needs a bridge voltage source"));
                }
                let lim = self.modulation_limit;
                let clamped = Float::min(Float::max(m, -lim), lim);
                InjectionOutcome { value: clamped * self.dc_link, saturated: clamped != m }
            }
            InverterCommand::Current(i) => {
                if self.mode == InverterMode::Vcm {
                    return Err(invalid("voltage-controlled inverter cannot take a current command"));
                }
                if !Float::is_finite(i) {
                    return Err(invalid("non-finite current"));
                }
                if !matches!(kind, BranchKind::CurrentSource) {
                    return Err(invalid("current command needs a current-source branch"));
                }
                InjectionOutcome { value: i, saturated: false }
            }
        };
        debug_assert!(
            !matches!(command, InverterCommand::Modulation(_))
                || Float::abs(outcome.value) <= self.dc_link * self.modulation_limit
        );
        self.saturated = outcome.saturated;
        if outcome.saturated {
            self.saturated_steps += 1;
        }
        net.set_source(self.branch, outcome.value);
        Ok(outcome)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::{NetworkDescription, SeriesImpedance, GROUND};

    fn net() -> Network<f64> {
        let mut d = NetworkDescription::new();
        d.node("t").node("f");
        d.branch("bridge", BranchKind::VoltageSource { series: SeriesImpedance::Inductance(1.5e-3) }, "t", GROUND)
            .branch("c", BranchKind::Capacitor { farads: 100e-6 }, "t", GROUND)
            .branch("r", BranchKind::Resistor { ohms: 20.0 }, "t", GROUND)
            .branch("inj", BranchKind::CurrentSource, GROUND, "f")
            .branch("rf", BranchKind::Resistor { ohms: 2.0 }, "f", GROUND);
        Network::build(&d, 15e-6).unwrap()
    }

    #[test]
    fn modulation_scales_dc_link() {
        let mut n = net();
        let mut inv = AveragedInverter::new(&n, "bridge", InverterMode::Vcm, 300.0, 1.0).unwrap();
        let o = inv.inject(&mut n, InverterCommand::Modulation(0.5)).unwrap();
        assert_eq!(o, InjectionOutcome { value: 150.0, saturated: false });
        assert_eq!(n.source_value(inv.branch), 150.0);
    }

    #[test]
    fn modulation_saturates_and_flags() {
        let mut n = net();
        let mut inv = AveragedInverter::new(&n, "bridge", InverterMode::Vcm, 300.0, 1.0).unwrap();
        let o = inv.inject(&mut n, InverterCommand::Modulation(1.2)).unwrap();
        assert_eq!(o, InjectionOutcome { value: 300.0, saturated: true });
        assert!(inv.saturated());
        let o = inv.inject(&mut n, InverterCommand::Modulation(-7.0)).unwrap();
        assert_eq!(o.value, -300.0);
        assert_eq!(inv.saturated_steps(), 2);
        inv.inject(&mut n, InverterCommand::Modulation(0.1)).unwrap();
        assert!(!inv.saturated());
    }

    #[test]
    fn current_command_injects_at_filter_node() {
        let mut n = net();
        let mut inv = AveragedInverter::new(&n, "inj", InverterMode::Ccm, 300.0, 1.0).unwrap();
        let o = inv.inject(&mut n, InverterCommand::Current(10.0)).unwrap();
        assert_eq!(o.value, 10.0);
        n.step().unwrap();
        assert!((n.voltage(n.node("f").unwrap()) - 20.0).abs() < 1e-9);
    }

    #[test]
    fn mismatched_commands_are_rejected() {
        let mut n = net();
        let mut vcm = AveragedInverter::new(&n, "bridge", InverterMode::Vcm, 300.0, 1.0).unwrap();
        assert!(vcm.inject(&mut n, InverterCommand::Current(1.0)).is_err());
        assert!(vcm.inject(&mut n, InverterCommand::Modulation(f64::NAN)).is_err());
        assert!(AveragedInverter::new(&n, "inj", InverterMode::Vcm, 300.0, 1.0).is_err());
        assert!(AveragedInverter::new(&n, "r", InverterMode::Ccm, 300.0, 1.0).is_err());
        let mut ccm = AveragedInverter::new(&n, "inj", InverterMode::Ccm, 300.0, 1.0).unwrap();
        assert!(ccm.inject(&mut n, InverterCommand::Modulation(0.2)).is_err());
    }
}
