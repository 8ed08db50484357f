use super::{PlantError, PlantScalar};
use indexmap::IndexMap;
use nalgebra::{DMatrix, DVector, Dyn, LU};
use num_traits::Float;
use petgraph::unionfind::UnionFind;

/// Name reserved for the reference node.
pub const GROUND: &str = "gnd";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BranchId(pub usize);

/// Internal impedance of a controlled voltage source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SeriesImpedance<T> {
    Resistance(T),
    Inductance(T),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BranchKind<T> {
    Resistor { ohms: T },
    Inductor { henries: T },
    Capacitor { farads: T },
    /// EMF raising `from` above `to`, in series with `series`.
    VoltageSource { series: SeriesImpedance<T> },
    /// Drives its value from `from` to `to` through the branch, i.e. injects into `to`.
    CurrentSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchSpec<T> {
    pub name: String,
    pub kind: BranchKind<T>,
    pub from: String,
    pub to: String,
}

/// Declarative network: named nodes (ground is implicit) and branches.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NetworkDescription<T> {
    pub nodes: Vec<String>,
    pub branches: Vec<BranchSpec<T>>,
}

impl<T> NetworkDescription<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new(), branches: Vec::new() }
    }

    pub fn node(&mut self, name: impl Into<String>) -> &mut Self {
        self.nodes.push(name.into());
        self
    }

    pub fn branch(&mut self, name: impl Into<String>, kind: BranchKind<T>, from: &str, to: &str) -> &mut Self {
        self.branches.push(BranchSpec { name: name.into(), kind, from: from.into(), to: to.into() });
        self
    }

    pub fn remove_branch(&mut self, name: &str) -> Option<BranchSpec<T>> {
        let idx = self.branches.iter().position(|b| b.name == name)?;
        Some(self.branches.remove(idx))
    }
}

/// Energy bookkeeping of the last step (joules).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyAudit<T> {
    /// Delivered by sources.
    pub supplied: T,
    pub dissipated: T,
    /// Change of energy stored in inductors and capacitors.
    pub stored: T,
}

impl<T: PlantScalar> EnergyAudit<T> {
    pub fn residual(&self) -> T {
        self.supplied - self.dissipated - self.stored
    }
}

#[derive(Debug, Clone)]
struct Branch<T> {
    kind: BranchKind<T>,
    a: usize,
    b: usize,
    g: T,
    /// Source value for the coming step.
    value: T,
    value_prev: T,
    /// `v_a − v_b`.
    v: T,
    /// Current from `a` to `b` through the branch; the output current for voltage sources.
    i: T,
}

/// Assembled, factorized network advanced in fixed steps.
#[derive(Debug, Clone)]
pub struct Network<T: PlantScalar> {
    dt: T,
    nodes: IndexMap<String, NodeId>,
    branch_names: IndexMap<String, BranchId>,
    branches: Vec<Branch<T>>,
    matrix: DMatrix<T>,
    lu: LU<T, Dyn, Dyn>,
    rhs: DVector<T>,
    v: Vec<T>,
    steps: u64,
    audit: EnergyAudit<T>,
}

fn positive<T: PlantScalar>(name: &str, what: &str, x: T) -> Result<T, PlantError> {
    if x > T::zero() && Float::is_finite(x) {
        Ok(x)
    } else {
        Err(PlantError::InvalidValue { branch: name.into(), reason: format!("{what} must be positive and finite") })
    }
}

impl<T: PlantScalar> Network<T> {
    pub fn build(desc: &NetworkDescription<T>, dt: T) -> Result<Self, PlantError> {
        if !(dt > T::zero() && Float::is_finite(dt)) {
            return Err(PlantError::InvalidTimestep);
        }
        let mut nodes = IndexMap::new();
        nodes.insert(GROUND.to_string(), NodeId(0));
        for n in &desc.nodes {
            let id = NodeId(nodes.len());
            if nodes.insert(n.clone(), id).is_some() {
                return Err(PlantError::Duplicate { what: "node", name: n.clone() });
            }
        }
        let mut branch_names = IndexMap::new();
        let mut branches = Vec::with_capacity(desc.branches.len());
        for spec in &desc.branches {
            let lookup = |node: &str| {
                nodes
                    .get(node)
                    .map(|id| id.0)
                    .ok_or_else(|| PlantError::UnknownNode { branch: spec.name.clone(), node: node.into() })
            };
            let (a, b) = (lookup(&spec.from)?, lookup(&spec.to)?);
            if a == b {
                return Err(PlantError::InvalidValue { branch: spec.name.clone(), reason: "both ends on one node".into() });
            }
            let g = companion_conductance(&spec.name, &spec.kind, dt)?;
            if branch_names.insert(spec.name.clone(), BranchId(branches.len())).is_some() {
                return Err(PlantError::Duplicate { what: "branch", name: spec.name.clone() });
            }
            branches.push(Branch {
                kind: spec.kind,
                a,
                b,
                g,
                value: T::zero(),
                value_prev: T::zero(),
                v: T::zero(),
                i: T::zero(),
            });
        }
        check_grounded(&nodes, &branches)?;
        let n = nodes.len() - 1;
        let matrix = assemble(n, &branches);
        let lu = factorize(&matrix)?;
        Ok(Self {
            dt,
            nodes,
            branch_names,
            branches,
            matrix,
            lu,
            rhs: DVector::zeros(n),
            v: vec![T::zero(); n + 1],
            steps: 0,
            audit: EnergyAudit::default(),
        })
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn node(&self, name: &str) -> Option<NodeId> {
        self.nodes.get(name).copied()
    }

    pub fn branch(&self, name: &str) -> Option<BranchId> {
        self.branch_names.get(name).copied()
    }

    pub fn branch_kind(&self, id: BranchId) -> BranchKind<T> {
        self.branches[id.0].kind
    }

    pub fn node_names(&self) -> impl Iterator<Item = &str> {
        self.nodes.keys().map(String::as_str)
    }

    /// Reduced nodal matrix (ground row and column removed).
    pub fn conductance_matrix(&self) -> &DMatrix<T> {
        &self.matrix
    }

    pub fn voltage(&self, node: NodeId) -> T {
        self.v[node.0]
    }

    pub fn node_voltages(&self) -> &[T] {
        &self.v
    }

    /// Branch current; for voltage sources the current leaving the `from` terminal.
    pub fn current(&self, id: BranchId) -> T {
        self.branches[id.0].i
    }

    pub fn branch_voltage(&self, id: BranchId) -> T {
        self.branches[id.0].v
    }

    pub fn source_value(&self, id: BranchId) -> T {
        self.branches[id.0].value
    }

    pub fn last_audit(&self) -> EnergyAudit<T> {
        self.audit
    }

    /// Sets the EMF (volts) or injected current (amperes) applied during the next step.
    pub fn set_source(&mut self, id: BranchId, value: T) {
        self.branches[id.0].value = value;
    }

    /// Replaces a resistor value and refactorizes.
    pub fn set_resistance(&mut self, id: BranchId, ohms: T) -> Result<(), PlantError> {
        let name = self.branch_names.get_index(id.0).map(|(n, _)| n.clone()).unwrap_or_default();
        let br = &mut self.branches[id.0];
        match br.kind {
            BranchKind::Resistor { .. } => {
                let ohms = positive(&name, "resistance", ohms)?;
                br.kind = BranchKind::Resistor { ohms };
                br.g = T::one() / ohms;
            }
            _ => return Err(PlantError::InvalidValue { branch: name, reason: "not a resistor".into() }),
        }
        self.matrix = assemble(self.nodes.len() - 1, &self.branches);
        self.lu = factorize(&self.matrix)?;
        Ok(())
    }

    /// Advances one timestep with the source values currently set.
    pub fn step(&mut self) -> Result<(), PlantError> {
        self.advance(Rule::Trapezoidal)
    }

    /// Advances one timestep as two backward-Euler half steps.
    ///
    /// Backward Euler at `dt/2` has the same companion conductances as the
    /// trapezoidal rule at `dt`, so the factorization is reused. Use it for the
    /// step that follows a discontinuity (source switched on, load change),
    /// where the trapezoidal rule would ring or smear the edge. Source values
    /// are held at the newly set value over both halves.
    pub fn step_damped(&mut self) -> Result<(), PlantError> {
        self.advance(Rule::BackwardEulerHalf)?;
        let first = self.audit;
        self.advance(Rule::BackwardEulerHalf)?;
        self.steps -= 1;
        self.audit = EnergyAudit {
            supplied: first.supplied + self.audit.supplied,
            dissipated: first.dissipated + self.audit.dissipated,
            stored: first.stored + self.audit.stored,
        };
        Ok(())
    }

    fn advance(&mut self, rule: Rule) -> Result<(), PlantError> {
        self.rhs.fill(T::zero());
        let mut history = Vec::with_capacity(self.branches.len());
        for br in &self.branches {
            let h = history_current(br, rule);
            stamp(&mut self.rhs, br.a, -h);
            stamp(&mut self.rhs, br.b, h);
            history.push(h);
        }
        if !self.lu.solve_mut(&mut self.rhs) {
            return Err(PlantError::Singular);
        }
        if self.rhs.iter().any(|x| !Float::is_finite(*x)) {
            return Err(PlantError::NumericFault { step: self.steps });
        }
        self.v[0] = T::zero();
        for (k, x) in self.rhs.iter().enumerate() {
            self.v[k + 1] = *x;
        }

        let half = T::lit(0.5);
        let mut audit = EnergyAudit::default();
        for (br, h) in self.branches.iter_mut().zip(history) {
            let v_new = self.v[br.a] - self.v[br.b];
            let i_ab = br.g * v_new + h;
            let i_new = match br.kind {
                BranchKind::VoltageSource { .. } => -i_ab,
                _ => i_ab,
            };
            // Tellegen's theorem holds for any KCL/KVL-consistent set, so the
            // sum closes exactly for the averages (trapezoidal) or the end
            // values (backward Euler) alike.
            let (v_avg, i_avg, e_avg, span) = match rule {
                Rule::Trapezoidal => {
                    (half * (v_new + br.v), half * (i_new + br.i), half * (br.value + br.value_prev), self.dt)
                }
                Rule::BackwardEulerHalf => (v_new, i_new, br.value, half * self.dt),
            };
            let e = span * v_avg * i_avg;
            match br.kind {
                BranchKind::Resistor { .. } => audit.dissipated += e,
                BranchKind::Inductor { .. } | BranchKind::Capacitor { .. } => audit.stored += e,
                BranchKind::CurrentSource => audit.supplied -= e,
                BranchKind::VoltageSource { series } => {
                    audit.supplied += span * e_avg * i_avg;
                    let drop = span * (e_avg - v_avg) * i_avg;
                    match series {
                        SeriesImpedance::Resistance(_) => audit.dissipated += drop,
                        SeriesImpedance::Inductance(_) => audit.stored += drop,
                    }
                }
            }
            br.v = v_new;
            br.i = i_new;
            br.value_prev = br.value;
        }
        self.audit = audit;
        self.steps += 1;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Rule {
    Trapezoidal,
    BackwardEulerHalf,
}

fn companion_conductance<T: PlantScalar>(name: &str, kind: &BranchKind<T>, dt: T) -> Result<T, PlantError> {
    let two = T::lit(2.0);
    Ok(match *kind {
        BranchKind::Resistor { ohms } => T::one() / positive(name, "resistance", ohms)?,
        BranchKind::Inductor { henries } => dt / (two * positive(name, "inductance", henries)?),
        BranchKind::Capacitor { farads } => two * positive(name, "capacitance", farads)? / dt,
        BranchKind::VoltageSource { series: SeriesImpedance::Resistance(r) } => {
            T::one() / positive(name, "series resistance", r)?
        }
        BranchKind::VoltageSource { series: SeriesImpedance::Inductance(l) } => {
            dt / (two * positive(name, "series inductance", l)?)
        }
        BranchKind::CurrentSource => T::zero(),
    })
}

/// History term `I_h` of the companion model `i_ab = G·v_ab + I_h` for the coming step.
fn history_current<T: PlantScalar>(br: &Branch<T>, rule: Rule) -> T {
    let trap = rule == Rule::Trapezoidal;
    match br.kind {
        BranchKind::Resistor { .. } => T::zero(),
        BranchKind::Inductor { .. } if trap => br.i + br.g * br.v,
        BranchKind::Inductor { .. } => br.i,
        BranchKind::Capacitor { .. } if trap => -(br.g * br.v + br.i),
        BranchKind::Capacitor { .. } => -br.g * br.v,
        BranchKind::CurrentSource => br.value,
        BranchKind::VoltageSource { series: SeriesImpedance::Resistance(_) } => -br.g * br.value,
        BranchKind::VoltageSource { series: SeriesImpedance::Inductance(_) } if trap => {
            -(br.g * br.value + br.i + br.g * (br.value_prev - br.v))
        }
        BranchKind::VoltageSource { series: SeriesImpedance::Inductance(_) } => -(br.g * br.value + br.i),
    }
}

fn stamp<T: PlantScalar>(rhs: &mut DVector<T>, node: usize, x: T) {
    if node > 0 {
        rhs[node - 1] += x;
    }
}

fn assemble<T: PlantScalar>(n: usize, branches: &[Branch<T>]) -> DMatrix<T> {
    let mut m = DMatrix::zeros(n, n);
    for br in branches {
        let (a, b, g) = (br.a, br.b, br.g);
        if a > 0 {
            m[(a - 1, a - 1)] += g;
        }
        if b > 0 {
            m[(b - 1, b - 1)] += g;
        }
        if a > 0 && b > 0 {
            m[(a - 1, b - 1)] -= g;
            m[(b - 1, a - 1)] -= g;
        }
    }
    m
}

fn factorize<T: PlantScalar>(m: &DMatrix<T>) -> Result<LU<T, Dyn, Dyn>, PlantError> {
    let lu = m.clone().lu();
    let scale = m.iter().fold(T::zero(), |acc, x| Float::max(acc, Float::abs(*x)));
    let u = lu.u();
    let dim = m.nrows();
    let tiny = scale * T::epsilon() * T::from_usize(dim.max(1)).unwrap();
    if (0..dim).any(|k| Float::abs(u[(k, k)]) <= tiny) {
        return Err(PlantError::Singular);
    }
    Ok(lu)
}

fn check_grounded<T: PlantScalar>(nodes: &IndexMap<String, NodeId>, branches: &[Branch<T>]) -> Result<(), PlantError> {
    let mut uf = UnionFind::new(nodes.len());
    for br in branches.iter().filter(|b| b.g > T::zero()) {
        uf.union(br.a, br.b);
    }
    let floating: Vec<String> =
        nodes.iter().filter(|(_, id)| !uf.equiv(0, id.0)).map(|(name, _)| name.clone()).collect();
    if floating.is_empty() {
        Ok(())
    } else {
        Err(PlantError::FloatingNodes { nodes: floating })
    }
}
