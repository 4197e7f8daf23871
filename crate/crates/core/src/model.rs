//! Functional models: units with ports and state variables, instances of
//! units, and port-to-port connections.
//!
//! Names are qualified as `instance.local` where `local` is a port or state
//! of the instance's unit.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use petgraph::algo::toposort;
use petgraph::graph::{DiGraph, NodeIndex};
use serde::Serialize;
use thiserror::Error;

use crate::calculi::Belief;
use crate::temporal::Delay;

pub const WORKING: &str = "working";
pub const BINARY_DOMAIN: [&str; 2] = ["normal", "abnormal"];

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct QualifiedName {
    pub instance: String,
    pub local: String,
}

impl QualifiedName {
    pub fn new(instance: impl Into<String>, local: impl Into<String>) -> Self {
        QualifiedName { instance: instance.into(), local: local.into() }
    }
}

impl fmt::Display for QualifiedName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.instance, self.local)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("`{0}` is not a qualified name of the form instance.name")]
pub struct NameError(pub String);

pub fn is_identifier(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl FromStr for QualifiedName {
    type Err = NameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once('.') {
            Some((i, l)) if is_identifier(i) && is_identifier(l) => Ok(QualifiedName::new(i, l)),
            _ => Err(NameError(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVarDef {
    pub name: String,
    pub fault_modes: Vec<String>,
    /// Degrees of each fault mode occurring.
    pub belief: Belief,
    /// Environmental condition rather than a component state. No special
    /// semantics.
    pub environmental: bool,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortDef {
    pub name: String,
    pub domain: Vec<String>,
    pub line: usize,
}

impl PortDef {
    pub fn binary(name: impl Into<String>) -> Self {
        PortDef { name: name.into(), domain: BINARY_DOMAIN.iter().map(|s| s.to_string()).collect(), line: 0 }
    }

    pub fn is_binary(&self) -> bool {
        let mut d: Vec<&str> = self.domain.iter().map(String::as_str).collect();
        d.sort_unstable();
        d == ["abnormal", "normal"]
    }
}

/// Uncertain single link from an optional input to an output, qualified by
/// a unit-local fault state. Without an input the link is a pure fault source.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkSpec {
    pub input: Option<String>,
    pub output: String,
    pub cause: String,
    pub alpha: Belief,
    pub delay: Delay,
    pub fault_delay: Delay,
}

/// Two inputs jointly driving an output, with context-synergy events.
#[derive(Debug, Clone, PartialEq)]
pub struct Join2Spec {
    pub in1: String,
    pub in2: String,
    pub output: String,
    pub alpha: Belief,
    pub beta: Belief,
    pub psi: Option<Belief>,
    pub sigma: Option<Belief>,
    pub delay1: Delay,
    pub delay2: Delay,
    pub delay_joint: Delay,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TemplateSpec {
    Link(LinkSpec),
    Join2(Join2Spec),
}

impl TemplateSpec {
    pub fn output(&self) -> &str {
        match self {
            TemplateSpec::Link(l) => &l.output,
            TemplateSpec::Join2(j) => &j.output,
        }
    }

    pub fn inputs(&self) -> Vec<&str> {
        match self {
            TemplateSpec::Link(l) => l.input.iter().map(String::as_str).collect(),
            TemplateSpec::Join2(j) => vec![j.in1.as_str(), j.in2.as_str()],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Behaviour {
    pub template: TemplateSpec,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct UnitDef {
    pub name: String,
    pub states: Vec<StateVarDef>,
    pub in_ports: Vec<PortDef>,
    pub out_ports: Vec<PortDef>,
    pub behaviours: Vec<Behaviour>,
    pub line: usize,
}

impl UnitDef {
    pub fn state(&self, name: &str) -> Option<&StateVarDef> {
        self.states.iter().find(|s| s.name == name)
    }

    pub fn in_port(&self, name: &str) -> Option<&PortDef> {
        self.in_ports.iter().find(|p| p.name == name)
    }

    pub fn out_port(&self, name: &str) -> Option<&PortDef> {
        self.out_ports.iter().find(|p| p.name == name)
    }

    pub fn port(&self, name: &str) -> Option<&PortDef> {
        self.in_port(name).or_else(|| self.out_port(name))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceDef {
    pub name: String,
    pub unit: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Connection {
    pub from: QualifiedName,
    pub to: QualifiedName,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    pub port: QualifiedName,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelDef {
    pub name: String,
    pub time_unit: String,
    pub units: Vec<UnitDef>,
    pub instances: Vec<InstanceDef>,
    pub connections: Vec<Connection>,
    pub observables: Vec<Observable>,
}

impl ModelDef {
    pub fn unit(&self, name: &str) -> Option<&UnitDef> {
        self.units.iter().find(|u| u.name == name)
    }

    pub fn unit_of(&self, instance: &str) -> Option<&UnitDef> {
        let inst = self.instances.iter().find(|i| i.name == instance)?;
        self.unit(&inst.unit)
    }
}

// ---------------------------------------------------------------------------
// validation

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Issue {
    pub severity: Severity,
    pub line: usize,
    pub location: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn errors(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Warning)
    }

    pub fn has_errors(&self) -> bool {
        self.errors().next().is_some()
    }

    fn push(&mut self, severity: Severity, line: usize, location: impl Into<String>, message: impl Into<String>) {
        self.issues.push(Issue { severity, line, location: location.into(), message: message.into() });
    }

    fn error(&mut self, line: usize, location: impl Into<String>, message: impl Into<String>) {
        self.push(Severity::Error, line, location, message);
    }

    fn warn(&mut self, line: usize, location: impl Into<String>, message: impl Into<String>) {
        self.push(Severity::Warning, line, location, message);
    }
}

fn check_belief(report: &mut ValidationReport, line: usize, loc: &str, what: &str, b: &Belief) {
    if b.probability.is_none() && b.necessity.is_none() {
        report.error(line, loc, format!("{what} carries neither a prior nor a necessity"));
    }
    if let Some(p) = b.probability {
        if !(0.0..=1.0).contains(&p) {
            report.error(line, loc, format!("{what}: probability {p} outside [0, 1]"));
        }
    }
    if let Some(n) = b.necessity {
        if !(0.0..=1.0).contains(&n) {
            report.error(line, loc, format!("{what}: necessity {n} outside [0, 1]"));
        }
    }
    if let (Some(n), Some(pi)) = (b.necessity, b.possibility) {
        if n > pi {
            report.error(line, loc, format!("{what}: necessity {n} exceeds possibility {pi}"));
        }
    }
}

fn check_delay(report: &mut ValidationReport, line: usize, loc: &str, what: &str, d: &Delay) {
    if Delay::new(d.min, d.max).is_err() {
        report.error(line, loc, format!("{what} {d} is not a valid delay"));
    }
}

fn validate_unit(unit: &UnitDef, report: &mut ValidationReport) {
    let loc = format!("unit {}", unit.name);
    let mut seen = BTreeSet::new();
    for name in unit
        .states
        .iter()
        .map(|s| (&s.name, s.line))
        .chain(unit.in_ports.iter().chain(&unit.out_ports).map(|p| (&p.name, p.line)))
    {
        if !seen.insert(name.0.clone()) {
            report.error(name.1, &loc, format!("duplicate port or state name `{}`", name.0));
        }
    }
    for s in &unit.states {
        let sloc = format!("{}.{}", unit.name, s.name);
        if s.fault_modes.is_empty() {
            report.error(s.line, &sloc, "state declares no fault modes");
        }
        let mut modes = BTreeSet::new();
        for m in &s.fault_modes {
            if m == WORKING {
                report.error(s.line, &sloc, "`working` is implicit and cannot be a fault mode");
            } else if !modes.insert(m) {
                report.error(s.line, &sloc, format!("duplicate fault mode `{m}`"));
            }
        }
        check_belief(report, s.line, &sloc, "fault mode", &s.belief);
    }
    for p in unit.in_ports.iter().chain(&unit.out_ports) {
        if !p.is_binary() {
            report.error(
                p.line,
                format!("{}.{}", unit.name, p.name),
                format!("port domain {{{}}}: binary abstraction only (normal, abnormal)", p.domain.join(",")),
            );
        }
    }

    let mut driven: BTreeMap<&str, usize> = BTreeMap::new();
    for b in &unit.behaviours {
        let out = b.template.output();
        if unit.out_port(out).is_none() {
            report.error(b.line, &loc, format!("behaviour output `{out}` is not an output port of the unit"));
        } else if let Some(prev) = driven.insert(out, b.line) {
            report.error(
                b.line,
                &loc,
                format!("output `{out}` already defined by the behaviour on line {prev}"),
            );
        }
        for i in b.template.inputs() {
            if unit.in_port(i).is_none() {
                report.error(b.line, &loc, format!("behaviour input `{i}` is not an input port of the unit"));
            }
        }
        match &b.template {
            TemplateSpec::Link(l) => {
                match unit.state(&l.cause) {
                    None => report.error(b.line, &loc, format!("link cause `{}` is not a state of the unit", l.cause)),
                    Some(state) => {
                        if let (Some(pf), Some(pa)) = (state.belief.probability, l.alpha.probability) {
                            if l.input.is_some() && (1.0 - pf) * pa <= pf {
                                report.warn(
                                    b.line,
                                    &loc,
                                    format!(
                                        "link to `{}`: P[working and alpha] = {} does not exceed P[fault] = {pf}",
                                        l.output,
                                        (1.0 - pf) * pa
                                    ),
                                );
                            }
                        }
                    }
                }
                check_belief(report, b.line, &loc, "alpha", &l.alpha);
                check_delay(report, b.line, &loc, "delay", &l.delay);
                check_delay(report, b.line, &loc, "fault_delay", &l.fault_delay);
                if l.fault_delay.min > 0 {
                    report.warn(b.line, &loc, "fault_delay with nonzero minimum; a unit fault usually acts after 0");
                }
            }
            TemplateSpec::Join2(j) => {
                if j.in1 == j.in2 {
                    report.error(b.line, &loc, "join2 inputs must differ");
                }
                check_belief(report, b.line, &loc, "alpha", &j.alpha);
                check_belief(report, b.line, &loc, "beta", &j.beta);
                for (what, e) in [("psi", &j.psi), ("sigma", &j.sigma)] {
                    if let Some(e) = e {
                        check_belief(report, b.line, &loc, what, e);
                    }
                }
                if j.psi.is_some() != j.sigma.is_some() {
                    report.error(b.line, &loc, "psi and sigma must be declared together");
                }
                for (what, d) in [("delay1", &j.delay1), ("delay2", &j.delay2), ("delay_joint", &j.delay_joint)] {
                    check_delay(report, b.line, &loc, what, d);
                }
                for (what, d) in [("delay1", &j.delay1), ("delay2", &j.delay2)] {
                    if d.min != 0 {
                        report.error(b.line, &loc, format!("{what} must have a zero minimum, got {d}"));
                    }
                }
            }
        }
    }
    for p in &unit.out_ports {
        if !driven.contains_key(p.name.as_str()) {
            report.error(p.line, format!("{}.{}", unit.name, p.name), "output port has no defining behaviour");
        }
    }
}

/// Port-level dependency graph: connections plus intra-unit input→output wiring.
fn port_graph(def: &ModelDef) -> (DiGraph<QualifiedName, ()>, HashMap<QualifiedName, NodeIndex>) {
    let mut g = DiGraph::new();
    let mut idx = HashMap::new();
    for inst in &def.instances {
        let Some(unit) = def.unit(&inst.unit) else { continue };
        for p in unit.in_ports.iter().chain(&unit.out_ports) {
            let q = QualifiedName::new(&inst.name, &p.name);
            let n = g.add_node(q.clone());
            idx.insert(q, n);
        }
    }
    for inst in &def.instances {
        let Some(unit) = def.unit(&inst.unit) else { continue };
        for b in &unit.behaviours {
            let out = QualifiedName::new(&inst.name, b.template.output());
            for i in b.template.inputs() {
                let inp = QualifiedName::new(&inst.name, i);
                if let (Some(&a), Some(&z)) = (idx.get(&inp), idx.get(&out)) {
                    g.add_edge(a, z, ());
                }
            }
        }
    }
    for c in &def.connections {
        if let (Some(&a), Some(&z)) = (idx.get(&c.from), idx.get(&c.to)) {
            g.add_edge(a, z, ());
        }
    }
    (g, idx)
}

/// Checks every structural invariant. Problems are returned as data, ordered
/// by source line.
pub fn validate(def: &ModelDef) -> ValidationReport {
    let mut report = ValidationReport::default();

    let mut unit_names = BTreeSet::new();
    for u in &def.units {
        if !unit_names.insert(u.name.as_str()) {
            report.error(u.line, format!("unit {}", u.name), "duplicate unit name");
        }
        validate_unit(u, &mut report);
    }

    let mut inst_names = BTreeSet::new();
    for i in &def.instances {
        if !inst_names.insert(i.name.as_str()) {
            report.error(i.line, format!("instance {}", i.name), "duplicate instance name");
        }
        if def.unit(&i.unit).is_none() {
            report.error(i.line, format!("instance {}", i.name), format!("unknown unit `{}`", i.unit));
        }
    }

    let mut upstream: BTreeMap<&QualifiedName, usize> = BTreeMap::new();
    for c in &def.connections {
        let loc = format!("connect {} -> {}", c.from, c.to);
        let src = def.unit_of(&c.from.instance).map(|u| u.out_port(&c.from.local));
        let dst = def.unit_of(&c.to.instance).map(|u| u.in_port(&c.to.local));
        let src = match src {
            Some(Some(p)) => Some(p),
            _ => {
                report.error(c.line, &loc, format!("`{}` is not an output port", c.from));
                None
            }
        };
        let dst = match dst {
            Some(Some(p)) => Some(p),
            _ => {
                report.error(c.line, &loc, format!("`{}` is not an input port", c.to));
                None
            }
        };
        if let Some(prev) = upstream.insert(&c.to, c.line) {
            report.error(
                c.line,
                &loc,
                format!("fan-in at input port `{}`: already connected on line {prev}", c.to),
            );
        }
        if let (Some(s), Some(d)) = (src, dst) {
            let (mut a, mut b) = (s.domain.clone(), d.domain.clone());
            a.sort();
            b.sort();
            if a != b {
                report.error(
                    c.line,
                    &loc,
                    format!("domain mismatch: {{{}}} vs {{{}}}", s.domain.join(","), d.domain.join(",")),
                );
            }
        }
    }

    let mut observed = BTreeSet::new();
    for o in &def.observables {
        let loc = format!("observe {}", o.port);
        match def.unit_of(&o.port.instance).and_then(|u| u.port(&o.port.local)) {
            None => report.error(o.line, &loc, format!("`{}` is not a port of any instance", o.port)),
            Some(_) => {
                if !observed.insert(&o.port) {
                    report.warn(o.line, &loc, "port observed twice");
                }
            }
        }
    }

    let (g, _) = port_graph(def);
    if let Err(cycle) = toposort(&g, None) {
        report.error(0, "model", format!("functional graph has a cycle through `{}`", g[cycle.node_id()]));
    }

    report.issues.sort_by_key(|i| i.line);
    report
}

// ---------------------------------------------------------------------------
// grounding

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct PortId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct StateId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct CauseId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    In,
    Out,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PortVar {
    pub name: QualifiedName,
    pub direction: Direction,
    pub observable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateVar {
    pub name: QualifiedName,
    pub environmental: bool,
    pub causes: Vec<CauseId>,
}

/// A member of C: `instance.state = fault_mode`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CauseVar {
    pub state: StateId,
    pub mode: String,
    pub belief: Belief,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundModel {
    pub def: ModelDef,
    pub causes: Vec<CauseVar>,
    pub states: Vec<StateVar>,
    pub ports: Vec<PortVar>,
    pub observables: Vec<PortId>,
    /// Directed port dependencies, in insertion order.
    pub edges: Vec<(PortId, PortId)>,
    /// Upstream source of every connected input port.
    pub upstream: BTreeMap<PortId, PortId>,
    /// Ports in a topological order.
    pub order: Vec<PortId>,
    port_index: HashMap<QualifiedName, PortId>,
    state_index: HashMap<QualifiedName, StateId>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("model is invalid: {}", .0.iter().map(|i| format!("line {}: {}: {}", i.line, i.location, i.message)).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Issue>),
}

impl GroundModel {
    pub fn port_id(&self, name: &QualifiedName) -> Option<PortId> {
        self.port_index.get(name).copied()
    }

    pub fn state_id(&self, name: &QualifiedName) -> Option<StateId> {
        self.state_index.get(name).copied()
    }

    pub fn port(&self, id: PortId) -> &PortVar {
        &self.ports[id.0 as usize]
    }

    pub fn state(&self, id: StateId) -> &StateVar {
        &self.states[id.0 as usize]
    }

    pub fn cause(&self, id: CauseId) -> &CauseVar {
        &self.causes[id.0 as usize]
    }

    pub fn cause_by_label(&self, label: &str) -> Option<CauseId> {
        self.causes.iter().position(|c| c.label == label).map(|i| CauseId(i as u32))
    }

    pub fn is_observable(&self, id: PortId) -> bool {
        self.port(id).observable
    }
}

/// Grounds a valid model into its variable universe and port topology.
pub fn ground(def: &ModelDef) -> Result<GroundModel, ModelError> {
    let report = validate(def);
    if report.has_errors() {
        return Err(ModelError::Invalid(report.errors().cloned().collect()));
    }

    let mut gm = GroundModel {
        def: def.clone(),
        causes: Vec::new(),
        states: Vec::new(),
        ports: Vec::new(),
        observables: Vec::new(),
        edges: Vec::new(),
        upstream: BTreeMap::new(),
        order: Vec::new(),
        port_index: HashMap::new(),
        state_index: HashMap::new(),
    };

    for inst in &def.instances {
        let unit = def.unit(&inst.unit).expect("validated");
        for s in &unit.states {
            let sid = StateId(gm.states.len() as u32);
            let name = QualifiedName::new(&inst.name, &s.name);
            let mut causes = Vec::new();
            for m in &s.fault_modes {
                let cid = CauseId(gm.causes.len() as u32);
                gm.causes.push(CauseVar { state: sid, mode: m.clone(), belief: s.belief, label: format!("{name}={m}") });
                causes.push(cid);
            }
            gm.state_index.insert(name.clone(), sid);
            gm.states.push(StateVar { name, environmental: s.environmental, causes });
        }
        for (dir, ports) in [(Direction::In, &unit.in_ports), (Direction::Out, &unit.out_ports)] {
            for p in ports {
                let pid = PortId(gm.ports.len() as u32);
                let name = QualifiedName::new(&inst.name, &p.name);
                gm.port_index.insert(name.clone(), pid);
                gm.ports.push(PortVar { name, direction: dir, observable: false });
            }
        }
    }
    for o in &def.observables {
        let pid = gm.port_index[&o.port];
        if !gm.ports[pid.0 as usize].observable {
            gm.ports[pid.0 as usize].observable = true;
            gm.observables.push(pid);
        }
    }

    for inst in &def.instances {
        let unit = def.unit(&inst.unit).expect("validated");
        for b in &unit.behaviours {
            let out = gm.port_index[&QualifiedName::new(&inst.name, b.template.output())];
            for i in b.template.inputs() {
                let inp = gm.port_index[&QualifiedName::new(&inst.name, i)];
                gm.edges.push((inp, out));
            }
        }
    }
    for c in &def.connections {
        let (a, z) = (gm.port_index[&c.from], gm.port_index[&c.to]);
        gm.edges.push((a, z));
        gm.upstream.insert(z, a);
    }

    let mut g: DiGraph<PortId, ()> = DiGraph::new();
    let nodes: Vec<NodeIndex> = (0..gm.ports.len()).map(|i| g.add_node(PortId(i as u32))).collect();
    for &(a, z) in &gm.edges {
        g.add_edge(nodes[a.0 as usize], nodes[z.0 as usize], ());
    }
    let order = toposort(&g, None).map_err(|c| {
        ModelError::Invalid(vec![Issue {
            severity: Severity::Error,
            line: 0,
            location: "model".into(),
            message: format!("functional graph has a cycle through `{}`", gm.ports[g[c.node_id()].0 as usize].name),
        }])
    })?;
    gm.order = order.into_iter().map(|n| g[n]).collect();
    Ok(gm)
}
