//! Compilation of a grounded model into a causal theory.
//!
//! Every port gets one *covering* rule listing all the ways it can become
//! abnormal (terms carry propagation delays) and one *complement* rule
//! listing all the ways it stays normal (no delays). Rules come from two
//! templates, the uncertain link and the two-input join, plus identity rules
//! for connections and axioms for unconnected inputs.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::calculi::{AtomKind, Belief, CostAtom};
use crate::model::{CauseId, Direction, GroundModel, PortId, StateId, TemplateSpec};
use crate::temporal::Delay;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct EventId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct PathId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Alpha,
    Beta,
    Psi,
    Sigma,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Alpha => "alpha",
            Role::Beta => "beta",
            Role::Psi => "psi",
            Role::Sigma => "sigma",
        }
    }
}

/// Uncertain context assumption qualifying whether a link transmits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CausationEvent {
    pub id: EventId,
    pub name: String,
    pub role: Role,
    pub belief: Belief,
    /// Qualified output port of the behaviour that owns the event.
    pub owner: String,
    pub disjoint_with: Option<EventId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum AbnormalLit {
    Port(PortId),
    Fault(CauseId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum EventLit {
    Holds(EventId),
    Fails(EventId),
}

/// One conjunction of a rule body.
///
/// In a complement rule the abnormal literals are negative port literals
/// read "at some time before".
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Term {
    pub abnormal: Vec<AbnormalLit>,
    pub normal_ports: Vec<PortId>,
    pub normal_states: Vec<StateId>,
    pub events: Vec<EventLit>,
    pub delay: Option<Delay>,
    pub path: PathId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    AbnormalCovering,
    NormalComplement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleOrigin {
    Link,
    Source,
    Join2,
    Wire,
    Exogenous,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rule {
    pub head: PortId,
    pub kind: RuleKind,
    pub origin: RuleOrigin,
    pub terms: Vec<Term>,
}

/// A link whose `working ∧ alpha` pair may be swapped for its fault.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkRecord {
    pub state: StateId,
    pub alpha: EventId,
    pub output: PortId,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathInfo {
    pub head: PortId,
    pub kind: RuleKind,
    pub label: String,
}

/// Anything that may appear in an environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Assumable {
    Cause(CauseId),
    Event(EventId),
    NotEvent(EventId),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TheoryError {
    #[error("join2 at `{port}`: {which} must have a zero minimum delay, got {delay}")]
    NonZeroJoinMinimum { port: String, which: &'static str, delay: Delay },
    #[error("join2 at `{0}`: the two inputs must differ")]
    SameJoinInputs(String),
    #[error("port `{0}` has no defining behaviour and is not an input")]
    Undefined(String),
    #[error("port `{0}` is defined by more than one behaviour")]
    Overdefined(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CausalTheory {
    pub model: GroundModel,
    pub events: Vec<CausationEvent>,
    pub abnormal: Vec<Rule>,
    pub normal: Vec<Rule>,
    pub links: Vec<LinkRecord>,
    pub paths: Vec<PathInfo>,
    pub warnings: Vec<String>,
}

impl CausalTheory {
    pub fn abnormal_rule(&self, p: PortId) -> &Rule {
        &self.abnormal[p.0 as usize]
    }

    pub fn normal_rule(&self, p: PortId) -> &Rule {
        &self.normal[p.0 as usize]
    }

    pub fn event(&self, id: EventId) -> &CausationEvent {
        &self.events[id.0 as usize]
    }

    pub fn path(&self, id: PathId) -> &PathInfo {
        &self.paths[id.0 as usize]
    }

    pub fn event_by_name(&self, name: &str) -> Option<EventId> {
        self.events.iter().find(|e| e.name == name).map(|e| e.id)
    }

    /// C: cause variables followed by causation events.
    pub fn assumables(&self) -> Vec<Assumable> {
        let causes = (0..self.model.causes.len()).map(|i| Assumable::Cause(CauseId(i as u32)));
        let events = self.events.iter().map(|e| Assumable::Event(e.id));
        causes.chain(events).collect()
    }

    pub fn name_of(&self, a: Assumable) -> String {
        match a {
            Assumable::Cause(c) => self.model.cause(c).label.clone(),
            Assumable::Event(e) => self.event(e).name.clone(),
            Assumable::NotEvent(e) => format!("~{}", self.event(e).name),
        }
    }

    pub fn atom(&self, a: Assumable) -> CostAtom {
        match a {
            Assumable::Cause(c) => CostAtom { kind: AtomKind::Cause, belief: self.model.cause(c).belief },
            Assumable::Event(e) => CostAtom { kind: AtomKind::Causation, belief: self.event(e).belief },
            Assumable::NotEvent(e) => CostAtom { kind: AtomKind::Causation, belief: self.event(e).belief.negated() },
        }
    }

    /// Pairs of assumptions that can never hold together.
    pub fn disjoint_pairs(&self) -> Vec<(Assumable, Assumable)> {
        let mut out = Vec::new();
        for e in &self.events {
            out.push((Assumable::Event(e.id), Assumable::NotEvent(e.id)));
            if let Some(d) = e.disjoint_with {
                out.push((Assumable::Event(e.id), Assumable::Event(d)));
            }
        }
        for s in &self.model.states {
            for (i, a) in s.causes.iter().enumerate() {
                for b in &s.causes[i + 1..] {
                    out.push((Assumable::Cause(*a), Assumable::Cause(*b)));
                }
            }
        }
        out
    }

    fn lit_name(&self, l: &AbnormalLit) -> String {
        match l {
            AbnormalLit::Port(p) => format!("~{}", self.model.port(*p).name),
            AbnormalLit::Fault(c) => self.model.cause(*c).label.clone(),
        }
    }

    pub fn term_to_string(&self, t: &Term) -> String {
        let mut parts: Vec<String> = t.abnormal.iter().map(|l| self.lit_name(l)).collect();
        parts.extend(t.normal_ports.iter().map(|p| self.model.port(*p).name.to_string()));
        parts.extend(t.normal_states.iter().map(|s| format!("{}=working", self.model.state(*s).name)));
        parts.extend(t.events.iter().map(|e| match e {
            EventLit::Holds(e) => self.event(*e).name.clone(),
            EventLit::Fails(e) => format!("~{}", self.event(*e).name),
        }));
        let body = if parts.is_empty() { "true".to_string() } else { parts.join(" & ") };
        match t.delay {
            Some(d) => format!("{body} {d}"),
            None => body,
        }
    }
}

impl fmt::Display for CausalTheory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &p in &self.model.order {
            for rule in [self.abnormal_rule(p), self.normal_rule(p)] {
                let head = match rule.kind {
                    RuleKind::AbnormalCovering => format!("~{}", self.model.port(p).name),
                    RuleKind::NormalComplement => self.model.port(p).name.to_string(),
                };
                let body = if rule.terms.is_empty() {
                    "false".to_string()
                } else {
                    rule.terms.iter().map(|t| format!("({})", self.term_to_string(t))).collect::<Vec<_>>().join(" | ")
                };
                writeln!(f, "{head} <-> {body}")?;
            }
        }
        Ok(())
    }
}

/// Allocates causation events and path ids while templates are instantiated.
#[derive(Debug, Default)]
pub struct TheoryBuilder {
    pub events: Vec<CausationEvent>,
    pub paths: Vec<PathInfo>,
}

impl TheoryBuilder {
    pub fn event(&mut self, owner: &str, role: Role, belief: Belief) -> EventId {
        let id = EventId(self.events.len() as u32);
        self.events.push(CausationEvent {
            id,
            name: format!("{owner}.{}", role.as_str()),
            role,
            belief,
            owner: owner.to_string(),
            disjoint_with: None,
        });
        id
    }

    fn declare_disjoint(&mut self, a: EventId, b: EventId) {
        self.events[a.0 as usize].disjoint_with = Some(b);
        self.events[b.0 as usize].disjoint_with = Some(a);
    }

    fn path(&mut self, head: PortId, kind: RuleKind, label: String) -> PathId {
        let id = PathId(self.paths.len() as u32);
        self.paths.push(PathInfo { head, kind, label });
        id
    }

    fn rule(&mut self, head: PortId, head_name: &str, kind: RuleKind, origin: RuleOrigin, terms: Vec<TermSpec>) -> Rule {
        let tag = match kind {
            RuleKind::AbnormalCovering => "",
            RuleKind::NormalComplement => "n",
        };
        let terms = terms
            .into_iter()
            .enumerate()
            .map(|(k, t)| {
                let path = self.path(head, kind, format!("{head_name}#{tag}{}", k + 1));
                Term {
                    abnormal: t.abnormal,
                    normal_ports: t.normal_ports,
                    normal_states: t.normal_states,
                    events: t.events,
                    delay: t.delay,
                    path,
                }
            })
            .collect();
        Rule { head, kind, origin, terms }
    }
}

#[derive(Default)]
struct TermSpec {
    abnormal: Vec<AbnormalLit>,
    normal_ports: Vec<PortId>,
    normal_states: Vec<StateId>,
    events: Vec<EventLit>,
    delay: Option<Delay>,
}

/// Port and state handles a template is instantiated over.
#[derive(Debug, Clone)]
pub struct LinkSlots<'a> {
    pub input: Option<PortId>,
    pub cause: StateId,
    pub faults: &'a [CauseId],
    pub output: PortId,
    pub output_name: &'a str,
}

/// `~x ∧ y ∧ α ∨ ~y ↔ ~z` and its complement `~α ∧ ~x ∧ y ∨ y ∧ x ↔ z`.
///
/// Without an input the link reduces to a fault source: `~y ↔ ~z`, `y ↔ z`.
/// Returns the rule pair and the fresh alpha event, if any.
pub fn link_template(
    b: &mut TheoryBuilder,
    slots: LinkSlots<'_>,
    alpha: Belief,
    delay_prop: Delay,
    delay_fault: Delay,
) -> (Rule, Rule, Option<EventId>) {
    let y = slots.cause;
    let mut abnormal = Vec::new();
    let mut normal = Vec::new();
    let mut alpha_id = None;
    if let Some(x) = slots.input {
        let a = b.event(slots.output_name, Role::Alpha, alpha);
        alpha_id = Some(a);
        abnormal.push(TermSpec {
            abnormal: vec![AbnormalLit::Port(x)],
            normal_states: vec![y],
            events: vec![EventLit::Holds(a)],
            delay: Some(delay_prop),
            ..Default::default()
        });
        normal.push(TermSpec {
            abnormal: vec![AbnormalLit::Port(x)],
            normal_states: vec![y],
            events: vec![EventLit::Fails(a)],
            ..Default::default()
        });
        normal.push(TermSpec { normal_ports: vec![x], normal_states: vec![y], ..Default::default() });
    } else {
        normal.push(TermSpec { normal_states: vec![y], ..Default::default() });
    }
    for &m in slots.faults {
        abnormal.push(TermSpec { abnormal: vec![AbnormalLit::Fault(m)], delay: Some(delay_fault), ..Default::default() });
    }
    let origin = if slots.input.is_some() { RuleOrigin::Link } else { RuleOrigin::Source };
    let ab = b.rule(slots.output, slots.output_name, RuleKind::AbnormalCovering, origin, abnormal);
    let nr = b.rule(slots.output, slots.output_name, RuleKind::NormalComplement, origin, normal);
    (ab, nr, alpha_id)
}

#[derive(Debug, Clone)]
pub struct Join2Beliefs {
    pub alpha: Belief,
    pub beta: Belief,
    pub synergy: Option<(Belief, Belief)>,
}

#[derive(Debug, Clone, Copy)]
pub struct Join2Delays {
    pub first: Delay,
    pub second: Delay,
    pub joint: Delay,
}

/// `(~x ∧ α) ∨ (~y ∧ β) ∨ (~x ∧ ψ) ∧ (~y ∧ σ) ↔ ~z` with the five-term
/// complement. Without synergy events the joint term is absent and the
/// complement has four terms.
pub fn join2_template(
    b: &mut TheoryBuilder,
    inputs: (PortId, PortId),
    output: PortId,
    output_name: &str,
    beliefs: &Join2Beliefs,
    delays: Join2Delays,
) -> Result<(Rule, Rule), TheoryError> {
    let (x, y) = inputs;
    if x == y {
        return Err(TheoryError::SameJoinInputs(output_name.to_string()));
    }
    for (which, d) in [("delay1", delays.first), ("delay2", delays.second)] {
        if d.min != 0 {
            return Err(TheoryError::NonZeroJoinMinimum { port: output_name.to_string(), which, delay: d });
        }
    }
    let alpha = b.event(output_name, Role::Alpha, beliefs.alpha);
    let beta = b.event(output_name, Role::Beta, beliefs.beta);
    let synergy = beliefs.synergy.map(|(ps, sg)| {
        let psi = b.event(output_name, Role::Psi, ps);
        let sigma = b.event(output_name, Role::Sigma, sg);
        b.declare_disjoint(psi, alpha);
        b.declare_disjoint(sigma, beta);
        (psi, sigma)
    });

    let ab_x = AbnormalLit::Port(x);
    let ab_y = AbnormalLit::Port(y);
    let mut abnormal = vec![
        TermSpec { abnormal: vec![ab_x], events: vec![EventLit::Holds(alpha)], delay: Some(delays.first), ..Default::default() },
        TermSpec { abnormal: vec![ab_y], events: vec![EventLit::Holds(beta)], delay: Some(delays.second), ..Default::default() },
    ];
    let mut normal = vec![
        TermSpec { normal_ports: vec![x, y], ..Default::default() },
        TermSpec { abnormal: vec![ab_x], normal_ports: vec![y], events: vec![EventLit::Fails(alpha)], ..Default::default() },
        TermSpec { abnormal: vec![ab_y], normal_ports: vec![x], events: vec![EventLit::Fails(beta)], ..Default::default() },
    ];
    match synergy {
        Some((psi, sigma)) => {
            abnormal.push(TermSpec {
                abnormal: vec![ab_x, ab_y],
                events: vec![EventLit::Holds(psi), EventLit::Holds(sigma)],
                delay: Some(delays.joint),
                ..Default::default()
            });
            normal.push(TermSpec {
                abnormal: vec![ab_x, ab_y],
                events: vec![EventLit::Fails(alpha), EventLit::Fails(psi), EventLit::Fails(beta)],
                ..Default::default()
            });
            normal.push(TermSpec {
                abnormal: vec![ab_x, ab_y],
                events: vec![EventLit::Fails(alpha), EventLit::Fails(beta), EventLit::Fails(sigma)],
                ..Default::default()
            });
        }
        None => normal.push(TermSpec {
            abnormal: vec![ab_x, ab_y],
            events: vec![EventLit::Fails(alpha), EventLit::Fails(beta)],
            ..Default::default()
        }),
    }
    let ab = b.rule(output, output_name, RuleKind::AbnormalCovering, RuleOrigin::Join2, abnormal);
    let nr = b.rule(output, output_name, RuleKind::NormalComplement, RuleOrigin::Join2, normal);
    Ok((ab, nr))
}

/// Builds Σ for every port of the model.
pub fn compile(gm: &GroundModel) -> Result<CausalTheory, TheoryError> {
    let mut b = TheoryBuilder::default();
    let n = gm.ports.len();
    let mut abnormal: Vec<Option<Rule>> = vec![None; n];
    let mut normal: Vec<Option<Rule>> = vec![None; n];
    let mut links = Vec::new();
    let mut warnings = Vec::new();

    let place = |pair: (Rule, Rule), name: &str, ab: &mut Vec<Option<Rule>>, nr: &mut Vec<Option<Rule>>| {
        let h = pair.0.head.0 as usize;
        if ab[h].is_some() {
            return Err(TheoryError::Overdefined(name.to_string()));
        }
        ab[h] = Some(pair.0);
        nr[h] = Some(pair.1);
        Ok(())
    };

    for inst in &gm.def.instances {
        let unit = gm.def.unit(&inst.unit).expect("grounded model is valid");
        let port = |local: &str| gm.port_id(&crate::model::QualifiedName::new(&inst.name, local)).expect("port");
        for beh in &unit.behaviours {
            let out = port(beh.template.output());
            let out_name = gm.port(out).name.to_string();
            match &beh.template {
                TemplateSpec::Link(l) => {
                    let state = gm.state_id(&crate::model::QualifiedName::new(&inst.name, &l.cause)).expect("state");
                    let faults = gm.state(state).causes.clone();
                    let slots = LinkSlots {
                        input: l.input.as_deref().map(port),
                        cause: state,
                        faults: &faults,
                        output: out,
                        output_name: &out_name,
                    };
                    let (ab, nr, alpha) = link_template(&mut b, slots, l.alpha, l.delay, l.fault_delay);
                    if let Some(a) = alpha {
                        links.push(LinkRecord { state, alpha: a, output: out });
                        let fault = gm.cause(faults[0]).belief;
                        if let (Some(pf), Some(pa)) = (fault.probability, l.alpha.probability) {
                            if (1.0 - pf) * pa <= pf {
                                warnings.push(format!(
                                    "link `{out_name}`: P[working and alpha] <= P[fault]; fault substitutions may outrank the original explanation"
                                ));
                            }
                        }
                    }
                    if l.fault_delay.min > 0 {
                        warnings.push(format!("link `{out_name}`: fault_delay {} has a nonzero minimum", l.fault_delay));
                    }
                    place((ab, nr), &out_name, &mut abnormal, &mut normal)?;
                }
                TemplateSpec::Join2(j) => {
                    let beliefs = Join2Beliefs {
                        alpha: j.alpha,
                        beta: j.beta,
                        synergy: j.psi.zip(j.sigma),
                    };
                    let delays = Join2Delays { first: j.delay1, second: j.delay2, joint: j.delay_joint };
                    let pair = join2_template(&mut b, (port(&j.in1), port(&j.in2)), out, &out_name, &beliefs, delays)?;
                    place(pair, &out_name, &mut abnormal, &mut normal)?;
                }
            }
        }
    }

    for (i, pv) in gm.ports.iter().enumerate() {
        let pid = PortId(i as u32);
        if pv.direction != Direction::In {
            continue;
        }
        let name = pv.name.to_string();
        let (ab, nr) = match gm.upstream.get(&pid) {
            Some(&src) => {
                let ab = b.rule(
                    pid,
                    &name,
                    RuleKind::AbnormalCovering,
                    RuleOrigin::Wire,
                    vec![TermSpec { abnormal: vec![AbnormalLit::Port(src)], delay: Some(Delay::ZERO), ..Default::default() }],
                );
                let nr = b.rule(
                    pid,
                    &name,
                    RuleKind::NormalComplement,
                    RuleOrigin::Wire,
                    vec![TermSpec { normal_ports: vec![src], ..Default::default() }],
                );
                (ab, nr)
            }
            None => {
                // unconnected inputs are normal for all time
                let ab = Rule { head: pid, kind: RuleKind::AbnormalCovering, origin: RuleOrigin::Exogenous, terms: vec![] };
                let nr = b.rule(pid, &name, RuleKind::NormalComplement, RuleOrigin::Exogenous, vec![TermSpec::default()]);
                (ab, nr)
            }
        };
        place((ab, nr), &name, &mut abnormal, &mut normal)?;
    }

    let mut ab_rules = Vec::with_capacity(n);
    let mut nr_rules = Vec::with_capacity(n);
    for (i, (a, z)) in abnormal.into_iter().zip(normal).enumerate() {
        match (a, z) {
            (Some(a), Some(z)) => {
                ab_rules.push(a);
                nr_rules.push(z);
            }
            _ => return Err(TheoryError::Undefined(gm.ports[i].name.to_string())),
        }
    }

    let mut by_head: BTreeMap<PortId, usize> = BTreeMap::new();
    for r in &ab_rules {
        *by_head.entry(r.head).or_default() += 1;
    }
    debug_assert!(by_head.values().all(|&c| c == 1));

    Ok(CausalTheory {
        model: gm.clone(),
        events: b.events,
        abnormal: ab_rules,
        normal: nr_rules,
        links,
        paths: b.paths,
        warnings,
    })
}
