//! Abductive explanations for observed symptoms.
//!
//! Each call compiles the part of the theory that can reach the observed
//! ports into a private engine network: one node per "port abnormal" and
//! "port normal" literal, one node per observation anchoring it at its time,
//! and a conjunction over all anchors. The label of the conjunction is the
//! explanation set.
//!
//! A port changes at most once, so a path running through a port with a
//! recorded first-abnormal time continues from that time.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::Serialize;
use thiserror::Error;

use crate::calculi::{AtomKind, Belief, Calculus, Cost, CostAtom, CostFunction};
use crate::engine::{AssumptionId, Engine, EngineError, Environment, Justification, NodeId, PathTag, Transfer};
use crate::model::{CauseId, PortId, QualifiedName, StateId};
use crate::temporal::Interval;
use crate::theory::{AbnormalLit, Assumable, CausalTheory, EventLit, PathId, RuleKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationKind {
    /// First transition to abnormal happened at this time.
    FirstAbnormal(i64),
    /// The port stayed normal up to this time.
    NormalThrough(i64),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Observation {
    pub port: String,
    pub kind: ObservationKind,
}

impl Observation {
    pub fn abnormal(port: impl Into<String>, t: i64) -> Self {
        Observation { port: port.into(), kind: ObservationKind::FirstAbnormal(t) }
    }

    pub fn normal_through(port: impl Into<String>, t: i64) -> Self {
        Observation { port: port.into(), kind: ObservationKind::NormalThrough(t) }
    }

    pub fn time(&self) -> i64 {
        match self.kind {
            ObservationKind::FirstAbnormal(t) | ObservationKind::NormalThrough(t) => t,
        }
    }

    pub fn is_abnormal(&self) -> bool {
        matches!(self.kind, ObservationKind::FirstAbnormal(_))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExplainError {
    #[error("unknown port `{0}`")]
    UnknownPort(String),
    #[error("port `{0}` is not observable")]
    NotObservable(String),
    #[error("port `{0}` has more than one first-abnormal record")]
    DuplicateAbnormal(String),
    #[error("port `{port}` is recorded normal through {through} but abnormal from {first}")]
    NormalAfterAbnormal { port: String, first: i64, through: i64 },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CauseWindow {
    pub cause: CauseId,
    pub var: String,
    pub mode: String,
    /// The fault happens at some instant in here.
    pub interval: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalRequirement {
    pub state: StateId,
    pub var: String,
    /// The state stays working during this prefix.
    pub interval: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Explanation {
    pub assumptions: BTreeSet<Assumable>,
    pub causes: Vec<CauseWindow>,
    pub normals: Vec<NormalRequirement>,
    /// Causation events assumed to hold (`Event`) or to fail (`NotEvent`).
    pub events: Vec<Assumable>,
    pub cost: Cost,
    pub belief: Option<f64>,
    pub paths: Vec<PathId>,
    /// Link faults introduced by substitution.
    pub substituted: Vec<CauseId>,
}

impl Explanation {
    pub fn cause_ids(&self) -> BTreeSet<CauseId> {
        self.causes.iter().map(|c| c.cause).collect()
    }

    pub fn window(&self, cause: CauseId) -> Option<Interval> {
        self.causes.iter().find(|c| c.cause == cause).map(|c| c.interval)
    }

    pub fn cause_labels(&self) -> Vec<&str> {
        self.causes.iter().map(|c| c.var.as_str()).collect()
    }

    fn sort_key(&self) -> (Cost, Vec<Assumable>) {
        (self.cost, self.assumptions.iter().copied().collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExplanationSet {
    pub explanations: Vec<Explanation>,
    pub bound: Cost,
    pub observations: Vec<Observation>,
}

impl ExplanationSet {
    pub fn len(&self) -> usize {
        self.explanations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.explanations.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Explanation> {
        self.explanations.iter()
    }
}

fn sort_explanations(v: &mut [Explanation]) {
    v.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}

/// An atom the calculus can price with a non-zero degree of belief.
fn usable(calculus: Calculus, atom: &CostAtom) -> bool {
    calculus.check(atom).is_ok() && calculus.belief(std::slice::from_ref(atom)).map_or(true, |b| b > 0.0)
}

/// Observations sorted canonically and checked against the theory.
fn resolve(theory: &CausalTheory, observations: &[Observation]) -> Result<Vec<(PortId, Observation)>, ExplainError> {
    let mut out = Vec::with_capacity(observations.len());
    for o in observations {
        let name: QualifiedName = o.port.parse().map_err(|_| ExplainError::UnknownPort(o.port.clone()))?;
        let pid = theory.model.port_id(&name).ok_or_else(|| ExplainError::UnknownPort(o.port.clone()))?;
        if !theory.model.is_observable(pid) {
            return Err(ExplainError::NotObservable(o.port.clone()));
        }
        out.push((pid, o.clone()));
    }
    out.sort_by(|a, b| (a.0, a.1.kind).cmp(&(b.0, b.1.kind)));
    out.dedup();
    let mut first: BTreeMap<PortId, i64> = BTreeMap::new();
    for (p, o) in &out {
        if let ObservationKind::FirstAbnormal(t) = o.kind {
            if first.insert(*p, t).is_some() {
                return Err(ExplainError::DuplicateAbnormal(o.port.clone()));
            }
        }
    }
    for (p, o) in &out {
        if let (ObservationKind::NormalThrough(t), Some(&f)) = (o.kind, first.get(p)) {
            if t >= f {
                return Err(ExplainError::NormalAfterAbnormal { port: o.port.clone(), first: f, through: t });
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Lit {
    Abnormal(PortId),
    Normal(PortId),
    Before(PortId),
}

/// Engine network for one observation set.
struct Network<'t> {
    theory: &'t CausalTheory,
    engine: Engine<Calculus>,
    nodes: HashMap<Lit, NodeId>,
    atoms: HashMap<Assumable, Option<(NodeId, AssumptionId)>>,
    back: HashMap<AssumptionId, Assumable>,
    pending: Vec<Lit>,
    /// When set, every other assumable is treated as unusable.
    allowed: Option<BTreeSet<Assumable>>,
    /// Recorded first-abnormal times. Paths through these ports start from
    /// the recorded onset instead of re-deriving it.
    onsets: HashMap<PortId, i64>,
    markers: HashMap<PortId, NodeId>,
    hidden: HashSet<AssumptionId>,
}

/// Variable keys of onset markers, clear of state ids.
const MARKER_BASE: u32 = 1 << 31;

impl<'t> Network<'t> {
    fn new(theory: &'t CausalTheory, calculus: Calculus) -> Self {
        Network {
            theory,
            engine: Engine::new(calculus),
            nodes: HashMap::new(),
            atoms: HashMap::new(),
            back: HashMap::new(),
            pending: Vec::new(),
            allowed: None,
            onsets: HashMap::new(),
            markers: HashMap::new(),
            hidden: HashSet::new(),
        }
    }

    /// Free timed assumption standing for the onset of an observed port.
    /// Its windows from every path meet the recorded time.
    fn marker(&mut self, p: PortId) -> Result<NodeId, ExplainError> {
        if let Some(&n) = self.markers.get(&p) {
            return Ok(n);
        }
        let atom = CostAtom { kind: AtomKind::Causation, belief: Belief::certain() };
        let (n, id) = self.engine.add_assumption(format!("onset:{}", self.theory.model.port(p).name), atom, Some(MARKER_BASE + p.0))?;
        self.hidden.insert(id);
        self.markers.insert(p, n);
        Ok(n)
    }

    /// Node for "`p` has become abnormal" as seen from downstream.
    fn upstream(&mut self, p: PortId) -> Result<NodeId, ExplainError> {
        if self.onsets.contains_key(&p) {
            self.marker(p)
        } else {
            Ok(self.node(Lit::Abnormal(p)))
        }
    }

    /// Network for the observations, with one anchor per observation and
    /// their conjunction as the returned top node.
    fn build(
        theory: &'t CausalTheory,
        resolved: &[(PortId, Observation)],
        calculus: Calculus,
        allowed: Option<BTreeSet<Assumable>>,
    ) -> Result<(Self, NodeId), ExplainError> {
        let mut net = Network::new(theory, calculus);
        net.allowed = allowed;
        for (p, o) in resolved {
            if let ObservationKind::FirstAbnormal(t) = o.kind {
                net.onsets.insert(*p, t);
            }
        }
        let mut anchors = Vec::new();
        for (i, (p, o)) in resolved.iter().enumerate() {
            let (lit, t) = match o.kind {
                ObservationKind::FirstAbnormal(t) => (Lit::Abnormal(*p), t),
                ObservationKind::NormalThrough(t) => (Lit::Normal(*p), t),
            };
            let mut ante = vec![net.node(lit)];
            if o.is_abnormal() {
                ante.push(net.marker(*p)?);
            }
            let anchor = net.engine.add_node(format!("obs{i}:{}", o.port));
            net.expand()?;
            net.justify(anchor, ante, vec![], vec![], Transfer::Anchor(t), None)?;
            anchors.push(anchor);
        }
        let top = match anchors.len() {
            0 => {
                let n = net.engine.add_node("true");
                net.justify(n, vec![], vec![], vec![], Transfer::Identity, None)?;
                n
            }
            _ => {
                let mut acc = anchors[0];
                for (k, &a) in anchors.iter().enumerate().skip(1) {
                    let n = net.engine.add_node(format!("and{k}"));
                    net.justify(n, vec![acc, a], vec![], vec![], Transfer::Identity, None)?;
                    acc = n;
                }
                acc
            }
        };
        Ok((net, top))
    }

    fn atom(&mut self, a: Assumable) -> Result<Option<(NodeId, AssumptionId)>, ExplainError> {
        if let Some(&r) = self.atoms.get(&a) {
            return Ok(r);
        }
        let atom = self.theory.atom(a);
        let allowed = self.allowed.as_ref().map_or(true, |s| s.contains(&a));
        let r = if allowed && usable(*self.engine.calculus(), &atom) {
            let var = match a {
                Assumable::Cause(c) => Some(self.theory.model.cause(c).state.0),
                _ => None,
            };
            let (n, id) = self.engine.add_assumption(self.theory.name_of(a), atom, var)?;
            // declare disjointness against every already-known partner
            for (x, y) in self.theory.disjoint_pairs() {
                let other = if x == a { y } else if y == a { x } else { continue };
                if let Some(Some((_, oid))) = self.atoms.get(&other) {
                    self.engine.declare_disjoint(id, *oid);
                }
            }
            self.back.insert(id, a);
            Some((n, id))
        } else {
            None
        };
        self.atoms.insert(a, r);
        Ok(r)
    }

    fn node(&mut self, lit: Lit) -> NodeId {
        if let Some(&n) = self.nodes.get(&lit) {
            return n;
        }
        let name = match lit {
            Lit::Abnormal(p) => format!("~{}", self.theory.model.port(p).name),
            Lit::Normal(p) => self.theory.model.port(p).name.to_string(),
            Lit::Before(p) => format!("~{}@before", self.theory.model.port(p).name),
        };
        let n = self.engine.add_node(name);
        self.nodes.insert(lit, n);
        self.pending.push(lit);
        n
    }

    fn event_atoms(&mut self, events: &[EventLit]) -> Result<Option<Vec<AssumptionId>>, ExplainError> {
        let mut out = Vec::new();
        for e in events {
            let a = match *e {
                EventLit::Holds(e) => Assumable::Event(e),
                EventLit::Fails(e) => Assumable::NotEvent(e),
            };
            match self.atom(a)? {
                Some((_, id)) => out.push(id),
                None => return Ok(None),
            }
        }
        Ok(Some(out))
    }

    /// Adds the justifications of every literal node created so far, and of
    /// the nodes those create in turn.
    fn expand(&mut self) -> Result<(), ExplainError> {
        while let Some(lit) = self.pending.pop() {
            let consequent = self.nodes[&lit];
            match lit {
                Lit::Before(p) => {
                    let ab = self.upstream(p)?;
                    self.justify(consequent, vec![ab], vec![], vec![], Transfer::Before, None)?;
                }
                Lit::Abnormal(p) | Lit::Normal(p) => {
                    let (rule, head) = match lit {
                        Lit::Abnormal(_) => (self.theory.abnormal_rule(p), p.0 * 2),
                        _ => (self.theory.normal_rule(p), p.0 * 2 + 1),
                    };
                    'terms: for term in &rule.terms {
                        let mut antecedents = Vec::new();
                        for l in &term.abnormal {
                            match (*l, rule.kind) {
                                (AbnormalLit::Port(q), RuleKind::AbnormalCovering) => antecedents.push(self.upstream(q)?),
                                (AbnormalLit::Port(q), RuleKind::NormalComplement) => antecedents.push(self.node(Lit::Before(q))),
                                (AbnormalLit::Fault(c), _) => match self.atom(Assumable::Cause(c))? {
                                    Some((n, _)) => antecedents.push(n),
                                    None => continue 'terms,
                                },
                            }
                        }
                        for &q in &term.normal_ports {
                            antecedents.push(self.node(Lit::Normal(q)));
                        }
                        let Some(events) = self.event_atoms(&term.events)? else { continue };
                        let normals = term.normal_states.iter().map(|s| s.0).collect();
                        let transfer = match term.delay {
                            Some(d) if rule.kind == RuleKind::AbnormalCovering => Transfer::Delay(d),
                            _ => Transfer::Identity,
                        };
                        let trace = Some(PathTag { head, path: term.path.0 });
                        self.justify(consequent, antecedents, events, normals, transfer, trace)?;
                    }
                }
            }
        }
        Ok(())
    }

    fn justify(
        &mut self,
        consequent: NodeId,
        antecedents: Vec<NodeId>,
        events: Vec<AssumptionId>,
        normals: Vec<u32>,
        transfer: Transfer,
        trace: Option<PathTag>,
    ) -> Result<(), ExplainError> {
        self.engine.add_justification(Justification { consequent, antecedents, events, normals, transfer, trace })?;
        Ok(())
    }

    fn explanation(&self, env: &Environment) -> Explanation {
        let theory = self.theory;
        let visible = || env.assumptions.iter().filter(|a| !self.hidden.contains(a));
        let assumptions: BTreeSet<Assumable> = visible().map(|a| self.back[a]).collect();
        let mut causes = Vec::new();
        let mut events = Vec::new();
        for (id, a) in visible().map(|id| (*id, self.back[id])) {
            match a {
                Assumable::Cause(c) => {
                    let cv = theory.model.cause(c);
                    causes.push(CauseWindow {
                        cause: c,
                        var: theory.model.state(cv.state).name.to_string(),
                        mode: cv.mode.clone(),
                        interval: env.window(id).unwrap_or_else(Interval::all),
                    });
                }
                _ => events.push(a),
            }
        }
        causes.sort_by_key(|c| c.cause);
        events.sort();
        let normals = env
            .during
            .iter()
            .map(|(v, i)| NormalRequirement { state: StateId(*v), var: theory.model.state(StateId(*v)).name.to_string(), interval: *i })
            .collect();
        let atoms: Vec<CostAtom> = assumptions.iter().map(|a| theory.atom(*a)).collect();
        Explanation {
            assumptions,
            causes,
            normals,
            events,
            cost: env.cost,
            belief: self.engine.calculus().belief(&atoms),
            paths: env.paths.iter().map(|t| PathId(t.path)).collect::<BTreeSet<_>>().into_iter().collect(),
            substituted: Vec::new(),
        }
    }
}

/// Incremental diagnosis of one observation set: the bound can be raised
/// and only the newly admitted explanations are returned.
pub struct Diagnosis<'t> {
    net: Network<'t>,
    top: NodeId,
    observations: Vec<Observation>,
    bound: Option<Cost>,
}

impl<'t> Diagnosis<'t> {
    pub fn new(theory: &'t CausalTheory, observations: &[Observation], calculus: Calculus) -> Result<Self, ExplainError> {
        let resolved = resolve(theory, observations)?;
        let (net, top) = Network::build(theory, &resolved, calculus, None)?;
        Ok(Diagnosis { net, top, observations: resolved.into_iter().map(|(_, o)| o).collect(), bound: None })
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    /// All explanations with cost ≤ `bound`, cost-ordered.
    pub fn explanations(&mut self, bound: Cost) -> ExplanationSet {
        let envs = self.net.engine.query_label(self.top, bound);
        let mut explanations: Vec<Explanation> = envs.iter().map(|e| self.net.explanation(e)).collect();
        sort_explanations(&mut explanations);
        ExplanationSet { explanations, bound, observations: self.observations.clone() }
    }

    /// Explanations admitted since the previous raise.
    pub fn raise_bound(&mut self, bound: Cost) -> Result<Vec<Explanation>, ExplainError> {
        let delta = self.net.engine.raise_bound(self.top, bound)?;
        self.bound = Some(bound);
        let mut out: Vec<Explanation> = delta.iter().map(|e| self.net.explanation(e)).collect();
        sort_explanations(&mut out);
        Ok(out)
    }

    pub fn bound(&self) -> Option<Cost> {
        self.bound
    }

    /// Agenda items processed so far.
    pub fn work(&self) -> u64 {
        self.net.engine.work()
    }
}

pub fn explain_symptom(theory: &CausalTheory, obs: &Observation, calculus: Calculus, bound: Cost) -> Result<ExplanationSet, ExplainError> {
    correlate(theory, std::slice::from_ref(obs), calculus, bound)
}

/// Explanations covering every observation at once.
pub fn correlate(theory: &CausalTheory, observations: &[Observation], calculus: Calculus, bound: Cost) -> Result<ExplanationSet, ExplainError> {
    Ok(Diagnosis::new(theory, observations, calculus)?.explanations(bound))
}

/// Adds, for every explanation relying on a link working and its alpha
/// holding, the variants in which the link itself has failed instead.
///
/// A variant keeps every other assumption of the original. It is kept only
/// when the observations can be derived from its assumptions with the new
/// fault actually used; the fault window comes from that derivation.
pub fn expand_link_faults(eset: &ExplanationSet, theory: &CausalTheory, calculus: Calculus, bound: Cost) -> ExplanationSet {
    let mut out: Vec<Explanation> = eset.explanations.clone();
    let Ok(resolved) = resolve(theory, &eset.observations) else {
        return eset.clone();
    };
    for e in &eset.explanations {
        let normals: BTreeSet<StateId> = e.normals.iter().map(|n| n.state).collect();
        let mut candidates: BTreeMap<StateId, Vec<Assumable>> = BTreeMap::new();
        for l in &theory.links {
            let a = Assumable::Event(l.alpha);
            // a state whose fault is already assumed (after its working
            // prefix) has nothing to substitute
            let faulted = theory.model.state(l.state).causes.iter().any(|c| e.assumptions.contains(&Assumable::Cause(*c)));
            if normals.contains(&l.state) && e.assumptions.contains(&a) && !faulted {
                candidates.entry(l.state).or_default().push(a);
            }
        }
        let states: Vec<(StateId, Vec<Assumable>)> = candidates.into_iter().collect();
        if states.is_empty() || states.len() > 16 {
            continue;
        }
        for mask in 1u32..(1 << states.len()) {
            let chosen: Vec<&(StateId, Vec<Assumable>)> =
                states.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, s)| s).collect();
            // one variant per combination of fault modes
            let mut variants: Vec<Vec<CauseId>> = vec![vec![]];
            for (s, _) in &chosen {
                let modes = &theory.model.state(*s).causes;
                variants = variants.into_iter().flat_map(|v| modes.iter().map(move |m| [v.clone(), vec![*m]].concat())).collect();
            }
            for faults in variants {
                let Some(x) = substitute(theory, &resolved, calculus, e, &chosen, &faults) else { continue };
                if x.cost > bound {
                    continue;
                }
                // a substitution may coincide with an explanation already listed
                match out.iter_mut().find(|o| o.assumptions == x.assumptions && o.causes == x.causes && o.normals == x.normals) {
                    Some(o) => {
                        o.substituted.extend(x.substituted);
                        o.substituted.sort();
                        o.substituted.dedup();
                    }
                    None => out.push(x),
                }
            }
        }
    }
    sort_explanations(&mut out);
    ExplanationSet { explanations: out, bound: eset.bound, observations: eset.observations.clone() }
}

fn substitute(
    theory: &CausalTheory,
    resolved: &[(PortId, Observation)],
    calculus: Calculus,
    e: &Explanation,
    chosen: &[&(StateId, Vec<Assumable>)],
    faults: &[CauseId],
) -> Option<Explanation> {
    let mut set = e.assumptions.clone();
    for (_, alphas) in chosen {
        for a in alphas {
            set.remove(a);
        }
    }
    for &c in faults {
        if !usable(calculus, &theory.atom(Assumable::Cause(c))) {
            return None;
        }
        set.insert(Assumable::Cause(c));
    }
    // a derivation inside the new set that uses every substituted fault;
    // the largest such one decides the windows
    let (mut net, top) = Network::build(theory, resolved, calculus, Some(set.clone())).ok()?;
    let label = net.engine.query_label(top, Cost::INFINITY);
    let witness = label
        .iter()
        .map(|env| net.explanation(env))
        .filter(|w| faults.iter().all(|c| w.assumptions.contains(&Assumable::Cause(*c))))
        .max_by_key(|w| w.assumptions.len())?;
    let mut x = witness;
    for cw in &e.causes {
        if set.contains(&Assumable::Cause(cw.cause)) && x.window(cw.cause).is_none() {
            x.causes.push(cw.clone());
        }
    }
    x.causes.sort_by_key(|c| c.cause);
    x.events = set.iter().copied().filter(|a| !matches!(a, Assumable::Cause(_))).collect();
    x.assumptions = set;
    x.substituted = faults.to_vec();
    x.substituted.sort();
    let atoms: Vec<CostAtom> = x.assumptions.iter().map(|a| theory.atom(*a)).collect();
    x.cost = calculus.evaluate(&atoms);
    x.belief = calculus.belief(&atoms);
    Some(x)
}

/// Re-prices explanations under `calculus` and orders them: ascending cost,
/// ties by assumption ids.
pub fn rank(eset: &ExplanationSet, theory: &CausalTheory, calculus: Calculus) -> Vec<Explanation> {
    let mut out: Vec<Explanation> = eset
        .explanations
        .iter()
        .map(|e| {
            let atoms: Vec<CostAtom> = e.assumptions.iter().map(|a| theory.atom(*a)).collect();
            Explanation { cost: calculus.evaluate(&atoms), belief: calculus.belief(&atoms), ..e.clone() }
        })
        .collect();
    sort_explanations(&mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculi::Belief;
    use crate::model::*;
    use crate::temporal::{Delay, TimePoint};
    use crate::theory::compile;

    fn state(name: &str, p: f64) -> StateVarDef {
        StateVarDef { name: name.into(), fault_modes: vec!["failed".into()], belief: Belief::both(p, 1.0 - p), environmental: false, line: 0 }
    }

    fn link(input: Option<&str>, output: &str, cause: &str, alpha: Belief, delay: Delay) -> Behaviour {
        Behaviour {
            template: TemplateSpec::Link(LinkSpec {
                input: input.map(Into::into),
                output: output.into(),
                cause: cause.into(),
                alpha,
                delay,
                fault_delay: Delay::ZERO,
            }),
            line: 0,
        }
    }

    fn unit(name: &str, p: f64, input: bool, alpha: Belief, delay: Delay) -> UnitDef {
        UnitDef {
            name: name.into(),
            states: vec![state("self", p)],
            in_ports: if input { vec![PortDef::binary("i")] } else { vec![] },
            out_ports: vec![PortDef::binary("o")],
            behaviours: vec![link(input.then_some("i"), "o", "self", alpha, delay)],
            line: 0,
        }
    }

    /// src --[2,4] α1--> l1 --[1,1] α2--> l2.o
    fn chain() -> CausalTheory {
        let inst = |n: &str, u: &str| InstanceDef { name: n.into(), unit: u.into(), line: 0 };
        let wire = |a: &str, b: &str| Connection { from: a.parse().unwrap(), to: b.parse().unwrap(), line: 0 };
        let def = ModelDef {
            name: "chain".into(),
            time_unit: "tick".into(),
            units: vec![
                unit("Src", 0.01, false, Belief::certain(), Delay::ZERO),
                unit("L1", 0.001, true, Belief::both(0.9, 0.9), Delay::fixed(2, 4)),
                unit("L2", 0.001, true, Belief::both(0.8, 0.8), Delay::fixed(1, 1)),
            ],
            instances: vec![inst("src", "Src"), inst("l1", "L1"), inst("l2", "L2")],
            connections: vec![wire("src.o", "l1.i"), wire("l1.o", "l2.i")],
            observables: vec![Observable { port: "l2.o".parse().unwrap(), line: 0 }],
        };
        compile(&ground(&def).unwrap()).unwrap()
    }

    #[test]
    fn chain_back_projects_twice() {
        let th = chain();
        let set = explain_symptom(&th, &Observation::abnormal("l2.o", 10), Calculus::Probabilistic, Cost::INFINITY).unwrap();
        let a = th.model.cause_by_label("src.self=failed").unwrap();
        let e = set.iter().find(|e| e.cause_ids() == [a].into_iter().collect()).expect("source explanation");
        assert_eq!(e.window(a), Some(Interval::closed(5, 7)));
        assert!((e.belief.unwrap() - 0.0072).abs() < 1e-15);
        let normals: Vec<&str> = e.normals.iter().map(|n| n.var.as_str()).collect();
        assert_eq!(normals, ["l1.self", "l2.self"]);
        assert!(e.normals.iter().all(|n| n.interval == Interval::prefix(TimePoint::At(10), true)));
        assert_eq!(e.events.len(), 2);
        // the two link faults explain it too
        assert_eq!(set.len(), 3);
        assert!(set.explanations.windows(2).all(|w| w[0].cost <= w[1].cost));
    }

    #[test]
    fn unknown_and_unobservable_ports() {
        let th = chain();
        let c = Calculus::Probabilistic;
        assert!(matches!(explain_symptom(&th, &Observation::abnormal("l2.q", 1), c, Cost::INFINITY), Err(ExplainError::UnknownPort(_))));
        assert!(matches!(explain_symptom(&th, &Observation::abnormal("l1.o", 1), c, Cost::INFINITY), Err(ExplainError::NotObservable(_))));
        let two = [Observation::abnormal("l2.o", 1), Observation::abnormal("l2.o", 2)];
        assert!(matches!(correlate(&th, &two, c, Cost::INFINITY), Err(ExplainError::DuplicateAbnormal(_))));
    }

    #[test]
    fn link_fault_substitution() {
        let th = chain();
        let c = Calculus::Probabilistic;
        let set = explain_symptom(&th, &Observation::abnormal("l2.o", 10), c, Cost::INFINITY).unwrap();
        let a = th.model.cause_by_label("src.self=failed").unwrap();
        let orig = set.iter().find(|e| e.cause_ids() == [a].into_iter().collect()).unwrap().clone();
        let one = ExplanationSet { explanations: vec![orig.clone()], ..set.clone() };
        let x = expand_link_faults(&one, &th, c, Cost::INFINITY);
        // both links failing at once never needs both faults
        assert_eq!(x.len(), 3);
        let l1 = th.model.cause_by_label("l1.self=failed").unwrap();
        let l2 = th.model.cause_by_label("l2.self=failed").unwrap();
        for e in x.iter().filter(|e| !e.substituted.is_empty()) {
            assert!(e.cost > orig.cost);
            assert!(e.assumptions.contains(&Assumable::Cause(a)));
            assert_eq!(e.window(a), Some(Interval::closed(5, 7)));
        }
        let sub = |c| x.iter().find(|e| e.substituted == [c]).unwrap();
        assert_eq!(sub(l1).window(l1), Some(Interval::point(9)));
        assert_eq!(sub(l2).window(l2), Some(Interval::point(10)));
    }

    #[test]
    fn paths_through_observed_ports_start_at_the_recorded_onset() {
        let text = "model m timeunit ticks
unit S { state self modes(failed) prior 0.01 necessity 0.5
  out o
  link out=o cause=self }
unit L { state self modes(failed) prior 0.01 necessity 0.5
  in i
  out o
  link in=i out=o cause=self alpha(p=0.9,n=0.9) delay=[0,5] }
instance s : S
instance a : L
instance b : L
connect s.o -> a.i
connect a.o -> b.i
observe a.o
observe b.o
";
        let th = compile(&ground(&crate::cli::parse_model(text, None).unwrap()).unwrap()).unwrap();
        let src = th.model.cause_by_label("s.self=failed").unwrap();
        // b.o at 9 would need a.o in [4,9]; a.o was first abnormal at 2
        let obs = [Observation::abnormal("a.o", 2), Observation::abnormal("b.o", 9)];
        let set = correlate(&th, &obs, Calculus::Probabilistic, Cost::INFINITY).unwrap();
        assert!(!set.is_empty());
        assert!(set.iter().all(|e| e.cause_ids() != [src].into_iter().collect()));
        let near = [Observation::abnormal("a.o", 2), Observation::abnormal("b.o", 6)];
        let set = correlate(&th, &near, Calculus::Probabilistic, Cost::INFINITY).unwrap();
        let e = set.iter().find(|e| e.cause_ids() == [src].into_iter().collect()).unwrap();
        assert_eq!(e.window(src), Some(Interval::closed(-3, 2)));
    }

    #[test]
    fn all_normal_world_for_normal_observations() {
        let th = chain();
        let set = correlate(&th, &[Observation::normal_through("l2.o", 50)], Calculus::Probabilistic, Cost::INFINITY).unwrap();
        assert_eq!(set.explanations[0].cost, Cost::ZERO);
        assert!(set.explanations[0].causes.is_empty());
        let none = correlate(&th, &[], Calculus::Cardinality, Cost::INFINITY).unwrap();
        assert_eq!(none.len(), 1);
    }
}
