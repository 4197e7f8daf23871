//! Cost-bounded assumption-based label propagation.
//!
//! Nodes hold labels: the minimal consistent environments (assumption sets
//! with temporal constraints) under which the node holds. Environments are
//! produced best-first from one global agenda ordered by cost; candidates
//! above the requested bound stay queued until the bound is raised.
//!
//! Temporal frames: below an anchor, every event occurrence is an offset
//! interval relative to the event time of the node that holds the
//! environment. Occurrences of the same cause reached along different
//! branches are kept apart and only intersected once the environment is
//! anchored to an absolute observation time; this matches evaluating every
//! branch top-down from the observation.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap, HashSet};

use thiserror::Error;

use crate::calculi::{Calculus, Cost, CostAtom, CostError, CostFunction};
use crate::temporal::{intersect_exists, merge_during, refine_exists_against_during, Delay, Interval, TimePoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AssumptionId(pub u32);

/// A variable that environments may require to hold its normal value.
pub type VarKey = u32;

/// Marks which term of which rule head a justification instantiates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PathTag {
    pub head: u32,
    pub path: u32,
}

#[derive(Debug, Clone)]
pub struct Assumption {
    pub name: String,
    pub atom: CostAtom,
    /// Variable whose single change this assumption asserts. Carries an
    /// event time when present.
    pub var: Option<VarKey>,
    pub node: NodeId,
}

/// How antecedent frames map into the consequent frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transfer {
    Identity,
    /// The consequent event follows the antecedent events by this delay.
    Delay(Delay),
    /// The antecedent event happened at some time strictly before the
    /// consequent's reference instant.
    Before,
    /// Fix the reference instant at an absolute time. Pending normal
    /// requirements become `During (-inf, t)` and the per-symptom path scope
    /// closes.
    Anchor(i64),
}

#[derive(Debug, Clone)]
pub struct Justification {
    pub consequent: NodeId,
    pub antecedents: Vec<NodeId>,
    /// Causation events added to every resulting environment.
    pub events: Vec<AssumptionId>,
    /// Variables required normal up to the (future) anchor time.
    pub normals: Vec<VarKey>,
    pub transfer: Transfer,
    pub trace: Option<PathTag>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub assumptions: BTreeSet<AssumptionId>,
    /// Event time windows per timed assumption. In an anchored environment
    /// each list holds exactly one absolute interval.
    pub occurrences: BTreeMap<AssumptionId, Vec<Interval>>,
    pub pending_normals: BTreeSet<VarKey>,
    pub during: BTreeMap<VarKey, Interval>,
    /// Rule-head → chosen term for the symptom currently being derived,
    /// sorted by head.
    pub scope: Vec<(u32, u32)>,
    /// Sorted, without duplicates.
    pub paths: Vec<PathTag>,
    pub anchored: bool,
    pub cost: Cost,
}

impl Environment {
    fn empty(cost: Cost) -> Self {
        Environment {
            assumptions: BTreeSet::new(),
            occurrences: BTreeMap::new(),
            pending_normals: BTreeSet::new(),
            during: BTreeMap::new(),
            scope: Vec::new(),
            paths: Vec::new(),
            anchored: false,
            cost,
        }
    }

    /// Collapsed event window of an assumption in an anchored environment.
    pub fn window(&self, a: AssumptionId) -> Option<Interval> {
        let occ = self.occurrences.get(&a)?;
        occ.iter().try_fold(Interval::all(), |acc, i| intersect_exists(&acc, i))
    }

    fn key(&self) -> Vec<u32> {
        self.assumptions.iter().map(|a| a.0).collect()
    }

    /// `self` makes `other` redundant: fewer assumptions and requirements,
    /// and looser event windows under every future frame change.
    pub fn subsumes(&self, other: &Environment) -> bool {
        // cheap rejections before the subset walks
        if self.assumptions.len() > other.assumptions.len()
            || self.pending_normals.len() > other.pending_normals.len()
            || self.scope.len() > other.scope.len()
            || matches!((self.assumptions.first(), other.assumptions.first()), (Some(a), Some(b)) if a < b)
            || matches!((self.assumptions.last(), other.assumptions.last()), (Some(a), Some(b)) if a > b)
        {
            return false;
        }
        if !self.assumptions.is_subset(&other.assumptions) || !self.pending_normals.is_subset(&other.pending_normals) {
            return false;
        }
        let mut theirs = other.scope.iter().peekable();
        for entry in &self.scope {
            while theirs.next_if(|o| o.0 < entry.0).is_some() {}
            if theirs.next() != Some(entry) {
                return false;
            }
        }
        for (v, mine) in &self.during {
            match other.during.get(v) {
                Some(theirs) if mine.is_subset_of(theirs) => {}
                _ => return false,
            }
        }
        for (a, mine) in &self.occurrences {
            let Some(theirs) = other.occurrences.get(a) else { return false };
            if !mine.iter().all(|o1| theirs.iter().any(|o2| o2.is_subset_of(o1))) {
                return false;
            }
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("assumption `{0}` already exists")]
    DuplicateAssumption(String),
    #[error("assumption `{name}` cannot be priced: {source}")]
    Unpriced { name: String, source: CostError },
    #[error("unknown node {0:?}")]
    UnknownNode(NodeId),
    #[error("unknown assumption {0:?}")]
    UnknownAssumption(AssumptionId),
    #[error("justification for node {0:?} would create a cycle")]
    Cycle(NodeId),
    #[error("bound {new} is below the current bound {current} of node {node:?}")]
    LowerBound { node: NodeId, current: f64, new: f64 },
}

#[derive(Debug)]
struct NodeData {
    name: String,
    label: Vec<Environment>,
    consumers: Vec<usize>,
    producers: Vec<usize>,
    emitted: Option<Cost>,
}

#[derive(Debug)]
struct Candidate {
    cost: Cost,
    size: usize,
    key: Vec<u32>,
    seq: u64,
    node: NodeId,
    env: Environment,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.cost, self.size, &self.key, self.seq).cmp(&(other.cost, other.size, &other.key, other.seq))
    }
}

fn label_order(a: &Environment, b: &Environment) -> Ordering {
    a.cost.cmp(&b.cost).then_with(|| a.assumptions.iter().cmp(b.assumptions.iter()))
}

/// Merges two head-sorted scopes; `None` when they pick different terms
/// for one head.
fn merge_scope(a: &[(u32, u32)], b: &[(u32, u32)]) -> Option<Vec<(u32, u32)>> {
    if a.is_empty() {
        return Some(b.to_vec());
    }
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            Ordering::Equal => {
                if a[i].1 != b[j].1 {
                    return None;
                }
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    Some(out)
}

fn merge_paths(a: &[PathTag], b: &[PathTag]) -> Vec<PathTag> {
    if a.is_empty() {
        return b.to_vec();
    }
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

fn normalize(list: &mut Vec<Interval>) {
    list.sort_by_key(|i| (i.lo, i.hi, i.lo_open, i.hi_open));
    list.dedup();
}

pub struct Engine<C: CostFunction = Calculus> {
    calculus: C,
    nodes: Vec<NodeData>,
    assumptions: Vec<Assumption>,
    names: HashMap<String, AssumptionId>,
    justifications: Vec<Justification>,
    disjoint: HashMap<AssumptionId, Vec<AssumptionId>>,
    agenda: BinaryHeap<Reverse<Candidate>>,
    seq: u64,
    popped: u64,
    admitted: Vec<(NodeId, Cost)>,
}

impl<C: CostFunction> Engine<C> {
    pub fn new(calculus: C) -> Self {
        Engine {
            calculus,
            nodes: Vec::new(),
            assumptions: Vec::new(),
            names: HashMap::new(),
            justifications: Vec::new(),
            disjoint: HashMap::new(),
            agenda: BinaryHeap::new(),
            seq: 0,
            popped: 0,
            admitted: Vec::new(),
        }
    }

    pub fn calculus(&self) -> &C {
        &self.calculus
    }

    pub fn assumption(&self, id: AssumptionId) -> &Assumption {
        &self.assumptions[id.0 as usize]
    }

    pub fn assumption_by_name(&self, name: &str) -> Option<AssumptionId> {
        self.names.get(name).copied()
    }

    pub fn node_name(&self, n: NodeId) -> &str {
        &self.nodes[n.0 as usize].name
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Number of candidates taken off the agenda so far.
    pub fn work(&self) -> u64 {
        self.popped
    }

    /// Every label admission so far, in order, with its cost.
    pub fn admissions(&self) -> &[(NodeId, Cost)] {
        &self.admitted
    }

    pub fn add_node(&mut self, name: impl Into<String>) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(NodeData { name: name.into(), label: Vec::new(), consumers: Vec::new(), producers: Vec::new(), emitted: None });
        id
    }

    /// Creates an assumption and the node it labels: `{id}` alone.
    pub fn add_assumption(&mut self, name: impl Into<String>, atom: CostAtom, var: Option<VarKey>) -> Result<(NodeId, AssumptionId), EngineError> {
        let name = name.into();
        if self.names.contains_key(&name) {
            return Err(EngineError::DuplicateAssumption(name));
        }
        self.calculus.check(&atom).map_err(|source| EngineError::Unpriced { name: name.clone(), source })?;
        let node = self.add_node(name.clone());
        let id = AssumptionId(self.assumptions.len() as u32);
        self.assumptions.push(Assumption { name: name.clone(), atom, var, node });
        self.names.insert(name, id);
        let mut env = Environment::empty(self.calculus.evaluate(&[atom]));
        env.assumptions.insert(id);
        if var.is_some() {
            env.occurrences.insert(id, vec![Interval::point(0)]);
        }
        self.push(node, env);
        Ok((node, id))
    }

    pub fn declare_disjoint(&mut self, a: AssumptionId, b: AssumptionId) {
        self.disjoint.entry(a).or_default().push(b);
        self.disjoint.entry(b).or_default().push(a);
    }

    fn reaches_upward(&self, from: NodeId, target: NodeId) -> bool {
        let mut stack = vec![from];
        let mut seen = HashSet::new();
        while let Some(n) = stack.pop() {
            if n == target {
                return true;
            }
            if !seen.insert(n) {
                continue;
            }
            for &j in &self.nodes[n.0 as usize].producers {
                stack.extend(self.justifications[j].antecedents.iter().copied());
            }
        }
        false
    }

    pub fn add_justification(&mut self, j: Justification) -> Result<(), EngineError> {
        for &n in j.antecedents.iter().chain(std::iter::once(&j.consequent)) {
            if n.0 as usize >= self.nodes.len() {
                return Err(EngineError::UnknownNode(n));
            }
        }
        for &e in &j.events {
            if e.0 as usize >= self.assumptions.len() {
                return Err(EngineError::UnknownAssumption(e));
            }
        }
        if j.antecedents.iter().any(|&a| self.reaches_upward(a, j.consequent)) {
            return Err(EngineError::Cycle(j.consequent));
        }
        let idx = self.justifications.len();
        let mut seen = BTreeSet::new();
        for &a in &j.antecedents {
            if seen.insert(a) {
                self.nodes[a.0 as usize].consumers.push(idx);
            }
        }
        self.nodes[j.consequent.0 as usize].producers.push(idx);
        self.justifications.push(j);

        self.fire(idx, None);
        Ok(())
    }

    fn push(&mut self, node: NodeId, env: Environment) {
        self.seq += 1;
        self.agenda.push(Reverse(Candidate {
            cost: env.cost,
            size: env.assumptions.len(),
            key: env.key(),
            seq: self.seq,
            node,
            env,
        }));
    }

    /// Pushes the combination of every choice of one environment per
    /// antecedent. `fresh` pins one antecedent to a newly admitted
    /// environment so each combination is generated exactly once.
    fn fire(&mut self, j: usize, fresh: Option<(NodeId, &Environment)>) {
        let just = &self.justifications[j];
        let choices: Vec<&[Environment]> = just
            .antecedents
            .iter()
            .map(|a| match fresh {
                Some((n, e)) if n == *a => std::slice::from_ref(e),
                _ => self.nodes[a.0 as usize].label.as_slice(),
            })
            .collect();
        if choices.iter().any(|c| c.is_empty()) {
            return;
        }
        let mut out = Vec::new();
        let mut index = vec![0usize; choices.len()];
        'outer: loop {
            let picked: Vec<&Environment> = index.iter().zip(&choices).map(|(&i, c)| &c[i]).collect();
            if let Some(env) = self.combine(just, &picked) {
                out.push(env);
            }
            // odometer
            let mut k = 0;
            loop {
                if k == index.len() {
                    break 'outer;
                }
                index[k] += 1;
                if index[k] < choices[k].len() {
                    break;
                }
                index[k] = 0;
                k += 1;
            }
        }
        let node = just.consequent;
        for env in out {
            self.push(node, env);
        }
    }

    fn combine(&self, j: &Justification, picked: &[&Environment]) -> Option<Environment> {
        let mut out = Environment::empty(Cost::ZERO);
        let offset = match j.transfer {
            Transfer::Identity => None,
            Transfer::Delay(d) => Some(d.backward_offset()),
            Transfer::Before => Some(Interval::new(TimePoint::NegInf, TimePoint::At(0), true, true)),
            Transfer::Anchor(t) => Some(Interval::point(t)),
        };
        for env in picked {
            out.assumptions.extend(env.assumptions.iter().copied());
            for (a, occ) in &env.occurrences {
                let slot = out.occurrences.entry(*a).or_default();
                slot.extend(occ.iter().map(|i| offset.map_or(*i, |o| i.shift(&o))));
            }
            out.pending_normals.extend(env.pending_normals.iter().copied());
            for (v, p) in &env.during {
                let merged = match out.during.get(v) {
                    Some(q) => merge_during(q, p).ok()?,
                    None => *p,
                };
                out.during.insert(*v, merged);
            }
            out.scope = merge_scope(&out.scope, &env.scope)?;
            out.paths = merge_paths(&out.paths, &env.paths);
            out.anchored |= env.anchored;
        }
        out.assumptions.extend(j.events.iter().copied());
        out.pending_normals.extend(j.normals.iter().copied());
        if let Some(tag) = j.trace {
            match out.scope.binary_search_by_key(&tag.head, |e| e.0) {
                Ok(k) if out.scope[k].1 != tag.path => return None,
                Ok(_) => {}
                Err(k) => out.scope.insert(k, (tag.head, tag.path)),
            }
            if let Err(k) = out.paths.binary_search(&tag) {
                out.paths.insert(k, tag);
            }
        }
        if let Transfer::Anchor(t) = j.transfer {
            out.anchored = true;
            out.scope.clear();
            let prefix = Interval::prefix(TimePoint::At(t), true);
            for v in std::mem::take(&mut out.pending_normals) {
                let merged = match out.during.get(&v) {
                    Some(q) => merge_during(q, &prefix).ok()?,
                    None => prefix,
                };
                out.during.insert(v, merged);
            }
        }

        // declared-disjoint pairs
        if !self.disjoint.is_empty() {
            for a in &out.assumptions {
                if let Some(partners) = self.disjoint.get(a) {
                    if partners.iter().any(|b| out.assumptions.contains(b)) {
                        return None;
                    }
                }
            }
        }

        if out.anchored {
            for (a, occ) in out.occurrences.iter_mut() {
                let mut w = occ.iter().try_fold(Interval::all(), |acc, i| intersect_exists(&acc, i))?;
                if let Some(v) = self.assumptions[a.0 as usize].var {
                    if let Some(p) = out.during.get(&v) {
                        w = refine_exists_against_during(&w, p)?;
                    }
                }
                *occ = vec![w];
            }
        } else {
            for occ in out.occurrences.values_mut() {
                normalize(occ);
            }
        }

        let atoms: Vec<CostAtom> = out.assumptions.iter().map(|a| self.assumptions[a.0 as usize].atom).collect();
        out.cost = self.calculus.evaluate(&atoms);
        Some(out)
    }

    fn admit(&mut self, node: NodeId, env: Environment) {
        let data = &mut self.nodes[node.0 as usize];
        if data.label.iter().any(|e| e.subsumes(&env)) {
            return;
        }
        data.label.retain(|e| !env.subsumes(e));
        let pos = data.label.partition_point(|e| label_order(e, &env) != Ordering::Greater);
        data.label.insert(pos, env.clone());
        self.admitted.push((node, env.cost));

        for k in 0..self.nodes[node.0 as usize].consumers.len() {
            let j = self.nodes[node.0 as usize].consumers[k];
            self.fire(j, Some((node, &env)));
        }
    }

    /// Processes every queued candidate whose cost is within `bound`.
    fn extend(&mut self, bound: Cost) {
        while let Some(Reverse(top)) = self.agenda.peek() {
            if top.cost > bound {
                break;
            }
            let Reverse(c) = self.agenda.pop().expect("peeked");
            self.popped += 1;
            self.admit(c.node, c.env);
        }
    }

    /// Minimal consistent environments of `node` with cost ≤ `bound`,
    /// ascending by cost, ties by assumption ids.
    pub fn query_label(&mut self, node: NodeId, bound: Cost) -> Vec<Environment> {
        self.extend(bound);
        self.nodes[node.0 as usize].label.iter().take_while(|e| e.cost <= bound).cloned().collect()
    }

    /// Raises the bound of one node and returns only the newly admitted
    /// environments.
    pub fn raise_bound(&mut self, node: NodeId, new_bound: Cost) -> Result<Vec<Environment>, EngineError> {
        let current = self.nodes[node.0 as usize].emitted;
        if let Some(cur) = current {
            if new_bound < cur {
                return Err(EngineError::LowerBound { node, current: cur.0, new: new_bound.0 });
            }
        }
        let all = self.query_label(node, new_bound);
        self.nodes[node.0 as usize].emitted = Some(new_bound);
        Ok(all.into_iter().filter(|e| current.map_or(true, |c| e.cost > c)).collect())
    }

    /// Bound last passed to `raise_bound` for this node.
    pub fn bound(&self, node: NodeId) -> Option<Cost> {
        self.nodes[node.0 as usize].emitted
    }
}
