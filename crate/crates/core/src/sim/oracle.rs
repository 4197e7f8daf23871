//! Exhaustive reference explanations for small theories.
//!
//! Independent of the label engine: a backtracking solver expands every
//! observation top-down through the rules with absolute windows, the
//! per-observation derivations are combined by brute force, and minimality
//! is decided by scanning sub-masks of every candidate's assumption set.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::calculi::{Calculus, Cost};
use crate::explain::{CauseWindow, Explanation, ExplanationSet, NormalRequirement, Observation, ObservationKind};
use crate::model::{CauseId, PortId, QualifiedName, StateId};
use crate::temporal::{Interval, TimePoint};
use crate::theory::{AbnormalLit, Assumable, CausalTheory, EventLit, PathId};

pub const MAX_ASSUMABLES: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("{0} assumables exceed the exhaustive limit of {MAX_ASSUMABLES}")]
    TooLarge(usize),
    #[error("unknown or unobservable port `{0}`")]
    BadPort(String),
}

/// Window over integer ticks; `None` ends are infinite. The flag marks an
/// open end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct W {
    lo: Option<(i64, bool)>,
    hi: Option<(i64, bool)>,
}

impl W {
    fn point(t: i64) -> W {
        W { lo: Some((t, false)), hi: Some((t, false)) }
    }

    fn before(t: i64) -> W {
        W { lo: None, hi: Some((t, true)) }
    }

    fn plus(self, o: W) -> W {
        let add = |a: Option<(i64, bool)>, b: Option<(i64, bool)>| match (a, b) {
            (Some((x, p)), Some((y, q))) => Some((x + y, p || q)),
            _ => None,
        };
        W { lo: add(self.lo, o.lo), hi: add(self.hi, o.hi) }
    }

    fn meet(self, o: W) -> W {
        let lo = match (self.lo, o.lo) {
            (None, x) | (x, None) => x,
            (Some(a), Some(b)) => Some(a.max(b)),
        };
        // at equal values an open upper end is the tighter one
        let hi = match (self.hi, o.hi) {
            (None, x) | (x, None) => x,
            (Some(a), Some(b)) => Some(if (a.0, !a.1) <= (b.0, !b.1) { a } else { b }),
        };
        W { lo, hi }
    }

    fn first(self) -> Option<i64> {
        self.lo.map(|(v, open)| v + open as i64)
    }

    fn last(self) -> Option<i64> {
        self.hi.map(|(v, open)| v - open as i64)
    }

    fn empty(self) -> bool {
        matches!((self.first(), self.last()), (Some(a), Some(b)) if a > b)
    }

    fn within(self, o: W) -> bool {
        if self.empty() {
            return true;
        }
        if o.empty() {
            return false;
        }
        let lo_ok = match (o.first(), self.first()) {
            (None, _) => true,
            (Some(_), None) => false,
            (Some(a), Some(b)) => a <= b,
        };
        let hi_ok = match (self.last(), o.last()) {
            (_, None) => true,
            (None, Some(_)) => false,
            (Some(a), Some(b)) => a <= b,
        };
        lo_ok && hi_ok
    }

    fn interval(self) -> Interval {
        let (lo, lo_open) = self.lo.map_or((TimePoint::NegInf, true), |(v, o)| (TimePoint::At(v), o));
        let (hi, hi_open) = self.hi.map_or((TimePoint::PosInf, true), |(v, o)| (TimePoint::At(v), o));
        Interval::new(lo, hi, lo_open, hi_open)
    }
}

fn backward(min: i64, max: Option<i64>) -> W {
    W { lo: max.map(|m| (-m, false)), hi: Some((-min, false)) }
}

/// Degree of an assumable under the calculus, or `None` when it cannot be
/// assumed (unpriced or zero belief).
fn degree(theory: &CausalTheory, a: Assumable, calculus: Calculus) -> Option<f64> {
    let (p, n) = match a {
        Assumable::Cause(c) => {
            let b = theory.model.cause(c).belief;
            (b.probability, b.necessity)
        }
        Assumable::Event(e) => {
            let b = theory.event(e).belief;
            (b.probability, b.necessity)
        }
        Assumable::NotEvent(e) => {
            let b = theory.event(e).belief;
            (b.probability.map(|p| 1.0 - p), b.necessity.map(|_| 1.0 - b.possibility.unwrap_or(1.0)))
        }
    };
    match calculus {
        Calculus::Probabilistic => p.filter(|&v| v > 0.0 && v <= 1.0),
        Calculus::Possibilistic => n.filter(|&v| v > 0.0 && v <= 1.0),
        Calculus::Cardinality => Some(1.0),
    }
}

#[derive(Debug, Clone)]
enum Goal {
    /// Derive the onset of the port from its rule.
    Onset(PortId, W),
    /// The port became abnormal within `W`; ports with a recorded onset only
    /// check it.
    Abnormal(PortId, W),
    Normal(PortId, i64),
}

#[derive(Debug, Clone, Default)]
struct Partial {
    assumptions: BTreeSet<Assumable>,
    occurrences: Vec<(CauseId, W)>,
    normals: BTreeSet<StateId>,
    scope: BTreeMap<(PortId, bool), PathId>,
    paths: BTreeSet<PathId>,
}

struct Solver<'t> {
    theory: &'t CausalTheory,
    calculus: Calculus,
    onsets: BTreeMap<PortId, i64>,
}

impl Solver<'_> {
    fn assume(&self, p: &mut Partial, a: Assumable) -> bool {
        if degree(self.theory, a, self.calculus).is_none() {
            return false;
        }
        p.assumptions.insert(a);
        true
    }

    fn enter(&self, p: &Partial, head: (PortId, bool), path: PathId) -> Option<Partial> {
        if p.scope.get(&head).is_some_and(|&q| q != path) {
            return None;
        }
        let mut q = p.clone();
        q.scope.insert(head, path);
        q.paths.insert(path);
        Some(q)
    }

    fn events(&self, p: &mut Partial, events: &[EventLit]) -> bool {
        events.iter().all(|e| match *e {
            EventLit::Holds(e) => self.assume(p, Assumable::Event(e)),
            EventLit::Fails(e) => self.assume(p, Assumable::NotEvent(e)),
        })
    }

    fn solve(&self, goals: &[Goal], p: Partial, out: &mut Vec<Partial>) {
        let Some((goal, rest)) = goals.split_first() else {
            out.push(p);
            return;
        };
        match *goal {
            Goal::Abnormal(port, w) => match self.onsets.get(&port) {
                Some(&t) => {
                    if W::point(t).within(w) {
                        self.solve(rest, p, out);
                    }
                }
                None => {
                    let mut next = vec![Goal::Onset(port, w)];
                    next.extend(rest.iter().cloned());
                    self.solve(&next, p, out);
                }
            },
            Goal::Onset(port, w) => {
                for term in &self.theory.abnormal_rule(port).terms {
                    let Some(mut q) = self.enter(&p, (port, true), term.path) else { continue };
                    if !self.events(&mut q, &term.events) {
                        continue;
                    }
                    q.normals.extend(term.normal_states.iter().copied());
                    let d = term.delay.expect("abnormal terms are delayed");
                    let child = w.plus(backward(d.min, d.max));
                    let mut next = Vec::new();
                    let mut ok = true;
                    for l in &term.abnormal {
                        match *l {
                            AbnormalLit::Port(x) => next.push(Goal::Abnormal(x, child)),
                            AbnormalLit::Fault(c) => {
                                ok &= self.assume(&mut q, Assumable::Cause(c));
                                q.occurrences.push((c, child));
                            }
                        }
                    }
                    if ok {
                        next.extend(rest.iter().cloned());
                        self.solve(&next, q, out);
                    }
                }
            }
            Goal::Normal(port, t) => {
                for term in &self.theory.normal_rule(port).terms {
                    let Some(mut q) = self.enter(&p, (port, false), term.path) else { continue };
                    if !self.events(&mut q, &term.events) {
                        continue;
                    }
                    q.normals.extend(term.normal_states.iter().copied());
                    let mut next: Vec<Goal> = term.normal_ports.iter().map(|&x| Goal::Normal(x, t)).collect();
                    for l in &term.abnormal {
                        if let AbnormalLit::Port(x) = *l {
                            next.push(Goal::Abnormal(x, W::before(t)));
                        }
                    }
                    next.extend(rest.iter().cloned());
                    self.solve(&next, q, out);
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Candidate {
    assumptions: BTreeSet<Assumable>,
    windows: BTreeMap<CauseId, W>,
    during: BTreeMap<StateId, W>,
    paths: BTreeSet<PathId>,
    mask: u64,
}

impl Candidate {
    fn dominates(&self, other: &Candidate) -> bool {
        self.assumptions.is_subset(&other.assumptions)
            && self.windows.iter().all(|(c, w)| other.windows.get(c).is_some_and(|o| o.within(*w)))
            && self.during.iter().all(|(s, w)| other.during.get(s).is_some_and(|o| w.within(*o)))
    }

    fn same(&self, other: &Candidate) -> bool {
        self.dominates(other) && other.dominates(self)
    }
}

fn merge_prefix(a: W, b: W) -> W {
    // longer requirement wins; closed beats open at equal ends
    let hi = match (a.hi, b.hi) {
        (None, _) | (_, None) => None,
        (Some(x), Some(y)) => Some(if (x.0, !x.1) >= (y.0, !y.1) { x } else { y }),
    };
    W { lo: None, hi }
}

/// All minimal explanations of `observations` by exhaustive derivation.
pub fn oracle_explanations(theory: &CausalTheory, observations: &[Observation], calculus: Calculus) -> Result<ExplanationSet, OracleError> {
    let size = theory.model.causes.len() + theory.events.len();
    if size > MAX_ASSUMABLES {
        return Err(OracleError::TooLarge(size));
    }

    let mut obs: Vec<(PortId, ObservationKind, Observation)> = Vec::new();
    for o in observations {
        let port = o
            .port
            .parse::<QualifiedName>()
            .ok()
            .and_then(|n| theory.model.port_id(&n))
            .filter(|&p| theory.model.port(p).observable)
            .ok_or_else(|| OracleError::BadPort(o.port.clone()))?;
        obs.push((port, o.kind, o.clone()));
    }
    obs.sort_by_key(|(p, k, _)| (*p, *k));
    obs.dedup_by_key(|(p, k, _)| (*p, *k));
    let onsets = obs
        .iter()
        .filter_map(|(p, k, _)| match *k {
            ObservationKind::FirstAbnormal(t) => Some((*p, t)),
            ObservationKind::NormalThrough(_) => None,
        })
        .collect();
    let solver = Solver { theory, calculus, onsets };

    // per observation: (assumptions, occurrences, during, paths)
    type Part = (BTreeSet<Assumable>, Vec<(CauseId, W)>, BTreeMap<StateId, W>, BTreeSet<PathId>);
    let mut per_obs: Vec<Vec<Part>> = Vec::new();
    for (port, kind, _) in &obs {
        let (goal, t) = match *kind {
            ObservationKind::FirstAbnormal(t) => (Goal::Onset(*port, W::point(t)), t),
            ObservationKind::NormalThrough(t) => (Goal::Normal(*port, t), t),
        };
        let mut found = Vec::new();
        solver.solve(&[goal], Partial::default(), &mut found);
        per_obs.push(
            found
                .into_iter()
                .map(|p| {
                    let during = p.normals.iter().map(|s| (*s, W::before(t))).collect();
                    (p.assumptions, p.occurrences, during, p.paths)
                })
                .collect(),
        );
    }

    let mut bits: BTreeMap<Assumable, u32> = BTreeMap::new();
    for (i, a) in theory
        .assumables()
        .into_iter()
        .chain(theory.events.iter().map(|e| Assumable::NotEvent(e.id)))
        .enumerate()
    {
        bits.insert(a, i as u32);
    }

    let mut candidates: Vec<Candidate> = Vec::new();
    let mut pick = vec![0usize; per_obs.len()];
    if per_obs.iter().all(|v| !v.is_empty()) {
        'product: loop {
            let mut assumptions = BTreeSet::new();
            let mut occurrences = Vec::new();
            let mut during: BTreeMap<StateId, W> = BTreeMap::new();
            let mut paths = BTreeSet::new();
            for (k, &i) in pick.iter().enumerate() {
                let (a, o, d, p) = &per_obs[k][i];
                assumptions.extend(a.iter().copied());
                occurrences.extend(o.iter().copied());
                for (s, w) in d {
                    let m = during.get(s).map_or(*w, |x| merge_prefix(*x, *w));
                    during.insert(*s, m);
                }
                paths.extend(p.iter().copied());
            }
            if let Some(c) = finish(theory, assumptions, occurrences, during, paths, &bits) {
                if !candidates.iter().any(|x| x.same(&c)) {
                    candidates.push(c);
                }
            }
            let mut k = 0;
            loop {
                if k == pick.len() {
                    break 'product;
                }
                pick[k] += 1;
                if pick[k] < per_obs[k].len() {
                    break;
                }
                pick[k] = 0;
                k += 1;
            }
        }
    }

    // minimality: look for a dominating candidate among all sub-masks
    let mut by_mask: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, c) in candidates.iter().enumerate() {
        by_mask.entry(c.mask).or_default().push(i);
    }
    let mut keep = Vec::new();
    for (i, c) in candidates.iter().enumerate() {
        let mut sub = c.mask;
        let mut dominated = false;
        loop {
            if let Some(list) = by_mask.get(&sub) {
                dominated |= list.iter().any(|&j| j != i && candidates[j].dominates(c) && !(c.dominates(&candidates[j]) && j > i));
            }
            if dominated || sub == 0 {
                break;
            }
            sub = (sub - 1) & c.mask;
        }
        if !dominated {
            keep.push(i);
        }
    }

    let mut explanations: Vec<Explanation> = keep.into_iter().map(|i| render(theory, &candidates[i], calculus)).collect();
    explanations.sort_by(|a, b| {
        (a.cost, a.assumptions.iter().collect::<Vec<_>>()).cmp(&(b.cost, b.assumptions.iter().collect::<Vec<_>>()))
    });
    Ok(ExplanationSet {
        explanations,
        bound: Cost::INFINITY,
        observations: obs.into_iter().map(|(_, _, o)| o).collect(),
    })
}

fn finish(
    theory: &CausalTheory,
    assumptions: BTreeSet<Assumable>,
    occurrences: Vec<(CauseId, W)>,
    during: BTreeMap<StateId, W>,
    paths: BTreeSet<PathId>,
    bits: &BTreeMap<Assumable, u32>,
) -> Option<Candidate> {
    // exclusivity
    let mut states = BTreeSet::new();
    for a in &assumptions {
        match *a {
            Assumable::Cause(c) => {
                if !states.insert(theory.model.cause(c).state) {
                    return None;
                }
            }
            Assumable::Event(e) => {
                if assumptions.contains(&Assumable::NotEvent(e)) {
                    return None;
                }
                if let Some(d) = theory.event(e).disjoint_with {
                    if assumptions.contains(&Assumable::Event(d)) {
                        return None;
                    }
                }
            }
            Assumable::NotEvent(_) => {}
        }
    }
    let mut windows: BTreeMap<CauseId, W> = BTreeMap::new();
    for (c, w) in occurrences {
        let m = windows.get(&c).map_or(w, |x| x.meet(w));
        if m.empty() {
            return None;
        }
        windows.insert(c, m);
    }
    for (c, w) in windows.iter_mut() {
        if let Some(d) = during.get(&theory.model.cause(*c).state) {
            let (end, open) = d.hi.expect("finite requirement");
            *w = w.meet(W { lo: Some((end, !open)), hi: None });
            if w.empty() {
                return None;
            }
        }
    }
    let mask = assumptions.iter().fold(0u64, |m, a| m | 1 << bits[a]);
    Some(Candidate { assumptions, windows, during, paths, mask })
}

fn render(theory: &CausalTheory, c: &Candidate, calculus: Calculus) -> Explanation {
    let degrees: Vec<f64> = c.assumptions.iter().map(|a| degree(theory, *a, calculus).expect("assumed")).collect();
    let (cost, belief) = match calculus {
        Calculus::Probabilistic => {
            let cost: f64 = degrees.iter().map(|p| -p.ln()).sum();
            (cost.max(0.0), Some(degrees.iter().product()))
        }
        Calculus::Possibilistic => {
            let n = degrees.iter().copied().fold(1.0, f64::min);
            (1.0 - n, Some(n))
        }
        Calculus::Cardinality => (c.assumptions.iter().filter(|a| matches!(a, Assumable::Cause(_))).count() as f64, None),
    };
    Explanation {
        assumptions: c.assumptions.clone(),
        causes: c
            .windows
            .iter()
            .map(|(id, w)| {
                let cv = theory.model.cause(*id);
                CauseWindow { cause: *id, var: theory.model.state(cv.state).name.to_string(), mode: cv.mode.clone(), interval: w.interval() }
            })
            .collect(),
        normals: c
            .during
            .iter()
            .map(|(s, w)| NormalRequirement { state: *s, var: theory.model.state(*s).name.to_string(), interval: w.interval() })
            .collect(),
        events: c.assumptions.iter().filter(|a| !matches!(a, Assumable::Cause(_))).copied().collect(),
        cost: Cost(cost),
        belief,
        paths: c.paths.iter().copied().collect(),
        substituted: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_arithmetic() {
        let w = W::point(10).plus(backward(1, Some(1))).plus(backward(2, Some(4)));
        assert_eq!(w.interval(), Interval::closed(5, 7));
        assert!(W::point(10).plus(backward(0, Some(5))).meet(W::point(100).plus(backward(0, Some(5)))).empty());
        let open = W { lo: Some((5, true)), hi: Some((6, true)) };
        assert!(open.empty());
        assert!(W::before(3).plus(backward(0, None)).lo.is_none());
    }
}
