//! Seeded forward propagation of injected faults.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CauseId, GroundModel, PortId};
use crate::temporal::Delay;
use crate::theory::{AbnormalLit, CausalTheory, EventLit};

/// A cause that changes from working to its fault mode at `time`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Injection {
    pub cause: CauseId,
    pub time: i64,
}

impl Injection {
    /// Parses `instance.state=mode@time`.
    pub fn parse(model: &GroundModel, text: &str) -> Result<Injection, SimError> {
        let (label, time) = text.rsplit_once('@').ok_or_else(|| SimError::BadInjection(text.to_string()))?;
        let time: i64 = time.trim().parse().map_err(|_| SimError::BadInjection(text.to_string()))?;
        let cause = model.cause_by_label(label.trim()).ok_or_else(|| SimError::UnknownCause(label.trim().to_string()))?;
        Ok(Injection { cause, time })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("injection `{0}` is not of the form instance.state=mode@time")]
    BadInjection(String),
    #[error("unknown cause `{0}`")]
    UnknownCause(String),
    #[error("state `{0}` is injected more than once")]
    DoubleInjection(String),
    #[error("delay {delay} at `{port}` has no upper bound and cannot be sampled")]
    UnboundedDelay { port: String, delay: Delay },
}

/// One first transition to abnormal at an observable port.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LogRecord {
    pub time: i64,
    pub port: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ObservationLog {
    pub records: Vec<LogRecord>,
    pub horizon: i64,
    pub seed: u64,
}

impl ObservationLog {
    /// One JSON object per line, in time order.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("plain record"));
            out.push('\n');
        }
        out
    }

    pub fn time_of(&self, port: &str) -> Option<i64> {
        self.records.iter().find(|r| r.port == port).map(|r| r.time)
    }
}

/// Full outcome of one run, including unobserved ports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub first_abnormal: Vec<Option<i64>>,
    pub events: Vec<bool>,
}

fn sample(rng: &mut ChaCha8Rng, d: &Delay, port: &str) -> Result<i64, SimError> {
    let max = d.max.ok_or_else(|| SimError::UnboundedDelay { port: port.to_string(), delay: *d })?;
    Ok(rng.gen_range(d.min..=max))
}

/// Runs the model forward and logs the first abnormal time of every
/// observable not later than `horizon`.
pub fn simulate(theory: &CausalTheory, injections: &[Injection], seed: u64, horizon: i64) -> Result<ObservationLog, SimError> {
    let trace = run(theory, injections, seed)?;
    let gm = &theory.model;
    let mut records: Vec<LogRecord> = gm
        .observables
        .iter()
        .filter_map(|&p| {
            let t = trace.first_abnormal[p.0 as usize]?;
            (t <= horizon).then(|| LogRecord { time: t, port: gm.port(p).name.to_string(), value: "abnormal".into() })
        })
        .collect();
    records.sort();
    Ok(ObservationLog { records, horizon, seed })
}

/// Samples causation events and delays, then propagates in topological
/// order. A port's time is its earliest firing term.
pub fn run(theory: &CausalTheory, injections: &[Injection], seed: u64) -> Result<Trace, SimError> {
    let gm = &theory.model;
    let mut fault_at: BTreeMap<CauseId, i64> = BTreeMap::new();
    let mut state_hit = BTreeMap::new();
    for inj in injections {
        let state = gm.cause(inj.cause).state;
        if state_hit.insert(state, inj.cause).is_some() {
            return Err(SimError::DoubleInjection(gm.state(state).name.to_string()));
        }
        fault_at.insert(inj.cause, inj.time);
    }
    // working at instant t  <=>  no fault at or before t
    let working_at = |s: crate::model::StateId, t: i64| gm.state(s).causes.iter().all(|c| fault_at.get(c).map_or(true, |&f| f > t));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut events = vec![false; theory.events.len()];
    for e in &theory.events {
        let p = e.belief.probability.or(e.belief.necessity).unwrap_or(1.0);
        let u: f64 = rng.gen();
        events[e.id.0 as usize] = match e.disjoint_with {
            // exclusive pair: the later event only fires when the earlier did not
            Some(d) if d < e.id => {
                let q = theory.event(d).belief.probability.or(theory.event(d).belief.necessity).unwrap_or(1.0);
                !events[d.0 as usize] && q < 1.0 && u < (p / (1.0 - q)).min(1.0)
            }
            _ => u < p,
        };
    }

    let mut first: Vec<Option<i64>> = vec![None; gm.ports.len()];
    for &p in &gm.order {
        let name = gm.port(p).name.to_string();
        let mut best: Option<i64> = None;
        for term in &theory.abnormal_rule(p).terms {
            let mut trigger = i64::MIN;
            let mut ok = true;
            for l in &term.abnormal {
                let t = match l {
                    AbnormalLit::Port(q) => first[q.0 as usize],
                    AbnormalLit::Fault(c) => fault_at.get(c).copied(),
                };
                match t {
                    Some(t) => trigger = trigger.max(t),
                    None => ok = false,
                }
            }
            ok &= term.events.iter().all(|e| match e {
                EventLit::Holds(e) => events[e.0 as usize],
                EventLit::Fails(e) => !events[e.0 as usize],
            });
            ok &= term.normal_states.iter().all(|&s| working_at(s, trigger));
            if !ok {
                continue;
            }
            let d = term.delay.unwrap_or(Delay::ZERO);
            let t = trigger + sample(&mut rng, &d, &name)?;
            best = Some(best.map_or(t, |b: i64| b.min(t)));
        }
        first[p.0 as usize] = best;
    }
    Ok(Trace { first_abnormal: first, events })
}

/// First abnormal time of one port in a trace.
pub fn arrival(trace: &Trace, port: PortId) -> Option<i64> {
    trace.first_abnormal[port.0 as usize]
}
