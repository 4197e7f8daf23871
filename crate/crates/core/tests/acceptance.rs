//! Acceptance suite: one PASS/FAIL line per criterion.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use common::{key, keys, load, load_fixture, random_model, random_observations};
use faultcorr::calculi::{AtomKind, Belief, Calculus, Cost, CostAtom, CostFunction};
use faultcorr::cli::report;
use faultcorr::engine::{AssumptionId, Engine, Environment, Justification, NodeId, Transfer};
use faultcorr::explain::{correlate, expand_link_faults, Diagnosis, Explanation, Observation};
use faultcorr::sim::{oracle_explanations, simulate, Injection};
use faultcorr::temporal::{Delay, Interval};
use faultcorr::theory::{Assumable, CausalTheory};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

const RANDOM_MODELS: u64 = 200;

fn sat_symptom() -> Vec<Observation> {
    vec![Observation::abnormal("shed.o", 100)]
}

fn probability_product(theory: &CausalTheory, e: &Explanation) -> f64 {
    e.assumptions.iter().map(|&a| theory.atom(a).belief.probability.expect("priced")).product()
}

fn criterion_1() -> Outcome {
    let theory = load_fixture("satellite.fm");
    let start = Instant::now();
    let set = correlate(&theory, &sat_symptom(), Calculus::Possibilistic, Cost::INFINITY).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let ku = theory.model.cause_by_label("kuarea.self=present").ok_or("no KU-area cause")?;
    let hit = set
        .iter()
        .find(|e| e.window(ku) == Some(Interval::closed(40, 95)) && e.belief.is_some_and(|b| b >= 0.9))
        .ok_or_else(|| format!("no KU-area explanation with [40,95] and N >= 0.9 among {}", set.len()))?;
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(format!("KU window {} N={} in {elapsed:?}", hit.window(ku).unwrap(), hit.belief.unwrap()))
}

fn criterion_2() -> Outcome {
    let theory = load_fixture("satellite.fm");
    let set = correlate(&theory, &sat_symptom(), Calculus::Probabilistic, Cost::INFINITY).map_err(|e| e.to_string())?;
    let ovt = theory.model.cause_by_label("ovt.self=failed").ok_or("no ovt cause")?;
    let only: Vec<&Explanation> = set.iter().filter(|e| e.cause_ids() == BTreeSet::from([ovt])).collect();
    ensure!(only.len() == 2, "expected two ovt-only explanations, got {}", only.len());
    let (a, b) = (only[0], only[1]);
    ensure!(a.paths != b.paths, "same path traces");
    ensure!(a.window(ovt) != b.window(ovt), "same cause interval {:?}", a.window(ovt));
    let label = |e: &Explanation| e.paths.iter().map(|&p| theory.path(p).label.clone()).collect::<Vec<_>>().join(" ");
    let (la, lb) = (label(a), label(b));
    ensure!(
        (la.contains("reg") && lb.contains("therm")) || (la.contains("therm") && lb.contains("reg")),
        "paths are not electrical and thermal: [{la}] / [{lb}]"
    );
    let events = |e: &Explanation| e.events.iter().copied().collect::<BTreeSet<_>>();
    ensure!(events(a) != events(b), "both explanations assume the same causation events");
    for e in [a, b] {
        let got = e.belief.ok_or("no belief")?;
        let want = probability_product(&theory, e);
        ensure!(got == want, "belief {got} is not the per-path product {want}");
    }
    let sum = a.belief.unwrap() + b.belief.unwrap();
    ensure!(set.iter().all(|e| e.belief != Some(sum)), "a belief equals the cross-path sum");
    Ok(format!("{} {} vs {} {}", a.window(ovt).unwrap(), a.belief.unwrap(), b.window(ovt).unwrap(), b.belief.unwrap()))
}

fn compare_with_oracle(theory: &CausalTheory, obs: &[Observation], calculus: Calculus, tag: &str) -> Result<usize, String> {
    let got = correlate(theory, obs, calculus, Cost::INFINITY).map_err(|e| format!("{tag}: {e}"))?;
    let want = oracle_explanations(theory, obs, calculus).map_err(|e| format!("{tag}: {e}"))?;
    let (gk, wk) = (keys(got.iter()), keys(want.iter()));
    if gk != wk {
        let extra: Vec<_> = gk.difference(&wk).collect();
        let missing: Vec<_> = wk.difference(&gk).collect();
        return Err(format!("{tag} {calculus}: extra {extra:?} missing {missing:?}"));
    }
    for w in want.iter() {
        let g = got.iter().find(|g| key(g) == key(w)).expect("same keys");
        let ok = match (calculus, g.belief, w.belief) {
            (Calculus::Probabilistic, Some(x), Some(y)) => (x - y).abs() <= 1e-12,
            (_, x, y) => x == y,
        };
        ensure!(ok, "{tag} {calculus}: belief {:?} vs oracle {:?}", g.belief, w.belief);
    }
    Ok(got.len())
}

fn criterion_3() -> Outcome {
    let mut total = 0;
    for seed in 0..RANDOM_MODELS {
        let theory = random_model(seed);
        let obs = random_observations(&theory, seed, true);
        for calculus in [Calculus::Probabilistic, Calculus::Possibilistic] {
            total += compare_with_oracle(&theory, &obs, calculus, &format!("model {seed}"))?;
        }
    }
    Ok(format!("{RANDOM_MODELS} models, {total} explanations matched"))
}

fn criterion_4() -> Outcome {
    let theory = load(ELIMINATION);
    let c = theory.model.cause_by_label("c.self=failed").ok_or("no common cause")?;
    let far = vec![Observation::abnormal("l1.o", 10), Observation::abnormal("l2.o", 100)];
    let set = correlate(&theory, &far, Calculus::Cardinality, Cost::INFINITY).map_err(|e| e.to_string())?;
    ensure!(!set.is_empty(), "no explanation at all");
    ensure!(set.iter().all(|e| e.cause_ids() != BTreeSet::from([c])), "common cause alone survived");
    ensure!(set.explanations[0].cost == Cost(2.0), "cheapest costs {}", set.explanations[0].cost);

    let near = vec![Observation::abnormal("l1.o", 10), Observation::abnormal("l2.o", 12)];
    let set = correlate(&theory, &near, Calculus::Cardinality, Cost::INFINITY).map_err(|e| e.to_string())?;
    let common = set.iter().find(|e| e.cause_ids() == BTreeSet::from([c])).ok_or("common cause not re-admitted")?;
    ensure!(common.window(c) == Some(Interval::closed(7, 10)), "window {:?}", common.window(c));

    let mut both = 0;
    for seed in 0..10_000u64 {
        let t = (seed % 50) as i64;
        let log = simulate(&theory, &[Injection { cause: c, time: t }], seed, i64::MAX).map_err(|e| e.to_string())?;
        if let (Some(a), Some(b)) = (log.time_of("l1.o"), log.time_of("l2.o")) {
            both += 1;
            ensure!((a - b).abs() <= 5, "seed {seed}: arrivals {a} and {b}");
        }
    }
    ensure!(both > 0, "no simulation reached both outputs");
    Ok(format!("excluded at (10,100), window [7,10] at (10,12), {both} two-symptom runs all within 5"))
}

const ELIMINATION: &str = "\
model elim timeunit ticks
unit Source {
  state self modes(failed) prior 0.01 necessity 0.5
  out o
  link out=o cause=self
}
unit Link {
  state self modes(failed) prior 0.01 necessity 0.5
  in i
  out o
  link in=i out=o cause=self alpha(p=0.9,n=0.9) delay=[0,5]
}
instance c : Source
instance l1 : Link
instance l2 : Link
connect c.o -> l1.i
connect c.o -> l2.i
observe l1.o
observe l2.o
";

fn random_atom(rng: &mut ChaCha8Rng) -> CostAtom {
    let kind = if rng.gen_bool(0.5) { AtomKind::Cause } else { AtomKind::Causation };
    CostAtom { kind, belief: Belief::both(rng.gen_range(1e-4..=1.0), rng.gen_range(0.0..=1.0)) }
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for calculus in Calculus::ALL {
        for i in 0..1000 {
            let e1: Vec<CostAtom> = (0..rng.gen_range(0..6)).map(|_| random_atom(&mut rng)).collect();
            let mut e2 = e1.clone();
            e2.extend((0..rng.gen_range(0..6)).map(|_| random_atom(&mut rng)));
            e2.shuffle(&mut rng);
            let (c1, c2) = (calculus.evaluate(&e1), calculus.evaluate(&e2));
            ensure!(c1 <= c2, "{calculus} pair {i}: {c1} > {c2}");
            let mut perm = e1.clone();
            perm.shuffle(&mut rng);
            ensure!(calculus.evaluate(&perm) == c1, "{calculus}: order changes the cost");
        }
        ensure!(calculus.evaluate(&[]) == calculus.identity(), "{calculus}: empty set is not the identity");

        // the same assumption reached twice is counted once
        let mut e = Engine::new(calculus);
        let atom = CostAtom { kind: AtomKind::Cause, belief: Belief::both(0.2, 0.7) };
        let (n, _) = e.add_assumption("c", atom, Some(0)).map_err(|e| e.to_string())?;
        let twice = e.add_node("twice");
        e.add_justification(plain(twice, vec![n, n], vec![])).map_err(|e| e.to_string())?;
        let single = calculus.evaluate(&[atom]);
        let label = e.query_label(twice, Cost::INFINITY);
        ensure!(label.len() == 1 && label[0].cost == single, "{calculus}: duplicate assumption changes the cost");
    }

    for seed in 0..100 {
        for calculus in Calculus::ALL {
            let (mut e, nodes) = random_network(seed, calculus);
            for &n in &nodes {
                e.query_label(n, Cost::INFINITY);
            }
            let costs: Vec<Cost> = e.admissions().iter().map(|&(_, c)| c).collect();
            ensure!(!costs.is_empty(), "network {seed}: nothing admitted");
            ensure!(costs.windows(2).all(|w| w[0] <= w[1]), "network {seed} {calculus}: admission order not monotone");
        }
    }
    Ok("3 calculi x 1000 pairs monotone and set-valued; 100 networks emit in cost order".into())
}

fn plain(consequent: NodeId, antecedents: Vec<NodeId>, events: Vec<AssumptionId>) -> Justification {
    Justification { consequent, antecedents, events, normals: vec![], transfer: Transfer::Identity, trace: None }
}

/// A random layered network of assumptions and derived nodes.
fn random_network(seed: u64, calculus: Calculus) -> (Engine, Vec<NodeId>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut e = Engine::new(calculus);
    let mut pool = Vec::new();
    let mut events = Vec::new();
    for i in 0..rng.gen_range(3..9) {
        let atom = random_atom(&mut rng);
        let var = (atom.kind == AtomKind::Cause).then_some(i);
        let (n, a) = e.add_assumption(format!("a{i}"), atom, var).expect("fresh");
        if atom.kind == AtomKind::Causation {
            events.push(a);
        }
        pool.push(n);
    }
    let mut derived = Vec::new();
    for k in 0..rng.gen_range(4..16) {
        let node = e.add_node(format!("n{k}"));
        for _ in 0..rng.gen_range(1..4) {
            let ante: Vec<NodeId> = (0..rng.gen_range(1..3)).map(|_| *pool.choose(&mut rng).unwrap()).collect();
            let k = rng.gen_range(0..2);
            let ev: Vec<AssumptionId> = events.choose_multiple(&mut rng, k).copied().collect();
            let transfer = if rng.gen_bool(0.5) {
                let lo = rng.gen_range(0..5);
                Transfer::Delay(Delay::fixed(lo, lo + rng.gen_range(0..5)))
            } else {
                Transfer::Identity
            };
            e.add_justification(Justification { transfer, ..plain(node, ante, ev) }).expect("acyclic");
        }
        pool.push(node);
        derived.push(node);
    }
    (e, derived)
}

fn same_label(a: &[Environment], b: &[Environment]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.assumptions == y.assumptions && x.cost == y.cost && x.occurrences == y.occurrences)
}

fn criterion_6() -> Outcome {
    let mut checks = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
        let calculus = *Calculus::ALL.choose(&mut rng).unwrap();
        let (_, nodes) = random_network(seed, calculus);
        let node = *nodes.choose(&mut rng).unwrap();
        let (mut full, _) = random_network(seed, calculus);
        let all = full.query_label(node, Cost::INFINITY);
        let costs: Vec<f64> = all.iter().map(|e| e.cost.0).collect();
        let pick = |rng: &mut ChaCha8Rng| if costs.is_empty() { 0.0 } else { costs[rng.gen_range(0..costs.len())] };
        let mut bounds: Vec<f64> = (0..4).map(|_| pick(&mut rng)).collect();
        bounds.sort_by(f64::total_cmp);

        // prefix property on a fresh engine
        let (mut e, _) = random_network(seed, calculus);
        let l1 = e.query_label(node, Cost(bounds[0]));
        let l2 = e.query_label(node, Cost(bounds[3]));
        ensure!(l1.len() <= l2.len() && same_label(&l1, &l2[..l1.len()]), "seed {seed}: label at b1 is not a prefix");
        ensure!(same_label(&l2, &all[..l2.len()]), "seed {seed}: label at b2 is not a prefix of the unbounded label");

        // deltas are disjoint and their union is the label
        let (mut e, _) = random_network(seed, calculus);
        let mut seen: Vec<Environment> = Vec::new();
        for &b in &bounds {
            let delta = e.raise_bound(node, Cost(b)).map_err(|e| e.to_string())?;
            for d in &delta {
                ensure!(!seen.iter().any(|s| s.assumptions == d.assumptions && s.occurrences == d.occurrences), "seed {seed}: repeated delta");
            }
            seen.extend(delta);
        }
        let (mut fresh, _) = random_network(seed, calculus);
        let want = fresh.query_label(node, Cost(bounds[3]));
        ensure!(same_label(&seen, &want), "seed {seed}: deltas do not add up to the label");
        checks += 1;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for seed in 0..RANDOM_MODELS {
        let theory = random_model(seed);
        let obs = random_observations(&theory, seed, true);
        let render = |o: &[Observation]| -> Result<String, String> {
            let set = correlate(&theory, o, Calculus::Probabilistic, Cost::INFINITY).map_err(|e| e.to_string())?;
            Ok(report::to_string(&report::explanations(&theory, &set.explanations)))
        };
        let base = render(&obs)?;
        let mut shuffled = obs.clone();
        shuffled.shuffle(&mut rng);
        shuffled.reverse();
        ensure!(render(&shuffled)? == base, "model {seed}: report depends on observation order");
    }
    Ok(format!("{checks} networks prefix-consistent with complete deltas; {RANDOM_MODELS} permuted reports identical"))
}

fn criterion_7() -> Outcome {
    let mut total = 0;
    for seed in 0..RANDOM_MODELS {
        let theory = random_model(seed);
        let obs = random_observations(&theory, seed, true);
        let got = correlate(&theory, &obs, Calculus::Cardinality, Cost(1.0)).map_err(|e| e.to_string())?;
        let oracle = oracle_explanations(&theory, &obs, Calculus::Cardinality).map_err(|e| e.to_string())?;
        let want = keys(oracle.iter().filter(|e| e.causes.len() <= 1));
        ensure!(keys(got.iter()) == want, "model {seed}: bounded cardinality differs from single-cause oracle set");
        total += want.len();
    }
    Ok(format!("{total} single-cause explanations matched on {RANDOM_MODELS} models"))
}

fn criterion_8() -> Outcome {
    let mut checked = 0;
    for seed in 0..RANDOM_MODELS {
        let theory = random_model(seed);
        let obs = random_observations(&theory, seed, false);
        let calculus = Calculus::Probabilistic;
        let base = correlate(&theory, &obs, calculus, Cost::INFINITY).map_err(|e| e.to_string())?;
        let expanded = expand_link_faults(&base, &theory, calculus, Cost::INFINITY);
        let oracle = oracle_explanations(&theory, &obs, calculus).map_err(|e| e.to_string())?;
        for e in base.iter() {
            for link in &theory.links {
                let alpha = link.alpha;
                let state = theory.model.state(link.state);
                let y_normal = e.normals.iter().any(|n| n.state == link.state);
                let y_faulted = state.causes.iter().any(|c| e.assumptions.contains(&Assumable::Cause(*c)));
                if !y_normal || y_faulted || !e.assumptions.contains(&Assumable::Event(alpha)) {
                    continue;
                }
                let faults: f64 = state.causes.iter().map(|&c| theory.model.cause(c).belief.probability.unwrap()).sum();
                let pa = theory.event(alpha).belief.probability.unwrap();
                if (1.0 - faults) * pa <= faults {
                    continue;
                }
                for &c in &state.causes {
                    let mut want: BTreeSet<Assumable> = e.assumptions.clone();
                    want.remove(&Assumable::Event(alpha));
                    want.insert(Assumable::Cause(c));
                    let sub = expanded
                        .iter()
                        .find(|x| x.substituted.contains(&c) && x.assumptions == want)
                        .ok_or_else(|| format!("model {seed}: no substitution of {} in {:?}", theory.model.cause(c).label, e.cause_labels()))?;
                    ensure!(sub.cost > e.cost, "model {seed}: substitution {:?} at {} is not costlier than {:?} at {}", sub.assumptions, sub.cost, e.assumptions, e.cost);
                    // some oracle minimal support with the fault lies inside
                    // the substitution, with the same windows
                    let supported = oracle.iter().any(|o| {
                        o.assumptions.contains(&Assumable::Cause(c))
                            && o.assumptions.is_subset(&sub.assumptions)
                            && o.causes.iter().all(|w| sub.window(w.cause).map(|i| i.ticks()) == Some(w.interval.ticks()))
                    });
                    ensure!(supported, "model {seed}: substitution {:?} has no oracle minimal support", sub.cause_labels());
                    checked += 1;
                }
            }
        }
    }
    ensure!(checked > 0, "no eligible explanation was generated");
    Ok(format!("{checked} substitutions checked"))
}

fn long_chain(n: usize) -> String {
    let mut s = String::from(
        "model chain timeunit ticks
unit Src {
  state self modes(failed) prior 0.001 necessity 0.5
  out o
  link out=o cause=self
}
unit L {
  state self modes(failed) prior 0.001 necessity 0.5
  in i
  out o
  link in=i out=o cause=self alpha(p=0.99,n=0.99) delay=[1,2]
}
instance s : Src
",
    );
    for i in 0..n {
        s.push_str(&format!("instance l{i} : L\n"));
    }
    s.push_str("connect s.o -> l0.i\n");
    for i in 1..n {
        s.push_str(&format!("connect l{}.o -> l{i}.i\n", i - 1));
    }
    for i in n - 10..n {
        s.push_str(&format!("observe l{i}.o\n"));
    }
    s
}

fn criterion_9() -> Outcome {
    let theory = load(&long_chain(500));
    let s = theory.model.cause_by_label("s.self=failed").ok_or("no source")?;
    // the first seed whose sampled causation events carry the fault to the end
    let log = (0..10_000u64)
        .map(|seed| simulate(&theory, &[Injection { cause: s, time: 0 }], seed, i64::MAX))
        .find(|l| l.as_ref().map_or(true, |l| l.records.len() == 10))
        .ok_or("no seed reaches the chain end")?
        .map_err(|e| e.to_string())?;
    let obs: Vec<Observation> = log.records.iter().map(|r| Observation::abnormal(r.port.clone(), r.time)).collect();
    ensure!(obs.len() == 10, "simulation produced {} symptoms", obs.len());
    // one fault plus the last few dozen causation events
    let bound = Cost(-(0.001f64.ln()) - 45.0 * 0.99f64.ln());
    let start = Instant::now();
    let mut d = Diagnosis::new(&theory, &obs, Calculus::Probabilistic).map_err(|e| e.to_string())?;
    let set = d.explanations(bound);
    let elapsed = start.elapsed();
    ensure!(!set.is_empty() && set.len() <= 50, "bound admitted {} explanations", set.len());
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(format!("{} ports, {} explanations in {elapsed:?}", theory.model.ports.len(), set.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("satellite KU-area window", criterion_1),
        ("two-path discrimination", criterion_2),
        ("oracle equivalence", criterion_3),
        ("temporal elimination", criterion_4),
        ("cost-function contract", criterion_5),
        ("anytime and order invariance", criterion_6),
        ("single-fault special case", criterion_7),
        ("link-fault substitution", criterion_8),
        ("500-link performance", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
