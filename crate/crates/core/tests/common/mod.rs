#![allow(dead_code)]

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::PathBuf;

use faultcorr::calculi::Calculus;
use faultcorr::cli::parse_model;
use faultcorr::explain::{Explanation, Observation};
use faultcorr::model::{ground, CauseId, StateId};
use faultcorr::sim::{simulate, Injection};
use faultcorr::temporal::TimePoint;
use faultcorr::theory::{compile, Assumable, CausalTheory};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn load(text: &str) -> CausalTheory {
    let def = parse_model(text, None).expect("parse");
    compile(&ground(&def).expect("ground")).expect("compile")
}

pub fn load_fixture(name: &str) -> CausalTheory {
    load(&std::fs::read_to_string(fixture(name)).expect("fixture"))
}

pub type Ticks = Option<(TimePoint, TimePoint)>;

/// Identity of an explanation up to interval notation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Key {
    pub assumptions: Vec<Assumable>,
    pub windows: Vec<(CauseId, Ticks)>,
    pub normals: Vec<(StateId, Ticks)>,
}

pub fn key(e: &Explanation) -> Key {
    Key {
        assumptions: e.assumptions.iter().copied().collect(),
        windows: e.causes.iter().map(|c| (c.cause, c.interval.ticks())).collect(),
        normals: e.normals.iter().map(|n| (n.state, n.interval.ticks())).collect(),
    }
}

pub fn keys<'a>(it: impl IntoIterator<Item = &'a Explanation>) -> BTreeSet<Key> {
    it.into_iter().map(key).collect()
}

fn degree(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    // two decimals keep the model text exact
    (rng.gen_range(lo..hi) * 100.0).round() / 100.0
}

fn event_belief(rng: &mut ChaCha8Rng) -> String {
    let p = degree(rng, 0.3, 0.99);
    let n = degree(rng, 0.3, 0.99);
    if rng.gen_bool(0.4) {
        let pi = degree(rng, n, 1.0).max(n);
        format!("(p={p},n={n},pi={pi})")
    } else {
        format!("(p={p},n={n})")
    }
}

fn delay(rng: &mut ChaCha8Rng, zero_min: bool) -> String {
    let a = if zero_min { 0 } else { rng.gen_range(0..=10) };
    let w = rng.gen_range(0..=10);
    format!("[{a},{}]", (a + w).min(20))
}

/// A random small model: at most 8 assumables and 6 templates, delays of at
/// most 20 ticks.
pub fn random_model_text(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let templates = rng.gen_range(2..=6);
    let mut budget = 8usize;
    let mut units = String::new();
    let mut wiring = String::new();
    let mut outputs: Vec<String> = Vec::new();
    for k in 0..templates {
        let name = format!("u{k}");
        let choice = if outputs.is_empty() { 0 } else { rng.gen_range(0..10) };
        let state = |rng: &mut ChaCha8Rng, modes: usize| {
            let m: Vec<String> = (0..modes).map(|i| format!("m{i}")).collect();
            format!(
                "  state s modes({}) prior {} necessity {}\n",
                m.join(","),
                degree(rng, 0.01, 0.3),
                degree(rng, 0.1, 0.9)
            )
        };
        let connect = |rng: &mut ChaCha8Rng, port: &str, wiring: &mut String| {
            if rng.gen_bool(0.9) {
                let src = outputs.choose(rng).expect("earlier output").clone();
                let _ = writeln!(wiring, "connect {src} -> {name}.{port}");
            }
        };
        if choice < 2 && budget >= 1 {
            // fault source
            let modes = if budget >= 2 && rng.gen_bool(0.2) { 2 } else { 1 };
            budget -= modes;
            let _ = write!(units, "unit U{k} {{\n{}  out o\n  link out=o cause=s fault_delay={}\n}}\n", state(&mut rng, modes), delay(&mut rng, true));
        } else if choice < 7 && budget >= 2 {
            budget -= 2;
            let fd = if rng.gen_bool(0.7) { "[0,0]".to_string() } else { delay(&mut rng, true) };
            let _ = write!(
                units,
                "unit U{k} {{\n{}  in i\n  out o\n  link in=i out=o cause=s alpha{} delay={} fault_delay={fd}\n}}\n",
                state(&mut rng, 1),
                event_belief(&mut rng),
                delay(&mut rng, false)
            );
            connect(&mut rng, "i", &mut wiring);
        } else if budget >= 2 {
            let synergy = budget >= 4 && rng.gen_bool(0.4);
            budget -= if synergy { 4 } else { 2 };
            let mut line = format!("  join2 in1=a in2=b out=o alpha{} beta{}", event_belief(&mut rng), event_belief(&mut rng));
            if synergy {
                let _ = write!(line, " psi{} sigma{} delay_joint={}", event_belief(&mut rng), event_belief(&mut rng), delay(&mut rng, false));
            }
            let _ = write!(line, " delay1={} delay2={}", delay(&mut rng, true), delay(&mut rng, true));
            let _ = write!(units, "unit U{k} {{\n  in a\n  in b\n  out o\n{line}\n}}\n");
            connect(&mut rng, "a", &mut wiring);
            connect(&mut rng, "b", &mut wiring);
        } else {
            break;
        }
        let _ = writeln!(wiring, "instance {name} : U{k}");
        outputs.push(format!("{name}.o"));
    }
    let mut text = format!("model r{seed} timeunit ticks\n{units}");
    // instances before connections
    let (inst, conn): (Vec<&str>, Vec<&str>) = wiring.lines().partition(|l| l.starts_with("instance"));
    for l in inst.iter().chain(conn.iter()) {
        let _ = writeln!(text, "{l}");
    }
    let last = outputs.len() - 1;
    for (i, o) in outputs.iter().enumerate() {
        if i == last || rng.gen_bool(0.4) {
            let _ = writeln!(text, "observe {o}");
        }
    }
    text
}

pub fn random_model(seed: u64) -> CausalTheory {
    load(&random_model_text(seed))
}

/// Observations from a seeded simulation of random injections, sometimes
/// perturbed and sometimes with extra normal-through records.
pub fn random_observations(theory: &CausalTheory, seed: u64, allow_normal: bool) -> Vec<Observation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let gm = &theory.model;
    let mut states: Vec<usize> = (0..gm.states.len()).collect();
    states.shuffle(&mut rng);
    let n = rng.gen_range(1..=2.min(states.len().max(1)));
    let injections: Vec<Injection> = states
        .iter()
        .take(n)
        .filter_map(|&s| {
            let causes = &gm.states[s].causes;
            causes.choose(&mut rng).map(|&c| Injection { cause: c, time: rng.gen_range(0..20) })
        })
        .collect();
    let log = simulate(theory, &injections, seed, 200).expect("bounded delays");
    let mut obs: Vec<Observation> = log
        .records
        .iter()
        .map(|r| {
            let t = if rng.gen_bool(0.15) { r.time + rng.gen_range(-8..=8) } else { r.time };
            Observation::abnormal(r.port.clone(), t)
        })
        .collect();
    if allow_normal {
        for &p in &gm.observables {
            let name = gm.port(p).name.to_string();
            if rng.gen_bool(0.25) {
                let seen = obs.iter().find(|o| o.port == name).map(Observation::time);
                match seen {
                    Some(t) => obs.push(Observation::normal_through(name, t - rng.gen_range(1..5))),
                    None => obs.push(Observation::normal_through(name, rng.gen_range(0..60))),
                }
            }
        }
    }
    if obs.is_empty() {
        let p = *gm.observables.choose(&mut rng).expect("observable");
        obs.push(Observation::abnormal(gm.port(p).name.to_string(), rng.gen_range(0..40)));
    }
    obs
}

pub const CALCULI: [Calculus; 3] = Calculus::ALL;
