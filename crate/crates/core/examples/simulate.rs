//! Injects a transistor failure, prints the observation log and checks the
//! diagnosis recovers the injected fault.
//!
//! `cargo run --example simulate -- 7`

use faultcorr::calculi::{Calculus, Cost};
use faultcorr::cli::parse_model;
use faultcorr::explain::{Diagnosis, Observation};
use faultcorr::model::ground;
use faultcorr::sim::{simulate, Injection};
use faultcorr::temporal::TimePoint;
use faultcorr::theory::compile;

fn main() {
    let seed: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(7);
    let def = parse_model(include_str!("../fixtures/satellite.fm"), None).expect("fixture parses");
    let theory = compile(&ground(&def).expect("grounds")).expect("compiles");
    let inj = Injection::parse(&theory.model, "ovt.self=failed@0").expect("known cause");

    let log = simulate(&theory, &[inj], seed, 200).expect("bounded delays");
    print!("{}", log.to_jsonl());

    let obs: Vec<Observation> = log.records.iter().map(|r| Observation::abnormal(r.port.clone(), r.time)).collect();
    if obs.is_empty() {
        println!("nothing observable with seed {seed}");
        return;
    }
    let set = Diagnosis::new(&theory, &obs, Calculus::Probabilistic).expect("valid observations").explanations(Cost::INFINITY);
    let rank = set.iter().position(|e| e.cause_ids().len() == 1 && e.window(inj.cause).is_some_and(|w| w.contains(TimePoint::At(inj.time))));
    match rank {
        Some(r) => println!("injected fault ranked {} of {}", r + 1, set.len()),
        None => println!("injected fault not recovered"),
    }
}
