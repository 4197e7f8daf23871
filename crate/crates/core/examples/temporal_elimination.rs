//! A common cause is ruled out when its two effects are further apart than
//! the link delays allow, and re-admitted when they are close.
//!
//! `cargo run --example temporal_elimination`

use faultcorr::calculi::{Calculus, Cost};
use faultcorr::cli::parse_model;
use faultcorr::explain::{correlate, Observation};
use faultcorr::model::ground;
use faultcorr::theory::compile;

fn main() {
    let def = parse_model(include_str!("../fixtures/elim.fm"), None).expect("fixture parses");
    let theory = compile(&ground(&def).expect("grounds")).expect("compiles");

    for (t1, t2) in [(10, 100), (10, 12)] {
        let obs = [Observation::abnormal("l1.o", t1), Observation::abnormal("l2.o", t2)];
        let set = correlate(&theory, &obs, Calculus::Cardinality, Cost::INFINITY).expect("valid observations");
        println!("l1.o@{t1} l2.o@{t2}:");
        for e in set.iter() {
            let causes: Vec<String> = e.causes.iter().map(|c| format!("{} in {}", c.var, c.interval)).collect();
            println!("  cost {}  {}", e.cost, causes.join(", "));
        }
    }
}
