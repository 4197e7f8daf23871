//! Lists explanations where a working link is swapped for that link's own
//! fault, next to the originals.
//!
//! `cargo run --example link_faults`

use faultcorr::calculi::{Calculus, Cost};
use faultcorr::cli::{parse_model, report};
use faultcorr::explain::{correlate, expand_link_faults, Observation};
use faultcorr::model::ground;
use faultcorr::theory::compile;

fn main() {
    let def = parse_model(include_str!("../fixtures/chain.fm"), None).expect("fixture parses");
    let theory = compile(&ground(&def).expect("grounds")).expect("compiles");
    let obs = [Observation::abnormal("z.o", 20)];

    let base = correlate(&theory, &obs, Calculus::Probabilistic, Cost::INFINITY).expect("valid observations");
    let expanded = expand_link_faults(&base, &theory, Calculus::Probabilistic, Cost::INFINITY);
    print!("{}", report::table(&theory, &expanded.explanations));
    for e in expanded.iter().filter(|e| !e.substituted.is_empty()) {
        let faults: Vec<&str> = e.substituted.iter().map(|&c| theory.model.causes[c.0 as usize].label.as_str()).collect();
        println!("substituted {}", faults.join(", "));
    }
}
