//! The same single-symptom question under each cost calculus.
//!
//! `cargo run --example calculi`

use faultcorr::calculi::{Calculus, Cost, CostFunction};
use faultcorr::cli::parse_model;
use faultcorr::explain::{Diagnosis, Observation};
use faultcorr::model::ground;
use faultcorr::theory::compile;

fn main() {
    let def = parse_model(include_str!("../fixtures/satellite.fm"), None).expect("fixture parses");
    let theory = compile(&ground(&def).expect("grounds")).expect("compiles");
    let obs = [Observation::abnormal("shed.o", 100)];

    for calculus in Calculus::ALL {
        let set = Diagnosis::new(&theory, &obs, calculus).expect("valid observations").explanations(Cost::INFINITY);
        println!("{} (empty set costs {}): {} explanations", calculus.name(), calculus.identity(), set.len());
        for e in set.iter().take(3) {
            let belief = e.belief.map_or("-".into(), |b| format!("{b:.4}"));
            println!("  cost {:<8.4} belief {belief:<8} {}", e.cost.0, e.cause_labels().join(" + "));
        }
    }
}
