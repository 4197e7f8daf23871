//! Explains a payload-shedding alarm on the satellite power model under the
//! possibilistic calculus.
//!
//! `cargo run --example satellite`

use faultcorr::calculi::{Calculus, Cost};
use faultcorr::cli::{parse_model, report};
use faultcorr::explain::{Diagnosis, Observation};
use faultcorr::model::ground;
use faultcorr::theory::compile;

fn main() {
    let def = parse_model(include_str!("../fixtures/satellite.fm"), None).expect("fixture parses");
    let theory = compile(&ground(&def).expect("grounds")).expect("compiles");
    let obs = [Observation::abnormal("shed.o", 100)];

    let mut d = Diagnosis::new(&theory, &obs, Calculus::Possibilistic).expect("valid observations");
    let set = d.explanations(Cost(0.5));
    print!("{}", report::table(&theory, &set.explanations));

    // the KU-area condition must have appeared during a bounded window
    let best = &set.explanations[0];
    for c in &best.causes {
        println!("{}={} somewhere in {}", c.var, c.mode, c.interval);
    }
    for n in &best.normals {
        println!("{} working through {}", n.var, n.interval);
    }
}
