//! Raises the cost bound step by step; each step only reports what is new,
//! and the cheaper results never change.
//!
//! `cargo run --example anytime`

use faultcorr::calculi::{Calculus, Cost};
use faultcorr::cli::parse_model;
use faultcorr::explain::{Diagnosis, Observation};
use faultcorr::model::ground;
use faultcorr::theory::compile;

fn main() {
    let def = parse_model(include_str!("../fixtures/satellite.fm"), None).expect("fixture parses");
    let theory = compile(&ground(&def).expect("grounds")).expect("compiles");
    let obs = [Observation::abnormal("shed.o", 100)];

    let mut d = Diagnosis::new(&theory, &obs, Calculus::Probabilistic).expect("valid observations");
    let mut total = 0;
    for bound in [8.0, 10.0, 12.0, 16.0, f64::INFINITY] {
        let delta = d.raise_bound(Cost(bound)).expect("bounds only grow");
        total += delta.len();
        println!("bound {bound:>4}: +{} (total {total}, work {})", delta.len(), d.work());
        for e in &delta {
            println!("    {:.3}  {}", e.cost.0, e.cause_labels().join(" + "));
        }
    }
}
