//! Correlates ten symptoms at the end of a long chain of uncertain links
//! within a cost bound, and reports how long it took.
//!
//! `cargo run --release --example large_chain -- 500`

use std::fmt::Write;
use std::time::Instant;

use faultcorr::calculi::{Calculus, Cost};
use faultcorr::cli::parse_model;
use faultcorr::explain::{Diagnosis, Observation};
use faultcorr::model::ground;
use faultcorr::sim::{simulate, Injection};
use faultcorr::theory::compile;

fn chain(n: usize) -> String {
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
        let _ = writeln!(s, "instance l{i} : L");
    }
    let _ = writeln!(s, "connect s.o -> l0.i");
    for i in 1..n {
        let _ = writeln!(s, "connect l{}.o -> l{i}.i", i - 1);
    }
    for i in n.saturating_sub(10)..n {
        let _ = writeln!(s, "observe l{i}.o");
    }
    s
}

fn main() {
    let n: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(500);
    let def = parse_model(&chain(n), None).expect("generated model parses");
    let theory = compile(&ground(&def).expect("grounds")).expect("compiles");
    let source = theory.model.cause_by_label("s.self=failed").expect("source cause");

    // sample until every causation event on the chain holds
    let log = (0..)
        .map(|seed| simulate(&theory, &[Injection { cause: source, time: 0 }], seed, i64::MAX).expect("bounded delays"))
        .find(|l| l.records.len() == n.min(10))
        .expect("some seed reaches the end");
    let obs: Vec<Observation> = log.records.iter().map(|r| Observation::abnormal(r.port.clone(), r.time)).collect();
    println!("{} ports, symptoms {:?}", theory.model.ports.len(), log.records.iter().map(|r| r.time).collect::<Vec<_>>());

    let bound = Cost(-(0.001f64.ln()) - 45.0 * 0.99f64.ln());
    let start = Instant::now();
    let mut d = Diagnosis::new(&theory, &obs, Calculus::Probabilistic).expect("valid observations");
    let set = d.explanations(bound);
    println!("{} explanations within {:.3} in {:?} ({} agenda items)", set.len(), bound.0, start.elapsed(), d.work());
    for e in set.iter().take(5) {
        let causes: Vec<String> = e.causes.iter().map(|c| format!("{} in {}", c.var, c.interval)).collect();
        println!("  {:.3}  {}", e.cost.0, causes.join(", "));
    }
}
