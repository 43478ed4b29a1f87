//! Ad-hoc timing probe for the (LimAvg;Sum⁺) pipeline stages.

use nwa_core::decide::{empty_nonnested, DEFAULT_STATE_LIMIT};
use nwa_core::reduce::{
    bound_multiplicity_transform_with, build_bounded_simulation, multiplicity_constant,
};
use nwa_core::automaton::{Alphabet, Automaton, Mode, Transition};
use nwa_core::nested::{silent_slave, NestedWeightedAutomaton};
use nwa_core::value::{rat_int, FinValueFn, InfValueFn, Weight};
use std::collections::BTreeMap;
use std::time::Instant;

fn response_time_nwa() -> NestedWeightedAutomaton {
    let master = Automaton {
        alphabet: Alphabet::new(["r", "g"]),
        states: ["m"].iter().map(|s| s.to_string()).collect(),
        initial: ["m"].iter().map(|s| s.to_string()).collect(),
        accepting: ["m"].iter().map(|s| s.to_string()).collect(),
        transitions: [Transition::new("m", "r", "m"), Transition::new("m", "g", "m")].into_iter().collect(),
        mode: Mode::InfiniteWord,
    };
    let base = Automaton {
        alphabet: Alphabet::new(["r", "g"]),
        states: ["p0", "p1", "pf"].iter().map(|s| s.to_string()).collect(),
        initial: ["p0"].iter().map(|s| s.to_string()).collect(),
        accepting: ["pf"].iter().map(|s| s.to_string()).collect(),
        transitions: [
            Transition::new("p0", "r", "p1"),
            Transition::new("p1", "r", "p1"),
            Transition::new("p1", "g", "pf"),
        ]
        .into_iter()
        .collect(),
        mode: Mode::FiniteWord,
    };
    let weight: BTreeMap<Transition, Weight> = base
        .transitions
        .iter()
        .map(|t| {
            let w = if t.to == "pf" { 0 } else { 1 };
            (t.clone(), Weight::Rational(rat_int(w)))
        })
        .collect();
    let resp = nwa_core::automaton::WeightedAutomaton {
        base,
        weight,
        valuefn: nwa_core::automaton::ValueFn::Fin(FinValueFn::SumPlus),
    };
    let silent = silent_slave(&master.alphabet);
    NestedWeightedAutomaton {
        labels: BTreeMap::from([
            (Transition::new("m", "r", "m"), 1),
            (Transition::new("m", "g", "m"), 2),
        ]),
        master,
        masterfn: InfValueFn::LimAvg,
        slaves: vec![resp, silent],
    }
}

fn main() {
    let nwa = response_time_nwa();
    let n = multiplicity_constant(&nwa);
    println!("multiplicity constant N = {n}");
    for b in [4i64, 16, 4 * n as i64] {
        let t0 = Instant::now();
        let (a0, cap) =
            bound_multiplicity_transform_with(&nwa, &rat_int(b), DEFAULT_STATE_LIMIT).unwrap();
        println!(
            "B={b}: A0 master states={} letters={} slaves={} cap={cap} ({:?})",
            a0.master.states.len(),
            a0.master.alphabet.letters().count(),
            a0.slaves.len(),
            t0.elapsed()
        );
        let t1 = Instant::now();
        match build_bounded_simulation(&a0, cap, DEFAULT_STATE_LIMIT) {
            Ok(sim) => {
                println!(
                    "B={b}: sim states={} transitions={} ({:?})",
                    sim.base.states.len(),
                    sim.base.transitions.len(),
                    t1.elapsed()
                );
                for (num, den) in [(1i64, 1i64), (1, 2)] {
                    let lam = rat_int(num) / rat_int(den);
                    let t2 = Instant::now();
                    let v = empty_nonnested(&sim, &lam);
                    println!(
                        "B={b}: empty@{num}/{den} answer={:?} ({:?})",
                        v.answer(),
                        t2.elapsed()
                    );
                }
            }
            Err(e) => println!("B={b}: sim error {e:?} ({:?})", t1.elapsed()),
        }
    }
}
