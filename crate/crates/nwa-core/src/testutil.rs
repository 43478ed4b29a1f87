//! Shared helpers for unit tests: compact automaton builders.

use crate::automaton::{Alphabet, Automaton, Mode, Transition, ValueFn, WeightedAutomaton};
use crate::nested::{silent_slave, NestedWeightedAutomaton};
use crate::value::{rat_int, FinValueFn, InfValueFn, Weight};
use std::collections::BTreeMap;

/// Build a Boolean automaton from compact parts.
pub fn build_automaton(
    mode: Mode,
    alphabet: &[&str],
    states: &[&str],
    initial: &[&str],
    accepting: &[&str],
    transitions: &[(&str, &str, &str)],
) -> Automaton {
    Automaton {
        alphabet: Alphabet::new(alphabet.iter().copied()),
        states: states.iter().map(|s| s.to_string()).collect(),
        initial: initial.iter().map(|s| s.to_string()).collect(),
        accepting: accepting.iter().map(|s| s.to_string()).collect(),
        transitions: transitions
            .iter()
            .map(|(f, l, t)| Transition::new(*f, *l, *t))
            .collect(),
        mode,
    }
}

/// Build a finite-word weighted automaton with integer weights.
pub fn build_weighted_fin(
    valuefn: FinValueFn,
    alphabet: &[&str],
    states: &[&str],
    initial: &[&str],
    accepting: &[&str],
    transitions: &[(&str, &str, &str, i64)],
) -> WeightedAutomaton {
    let base = build_automaton(
        Mode::FiniteWord,
        alphabet,
        states,
        initial,
        accepting,
        &transitions
            .iter()
            .map(|(f, l, t, _)| (*f, *l, *t))
            .collect::<Vec<_>>(),
    );
    let weight: BTreeMap<Transition, Weight> = transitions
        .iter()
        .map(|(f, l, t, w)| (Transition::new(*f, *l, *t), Weight::Rational(rat_int(*w))))
        .collect();
    WeightedAutomaton {
        base,
        weight,
        valuefn: ValueFn::Fin(valuefn),
    }
}

/// Letters of a word given as one character per letter.
pub fn letters(s: &str) -> Vec<String> {
    s.chars().map(|c| c.to_string()).collect()
}

/// LimAvg master over {a,b}: `a` invokes a parity slave (reads a*b, value =
/// number of a's mod 2), `b` invokes a counting slave (reads b a^k b, value
/// k + 2). The infimum over words is 3/2, approached by words with growing
/// a-blocks of the right parity but attained by no lasso.
pub fn parity_count_nwa() -> NestedWeightedAutomaton {
    let master = build_automaton(
        Mode::InfiniteWord,
        &["a", "b"],
        &["m"],
        &["m"],
        &["m"],
        &[("m", "a", "m"), ("m", "b", "m")],
    );
    let parity = build_weighted_fin(
        FinValueFn::SumPlus,
        &["a", "b"],
        &["e", "o", "f"],
        &["e"],
        &["f"],
        &[
            ("e", "a", "o", 0),
            ("o", "a", "e", 0),
            ("e", "b", "f", 0),
            ("o", "b", "f", 1),
        ],
    );
    let count = build_weighted_fin(
        FinValueFn::SumPlus,
        &["a", "b"],
        &["u", "v", "g"],
        &["u"],
        &["g"],
        &[("u", "b", "v", 1), ("v", "a", "v", 1), ("v", "b", "g", 1)],
    );
    NestedWeightedAutomaton {
        labels: BTreeMap::from([
            (Transition::new("m", "a", "m"), 1),
            (Transition::new("m", "b", "m"), 2),
        ]),
        master,
        masterfn: InfValueFn::LimAvg,
        slaves: vec![parity, count],
    }
}

/// Response-time measure: LimAvg master over {r,g}; each request `r`
/// invokes a slave summing 1 per letter until the next grant `g`, and `g`
/// positions are silent. The infimum is 1, attained on (rg)^ω.
pub fn response_time_nwa() -> NestedWeightedAutomaton {
    let master = build_automaton(
        Mode::InfiniteWord,
        &["r", "g"],
        &["m"],
        &["m"],
        &["m"],
        &[("m", "r", "m"), ("m", "g", "m")],
    );
    let resp = build_weighted_fin(
        FinValueFn::SumPlus,
        &["r", "g"],
        &["p0", "p1", "pf"],
        &["p0"],
        &["pf"],
        &[("p0", "r", "p1", 1), ("p1", "r", "p1", 1), ("p1", "g", "pf", 0)],
    );
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
