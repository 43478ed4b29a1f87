//! Values of finite words under finite-word weighted automata, and the
//! per-value decomposition of Min/Max/BSum automata into deterministic
//! recognizers — the building block of the reduction from nested automata to
//! plain weighted automata.

use crate::automaton::{Automaton, Mode, Transition, WeightedAutomaton};
use crate::value::{rat_int, ExtValue, FinValueFn, Rat, Weight};
use num::Signed;
use std::collections::{BTreeSet, HashMap, VecDeque};
use thiserror::Error;

/// Hard cap on subset states materialized by [`decompose`]; exceeding it is
/// an explicit error rather than silent truncation.
pub const DECOMPOSE_STATE_CAP: usize = 1 << 14;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FinwordError {
    #[error("value function `{0}` is not supported by this operation")]
    UnsupportedValueFn(String),
    #[error("decomposition exceeded the {0}-state cap")]
    DecompositionTooLarge(usize),
}

/// Running aggregate of a partial run, refined per value function.
/// `Start` marks "no weight read yet" (only the empty word), so that the
/// empty word's ⊥ value is never conflated with an aggregate of 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Tracker {
    Start,
    Val(Rat),
    /// BSum only: some prefix's absolute sum exceeded the bound.
    Overflow,
}

fn step_tracker(f: &FinValueFn, tracker: &Tracker, w: &Rat) -> Tracker {
    let combined = match (f, tracker) {
        (_, Tracker::Start) => match f {
            FinValueFn::SumPlus => w.abs(),
            _ => w.clone(),
        },
        (FinValueFn::Min, Tracker::Val(v)) => v.clone().min(w.clone()),
        (FinValueFn::Max, Tracker::Val(v)) => v.clone().max(w.clone()),
        (FinValueFn::Sum, Tracker::Val(v)) => v + w,
        (FinValueFn::SumPlus, Tracker::Val(v)) => v + w.abs(),
        (FinValueFn::BSum(_), Tracker::Val(v)) => v + w,
        (FinValueFn::BSum(_), Tracker::Overflow) => return Tracker::Overflow,
        (_, Tracker::Overflow) => unreachable!("overflow tracker outside BSum"),
    };
    if let FinValueFn::BSum(b) = f {
        if combined.abs() > rat_int(*b as i64) {
            return Tracker::Overflow;
        }
    }
    Tracker::Val(combined)
}

/// The run value a tracker denotes once the run has ended.
fn tracker_value(f: &FinValueFn, tracker: &Tracker) -> ExtValue {
    match tracker {
        Tracker::Start => ExtValue::Bottom,
        Tracker::Val(v) => ExtValue::Rational(v.clone()),
        Tracker::Overflow => match f {
            FinValueFn::BSum(b) => ExtValue::Rational(rat_int(*b as i64)),
            _ => unreachable!(),
        },
    }
}

/// Exact value of a finite word: the infimum over all accepting runs of the
/// run value, `Infinity` when no accepting run exists, and `Bottom` when the
/// word is empty and accepted (empty runs carry the external value ⊥).
///
/// Computed by a forward fixpoint over (position, state, aggregate): for
/// Sum/Sum⁺ only the minimal aggregate per state needs keeping (shortest
/// path), for Min/Max only the minimal bottleneck, while BSum keeps the full
/// aggregate set because clamping is not monotone.
pub fn value_of_finite_word(
    wa: &WeightedAutomaton,
    word: &[String],
) -> Result<ExtValue, FinwordError> {
    debug_assert_eq!(wa.base.mode, Mode::FiniteWord);
    let f = wa
        .valuefn
        .fin()
        .ok_or_else(|| FinwordError::UnsupportedValueFn(wa.valuefn.to_string()))?;
    // Per state, the set of achievable aggregates at the current position.
    // Monotone value functions are pruned to the minimum aggregate.
    let prune = !matches!(f, FinValueFn::BSum(_));
    let mut current: HashMap<&String, BTreeSet<Tracker>> = HashMap::new();
    for q in &wa.base.initial {
        current.entry(q).or_default().insert(Tracker::Start);
    }
    for letter in word {
        let mut next: HashMap<&String, BTreeSet<Tracker>> = HashMap::new();
        for t in &wa.base.transitions {
            if t.letter != *letter {
                continue;
            }
            let Some(trackers) = current.get(&t.from) else { continue };
            let w = match wa.weight_of(t) {
                Weight::Rational(r) => r,
                Weight::Silent => unreachable!("silent weight in finite-word mode"),
            };
            let entry = next.entry(&t.to).or_default();
            for tracker in trackers {
                entry.insert(step_tracker(f, tracker, w));
            }
        }
        if prune {
            for trackers in next.values_mut() {
                if let Some(min) = trackers.iter().min_by(|a, b| cmp_tracker(a, b)).cloned() {
                    trackers.clear();
                    trackers.insert(min);
                }
            }
        }
        current = next;
        if current.is_empty() {
            return Ok(ExtValue::Infinity);
        }
    }
    let mut best: Option<ExtValue> = None;
    for (q, trackers) in &current {
        if !wa.base.accepting.contains(*q) {
            continue;
        }
        for tracker in trackers {
            let v = tracker_value(f, tracker);
            best = Some(match best {
                None => v,
                Some(ExtValue::Bottom) | Some(ExtValue::Infinity) => v,
                Some(b) => {
                    if matches!(v, ExtValue::Bottom) {
                        b
                    } else {
                        b.min_for_infimum(v)
                    }
                }
            });
        }
    }
    Ok(best.unwrap_or(ExtValue::Infinity))
}

/// Tracker comparison for pruning monotone value functions: smaller
/// aggregates always lead to smaller or equal final values.
fn cmp_tracker(a: &Tracker, b: &Tracker) -> std::cmp::Ordering {
    match (a, b) {
        (Tracker::Val(x), Tracker::Val(y)) => x.cmp(y),
        _ => std::cmp::Ordering::Equal,
    }
}

/// A finite-word weighted automaton split by output value: one deterministic
/// recognizer per achievable value, with pairwise disjoint languages whose
/// union is the source language restricted to nonempty words. The empty
/// word, whose value is the external ⊥, is reported separately.
#[derive(Debug, Clone)]
pub struct ValueDecomposition {
    pub entries: Vec<(Rat, Automaton)>,
    /// True when the source accepts the empty word (value ⊥).
    pub accepts_empty: bool,
}

impl ValueDecomposition {
    /// The value of `word` according to the decomposition: the value of the
    /// unique recognizer accepting it, `Bottom` for an accepted empty word,
    /// `Infinity` otherwise.
    pub fn lookup(&self, word: &[String]) -> ExtValue {
        if word.is_empty() {
            return if self.accepts_empty {
                ExtValue::Bottom
            } else {
                ExtValue::Infinity
            };
        }
        for (value, recognizer) in &self.entries {
            if recognizer.accepts_finite(word) {
                return ExtValue::Rational(value.clone());
            }
        }
        ExtValue::Infinity
    }
}

/// Decompose a Min/Max/BSum automaton into per-value deterministic
/// recognizers via a subset construction over (state, aggregate) pairs. The
/// subset DFA is shared by all recognizers, so disjointness and determinism
/// hold by construction; each subset's output value is the minimum value
/// achievable at an accepting member (the automaton value being the infimum
/// over runs).
pub fn decompose(wa: &WeightedAutomaton) -> Result<ValueDecomposition, FinwordError> {
    debug_assert_eq!(wa.base.mode, Mode::FiniteWord);
    let f = wa
        .valuefn
        .fin()
        .ok_or_else(|| FinwordError::UnsupportedValueFn(wa.valuefn.to_string()))?;
    // Min/Max/BSum always terminate (finitely many aggregates). Sum/Sum⁺
    // are attempted too — slaves whose behavior happens to be regular (e.g.
    // finite languages) decompose fine; genuinely unbounded aggregation
    // runs into the state cap and errors out.

    type Subset = BTreeSet<(String, Tracker)>;
    let start: Subset = wa
        .base
        .initial
        .iter()
        .map(|q| (q.clone(), Tracker::Start))
        .collect();
    let mut ids: HashMap<Subset, usize> = HashMap::from([(start.clone(), 0)]);
    let mut subsets: Vec<Subset> = vec![start];
    let mut transitions: Vec<(usize, String, usize)> = Vec::new();
    let mut queue = VecDeque::from([0usize]);
    while let Some(id) = queue.pop_front() {
        let subset = subsets[id].clone();
        for letter in wa.base.alphabet.letters() {
            let mut next: Subset = BTreeSet::new();
            for t in &wa.base.transitions {
                if t.letter != *letter {
                    continue;
                }
                let w = match wa.weight_of(t) {
                    Weight::Rational(r) => r,
                    Weight::Silent => unreachable!("silent weight in finite-word mode"),
                };
                for (q, tracker) in &subset {
                    if *q == t.from {
                        next.insert((t.to.clone(), step_tracker(f, tracker, w)));
                    }
                }
            }
            if next.is_empty() {
                continue;
            }
            let next_id = match ids.get(&next) {
                Some(&i) => i,
                None => {
                    let i = subsets.len();
                    if i >= DECOMPOSE_STATE_CAP {
                        return Err(FinwordError::DecompositionTooLarge(DECOMPOSE_STATE_CAP));
                    }
                    ids.insert(next.clone(), i);
                    subsets.push(next);
                    queue.push_back(i);
                    i
                }
            };
            transitions.push((id, letter.clone(), next_id));
        }
    }

    // Output value per subset: infimum over accepting members.
    let mut outputs: Vec<Option<ExtValue>> = Vec::with_capacity(subsets.len());
    for subset in &subsets {
        let mut best: Option<ExtValue> = None;
        for (q, tracker) in subset {
            if !wa.base.accepting.contains(q) {
                continue;
            }
            let v = tracker_value(f, tracker);
            best = Some(match (best, v) {
                (None, v) => v,
                (Some(ExtValue::Bottom), v) | (Some(v), ExtValue::Bottom) => v,
                (Some(ExtValue::Rational(a)), ExtValue::Rational(b)) => {
                    ExtValue::Rational(a.min(b))
                }
                (Some(a), _) => a,
            });
        }
        outputs.push(best);
    }
    let accepts_empty = matches!(outputs[0], Some(ExtValue::Bottom));

    let state_name = |i: usize| format!("d{i}");
    let values: BTreeSet<Rat> = outputs
        .iter()
        .flatten()
        .filter_map(|v| v.rational().cloned())
        .collect();
    let mut entries = Vec::new();
    for value in values {
        let accepting: BTreeSet<String> = outputs
            .iter()
            .enumerate()
            .filter(|(_, out)| matches!(out, Some(ExtValue::Rational(r)) if *r == value))
            .map(|(i, _)| state_name(i))
            .collect();
        let recognizer = Automaton {
            alphabet: wa.base.alphabet.clone(),
            states: (0..subsets.len()).map(state_name).collect(),
            initial: BTreeSet::from([state_name(0)]),
            transitions: transitions
                .iter()
                .map(|(from, letter, to)| {
                    Transition::new(state_name(*from), letter.clone(), state_name(*to))
                })
                .collect(),
            accepting,
            mode: Mode::FiniteWord,
        };
        entries.push((value, recognizer));
    }
    Ok(ValueDecomposition {
        entries,
        accepts_empty,
    })
}

/// Enumerate every accepting run of a finite-word automaton on `word`,
/// returning the weight sequence of each run. Exponential; used by tests to
/// cross-check the DP (see also the independent oracle).
#[cfg(test)]
fn enumerate_run_values(wa: &WeightedAutomaton, word: &[String]) -> Vec<Vec<Rat>> {
    fn go(
        wa: &WeightedAutomaton,
        word: &[String],
        pos: usize,
        state: &String,
        acc: &mut Vec<Rat>,
        out: &mut Vec<Vec<Rat>>,
    ) {
        if pos == word.len() {
            if wa.base.accepting.contains(state) {
                out.push(acc.clone());
            }
            return;
        }
        for t in &wa.base.transitions {
            if t.from == *state && t.letter == word[pos] {
                let w = wa.weight_of(t).as_rational().unwrap().clone();
                acc.push(w);
                go(wa, word, pos + 1, &t.to, acc, out);
                acc.pop();
            }
        }
    }
    let mut out = Vec::new();
    for q in &wa.base.initial {
        go(wa, word, 0, q, &mut Vec::new(), &mut out);
    }
    out
}

/// All words over `alphabet` of length ≤ `max_len`, shortest first.
pub fn words_up_to(alphabet: &[String], max_len: usize) -> Vec<Vec<String>> {
    let mut out: Vec<Vec<String>> = vec![vec![]];
    let mut frontier: Vec<Vec<String>> = vec![vec![]];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for w in &frontier {
            for l in alphabet {
                let mut w2 = w.clone();
                w2.push(l.clone());
                next.push(w2);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{build_weighted_fin, letters};
    use crate::value::eval_fin;

    /// Slave counting letters to the final b: accepts a^k b with value k+1
    /// if weights are all 1 — here weights chosen so a^k b has value k
    /// (weight 1 per a, 0 for the final b).
    fn ak_b_counter() -> WeightedAutomaton {
        build_weighted_fin(
            FinValueFn::Sum,
            &["a", "b"],
            &["q", "f"],
            &["q"],
            &["f"],
            &[("q", "a", "q", 1), ("q", "b", "f", 0)],
        )
    }

    #[test]
    fn sum_counts_a_before_b() {
        let wa = ak_b_counter();
        assert_eq!(
            value_of_finite_word(&wa, &letters("aab")).unwrap(),
            ExtValue::Rational(rat_int(2))
        );
    }

    #[test]
    fn unaccepted_word_is_infinity() {
        let wa = ak_b_counter();
        assert_eq!(
            value_of_finite_word(&wa, &letters("aba")).unwrap(),
            ExtValue::Infinity
        );
    }

    #[test]
    fn nondeterministic_sum_takes_infimum() {
        // Two runs on "ab": via r with value 3, via s with value 5.
        let wa = build_weighted_fin(
            FinValueFn::Sum,
            &["a", "b"],
            &["q", "r", "s", "f"],
            &["q"],
            &["f"],
            &[
                ("q", "a", "r", 1),
                ("r", "b", "f", 2),
                ("q", "a", "s", 2),
                ("s", "b", "f", 3),
            ],
        );
        let runs = enumerate_run_values(&wa, &letters("ab"));
        assert_eq!(runs.len(), 2);
        assert_eq!(
            value_of_finite_word(&wa, &letters("ab")).unwrap(),
            ExtValue::Rational(rat_int(3))
        );
    }

    #[test]
    fn empty_word_accepted_is_bottom() {
        let wa = build_weighted_fin(
            FinValueFn::Sum,
            &["a"],
            &["q"],
            &["q"],
            &["q"],
            &[("q", "a", "q", 1)],
        );
        assert_eq!(value_of_finite_word(&wa, &[]).unwrap(), ExtValue::Bottom);
    }

    #[test]
    fn bsum_clamps_in_word_value() {
        // Single path of weights 3 then -1 with bound 2: first prefix
        // overflows, value is the bound.
        let wa = build_weighted_fin(
            FinValueFn::BSum(2),
            &["a", "b"],
            &["q", "r", "f"],
            &["q"],
            &["f"],
            &[("q", "a", "r", 3), ("r", "b", "f", -1)],
        );
        assert_eq!(
            value_of_finite_word(&wa, &letters("ab")).unwrap(),
            ExtValue::Rational(rat_int(2))
        );
    }

    #[test]
    fn max_decomposition_has_entries_within_weight_range() {
        let wa = build_weighted_fin(
            FinValueFn::Max,
            &["a", "b"],
            &["q", "f"],
            &["q"],
            &["f"],
            &[("q", "a", "q", 0), ("q", "b", "f", 1), ("f", "a", "f", 0)],
        );
        let dec = decompose(&wa).unwrap();
        assert!(dec.entries.len() <= 2);
        for (v, _) in &dec.entries {
            assert!(*v == rat_int(0) || *v == rat_int(1));
        }
    }

    #[test]
    fn decomposition_matches_direct_value_exhaustively() {
        // Nondeterministic Min automaton: value may depend on the chosen run.
        let wa = build_weighted_fin(
            FinValueFn::Min,
            &["a", "b"],
            &["q", "r", "f"],
            &["q"],
            &["f"],
            &[
                ("q", "a", "q", 2),
                ("q", "a", "r", 5),
                ("r", "b", "f", 1),
                ("q", "b", "f", 4),
                ("f", "a", "q", 3),
            ],
        );
        let dec = decompose(&wa).unwrap();
        let sigma = letters("ab");
        for word in words_up_to(&sigma, 8) {
            let direct = value_of_finite_word(&wa, &word).unwrap();
            assert_eq!(dec.lookup(&word), direct, "word {word:?}");
        }
    }

    #[test]
    fn recognizers_are_disjoint_and_deterministic() {
        let wa = build_weighted_fin(
            FinValueFn::BSum(2),
            &["a", "b"],
            &["q", "f"],
            &["q"],
            &["f"],
            &[
                ("q", "a", "q", 1),
                ("q", "b", "f", 1),
                ("f", "a", "q", -1),
                ("f", "b", "f", 3),
            ],
        );
        let dec = decompose(&wa).unwrap();
        for (_, r) in &dec.entries {
            assert!(r.is_deterministic());
        }
        let sigma = letters("ab");
        for word in words_up_to(&sigma, 8) {
            let hits = dec
                .entries
                .iter()
                .filter(|(_, r)| r.accepts_finite(&word))
                .count();
            assert!(hits <= 1, "word {word:?} accepted by {hits} recognizers");
        }
    }

    #[test]
    fn bsum_overflowing_words_map_to_bound_entry() {
        let wa = build_weighted_fin(
            FinValueFn::BSum(2),
            &["a", "b"],
            &["q", "f"],
            &["q"],
            &["f"],
            &[("q", "a", "f", 3), ("q", "b", "f", 1)],
        );
        let dec = decompose(&wa).unwrap();
        assert_eq!(dec.lookup(&letters("a")), ExtValue::Rational(rat_int(2)));
        assert_eq!(dec.lookup(&letters("b")), ExtValue::Rational(rat_int(1)));
    }

    #[test]
    fn unbounded_sum_decomposition_hits_the_cap() {
        let wa = ak_b_counter();
        assert!(matches!(
            decompose(&wa),
            Err(FinwordError::DecompositionTooLarge(_))
        ));
    }

    #[test]
    fn dp_value_never_exceeds_any_enumerated_run() {
        let wa = build_weighted_fin(
            FinValueFn::Sum,
            &["a", "b"],
            &["q", "r", "f"],
            &["q"],
            &["f"],
            &[
                ("q", "a", "q", 1),
                ("q", "a", "r", 0),
                ("r", "a", "q", 2),
                ("q", "b", "f", 1),
                ("r", "b", "f", 5),
            ],
        );
        let sigma = letters("ab");
        for word in words_up_to(&sigma, 6) {
            let dp = value_of_finite_word(&wa, &word).unwrap();
            for run in enumerate_run_values(&wa, &word) {
                let run_val = eval_fin(&FinValueFn::Sum, &run);
                if let (ExtValue::Rational(dp), ExtValue::Rational(rv)) = (&dp, &run_val) {
                    assert!(dp <= rv);
                }
            }
        }
    }
}
