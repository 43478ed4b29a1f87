//! Reductions from nested weighted automata to plain (possibly silent)
//! weighted automata, and the supporting automaton transformations used by
//! the deciders.
//!
//! The central construction ([`lemma4_reduce`]) simulates a nested automaton
//! whose slaves are *regular* (Min/Max/BSum — finitely many output values,
//! each with a regular language): instead of running a slave, the reduced
//! automaton guesses the value the slave will return, takes a transition of
//! that weight (silent for a ⊥ guess), and verifies the guess by running the
//! deterministic per-value recognizer. Pending recognizers are tracked in
//! two obligation sets P₁/P₂: new recognizers enter P₁, recognizers are
//! dropped on acceptance, and whenever P₂ empties the whole of P₁ is demoted
//! into P₂. Requiring "P₂ empty" infinitely often (a generalized Büchi set)
//! forces every recognizer to terminate. [`boolean_projection`] applies the
//! same bookkeeping with values dropped to recover the Büchi language of
//! words having an accepting run.

use crate::automaton::{
    Alphabet, Automaton, GenBuchiAcceptance, Mode, Transition, ValueFn, WeightedAutomaton,
};
use crate::finword::{decompose, FinwordError};
use crate::graph::sccs;
use crate::nested::{silent_slave, NestedWeightedAutomaton, NwaClass};
use crate::value::{rat_int, FinValueFn, InfValueFn, Rat, Weight};
use num::Signed;
use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use thiserror::Error;

/// Default cap on states materialized by any construction in this module.
pub const DEFAULT_STATE_LIMIT: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReduceError {
    #[error("slave {0} is not regular (Min/Max/BSum): {1}")]
    NotRegularSlave(usize, FinwordError),
    #[error("construction exceeded the state limit {0}")]
    StateLimit(usize),
    #[error("value function `{0}` is not supported by this pass")]
    UnsupportedValueFn(String),
    #[error("negative weight in a Sum⁺ slave is folded by absolute value")]
    NegativeWeightInSumPlus,
    #[error("no run survives the multiplicity cap {0}")]
    CapExceededEverywhere(usize),
    #[error("transform requires a deterministic nested automaton")]
    NotDeterministic,
}

// ---------------------------------------------------------------------------
// Generalized Büchi degeneralization.
// ---------------------------------------------------------------------------

/// Standard counter construction: states are (state, d) with d ∈ 1..=s;
/// the counter advances past d when the source state lies in F_d, and the
/// degeneralized accepting set is {(q, 1) : q ∈ F₁}. A run hits it
/// infinitely often iff the counter cycles forever, i.e. iff every F_d is
/// visited infinitely often.
pub fn degeneralize(wa: &WeightedAutomaton, acc: &GenBuchiAcceptance) -> WeightedAutomaton {
    debug_assert_eq!(wa.base.mode, Mode::InfiniteWord);
    let s = acc.sets.len();
    let name = |q: &String, d: usize| format!("{q}#{d}");
    let mut states = BTreeSet::new();
    let mut transitions = BTreeSet::new();
    let mut weight = BTreeMap::new();
    for q in &wa.base.states {
        for d in 1..=s {
            states.insert(name(q, d));
        }
    }
    for t in &wa.base.transitions {
        for d in 1..=s {
            let d2 = if acc.sets[d - 1].contains(&t.from) {
                d % s + 1
            } else {
                d
            };
            let nt = Transition::new(name(&t.from, d), t.letter.clone(), name(&t.to, d2));
            weight.insert(nt.clone(), wa.weight_of(t).clone());
            transitions.insert(nt);
        }
    }
    let accepting: BTreeSet<String> = acc.sets[0].iter().map(|q| name(q, 1)).collect();
    WeightedAutomaton {
        base: Automaton {
            alphabet: wa.base.alphabet.clone(),
            states,
            initial: wa.base.initial.iter().map(|q| name(q, 1)).collect(),
            transitions,
            accepting,
            mode: Mode::InfiniteWord,
        },
        weight,
        valuefn: wa.valuefn.clone(),
    }
}

/// Boolean counterpart of [`degeneralize`].
pub fn degeneralize_boolean(a: &Automaton, acc: &GenBuchiAcceptance) -> Automaton {
    let wa = WeightedAutomaton {
        weight: a
            .transitions
            .iter()
            .map(|t| (t.clone(), Weight::Rational(rat_int(0))))
            .collect(),
        base: a.clone(),
        valuefn: ValueFn::Inf(InfValueFn::LimAvg),
    };
    degeneralize(&wa, acc).base
}

// ---------------------------------------------------------------------------
// The key reduction: regular slaves → silent weighted automaton.
// ---------------------------------------------------------------------------

/// Deterministic recognizer table for one nested automaton: per-value
/// recognizers of every slave, with globally namespaced states.
struct RecognizerTable {
    /// Per slave (1-based): achievable values with the namespaced initial
    /// state of the value's recognizer, plus whether ε (⊥) is accepted.
    guesses: Vec<(Vec<(Rat, String)>, bool)>,
    /// Deterministic partial step function over namespaced states.
    step: HashMap<(String, String), String>,
    /// Namespaced accepting states.
    accepting: BTreeSet<String>,
}

fn recognizer_table(nwa: &NestedWeightedAutomaton) -> Result<RecognizerTable, ReduceError> {
    let mut guesses = Vec::new();
    let mut step = HashMap::new();
    let mut accepting = BTreeSet::new();
    for (idx, slave) in nwa.slaves.iter().enumerate() {
        let i = idx + 1;
        let dec = decompose(slave).map_err(|e| ReduceError::NotRegularSlave(i, e))?;
        let mut values = Vec::new();
        for (vi, (value, rec)) in dec.entries.iter().enumerate() {
            let ns = |q: &String| format!("s{i}v{vi}:{q}");
            values.push((value.clone(), ns(rec.initial.iter().next().unwrap())));
            for t in &rec.transitions {
                step.insert((ns(&t.from), t.letter.clone()), ns(&t.to));
            }
            for q in &rec.accepting {
                accepting.insert(ns(q));
            }
        }
        guesses.push((values, dec.accepts_empty));
    }
    Ok(RecognizerTable {
        guesses,
        step,
        accepting,
    })
}

impl RecognizerTable {
    /// Deterministically step every obligation; `None` when some obligation
    /// is stuck (its recognizer can no longer accept), then drop the
    /// obligations discharged by reaching an accepting state.
    fn step_set(&self, set: &BTreeSet<String>, letter: &str) -> Option<BTreeSet<String>> {
        let mut out = BTreeSet::new();
        for q in set {
            let next = self.step.get(&(q.clone(), letter.to_string()))?;
            if !self.accepting.contains(next) {
                out.insert(next.clone());
            }
        }
        Some(out)
    }
}

/// Simulation state of the reduced automaton: master state, the value guess
/// carried by the incoming transition (which is that transition's weight),
/// and the two obligation sets.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SimState {
    pub master_state: String,
    /// `None` encodes the ⊥ guess (silent transition).
    pub guess: Option<Rat>,
    pub p1: BTreeSet<String>,
    pub p2: BTreeSet<String>,
}

impl SimState {
    fn name(&self) -> String {
        let set = |s: &BTreeSet<String>| s.iter().cloned().collect::<Vec<_>>().join(",");
        let g = match &self.guess {
            None => "⊥".to_string(),
            Some(r) => r.to_string(),
        };
        format!("[{}|{}|{{{}}}|{{{}}}]", self.master_state, g, set(&self.p1), set(&self.p2))
    }
}

/// Reduce a nested automaton with regular slaves to an equivalent silent
/// weighted automaton over the same alphabet and master value function,
/// with the generalized Büchi acceptance degeneralized away.
///
/// Transitions guess the value of the slave invoked at the current
/// position: a rational guess `j` becomes the transition weight and seeds
/// the recognizer for value `j` of the invoked slave (stepped on the
/// current letter — the slave reads the letter it is invoked on); a ⊥ guess
/// is a silent transition and is allowed only when the slave accepts the
/// empty word. The guess is recorded in the target state so that parallel
/// guesses stay distinct transitions.
pub fn lemma4_reduce(
    nwa: &NestedWeightedAutomaton,
    limit: usize,
) -> Result<WeightedAutomaton, ReduceError> {
    let table = recognizer_table(nwa)?;
    let initial = SimState {
        master_state: nwa.master.initial.iter().next().cloned().unwrap_or_default(),
        guess: Some(rat_int(0)),
        p1: BTreeSet::new(),
        p2: BTreeSet::new(),
    };
    // Nondeterministic masters have several initial states.
    let initials: Vec<SimState> = nwa
        .master
        .initial
        .iter()
        .map(|q| SimState {
            master_state: q.clone(),
            ..initial.clone()
        })
        .collect();

    let mut seen: BTreeSet<SimState> = initials.iter().cloned().collect();
    let mut queue: VecDeque<SimState> = initials.iter().cloned().collect();
    let mut transitions: Vec<(SimState, String, SimState)> = Vec::new();
    while let Some(state) = queue.pop_front() {
        for t in &nwa.master.transitions {
            if t.from != state.master_state {
                continue;
            }
            let label = nwa.labels[t];
            let (values, accepts_empty) = &table.guesses[label - 1];
            let mut candidates: Vec<(Option<Rat>, Option<String>)> = Vec::new();
            if *accepts_empty {
                candidates.push((None, None));
            }
            for (value, init) in values {
                candidates.push((Some(value.clone()), Some(init.clone())));
            }
            for (guess, seed_init) in candidates {
                let target = match &seed_init {
                    // ⊥ guess: plain synchronous step of both sets.
                    None => {
                        let (Some(p1), Some(p2)) = (
                            table.step_set(&state.p1, &t.letter),
                            table.step_set(&state.p2, &t.letter),
                        ) else {
                            continue;
                        };
                        SimState {
                            master_state: t.to.clone(),
                            guess: None,
                            p1,
                            p2,
                        }
                    }
                    Some(init) => {
                        // Seed the new recognizer, consuming the current
                        // letter; a seed that accepts immediately is
                        // discharged on the spot.
                        let seed: BTreeSet<String> =
                            match table.step.get(&(init.clone(), t.letter.clone())) {
                                None => continue, // no word starting here has this value
                                Some(next) if table.accepting.contains(next) => BTreeSet::new(),
                                Some(next) => BTreeSet::from([next.clone()]),
                            };
                        if state.p2.is_empty() {
                            // Restart: current obligations demote to P₂.
                            let Some(p2) = table.step_set(&state.p1, &t.letter) else {
                                continue;
                            };
                            SimState {
                                master_state: t.to.clone(),
                                guess: guess.clone(),
                                p1: seed,
                                p2,
                            }
                        } else {
                            let (Some(mut p1), Some(p2)) = (
                                table.step_set(&state.p1, &t.letter),
                                table.step_set(&state.p2, &t.letter),
                            ) else {
                                continue;
                            };
                            p1.extend(seed);
                            SimState {
                                master_state: t.to.clone(),
                                guess: guess.clone(),
                                p1,
                                p2,
                            }
                        }
                    }
                };
                transitions.push((state.clone(), t.letter.clone(), target.clone()));
                if seen.insert(target.clone()) {
                    if seen.len() > limit {
                        return Err(ReduceError::StateLimit(limit));
                    }
                    queue.push_back(target);
                }
            }
        }
    }

    let mut states = BTreeSet::new();
    let mut trans = BTreeSet::new();
    let mut weight = BTreeMap::new();
    for s in &seen {
        states.insert(s.name());
    }
    for (from, letter, to) in &transitions {
        let t = Transition::new(from.name(), letter.clone(), to.name());
        let w = match &to.guess {
            None => Weight::Silent,
            Some(r) => Weight::Rational(r.clone()),
        };
        weight.insert(t.clone(), w);
        trans.insert(t);
    }
    let f1: BTreeSet<String> = seen
        .iter()
        .filter(|s| nwa.master.accepting.contains(&s.master_state))
        .map(SimState::name)
        .collect();
    let f2: BTreeSet<String> = seen
        .iter()
        .filter(|s| s.p2.is_empty())
        .map(SimState::name)
        .collect();
    let wa = WeightedAutomaton {
        base: Automaton {
            alphabet: nwa.master.alphabet.clone(),
            states,
            initial: initials.iter().map(SimState::name).collect(),
            transitions: trans,
            accepting: BTreeSet::new(),
            mode: Mode::InfiniteWord,
        },
        weight,
        valuefn: ValueFn::Inf(nwa.masterfn),
    };
    Ok(degeneralize(&wa, &GenBuchiAcceptance::new(vec![f1, f2])))
}

// ---------------------------------------------------------------------------
// Boolean projection.
// ---------------------------------------------------------------------------

/// Nondeterministic analogue of the obligation tables: each tracked slave
/// state steps to any of its successors.
struct BoolTable {
    /// Per slave (1-based): namespaced initial states and whether ε is
    /// accepted (some initial state accepting).
    slaves: Vec<(Vec<String>, bool)>,
    successors: HashMap<(String, String), Vec<String>>,
    accepting: BTreeSet<String>,
}

impl BoolTable {
    /// All possible images of the obligation set under one step: every
    /// member picks one successor. Empty when some member is stuck.
    fn step_sets(&self, set: &BTreeSet<String>, letter: &str) -> Vec<BTreeSet<String>> {
        let mut results: Vec<BTreeSet<String>> = vec![BTreeSet::new()];
        for q in set {
            let Some(succs) = self.successors.get(&(q.clone(), letter.to_string())) else {
                return Vec::new();
            };
            let mut next = Vec::new();
            for r in &results {
                for s in succs {
                    let mut r2 = r.clone();
                    if !self.accepting.contains(s) {
                        r2.insert(s.clone());
                    }
                    next.push(r2);
                }
            }
            next.sort();
            next.dedup();
            results = next;
        }
        results
    }
}

/// Büchi automaton accepting exactly the words on which the nested
/// automaton has an accepting run: master Büchi acceptance, termination of
/// every slave (obligation sets as in the key reduction, with weights
/// dropped and nondeterministic slave stepping), and infinitely many
/// non-silent invocations (a transition flag feeding a third acceptance
/// set).
pub fn boolean_projection(
    nwa: &NestedWeightedAutomaton,
    limit: usize,
) -> Result<Automaton, ReduceError> {
    let parts = boolean_projection_parts(nwa, limit)?;
    let mut sets = vec![BTreeSet::new(), BTreeSet::new(), BTreeSet::new()];
    for (i, name) in parts.names.iter().enumerate() {
        for (k, flags) in [&parts.f1, &parts.f2, &parts.f3].iter().enumerate() {
            if flags[i] {
                sets[k].insert(name.clone());
            }
        }
    }
    let base = Automaton {
        alphabet: nwa.master.alphabet.clone(),
        states: parts.names.iter().cloned().collect(),
        initial: parts.initials.iter().map(|&i| parts.names[i].clone()).collect(),
        transitions: parts
            .transitions
            .iter()
            .map(|(f, l, _, t)| {
                Transition::new(parts.names[*f].clone(), l.clone(), parts.names[*t].clone())
            })
            .collect(),
        accepting: BTreeSet::new(),
        mode: Mode::InfiniteWord,
    };
    Ok(degeneralize_boolean(&base, &GenBuchiAcceptance::new(sets)))
}

/// Pre-degeneralization structure of [`boolean_projection`], with the
/// invoked slave label retained on every transition. Used by the
/// (Inf;Sum)/(LimInf;Sum) emptiness decider, which runs a distinguished
/// weighted slave copy alongside this Boolean machinery.
pub(crate) struct BoolProjectionParts {
    pub names: Vec<String>,
    pub initials: Vec<usize>,
    /// (from, letter, invoked slave label (1-based), to)
    pub transitions: Vec<(usize, String, usize, usize)>,
    /// Master-accepting / no-pending-obligations / non-silent flags.
    pub f1: Vec<bool>,
    pub f2: Vec<bool>,
    pub f3: Vec<bool>,
}

pub(crate) fn boolean_projection_parts(
    nwa: &NestedWeightedAutomaton,
    limit: usize,
) -> Result<BoolProjectionParts, ReduceError> {
    let mut successors: HashMap<(String, String), Vec<String>> = HashMap::new();
    let mut accepting = BTreeSet::new();
    let mut slaves = Vec::new();
    for (idx, slave) in nwa.slaves.iter().enumerate() {
        let i = idx + 1;
        let ns = |q: &String| format!("b{i}:{q}");
        for t in &slave.base.transitions {
            successors
                .entry((ns(&t.from), t.letter.clone()))
                .or_default()
                .push(ns(&t.to));
        }
        for q in &slave.base.accepting {
            accepting.insert(ns(q));
        }
        let inits: Vec<String> = slave.base.initial.iter().map(|q| ns(q)).collect();
        let eps = slave
            .base
            .initial
            .iter()
            .any(|q| slave.base.accepting.contains(q));
        slaves.push((inits, eps));
    }
    let table = BoolTable {
        slaves,
        successors,
        accepting,
    };

    #[derive(Clone, PartialEq, Eq, PartialOrd, Ord)]
    struct BState {
        master_state: String,
        nonsilent: bool,
        p1: BTreeSet<String>,
        p2: BTreeSet<String>,
    }
    impl BState {
        fn name(&self) -> String {
            let set = |s: &BTreeSet<String>| s.iter().cloned().collect::<Vec<_>>().join(",");
            format!(
                "[{}|{}|{{{}}}|{{{}}}]",
                self.master_state,
                if self.nonsilent { "!" } else { "." },
                set(&self.p1),
                set(&self.p2)
            )
        }
    }

    let initials: Vec<BState> = nwa
        .master
        .initial
        .iter()
        .map(|q| BState {
            master_state: q.clone(),
            nonsilent: false,
            p1: BTreeSet::new(),
            p2: BTreeSet::new(),
        })
        .collect();
    let mut seen: BTreeSet<BState> = initials.iter().cloned().collect();
    let mut queue: VecDeque<BState> = initials.iter().cloned().collect();
    let mut transitions: Vec<(BState, String, usize, BState)> = Vec::new();
    while let Some(state) = queue.pop_front() {
        for t in &nwa.master.transitions {
            if t.from != state.master_state {
                continue;
            }
            let label = nwa.labels[t];
            let (inits, eps) = &table.slaves[label - 1];
            let mut targets: Vec<BState> = Vec::new();
            // Silent choice: the slave does its empty run.
            if *eps {
                for p1 in table.step_sets(&state.p1, &t.letter) {
                    for p2 in table.step_sets(&state.p2, &t.letter) {
                        targets.push(BState {
                            master_state: t.to.clone(),
                            nonsilent: false,
                            p1: p1.clone(),
                            p2,
                        });
                    }
                }
            }
            // Non-silent choice: guess a slave run of ≥ 1 transitions,
            // tracked from the successor of a chosen initial state.
            let mut seeds: Vec<BTreeSet<String>> = Vec::new();
            for init in inits {
                if let Some(succs) = table.successors.get(&(init.clone(), t.letter.clone())) {
                    for s in succs {
                        if table.accepting.contains(s) {
                            seeds.push(BTreeSet::new());
                        } else {
                            seeds.push(BTreeSet::from([s.clone()]));
                        }
                    }
                }
            }
            seeds.sort();
            seeds.dedup();
            for seed in seeds {
                if state.p2.is_empty() {
                    for p2 in table.step_sets(&state.p1, &t.letter) {
                        targets.push(BState {
                            master_state: t.to.clone(),
                            nonsilent: true,
                            p1: seed.clone(),
                            p2,
                        });
                    }
                } else {
                    for p1 in table.step_sets(&state.p1, &t.letter) {
                        for p2 in table.step_sets(&state.p2, &t.letter) {
                            let mut p1x = p1.clone();
                            p1x.extend(seed.iter().cloned());
                            targets.push(BState {
                                master_state: t.to.clone(),
                                nonsilent: true,
                                p1: p1x,
                                p2,
                            });
                        }
                    }
                }
            }
            for target in targets {
                transitions.push((state.clone(), t.letter.clone(), label, target.clone()));
                if seen.insert(target.clone()) {
                    if seen.len() > limit {
                        return Err(ReduceError::StateLimit(limit));
                    }
                    queue.push_back(target);
                }
            }
        }
    }

    let idx: BTreeMap<&BState, usize> = seen.iter().enumerate().map(|(i, s)| (s, i)).collect();
    Ok(BoolProjectionParts {
        names: seen.iter().map(BState::name).collect(),
        initials: initials.iter().map(|s| idx[s]).collect(),
        transitions: transitions
            .iter()
            .map(|(f, l, lab, t)| (idx[f], l.clone(), *lab, idx[t]))
            .collect(),
        f1: seen
            .iter()
            .map(|s| nwa.master.accepting.contains(&s.master_state))
            .collect(),
        f2: seen.iter().map(|s| s.p2.is_empty()).collect(),
        f3: seen.iter().map(|s| s.nonsilent).collect(),
    })
}

// ---------------------------------------------------------------------------
// Silent-weight elimination and A_fix.
// ---------------------------------------------------------------------------

/// Replace silent weights by λ+1 (Inf/LimInf) or λ−1 (Sup/LimSup): the
/// substitute can never help a run cross the threshold, so threshold-λ
/// emptiness and universality are preserved. Values are not preserved.
pub fn eliminate_silent(
    wa: &WeightedAutomaton,
    lambda: &Rat,
) -> Result<WeightedAutomaton, ReduceError> {
    let f = wa
        .valuefn
        .inf()
        .ok_or_else(|| ReduceError::UnsupportedValueFn(wa.valuefn.to_string()))?;
    let substitute = match f {
        InfValueFn::Inf | InfValueFn::LimInf => lambda + rat_int(1),
        InfValueFn::Sup | InfValueFn::LimSup => lambda - rat_int(1),
        InfValueFn::LimAvg => {
            return Err(ReduceError::UnsupportedValueFn(
                "LimAvg (handled by afix)".into(),
            ))
        }
    };
    let mut out = wa.clone();
    for w in out.weight.values_mut() {
        if w.is_silent() {
            *w = Weight::Rational(substitute.clone());
        }
    }
    Ok(out)
}

/// Result of [`afix`]: a silent-free LimAvg automaton whose transitions are
/// additionally marked when one of their silent-path expansions passes
/// through an accepting state.
#[derive(Debug, Clone)]
pub struct AfixResult {
    pub wa: WeightedAutomaton,
    /// Transitions some expansion of which visits an accepting state.
    pub accepting_passing: BTreeSet<Transition>,
}

/// Compress silent transitions of a LimAvg automaton: a transition
/// (q₁, a, q₂) of the result stands for silent path · non-silent a-step ·
/// silent path in the original, with weight the minimum over expansions.
/// Silent steps contribute nothing to a LimAvg value, so run values are
/// unchanged; Büchi visits inside compressed silent paths survive as
/// accepting-passing marks.
pub fn afix(wa: &WeightedAutomaton) -> AfixResult {
    debug_assert_eq!(wa.valuefn.inf(), Some(InfValueFn::LimAvg));
    // Silent closure: silent_reach[q] = set of (state, passed_accepting).
    let states: Vec<&String> = wa.base.states.iter().collect();
    // Silent adjacency with the accepting flag the step contributes.
    let mut sil_adj: HashMap<&String, Vec<(&String, bool)>> = HashMap::new();
    for t in &wa.base.transitions {
        if wa.weight_of(t).is_silent() {
            let step_acc =
                wa.base.accepting.contains(&t.from) || wa.base.accepting.contains(&t.to);
            sil_adj.entry(&t.from).or_default().push((&t.to, step_acc));
        }
    }
    // BFS per state over (state, passed-accepting), true dominating false.
    let mut closure: HashMap<&String, BTreeMap<&String, bool>> = HashMap::new();
    for &q in &states {
        let mut best: BTreeMap<&String, bool> = BTreeMap::new();
        best.insert(q, wa.base.accepting.contains(q));
        let mut queue: VecDeque<(&String, bool)> = VecDeque::from([(q, best[q])]);
        while let Some((s, acc)) = queue.pop_front() {
            for &(to, step_acc) in sil_adj.get(s).map(Vec::as_slice).unwrap_or(&[]) {
                let new_acc = acc || step_acc;
                match best.get(to) {
                    Some(&old) if old || !new_acc => {}
                    _ => {
                        best.insert(to, new_acc);
                        queue.push_back((to, new_acc));
                    }
                }
            }
        }
        closure.insert(q, best);
    }
    // Inverted index: silent predecessors of each state.
    let mut rclosure: HashMap<&String, Vec<(&String, bool)>> = HashMap::new();
    for (&q1, reach) in &closure {
        for (&s, &acc) in reach {
            rclosure.entry(s).or_default().push((q1, acc));
        }
    }
    let mut weight: BTreeMap<Transition, Weight> = BTreeMap::new();
    let mut marks: BTreeSet<Transition> = BTreeSet::new();
    for t in &wa.base.transitions {
        let Weight::Rational(w) = wa.weight_of(t) else {
            continue;
        };
        // q₁ silent-reaches t.from, then t, then t.to silent-reaches q₂.
        for &(q1, acc_pre) in rclosure.get(&t.from).map(Vec::as_slice).unwrap_or(&[]) {
            for (&q2, &acc_post) in &closure[&t.to] {
                let nt = Transition::new(q1.clone(), t.letter.clone(), q2.clone());
                let passes = acc_pre
                    || acc_post
                    || wa.base.accepting.contains(&t.from)
                    || wa.base.accepting.contains(&t.to);
                match weight.get(&nt) {
                    Some(Weight::Rational(old)) if old <= w => {}
                    _ => {
                        weight.insert(nt.clone(), Weight::Rational(w.clone()));
                    }
                }
                if passes {
                    marks.insert(nt);
                }
            }
        }
    }
    let transitions: BTreeSet<Transition> = weight.keys().cloned().collect();
    AfixResult {
        wa: WeightedAutomaton {
            base: Automaton {
                alphabet: wa.base.alphabet.clone(),
                states: wa.base.states.clone(),
                initial: wa.base.initial.clone(),
                transitions,
                accepting: wa.base.accepting.clone(),
                mode: Mode::InfiniteWord,
            },
            weight,
            valuefn: ValueFn::Inf(InfValueFn::LimAvg),
        },
        accepting_passing: marks,
    }
}

// ---------------------------------------------------------------------------
// Sum⁺ → BSum bounding (Theorem 8(3) preprocessing).
// ---------------------------------------------------------------------------

/// Turn an (f;Sum⁺) automaton into an (f;BSum(⌊λ⌋+1)) automaton preserving
/// threshold-λ decisions: weights are folded by absolute value (Sum⁺
/// semantics) and accumulation above λ clamps to ⌊λ⌋+1. Slave values ≤ λ
/// are preserved exactly; values > λ stay > λ. The bounded counter of the
/// construction lives in the downstream per-value decomposition, which
/// tracks the clamped running sum in recognizer states.
pub fn bound_sum_plus(
    nwa: &NestedWeightedAutomaton,
    lambda: &Rat,
) -> Result<NestedWeightedAutomaton, ReduceError> {
    if !matches!(
        nwa.masterfn,
        InfValueFn::Inf | InfValueFn::Sup | InfValueFn::LimInf | InfValueFn::LimSup
    ) {
        return Err(ReduceError::UnsupportedValueFn(nwa.masterfn.to_string()));
    }
    bound_sum_plus_any(nwa, lambda)
}

/// As `bound_sum_plus` without the master-function restriction. Only sound
/// when the caller has established that all relevant slave values stay
/// within the bound (the LimAvg universality decider does exactly that).
pub(crate) fn bound_sum_plus_any(
    nwa: &NestedWeightedAutomaton,
    lambda: &Rat,
) -> Result<NestedWeightedAutomaton, ReduceError> {
    assert!(
        *lambda >= rat_int(0),
        "Sum⁺ values are nonnegative; callers decide λ < 0 directly"
    );
    let bound: num::BigInt = lambda.floor().to_integer() + 1;
    let bound_u: u64 = bound.try_into().expect("threshold bound fits in u64");
    let mut out = nwa.clone();
    for slave in &mut out.slaves {
        // Transition-free slaves (the ε-only silent slave) return ⊥ on
        // every run; their value function is irrelevant and retagging is
        // harmless.
        if slave.valuefn.fin() != Some(&FinValueFn::SumPlus) && !slave.base.transitions.is_empty() {
            return Err(ReduceError::UnsupportedValueFn(slave.valuefn.to_string()));
        }
        for w in slave.weight.values_mut() {
            if let Weight::Rational(r) = w {
                *w = Weight::Rational(r.abs());
            }
        }
        slave.valuefn = ValueFn::Fin(FinValueFn::BSum(bound_u));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// (LimAvg; Sum⁺) pipeline, stage 1: determinization over choice functions.
// ---------------------------------------------------------------------------

/// Project a pipeline letter back to the letter of the original automaton:
/// strips the bounded-multiplicity annotation fields (`@…@…@…`) and then
/// the determinization choice suffix (`$…`).
pub fn base_letter(letter: &str) -> &str {
    let stripped = letter.rsplitn(4, '@').last().unwrap_or(letter);
    match stripped.rsplit_once('$') {
        Some((base, _)) => base,
        None => stripped,
    }
}

/// Rewrite a slave so that acceptance is decided by the transition taken
/// rather than by a state property: transitions into an accepting state
/// that has outgoing transitions (or is initial) get a parallel copy into a
/// fresh sink, and those states stop being accepting. Mid-run termination
/// then means "took the sink transition", and the only remaining state-level
/// acceptance is the ε run, which the determinization handles via a
/// separate silent copy. Run values are unchanged.
fn continue_copy(slave: &WeightedAutomaton) -> WeightedAutomaton {
    let problem: BTreeSet<&String> = slave
        .base
        .accepting
        .iter()
        .filter(|q| {
            slave.base.initial.contains(*q)
                || slave.base.transitions.iter().any(|t| &t.from == *q)
        })
        .collect();
    if problem.is_empty() {
        return slave.clone();
    }
    let mut fin = "fin".to_string();
    while slave.base.states.contains(&fin) {
        fin.push('\'');
    }
    let mut states = slave.base.states.clone();
    states.insert(fin.clone());
    let mut transitions = slave.base.transitions.clone();
    let mut weight = slave.weight.clone();
    for t in &slave.base.transitions {
        if problem.contains(&&t.to) {
            let nt = Transition::new(t.from.clone(), t.letter.clone(), fin.clone());
            weight.insert(nt.clone(), slave.weight_of(t).clone());
            transitions.insert(nt);
        }
    }
    let accepting: BTreeSet<String> = slave
        .base
        .accepting
        .iter()
        .filter(|q| !problem.contains(q))
        .cloned()
        .chain(std::iter::once(fin))
        .collect();
    WeightedAutomaton {
        base: Automaton {
            alphabet: slave.base.alphabet.clone(),
            states,
            initial: slave.base.initial.clone(),
            accepting,
            transitions,
            mode: Mode::FiniteWord,
        },
        weight,
        valuefn: slave.valuefn.clone(),
    }
}

/// Determinize a nested automaton by moving every per-position choice into
/// the input letter: the alphabet becomes pairs (base letter, choice
/// function) where the choice function fixes one successor for every master
/// and slave state with outgoing transitions on the base letter — encoded
/// as a `$`-suffix listing `role.state>target` entries (role 0 is the
/// master, role i slave i; an omitted entry means "terminate here"). All
/// simultaneous instances of a slave sitting in the same state take the
/// same transition; restricting runs this way preserves the infimum over
/// words, which is the contract this construction is used under
/// (word-by-word values are preserved only for deterministic inputs, which
/// come out isomorphic up to the letter renaming).
///
/// A slave that accepts ε additionally gets a silent copy: the choice
/// function omitting the slave's initial state routes the invocation there
/// (the ⊥ run), while a defined entry starts a genuine run.
pub fn determinize_limavg_sum(
    nwa: &NestedWeightedAutomaton,
    limit: usize,
) -> Result<NestedWeightedAutomaton, ReduceError> {
    let continues: Vec<WeightedAutomaton> = nwa.slaves.iter().map(continue_copy).collect();
    let eps: Vec<bool> = nwa
        .slaves
        .iter()
        .map(|s| s.base.initial.iter().any(|q| s.base.accepting.contains(q)))
        .collect();
    let k = nwa.slaves.len();
    let mut eps_slot: Vec<Option<usize>> = vec![None; k];
    {
        let mut next = k + 1;
        for i in 0..k {
            if eps[i] {
                eps_slot[i] = Some(next);
                next += 1;
            }
        }
    }

    let mut ext_letters: BTreeSet<String> = BTreeSet::new();
    let mut master_transitions: BTreeSet<Transition> = BTreeSet::new();
    let mut labels: BTreeMap<Transition, usize> = BTreeMap::new();
    let mut slave_transitions: Vec<Vec<(Transition, Weight)>> = vec![Vec::new(); k];
    for a in nwa.master.alphabet.letters() {
        // Choice entries: (role, state) with candidate targets; the
        // "terminate" option (no target) exists only for an ε-accepting
        // slave's initial state — every other termination point was folded
        // into the sink by `continue_copy`.
        let mut domain: Vec<((usize, String), Vec<Option<String>>)> = Vec::new();
        for q in &nwa.master.states {
            let opts: Vec<Option<String>> =
                nwa.master.successors(q, a).map(|s| Some(s.clone())).collect();
            if !opts.is_empty() {
                domain.push(((0, q.clone()), opts));
            }
        }
        for (idx, c) in continues.iter().enumerate() {
            for p in &c.base.states {
                let mut opts: Vec<Option<String>> =
                    c.base.successors(p, a).map(|s| Some(s.clone())).collect();
                if opts.is_empty() {
                    continue;
                }
                if eps[idx] && c.base.initial.contains(p) {
                    opts.push(None);
                }
                domain.push(((idx + 1, p.clone()), opts));
            }
        }
        let mut assignments: Vec<BTreeMap<(usize, String), String>> = vec![BTreeMap::new()];
        for (key, opts) in &domain {
            let mut next = Vec::with_capacity(assignments.len() * opts.len());
            for asg in &assignments {
                for o in opts {
                    let mut a2 = asg.clone();
                    if let Some(t) = o {
                        a2.insert(key.clone(), t.clone());
                    }
                    next.push(a2);
                }
            }
            if ext_letters.len() + next.len() > limit {
                return Err(ReduceError::StateLimit(limit));
            }
            assignments = next;
        }
        for asg in assignments {
            let suffix: Vec<String> = asg
                .iter()
                .map(|((i, p), t)| format!("{i}.{p}>{t}"))
                .collect();
            let letter = format!("{a}${}", suffix.join(","));
            ext_letters.insert(letter.clone());
            for t in &nwa.master.transitions {
                if t.letter == *a
                    && asg.get(&(0, t.from.clone())).is_some_and(|tt| tt == &t.to)
                {
                    let nt = Transition::new(t.from.clone(), letter.clone(), t.to.clone());
                    let i = nwa.labels[t];
                    let init = continues[i - 1]
                        .base
                        .initial
                        .iter()
                        .next()
                        .cloned()
                        .unwrap_or_default();
                    let slot = match eps_slot[i - 1] {
                        Some(silent) if !asg.contains_key(&(i, init)) => silent,
                        _ => i,
                    };
                    labels.insert(nt.clone(), slot);
                    master_transitions.insert(nt);
                }
            }
            for (idx, c) in continues.iter().enumerate() {
                for t in &c.base.transitions {
                    if t.letter == *a
                        && asg
                            .get(&(idx + 1, t.from.clone()))
                            .is_some_and(|tt| tt == &t.to)
                    {
                        slave_transitions[idx].push((
                            Transition::new(t.from.clone(), letter.clone(), t.to.clone()),
                            c.weight_of(t).clone(),
                        ));
                    }
                }
            }
        }
    }
    let alphabet = Alphabet::new(ext_letters.iter().cloned());
    let master = Automaton {
        alphabet: alphabet.clone(),
        states: nwa.master.states.clone(),
        initial: nwa.master.initial.clone(),
        accepting: nwa.master.accepting.clone(),
        transitions: master_transitions,
        mode: Mode::InfiniteWord,
    };
    let mut slaves_out = Vec::new();
    for (idx, c) in continues.iter().enumerate() {
        slaves_out.push(WeightedAutomaton {
            base: Automaton {
                alphabet: alphabet.clone(),
                states: c.base.states.clone(),
                initial: c.base.initial.clone(),
                accepting: c.base.accepting.clone(),
                transitions: slave_transitions[idx].iter().map(|(t, _)| t.clone()).collect(),
                mode: Mode::FiniteWord,
            },
            weight: slave_transitions[idx].iter().cloned().collect(),
            valuefn: c.valuefn.clone(),
        });
    }
    for (i, &e) in eps.iter().enumerate() {
        let _ = i;
        if e {
            slaves_out.push(silent_slave(&alphabet));
        }
    }
    Ok(NestedWeightedAutomaton {
        master,
        labels,
        masterfn: nwa.masterfn,
        slaves: slaves_out,
    })
}

// ---------------------------------------------------------------------------
// Stage 2: bounded-multiplicity transform.
// ---------------------------------------------------------------------------

/// The occupancy constant N = (|Q_slv| + 2) · |reachable configurations|.
/// Slave values up to 4N are rewritten into verified input guesses and the
/// simulation multiplicity cap is 2N + 1.
pub fn multiplicity_constant(nwa: &NestedWeightedAutomaton) -> usize {
    let conf = nwa
        .reachable_configurations(DEFAULT_STATE_LIMIT)
        .len()
        .max(1);
    (nwa.slave_state_count() + 2) * conf
}

/// Invocation annotation carried by a stage-2 letter.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Dir {
    /// The invoked slave does its ε run (the position is silent).
    Silent,
    /// The invoked slave's value is claimed to be this (a dummy emits it
    /// instantly; the claim is verified by a master-side obligation).
    Guess(Rat),
    /// The invoked slave runs genuinely (values beyond the guess bound).
    Long,
}

impl Dir {
    fn tag(&self) -> String {
        match self {
            Dir::Silent => "sil".to_string(),
            Dir::Guess(v) => format!("g{v}"),
            Dir::Long => "lng".to_string(),
        }
    }
}

/// Stage-2 letters: base@marker@direction@stop. The stop field is reserved
/// (always `-`): long slaves run to completion here, which keeps the
/// construction value-exact.
fn ext_letter(base: &str, mark: bool, dir: &Dir) -> String {
    format!("{base}@{}@{}@-", if mark { "M" } else { "-" }, dir.tag())
}

/// (base letter, whether the position's invocation is silent) of a stage-2
/// letter.
fn parse_ext(letter: &str) -> (&str, bool) {
    let mut parts = letter.rsplitn(4, '@');
    let _stop = parts.next();
    let dir = parts.next().unwrap_or("");
    let _mark = parts.next();
    let base = parts.next().unwrap_or("");
    (base, dir == "sil")
}

/// Per-slave analysis for the bounded-multiplicity transform, with weights
/// folded by absolute value (Sum⁺ semantics).
struct SlaveProfile {
    /// Accepts ε (deterministic prefix-free slaves then accept only ε).
    eps: bool,
    init: String,
    /// Deterministic step: (state, base letter) → (successor, |weight|).
    step: HashMap<(String, String), (String, Rat)>,
    accepting: BTreeSet<String>,
    /// Per state: sums of accepting runs from it that stay within the
    /// guess bound.
    rem: BTreeMap<String, BTreeSet<Rat>>,
    /// States from which an accepting run can accumulate beyond the bound.
    exceed: BTreeSet<String>,
}

fn profile_slave(slave: &WeightedAutomaton, bound: &Rat) -> SlaveProfile {
    let eps = slave
        .base
        .initial
        .iter()
        .any(|q| slave.base.accepting.contains(q));
    let init = slave.base.initial.iter().next().cloned().unwrap_or_default();
    let mut step: HashMap<(String, String), (String, Rat)> = HashMap::new();
    for t in &slave.base.transitions {
        let w = match slave.weight_of(t) {
            Weight::Rational(r) => r.abs(),
            Weight::Silent => unreachable!("silent weight in a finite-word slave"),
        };
        step.insert((t.from.clone(), t.letter.clone()), (t.to.clone(), w));
    }
    let mut rem: BTreeMap<String, BTreeSet<Rat>> = slave
        .base
        .states
        .iter()
        .map(|q| (q.clone(), BTreeSet::new()))
        .collect();
    for q in &slave.base.accepting {
        rem.get_mut(q).unwrap().insert(rat_int(0));
    }
    // Backward fixpoint; sums are nonnegative and capped, so the candidate
    // set is finite and the iteration terminates.
    let mut changed = true;
    while changed {
        changed = false;
        for ((s, _), (s2, w)) in &step {
            let sums: Vec<Rat> = rem[s2].iter().map(|r| w + r).collect();
            let entry = rem.get_mut(s).unwrap();
            for r in sums {
                if r <= *bound && entry.insert(r) {
                    changed = true;
                }
            }
        }
    }
    let mut exceed: BTreeSet<String> = BTreeSet::new();
    let mut changed = true;
    while changed {
        changed = false;
        for ((s, _), (s2, w)) in &step {
            if exceed.contains(s) {
                continue;
            }
            if exceed.contains(s2) || rem[s2].iter().any(|r| w + r > *bound) {
                exceed.insert(s.clone());
                changed = true;
            }
        }
    }
    SlaveProfile {
        eps,
        init,
        step,
        accepting: slave.base.accepting.clone(),
        rem,
        exceed,
    }
}

/// Remaining-sum obligations: for each (slave, state), the exact amount a
/// claimed genuine run must still accumulate. A deterministic run from one
/// state has one future, so two different demands on the same state can
/// never both be met and merging them fails.
type Obligations = BTreeMap<(usize, String), Rat>;

fn merge_obligation(obls: &mut Obligations, key: (usize, String), r: Rat) -> bool {
    match obls.get(&key) {
        Some(existing) => *existing == r,
        None => {
            obls.insert(key, r);
            true
        }
    }
}

/// Step every obligation on a base letter; `None` when some obligation is
/// stuck, discharges at the wrong amount, or becomes unachievable.
fn step_obligations(
    profiles: &[SlaveProfile],
    obls: &Obligations,
    letter: &str,
) -> Option<Obligations> {
    let mut out = Obligations::new();
    for ((i, s), r) in obls {
        let prof = &profiles[i - 1];
        let (s2, w) = prof.step.get(&(s.clone(), letter.to_string()))?;
        if prof.accepting.contains(s2) {
            if r != w {
                return None;
            }
        } else {
            if r < w {
                return None;
            }
            let r2 = r - w;
            if !prof.rem.get(s2).is_some_and(|set| set.contains(&r2)) {
                return None;
            }
            if !merge_obligation(&mut out, (*i, s2.clone()), r2) {
                return None;
            }
        }
    }
    Some(out)
}

/// Master state of the transformed automaton: original state, the one-shot
/// marker phase, pending guess obligations, and the breakpoint subset being
/// watched for discharge.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct MState {
    q: String,
    post: bool,
    obls: Obligations,
    tracked: Obligations,
}

impl MState {
    fn name(&self) -> String {
        let fmt = |o: &Obligations| {
            o.iter()
                .map(|((i, s), r)| format!("{i}.{s}={r}"))
                .collect::<Vec<_>>()
                .join(";")
        };
        format!(
            "[{}|{}|{{{}}}|{{{}}}]",
            self.q,
            if self.post { "post" } else { "pre" },
            fmt(&self.obls),
            fmt(&self.tracked)
        )
    }
}

/// Genuine copy of a slave for values that may exceed the guess bound,
/// synchronized with silent master positions: weight accumulated while the
/// master is silent is deferred (up to `window` consecutive silent steps)
/// and flushed on the next non-silent position, so that a downstream
/// simulation dropping silent-position weights stays exact. A run ending
/// during a silent stretch parks its pending weight in a drain state and
/// flushes it at the next non-silent letter; the extra letters read do not
/// change the run's Sum⁺ value.
fn long_copy(prof: &SlaveProfile, ext: &Alphabet, window: usize) -> WeightedAutomaton {
    let zero = rat_int(0);
    let norm = |s: &str, p: &Rat, w: usize| format!("<{s}|{p}|{w}>");
    let drain_name = |p: &Rat| format!("<drain|{p}>");
    let done = "<done>".to_string();
    let init_name = norm(&prof.init, &zero, 0);
    let mut states: BTreeSet<String> = BTreeSet::from([init_name.clone()]);
    let mut accepting: BTreeSet<String> = BTreeSet::new();
    let mut transitions: BTreeSet<Transition> = BTreeSet::new();
    let mut weight: BTreeMap<Transition, Weight> = BTreeMap::new();
    let mut drains: BTreeSet<Rat> = BTreeSet::new();
    let mut queue: VecDeque<(String, Rat, usize)> =
        VecDeque::from([(prof.init.clone(), zero.clone(), 0)]);
    let emit = |transitions: &mut BTreeSet<Transition>,
                    weight: &mut BTreeMap<Transition, Weight>,
                    from: String,
                    letter: &str,
                    to: String,
                    w: Rat| {
        let t = Transition::new(from, letter, to);
        weight.insert(t.clone(), Weight::Rational(w));
        transitions.insert(t);
    };
    while let Some((s, p, w)) = queue.pop_front() {
        let from = norm(&s, &p, w);
        for letter in ext.letters() {
            let (base, silent) = parse_ext(letter);
            let Some((s2, wt)) = prof.step.get(&(s.clone(), base.to_string())) else {
                continue;
            };
            if silent {
                if prof.accepting.contains(s2) {
                    let p2 = &p + wt;
                    if p2 == zero {
                        let to = norm(s2, &zero, 0);
                        states.insert(to.clone());
                        accepting.insert(to.clone());
                        emit(&mut transitions, &mut weight, from.clone(), letter, to, zero.clone());
                    } else {
                        drains.insert(p2.clone());
                        let to = drain_name(&p2);
                        states.insert(to.clone());
                        emit(&mut transitions, &mut weight, from.clone(), letter, to, zero.clone());
                    }
                } else if w + 1 <= window {
                    let p2 = &p + wt;
                    let to = norm(s2, &p2, w + 1);
                    if states.insert(to.clone()) {
                        queue.push_back((s2.clone(), p2, w + 1));
                    }
                    emit(&mut transitions, &mut weight, from.clone(), letter, to, zero.clone());
                }
            } else {
                let to = norm(s2, &zero, 0);
                if prof.accepting.contains(s2) {
                    states.insert(to.clone());
                    accepting.insert(to.clone());
                } else if states.insert(to.clone()) {
                    queue.push_back((s2.clone(), zero.clone(), 0));
                }
                emit(&mut transitions, &mut weight, from.clone(), letter, to, &p + wt);
            }
        }
    }
    if !drains.is_empty() {
        states.insert(done.clone());
        accepting.insert(done.clone());
        for p in &drains {
            let d = drain_name(p);
            states.insert(d.clone());
            for letter in ext.letters() {
                let (_, silent) = parse_ext(letter);
                if silent {
                    emit(&mut transitions, &mut weight, d.clone(), letter, d.clone(), zero.clone());
                } else {
                    emit(&mut transitions, &mut weight, d.clone(), letter, done.clone(), p.clone());
                }
            }
        }
    }
    WeightedAutomaton {
        base: Automaton {
            alphabet: ext.clone(),
            states,
            initial: BTreeSet::from([init_name]),
            accepting,
            transitions,
            mode: Mode::FiniteWord,
        },
        weight,
        valuefn: ValueFn::Fin(FinValueFn::SumPlus),
    }
}

/// One-step slave emitting a claimed value: it reads the invocation letter
/// and returns `v`. The claim is verified by the master's obligations.
fn dummy_copy(v: &Rat, ext: &Alphabet) -> WeightedAutomaton {
    let mut transitions = BTreeSet::new();
    let mut weight = BTreeMap::new();
    for letter in ext.letters() {
        let t = Transition::new("d0", letter.clone(), "df");
        weight.insert(t.clone(), Weight::Rational(v.clone()));
        transitions.insert(t);
    }
    WeightedAutomaton {
        base: Automaton {
            alphabet: ext.clone(),
            states: BTreeSet::from(["d0".to_string(), "df".to_string()]),
            initial: BTreeSet::from(["d0".to_string()]),
            accepting: BTreeSet::from(["df".to_string()]),
            transitions,
            mode: Mode::FiniteWord,
        },
        weight,
        valuefn: ValueFn::Fin(FinValueFn::SumPlus),
    }
}

/// Bounded-multiplicity transform with the derived guess bound 4N, where
/// N = [`multiplicity_constant`]. Returns the transformed automaton and the
/// multiplicity cap 2N + 1 for the downstream simulation.
pub fn bound_multiplicity_transform(
    nwa: &NestedWeightedAutomaton,
    limit: usize,
) -> Result<(NestedWeightedAutomaton, usize), ReduceError> {
    let n = multiplicity_constant(nwa);
    let bound = rat_int(4) * rat_int(n as i64);
    bound_multiplicity_transform_with(nwa, &bound, limit)
}

/// As [`bound_multiplicity_transform`] with an explicit guess bound.
///
/// The input must be deterministic with a LimAvg master and Sum⁺ slaves.
/// Letters are annotated with a one-shot marker (words without exactly one
/// marker are rejected), and with the invocation outcome at each position:
/// `sil` for an ε slave, `g{v}` claiming the invoked slave's value is
/// v ≤ bound (a dummy slave emits v in one step; the master carries an
/// exact remaining-sum obligation and rejects if the claim is wrong), or
/// `lng` (post-marker only) running a genuine synchronized copy for values
/// that may exceed the bound. The transform is value-exact: the infimum
/// over annotated words equals the original infimum, and on deterministic
/// evaluation each correctly annotated word keeps its value. Smaller guess
/// bounds stay exact — they only shift more slaves into genuine copies.
pub fn bound_multiplicity_transform_with(
    nwa: &NestedWeightedAutomaton,
    guess_bound: &Rat,
    limit: usize,
) -> Result<(NestedWeightedAutomaton, usize), ReduceError> {
    if nwa.classify() != NwaClass::Deterministic {
        return Err(ReduceError::NotDeterministic);
    }
    if nwa.masterfn != InfValueFn::LimAvg {
        return Err(ReduceError::UnsupportedValueFn(nwa.masterfn.to_string()));
    }
    for slave in &nwa.slaves {
        if slave.valuefn.fin() != Some(&FinValueFn::SumPlus) && !slave.base.transitions.is_empty() {
            return Err(ReduceError::UnsupportedValueFn(slave.valuefn.to_string()));
        }
    }
    let profiles: Vec<SlaveProfile> = nwa
        .slaves
        .iter()
        .map(|s| profile_slave(s, guess_bound))
        .collect();
    let conf = nwa.reachable_configurations(limit).len().max(1);
    let n = (nwa.slave_state_count() + 2) * conf;
    let cap = 2 * n + 1;

    let values: BTreeSet<Rat> = profiles
        .iter()
        .filter(|p| !p.eps)
        .flat_map(|p| p.rem.get(&p.init).into_iter().flatten().cloned())
        .collect();
    let mut dirs: Vec<Dir> = Vec::new();
    if profiles.iter().any(|p| p.eps) {
        dirs.push(Dir::Silent);
    }
    for v in &values {
        dirs.push(Dir::Guess(v.clone()));
    }
    if profiles.iter().any(|p| !p.eps && p.exceed.contains(&p.init)) {
        dirs.push(Dir::Long);
    }
    if dirs.is_empty() {
        // No slave ever accepts: the language is empty either way; keep one
        // unusable guess letter so the alphabet is nonempty.
        dirs.push(Dir::Guess(rat_int(0)));
    }
    let mut ext_letters: Vec<String> = Vec::new();
    for a in nwa.master.alphabet.letters() {
        for mark in [false, true] {
            for d in &dirs {
                ext_letters.push(ext_letter(a, mark, d));
            }
        }
    }
    if ext_letters.len() > limit {
        return Err(ReduceError::StateLimit(limit));
    }
    let ext = Alphabet::new(ext_letters.iter().cloned());

    // Slave table: per original slave a silent or long copy, then one dummy
    // per guessable value.
    let mut slaves_out: Vec<WeightedAutomaton> = Vec::new();
    for prof in &profiles {
        slaves_out.push(if prof.eps {
            silent_slave(&ext)
        } else {
            long_copy(prof, &ext, conf)
        });
    }
    let dummy_base = slaves_out.len();
    let value_vec: Vec<Rat> = values.iter().cloned().collect();
    let dummy_slot: BTreeMap<&Rat, usize> = value_vec
        .iter()
        .enumerate()
        .map(|(i, v)| (v, dummy_base + i + 1))
        .collect();
    for v in &value_vec {
        slaves_out.push(dummy_copy(v, &ext));
    }

    let master_step: HashMap<(String, String), (String, usize)> = nwa
        .master
        .transitions
        .iter()
        .map(|t| ((t.from.clone(), t.letter.clone()), (t.to.clone(), nwa.labels[t])))
        .collect();

    let start = MState {
        q: nwa.master.initial.iter().next().cloned().unwrap_or_default(),
        post: false,
        obls: Obligations::new(),
        tracked: Obligations::new(),
    };
    let mut seen: BTreeSet<MState> = BTreeSet::from([start.clone()]);
    let mut queue: VecDeque<MState> = VecDeque::from([start.clone()]);
    let mut transitions: Vec<(String, String, String)> = Vec::new();
    let mut label_map: BTreeMap<(String, String), usize> = BTreeMap::new();
    while let Some(state) = queue.pop_front() {
        let from_name = state.name();
        for a in nwa.master.alphabet.letters() {
            let Some((q2, lbl)) = master_step.get(&(state.q.clone(), a.clone())) else {
                continue;
            };
            let prof = &profiles[lbl - 1];
            for mark in [false, true] {
                if mark && state.post {
                    continue;
                }
                let post2 = state.post || mark;
                for dir in &dirs {
                    let valid = match dir {
                        Dir::Silent => prof.eps,
                        Dir::Guess(v) => {
                            !prof.eps
                                && prof.rem.get(&prof.init).is_some_and(|s| s.contains(v))
                        }
                        Dir::Long => !prof.eps && prof.exceed.contains(&prof.init) && post2,
                    };
                    if !valid {
                        continue;
                    }
                    let Some(mut obls2) = step_obligations(&profiles, &state.obls, a) else {
                        continue;
                    };
                    let Some(tracked_stepped) =
                        step_obligations(&profiles, &state.tracked, a)
                    else {
                        continue;
                    };
                    if let Dir::Guess(v) = dir {
                        let Some((s1, w0)) = prof.step.get(&(prof.init.clone(), a.clone()))
                        else {
                            continue;
                        };
                        if prof.accepting.contains(s1) {
                            if v != w0 {
                                continue;
                            }
                        } else {
                            if v < w0 {
                                continue;
                            }
                            let r = v - w0;
                            if !prof.rem.get(s1).is_some_and(|s| s.contains(&r)) {
                                continue;
                            }
                            if !merge_obligation(&mut obls2, (*lbl, s1.clone()), r) {
                                continue;
                            }
                        }
                    }
                    let tracked2 = if state.tracked.is_empty() {
                        obls2.clone()
                    } else {
                        tracked_stepped
                    };
                    let target = MState {
                        q: q2.clone(),
                        post: post2,
                        obls: obls2,
                        tracked: tracked2,
                    };
                    let letter = ext_letter(a, mark, dir);
                    let slot = match dir {
                        Dir::Silent | Dir::Long => *lbl,
                        Dir::Guess(v) => dummy_slot[v],
                    };
                    label_map.insert((from_name.clone(), letter.clone()), slot);
                    transitions.push((from_name.clone(), letter.clone(), target.name()));
                    if seen.insert(target.clone()) {
                        if seen.len() > limit {
                            return Err(ReduceError::StateLimit(limit));
                        }
                        queue.push_back(target);
                    }
                }
            }
        }
    }

    let f1: BTreeSet<String> = seen
        .iter()
        .filter(|s| s.post && nwa.master.accepting.contains(&s.q))
        .map(MState::name)
        .collect();
    let f2: BTreeSet<String> = seen
        .iter()
        .filter(|s| s.tracked.is_empty())
        .map(MState::name)
        .collect();
    let pre_master = Automaton {
        alphabet: ext.clone(),
        states: seen.iter().map(MState::name).collect(),
        initial: BTreeSet::from([start.name()]),
        accepting: BTreeSet::new(),
        transitions: transitions
            .iter()
            .map(|(f, l, t)| Transition::new(f.clone(), l.clone(), t.clone()))
            .collect(),
        mode: Mode::InfiniteWord,
    };
    let master = degeneralize_boolean(&pre_master, &GenBuchiAcceptance::new(vec![f1, f2]));
    let mut labels: BTreeMap<Transition, usize> = BTreeMap::new();
    for t in &master.transitions {
        let (orig, _) = t.from.rsplit_once('#').expect("degeneralized state name");
        labels.insert(t.clone(), label_map[&(orig.to_string(), t.letter.clone())]);
    }
    let out = NestedWeightedAutomaton {
        master,
        labels,
        masterfn: InfValueFn::LimAvg,
        slaves: slaves_out,
    };
    debug_assert!(out.validate().is_ok());
    Ok((out, cap))
}

// ---------------------------------------------------------------------------
// Stage 3: multiplicity-capped simulation.
// ---------------------------------------------------------------------------

/// Lightweight deterministic step view of a slave.
struct StepTable {
    eps: bool,
    init: String,
    step: HashMap<(String, String), (String, Rat)>,
    accepting: BTreeSet<String>,
}

fn step_table(slave: &WeightedAutomaton) -> StepTable {
    let mut step = HashMap::new();
    for t in &slave.base.transitions {
        let w = match slave.weight_of(t) {
            Weight::Rational(r) => r.abs(),
            Weight::Silent => unreachable!("silent weight in a finite-word slave"),
        };
        step.insert((t.from.clone(), t.letter.clone()), (t.to.clone(), w));
    }
    StepTable {
        eps: slave
            .base
            .initial
            .iter()
            .any(|q| slave.base.accepting.contains(q)),
        init: slave.base.initial.iter().next().cloned().unwrap_or_default(),
        step,
        accepting: slave.base.accepting.clone(),
    }
}

/// State of the capped simulation: master state, occupation counts of the
/// running slave instances (instances pay their entering weight, so
/// accepting states are never stored), the breakpoint subset watched for
/// termination, and whether the incoming position was non-silent.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct SimNode {
    q: String,
    mult: BTreeMap<(usize, String), usize>,
    tracked: BTreeSet<(usize, String)>,
    nonsilent: bool,
}

impl SimNode {
    fn name(&self) -> String {
        let m = self
            .mult
            .iter()
            .map(|((i, s), c)| format!("{i}.{s}:{c}"))
            .collect::<Vec<_>>()
            .join(";");
        let t = self
            .tracked
            .iter()
            .map(|(i, s)| format!("{i}.{s}"))
            .collect::<Vec<_>>()
            .join(";");
        format!(
            "[{}|{{{}}}|{{{}}}|{}]",
            self.q,
            m,
            t,
            if self.nonsilent { "!" } else { "." }
        )
    }
}

/// Simulate a deterministic (LimAvg; Sum⁺) automaton by a silent LimAvg
/// automaton over the same alphabet: per position, the weight is the sum of
/// the step weights of all running slave instances (with multiplicities)
/// plus the new instance's first step; positions invoking an ε slave are
/// silent. Any instance count above `cap` prunes the branch.
pub fn build_bounded_simulation(
    nwa: &NestedWeightedAutomaton,
    cap: usize,
    limit: usize,
) -> Result<WeightedAutomaton, ReduceError> {
    Ok(build_bounded_simulation_report(nwa, cap, limit)?.0)
}

/// As [`build_bounded_simulation`], additionally reporting whether any
/// branch was pruned by the cap (when nothing was pruned the simulation is
/// exact up to silent-position weight drops).
pub(crate) fn build_bounded_simulation_report(
    nwa: &NestedWeightedAutomaton,
    cap: usize,
    limit: usize,
) -> Result<(WeightedAutomaton, bool), ReduceError> {
    if nwa.classify() != NwaClass::Deterministic {
        return Err(ReduceError::NotDeterministic);
    }
    if nwa.masterfn != InfValueFn::LimAvg {
        return Err(ReduceError::UnsupportedValueFn(nwa.masterfn.to_string()));
    }
    for slave in &nwa.slaves {
        // BSum slaves are stepped with Sum⁺ semantics (no clamp); the
        // pipeline only feeds Sum⁺ slaves here.
        let ok = matches!(
            slave.valuefn.fin(),
            Some(FinValueFn::SumPlus) | Some(FinValueFn::BSum(_))
        ) || slave.base.transitions.is_empty();
        if !ok {
            return Err(ReduceError::UnsupportedValueFn(slave.valuefn.to_string()));
        }
    }
    let tables: Vec<StepTable> = nwa.slaves.iter().map(step_table).collect();
    let master_step: HashMap<(String, String), (String, usize)> = nwa
        .master
        .transitions
        .iter()
        .map(|t| ((t.from.clone(), t.letter.clone()), (t.to.clone(), nwa.labels[t])))
        .collect();

    let start = SimNode {
        q: nwa.master.initial.iter().next().cloned().unwrap_or_default(),
        mult: BTreeMap::new(),
        tracked: BTreeSet::new(),
        nonsilent: false,
    };
    let mut seen: BTreeSet<SimNode> = BTreeSet::from([start.clone()]);
    let mut queue: VecDeque<SimNode> = VecDeque::from([start.clone()]);
    let mut edges: Vec<(SimNode, String, SimNode, Weight)> = Vec::new();
    let mut pruned = false;
    while let Some(node) = queue.pop_front() {
        'letters: for letter in nwa.master.alphabet.letters() {
            let Some((q2, lbl)) = master_step.get(&(node.q.clone(), letter.clone())) else {
                continue;
            };
            let tab = &tables[lbl - 1];
            let silent = tab.eps;
            let mut wsum = rat_int(0);
            let mut mult2: BTreeMap<(usize, String), usize> = BTreeMap::new();
            let mut stepped: HashMap<(usize, String), (usize, String)> = HashMap::new();
            for ((i, s), m) in &node.mult {
                let Some((s2, w)) = tables[i - 1].step.get(&(s.clone(), letter.clone()))
                else {
                    continue 'letters;
                };
                wsum += w * rat_int(*m as i64);
                if !tables[i - 1].accepting.contains(s2) {
                    *mult2.entry((*i, s2.clone())).or_insert(0) += m;
                    stepped.insert((*i, s.clone()), (*i, s2.clone()));
                }
            }
            if !silent {
                let Some((s1, w0)) = tab.step.get(&(tab.init.clone(), letter.clone())) else {
                    continue;
                };
                wsum += w0;
                if !tab.accepting.contains(s1) {
                    *mult2.entry((*lbl, s1.clone())).or_insert(0) += 1;
                }
            }
            if mult2.values().any(|&m| m > cap) {
                pruned = true;
                continue;
            }
            let tracked2: BTreeSet<(usize, String)> = if node.tracked.is_empty() {
                mult2.keys().cloned().collect()
            } else {
                node.tracked
                    .iter()
                    .filter_map(|k| stepped.get(k).cloned())
                    .collect()
            };
            let weight = if silent {
                Weight::Silent
            } else {
                Weight::Rational(wsum)
            };
            let target = SimNode {
                q: q2.clone(),
                mult: mult2,
                tracked: tracked2,
                nonsilent: !silent,
            };
            edges.push((node.clone(), letter.clone(), target.clone(), weight));
            if seen.insert(target.clone()) {
                if seen.len() > limit {
                    return Err(ReduceError::StateLimit(limit));
                }
                queue.push_back(target);
            }
        }
    }

    // Without any reachable cycle the capped simulation has no infinite run
    // at all.
    let index: BTreeMap<&SimNode, usize> = seen.iter().enumerate().map(|(i, s)| (s, i)).collect();
    let graph_edges: Vec<(usize, usize)> = edges
        .iter()
        .map(|(f, _, t, _)| (index[f], index[t]))
        .collect();
    let has_cycle = graph_edges.iter().any(|(f, t)| f == t)
        || sccs(seen.len(), &graph_edges).iter().any(|c| c.len() > 1);
    if !has_cycle {
        return Err(ReduceError::CapExceededEverywhere(cap));
    }

    let f1: BTreeSet<String> = seen
        .iter()
        .filter(|s| nwa.master.accepting.contains(&s.q))
        .map(SimNode::name)
        .collect();
    let f2: BTreeSet<String> = seen
        .iter()
        .filter(|s| s.tracked.is_empty())
        .map(SimNode::name)
        .collect();
    let f3: BTreeSet<String> = seen
        .iter()
        .filter(|s| s.nonsilent)
        .map(SimNode::name)
        .collect();
    let mut transitions = BTreeSet::new();
    let mut weight = BTreeMap::new();
    for (f, l, t, w) in &edges {
        let nt = Transition::new(f.name(), l.clone(), t.name());
        weight.insert(nt.clone(), w.clone());
        transitions.insert(nt);
    }
    let wa = WeightedAutomaton {
        base: Automaton {
            alphabet: nwa.master.alphabet.clone(),
            states: seen.iter().map(SimNode::name).collect(),
            initial: BTreeSet::from([start.name()]),
            accepting: BTreeSet::new(),
            transitions,
            mode: Mode::InfiniteWord,
        },
        weight,
        valuefn: ValueFn::Inf(InfValueFn::LimAvg),
    };
    Ok((
        degeneralize(&wa, &GenBuchiAcceptance::new(vec![f1, f2, f3])),
        pruned,
    ))
}
