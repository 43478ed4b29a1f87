//! Boolean and weighted finite automata over finite and infinite words,
//! together with the basic decision helpers (determinism, prefix-freeness,
//! lasso membership) that the nested semantics and the deciders build on.
//!
//! State and letter identifiers are opaque strings; all collections are
//! ordered (`BTreeSet`/`BTreeMap`) so iteration order — and hence every
//! derived construction — is deterministic and reproducible.

use crate::value::{FinValueFn, InfValueFn, Weight};
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use thiserror::Error;

/// A finite, nonempty, duplicate-free set of letters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    letters: BTreeSet<String>,
}

impl Alphabet {
    pub fn new<I, S>(letters: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let letters: BTreeSet<String> = letters.into_iter().map(Into::into).collect();
        assert!(!letters.is_empty(), "alphabet must be nonempty");
        Alphabet { letters }
    }

    pub fn contains(&self, letter: &str) -> bool {
        self.letters.contains(letter)
    }

    pub fn letters(&self) -> impl Iterator<Item = &String> {
        self.letters.iter()
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }
}

/// Whether an automaton reads finite words (final-state acceptance) or
/// infinite words (Büchi acceptance).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Mode {
    FiniteWord,
    InfiniteWord,
}

/// A single transition `source --letter--> target`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Transition {
    pub from: String,
    pub letter: String,
    pub to: String,
}

impl Transition {
    pub fn new(from: impl Into<String>, letter: impl Into<String>, to: impl Into<String>) -> Self {
        Transition {
            from: from.into(),
            letter: letter.into(),
            to: to.into(),
        }
    }
}

/// Violations reported by [`Automaton::validate`] and
/// [`WeightedAutomaton::validate`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Error)]
pub enum AutomatonError {
    #[error("undeclared state `{0}`")]
    UndeclaredState(String),
    #[error("undeclared letter `{0}`")]
    UndeclaredLetter(String),
    #[error("initial state set is empty")]
    EmptyInitialSet,
    #[error("silent weight on `{0} --{1}--> {2}` in finite-word mode")]
    SilentWeightInFiniteMode(String, String, String),
    #[error("no weight declared for transition `{0} --{1}--> {2}`")]
    MissingWeight(String, String, String),
    #[error("weight declared for unknown transition `{0} --{1}--> {2}`")]
    WeightWithoutTransition(String, String, String),
    #[error("value function `{0}` does not match {1:?} mode")]
    ValueFnModeMismatch(String, Mode),
}

/// A Boolean automaton: final-state acceptance in finite-word mode, Büchi
/// acceptance in infinite-word mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Automaton {
    pub alphabet: Alphabet,
    pub states: BTreeSet<String>,
    pub initial: BTreeSet<String>,
    pub transitions: BTreeSet<Transition>,
    pub accepting: BTreeSet<String>,
    pub mode: Mode,
}

impl Automaton {
    /// Check every structural invariant, returning all violations at once.
    pub fn validate(&self) -> Result<(), Vec<AutomatonError>> {
        let mut errs = Vec::new();
        if self.initial.is_empty() {
            errs.push(AutomatonError::EmptyInitialSet);
        }
        for s in self.initial.iter().chain(self.accepting.iter()) {
            if !self.states.contains(s) {
                errs.push(AutomatonError::UndeclaredState(s.clone()));
            }
        }
        for t in &self.transitions {
            for s in [&t.from, &t.to] {
                if !self.states.contains(s) {
                    errs.push(AutomatonError::UndeclaredState(s.clone()));
                }
            }
            if !self.alphabet.contains(&t.letter) {
                errs.push(AutomatonError::UndeclaredLetter(t.letter.clone()));
            }
        }
        errs.sort();
        errs.dedup();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }

    /// True iff there is a single initial state and at most one successor per
    /// (state, letter) pair.
    pub fn is_deterministic(&self) -> bool {
        if self.initial.len() != 1 {
            return false;
        }
        let mut seen = HashSet::new();
        for t in &self.transitions {
            if !seen.insert((&t.from, &t.letter)) {
                return false;
            }
        }
        true
    }

    /// Successor states of `state` on `letter`.
    pub fn successors<'a>(&'a self, state: &'a str, letter: &'a str) -> impl Iterator<Item = &'a String> {
        self.transitions
            .iter()
            .filter(move |t| t.from == state && t.letter == letter)
            .map(|t| &t.to)
    }

    /// The unique successor on `letter`, if the automaton is deterministic.
    pub fn det_successor(&self, state: &str, letter: &str) -> Option<&String> {
        self.transitions
            .iter()
            .find(|t| t.from == state && t.letter == letter)
            .map(|t| &t.to)
    }

    /// Finite-word acceptance via subset simulation.
    pub fn accepts_finite(&self, word: &[String]) -> bool {
        debug_assert_eq!(self.mode, Mode::FiniteWord);
        let mut current: BTreeSet<&String> = self.initial.iter().collect();
        for letter in word {
            let mut next = BTreeSet::new();
            for t in &self.transitions {
                if t.letter == *letter && current.contains(&t.from) {
                    next.insert(&t.to);
                }
            }
            current = next;
            if current.is_empty() {
                return false;
            }
        }
        current.iter().any(|s| self.accepting.contains(*s))
    }

    /// Subset-construction determinization of a finite-word automaton.
    /// Subset states are named by their sorted member list; only reachable
    /// subsets are materialized and the empty subset is omitted (the result
    /// may be partial but is deterministic).
    pub fn determinize(&self) -> Automaton {
        debug_assert_eq!(self.mode, Mode::FiniteWord);
        let name = |set: &BTreeSet<String>| -> String {
            let mut s = String::from("{");
            for (i, q) in set.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                s.push_str(q);
            }
            s.push('}');
            s
        };
        let start: BTreeSet<String> = self.initial.iter().cloned().collect();
        let mut states = BTreeSet::new();
        let mut accepting = BTreeSet::new();
        let mut transitions = BTreeSet::new();
        let mut queue = VecDeque::from([start.clone()]);
        let mut seen = HashSet::from([start.clone()]);
        while let Some(set) = queue.pop_front() {
            let set_name = name(&set);
            states.insert(set_name.clone());
            if set.iter().any(|q| self.accepting.contains(q)) {
                accepting.insert(set_name.clone());
            }
            for letter in self.alphabet.letters() {
                let mut next = BTreeSet::new();
                for t in &self.transitions {
                    if t.letter == *letter && set.contains(&t.from) {
                        next.insert(t.to.clone());
                    }
                }
                if next.is_empty() {
                    continue;
                }
                transitions.insert(Transition::new(set_name.clone(), letter.clone(), name(&next)));
                if seen.insert(next.clone()) {
                    queue.push_back(next);
                }
            }
        }
        Automaton {
            alphabet: self.alphabet.clone(),
            states,
            initial: BTreeSet::from([name(&start)]),
            transitions,
            accepting,
            mode: Mode::FiniteWord,
        }
    }

    /// Restrict to states both reachable from an initial state and able to
    /// reach an accepting state.
    pub fn trim(&self) -> Automaton {
        let forward = self.reachable_from(self.initial.iter());
        // Backward reachability from accepting states.
        let mut backward: HashSet<&String> = self.accepting.iter().collect();
        let mut changed = true;
        while changed {
            changed = false;
            for t in &self.transitions {
                if backward.contains(&t.to) && forward.contains(&t.from) && backward.insert(&t.from)
                {
                    changed = true;
                }
            }
        }
        let keep: BTreeSet<String> = self
            .states
            .iter()
            .filter(|s| forward.contains(*s) && backward.contains(*s))
            .cloned()
            .collect();
        Automaton {
            alphabet: self.alphabet.clone(),
            states: keep.clone(),
            initial: self.initial.intersection(&keep).cloned().collect(),
            transitions: self
                .transitions
                .iter()
                .filter(|t| keep.contains(&t.from) && keep.contains(&t.to))
                .cloned()
                .collect(),
            accepting: self.accepting.intersection(&keep).cloned().collect(),
            mode: self.mode,
        }
    }

    fn reachable_from<'a, I: IntoIterator<Item = &'a String>>(&'a self, from: I) -> HashSet<&'a String> {
        let mut seen: HashSet<&String> = from.into_iter().collect();
        let mut queue: VecDeque<&String> = seen.iter().copied().collect();
        while let Some(q) = queue.pop_front() {
            for t in &self.transitions {
                if t.from == *q && seen.insert(&t.to) {
                    queue.push_back(&t.to);
                }
            }
        }
        seen
    }

    /// True iff no accepted word is a proper prefix of another accepted word.
    /// Computed on the determinized, trimmed automaton: prefix-freeness fails
    /// exactly when some accepting state reaches an accepting state in one or
    /// more steps.
    pub fn is_prefix_free(&self) -> bool {
        debug_assert_eq!(self.mode, Mode::FiniteWord);
        let dfa = self.determinize().trim();
        // From each accepting state, look for a nonempty path to an
        // accepting state (within the trimmed DFA all paths are live).
        for acc in &dfa.accepting {
            let one_step: Vec<&String> = dfa
                .transitions
                .iter()
                .filter(|t| t.from == *acc)
                .map(|t| &t.to)
                .collect();
            let reach = dfa.reachable_from(one_step);
            if reach.iter().any(|s| dfa.accepting.contains(*s)) {
                return false;
            }
        }
        true
    }

    /// Büchi membership of the ultimately-periodic word `u·v^ω`: does some
    /// run visit accepting states infinitely often? Decided on the product
    /// of states with word positions (prefix positions, then period phases
    /// that wrap), by searching for a reachable accepting node that lies on
    /// a cycle.
    pub fn lasso_membership(&self, word: &LassoWord) -> bool {
        debug_assert_eq!(self.mode, Mode::InfiniteWord);
        let u = &word.prefix;
        let v = &word.period;
        let total = u.len() + v.len();
        let letter_at = |pos: usize| -> &String {
            if pos < u.len() {
                &u[pos]
            } else {
                &v[pos - u.len()]
            }
        };
        let next_pos = |pos: usize| -> usize {
            if pos + 1 < total {
                pos + 1
            } else {
                u.len()
            }
        };
        let succ = successor_map(self);
        let step = |q: &String, pos: usize| -> Vec<(&String, usize)> {
            succ.get(&(q.as_str(), letter_at(pos).as_str()))
                .map(|ts| ts.iter().map(|t| (&t.to, next_pos(pos))).collect())
                .unwrap_or_default()
        };
        // Forward reachability over (state, position).
        let mut seen: HashSet<(&String, usize)> = HashSet::new();
        let mut queue: VecDeque<(&String, usize)> = VecDeque::new();
        for q in &self.initial {
            if seen.insert((q, 0)) {
                queue.push_back((q, 0));
            }
        }
        while let Some((q, pos)) = queue.pop_front() {
            for node in step(q, pos) {
                if seen.insert(node) {
                    queue.push_back(node);
                }
            }
        }
        // A reachable accepting node on a cycle witnesses acceptance: look
        // for a nontrivial SCC (or self-loop) through an accepting node.
        let nodes: Vec<(&String, usize)> = seen.iter().copied().collect();
        let idx: HashMap<(&String, usize), usize> =
            nodes.iter().enumerate().map(|(i, n)| (*n, i)).collect();
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        for (i, (q, pos)) in nodes.iter().enumerate() {
            for node in step(q, *pos) {
                pairs.push((i, idx[&node]));
            }
        }
        let comps = crate::graph::sccs(nodes.len(), &pairs);
        let mut comp_of = vec![0usize; nodes.len()];
        for (c, comp) in comps.iter().enumerate() {
            for &v in comp {
                comp_of[v] = c;
            }
        }
        let mut intra = vec![false; comps.len()];
        for &(u, v) in &pairs {
            if comp_of[u] == comp_of[v] {
                intra[comp_of[u]] = true;
            }
        }
        nodes
            .iter()
            .enumerate()
            .any(|(i, (q, _))| self.accepting.contains(*q) && intra[comp_of[i]])
    }
}

/// The value-function tag of a weighted automaton, constrained by mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValueFn {
    Fin(FinValueFn),
    Inf(InfValueFn),
}

impl ValueFn {
    pub fn fin(&self) -> Option<&FinValueFn> {
        match self {
            ValueFn::Fin(f) => Some(f),
            ValueFn::Inf(_) => None,
        }
    }

    pub fn inf(&self) -> Option<InfValueFn> {
        match self {
            ValueFn::Inf(f) => Some(*f),
            ValueFn::Fin(_) => None,
        }
    }
}

impl std::fmt::Display for ValueFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ValueFn::Fin(v) => write!(f, "{v}"),
            ValueFn::Inf(v) => write!(f, "{v}"),
        }
    }
}

/// A weighted automaton: a Boolean base automaton plus a weight (rational or
/// silent) per transition and a value function matching the mode. Silent
/// weights are permitted only in infinite-word mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedAutomaton {
    pub base: Automaton,
    pub weight: BTreeMap<Transition, Weight>,
    pub valuefn: ValueFn,
}

impl WeightedAutomaton {
    pub fn validate(&self) -> Result<(), Vec<AutomatonError>> {
        let mut errs = match self.base.validate() {
            Ok(()) => Vec::new(),
            Err(e) => e,
        };
        for t in &self.base.transitions {
            match self.weight.get(t) {
                None => errs.push(AutomatonError::MissingWeight(
                    t.from.clone(),
                    t.letter.clone(),
                    t.to.clone(),
                )),
                Some(Weight::Silent) if self.base.mode == Mode::FiniteWord => {
                    errs.push(AutomatonError::SilentWeightInFiniteMode(
                        t.from.clone(),
                        t.letter.clone(),
                        t.to.clone(),
                    ))
                }
                Some(_) => {}
            }
        }
        for t in self.weight.keys() {
            if !self.base.transitions.contains(t) {
                errs.push(AutomatonError::WeightWithoutTransition(
                    t.from.clone(),
                    t.letter.clone(),
                    t.to.clone(),
                ));
            }
        }
        match (&self.valuefn, self.base.mode) {
            (ValueFn::Fin(_), Mode::FiniteWord) | (ValueFn::Inf(_), Mode::InfiniteWord) => {}
            (f, mode) => errs.push(AutomatonError::ValueFnModeMismatch(f.to_string(), mode)),
        }
        errs.sort();
        errs.dedup();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }

    pub fn weight_of(&self, t: &Transition) -> &Weight {
        &self.weight[t]
    }

    /// True iff some transition is silent.
    pub fn has_silent(&self) -> bool {
        self.weight.values().any(Weight::is_silent)
    }
}

/// Generalized Büchi acceptance: a run is accepting iff it visits each set
/// infinitely often.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenBuchiAcceptance {
    pub sets: Vec<BTreeSet<String>>,
}

impl GenBuchiAcceptance {
    pub fn new(sets: Vec<BTreeSet<String>>) -> Self {
        assert!(!sets.is_empty(), "at least one acceptance set is required");
        GenBuchiAcceptance { sets }
    }
}

/// An ultimately-periodic infinite word `u·v^ω`, presented by its finite
/// prefix `u` and nonempty period `v`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LassoWord {
    pub prefix: Vec<String>,
    pub period: Vec<String>,
}

impl LassoWord {
    pub fn new<I, J, S, T>(prefix: I, period: J) -> Self
    where
        I: IntoIterator<Item = S>,
        J: IntoIterator<Item = T>,
        S: Into<String>,
        T: Into<String>,
    {
        let word = LassoWord {
            prefix: prefix.into_iter().map(Into::into).collect(),
            period: period.into_iter().map(Into::into).collect(),
        };
        assert!(!word.period.is_empty(), "period must be nonempty");
        word
    }

    /// The letter at 0-based position `pos` of `u·v^ω`.
    pub fn letter_at(&self, pos: usize) -> &String {
        if pos < self.prefix.len() {
            &self.prefix[pos]
        } else {
            &self.period[(pos - self.prefix.len()) % self.period.len()]
        }
    }

    /// Rotate one period into the prefix: `(u, v) → (u·v, v)`.
    pub fn absorb_period(&self) -> LassoWord {
        let mut prefix = self.prefix.clone();
        prefix.extend(self.period.iter().cloned());
        LassoWord {
            prefix,
            period: self.period.clone(),
        }
    }

    /// Double the period: `(u, v) → (u, v·v)`.
    pub fn double_period(&self) -> LassoWord {
        let mut period = self.period.clone();
        period.extend(self.period.iter().cloned());
        LassoWord {
            prefix: self.prefix.clone(),
            period,
        }
    }
}

/// Build a map from (state, letter) to successor list once, for algorithms
/// that would otherwise rescan the transition set per step.
pub fn successor_map(a: &Automaton) -> HashMap<(&str, &str), Vec<&Transition>> {
    let mut map: HashMap<(&str, &str), Vec<&Transition>> = HashMap::new();
    for t in &a.transitions {
        map.entry((t.from.as_str(), t.letter.as_str()))
            .or_default()
            .push(t);
    }
    map
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::rat_int;

    fn letters(s: &str) -> Vec<String> {
        s.chars().map(|c| c.to_string()).collect()
    }

    /// Build a finite- or infinite-word automaton from compact parts.
    pub fn build(
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

    #[test]
    fn minimal_automaton_validates() {
        let a = build(Mode::FiniteWord, &["a"], &["q"], &["q"], &["q"], &[("q", "a", "q")]);
        assert!(a.validate().is_ok());
    }

    #[test]
    fn undeclared_state_is_reported() {
        let a = build(Mode::FiniteWord, &["a"], &["q"], &["q"], &[], &[("q", "a", "r")]);
        let errs = a.validate().unwrap_err();
        assert!(errs.contains(&AutomatonError::UndeclaredState("r".into())));
    }

    #[test]
    fn silent_weight_rejected_in_finite_mode() {
        let base = build(Mode::FiniteWord, &["a"], &["q"], &["q"], &["q"], &[("q", "a", "q")]);
        let wa = WeightedAutomaton {
            weight: BTreeMap::from([(Transition::new("q", "a", "q"), Weight::Silent)]),
            base,
            valuefn: ValueFn::Fin(FinValueFn::Sum),
        };
        let errs = wa.validate().unwrap_err();
        assert!(matches!(errs[0], AutomatonError::SilentWeightInFiniteMode(..)));
    }

    #[test]
    fn weights_must_cover_transitions() {
        let base = build(Mode::FiniteWord, &["a"], &["q"], &["q"], &["q"], &[("q", "a", "q")]);
        let wa = WeightedAutomaton {
            base,
            weight: BTreeMap::new(),
            valuefn: ValueFn::Fin(FinValueFn::Sum),
        };
        let errs = wa.validate().unwrap_err();
        assert!(matches!(errs[0], AutomatonError::MissingWeight(..)));
        let _ = rat_int(0);
    }

    #[test]
    fn determinism_checks() {
        let det = build(Mode::FiniteWord, &["a"], &["q", "r"], &["q"], &[], &[("q", "a", "r")]);
        assert!(det.is_deterministic());
        let two_initial =
            build(Mode::FiniteWord, &["a"], &["q", "r"], &["q", "r"], &[], &[]);
        assert!(!two_initial.is_deterministic());
        let branching = build(
            Mode::FiniteWord,
            &["a"],
            &["q", "r"],
            &["q"],
            &[],
            &[("q", "a", "q"), ("q", "a", "r")],
        );
        assert!(!branching.is_deterministic());
    }

    #[test]
    fn prefix_freeness() {
        // a*b: accepted words all end at the unique first b.
        let astar_b = build(
            Mode::FiniteWord,
            &["a", "b"],
            &["q", "f"],
            &["q"],
            &["f"],
            &[("q", "a", "q"), ("q", "b", "f")],
        );
        assert!(astar_b.is_prefix_free());
        // a*: a is a prefix of aa.
        let astar = build(Mode::FiniteWord, &["a"], &["q"], &["q"], &["q"], &[("q", "a", "q")]);
        assert!(!astar.is_prefix_free());
        // {a, ab}: a is a prefix of ab.
        let a_ab = build(
            Mode::FiniteWord,
            &["a", "b"],
            &["q", "f", "g"],
            &["q"],
            &["f", "g"],
            &[("q", "a", "f"), ("f", "b", "g")],
        );
        assert!(!a_ab.is_prefix_free());
    }

    #[test]
    fn lasso_membership_basic() {
        let loop_a = build(Mode::InfiniteWord, &["a"], &["q"], &["q"], &["q"], &[("q", "a", "q")]);
        assert!(loop_a.lasso_membership(&LassoWord::new(Vec::<String>::new(), letters("a"))));
    }

    #[test]
    fn lasso_membership_infinitely_many_b() {
        // Accepting state is visited exactly on b.
        let inf_b = build(
            Mode::InfiniteWord,
            &["a", "b"],
            &["q", "f"],
            &["q"],
            &["f"],
            &[("q", "a", "q"), ("q", "b", "f"), ("f", "a", "q"), ("f", "b", "f")],
        );
        assert!(!inf_b.lasso_membership(&LassoWord::new(Vec::<String>::new(), letters("a"))));
        assert!(inf_b.lasso_membership(&LassoWord::new(letters("aaa"), letters("ab"))));
    }

    #[test]
    fn determinization_preserves_language_on_short_words() {
        // Nondeterministic automaton for words containing ab.
        let nfa = build(
            Mode::FiniteWord,
            &["a", "b"],
            &["q", "r", "f"],
            &["q"],
            &["f"],
            &[
                ("q", "a", "q"),
                ("q", "b", "q"),
                ("q", "a", "r"),
                ("r", "b", "f"),
                ("f", "a", "f"),
                ("f", "b", "f"),
            ],
        );
        let dfa = nfa.determinize();
        assert!(dfa.is_deterministic());
        let sigma = ["a", "b"];
        let max_len = nfa.states.len() + 2;
        let mut words: Vec<Vec<String>> = vec![vec![]];
        for _ in 0..max_len {
            let mut next = Vec::new();
            for w in &words {
                if w.len() == max_len - 1 {
                    continue;
                }
                for l in sigma {
                    let mut w2 = w.clone();
                    w2.push(l.to_string());
                    next.push(w2);
                }
            }
            words.extend(next.clone());
            if next.is_empty() {
                break;
            }
        }
        words.dedup();
        for w in &words {
            assert_eq!(nfa.accepts_finite(w), dfa.accepts_finite(w), "word {w:?}");
        }
    }
}
