//! The nested weighted automaton data model and its exact semantics on
//! ultimately-periodic words.
//!
//! A nested weighted automaton (NWA) is a master Büchi automaton whose
//! transitions are labeled with slave indices, plus one finite-word weighted
//! automaton per index. Reading an infinite word, the master takes one
//! transition per letter and invokes the labeled slave at that position; the
//! slave runs on a finite subword starting there (reading the same letter
//! the master just read) and must end in an accepting state, returning the
//! value of its run — or ⊥ for an empty run. A run of the NWA is accepting
//! when the master run is Büchi-accepting, every slave run ends accepting,
//! and infinitely many slave runs take at least one transition. The value of
//! the run is the master value function applied to the returned-value
//! sequence with ⊥ entries removed; the value of a word is the infimum over
//! accepting runs (infinite when there are none).

use crate::automaton::{
    Alphabet, Automaton, AutomatonError, LassoWord, Mode, Transition, ValueFn, WeightedAutomaton,
};
use crate::value::{
    eval_fin, eval_inf, ExtValue, InfValueFn, PeriodicWeightSeq, Rat, Weight,
};
use num::BigUint;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use thiserror::Error;

/// Nested weighted automaton: labeled master + indexed slaves + master value
/// function. Slave indices are 1-based, matching the usual presentation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NestedWeightedAutomaton {
    /// Infinite-word master automaton.
    pub master: Automaton,
    /// Slave index (1-based) per master transition.
    pub labels: BTreeMap<Transition, usize>,
    /// Value function aggregating the slave return values.
    pub masterfn: InfValueFn,
    /// Finite-word weighted slave automata, `slaves[i-1]` for label `i`.
    pub slaves: Vec<WeightedAutomaton>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NwaError {
    #[error("component invalid: {0:?}")]
    Component(Vec<AutomatonError>),
    #[error("master transition `{0} --{1}--> {2}` has no slave label")]
    MissingLabel(String, String, String),
    #[error("label {0} references no slave (have {1})")]
    UndeclaredSlave(usize, usize),
    #[error("master must read infinite words")]
    MasterNotInfinite,
    #[error("slave {0} must read finite words")]
    SlaveNotFinite(usize),
    #[error("slave {0} has an infinite-word value function")]
    SlaveValueFnNotFinite(usize),
    #[error("slave {0} alphabet differs from the master's")]
    AlphabetMismatch(usize),
    #[error("operation requires a deterministic nested automaton")]
    NotDeterministic,
}

/// Determinism classification of an NWA.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NwaClass {
    Deterministic,
    Nondeterministic,
}

/// The master state together with the states of the currently running
/// slaves, as observed at one position of a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Configuration {
    pub master_state: String,
    /// (slave index, slave state) per running slave, without multiplicity.
    pub slave_states: BTreeSet<(usize, String)>,
}

/// Occupation counts refining a [`Configuration`]: how many running slaves
/// sit in each slave state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Multiplicity {
    pub counts: BTreeMap<(usize, String), u32>,
}

/// One step of a deterministic NWA run: the position (1-based), the
/// configuration and multiplicity just before reading that position's
/// letter, and the value returned by the slave invoked there.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NwaRunTrace {
    pub steps: Vec<(usize, Configuration, Multiplicity, Vec<ExtValue>)>,
}

/// A slave accepting exactly the empty word: invoking it is the canonical
/// silent transition (it returns ⊥ immediately).
pub fn silent_slave(alphabet: &Alphabet) -> WeightedAutomaton {
    WeightedAutomaton {
        base: Automaton {
            alphabet: alphabet.clone(),
            states: BTreeSet::from(["sil".to_string()]),
            initial: BTreeSet::from(["sil".to_string()]),
            transitions: BTreeSet::new(),
            accepting: BTreeSet::from(["sil".to_string()]),
            mode: Mode::FiniteWord,
        },
        weight: BTreeMap::new(),
        valuefn: ValueFn::Fin(crate::value::FinValueFn::Sum),
    }
}

impl NestedWeightedAutomaton {
    /// Validate all components and the cross-references between them.
    pub fn validate(&self) -> Result<(), Vec<NwaError>> {
        let mut errs = Vec::new();
        if self.master.mode != Mode::InfiniteWord {
            errs.push(NwaError::MasterNotInfinite);
        }
        if let Err(e) = self.master.validate() {
            errs.push(NwaError::Component(e));
        }
        for t in &self.master.transitions {
            match self.labels.get(t) {
                None => errs.push(NwaError::MissingLabel(
                    t.from.clone(),
                    t.letter.clone(),
                    t.to.clone(),
                )),
                Some(&i) if i == 0 || i > self.slaves.len() => {
                    errs.push(NwaError::UndeclaredSlave(i, self.slaves.len()))
                }
                Some(_) => {}
            }
        }
        for (idx, slave) in self.slaves.iter().enumerate() {
            let i = idx + 1;
            if slave.base.mode != Mode::FiniteWord {
                errs.push(NwaError::SlaveNotFinite(i));
            }
            if slave.valuefn.fin().is_none() {
                errs.push(NwaError::SlaveValueFnNotFinite(i));
            }
            if slave.base.alphabet != self.master.alphabet {
                errs.push(NwaError::AlphabetMismatch(i));
            }
            if let Err(e) = slave.validate() {
                errs.push(NwaError::Component(e));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }

    /// The slave invoked by a master transition.
    pub fn slave_of(&self, t: &Transition) -> &WeightedAutomaton {
        &self.slaves[self.labels[t] - 1]
    }

    /// Deterministic iff the master and every slave are deterministic and
    /// every slave's language is prefix-free (so a deterministic slave run
    /// is forced to stop at the first accepting state).
    pub fn classify(&self) -> NwaClass {
        let det = self.master.is_deterministic()
            && self.slaves.iter().all(|s| {
                s.base.is_deterministic() && s.base.is_prefix_free()
            });
        if det {
            NwaClass::Deterministic
        } else {
            NwaClass::Nondeterministic
        }
    }

    /// Total states over all slaves (the disjoint union `Q_slv`).
    pub fn slave_state_count(&self) -> usize {
        self.slaves.iter().map(|s| s.base.states.len()).sum()
    }

    /// Upper bound `|Q_m| · 2^{|Q_slv|}` on the number of configurations,
    /// together with the number of configurations actually reachable by
    /// forward exploration from the initial configuration(s).
    pub fn configuration_count(&self) -> (BigUint, usize) {
        let bound =
            BigUint::from(self.master.states.len()) * (BigUint::from(1u8) << self.slave_state_count());
        let reachable = self.reachable_configurations(usize::MAX).len();
        (bound, reachable)
    }

    /// All configurations reachable along runs, exploring every
    /// nondeterministic choice, up to `limit` configurations.
    pub fn reachable_configurations(&self, limit: usize) -> Vec<Configuration> {
        let mut seen: Vec<Configuration> = Vec::new();
        let mut queue: Vec<Configuration> = Vec::new();
        for q in &self.master.initial {
            let c = Configuration {
                master_state: q.clone(),
                slave_states: BTreeSet::new(),
            };
            if !seen.contains(&c) {
                seen.push(c.clone());
                queue.push(c);
            }
        }
        while let Some(c) = queue.pop() {
            if seen.len() >= limit {
                break;
            }
            for succ in self.configuration_successors(&c) {
                if !seen.contains(&succ) {
                    seen.push(succ.clone());
                    queue.push(succ);
                }
            }
        }
        seen
    }

    /// Successor configurations over all letters and nondeterministic
    /// choices. Each active slave state either terminates (when accepting)
    /// or takes one of its transitions; the newly invoked slave joins in its
    /// initial state unless it terminates immediately on the empty word.
    fn configuration_successors(&self, c: &Configuration) -> Vec<Configuration> {
        let mut out = Vec::new();
        for letter in self.master.alphabet.letters() {
            for t in &self.master.transitions {
                if t.from != c.master_state || t.letter != *letter {
                    continue;
                }
                let label = self.labels[t];
                let spawn = &self.slaves[label - 1];
                // Choices for the spawned slave: start running, or return ⊥
                // immediately when its initial state accepts the empty word.
                let mut starts: Vec<Option<(usize, String)>> = spawn
                    .base
                    .initial
                    .iter()
                    .map(|q| Some((label, q.clone())))
                    .collect();
                if spawn
                    .base
                    .initial
                    .iter()
                    .any(|q| spawn.base.accepting.contains(q))
                {
                    starts.push(None);
                }
                for start in starts {
                    let mut active: Vec<(usize, String)> = c.slave_states.iter().cloned().collect();
                    if let Some(s) = start.clone() {
                        active.push(s);
                    }
                    // Enumerate per-slave-state choices recursively.
                    let mut results: Vec<BTreeSet<(usize, String)>> = vec![BTreeSet::new()];
                    let mut dead = false;
                    for (idx, state) in &active {
                        let slave = &self.slaves[idx - 1];
                        let mut options: Vec<Option<String>> = Vec::new();
                        if slave.base.accepting.contains(state) {
                            options.push(None); // terminate here
                        }
                        for s in slave.base.successors(state, letter) {
                            options.push(Some(s.clone()));
                        }
                        if options.is_empty() {
                            dead = true;
                            break;
                        }
                        let mut next_results = Vec::new();
                        for r in &results {
                            for opt in &options {
                                let mut r2 = r.clone();
                                if let Some(s) = opt {
                                    r2.insert((*idx, s.clone()));
                                }
                                next_results.push(r2);
                            }
                        }
                        next_results.sort();
                        next_results.dedup();
                        results = next_results;
                    }
                    if dead {
                        continue;
                    }
                    for slave_states in results {
                        out.push(Configuration {
                            master_state: t.to.clone(),
                            slave_states,
                        });
                    }
                }
            }
        }
        out.sort_by(|a, b| {
            (&a.master_state, &a.slave_states).cmp(&(&b.master_state, &b.slave_states))
        });
        out.dedup();
        out
    }

    /// Exact value of a deterministic NWA on a lasso word.
    pub fn eval_det(&self, word: &LassoWord) -> Result<ExtValue, NwaError> {
        let sim = self.simulate_det(word)?;
        Ok(match sim {
            DetSimulation::Rejecting => ExtValue::Infinity,
            DetSimulation::Lasso {
                values,
                loop_start,
                loop_end,
                master_states,
            } => {
                // Büchi acceptance of the unique master run: an accepting
                // state must occur inside the loop.
                let buchi_ok = master_states[loop_start..loop_end]
                    .iter()
                    .any(|q| self.master.accepting.contains(q));
                if !buchi_ok {
                    return Ok(ExtValue::Infinity);
                }
                let to_weight = |v: &ExtValue| match v {
                    ExtValue::Rational(r) => Weight::Rational(r.clone()),
                    ExtValue::Bottom => Weight::Silent,
                    ExtValue::Infinity => unreachable!("slave failure handled as Rejecting"),
                };
                let seq = PeriodicWeightSeq::new(
                    values[..loop_start].iter().map(to_weight).collect(),
                    values[loop_start..loop_end].iter().map(to_weight).collect(),
                );
                eval_inf(self.masterfn, &seq, true)
            }
        })
    }

    /// Step-by-step run view of a deterministic NWA up to `horizon`
    /// positions: configuration and multiplicity before each step and the
    /// value returned by the slave invoked at that position.
    pub fn trace(&self, word: &LassoWord, horizon: usize) -> Result<NwaRunTrace, NwaError> {
        if self.classify() != NwaClass::Deterministic {
            return Err(NwaError::NotDeterministic);
        }
        let mut steps = Vec::new();
        // Master states along positions 0..horizon.
        let mut master_states = Vec::with_capacity(horizon + 1);
        let mut q = self.master.initial.iter().next().cloned();
        // Per launch position: label, state sequence (state before reading
        // position launch+offset), and returned value.
        let mut launches: Vec<(usize, Vec<String>, ExtValue)> = Vec::new();
        for pos in 0..horizon {
            let Some(state) = q.clone() else { break };
            master_states.push(state.clone());
            let letter = word.letter_at(pos);
            let Some(t) = self
                .master
                .transitions
                .iter()
                .find(|t| t.from == state && t.letter == *letter)
            else {
                break;
            };
            let label = self.labels[t];
            let (states, value) = self.run_slave(label, word, pos, horizon + self.slave_step_bound(word));
            launches.push((label, states, value));
            q = Some(t.to.clone());
        }
        for pos in 0..master_states.len() {
            let mut counts: BTreeMap<(usize, String), u32> = BTreeMap::new();
            for (launch, (label, states, _)) in launches.iter().enumerate() {
                if launch > pos {
                    break;
                }
                let offset = pos - launch;
                // A slave with n recorded states takes n−1 transitions and
                // is active at offsets 0..n−1.
                if states.len() >= 2 && offset < states.len() - 1 {
                    *counts
                        .entry((*label, states[offset].clone()))
                        .or_insert(0) += 1;
                }
            }
            let configuration = Configuration {
                master_state: master_states[pos].clone(),
                slave_states: counts.keys().cloned().collect(),
            };
            steps.push((
                pos + 1,
                configuration,
                Multiplicity { counts },
                vec![launches[pos].2.clone()],
            ));
        }
        Ok(NwaRunTrace { steps })
    }

    /// Bound on slave simulation length before a (state, phase) revisit must
    /// occur: `|Q_slave|·max(|u|,|v|) + |u|` with the largest slave.
    fn slave_step_bound(&self, word: &LassoWord) -> usize {
        let max_slave = self
            .slaves
            .iter()
            .map(|s| s.base.states.len())
            .max()
            .unwrap_or(1);
        max_slave * word.prefix.len().max(word.period.len()) + word.prefix.len() + 1
    }

    /// Run slave `label` deterministically from `start` until it reaches an
    /// accepting state. Returns the visited state sequence and the returned
    /// value; `Infinity` marks a slave that gets stuck or never terminates.
    fn run_slave(
        &self,
        label: usize,
        word: &LassoWord,
        start: usize,
        max_steps: usize,
    ) -> (Vec<String>, ExtValue) {
        let slave = &self.slaves[label - 1];
        let mut state = slave.base.initial.iter().next().unwrap().clone();
        let mut states = vec![state.clone()];
        let mut weights: Vec<Rat> = Vec::new();
        let mut seen: HashMap<(String, usize), ()> = HashMap::new();
        let mut pos = start;
        loop {
            if slave.base.accepting.contains(&state) {
                let f = slave.valuefn.fin().unwrap();
                return (states, eval_fin(f, &weights));
            }
            // Canonical position collapses period phases so nontermination
            // shows up as a revisit.
            let canon = if pos < word.prefix.len() {
                pos
            } else {
                word.prefix.len() + (pos - word.prefix.len()) % word.period.len()
            };
            if seen.insert((state.clone(), canon), ()).is_some() || states.len() > max_steps {
                return (states, ExtValue::Infinity);
            }
            let letter = word.letter_at(pos);
            let Some(t) = slave
                .base
                .transitions
                .iter()
                .find(|t| t.from == state && t.letter == *letter)
            else {
                return (states, ExtValue::Infinity);
            };
            match slave.weight_of(t) {
                Weight::Rational(r) => weights.push(r.clone()),
                Weight::Silent => unreachable!("silent weight in finite-word slave"),
            }
            state = t.to.clone();
            states.push(state.clone());
            pos += 1;
        }
    }

    /// Deterministic simulation along `u·v^ω` with period detection on
    /// (master state, period phase).
    fn simulate_det(&self, word: &LassoWord) -> Result<DetSimulation, NwaError> {
        if self.classify() != NwaClass::Deterministic {
            return Err(NwaError::NotDeterministic);
        }
        let u = word.prefix.len();
        let v = word.period.len();
        let max_steps = self.slave_step_bound(word) + u + v * (self.master.states.len() + 1) + 2;
        let mut state = self.master.initial.iter().next().unwrap().clone();
        let mut master_states: Vec<String> = Vec::new();
        let mut values: Vec<ExtValue> = Vec::new();
        let mut first_seen: HashMap<(String, usize), usize> = HashMap::new();
        let mut pos = 0usize;
        loop {
            if pos >= u {
                let phase = (pos - u) % v;
                if let Some(&prev) = first_seen.get(&(state.clone(), phase)) {
                    return Ok(DetSimulation::Lasso {
                        values,
                        loop_start: prev,
                        loop_end: pos,
                        master_states,
                    });
                }
                first_seen.insert((state.clone(), phase), pos);
            }
            master_states.push(state.clone());
            let letter = word.letter_at(pos);
            let Some(t) = self
                .master
                .transitions
                .iter()
                .find(|t| t.from == state && t.letter == *letter)
            else {
                return Ok(DetSimulation::Rejecting);
            };
            let label = self.labels[t];
            let (_, value) = self.run_slave(label, word, pos, max_steps);
            if value.is_infinity() {
                return Ok(DetSimulation::Rejecting);
            }
            values.push(value);
            state = t.to.clone();
            pos += 1;
            assert!(pos <= max_steps, "period detection must terminate");
        }
    }
}

enum DetSimulation {
    /// The unique candidate run fails (stuck master, stuck or
    /// non-terminating slave).
    Rejecting,
    /// The unique run is a lasso: returned values per position, with the
    /// loop spanning positions `loop_start..loop_end`.
    Lasso {
        values: Vec<ExtValue>,
        loop_start: usize,
        loop_end: usize,
        master_states: Vec<String>,
    },
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{build_automaton, build_weighted_fin, letters};
    use crate::value::{rat, rat_int, FinValueFn};

    /// The stuttering automaton: one master state, `a` invokes a slave for
    /// a*b (value = number of a's), `b` invokes a slave for b*a, LimAvg.
    fn stuttering() -> NestedWeightedAutomaton {
        let master = build_automaton(
            Mode::InfiniteWord,
            &["a", "b"],
            &["m"],
            &["m"],
            &["m"],
            &[("m", "a", "m"), ("m", "b", "m")],
        );
        let slave1 = build_weighted_fin(
            FinValueFn::SumPlus,
            &["a", "b"],
            &["p", "pf"],
            &["p"],
            &["pf"],
            &[("p", "a", "p", 1), ("p", "b", "pf", 0)],
        );
        let slave2 = build_weighted_fin(
            FinValueFn::SumPlus,
            &["a", "b"],
            &["r", "rf"],
            &["r"],
            &["rf"],
            &[("r", "b", "r", 1), ("r", "a", "rf", 0)],
        );
        NestedWeightedAutomaton {
            labels: BTreeMap::from([
                (Transition::new("m", "a", "m"), 1),
                (Transition::new("m", "b", "m"), 2),
            ]),
            master,
            masterfn: InfValueFn::LimAvg,
            slaves: vec![slave1, slave2],
        }
    }

    #[test]
    fn stuttering_validates_and_is_deterministic() {
        let nwa = stuttering();
        assert!(nwa.validate().is_ok());
        assert_eq!(nwa.classify(), NwaClass::Deterministic);
    }

    #[test]
    fn slave_accepting_a_star_breaks_determinism() {
        let mut nwa = stuttering();
        nwa.slaves[0] = build_weighted_fin(
            FinValueFn::SumPlus,
            &["a", "b"],
            &["p"],
            &["p"],
            &["p"],
            &[("p", "a", "p", 1)],
        );
        assert_eq!(nwa.classify(), NwaClass::Nondeterministic);
    }

    #[test]
    fn nondeterministic_master_detected() {
        let mut nwa = stuttering();
        nwa.master.states.insert("m2".into());
        nwa.master.transitions.insert(Transition::new("m", "a", "m2"));
        nwa.labels.insert(Transition::new("m", "a", "m2"), 1);
        assert_eq!(nwa.classify(), NwaClass::Nondeterministic);
    }

    #[test]
    fn stuttering_value_on_aaab_is_seven_fourths() {
        let nwa = stuttering();
        let w = LassoWord::new(Vec::<String>::new(), letters("aaab"));
        assert_eq!(nwa.eval_det(&w).unwrap(), ExtValue::Rational(rat(7, 4)));
    }

    #[test]
    fn stuttering_formula_on_an_b() {
        let nwa = stuttering();
        for n in 1..=8usize {
            let period: Vec<String> = std::iter::repeat("a".to_string())
                .take(n)
                .chain(std::iter::once("b".to_string()))
                .collect();
            let w = LassoWord::new(Vec::<String>::new(), period);
            let expected = rat((n * (n + 1) / 2 + 1) as i64, (n + 1) as i64);
            assert_eq!(nwa.eval_det(&w).unwrap(), ExtValue::Rational(expected));
        }
    }

    #[test]
    fn stuttering_rejects_pure_a() {
        // On a^ω the a-slave never meets a b: no accepting run.
        let nwa = stuttering();
        let w = LassoWord::new(Vec::<String>::new(), letters("a"));
        assert_eq!(nwa.eval_det(&w).unwrap(), ExtValue::Infinity);
    }

    #[test]
    fn eval_is_invariant_under_period_rotation_and_doubling() {
        let nwa = stuttering();
        let w = LassoWord::new(letters("ab"), letters("aab"));
        let base = nwa.eval_det(&w).unwrap();
        assert_eq!(nwa.eval_det(&w.absorb_period()).unwrap(), base);
        assert_eq!(nwa.eval_det(&w.double_period()).unwrap(), base);
    }

    #[test]
    fn trace_reports_returned_values_and_multiplicities() {
        let nwa = stuttering();
        let w = LassoWord::new(Vec::<String>::new(), letters("aaab"));
        let trace = nwa.trace(&w, 4).unwrap();
        assert_eq!(trace.steps.len(), 4);
        let returned: Vec<ExtValue> =
            trace.steps.iter().map(|(_, _, _, vs)| vs[0].clone()).collect();
        // Slaves invoked at positions 1..4 read a³b, a²b, ab, and (wrapping
        // into the next period) ba: values 3, 2, 1, 1.
        assert_eq!(
            returned,
            vec![
                ExtValue::Rational(rat_int(3)),
                ExtValue::Rational(rat_int(2)),
                ExtValue::Rational(rat_int(1)),
                ExtValue::Rational(rat_int(1)),
            ]
        );
        // At position 3 the slaves launched at 1, 2, 3 are all still reading
        // a's in state p.
        let (_, config, mult, _) = &trace.steps[2];
        assert_eq!(config.slave_states.len(), 1);
        assert_eq!(mult.counts[&(1usize, "p".to_string())], 3);
    }

    #[test]
    fn trace_horizon_zero_is_empty() {
        let nwa = stuttering();
        let w = LassoWord::new(Vec::<String>::new(), letters("ab"));
        assert!(nwa.trace(&w, 0).unwrap().steps.is_empty());
    }

    #[test]
    fn configuration_count_bound_and_reachable() {
        let nwa = stuttering();
        // 1 master state, 4 slave states in total: bound 1·2⁴ = 16.
        let (bound, reachable) = nwa.configuration_count();
        assert_eq!(bound, BigUint::from(16u32));
        assert!(reachable >= 1);
        assert!(BigUint::from(reachable) <= bound);
    }

    #[test]
    fn missing_label_is_reported() {
        let mut nwa = stuttering();
        nwa.labels.remove(&Transition::new("m", "b", "m"));
        let errs = nwa.validate().unwrap_err();
        assert!(errs.iter().any(|e| matches!(e, NwaError::MissingLabel(..))));
    }

    #[test]
    fn silent_slave_returns_bottom_and_counts_as_silent() {
        // Master invokes the a*b counter on a and the silent slave on b.
        let mut nwa = stuttering();
        nwa.slaves[1] = silent_slave(&nwa.master.alphabet);
        let w = LassoWord::new(Vec::<String>::new(), letters("aab"));
        // Period values: 2, 1, ⊥ — LimAvg over non-silent entries = 3/2.
        assert_eq!(nwa.eval_det(&w).unwrap(), ExtValue::Rational(rat(3, 2)));
    }
}
