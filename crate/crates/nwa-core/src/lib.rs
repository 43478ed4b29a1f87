//! Nested weighted automata: exact semantics on ultimately-periodic words,
//! reductions to (silent) weighted automata, and threshold emptiness /
//! universality deciders for every decidable fragment, cross-validated by an
//! independent brute-force oracle.
//!
//! A nested weighted automaton (NWA) pairs a *master* Büchi automaton over
//! infinite words with a family of *slave* weighted automata over finite
//! words. Each master transition invokes a slave on the suffix starting at
//! the current position; the slave runs to an accepting state and returns
//! the value of its run. The master's value function (`Sup`, `Inf`,
//! `LimSup`, `LimInf`, or `LimAvg`) aggregates the infinite sequence of
//! returned values, skipping silent (empty-run, ⊥) entries.
//!
//! Module map:
//! - [`value`] — exact rationals, value functions, evaluation on finite and
//!   eventually-periodic weight sequences.
//! - [`automaton`] — Boolean/weighted automata, determinism, prefix-free
//!   check, lasso membership.
//! - [`graph`] — SCCs, Karp minimum-mean cycle, Bellman–Ford, all over
//!   exact rationals.
//! - [`finword`] — value of a finite word under a weighted automaton and the
//!   per-value regular decomposition.
//! - [`nested`] — the NWA data model, classification, exact deterministic
//!   evaluation on lasso words, and run traces.
//! - [`oracle`] — independent brute-force reference implementation used to
//!   validate everything else.
//! - [`reduce`] — NWA-to-weighted-automaton reductions: obligation-set
//!   power-set construction, Boolean projection, silent-weight elimination,
//!   bounded-sum and bounded-multiplicity transforms.
//! - [`decide`] — threshold emptiness/universality deciders and the fragment
//!   routing matrix (decidable / undecidable / open).
//! - [`gallery`] — ready-made example automata (stuttering, average response
//!   time, resource consumption, message delay, context switches,
//!   intersection hardness instances) and the model-measuring/repair
//!   wrappers.

pub mod automaton;
pub mod decide;
pub mod finword;
pub mod gallery;
pub mod graph;
pub mod nested;
pub mod oracle;
pub mod reduce;
pub mod value;

pub use automaton::{
    Alphabet, Automaton, AutomatonError, GenBuchiAcceptance, LassoWord, Mode, Transition, ValueFn,
    WeightedAutomaton,
};
pub use value::{ExtValue, FinValueFn, InfValueFn, PeriodicWeightSeq, Rat, Weight};

#[cfg(test)]
pub(crate) mod testutil;
