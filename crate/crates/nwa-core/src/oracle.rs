//! Independent brute-force reference implementation.
//!
//! Everything here recomputes values from the definitions with its own run
//! enumeration and its own value-function evaluators, deliberately sharing
//! no algorithmic code with the semantics ([`crate::nested`]), the
//! reductions ([`crate::reduce`]) or the deciders ([`crate::decide`]) it
//! validates. Only the plain data types and the SCC/reachability plumbing
//! are reused.
//!
//! Core idea for nondeterministic values: on a fixed lasso word, slave
//! invocations at different positions are independent, so a run of the
//! nested automaton is exactly a path through the (master state, word
//! position) product where each edge carries one of the achievable slave
//! return values. The product is expanded into a multigraph with a parallel
//! edge per achievable value (silent for ⊥), and the infimum over runs is
//! computed exactly per value function from the limit sets (strongly
//! connected edge sets visited infinitely often) of that multigraph.
//! Slave-value enumeration is budget-bounded, which is what makes
//! nondeterministic verdicts upper bounds rather than exact values.

use crate::automaton::{LassoWord, Mode, WeightedAutomaton};
use crate::graph::{reachable, sccs};
use crate::nested::{NestedWeightedAutomaton, NwaClass};
use crate::value::{ExtValue, FinValueFn, InfValueFn, Rat, Weight};
use num::{Signed, Zero};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use thiserror::Error;

/// Bounds on the oracle's enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleBudget {
    /// Longest lasso prefix enumerated by emptiness search.
    pub max_prefix: usize,
    /// Longest lasso period enumerated by emptiness search.
    pub max_period: usize,
    /// Longest slave run enumerated per position.
    pub max_slave_len: usize,
    /// Branching cap: at most `max_branch` successor transitions are
    /// followed per (state, letter) while enumerating slave runs.
    pub max_branch: usize,
}

impl OracleBudget {
    pub fn new(max_prefix: usize, max_period: usize, max_slave_len: usize, max_branch: usize) -> Self {
        assert!(max_period >= 1 && max_slave_len >= 1 && max_branch >= 1);
        OracleBudget {
            max_prefix,
            max_period,
            max_slave_len,
            max_branch,
        }
    }
}

/// Outcome of an oracle query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleVerdict {
    /// Exact value (deterministic inputs only).
    ExactValue(ExtValue),
    /// The minimum over all runs found within budget — an upper bound on
    /// the true value (`Infinity` when no run was found).
    UpperBound(ExtValue),
    /// Emptiness search: a lasso whose value is ≤ the threshold.
    WitnessFound(LassoWord, ExtValue),
    /// Emptiness search: no witness within the enumerated lassos.
    NoWitnessWithinBudget,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("oracle budget exceeded: {0}")]
    BudgetExceeded(String),
}

/// Hard cap on product nodes/edges materialized per word.
const PRODUCT_CAP: usize = 200_000;

// ---------------------------------------------------------------------------
// Oracle-local value evaluators (independent of crate::value).
// ---------------------------------------------------------------------------

/// Value of a finite weight list; `None` encodes ⊥ (empty list).
fn own_fin_value(f: &FinValueFn, ws: &[Rat]) -> Option<Rat> {
    let mut it = ws.iter();
    let first = it.next()?;
    Some(match f {
        FinValueFn::Max => {
            let mut m = first.clone();
            for w in it {
                if *w > m {
                    m = w.clone();
                }
            }
            m
        }
        FinValueFn::Min => {
            let mut m = first.clone();
            for w in it {
                if *w < m {
                    m = w.clone();
                }
            }
            m
        }
        FinValueFn::Sum => {
            let mut s = first.clone();
            for w in it {
                s = s + w;
            }
            s
        }
        FinValueFn::SumPlus => {
            let mut s = first.abs();
            for w in it {
                s = s + w.abs();
            }
            s
        }
        FinValueFn::BSum(b) => {
            let bound = Rat::from_integer((*b).into());
            let mut s = Rat::zero();
            for w in ws {
                s = s + w;
                if s.abs() > bound {
                    return Some(bound);
                }
            }
            s
        }
    })
}

/// Value of `prefix · period^ω` where entries are `Some(rational)` or
/// `None` (⊥, skipped). `Infinity` when the period holds no rational.
fn own_inf_value(f: InfValueFn, prefix: &[Option<Rat>], period: &[Option<Rat>]) -> ExtValue {
    let per: Vec<&Rat> = period.iter().flatten().collect();
    if per.is_empty() {
        return ExtValue::Infinity;
    }
    let pre: Vec<&Rat> = prefix.iter().flatten().collect();
    let all: Vec<&Rat> = pre.iter().chain(per.iter()).copied().collect();
    let minimum = |xs: &[&Rat]| xs.iter().min().map(|r| (*r).clone()).unwrap();
    let maximum = |xs: &[&Rat]| xs.iter().max().map(|r| (*r).clone()).unwrap();
    ExtValue::Rational(match f {
        InfValueFn::Sup => maximum(&all),
        InfValueFn::Inf => minimum(&all),
        InfValueFn::LimSup => maximum(&per),
        InfValueFn::LimInf => minimum(&per),
        InfValueFn::LimAvg => {
            let mut s = Rat::zero();
            for w in &per {
                s = s + *w;
            }
            s / Rat::from_integer((per.len() as i64).into())
        }
    })
}

// ---------------------------------------------------------------------------
// Product multigraph and exact infima over limit sets.
// ---------------------------------------------------------------------------

/// A finite multigraph whose runs stand in for runs of an automaton on one
/// fixed lasso word.
struct ProductGraph {
    n: usize,
    edges: Vec<(usize, usize, Weight)>,
    initial: Vec<usize>,
    accepting: Vec<bool>,
}

/// Exact infimum, over all runs from an initial node that visit accepting
/// nodes infinitely often and take infinitely many non-silent edges, of the
/// value-function applied to the run's non-silent weight sequence.
fn lasso_infimum(g: &ProductGraph, f: InfValueFn) -> ExtValue {
    let plain: Vec<(usize, usize)> = g.edges.iter().map(|(u, v, _)| (*u, *v)).collect();
    let reach = reachable(g.n, &plain, &g.initial);
    // Restrict to the reachable part.
    let edges: Vec<(usize, usize, &Weight)> = g
        .edges
        .iter()
        .filter(|(u, v, _)| reach[*u] && reach[*v])
        .map(|(u, v, w)| (*u, *v, w))
        .collect();
    let plain_r: Vec<(usize, usize)> = edges.iter().map(|(u, v, _)| (*u, *v)).collect();
    let comps = sccs(g.n, &plain_r);
    let mut comp_of = vec![usize::MAX; g.n];
    for (ci, c) in comps.iter().enumerate() {
        for &v in c {
            comp_of[v] = ci;
        }
    }
    // Intra-SCC edges per component, and liveness: a limit set needs an
    // accepting node and a non-silent edge inside one SCC.
    let mut intra: Vec<Vec<(usize, usize, &Weight)>> = vec![Vec::new(); comps.len()];
    for (u, v, w) in &edges {
        if comp_of[*u] == comp_of[*v] && comp_of[*u] != usize::MAX {
            intra[comp_of[*u]].push((*u, *v, w));
        }
    }
    let live: Vec<bool> = comps
        .iter()
        .enumerate()
        .map(|(ci, c)| {
            c.iter().any(|&v| reach[v] && g.accepting[v])
                && intra[ci].iter().any(|(_, _, w)| !w.is_silent())
        })
        .collect();
    if !live.iter().any(|&b| b) {
        return ExtValue::Infinity;
    }

    match f {
        InfValueFn::LimInf => {
            // Choose any live SCC and repeat its cheapest non-silent edge
            // infinitely often.
            let mut best: Option<Rat> = None;
            for (ci, is_live) in live.iter().enumerate() {
                if !is_live {
                    continue;
                }
                for (_, _, w) in &intra[ci] {
                    if let Weight::Rational(r) = w {
                        if best.as_ref().map_or(true, |b| r < &b) {
                            best = Some((*r).clone());
                        }
                    }
                }
            }
            ExtValue::Rational(best.unwrap())
        }
        InfValueFn::Inf => {
            // Detour through the globally cheapest non-silent edge from
            // which a live SCC is still reachable.
            let live_nodes: Vec<usize> = (0..g.n)
                .filter(|&v| comp_of[v] != usize::MAX && live[comp_of[v]])
                .collect();
            // Backward reachability to live SCCs.
            let rev: Vec<(usize, usize)> = plain_r.iter().map(|(u, v)| (*v, *u)).collect();
            let co = reachable(g.n, &rev, &live_nodes);
            let mut best: Option<Rat> = None;
            for (u, v, w) in &edges {
                if let Weight::Rational(r) = w {
                    if reach[*u] && co[*v] && best.as_ref().map_or(true, |b| r < &b) {
                        best = Some((*r).clone());
                    }
                }
            }
            ExtValue::Rational(best.unwrap())
        }
        InfValueFn::LimSup | InfValueFn::Sup => {
            // Smallest weight bound c such that, using only silent edges and
            // non-silent edges of weight ≤ c, a live SCC is reachable (for
            // Sup the whole stem is bound by c too; for LimSup the stem is
            // unconstrained).
            let mut candidates: BTreeSet<Rat> = BTreeSet::new();
            for (_, _, w) in &edges {
                if let Weight::Rational(r) = w {
                    candidates.insert((*r).clone());
                }
            }
            for c in candidates {
                let sub: Vec<(usize, usize, &Weight)> = edges
                    .iter()
                    .filter(|(_, _, w)| match w {
                        Weight::Silent => true,
                        Weight::Rational(r) => r <= &c,
                    })
                    .copied()
                    .collect();
                let sub_plain: Vec<(usize, usize)> = sub.iter().map(|(u, v, _)| (*u, *v)).collect();
                let sub_comps = sccs(g.n, &sub_plain);
                let mut sub_comp_of = vec![usize::MAX; g.n];
                for (ci, cc) in sub_comps.iter().enumerate() {
                    for &v in cc {
                        sub_comp_of[v] = ci;
                    }
                }
                let mut sub_live = vec![(false, false); sub_comps.len()];
                for (u, v, w) in &sub {
                    if sub_comp_of[*u] == sub_comp_of[*v] && !w.is_silent() {
                        sub_live[sub_comp_of[*u]].1 = true;
                    }
                }
                for v in 0..g.n {
                    if g.accepting[v] && sub_comp_of[v] != usize::MAX {
                        sub_live[sub_comp_of[v]].0 = true;
                    }
                }
                let entry: Vec<bool> = match f {
                    // Sup: the stem must also respect the bound.
                    InfValueFn::Sup => reachable(g.n, &sub_plain, &g.initial),
                    // LimSup: any stem may be used.
                    _ => reach.clone(),
                };
                let ok = (0..g.n).any(|v| {
                    entry[v]
                        && sub_comp_of[v] != usize::MAX
                        && sub_live[sub_comp_of[v]].0
                        && sub_live[sub_comp_of[v]].1
                });
                if ok {
                    return ExtValue::Rational(c);
                }
            }
            ExtValue::Infinity
        }
        InfValueFn::LimAvg => {
            // Minimum over simple cycles in live SCCs of
            // (sum of non-silent weights) / (number of non-silent edges);
            // silent edges contribute nothing to either.
            let mut best: Option<Rat> = None;
            for (ci, is_live) in live.iter().enumerate() {
                if !is_live {
                    continue;
                }
                for ratio in simple_cycle_ratios(g.n, &intra[ci]) {
                    if best.as_ref().map_or(true, |b| ratio < *b) {
                        best = Some(ratio);
                    }
                }
            }
            match best {
                Some(b) => ExtValue::Rational(b),
                None => ExtValue::Infinity,
            }
        }
    }
}

/// Ratios (non-silent weight sum / non-silent edge count) of all simple
/// cycles with at least one non-silent edge. Any non-simple cycle's ratio is
/// dominated by one of its simple sub-cycles, so simple cycles suffice for
/// the minimum.
fn simple_cycle_ratios(n: usize, edges: &[(usize, usize, &Weight)]) -> Vec<Rat> {
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n]; // (edge idx, target)
    for (i, (u, v, _)) in edges.iter().enumerate() {
        adj[*u].push((i, *v));
    }
    let mut out = Vec::new();
    // Cycles are rooted at their smallest node to avoid duplicates.
    for root in 0..n {
        let mut stack: Vec<(usize, Vec<usize>)> = vec![(root, Vec::new())]; // (node, edge path)
        // Depth-first over edge paths visiting nodes > root at most once.
        let mut on_path = vec![false; n];
        fn dfs(
            node: usize,
            root: usize,
            adj: &[Vec<(usize, usize)>],
            edges: &[(usize, usize, &Weight)],
            on_path: &mut Vec<bool>,
            path: &mut Vec<usize>,
            out: &mut Vec<Rat>,
        ) {
            on_path[node] = true;
            for &(ei, next) in &adj[node] {
                if next == root {
                    // Close a cycle: compute its ratio.
                    let mut sum = Rat::zero();
                    let mut count = 0i64;
                    for &pe in path.iter().chain(std::iter::once(&ei)) {
                        if let Weight::Rational(r) = edges[pe].2 {
                            sum = sum + r;
                            count += 1;
                        }
                    }
                    if count > 0 {
                        out.push(sum / Rat::from_integer(count.into()));
                    }
                } else if next > root && !on_path[next] {
                    path.push(ei);
                    dfs(next, root, adj, edges, on_path, path, out);
                    path.pop();
                }
            }
            on_path[node] = false;
        }
        let _ = &mut stack;
        dfs(root, root, &adj, edges, &mut on_path, &mut Vec::new(), &mut out);
    }
    out
}

// ---------------------------------------------------------------------------
// Canonical lasso positions and slave-run enumeration.
// ---------------------------------------------------------------------------

/// Positions of `u·v^ω` folded to `|u| + |v|` canonical indices.
fn canon_positions(word: &LassoWord) -> usize {
    word.prefix.len() + word.period.len()
}

fn next_canon(word: &LassoWord, p: usize) -> usize {
    if p + 1 < canon_positions(word) {
        p + 1
    } else {
        word.prefix.len()
    }
}

/// All slave return values achievable from canonical position `p` within the
/// budget: rationals for runs of 1..=max_slave_len transitions ending in an
/// accepting state, `None` for the ⊥ of an accepted empty run.
fn achievable_slave_values(
    slave: &WeightedAutomaton,
    word: &LassoWord,
    p: usize,
    budget: &OracleBudget,
) -> BTreeSet<Option<Rat>> {
    let mut out: BTreeSet<Option<Rat>> = BTreeSet::new();
    let f = slave.valuefn.fin().expect("slave value function is finite");
    // DFS over (state, steps taken) with the weight list on the path.
    fn dfs(
        slave: &WeightedAutomaton,
        f: &FinValueFn,
        word: &LassoWord,
        pos: usize,
        state: &String,
        weights: &mut Vec<Rat>,
        budget: &OracleBudget,
        out: &mut BTreeSet<Option<Rat>>,
    ) {
        if slave.base.accepting.contains(state) {
            out.insert(own_fin_value(f, weights));
        }
        if weights.len() >= budget.max_slave_len {
            return;
        }
        let letter = word.letter_at(pos);
        let mut taken = 0usize;
        for t in &slave.base.transitions {
            if t.from != *state || t.letter != *letter {
                continue;
            }
            if taken >= budget.max_branch {
                break;
            }
            taken += 1;
            let w = match slave.weight_of(t) {
                Weight::Rational(r) => r.clone(),
                Weight::Silent => unreachable!("silent weight in finite-word slave"),
            };
            weights.push(w);
            dfs(slave, f, word, pos + 1, &t.to, weights, budget, out);
            weights.pop();
        }
    }
    for q in &slave.base.initial {
        dfs(slave, f, word, p, q, &mut Vec::new(), budget, &mut out);
    }
    out
}

// ---------------------------------------------------------------------------
// Public oracle operations.
// ---------------------------------------------------------------------------

/// Brute-force value of a nested weighted automaton on one lasso word:
/// exact for deterministic inputs, an upper bound (minimum over runs found
/// within budget) otherwise.
pub fn oracle_value(
    nwa: &NestedWeightedAutomaton,
    word: &LassoWord,
    budget: &OracleBudget,
) -> Result<OracleVerdict, OracleError> {
    match nwa.classify() {
        NwaClass::Deterministic => Ok(OracleVerdict::ExactValue(det_value(nwa, word))),
        NwaClass::Nondeterministic => {
            let g = nwa_product(nwa, word, budget)?;
            Ok(OracleVerdict::UpperBound(lasso_infimum(&g, nwa.masterfn)))
        }
    }
}

/// Brute-force threshold emptiness of a nested automaton: enumerate lassos
/// up to the budget and report the first whose value is ≤ λ.
pub fn oracle_empty(
    nwa: &NestedWeightedAutomaton,
    lambda: &Rat,
    budget: &OracleBudget,
) -> Result<OracleVerdict, OracleError> {
    for word in enumerate_lassos(nwa.master.alphabet.letters().cloned().collect(), budget) {
        let value = match oracle_value(nwa, &word, budget)? {
            OracleVerdict::ExactValue(v) | OracleVerdict::UpperBound(v) => v,
            _ => unreachable!(),
        };
        if value.le_threshold(lambda) {
            return Ok(OracleVerdict::WitnessFound(word, value));
        }
    }
    Ok(OracleVerdict::NoWitnessWithinBudget)
}

/// Brute-force threshold emptiness of a plain (possibly silent) weighted
/// automaton over infinite words.
pub fn oracle_empty_wa(
    wa: &WeightedAutomaton,
    lambda: &Rat,
    budget: &OracleBudget,
) -> Result<OracleVerdict, OracleError> {
    debug_assert_eq!(wa.base.mode, Mode::InfiniteWord);
    for word in enumerate_lassos(wa.base.alphabet.letters().cloned().collect(), budget) {
        let value = wa_lasso_value(wa, &word);
        if value.le_threshold(lambda) {
            return Ok(OracleVerdict::WitnessFound(word, value));
        }
    }
    Ok(OracleVerdict::NoWitnessWithinBudget)
}

/// Exact value of a (possibly silent) infinite-word weighted automaton on a
/// lasso word: the infimum over all runs, computed from the limit sets of
/// the product of states with word positions.
pub fn wa_lasso_value(wa: &WeightedAutomaton, word: &LassoWord) -> ExtValue {
    debug_assert_eq!(wa.base.mode, Mode::InfiniteWord);
    let f = wa.valuefn.inf().expect("infinite-word value function");
    let states: Vec<&String> = wa.base.states.iter().collect();
    let index: HashMap<&String, usize> = states.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let positions = canon_positions(word);
    let node = |q: usize, p: usize| q * positions + p;
    let n = states.len() * positions;
    let mut edges = Vec::new();
    for t in &wa.base.transitions {
        for p in 0..positions {
            if *word.letter_at(p) == t.letter {
                edges.push((
                    node(index[&t.from], p),
                    node(index[&t.to], next_canon(word, p)),
                    wa.weight_of(t).clone(),
                ));
            }
        }
    }
    let accepting = (0..n)
        .map(|v| wa.base.accepting.contains(states[v / positions]))
        .collect();
    let g = ProductGraph {
        n,
        edges,
        initial: wa
            .base
            .initial
            .iter()
            .map(|q| node(index[q], 0))
            .collect(),
        accepting,
    };
    lasso_infimum(&g, f)
}

/// Exact value of a deterministic NWA on a lasso word, by direct
/// simulation: follow the unique run, launching the unique slave run per
/// position, until the (master state, period phase) pair repeats.
fn det_value(nwa: &NestedWeightedAutomaton, word: &LassoWord) -> ExtValue {
    let u = word.prefix.len();
    let v = word.period.len();
    let mut state = nwa.master.initial.iter().next().unwrap().clone();
    let mut seen: HashMap<(String, usize), usize> = HashMap::new();
    let mut values: Vec<Option<Rat>> = Vec::new();
    let mut accept_positions: Vec<usize> = Vec::new();
    let mut pos = 0usize;
    let (loop_start, loop_end) = loop {
        if pos >= u {
            let phase = (pos - u) % v;
            if let Some(&prev) = seen.get(&(state.clone(), phase)) {
                break (prev, pos);
            }
            seen.insert((state.clone(), phase), pos);
        }
        if nwa.master.accepting.contains(&state) {
            accept_positions.push(pos);
        }
        let letter = word.letter_at(pos);
        let Some(t) = nwa
            .master
            .transitions
            .iter()
            .find(|t| t.from == state && t.letter == *letter)
        else {
            return ExtValue::Infinity;
        };
        let slave = nwa.slave_of(t);
        match det_slave_value(slave, word, pos) {
            SlaveOutcome::Fails => return ExtValue::Infinity,
            SlaveOutcome::Returns(v) => values.push(v),
        }
        state = t.to.clone();
        pos += 1;
    };
    if !accept_positions.iter().any(|&p| p >= loop_start) {
        return ExtValue::Infinity;
    }
    own_inf_value(
        nwa.masterfn,
        &values[..loop_start],
        &values[loop_start..loop_end],
    )
}

enum SlaveOutcome {
    /// Stuck before accepting, or never terminates.
    Fails,
    /// Terminates with a value (`None` = ⊥, empty run).
    Returns(Option<Rat>),
}

fn det_slave_value(slave: &WeightedAutomaton, word: &LassoWord, start: usize) -> SlaveOutcome {
    let f = slave.valuefn.fin().unwrap();
    let mut state = slave.base.initial.iter().next().unwrap().clone();
    let mut weights: Vec<Rat> = Vec::new();
    let mut seen: BTreeSet<(String, usize)> = BTreeSet::new();
    let mut pos = start;
    loop {
        if slave.base.accepting.contains(&state) {
            return SlaveOutcome::Returns(own_fin_value(f, &weights));
        }
        let canon = if pos < word.prefix.len() {
            pos
        } else {
            word.prefix.len() + (pos - word.prefix.len()) % word.period.len()
        };
        if !seen.insert((state.clone(), canon)) {
            return SlaveOutcome::Fails;
        }
        let letter = word.letter_at(pos);
        let Some(t) = slave
            .base
            .transitions
            .iter()
            .find(|t| t.from == state && t.letter == *letter)
        else {
            return SlaveOutcome::Fails;
        };
        weights.push(match slave.weight_of(t) {
            Weight::Rational(r) => r.clone(),
            Weight::Silent => unreachable!(),
        });
        state = t.to.clone();
        pos += 1;
    }
}

/// Expand the NWA runs on `word` into a product multigraph: nodes are
/// (master state, canonical position), one parallel edge per achievable
/// slave return value at that position.
fn nwa_product(
    nwa: &NestedWeightedAutomaton,
    word: &LassoWord,
    budget: &OracleBudget,
) -> Result<ProductGraph, OracleError> {
    let states: Vec<&String> = nwa.master.states.iter().collect();
    let index: HashMap<&String, usize> = states.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let positions = canon_positions(word);
    let n = states.len() * positions;
    if n > PRODUCT_CAP {
        return Err(OracleError::BudgetExceeded(format!(
            "product would have {n} nodes (cap {PRODUCT_CAP})"
        )));
    }
    let node = |q: usize, p: usize| q * positions + p;
    // Achievable value sets, cached per (slave label, canonical position).
    let mut cache: BTreeMap<(usize, usize), BTreeSet<Option<Rat>>> = BTreeMap::new();
    let mut edges = Vec::new();
    for t in &nwa.master.transitions {
        let label = nwa.labels[t];
        for p in 0..positions {
            if *word.letter_at(p) != t.letter {
                continue;
            }
            let values = cache.entry((label, p)).or_insert_with(|| {
                achievable_slave_values(&nwa.slaves[label - 1], word, p, budget)
            });
            for v in values.iter() {
                let w = match v {
                    None => Weight::Silent,
                    Some(r) => Weight::Rational(r.clone()),
                };
                edges.push((
                    node(index[&t.from], p),
                    node(index[&t.to], next_canon(word, p)),
                    w,
                ));
                if edges.len() > PRODUCT_CAP {
                    return Err(OracleError::BudgetExceeded(format!(
                        "product would have more than {PRODUCT_CAP} edges"
                    )));
                }
            }
        }
    }
    let accepting = (0..n)
        .map(|v| nwa.master.accepting.contains(states[v / positions]))
        .collect();
    Ok(ProductGraph {
        n,
        edges,
        initial: nwa
            .master
            .initial
            .iter()
            .map(|q| node(index[q], 0))
            .collect(),
        accepting,
    })
}

/// All lassos with `|u| ≤ max_prefix`, `1 ≤ |v| ≤ max_period`, in
/// length-lexicographic order.
pub fn enumerate_lassos(alphabet: Vec<String>, budget: &OracleBudget) -> Vec<LassoWord> {
    let words = |max_len: usize, min_len: usize| -> Vec<Vec<String>> {
        let mut out: Vec<Vec<String>> = Vec::new();
        let mut frontier: Vec<Vec<String>> = vec![vec![]];
        if min_len == 0 {
            out.push(vec![]);
        }
        for len in 1..=max_len {
            let mut next = Vec::new();
            for w in &frontier {
                for l in &alphabet {
                    let mut w2 = w.clone();
                    w2.push(l.clone());
                    next.push(w2);
                }
            }
            if len >= min_len {
                out.extend(next.iter().cloned());
            }
            frontier = next;
        }
        out
    };
    let mut lassos = Vec::new();
    for period in words(budget.max_period, 1) {
        for prefix in words(budget.max_prefix, 0) {
            lassos.push(LassoWord {
                prefix: prefix.clone(),
                period: period.clone(),
            });
        }
    }
    lassos
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::{Transition, ValueFn};
    use crate::testutil::{build_automaton, build_weighted_fin, letters};
    use crate::value::{rat, rat_int};
    use std::collections::BTreeMap;

    fn budget() -> OracleBudget {
        OracleBudget::new(2, 4, 8, 3)
    }

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
    fn det_oracle_matches_paper_value() {
        let nwa = stuttering();
        let w = LassoWord::new(Vec::<String>::new(), letters("aaab"));
        assert_eq!(
            oracle_value(&nwa, &w, &budget()).unwrap(),
            OracleVerdict::ExactValue(ExtValue::Rational(rat(7, 4)))
        );
    }

    #[test]
    fn det_oracle_rejects_all_a() {
        let nwa = stuttering();
        let w = LassoWord::new(Vec::<String>::new(), letters("a"));
        assert_eq!(
            oracle_value(&nwa, &w, &budget()).unwrap(),
            OracleVerdict::ExactValue(ExtValue::Infinity)
        );
    }

    #[test]
    fn nondet_upper_bound_takes_cheaper_run() {
        // Master with a nondeterministic choice on `a` between a slave
        // returning 2 and a slave returning 5 (both read one letter).
        let master = build_automaton(
            Mode::InfiniteWord,
            &["a"],
            &["m", "m2"],
            &["m"],
            &["m", "m2"],
            &[("m", "a", "m"), ("m", "a", "m2"), ("m2", "a", "m2"), ("m2", "a", "m")],
        );
        let cheap = build_weighted_fin(
            FinValueFn::Sum,
            &["a"],
            &["s", "sf"],
            &["s"],
            &["sf"],
            &[("s", "a", "sf", 2)],
        );
        let dear = build_weighted_fin(
            FinValueFn::Sum,
            &["a"],
            &["t", "tf"],
            &["t"],
            &["tf"],
            &[("t", "a", "tf", 5)],
        );
        let nwa = NestedWeightedAutomaton {
            labels: BTreeMap::from([
                (Transition::new("m", "a", "m"), 2),
                (Transition::new("m", "a", "m2"), 1),
                (Transition::new("m2", "a", "m2"), 1),
                (Transition::new("m2", "a", "m"), 2),
            ]),
            master,
            masterfn: InfValueFn::LimAvg,
            slaves: vec![cheap, dear],
        };
        assert_eq!(nwa.classify(), NwaClass::Nondeterministic);
        let w = LassoWord::new(Vec::<String>::new(), letters("a"));
        match oracle_value(&nwa, &w, &budget()).unwrap() {
            OracleVerdict::UpperBound(ExtValue::Rational(r)) => assert!(r <= rat_int(2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_search_finds_witness() {
        let nwa = stuttering();
        // Value of (ab)^ω is (1+1)/2 = 1; λ = 1 has a witness.
        match oracle_empty(&nwa, &rat_int(1), &budget()).unwrap() {
            OracleVerdict::WitnessFound(_, v) => {
                assert!(v.le_threshold(&rat_int(1)));
            }
            other => panic!("unexpected {other:?}"),
        }
        // Every accepted word alternates blocks; value ≥ 1 always.
        assert_eq!(
            oracle_empty(&nwa, &rat(1, 2), &budget()).unwrap(),
            OracleVerdict::NoWitnessWithinBudget
        );
    }

    #[test]
    fn rejecting_automaton_has_no_witness() {
        let mut nwa = stuttering();
        nwa.master.accepting.clear();
        assert_eq!(
            oracle_empty(&nwa, &rat_int(100), &budget()).unwrap(),
            OracleVerdict::NoWitnessWithinBudget
        );
    }

    #[test]
    fn wa_lasso_value_limavg_with_silents() {
        // Silent self-loop on a, weighted loop on b of mean 2 through the
        // accepting state.
        let base = build_automaton(
            Mode::InfiniteWord,
            &["a", "b"],
            &["q"],
            &["q"],
            &["q"],
            &[("q", "a", "q"), ("q", "b", "q")],
        );
        let wa = WeightedAutomaton {
            weight: BTreeMap::from([
                (Transition::new("q", "a", "q"), Weight::Silent),
                (Transition::new("q", "b", "q"), Weight::Rational(rat_int(2))),
            ]),
            base,
            valuefn: ValueFn::Inf(InfValueFn::LimAvg),
        };
        let w = LassoWord::new(Vec::<String>::new(), letters("aab"));
        assert_eq!(wa_lasso_value(&wa, &w), ExtValue::Rational(rat_int(2)));
        // All-silent period: only finitely many non-silent entries.
        let w = LassoWord::new(letters("b"), letters("a"));
        assert_eq!(wa_lasso_value(&wa, &w), ExtValue::Infinity);
    }

    #[test]
    fn wa_lasso_value_sup_sees_stem_but_limsup_does_not() {
        let base = build_automaton(
            Mode::InfiniteWord,
            &["a", "b"],
            &["q"],
            &["q"],
            &["q"],
            &[("q", "a", "q"), ("q", "b", "q")],
        );
        let wa = WeightedAutomaton {
            weight: BTreeMap::from([
                (Transition::new("q", "a", "q"), Weight::Rational(rat_int(5))),
                (Transition::new("q", "b", "q"), Weight::Rational(rat_int(1))),
            ]),
            base,
            valuefn: ValueFn::Inf(InfValueFn::Sup),
        };
        let w = LassoWord::new(letters("a"), letters("b"));
        assert_eq!(wa_lasso_value(&wa, &w), ExtValue::Rational(rat_int(5)));
        let mut wa2 = wa.clone();
        wa2.valuefn = ValueFn::Inf(InfValueFn::LimSup);
        assert_eq!(wa_lasso_value(&wa2, &w), ExtValue::Rational(rat_int(1)));
    }

    #[test]
    fn upper_bound_is_antitone_in_budget() {
        let nwa = {
            let mut n = stuttering();
            // Make it nondeterministic: extra branch on the a-slave.
            n.slaves[0].base.states.insert("p2".into());
            n.slaves[0].base.transitions.insert(Transition::new("p", "a", "p2"));
            n.slaves[0]
                .weight
                .insert(Transition::new("p", "a", "p2"), Weight::Rational(rat_int(0)));
            n.slaves[0].base.transitions.insert(Transition::new("p2", "b", "pf"));
            n.slaves[0]
                .weight
                .insert(Transition::new("p2", "b", "pf"), Weight::Rational(rat_int(0)));
            n
        };
        assert_eq!(nwa.classify(), NwaClass::Nondeterministic);
        let w = LassoWord::new(Vec::<String>::new(), letters("aab"));
        let small = OracleBudget::new(1, 2, 3, 1);
        let large = OracleBudget::new(2, 4, 8, 4);
        let get = |b: &OracleBudget| match oracle_value(&nwa, &w, b).unwrap() {
            OracleVerdict::UpperBound(v) => v,
            other => panic!("unexpected {other:?}"),
        };
        let (vs, vl) = (get(&small), get(&large));
        match (vs, vl) {
            (ExtValue::Infinity, _) => {}
            (ExtValue::Rational(s), ExtValue::Rational(l)) => assert!(l <= s),
            (s, l) => panic!("unexpected pair {s:?} {l:?}"),
        }
    }
}
