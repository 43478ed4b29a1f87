//! Exact evaluation of value functions on finite and eventually-periodic
//! weight sequences.
//!
//! Finite-word value functions ([`FinValueFn`]) aggregate the weights of a
//! finite run; infinite-word value functions ([`InfValueFn`]) aggregate an
//! infinite weight sequence presented as a lasso ([`PeriodicWeightSeq`]).
//!
//! `LimAvg` is defined as the limit superior of partial averages. On an
//! eventually-periodic sequence the partial averages converge to the mean of
//! the period: the prefix's contribution to the k-th partial average is
//! O(1/k), and within each full period the running average oscillates around
//! the period mean by at most (max − min)·|period|/k. Hence the closed form
//! used here — the exact period mean — coincides with the limsup definition.

use num::{BigRational, Signed, Zero};
use std::fmt;

/// Exact rational number with arbitrary-precision numerator and denominator.
pub type Rat = BigRational;

/// Convenience constructor for a rational from an integer pair.
pub fn rat(num: i64, den: i64) -> Rat {
    BigRational::new(num.into(), den.into())
}

/// Convenience constructor for an integer-valued rational.
pub fn rat_int(num: i64) -> Rat {
    BigRational::from_integer(num.into())
}

/// A transition weight: an exact rational, or silent (the transition
/// contributes no value; its slave returns ⊥).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Weight {
    Rational(Rat),
    Silent,
}

impl Weight {
    pub fn as_rational(&self) -> Option<&Rat> {
        match self {
            Weight::Rational(r) => Some(r),
            Weight::Silent => None,
        }
    }

    pub fn is_silent(&self) -> bool {
        matches!(self, Weight::Silent)
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Weight::Rational(r) => write!(f, "{r}"),
            Weight::Silent => write!(f, "silent"),
        }
    }
}

/// Value of a word or run: an exact rational, bottom (⊥, the value of an
/// empty weight sequence, e.g. an empty-word slave run), or infinity (no
/// accepting run).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ExtValue {
    Rational(Rat),
    Bottom,
    Infinity,
}

impl ExtValue {
    pub fn rational(&self) -> Option<&Rat> {
        match self {
            ExtValue::Rational(r) => Some(r),
            _ => None,
        }
    }

    pub fn is_infinity(&self) -> bool {
        matches!(self, ExtValue::Infinity)
    }

    /// Minimum of two values under the order used for infima over runs:
    /// every rational is below `Infinity`. `Bottom` is not comparable with
    /// rationals in the paper's semantics; callers must not mix it into
    /// infima (debug-asserted).
    pub fn min_for_infimum(self, other: ExtValue) -> ExtValue {
        debug_assert!(!matches!(self, ExtValue::Bottom));
        debug_assert!(!matches!(other, ExtValue::Bottom));
        match (self, other) {
            (ExtValue::Infinity, v) | (v, ExtValue::Infinity) => v,
            (ExtValue::Rational(a), ExtValue::Rational(b)) => {
                ExtValue::Rational(a.min(b))
            }
            (a, _) => a,
        }
    }

    /// `value ≤ λ` in the threshold sense: `Infinity` exceeds every λ and
    /// `Bottom` satisfies no threshold.
    pub fn le_threshold(&self, lambda: &Rat) -> bool {
        match self {
            ExtValue::Rational(r) => r <= lambda,
            ExtValue::Bottom | ExtValue::Infinity => false,
        }
    }
}

impl fmt::Display for ExtValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtValue::Rational(r) => write!(f, "{r}"),
            ExtValue::Bottom => write!(f, "bottom"),
            ExtValue::Infinity => write!(f, "infinity"),
        }
    }
}

/// Value functions on finite weight sequences.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FinValueFn {
    Max,
    Min,
    Sum,
    /// Sum of absolute values.
    SumPlus,
    /// Bounded sum: the sum, unless some prefix's absolute sum exceeds the
    /// bound, in which case the bound itself.
    BSum(u64),
}

impl fmt::Display for FinValueFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FinValueFn::Max => write!(f, "Max"),
            FinValueFn::Min => write!(f, "Min"),
            FinValueFn::Sum => write!(f, "Sum"),
            FinValueFn::SumPlus => write!(f, "Sum+"),
            FinValueFn::BSum(b) => write!(f, "BSum({b})"),
        }
    }
}

/// Value functions on infinite weight sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InfValueFn {
    Sup,
    Inf,
    LimSup,
    LimInf,
    LimAvg,
}

impl InfValueFn {
    /// The value function computing the negated value on negated weights:
    /// Inf↔Sup, LimInf↔LimSup, LimAvg is self-dual.
    pub fn dual(self) -> InfValueFn {
        match self {
            InfValueFn::Sup => InfValueFn::Inf,
            InfValueFn::Inf => InfValueFn::Sup,
            InfValueFn::LimSup => InfValueFn::LimInf,
            InfValueFn::LimInf => InfValueFn::LimSup,
            InfValueFn::LimAvg => InfValueFn::LimAvg,
        }
    }
}

impl fmt::Display for InfValueFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            InfValueFn::Sup => "Sup",
            InfValueFn::Inf => "Inf",
            InfValueFn::LimSup => "LimSup",
            InfValueFn::LimInf => "LimInf",
            InfValueFn::LimAvg => "LimAvg",
        };
        write!(f, "{name}")
    }
}

/// An eventually-periodic infinite weight sequence `prefix · period^ω`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeriodicWeightSeq {
    pub prefix: Vec<Weight>,
    pub period: Vec<Weight>,
}

impl PeriodicWeightSeq {
    pub fn new(prefix: Vec<Weight>, period: Vec<Weight>) -> Self {
        assert!(!period.is_empty(), "period must be nonempty");
        PeriodicWeightSeq { prefix, period }
    }
}

/// Evaluate a finite-word value function on a weight sequence. The empty
/// sequence evaluates to ⊥ for every value function.
pub fn eval_fin(f: &FinValueFn, seq: &[Rat]) -> ExtValue {
    if seq.is_empty() {
        return ExtValue::Bottom;
    }
    let v = match f {
        FinValueFn::Max => seq.iter().max().unwrap().clone(),
        FinValueFn::Min => seq.iter().min().unwrap().clone(),
        FinValueFn::Sum => seq.iter().sum(),
        FinValueFn::SumPlus => seq.iter().map(|w| w.abs()).sum(),
        FinValueFn::BSum(b) => {
            let bound = rat_int(*b as i64);
            let mut sum = Rat::zero();
            let mut overflow = false;
            for w in seq {
                sum += w;
                if sum.abs() > bound {
                    overflow = true;
                    break;
                }
            }
            if overflow {
                bound
            } else {
                sum
            }
        }
    };
    ExtValue::Rational(v)
}

/// Evaluate an infinite-word value function on an eventually-periodic weight
/// sequence.
///
/// With `skip_silent`, silent entries are removed first (the f̄ semantics on
/// slave return values: ⊥ entries are dropped). If the period then becomes
/// empty — only finitely many non-silent entries remain — the result is
/// `Infinity`, mirroring the acceptance requirement that infinitely many
/// non-silent transitions occur.
///
/// Without `skip_silent` the sequence must contain no silent entries.
pub fn eval_inf(f: InfValueFn, seq: &PeriodicWeightSeq, skip_silent: bool) -> ExtValue {
    assert!(!seq.period.is_empty(), "period must be nonempty");
    let take = |ws: &[Weight]| -> Vec<Rat> {
        ws.iter()
            .map(|w| match w {
                Weight::Rational(r) => r.clone(),
                Weight::Silent => {
                    assert!(skip_silent, "silent weight in a non-silent evaluation");
                    unreachable!()
                }
            })
            .collect()
    };
    let (prefix, period): (Vec<Rat>, Vec<Rat>) = if skip_silent {
        (
            seq.prefix
                .iter()
                .filter_map(|w| w.as_rational().cloned())
                .collect(),
            seq.period
                .iter()
                .filter_map(|w| w.as_rational().cloned())
                .collect(),
        )
    } else {
        (take(&seq.prefix), take(&seq.period))
    };
    if period.is_empty() {
        return ExtValue::Infinity;
    }
    let v = match f {
        InfValueFn::Sup => prefix.iter().chain(period.iter()).max().unwrap().clone(),
        InfValueFn::Inf => prefix.iter().chain(period.iter()).min().unwrap().clone(),
        InfValueFn::LimSup => period.iter().max().unwrap().clone(),
        InfValueFn::LimInf => period.iter().min().unwrap().clone(),
        InfValueFn::LimAvg => {
            let sum: Rat = period.iter().sum();
            sum / rat_int(period.len() as i64)
        }
    };
    ExtValue::Rational(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rats(xs: &[i64]) -> Vec<Rat> {
        xs.iter().map(|&x| rat_int(x)).collect()
    }

    fn weights(xs: &[i64]) -> Vec<Weight> {
        xs.iter().map(|&x| Weight::Rational(rat_int(x))).collect()
    }

    #[test]
    fn sum_of_finite_sequence() {
        assert_eq!(
            eval_fin(&FinValueFn::Sum, &rats(&[2, 3, 1])),
            ExtValue::Rational(rat_int(6))
        );
    }

    #[test]
    fn bsum_clamps_on_prefix_overflow() {
        // Prefix sums 2, 4, 0: the second prefix exceeds the bound 3, so the
        // result is the bound itself even though the total sum is 0.
        assert_eq!(
            eval_fin(&FinValueFn::BSum(3), &rats(&[2, 2, -4])),
            ExtValue::Rational(rat_int(3))
        );
    }

    #[test]
    fn bsum_negative_excursion_clamps_symmetrically() {
        assert_eq!(
            eval_fin(&FinValueFn::BSum(2), &rats(&[-3, 3])),
            ExtValue::Rational(rat_int(2))
        );
    }

    #[test]
    fn empty_sequence_is_bottom_for_every_fn() {
        for f in [
            FinValueFn::Max,
            FinValueFn::Min,
            FinValueFn::Sum,
            FinValueFn::SumPlus,
            FinValueFn::BSum(1),
        ] {
            assert_eq!(eval_fin(&f, &[]), ExtValue::Bottom);
        }
    }

    #[test]
    fn limavg_of_period_0_1_2_4_is_seven_fourths() {
        let seq = PeriodicWeightSeq::new(vec![], weights(&[0, 1, 2, 4]));
        assert_eq!(
            eval_inf(InfValueFn::LimAvg, &seq, false),
            ExtValue::Rational(rat(7, 4))
        );
    }

    #[test]
    fn sup_sees_prefix_but_limsup_does_not() {
        let seq = PeriodicWeightSeq::new(weights(&[5]), weights(&[1]));
        assert_eq!(
            eval_inf(InfValueFn::Sup, &seq, false),
            ExtValue::Rational(rat_int(5))
        );
        assert_eq!(
            eval_inf(InfValueFn::LimSup, &seq, false),
            ExtValue::Rational(rat_int(1))
        );
    }

    #[test]
    fn limavg_skips_silent_entries() {
        let seq = PeriodicWeightSeq::new(
            vec![],
            vec![
                Weight::Silent,
                Weight::Rational(rat_int(3)),
                Weight::Silent,
            ],
        );
        assert_eq!(
            eval_inf(InfValueFn::LimAvg, &seq, true),
            ExtValue::Rational(rat_int(3))
        );
    }

    #[test]
    fn all_silent_period_is_infinity() {
        let seq = PeriodicWeightSeq::new(weights(&[1, 2]), vec![Weight::Silent]);
        for f in [
            InfValueFn::Sup,
            InfValueFn::Inf,
            InfValueFn::LimSup,
            InfValueFn::LimInf,
            InfValueFn::LimAvg,
        ] {
            assert_eq!(eval_inf(f, &seq, true), ExtValue::Infinity);
        }
    }

    #[test]
    fn limavg_closed_form_matches_unrolled_partial_averages() {
        // Partial averages over k copies of the period approach the exact
        // period mean; check convergence within 1/k.
        let period = weights(&[0, 1, 2, 4]);
        let seq = PeriodicWeightSeq::new(vec![], period.clone());
        let exact = match eval_inf(InfValueFn::LimAvg, &seq, false) {
            ExtValue::Rational(r) => r,
            other => panic!("unexpected {other:?}"),
        };
        for k in 1..=100i64 {
            let mut entries: Vec<Rat> = Vec::new();
            for _ in 0..k {
                entries.extend(period.iter().map(|w| w.as_rational().unwrap().clone()));
            }
            let n = entries.len() as i64;
            let avg: Rat = entries.iter().sum::<Rat>() / rat_int(n);
            assert!((avg - &exact).abs() <= rat(1, k));
        }
        // A nonzero prefix perturbs the k-period partial average by O(1/k).
        let seq = PeriodicWeightSeq::new(weights(&[9, 9]), period.clone());
        let exact2 = match eval_inf(InfValueFn::LimAvg, &seq, false) {
            ExtValue::Rational(r) => r,
            other => panic!("unexpected {other:?}"),
        };
        assert_eq!(exact2, exact);
        for k in 1..=100i64 {
            let mut entries: Vec<Rat> = rats(&[9, 9]);
            for _ in 0..k {
                entries.extend(period.iter().map(|w| w.as_rational().unwrap().clone()));
            }
            let n = entries.len() as i64;
            let avg: Rat = entries.iter().sum::<Rat>() / rat_int(n);
            assert!((avg - &exact).abs() <= rat(4, k));
        }
    }

    #[test]
    fn sum_plus_equals_sum_of_absolutes() {
        let xs = rats(&[3, -2, 0, -7]);
        let abs: Vec<Rat> = xs.iter().map(|x| x.abs()).collect();
        assert_eq!(
            eval_fin(&FinValueFn::SumPlus, &xs),
            eval_fin(&FinValueFn::Sum, &abs)
        );
    }
}
