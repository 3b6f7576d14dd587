//! Approximate agreement on exact rationals with the trimmed-mean update.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::BigRational;
use num_traits::Zero;

use crate::driver::{LoopBody, LoopStep, ProtocolError, ProtocolNode, Schedule};
use crate::gradecast::GradecastOutcome;
use crate::model::{Confidence, MultiSet, NodeId, SystemParams, Value, ValueKind};
use crate::simnet::{NodeEvent, Trace};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ApproxState {
    pub value: Value,
    pub bad: BTreeSet<NodeId>,
    pub epsilon: BigRational,
}

impl ApproxState {
    pub fn new(input: BigRational, epsilon: BigRational) -> Self {
        ApproxState {
            value: Value::Rational(input),
            bad: BTreeSet::new(),
            epsilon,
        }
    }
}

fn rationals(ms: &MultiSet) -> Vec<BigRational> {
    ms.sorted()
        .into_iter()
        .filter_map(|v| v.as_rational().cloned())
        .collect()
}

/// Mean of `m` after removing its `t` smallest and `t` largest entries.
pub fn avg_trimmed(m: &MultiSet, t: usize) -> Result<BigRational, ProtocolError> {
    let sorted = rationals(m);
    if sorted.len() <= 2 * t {
        return Err(ProtocolError::Underfull {
            len: sorted.len(),
            t,
        });
    }
    let kept = &sorted[t..sorted.len() - t];
    let sum: BigRational = kept.iter().cloned().sum();
    Ok(sum / BigRational::from_integer(kept.len().into()))
}

/// `values`: confidence >= 1 values padded with zeros to `n` entries.
/// `values2`: the confidence-2 values only.
pub fn build_values(
    outcomes: &[GradecastOutcome],
    n: usize,
) -> Result<(MultiSet, MultiSet), ProtocolError> {
    let mut values = MultiSet::new();
    let mut values2 = MultiSet::new();
    for o in outcomes {
        if o.confidence >= Confidence::One {
            values.insert(o.value.clone());
        }
        if o.confidence == Confidence::Two {
            values2.insert(o.value.clone());
        }
    }
    if values.len() > n {
        return Err(ProtocolError::TooManyValues {
            count: values.len(),
            n,
        });
    }
    let missing = n - values.len();
    values.insert_many(Value::Rational(BigRational::zero()), missing);
    Ok((values, values2))
}

/// True iff some `n - t` entries of `values2` lie within `epsilon` of each
/// other.
pub fn aa_should_break(values2: &MultiSet, epsilon: &BigRational, n: usize, t: usize) -> bool {
    let sorted = rationals(values2);
    let w = n - t;
    if sorted.len() < w || w == 0 {
        return false;
    }
    sorted.windows(w).any(|win| &(&win[w - 1] - &win[0]) <= epsilon)
}

/// Number of zero-padding entries that are still present after trimming.
fn surviving_padding(values: &MultiSet, padding: usize, t: usize) -> usize {
    if padding == 0 {
        return 0;
    }
    let zero = Value::Rational(BigRational::zero());
    let sorted = values.sorted();
    let kept = &sorted[t..sorted.len() - t];
    let zeros_kept = kept.iter().filter(|v| **v == zero).count();
    let real_zeros = values.count(&zero) - padding;
    zeros_kept.saturating_sub(real_zeros)
}

impl LoopBody for ApproxState {
    fn value(&self) -> &Value {
        &self.value
    }

    fn bad(&self) -> &BTreeSet<NodeId> {
        &self.bad
    }

    fn kind(&self) -> ValueKind {
        ValueKind::Rational
    }

    fn update(
        &mut self,
        outcomes: &[GradecastOutcome],
        params: &SystemParams,
    ) -> Result<LoopStep, ProtocolError> {
        let (values, values2) = build_values(outcomes, params.n)?;
        let padding = params.n
            - outcomes
                .iter()
                .filter(|o| o.confidence >= Confidence::One)
                .count();
        let mut warnings = Vec::new();
        let survived = surviving_padding(&values, padding, params.t);
        if survived > 0 {
            warnings.push(format!(
                "{survived} zero padding entr{} survived trimming",
                if survived == 1 { "y" } else { "ies" }
            ));
        }
        self.value = Value::Rational(avg_trimmed(&values, params.t)?);
        self.bad.extend(
            outcomes
                .iter()
                .filter(|o| o.confidence <= Confidence::One)
                .map(|o| o.leader),
        );
        Ok(LoopStep {
            broke: aa_should_break(&values2, &self.epsilon, params.n, params.t),
            warnings,
        })
    }

    fn iteration_cap(&self, _params: &SystemParams) -> Option<u32> {
        None
    }
}

pub type ApproxNode = ProtocolNode<ApproxState>;

pub fn aa_run(me: NodeId, input: BigRational, epsilon: BigRational, params: SystemParams) -> ApproxNode {
    ProtocolNode::new(me, params, 1, Schedule::stretched(0), ApproxState::new(input, epsilon))
}

/// Convergence data for one main-loop iteration `r`.
///
/// `low`/`high` bound the honest values gradecast in iteration `r`;
/// `next_low`/`next_high` bound the values honest nodes still in the main
/// loop hold after it. `new_r` is the growth of the intersection of honest
/// BAD sets during the iteration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IterationReport {
    pub iteration: u32,
    pub low: BigRational,
    pub high: BigRational,
    pub next_low: BigRational,
    pub next_high: BigRational,
    pub new_r: usize,
    pub updaters: usize,
    pub messages: u64,
}

impl IterationReport {
    pub fn range(&self) -> BigRational {
        &self.high - &self.low
    }

    pub fn next_range(&self) -> BigRational {
        &self.next_high - &self.next_low
    }

    /// `next_range <= range * new_r / (n - 2t)`, exactly.
    pub fn contraction_holds(&self, params: &SystemParams) -> bool {
        let bound = self.range() * BigRational::new(self.new_r.into(), params.trimmed_len().into());
        self.next_range() <= bound
    }
}

/// Per-iteration ranges and NEW_r of instance 1 of an approximate
/// agreement trace.
pub fn convergence_report(trace: &Trace) -> Vec<IterationReport> {
    struct Acc {
        starts: Vec<BigRational>,
        ends: Vec<BigRational>,
        bad_start: Vec<BTreeSet<NodeId>>,
        bad_end: Vec<BTreeSet<NodeId>>,
    }
    let mut by_iter: BTreeMap<u32, Acc> = BTreeMap::new();
    for e in &trace.events {
        if let NodeEvent::IterationEnd {
            instance: 1,
            iteration,
            start_value,
            value,
            bad_start,
            bad,
            extra,
            ..
        } = &e.event
        {
            let acc = by_iter.entry(*iteration).or_insert_with(|| Acc {
                starts: Vec::new(),
                ends: Vec::new(),
                bad_start: Vec::new(),
                bad_end: Vec::new(),
            });
            if let Some(r) = start_value.as_rational() {
                acc.starts.push(r.clone());
            }
            if !extra {
                if let Some(r) = value.as_rational() {
                    acc.ends.push(r.clone());
                }
                acc.bad_start.push(bad_start.clone());
                acc.bad_end.push(bad.clone());
            }
        }
    }
    let messages: BTreeMap<u32, u64> = trace
        .iteration_messages
        .iter()
        .filter(|m| m.instance == 1)
        .map(|m| (m.iteration, m.honest))
        .collect();
    let intersection = |sets: &[BTreeSet<NodeId>]| -> usize {
        let mut it = sets.iter();
        match it.next() {
            None => 0,
            Some(first) => it
                .fold(first.clone(), |acc, s| acc.intersection(s).cloned().collect())
                .len(),
        }
    };
    by_iter
        .into_iter()
        .filter(|(_, acc)| !acc.ends.is_empty())
        .map(|(iteration, acc)| {
            let min = |v: &[BigRational]| v.iter().min().cloned().unwrap_or_else(BigRational::zero);
            let max = |v: &[BigRational]| v.iter().max().cloned().unwrap_or_else(BigRational::zero);
            let new_r = intersection(&acc.bad_end).saturating_sub(intersection(&acc.bad_start));
            IterationReport {
                iteration,
                low: min(&acc.starts),
                high: max(&acc.starts),
                next_low: min(&acc.ends),
                next_high: max(&acc.ends),
                new_r,
                updaters: acc.ends.len(),
                messages: messages.get(&iteration).copied().unwrap_or(0),
            }
        })
        .collect()
}

/// CSV rows `(iteration, L, H, range, NEW_r, messages)` with decimal
/// companions for the rational columns.
pub fn report_csv(reports: &[IterationReport]) -> Result<String, csv::Error> {
    use crate::model::rational_to_f64;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "iteration", "L", "H", "range", "NEW_r", "messages", "L_decimal", "H_decimal", "range_decimal",
    ])?;
    for r in reports {
        let show = |q: &BigRational| Value::Rational(q.clone()).to_string();
        let dec = |q: &BigRational| format!("{:.9}", rational_to_f64(q));
        w.write_record([
            r.iteration.to_string(),
            show(&r.low),
            show(&r.high),
            show(&r.range()),
            r.new_r.to_string(),
            r.messages.to_string(),
            dec(&r.low),
            dec(&r.high),
            dec(&r.range()),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn ms(vals: &[(i64, i64)]) -> MultiSet {
        vals.iter().map(|&(n, d)| Value::Rational(q(n, d))).collect()
    }

    fn o(leader: usize, v: Option<i64>, c: Confidence) -> GradecastOutcome {
        GradecastOutcome {
            leader: NodeId(leader),
            value: v.map(|x| Value::Rational(q(x, 1))).unwrap_or(Value::Bottom),
            confidence: c,
        }
    }

    #[test]
    fn trimmed_mean_examples() {
        assert_eq!(avg_trimmed(&ms(&[(0, 1), (10, 1), (10, 1), (10, 1)]), 1).unwrap(), q(10, 1));
        assert_eq!(avg_trimmed(&ms(&[(1, 1), (2, 1), (3, 1), (4, 1)]), 1).unwrap(), q(5, 2));
        let m = ms(&[(7, 1), (15, 2), (8, 1), (-100, 1)]);
        let a = avg_trimmed(&m, 1).unwrap();
        assert!(a >= q(7, 1) && a <= q(8, 1));
        assert!(matches!(
            avg_trimmed(&ms(&[(1, 1), (2, 1)]), 1),
            Err(ProtocolError::Underfull { len: 2, t: 1 })
        ));
    }

    #[test]
    fn build_values_pads_with_zero() {
        let outs = vec![
            o(0, Some(0), Confidence::Two),
            o(1, Some(4), Confidence::Two),
            o(2, Some(8), Confidence::Two),
            o(3, None, Confidence::Zero),
        ];
        let (v, v2) = build_values(&outs, 4).unwrap();
        assert_eq!(v, ms(&[(0, 1), (0, 1), (4, 1), (8, 1)]));
        assert_eq!(v2, ms(&[(0, 1), (4, 1), (8, 1)]));

        let none: Vec<_> = (0..4).map(|l| o(l, None, Confidence::Zero)).collect();
        let (v, v2) = build_values(&none, 4).unwrap();
        assert_eq!(v.count(&Value::Rational(q(0, 1))), 4);
        assert!(v2.is_empty());
    }

    #[test]
    fn break_window_examples() {
        assert!(aa_should_break(&ms(&[(2, 1), (2, 1), (2, 1)]), &q(0, 1), 4, 1));
        assert!(!aa_should_break(&ms(&[(0, 1), (4, 1), (8, 1)]), &q(1, 1), 4, 1));
        assert!(aa_should_break(&ms(&[(0, 1), (1, 2), (1, 1), (9, 1)]), &q(1, 1), 4, 1));
        assert!(!aa_should_break(&ms(&[(0, 1), (0, 1)]), &q(1, 1), 4, 1));
    }

    #[test]
    fn padding_survival_is_detected() {
        // Honest values all negative: the two zero pads sit at the top, one
        // is trimmed and the other survives.
        let values = ms(&[(-3, 1), (-2, 1), (0, 1), (0, 1)]);
        assert_eq!(surviving_padding(&values, 2, 1), 1);
        let values = ms(&[(0, 1), (4, 1), (8, 1), (0, 1)]);
        assert_eq!(surviving_padding(&values, 1, 1), 0);
    }
}
