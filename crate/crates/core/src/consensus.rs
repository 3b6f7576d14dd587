//! Iterative Byzantine consensus over a finite value domain.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::driver::{LoopBody, LoopStep, ProtocolError, ProtocolNode, Schedule};
use crate::gradecast::GradecastOutcome;
use crate::model::{count_value, mode_lowest, Confidence, MultiSet, NodeId, SystemParams, Value, ValueKind};

/// Protocol variants. Only `Correct` is the real protocol; the other two
/// are deliberately broken and exist so the checkers can prove they catch
/// real bugs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ConsensusVariant {
    #[default]
    Correct,
    /// Breaks on `n - t - 1` confidence-2 copies instead of `n - t`.
    WeakBreak,
    /// Never adds anyone to BAD.
    NoBadUpdate,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ConsensusState {
    pub value: Value,
    pub bad: BTreeSet<NodeId>,
    pub variant: ConsensusVariant,
}

impl ConsensusState {
    pub fn new(input: Value) -> Self {
        ConsensusState {
            value: input,
            bad: BTreeSet::new(),
            variant: ConsensusVariant::Correct,
        }
    }
}

/// Result of one iteration: the majority value, its confidence-2 count and
/// whether the loop breaks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IterationResult {
    pub state: ConsensusState,
    pub maj: Value,
    pub maj_count: usize,
    pub broke: bool,
}

pub fn bc_iteration(
    state: &ConsensusState,
    outcomes: &[GradecastOutcome],
    params: &SystemParams,
) -> Result<IterationResult, ProtocolError> {
    let candidates: MultiSet = outcomes
        .iter()
        .filter(|o| o.confidence >= Confidence::One)
        .map(|o| o.value.clone())
        .collect();
    let (maj, _) = mode_lowest(&candidates)?;
    let certain: MultiSet = outcomes
        .iter()
        .filter(|o| o.confidence == Confidence::Two)
        .map(|o| o.value.clone())
        .collect();
    let maj_count = count_value(&certain, &maj);

    let mut next = state.clone();
    next.value = maj.clone();
    if state.variant != ConsensusVariant::NoBadUpdate {
        next.bad.extend(
            outcomes
                .iter()
                .filter(|o| o.confidence <= Confidence::One)
                .map(|o| o.leader),
        );
    }
    let threshold = match state.variant {
        ConsensusVariant::WeakBreak => params.quorum() - 1,
        _ => params.quorum(),
    };
    Ok(IterationResult {
        state: next,
        maj,
        maj_count,
        broke: maj_count >= threshold,
    })
}

impl LoopBody for ConsensusState {
    fn value(&self) -> &Value {
        &self.value
    }

    fn bad(&self) -> &BTreeSet<NodeId> {
        &self.bad
    }

    fn kind(&self) -> ValueKind {
        self.value.kind().unwrap_or(ValueKind::Discrete)
    }

    fn update(
        &mut self,
        outcomes: &[GradecastOutcome],
        params: &SystemParams,
    ) -> Result<LoopStep, ProtocolError> {
        let r = bc_iteration(self, outcomes, params)?;
        *self = r.state;
        Ok(LoopStep {
            broke: r.broke,
            warnings: Vec::new(),
        })
    }

    fn iteration_cap(&self, params: &SystemParams) -> Option<u32> {
        Some(params.t as u32 + 1)
    }
}

pub type ConsensusNode = ProtocolNode<ConsensusState>;

/// A consensus node on the lockstep schedule.
pub fn bc_run(me: NodeId, input: Value, params: SystemParams) -> ConsensusNode {
    ProtocolNode::new(me, params, 1, Schedule::stretched(0), ConsensusState::new(input))
}

/// A consensus node with full control over instance, schedule, initial
/// BAD set and variant.
pub fn bc_node(
    me: NodeId,
    input: Value,
    params: SystemParams,
    instance: u32,
    schedule: Schedule,
    bad: BTreeSet<NodeId>,
    variant: ConsensusVariant,
) -> ConsensusNode {
    ProtocolNode::new(
        me,
        params,
        instance,
        schedule,
        ConsensusState {
            value: input,
            bad,
            variant,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(v: i64) -> Value {
        Value::Discrete(v)
    }

    fn o(leader: usize, v: Option<i64>, c: Confidence) -> GradecastOutcome {
        GradecastOutcome {
            leader: NodeId(leader),
            value: v.map(d).unwrap_or(Value::Bottom),
            confidence: c,
        }
    }

    #[test]
    fn unanimous_iteration_breaks() {
        let p = SystemParams::new(4, 1, 0).unwrap();
        let s = ConsensusState::new(d(1));
        let outs: Vec<_> = (0..4).map(|q| o(q, Some(1), Confidence::Two)).collect();
        let r = bc_iteration(&s, &outs, &p).unwrap();
        assert_eq!(r.state.value, d(1));
        assert!(r.broke);
        assert!(r.state.bad.is_empty());
    }

    #[test]
    fn silent_corrupt_node_is_marked() {
        let p = SystemParams::new(4, 1, 1).unwrap();
        let s = ConsensusState::new(d(0));
        let outs = vec![
            o(0, Some(0), Confidence::Two),
            o(1, Some(0), Confidence::Two),
            o(2, Some(1), Confidence::Two),
            o(3, None, Confidence::Zero),
        ];
        let r = bc_iteration(&s, &outs, &p).unwrap();
        assert_eq!(r.maj, d(0));
        assert_eq!(r.maj_count, 2);
        assert!(!r.broke);
        assert_eq!(r.state.bad, [NodeId(3)].into());
    }

    #[test]
    fn confidence_one_lands_in_bad() {
        let p = SystemParams::new(4, 1, 1).unwrap();
        let s = ConsensusState::new(d(0));
        let outs = vec![
            o(0, Some(0), Confidence::Two),
            o(1, Some(0), Confidence::Two),
            o(2, Some(0), Confidence::Two),
            o(3, Some(5), Confidence::One),
        ];
        let r = bc_iteration(&s, &outs, &p).unwrap();
        assert!(r.state.bad.contains(&NodeId(3)));
        assert!(r.broke);
    }

    #[test]
    fn no_candidates_is_an_error() {
        let p = SystemParams::new(4, 1, 1).unwrap();
        let outs: Vec<_> = (0..4).map(|q| o(q, None, Confidence::Zero)).collect();
        assert!(bc_iteration(&ConsensusState::new(d(0)), &outs, &p).is_err());
    }

    #[test]
    fn mutants_differ_from_correct() {
        let p = SystemParams::new(4, 1, 1).unwrap();
        let outs = vec![
            o(0, Some(0), Confidence::Two),
            o(1, Some(0), Confidence::Two),
            o(2, Some(1), Confidence::Two),
            o(3, Some(1), Confidence::One),
        ];
        let mut s = ConsensusState::new(d(0));
        assert!(!bc_iteration(&s, &outs, &p).unwrap().broke);
        s.variant = ConsensusVariant::WeakBreak;
        assert!(bc_iteration(&s, &outs, &p).unwrap().broke);
        s.variant = ConsensusVariant::NoBadUpdate;
        assert!(bc_iteration(&s, &outs, &p).unwrap().state.bad.is_empty());
    }
}
