//! Three-round graded broadcast from a single leader.
//!
//! Round 1: the leader sends its value to everyone. Round 2: every node
//! echoes whatever it got from the leader. Round 3: a node that saw at
//! least `n - t` equal echoes supports that value. The grade is taken over
//! the supports: `n - t` gives confidence 2, `t + 1` gives confidence 1.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::model::{mode_lowest, Confidence, MultiSet, NodeId, Value, ValueKind};
use crate::simnet::{Envelope, HonestNode, NodeEvent, NodeSnapshot, Phase, StepOutput};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GradecastOutcome {
    pub leader: NodeId,
    pub value: Value,
    pub confidence: Confidence,
}

impl GradecastOutcome {
    pub fn bottom(leader: NodeId) -> Self {
        GradecastOutcome {
            leader,
            value: Value::Bottom,
            confidence: Confidence::Zero,
        }
    }
}

/// Keeps the envelopes whose sender is not ignored, preserving order.
pub fn gc_filter(inbox: Vec<Envelope>, ignore: &BTreeSet<NodeId>) -> Vec<Envelope> {
    inbox
        .into_iter()
        .filter(|e| !ignore.contains(&e.sender))
        .collect()
}

/// Receiver-side state of one gradecast (one leader, one iteration).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GradecastState {
    pub instance: u32,
    pub iteration: u32,
    pub leader: NodeId,
    pub me: NodeId,
    pub n: usize,
    pub t: usize,
    pub kind: ValueKind,
    pub ignore: BTreeSet<NodeId>,
    pub input: Option<Value>,
    pub round1: Option<Value>,
    pub round2: BTreeMap<NodeId, Value>,
    pub round3: BTreeMap<NodeId, Value>,
    /// Number of phases already acted upon (0..=3).
    pub stage: u8,
}

impl GradecastState {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        instance: u32,
        iteration: u32,
        leader: NodeId,
        me: NodeId,
        n: usize,
        t: usize,
        kind: ValueKind,
        ignore: BTreeSet<NodeId>,
        input: Option<Value>,
    ) -> Self {
        GradecastState {
            instance,
            iteration,
            leader,
            me,
            n,
            t,
            kind,
            ignore,
            input,
            round1: None,
            round2: BTreeMap::new(),
            round3: BTreeMap::new(),
            stage: 0,
        }
    }

    /// Records one envelope. Returns a warning for envelopes that are
    /// dropped for reasons other than the ignore set.
    pub fn absorb(&mut self, env: &Envelope) -> Option<String> {
        if self.ignore.contains(&env.sender) {
            return None;
        }
        let payload = match &env.payload {
            Some(v) if v.kind() == Some(self.kind) => v.clone(),
            other => {
                return Some(format!(
                    "dropped payload {other:?} from {} (expected {:?})",
                    env.sender, self.kind
                ))
            }
        };
        let Some(k) = env.phase.number() else {
            return Some(format!("non-gradecast phase from {}", env.sender));
        };
        if k <= self.stage {
            return Some(format!(
                "late phase-{k} message from {} for leader {}",
                env.sender, self.leader
            ));
        }
        let duplicate = || {
            Some(format!(
                "duplicate phase-{k} message from {} for leader {}; kept the first",
                env.sender, self.leader
            ))
        };
        match k {
            1 => {
                if env.sender != self.leader {
                    return Some(format!(
                        "phase-1 message for leader {} sent by {}",
                        self.leader, env.sender
                    ));
                }
                if self.round1.is_some() {
                    return duplicate();
                }
                self.round1 = Some(payload);
            }
            2 => {
                if self.round2.contains_key(&env.sender) {
                    return duplicate();
                }
                self.round2.insert(env.sender, payload);
            }
            _ => {
                if self.round3.contains_key(&env.sender) {
                    return duplicate();
                }
                self.round3.insert(env.sender, payload);
            }
        }
        None
    }

    fn to_all(&self, phase: Phase, v: Value) -> Vec<Envelope> {
        (0..self.n)
            .map(|q| {
                Envelope::gradecast(
                    self.instance,
                    self.iteration,
                    self.leader,
                    phase,
                    self.me,
                    NodeId(q),
                    v.clone(),
                )
            })
            .collect()
    }

    /// Emits this node's messages for `phase` and closes the previous
    /// phase for further input.
    pub fn emit(&mut self, phase: Phase) -> Vec<Envelope> {
        match phase {
            Phase::Send => {
                match (&self.input, self.me == self.leader) {
                    (Some(v), true) => self.to_all(Phase::Send, v.clone()),
                    _ => Vec::new(),
                }
            }
            Phase::Echo => {
                self.stage = self.stage.max(1);
                match self.round1.clone() {
                    Some(v) => self.to_all(Phase::Echo, v),
                    None => Vec::new(),
                }
            }
            Phase::Support => {
                self.stage = self.stage.max(2);
                match majority(&self.round2) {
                    Some((maj, count)) if count >= self.n - self.t => {
                        self.to_all(Phase::Support, maj)
                    }
                    _ => Vec::new(),
                }
            }
            Phase::Done => Vec::new(),
        }
    }

    /// Grades the gradecast from the supports received.
    pub fn grade(&mut self) -> GradecastOutcome {
        self.stage = 3;
        match majority(&self.round3) {
            Some((maj, count)) if count >= self.n - self.t => GradecastOutcome {
                leader: self.leader,
                value: maj,
                confidence: Confidence::Two,
            },
            Some((maj, count)) if count > self.t => GradecastOutcome {
                leader: self.leader,
                value: maj,
                confidence: Confidence::One,
            },
            _ => GradecastOutcome::bottom(self.leader),
        }
    }
}

fn majority(received: &BTreeMap<NodeId, Value>) -> Option<(Value, usize)> {
    let ms: MultiSet = received.values().cloned().collect();
    mode_lowest(&ms).ok()
}

/// Steps a gradecast through `phase`: absorbs `inbox` (already filtered),
/// then emits this node's messages for the phase.
pub fn gc_step(
    state: &mut GradecastState,
    phase: Phase,
    inbox: &[Envelope],
) -> (Vec<Envelope>, Vec<String>) {
    let warnings = inbox.iter().filter_map(|e| state.absorb(e)).collect();
    (state.emit(phase), warnings)
}

pub fn gc_grade(state: &mut GradecastState) -> GradecastOutcome {
    state.grade()
}

/// The `n` concurrent gradecasts of one iteration, indexed by leader.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GradecastBank {
    pub instance: u32,
    pub iteration: u32,
    pub states: Vec<GradecastState>,
}

impl GradecastBank {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        instance: u32,
        iteration: u32,
        me: NodeId,
        n: usize,
        t: usize,
        kind: ValueKind,
        ignore: &BTreeSet<NodeId>,
        input: Value,
    ) -> Self {
        let states = (0..n)
            .map(|q| {
                let leader = NodeId(q);
                GradecastState::new(
                    instance,
                    iteration,
                    leader,
                    me,
                    n,
                    t,
                    kind,
                    ignore.clone(),
                    (leader == me).then(|| input.clone()),
                )
            })
            .collect();
        GradecastBank {
            instance,
            iteration,
            states,
        }
    }

    pub fn absorb(&mut self, env: &Envelope) -> Option<String> {
        match self.states.get_mut(env.leader.0) {
            Some(s) => s.absorb(env),
            None => Some(format!("envelope for unknown leader {}", env.leader)),
        }
    }

    pub fn emit(&mut self, phase: Phase) -> Vec<Envelope> {
        self.states.iter_mut().flat_map(|s| s.emit(phase)).collect()
    }

    pub fn grade(&mut self) -> Vec<GradecastOutcome> {
        self.states.iter_mut().map(|s| s.grade()).collect()
    }
}

/// A node taking part in a single stand-alone gradecast. Ticks 0, 1 and 2
/// emit phases 1 to 3; tick 3 grades and terminates.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GradecastNode {
    pub state: GradecastState,
    pub outcome: Option<GradecastOutcome>,
}

impl GradecastNode {
    pub fn new(
        me: NodeId,
        leader: NodeId,
        n: usize,
        t: usize,
        ignore: BTreeSet<NodeId>,
        input: Option<Value>,
    ) -> Self {
        let kind = input
            .as_ref()
            .and_then(Value::kind)
            .unwrap_or(ValueKind::Discrete);
        GradecastNode {
            state: GradecastState::new(1, 1, leader, me, n, t, kind, ignore, input),
            outcome: None,
        }
    }
}

impl HonestNode for GradecastNode {
    fn id(&self) -> NodeId {
        self.state.me
    }

    fn step(&mut self, local_tick: u64, inbox: Vec<Envelope>) -> StepOutput {
        let mut out = StepOutput::default();
        for env in &inbox {
            if let Some(message) = self.state.absorb(env) {
                out.events.push(NodeEvent::Warning { message });
            }
        }
        match local_tick {
            0 => out.outbox = self.state.emit(Phase::Send),
            1 => out.outbox = self.state.emit(Phase::Echo),
            2 => out.outbox = self.state.emit(Phase::Support),
            3 => {
                let o = self.state.grade();
                out.events.push(NodeEvent::Graded {
                    leader: o.leader,
                    value: o.value.clone(),
                    confidence: o.confidence.level(),
                });
                self.outcome = Some(o);
            }
            _ => {}
        }
        out
    }

    fn terminated(&self) -> bool {
        self.outcome.is_some()
    }

    fn snapshot(&self) -> NodeSnapshot {
        NodeSnapshot {
            node: self.state.me,
            terminated: self.terminated(),
            instance: 1,
            iteration: 1,
            value: self.outcome.as_ref().map(|o| o.value.clone()),
            bad: self.state.ignore.clone(),
            ..Default::default()
        }
    }
}
