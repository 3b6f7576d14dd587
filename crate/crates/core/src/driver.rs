//! Shared iteration loop for the gradecast-based protocols.
//!
//! An iteration is one 3-round epoch in which every node leads its own
//! gradecast and takes part in all the others. A protocol round lasts
//! `width` ticks: a node emits its round-`k` messages at the first tick of
//! its local round-`k` window and keeps absorbing envelopes on every tick,
//! so senders up to `width - 1` ticks out of step still land in the right
//! round. With `width = 1` this is the plain lockstep schedule.

use std::collections::BTreeSet;
use std::fmt::Debug;
use std::hash::Hash;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gradecast::{GradecastBank, GradecastOutcome};
use crate::model::{ModelError, NodeId, SystemParams, Value, ValueKind};
use crate::simnet::{Envelope, HonestNode, NodeEvent, NodeSnapshot, OutcomeRecord, Phase, StepOutput};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("{0}")]
    Model(#[from] ModelError),
    #[error("underfull-multiset: {len} entries with t = {t}")]
    Underfull { len: usize, t: usize },
    #[error("{count} values with confidence >= 1 but only {n} nodes")]
    TooManyValues { count: usize, n: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoopStep {
    pub broke: bool,
    pub warnings: Vec<String>,
}

/// The per-iteration update rule of a protocol.
pub trait LoopBody: Clone + Debug + PartialEq + Eq + Hash {
    fn value(&self) -> &Value;
    fn bad(&self) -> &BTreeSet<NodeId>;
    fn kind(&self) -> ValueKind;
    /// Applies the iteration's outcomes (one per leader) to the state.
    fn update(
        &mut self,
        outcomes: &[GradecastOutcome],
        params: &SystemParams,
    ) -> Result<LoopStep, ProtocolError>;
    /// Last main-loop iteration, if the loop is bounded.
    fn iteration_cap(&self, params: &SystemParams) -> Option<u32>;
}

/// Maps protocol rounds to ticks: each round spans `width` ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Schedule {
    pub width: u64,
}

impl Schedule {
    pub fn stretched(delta: u64) -> Self {
        Schedule { width: delta + 1 }
    }

    /// The round whose first tick is `local_tick`, if any.
    pub fn round_start(&self, local_tick: u64) -> Option<u64> {
        local_tick.is_multiple_of(self.width).then_some(local_tick / self.width)
    }

    pub fn first_tick(&self, round: u64) -> u64 {
        round * self.width
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    Main,
    /// Participation-only iteration after breaking out of the loop.
    Extra,
    Finished,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProtocolNode<P: LoopBody> {
    pub me: NodeId,
    pub params: SystemParams,
    pub instance: u32,
    pub schedule: Schedule,
    pub body: P,
    pub iteration: u32,
    pub mode: Mode,
    pub broke_at: Option<u32>,
    pub decided: Option<Value>,
    pub start_value: Value,
    pub bad_start: BTreeSet<NodeId>,
    pub bank: GradecastBank,
    /// Envelopes for the next iteration that arrived early.
    pub early: Vec<Envelope>,
}

impl<P: LoopBody> ProtocolNode<P> {
    pub fn new(me: NodeId, params: SystemParams, instance: u32, schedule: Schedule, body: P) -> Self {
        let bank = GradecastBank::new(
            instance,
            1,
            me,
            params.n,
            params.t,
            body.kind(),
            body.bad(),
            body.value().clone(),
        );
        ProtocolNode {
            me,
            params,
            instance,
            schedule,
            start_value: body.value().clone(),
            bad_start: body.bad().clone(),
            body,
            iteration: 1,
            mode: Mode::Main,
            broke_at: None,
            decided: None,
            bank,
            early: Vec::new(),
        }
    }

    pub fn value(&self) -> &Value {
        self.body.value()
    }

    pub fn is_finished(&self) -> bool {
        self.mode == Mode::Finished
    }

    fn route(&mut self, env: Envelope, events: &mut Vec<NodeEvent>) {
        let warn = |events: &mut Vec<NodeEvent>, why: &str, env: &Envelope| {
            events.push(NodeEvent::Warning {
                message: format!("{why}: {env:?}"),
            })
        };
        if env.instance != self.instance {
            warn(events, "envelope for another instance", &env);
        } else if env.phase == Phase::Done {
            warn(events, "unexpected done message", &env);
        } else if env.iteration == self.iteration {
            if let Some(message) = self.bank.absorb(&env) {
                events.push(NodeEvent::Warning { message });
            }
        } else if env.iteration == self.iteration + 1 {
            self.early.push(env);
        } else {
            warn(events, "envelope outside the current iteration", &env);
        }
    }

    /// Grades the current iteration and moves to the next one (or stops).
    fn close_iteration(&mut self, events: &mut Vec<NodeEvent>) {
        let outcomes = self.bank.grade();
        let iteration = self.iteration;
        let extra = self.mode == Mode::Extra;
        let mut broke = false;
        if !extra {
            match self.body.update(&outcomes, &self.params) {
                Ok(step) => {
                    broke = step.broke;
                    events.extend(step.warnings.into_iter().map(|message| NodeEvent::Warning { message }));
                }
                Err(e) => events.push(NodeEvent::Warning {
                    message: format!("internal error in iteration {iteration}: {e}"),
                }),
            }
        }
        events.push(NodeEvent::IterationEnd {
            instance: self.instance,
            iteration,
            start_value: self.start_value.clone(),
            value: self.body.value().clone(),
            bad_start: self.bad_start.clone(),
            bad: self.body.bad().clone(),
            broke,
            extra,
            outcomes: outcomes
                .iter()
                .map(|o| OutcomeRecord {
                    leader: o.leader,
                    value: o.value.clone(),
                    confidence: o.confidence.level(),
                })
                .collect(),
        });

        let cap = self.body.iteration_cap(&self.params);
        self.mode = match self.mode {
            Mode::Extra => Mode::Finished,
            _ if broke => {
                self.broke_at = Some(iteration);
                if cap.is_none_or(|c| iteration < c) {
                    Mode::Extra
                } else {
                    Mode::Finished
                }
            }
            _ if cap == Some(iteration) => Mode::Finished,
            m => m,
        };
        if matches!(self.mode, Mode::Extra) || (self.mode == Mode::Finished && !extra) {
            // The returned value is fixed when the main loop ends.
            self.decided = Some(self.body.value().clone());
        }
        if self.mode == Mode::Finished {
            let value = self.decided.clone().unwrap_or_else(|| self.body.value().clone());
            events.push(NodeEvent::Decided {
                instance: self.instance,
                value,
                iterations: iteration,
            });
            events.push(NodeEvent::Terminated {
                instance: self.instance,
                iterations: iteration,
            });
            self.early.clear();
            return;
        }

        self.iteration += 1;
        self.start_value = self.body.value().clone();
        self.bad_start = self.body.bad().clone();
        self.bank = GradecastBank::new(
            self.instance,
            self.iteration,
            self.me,
            self.params.n,
            self.params.t,
            self.body.kind(),
            self.body.bad(),
            self.start_value.clone(),
        );
        for env in std::mem::take(&mut self.early) {
            if let Some(message) = self.bank.absorb(&env) {
                events.push(NodeEvent::Warning { message });
            }
        }
    }
}

impl<P: LoopBody> HonestNode for ProtocolNode<P> {
    fn id(&self) -> NodeId {
        self.me
    }

    fn step(&mut self, local_tick: u64, inbox: Vec<Envelope>) -> StepOutput {
        let mut out = StepOutput::default();
        if local_tick == 0 {
            out.events.push(NodeEvent::InstanceStarted {
                instance: self.instance,
                input: self.body.value().clone(),
            });
        }
        if self.is_finished() {
            return out;
        }
        for env in inbox {
            self.route(env, &mut out.events);
        }
        let Some(round) = self.schedule.round_start(local_tick) else {
            return out;
        };
        if round > 0 && round % 3 == 0 {
            self.close_iteration(&mut out.events);
            if self.is_finished() {
                return out;
            }
        }
        debug_assert_eq!(round / 3 + 1, self.iteration as u64);
        let phase = match round % 3 {
            0 => Phase::Send,
            1 => Phase::Echo,
            _ => Phase::Support,
        };
        out.outbox = self.bank.emit(phase);
        out
    }

    fn terminated(&self) -> bool {
        self.is_finished()
    }

    fn snapshot(&self) -> NodeSnapshot {
        NodeSnapshot {
            node: self.me,
            started: true,
            terminated: self.is_finished(),
            instance: self.instance,
            iteration: self.iteration,
            value: Some(self.body.value().clone()),
            bad: self.body.bad().clone(),
            broke_at: self.broke_at,
            decided: self.decided.clone(),
            extra: self.mode == Mode::Extra,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_round_starts() {
        let s = Schedule::stretched(0);
        assert_eq!(s.round_start(5), Some(5));
        let s = Schedule::stretched(2);
        assert_eq!(s.round_start(6), Some(2));
        assert_eq!(s.round_start(7), None);
        assert_eq!(s.first_tick(4), 12);
    }

    #[test]
    fn skewed_messages_land_in_the_right_round() {
        // A round-k message sent at the sender's local tick k*w arrives one
        // tick later; with a skew of up to delta it must arrive no later
        // than the receiver's next round start and no earlier than the
        // receiver's previous round start.
        for delta in 0..4u64 {
            let s = Schedule::stretched(delta);
            for skew in -(delta as i64)..=(delta as i64) {
                for k in 0..6u64 {
                    let arrival = (s.first_tick(k) + 1) as i64 + skew;
                    assert!(arrival <= s.first_tick(k + 1) as i64);
                    if k > 0 {
                        assert!(arrival > s.first_tick(k - 1) as i64);
                    }
                }
            }
        }
    }
}
