//! Sequences of consensus instances sharing one BAD set per node.
//!
//! Synchronized sequences start every instance at the same tick on all
//! nodes. Unsynchronized sequences let nodes start up to `delta` ticks
//! apart: rounds are stretched to `delta + 1` ticks and a separate `done`
//! exchange, evaluated on every tick, decides when an instance is over.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::consensus::{bc_node, ConsensusNode, ConsensusVariant};
use crate::driver::Schedule;
use crate::model::{NodeId, SystemParams, Value};
use crate::simnet::{
    run_simulation, Adversary, Envelope, HonestNode, NodeEvent, NodeSnapshot, Phase, SimConfig, SimError,
    StepOutput, Trace,
};

pub type InputFn = dyn Fn(u32, NodeId, Option<&Value>) -> Value + Send + Sync;

/// Where each instance's inputs come from. The callback receives the
/// instance number (from 1), the node and the node's previous decision.
#[derive(Clone)]
pub struct InstanceInputs(pub Arc<InputFn>);

impl InstanceInputs {
    /// Fixed per-instance tables; `table[k - 1][p]` is node `p`'s input to
    /// instance `k`. Missing entries fall back to the previous decision.
    pub fn table(table: Vec<BTreeMap<NodeId, Value>>) -> Self {
        InstanceInputs(Arc::new(move |k, p, prev| {
            table
                .get(k as usize - 1)
                .and_then(|m| m.get(&p).cloned())
                .or_else(|| prev.cloned())
                .unwrap_or(Value::Discrete(0))
        }))
    }

    /// Instance 1 uses `first`; every later instance starts from the
    /// node's previous decision.
    pub fn chained(first: BTreeMap<NodeId, Value>) -> Self {
        InstanceInputs(Arc::new(move |k, p, prev| match (k, prev) {
            (1, _) | (_, None) => first.get(&p).cloned().unwrap_or(Value::Discrete(0)),
            (_, Some(v)) => v.clone(),
        }))
    }

    pub fn input(&self, instance: u32, node: NodeId, prev: Option<&Value>) -> Value {
        (self.0)(instance, node, prev)
    }
}

impl fmt::Debug for InstanceInputs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("InstanceInputs(..)")
    }
}

#[derive(Debug, Clone)]
pub struct SequenceConfig {
    pub ell: u32,
    pub inputs: InstanceInputs,
    pub delta: u64,
    pub offsets: BTreeMap<NodeId, u64>,
}

/// Each gradecast round spans `delta + 1` ticks.
pub fn stretch_schedule(delta: u64) -> Schedule {
    Schedule::stretched(delta)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DoneState {
    pub done_senders: BTreeSet<NodeId>,
    pub sent_done: bool,
    pub halted: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DoneStep {
    pub outbox: Vec<Envelope>,
    /// `Some(true)` for a relay, `Some(false)` when sent on own termination.
    pub sent: Option<bool>,
    pub halt: bool,
}

/// One tick of the `done` exchange. `inbox` holds the `done` envelopes of
/// the current instance; senders in BAD still count.
pub fn done_step(
    state: &mut DoneState,
    inbox: &[Envelope],
    wants_terminate: bool,
    me: NodeId,
    instance: u32,
    params: &SystemParams,
) -> DoneStep {
    for e in inbox {
        if e.phase == Phase::Done && e.instance == instance {
            state.done_senders.insert(e.sender);
        }
    }
    let mut step = DoneStep::default();
    if state.halted {
        return step;
    }
    let relay = state.done_senders.len() > params.t;
    if !state.sent_done && (wants_terminate || relay) {
        state.sent_done = true;
        step.outbox = params.nodes().map(|q| Envelope::done(instance, me, q)).collect();
        step.sent = Some(!wants_terminate);
    }
    if state.done_senders.len() > 2 * params.t {
        state.halted = true;
        step.halt = true;
    }
    step
}

/// Per-node record of one instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub instance: u32,
    pub node: NodeId,
    pub decision: Value,
    pub start_tick: u64,
    pub halt_tick: u64,
    pub iterations: u32,
}

pub fn records_csv(records: &[InstanceRecord]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["instance", "node", "decision", "start_tick", "halt_tick", "iterations"])?;
    for r in records {
        w.write_record([
            r.instance.to_string(),
            r.node.0.to_string(),
            r.decision.to_string(),
            r.start_tick.to_string(),
            r.halt_tick.to_string(),
            r.iterations.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// A node running `ell` consensus instances back to back with the `done`
/// exchange deciding when each one ends.
#[derive(Debug, Clone)]
pub struct SequenceNode {
    pub me: NodeId,
    pub params: SystemParams,
    pub ell: u32,
    pub schedule: Schedule,
    pub inputs: InstanceInputs,
    pub instance: u32,
    pub inner: Option<ConsensusNode>,
    pub inner_start: u64,
    pub done: DoneState,
    pub bad: BTreeSet<NodeId>,
    pub last_decision: Option<Value>,
    pub pending: Vec<Envelope>,
    pub start_next_at: Option<u64>,
    pub finished: bool,
}

impl SequenceNode {
    pub fn new(me: NodeId, params: SystemParams, ell: u32, delta: u64, inputs: InstanceInputs) -> Self {
        SequenceNode {
            me,
            params,
            ell,
            schedule: stretch_schedule(delta),
            inputs,
            instance: 0,
            inner: None,
            inner_start: 0,
            done: DoneState::default(),
            bad: BTreeSet::new(),
            last_decision: None,
            pending: Vec::new(),
            start_next_at: Some(0),
            finished: false,
        }
    }

    fn start_instance(&mut self, local_tick: u64) {
        self.instance += 1;
        let input = self
            .inputs
            .input(self.instance, self.me, self.last_decision.as_ref());
        self.inner = Some(bc_node(
            self.me,
            input,
            self.params,
            self.instance,
            self.schedule,
            self.bad.clone(),
            ConsensusVariant::Correct,
        ));
        self.inner_start = local_tick;
        self.done = DoneState::default();
        self.start_next_at = None;
    }
}

impl HonestNode for SequenceNode {
    fn id(&self) -> NodeId {
        self.me
    }

    fn step(&mut self, local_tick: u64, mut inbox: Vec<Envelope>) -> StepOutput {
        let mut out = StepOutput::default();
        if self.finished {
            return out;
        }
        if self.start_next_at == Some(local_tick) {
            self.start_instance(local_tick);
            let mut all = std::mem::take(&mut self.pending);
            all.append(&mut inbox);
            inbox = all;
        }
        let cur = self.instance;
        let mut gradecast_inbox = Vec::new();
        let mut done_inbox = Vec::new();
        let running = self.start_next_at.is_none();
        for env in inbox {
            if running && env.instance == cur {
                if env.phase == Phase::Done {
                    done_inbox.push(env);
                } else {
                    gradecast_inbox.push(env);
                }
            } else if env.instance == cur + 1 {
                self.pending.push(env);
            } else if env.instance > cur + 1 {
                out.events.push(NodeEvent::Warning {
                    message: format!("envelope for a future instance: {env:?}"),
                });
            }
        }
        if !running {
            return out;
        }
        let inner = self.inner.as_mut().expect("instance running");
        if !inner.terminated() {
            let inner_out = inner.step(local_tick - self.inner_start, gradecast_inbox);
            out.outbox.extend(inner_out.outbox);
            out.events.extend(inner_out.events);
        }
        let wants = inner.terminated();
        let ds = done_step(&mut self.done, &done_inbox, wants, self.me, cur, &self.params);
        out.outbox.extend(ds.outbox);
        if let Some(relay) = ds.sent {
            out.events.push(NodeEvent::DoneSent { instance: cur, relay });
        }
        if ds.halt {
            let value = inner.value().clone();
            self.bad = inner.body.bad.clone();
            self.last_decision = Some(value.clone());
            out.events.push(NodeEvent::Halted {
                instance: cur,
                value,
                done_senders: self.done.done_senders.clone(),
            });
            if cur >= self.ell {
                self.finished = true;
            } else {
                self.start_next_at = Some(local_tick + 1);
            }
        }
        out
    }

    fn terminated(&self) -> bool {
        self.finished
    }

    fn snapshot(&self) -> NodeSnapshot {
        let mut s = match &self.inner {
            Some(inner) => inner.snapshot(),
            None => NodeSnapshot {
                node: self.me,
                ..Default::default()
            },
        };
        if self.start_next_at.is_some() || self.finished {
            s.bad = self.bad.clone();
        }
        s.terminated = self.finished;
        s
    }
}

/// Outcome of a whole sequence.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SequenceOutcome {
    pub traces: Vec<Trace>,
    pub records: Vec<InstanceRecord>,
    /// Per instance, the largest iteration count among honest nodes.
    pub iterations_per_instance: Vec<u32>,
    pub total_iterations: u32,
    pub total_rounds: u64,
    pub total_ticks: u64,
}

/// Runs `config.ell` instances with all honest nodes starting each one at
/// the same tick. BAD sets carry over between instances.
pub fn mc_run_synchronized(
    params: SystemParams,
    corrupted: &BTreeSet<NodeId>,
    config: &SequenceConfig,
    adversary: &mut dyn Adversary,
    max_ticks: u64,
    record_deliveries: bool,
) -> Result<SequenceOutcome, SimError> {
    if config.offsets.values().any(|&o| o != 0) || config.delta != 0 {
        return Err(SimError::Config("synchronized sequences need delta = 0 and zero offsets".into()));
    }
    let honest: Vec<NodeId> = params.nodes().filter(|p| !corrupted.contains(p)).collect();
    let mut bad: BTreeMap<NodeId, BTreeSet<NodeId>> = honest.iter().map(|&p| (p, BTreeSet::new())).collect();
    let mut prev: BTreeMap<NodeId, Value> = BTreeMap::new();
    let mut first_tick = 0;
    let mut traces = Vec::new();
    let mut records = Vec::new();
    let mut per_instance = Vec::new();
    for k in 1..=config.ell {
        let mut cfg = SimConfig::new(params, corrupted.clone());
        cfg.first_tick = first_tick;
        cfg.max_ticks = max_ticks;
        cfg.record_deliveries = record_deliveries;
        let trace = run_simulation(
            &cfg,
            |p| {
                let input = config.inputs.input(k, p, prev.get(&p));
                bc_node(p, input, params, k, Schedule::stretched(0), bad[&p].clone(), ConsensusVariant::Correct)
            },
            adversary,
        )?;
        let term = trace.termination_ticks();
        let mut max_iter = 0;
        for (p, value, iterations, tick) in trace
            .decisions()
            .into_iter()
            .map(|(p, _, v, it, tick)| (p, v, it, tick))
        {
            max_iter = max_iter.max(iterations);
            prev.insert(p, value.clone());
            records.push(InstanceRecord {
                instance: k,
                node: p,
                decision: value,
                start_tick: first_tick,
                halt_tick: term.get(&p).copied().unwrap_or(tick),
                iterations,
            });
        }
        if let Some(last) = trace.ticks.last() {
            for s in &last.snapshots {
                bad.insert(s.node, s.bad.clone());
            }
        }
        per_instance.push(max_iter);
        first_tick = trace.last_tick().unwrap_or(first_tick) + 1;
        traces.push(trace);
    }
    let total_iterations = per_instance.iter().sum::<u32>();
    Ok(SequenceOutcome {
        traces,
        records,
        total_iterations,
        total_rounds: 3 * total_iterations as u64,
        total_ticks: first_tick,
        iterations_per_instance: per_instance,
    })
}

/// Runs `config.ell` instances in one simulation, nodes starting at their
/// offsets and moving on one tick after halting an instance.
pub fn mc_run_unsynchronized(
    params: SystemParams,
    corrupted: &BTreeSet<NodeId>,
    config: &SequenceConfig,
    adversary: &mut dyn Adversary,
    max_ticks: u64,
    record_deliveries: bool,
) -> Result<SequenceOutcome, SimError> {
    if config.delta == 0 {
        return Err(SimError::Config("unsynchronized sequences need delta >= 1".into()));
    }
    let spread = config.offsets.values().max().copied().unwrap_or(0)
        - config.offsets.values().min().copied().unwrap_or(0);
    if spread > config.delta {
        return Err(SimError::Config(format!(
            "offset spread {spread} exceeds delta {}",
            config.delta
        )));
    }
    let mut cfg = SimConfig::new(params, corrupted.clone());
    cfg.start_offsets = config.offsets.clone();
    cfg.max_ticks = max_ticks;
    cfg.record_deliveries = record_deliveries;
    let trace = run_simulation(
        &cfg,
        |p| SequenceNode::new(p, params, config.ell, config.delta, config.inputs.clone()),
        adversary,
    )?;

    let mut starts: BTreeMap<(NodeId, u32), u64> = BTreeMap::new();
    let mut iterations: BTreeMap<(NodeId, u32), u32> = BTreeMap::new();
    let mut records = Vec::new();
    for e in &trace.events {
        match &e.event {
            NodeEvent::InstanceStarted { instance, .. } => {
                starts.insert((e.node, *instance), e.tick);
            }
            NodeEvent::IterationEnd { instance, iteration, .. } => {
                let it = iterations.entry((e.node, *instance)).or_insert(0);
                *it = (*it).max(*iteration);
            }
            NodeEvent::Halted { instance, value, .. } => records.push(InstanceRecord {
                instance: *instance,
                node: e.node,
                decision: value.clone(),
                start_tick: starts.get(&(e.node, *instance)).copied().unwrap_or(0),
                halt_tick: e.tick,
                iterations: iterations.get(&(e.node, *instance)).copied().unwrap_or(0),
            }),
            _ => {}
        }
    }
    let mut per_instance = vec![0u32; config.ell as usize];
    for r in &records {
        let slot = &mut per_instance[r.instance as usize - 1];
        *slot = (*slot).max(r.iterations);
    }
    let total_iterations = per_instance.iter().sum::<u32>();
    let total_ticks = trace.last_tick().map(|t| t + 1).unwrap_or(0);
    Ok(SequenceOutcome {
        traces: vec![trace],
        records,
        total_iterations,
        total_rounds: 3 * total_iterations as u64,
        total_ticks,
        iterations_per_instance: per_instance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn done(sender: usize) -> Envelope {
        Envelope::done(1, NodeId(sender), NodeId(0))
    }

    #[test]
    fn done_on_wanting_to_terminate() {
        let p = SystemParams::new(7, 2, 0).unwrap();
        let mut s = DoneState::default();
        let step = done_step(&mut s, &[], true, NodeId(0), 1, &p);
        assert_eq!(step.outbox.len(), 7);
        assert_eq!(step.sent, Some(false));
        assert!(!step.halt);
        let again = done_step(&mut s, &[], true, NodeId(0), 1, &p);
        assert!(again.outbox.is_empty());
    }

    #[test]
    fn relay_after_t_plus_one() {
        let p = SystemParams::new(7, 2, 0).unwrap();
        let mut s = DoneState::default();
        let step = done_step(&mut s, &[done(1), done(2)], false, NodeId(0), 1, &p);
        assert!(step.outbox.is_empty());
        let step = done_step(&mut s, &[done(3), done(3)], false, NodeId(0), 1, &p);
        assert_eq!(step.sent, Some(true));
        assert_eq!(step.outbox.len(), 7);
        assert!(!step.halt);
    }

    #[test]
    fn halt_after_two_t_plus_one() {
        let p = SystemParams::new(7, 2, 0).unwrap();
        let mut s = DoneState::default();
        let inbox: Vec<_> = (1..=5).map(done).collect();
        let step = done_step(&mut s, &inbox, false, NodeId(0), 1, &p);
        assert!(step.halt);
        assert!(s.halted);
    }

    #[test]
    fn done_for_other_instances_is_ignored() {
        let p = SystemParams::new(4, 1, 0).unwrap();
        let mut s = DoneState::default();
        let other = Envelope::done(2, NodeId(1), NodeId(0));
        done_step(&mut s, &[other], false, NodeId(0), 1, &p);
        assert!(s.done_senders.is_empty());
    }
}
