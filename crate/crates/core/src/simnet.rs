//! Lockstep synchronous simulator over a complete graph.
//!
//! Every envelope emitted at tick `i` is delivered at tick `i + 1`. At each
//! tick the honest nodes step first; the adversary then sees everything the
//! honest nodes just emitted (rushing) together with the full history and
//! picks the messages of the corrupted nodes.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{rational_to_f64, NodeId, SystemParams, Value};

/// Protocol round of a gradecast message, or the unstretched `done`
/// message of the sequencing layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    #[serde(rename = "1")]
    Send,
    #[serde(rename = "2")]
    Echo,
    #[serde(rename = "3")]
    Support,
    #[serde(rename = "done")]
    Done,
}

impl Phase {
    pub fn number(self) -> Option<u8> {
        match self {
            Phase::Send => Some(1),
            Phase::Echo => Some(2),
            Phase::Support => Some(3),
            Phase::Done => None,
        }
    }

    pub fn from_number(k: u8) -> Option<Phase> {
        match k {
            1 => Some(Phase::Send),
            2 => Some(Phase::Echo),
            3 => Some(Phase::Support),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Envelope {
    pub instance: u32,
    pub iteration: u32,
    pub leader: NodeId,
    pub phase: Phase,
    pub sender: NodeId,
    pub recipient: NodeId,
    pub payload: Option<Value>,
}

impl Envelope {
    pub fn gradecast(
        instance: u32,
        iteration: u32,
        leader: NodeId,
        phase: Phase,
        sender: NodeId,
        recipient: NodeId,
        payload: Value,
    ) -> Self {
        Envelope {
            instance,
            iteration,
            leader,
            phase,
            sender,
            recipient,
            payload: Some(payload),
        }
    }

    pub fn done(instance: u32, sender: NodeId, recipient: NodeId) -> Self {
        Envelope {
            instance,
            iteration: 0,
            leader: sender,
            phase: Phase::Done,
            sender,
            recipient,
            payload: None,
        }
    }
}

/// Protocol-level occurrences reported by honest nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NodeEvent {
    InstanceStarted {
        instance: u32,
        input: Value,
    },
    IterationEnd {
        instance: u32,
        iteration: u32,
        /// Value gradecast in this iteration.
        start_value: Value,
        /// Value held after the iteration.
        value: Value,
        bad_start: BTreeSet<NodeId>,
        bad: BTreeSet<NodeId>,
        broke: bool,
        /// True for the participation-only iteration after a break.
        extra: bool,
        outcomes: Vec<OutcomeRecord>,
    },
    Decided {
        instance: u32,
        value: Value,
        iterations: u32,
    },
    Terminated {
        instance: u32,
        iterations: u32,
    },
    DoneSent {
        instance: u32,
        relay: bool,
    },
    Halted {
        instance: u32,
        value: Value,
        done_senders: BTreeSet<NodeId>,
    },
    Graded {
        leader: NodeId,
        value: Value,
        confidence: u8,
    },
    Warning {
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub leader: NodeId,
    pub value: Value,
    pub confidence: u8,
}

/// Externally visible state of one honest node after a tick.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct NodeSnapshot {
    pub node: NodeId,
    pub started: bool,
    pub terminated: bool,
    pub instance: u32,
    pub iteration: u32,
    pub value: Option<Value>,
    pub bad: BTreeSet<NodeId>,
    pub broke_at: Option<u32>,
    pub decided: Option<Value>,
    pub extra: bool,
}

#[derive(Debug, Default)]
pub struct StepOutput {
    pub outbox: Vec<Envelope>,
    pub events: Vec<NodeEvent>,
}

/// An honest per-node protocol state machine.
pub trait HonestNode {
    fn id(&self) -> NodeId;
    /// Consumes the envelopes delivered at this tick and returns the
    /// envelopes to emit. `local_tick` counts from the node's start.
    fn step(&mut self, local_tick: u64, inbox: Vec<Envelope>) -> StepOutput;
    fn terminated(&self) -> bool;
    fn snapshot(&self) -> NodeSnapshot;
}

/// What the adversary gets to see before choosing its messages.
pub struct AdversaryView<'a> {
    pub tick: u64,
    pub params: SystemParams,
    pub corrupted: &'a BTreeSet<NodeId>,
    pub honest_outbox: &'a [Envelope],
    pub corrupted_inbox: &'a [Envelope],
    pub snapshots: &'a [NodeSnapshot],
    pub history: &'a Trace,
}

impl AdversaryView<'_> {
    pub fn honest(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.params.nodes().filter(|p| !self.corrupted.contains(p))
    }
}

pub trait Adversary {
    fn name(&self) -> String;
    fn seed(&self) -> Option<u64> {
        None
    }
    fn act(&mut self, view: &AdversaryView<'_>) -> Vec<Envelope>;
}

/// Corrupted nodes that never send anything.
#[derive(Debug, Default, Clone)]
pub struct SilentAdversary;

impl Adversary for SilentAdversary {
    fn name(&self) -> String {
        "silent".into()
    }

    fn act(&mut self, _view: &AdversaryView<'_>) -> Vec<Envelope> {
        Vec::new()
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub params: SystemParams,
    pub corrupted: BTreeSet<NodeId>,
    pub start_offsets: BTreeMap<NodeId, u64>,
    pub max_ticks: u64,
    pub record_deliveries: bool,
    /// Global tick number of the first simulated tick.
    pub first_tick: u64,
}

impl SimConfig {
    pub fn new(params: SystemParams, corrupted: BTreeSet<NodeId>) -> Self {
        SimConfig {
            params,
            corrupted,
            start_offsets: BTreeMap::new(),
            max_ticks: 10_000,
            record_deliveries: false,
            first_tick: 0,
        }
    }

    pub fn offset(&self, p: NodeId) -> u64 {
        self.start_offsets.get(&p).copied().unwrap_or(0)
    }

    pub fn honest(&self) -> Vec<NodeId> {
        self.params
            .nodes()
            .filter(|p| !self.corrupted.contains(p))
            .collect()
    }

    fn validate(&self) -> Result<(), SimError> {
        if self.max_ticks == 0 {
            return Err(SimError::Config("max_ticks must be positive".into()));
        }
        if self.corrupted.len() != self.params.f {
            return Err(SimError::Config(format!(
                "{} corrupted nodes listed but f = {}",
                self.corrupted.len(),
                self.params.f
            )));
        }
        if let Some(p) = self.corrupted.iter().find(|p| p.0 >= self.params.n) {
            return Err(SimError::Config(format!("corrupted node {p} out of range")));
        }
        if let Some(p) = self.start_offsets.keys().find(|p| p.0 >= self.params.n) {
            return Err(SimError::Config(format!("offset for unknown node {p}")));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("max-ticks-exceeded: {pending} honest node(s) still running after {ticks} ticks")]
    MaxTicksExceeded {
        ticks: u64,
        pending: usize,
        trace: Box<Trace>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: u64,
    /// Envelopes delivered at this tick (only when recording is enabled).
    pub delivered: Vec<Envelope>,
    pub snapshots: Vec<NodeSnapshot>,
    pub honest_sent: u64,
    pub adversary_sent: u64,
    pub cumulative_honest: u64,
    pub cumulative_adversary: u64,
    pub terminated: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub tick: u64,
    pub node: NodeId,
    pub event: NodeEvent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimWarning {
    pub tick: u64,
    pub node: Option<NodeId>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationMessages {
    pub instance: u32,
    pub iteration: u32,
    pub honest: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub params: SystemParams,
    pub corrupted: BTreeSet<NodeId>,
    pub offsets: BTreeMap<NodeId, u64>,
    pub adversary: String,
    pub seed: Option<u64>,
    pub first_tick: u64,
    pub ticks: Vec<TickRecord>,
    pub events: Vec<TraceEvent>,
    pub iteration_messages: Vec<IterationMessages>,
    pub warnings: Vec<SimWarning>,
    pub completed: bool,
}

impl Trace {
    fn empty(config: &SimConfig, adversary: &dyn Adversary) -> Self {
        Trace {
            params: config.params,
            corrupted: config.corrupted.clone(),
            offsets: config.start_offsets.clone(),
            adversary: adversary.name(),
            seed: adversary.seed(),
            first_tick: config.first_tick,
            ticks: Vec::new(),
            events: Vec::new(),
            iteration_messages: Vec::new(),
            warnings: Vec::new(),
            completed: false,
        }
    }

    pub fn honest(&self) -> Vec<NodeId> {
        self.params
            .nodes()
            .filter(|p| !self.corrupted.contains(p))
            .collect()
    }

    /// Honest envelopes emitted during ticks in `range` (global tick numbers).
    pub fn messages_sent(&self, range: Range<u64>) -> u64 {
        self.ticks
            .iter()
            .filter(|r| range.contains(&r.tick))
            .map(|r| r.honest_sent)
            .sum()
    }

    pub fn adversary_messages(&self, range: Range<u64>) -> u64 {
        self.ticks
            .iter()
            .filter(|r| range.contains(&r.tick))
            .map(|r| r.adversary_sent)
            .sum()
    }

    pub fn total_honest_messages(&self) -> u64 {
        self.ticks.last().map(|r| r.cumulative_honest).unwrap_or(0)
    }

    pub fn last_tick(&self) -> Option<u64> {
        self.ticks.last().map(|r| r.tick)
    }

    pub fn events_of(&self, node: NodeId) -> impl Iterator<Item = (u64, &NodeEvent)> {
        self.events
            .iter()
            .filter(move |e| e.node == node)
            .map(|e| (e.tick, &e.event))
    }

    /// `(node, instance, value, iterations, tick)` for every decision.
    pub fn decisions(&self) -> Vec<(NodeId, u32, Value, u32, u64)> {
        self.events
            .iter()
            .filter_map(|e| match &e.event {
                NodeEvent::Decided {
                    instance,
                    value,
                    iterations,
                } => Some((e.node, *instance, value.clone(), *iterations, e.tick)),
                _ => None,
            })
            .collect()
    }

    /// Global tick at which each honest node terminated.
    pub fn termination_ticks(&self) -> BTreeMap<NodeId, u64> {
        let mut out = BTreeMap::new();
        for rec in &self.ticks {
            for s in &rec.snapshots {
                if s.terminated {
                    out.entry(s.node).or_insert(rec.tick);
                }
            }
        }
        out
    }

    /// Termination tick relative to the node's own start.
    pub fn local_termination_ticks(&self) -> BTreeMap<NodeId, u64> {
        self.termination_ticks()
            .into_iter()
            .map(|(p, t)| {
                let start = self.first_tick + self.offsets.get(&p).copied().unwrap_or(0);
                (p, t - start)
            })
            .collect()
    }

    /// Every BAD set ever reported by an honest node.
    pub fn bad_history(&self) -> impl Iterator<Item = (NodeId, &BTreeSet<NodeId>)> {
        self.ticks
            .iter()
            .flat_map(|r| r.snapshots.iter().map(|s| (s.node, &s.bad)))
    }

    pub fn warning_count(&self) -> usize {
        self.warnings.len()
            + self
                .events
                .iter()
                .filter(|e| matches!(e.event, NodeEvent::Warning { .. }))
                .count()
    }

    /// One CSV row per tick.
    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "tick",
            "honest_msgs",
            "adv_msgs",
            "terminated_count",
            "min_v",
            "max_v",
            "min_v_decimal",
            "max_v_decimal",
        ])?;
        for r in &self.ticks {
            let values: Vec<&Value> = r.snapshots.iter().filter_map(|s| s.value.as_ref()).collect();
            let min = values.iter().min().map(|v| (*v).clone());
            let max = values.iter().max().map(|v| (*v).clone());
            let text = |v: &Option<Value>| v.as_ref().map(|v| v.to_string()).unwrap_or_default();
            let dec = |v: &Option<Value>| {
                v.as_ref()
                    .and_then(|v| match v {
                        Value::Rational(q) => Some(format!("{:.9}", rational_to_f64(q))),
                        other => other.approx_f64().map(|f| format!("{f}")),
                    })
                    .unwrap_or_default()
            };
            w.write_record([
                r.tick.to_string(),
                r.honest_sent.to_string(),
                r.adversary_sent.to_string(),
                r.terminated.to_string(),
                text(&min),
                text(&max),
                dec(&min),
                dec(&max),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Runs honest nodes built by `factory` against `adversary` until every
/// honest node has terminated.
pub fn run_simulation<N, F>(
    config: &SimConfig,
    mut factory: F,
    adversary: &mut dyn Adversary,
) -> Result<Trace, SimError>
where
    N: HonestNode,
    F: FnMut(NodeId) -> N,
{
    config.validate()?;
    let params = config.params;
    let honest_ids = config.honest();
    let mut nodes: Vec<N> = honest_ids.iter().map(|&p| factory(p)).collect();
    for (node, &p) in nodes.iter().zip(&honest_ids) {
        assert_eq!(node.id(), p, "factory built a node with the wrong id");
    }
    let slot: BTreeMap<NodeId, usize> = honest_ids.iter().enumerate().map(|(i, &p)| (p, i)).collect();

    let mut trace = Trace::empty(config, adversary);
    let mut inflight: Vec<Envelope> = Vec::new();
    let mut queued: Vec<Vec<Envelope>> = vec![Vec::new(); nodes.len()];
    let mut cumulative_honest = 0u64;
    let mut cumulative_adversary = 0u64;
    let mut per_iteration: BTreeMap<(u32, u32), u64> = BTreeMap::new();

    for tick in config.first_tick..config.first_tick + config.max_ticks {
        let mut inboxes: Vec<Vec<Envelope>> = vec![Vec::new(); nodes.len()];
        let mut corrupted_inbox = Vec::new();
        let delivered = if config.record_deliveries {
            inflight.clone()
        } else {
            Vec::new()
        };
        for env in inflight.drain(..) {
            match slot.get(&env.recipient) {
                Some(&i) => inboxes[i].push(env),
                None => corrupted_inbox.push(env),
            }
        }

        let mut honest_out: Vec<Envelope> = Vec::new();
        for (i, node) in nodes.iter_mut().enumerate() {
            let p = honest_ids[i];
            let start = config.first_tick + config.offset(p);
            let inbox = std::mem::take(&mut inboxes[i]);
            if tick < start {
                queued[i].extend(inbox);
                continue;
            }
            if node.terminated() {
                continue;
            }
            let mut full = std::mem::take(&mut queued[i]);
            full.extend(inbox);
            let out = node.step(tick - start, full);
            for event in out.events {
                trace.events.push(TraceEvent { tick, node: p, event });
            }
            for env in out.outbox {
                if env.sender != p || env.recipient.0 >= params.n {
                    trace.warnings.push(SimWarning {
                        tick,
                        node: Some(p),
                        message: format!("honest node emitted malformed envelope {env:?}"),
                    });
                    continue;
                }
                honest_out.push(env);
            }
        }

        let snapshots: Vec<NodeSnapshot> = nodes
            .iter()
            .enumerate()
            .map(|(i, node)| {
                let mut s = node.snapshot();
                s.started = tick >= config.first_tick + config.offset(honest_ids[i]);
                s
            })
            .collect();

        let adversary_raw = {
            let view = AdversaryView {
                tick,
                params,
                corrupted: &config.corrupted,
                honest_outbox: &honest_out,
                corrupted_inbox: &corrupted_inbox,
                snapshots: &snapshots,
                history: &trace,
            };
            adversary.act(&view)
        };
        let mut adversary_out = Vec::with_capacity(adversary_raw.len());
        for env in adversary_raw {
            let reason = if !config.corrupted.contains(&env.sender) {
                Some("spoofed sender")
            } else if env.recipient.0 >= params.n {
                Some("unknown recipient")
            } else if env.phase == Phase::Done && env.payload.is_some() {
                Some("done message with payload")
            } else {
                None
            };
            match reason {
                Some(why) => trace.warnings.push(SimWarning {
                    tick,
                    node: Some(env.sender),
                    message: format!("rejected adversary envelope ({why}): {env:?}"),
                }),
                None => adversary_out.push(env),
            }
        }

        for env in &honest_out {
            if env.phase != Phase::Done {
                *per_iteration.entry((env.instance, env.iteration)).or_insert(0) += 1;
            }
        }
        let honest_sent = honest_out.len() as u64;
        let adversary_sent = adversary_out.len() as u64;
        cumulative_honest += honest_sent;
        cumulative_adversary += adversary_sent;
        let terminated = nodes.iter().filter(|n| n.terminated()).count();
        trace.ticks.push(TickRecord {
            tick,
            delivered,
            snapshots,
            honest_sent,
            adversary_sent,
            cumulative_honest,
            cumulative_adversary,
            terminated,
        });

        inflight = honest_out;
        inflight.extend(adversary_out);

        if terminated == nodes.len() {
            trace.completed = true;
            break;
        }
    }

    trace.iteration_messages = per_iteration
        .into_iter()
        .map(|((instance, iteration), honest)| IterationMessages {
            instance,
            iteration,
            honest,
        })
        .collect();

    if trace.completed {
        Ok(trace)
    } else {
        let pending = nodes.iter().filter(|n| !n.terminated()).count();
        Err(SimError::MaxTicksExceeded {
            ticks: config.max_ticks,
            pending,
            trace: Box::new(trace),
        })
    }
}

/// Feeds the recorded deliveries of `trace` through fresh nodes and checks
/// that every snapshot is reproduced. Requires a trace recorded with
/// `record_deliveries`.
pub fn replay<N, F>(trace: &Trace, mut factory: F) -> Result<(), String>
where
    N: HonestNode,
    F: FnMut(NodeId) -> N,
{
    let honest = trace.honest();
    let mut nodes: Vec<N> = honest.iter().map(|&p| factory(p)).collect();
    let mut queued: Vec<Vec<Envelope>> = vec![Vec::new(); nodes.len()];
    for rec in &trace.ticks {
        for (i, node) in nodes.iter_mut().enumerate() {
            let p = honest[i];
            let start = trace.first_tick + trace.offsets.get(&p).copied().unwrap_or(0);
            let inbox: Vec<Envelope> = rec
                .delivered
                .iter()
                .filter(|e| e.recipient == p)
                .cloned()
                .collect();
            if rec.tick < start {
                queued[i].extend(inbox);
                continue;
            }
            if node.terminated() {
                continue;
            }
            let mut full = std::mem::take(&mut queued[i]);
            full.extend(inbox);
            node.step(rec.tick - start, full);
        }
        for (i, node) in nodes.iter().enumerate() {
            let mut s = node.snapshot();
            s.started = rec.tick >= trace.first_tick + trace.offsets.get(&honest[i]).copied().unwrap_or(0);
            if s != rec.snapshots[i] {
                return Err(format!(
                    "tick {}: node {} diverged on replay: {:?} vs recorded {:?}",
                    rec.tick, honest[i], s, rec.snapshots[i]
                ));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Sends one envelope to every node at tick 0 and terminates once it has
    /// heard from everyone.
    struct Ping {
        me: NodeId,
        n: usize,
        heard: BTreeSet<NodeId>,
        log: Vec<(u64, Envelope)>,
    }

    impl HonestNode for Ping {
        fn id(&self) -> NodeId {
            self.me
        }

        fn step(&mut self, local_tick: u64, inbox: Vec<Envelope>) -> StepOutput {
            for e in inbox {
                self.heard.insert(e.sender);
                self.log.push((local_tick, e));
            }
            let mut out = StepOutput::default();
            if local_tick == 0 {
                for q in 0..self.n {
                    out.outbox.push(Envelope::gradecast(
                        1,
                        1,
                        self.me,
                        Phase::Send,
                        self.me,
                        NodeId(q),
                        Value::Discrete(self.me.0 as i64),
                    ));
                }
            }
            out
        }

        fn terminated(&self) -> bool {
            self.log.iter().filter(|(_, e)| e.phase == Phase::Send).count() >= self.n - 1
        }

        fn snapshot(&self) -> NodeSnapshot {
            NodeSnapshot {
                node: self.me,
                terminated: self.terminated(),
                ..Default::default()
            }
        }
    }

    struct Spoofer;

    impl Adversary for Spoofer {
        fn name(&self) -> String {
            "spoofer".into()
        }

        fn act(&mut self, view: &AdversaryView<'_>) -> Vec<Envelope> {
            if view.tick > 0 {
                return Vec::new();
            }
            vec![
                Envelope::gradecast(1, 1, NodeId(0), Phase::Send, NodeId(0), NodeId(1), Value::Discrete(9)),
                Envelope::gradecast(1, 1, NodeId(3), Phase::Send, NodeId(3), NodeId(1), Value::Discrete(3)),
            ]
        }
    }

    fn ping(me: NodeId) -> Ping {
        Ping {
            me,
            n: 4,
            heard: BTreeSet::new(),
            log: Vec::new(),
        }
    }

    #[test]
    fn delivery_is_exactly_one_tick_later() {
        let params = SystemParams::new(4, 1, 0).unwrap();
        let mut cfg = SimConfig::new(params, BTreeSet::new());
        cfg.record_deliveries = true;
        let trace = run_simulation(&cfg, ping, &mut SilentAdversary).unwrap();
        assert!(trace.completed);
        assert_eq!(trace.ticks[0].honest_sent, 16);
        assert_eq!(trace.ticks[1].delivered.len(), 16);
        assert!(trace.ticks[0].delivered.is_empty());
        assert_eq!(trace.messages_sent(0..0), 0);
        assert_eq!(trace.messages_sent(0..2), 16);
    }

    #[test]
    fn spoofed_envelopes_are_rejected() {
        let params = SystemParams::new(4, 1, 1).unwrap();
        let cfg = SimConfig::new(params, [NodeId(3)].into());
        let trace = run_simulation(
            &cfg,
            |p| Ping { n: 3, ..ping(p) },
            &mut Spoofer,
        )
        .unwrap();
        assert_eq!(trace.ticks[0].adversary_sent, 1);
        assert_eq!(trace.warnings.len(), 1);
        assert!(trace.warnings[0].message.contains("spoofed"));
    }

    #[test]
    fn late_starters_receive_queued_messages() {
        let params = SystemParams::new(4, 1, 0).unwrap();
        let mut cfg = SimConfig::new(params, BTreeSet::new());
        cfg.start_offsets.insert(NodeId(2), 3);
        let trace = run_simulation(&cfg, ping, &mut SilentAdversary).unwrap();
        assert!(trace.completed);
        let term = trace.termination_ticks();
        assert_eq!(term[&NodeId(2)], 3);
    }

    #[test]
    fn max_ticks_is_reported() {
        let params = SystemParams::new(4, 1, 0).unwrap();
        let mut cfg = SimConfig::new(params, BTreeSet::new());
        cfg.max_ticks = 1;
        let err = run_simulation(&cfg, ping, &mut SilentAdversary).unwrap_err();
        assert!(matches!(err, SimError::MaxTicksExceeded { pending: 4, .. }));
    }
}
