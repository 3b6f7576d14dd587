//! Brute-force checkers for tiny systems.
//!
//! `oracle_exhaustive` explores every execution of the consensus protocol
//! with one corrupted node drawing its messages from a bounded alphabet:
//! for its own gradecast it picks, per recipient and per phase, a domain
//! value or silence; in the gradecasts of honest leaders it follows one
//! policy per iteration (mimic the honest messages, stay silent, or send
//! the contrary value). Every input assignment is enumerated. States are
//! deduplicated per tick, so the search is a depth-first walk over the
//! distinct reachable worlds.
//!
//! `gradecast_exhaustive` does the same for a single gradecast with a
//! corrupted leader or a corrupted echoer and checks the four gradecast
//! properties on every run.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::hash::{BuildHasher, Hash, Hasher};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consensus::{bc_node, ConsensusNode, ConsensusVariant};
use crate::driver::Schedule;
use crate::gradecast::GradecastState;
use crate::model::{Confidence, NodeId, SystemParams, Value, ValueKind};
use crate::simnet::{Envelope, HonestNode, Phase};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("state space too large: more than {limit} distinct states")]
    StateSpaceTooLarge { limit: u64 },
    #[error("invalid oracle parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub property: String,
    pub inputs: Vec<i64>,
    pub corrupted: Option<usize>,
    /// Number of terminal worlds showing this violation.
    pub count: u64,
    pub example: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleVerdict {
    pub n: usize,
    pub t: usize,
    pub domain: u32,
    pub variant: ConsensusVariant,
    pub runs: usize,
    pub states: u64,
    pub terminals: u64,
    pub violations: Vec<Violation>,
}

impl OracleVerdict {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct OracleOptions {
    pub variant: ConsensusVariant,
    /// Upper bound on distinct states per run before giving up.
    pub max_states: u64,
    /// Also explore executions without any corrupted node.
    pub include_fault_free: bool,
    /// Stop at the first violation found.
    pub stop_at_first: bool,
    /// Restrict the corrupted runs to these honest input assignments.
    pub only_inputs: Option<Vec<Vec<i64>>>,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            variant: ConsensusVariant::Correct,
            max_states: 20_000_000,
            include_fault_free: true,
            stop_at_first: false,
            only_inputs: None,
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct World {
    nodes: Vec<ConsensusNode>,
    inflight: Vec<Envelope>,
    /// Policy toward honest leaders for the current iteration.
    policy: u8,
}

const POLICIES: u8 = 3;

/// Fingerprint of a world; the node part is hashed separately so children
/// sharing the same node states can be fingerprinted without cloning them.
fn node_fingerprint(nodes: &[ConsensusNode]) -> (u64, u64) {
    
    
    
    
    (FIXED_A.hash_one(nodes), FIXED_B.hash_one((0x9e37_79b9u32, nodes)))
}

/// A world is fully determined by the node states, the honest envelopes
/// in flight and the corrupted node's envelopes in flight.
fn base_fingerprint(nodes: &[ConsensusNode], honest_inflight: &[Envelope]) -> (u64, u64) {
    
    
    
    
    (FIXED_A.hash_one((node_fingerprint(nodes), honest_inflight)), FIXED_B.hash_one((honest_inflight, node_fingerprint(nodes))))
}

fn fingerprint(base: (u64, u64), adversary: &[Envelope], policy: u8, tick: u64) -> (u64, u64) {
    
    
    
    
    (FIXED_A.hash_one((tick, base, adversary, policy)), FIXED_B.hash_one((adversary, policy, base, tick)))
}

#[derive(Clone, Copy)]
struct FixedState(u64);

impl BuildHasher for FixedState {
    type Hasher = std::collections::hash_map::DefaultHasher;
    fn build_hasher(&self) -> Self::Hasher {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        h.write_u64(self.0);
        h
    }
}

const FIXED_A: FixedState = FixedState(0x51_7cc1_b727_220a);
const FIXED_B: FixedState = FixedState(0x2545_f491_4f6c_dd1d);

struct Explorer {
    params: SystemParams,
    domain: u32,
    corrupt: Option<NodeId>,
    honest: Vec<NodeId>,
    inputs: Vec<i64>,
    seen: HashSet<(u64, u64)>,
    max_states: u64,
    terminals: u64,
    deadline: u64,
    stop_at_first: bool,
    found: BTreeMap<String, (u64, String)>,
}

impl Explorer {
    fn record(&mut self, property: &str, example: String) {
        let slot = self.found.entry(property.to_string()).or_insert((0, example));
        slot.0 += 1;
    }

    fn check_terminal(&mut self, nodes: &[ConsensusNode], tick: u64) {
        self.terminals += 1;
        let decisions: Vec<Option<&Value>> = nodes.iter().map(|n| n.decided.as_ref()).collect();
        let honest: BTreeSet<NodeId> = self.honest.iter().copied().collect();
        let describe = || {
            nodes
                .iter()
                .map(|n| {
                    format!(
                        "{}: decided {} after {} iterations, BAD {:?}",
                        n.me,
                        n.decided.as_ref().map(|v| v.to_string()).unwrap_or("-".into()),
                        n.iteration,
                        n.body.bad.iter().map(|p| p.to_string()).collect::<Vec<_>>()
                    )
                })
                .collect::<Vec<_>>()
                .join("; ")
        };
        if decisions.iter().any(|d| d.is_none()) {
            self.record("decision", describe());
        }
        let distinct: BTreeSet<&Value> = decisions.iter().flatten().copied().collect();
        if distinct.len() > 1 {
            self.record("agreement", describe());
        }
        let inputs: BTreeSet<i64> = self.inputs.iter().copied().collect();
        if inputs.len() == 1 {
            let v = Value::Discrete(*inputs.iter().next().unwrap());
            if distinct.iter().any(|d| **d != v) {
                self.record("validity", describe());
            }
        }
        if nodes.iter().any(|n| n.body.bad.iter().any(|q| honest.contains(q))) {
            self.record("bad-soundness", describe());
        }
        let bound = 3 * (self.params.t as u64 + 1);
        if tick > bound {
            self.record("round-bound", format!("terminated at round {tick} > {bound}; {}", describe()));
        }
    }

    /// Messages of the corrupted node for one tick and one choice index.
    fn adversary_messages(&self, z: NodeId, tick: u64, choice: u64, policy: u8, honest_out: &[Envelope]) -> Vec<Envelope> {
        let phase = Phase::from_number((tick % 3) as u8 + 1).expect("phase in 1..=3");
        let iteration = (tick / 3) as u32 + 1;
        let mut out = Vec::new();
        let base = self.domain as u64 + 1;
        let mut c = choice;
        for &p in &self.honest {
            let pick = c % base;
            c /= base;
            if pick < self.domain as u64 {
                out.push(Envelope::gradecast(1, iteration, z, phase, z, p, Value::Discrete(pick as i64)));
            }
        }
        if phase != Phase::Send && policy != 1 {
            for &leader in &self.honest {
                let seen = honest_out
                    .iter()
                    .filter(|e| e.leader == leader && e.phase == phase)
                    .filter_map(|e| e.payload.as_ref().and_then(Value::as_discrete))
                    .min();
                let Some(v) = seen else { continue };
                let v = if policy == 0 { v } else { (v + 1) % self.domain as i64 };
                for &p in &self.honest {
                    out.push(Envelope::gradecast(1, iteration, leader, phase, z, p, Value::Discrete(v)));
                }
            }
        }
        out
    }

    /// Visits `world` at `tick`; the caller has already marked it seen.
    fn explore(&mut self, world: World, tick: u64) -> Result<(), OracleError> {
        if self.seen.len() as u64 > self.max_states {
            return Err(OracleError::StateSpaceTooLarge { limit: self.max_states });
        }
        if self.stop_at_first && !self.found.is_empty() {
            return Ok(());
        }
        let World {
            mut nodes,
            inflight,
            policy,
        } = world;
        let mut honest_out = Vec::new();
        for node in nodes.iter_mut() {
            if node.terminated() {
                continue;
            }
            let inbox: Vec<Envelope> = inflight.iter().filter(|e| e.recipient == node.me).cloned().collect();
            let step = node.step(tick, inbox);
            honest_out.extend(step.outbox);
        }
        if nodes.iter().all(|n| n.terminated()) {
            self.check_terminal(&nodes, tick);
            return Ok(());
        }
        if tick >= self.deadline {
            let summary = format!("still running at tick {tick}");
            self.record("termination", summary);
            return Ok(());
        }
        honest_out.retain(|e| self.honest.contains(&e.recipient));
        let Some(z) = self.corrupt else {
            honest_out.sort();
            self.seen.insert(fingerprint(base_fingerprint(&nodes, &honest_out), &[], policy, tick + 1));
            return self.explore(
                World {
                    nodes,
                    inflight: honest_out,
                    policy,
                },
                tick + 1,
            );
        };
        let per_recipient = (self.domain as u64 + 1).pow(self.honest.len() as u32);
        let policies: Vec<u8> = match tick % 3 {
            0 => vec![0],
            1 => (0..POLICIES).collect(),
            _ => vec![policy],
        };
        honest_out.sort();
        let base = base_fingerprint(&nodes, &honest_out);
        // Recipients drop messages from senders they ignore, so those
        // envelopes are removed up front to merge equivalent worlds.
        let ignoring: BTreeSet<NodeId> = nodes
            .iter()
            .filter(|node| node.bank.states[0].ignore.contains(&z))
            .map(|node| node.me)
            .collect();
        for &pol in &policies {
            for choice in 0..per_recipient {
                let mut adversary = self.adversary_messages(z, tick, choice, pol, &honest_out);
                adversary.retain(|e| !ignoring.contains(&e.recipient));
                adversary.sort();
                if !self.seen.insert(fingerprint(base, &adversary, pol, tick + 1)) {
                    continue;
                }
                let mut inflight = honest_out.clone();
                inflight.extend(adversary);
                self.explore(
                    World {
                        nodes: nodes.clone(),
                        inflight,
                        policy: pol,
                    },
                    tick + 1,
                )?;
            }
        }
        Ok(())
    }
}

fn assignments(count: usize, domain: u32) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..count {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..domain as i64).map(move |v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    out
}

/// Explores every execution of consensus with at most one corrupted node
/// (the highest id; the protocol does not depend on node ids) over every
/// assignment of honest inputs from `0..domain`.
pub fn oracle_exhaustive(
    params: SystemParams,
    domain: u32,
    options: &OracleOptions,
) -> Result<OracleVerdict, OracleError> {
    if domain < 1 {
        return Err(OracleError::InvalidParams("domain must be at least 1".into()));
    }
    if params.t < 1 {
        return Err(OracleError::InvalidParams("t must be at least 1".into()));
    }
    let mut corruptions: Vec<Option<NodeId>> = Vec::new();
    if options.include_fault_free {
        corruptions.push(None);
    }
    corruptions.push(Some(NodeId(params.n - 1)));

    let mut verdict = OracleVerdict {
        n: params.n,
        t: params.t,
        domain,
        variant: options.variant,
        runs: 0,
        states: 0,
        terminals: 0,
        violations: Vec::new(),
    };
    for corrupt in corruptions {
        let run_params = SystemParams::new(params.n, params.t, corrupt.is_some() as usize)
            .map_err(|e| OracleError::InvalidParams(e.to_string()))?;
        let honest: Vec<NodeId> = run_params.nodes().filter(|p| Some(*p) != corrupt).collect();
        for inputs in assignments(honest.len(), domain) {
            if let (Some(only), Some(_)) = (&options.only_inputs, corrupt) {
                if !only.contains(&inputs) {
                    continue;
                }
            }
            let nodes: Vec<ConsensusNode> = honest
                .iter()
                .zip(&inputs)
                .map(|(&p, &v)| {
                    bc_node(
                        p,
                        Value::Discrete(v),
                        run_params,
                        1,
                        Schedule::stretched(0),
                        BTreeSet::new(),
                        options.variant,
                    )
                })
                .collect();
            let mut ex = Explorer {
                params: run_params,
                domain,
                corrupt,
                honest: honest.clone(),
                inputs: inputs.clone(),
                seen: HashSet::new(),
                max_states: options.max_states,
                terminals: 0,
                deadline: 3 * (run_params.t as u64 + 2) + 3,
                stop_at_first: options.stop_at_first,
                found: BTreeMap::new(),
            };
            ex.seen.insert(fingerprint(base_fingerprint(&nodes, &[]), &[], 0, 0));
            ex.explore(
                World {
                    nodes,
                    inflight: Vec::new(),
                    policy: 0,
                },
                0,
            )?;
            verdict.runs += 1;
            verdict.states += ex.seen.len() as u64;
            verdict.terminals += ex.terminals;
            for (property, (count, example)) in ex.found {
                verdict.violations.push(Violation {
                    property,
                    inputs: inputs.clone(),
                    corrupted: corrupt.map(|p| p.0),
                    count,
                    example,
                });
            }
            if options.stop_at_first && !verdict.violations.is_empty() {
                return Ok(verdict);
            }
        }
    }
    Ok(verdict)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradecastVerdict {
    pub leader_runs: u64,
    pub echoer_runs: u64,
    pub violations: u64,
    /// The first few violations, described.
    pub examples: Vec<String>,
}

impl GradecastVerdict {
    pub fn ok(&self) -> bool {
        self.violations == 0
    }
}

struct GcRun<'a> {
    n: usize,
    t: usize,
    leader: NodeId,
    z: NodeId,
    honest: &'a [NodeId],
    ignoring: &'a BTreeSet<NodeId>,
    leader_input: Option<i64>,
}

impl GcRun<'_> {
    /// Runs one gradecast; `adv[k]` holds the corrupted node's phase-k
    /// payload per honest recipient (`None` = silent).
    fn run(&self, adv: [&[Option<i64>]; 3]) -> Vec<(NodeId, Value, Confidence)> {
        let mut states: Vec<GradecastState> = self
            .honest
            .iter()
            .map(|&p| {
                let ignore: BTreeSet<NodeId> = if self.ignoring.contains(&p) {
                    [self.z].into()
                } else {
                    BTreeSet::new()
                };
                let input = (p == self.leader).then(|| Value::Discrete(self.leader_input.unwrap_or(0)));
                GradecastState::new(1, 1, self.leader, p, self.n, self.t, ValueKind::Discrete, ignore, input)
            })
            .collect();
        for (k, phase) in [Phase::Send, Phase::Echo, Phase::Support].into_iter().enumerate() {
            let mut wire: Vec<Envelope> = states.iter_mut().flat_map(|s| s.emit(phase)).collect();
            if phase != Phase::Send || self.leader == self.z {
                for (i, &p) in self.honest.iter().enumerate() {
                    if let Some(v) = adv[k][i] {
                        wire.push(Envelope::gradecast(1, 1, self.leader, phase, self.z, p, Value::Discrete(v)));
                    }
                }
            }
            for s in states.iter_mut() {
                let me = s.me;
                for env in wire.iter().filter(|e| e.recipient == me) {
                    let _ = s.absorb(env);
                }
            }
        }
        states
            .iter_mut()
            .map(|s| {
                let o = s.grade();
                (s.me, o.value, o.confidence)
            })
            .collect()
    }
}

/// Checks the four gradecast properties on one run. Returns a description
/// of the first broken property.
fn gradecast_property_failure(
    outcomes: &[(NodeId, Value, Confidence)],
    honest_leader_value: Option<i64>,
    ignored_by_all: bool,
) -> Option<String> {
    if let Some(v) = honest_leader_value {
        if outcomes
            .iter()
            .any(|(_, val, c)| *c != Confidence::Two || *val != Value::Discrete(v))
        {
            return Some(format!("P1 broken: {outcomes:?}"));
        }
    }
    let positive: BTreeSet<&Value> = outcomes
        .iter()
        .filter(|(_, _, c)| *c > Confidence::Zero)
        .map(|(_, v, _)| v)
        .collect();
    if positive.len() > 1 {
        return Some(format!("P2 broken: {outcomes:?}"));
    }
    let levels: Vec<u8> = outcomes.iter().map(|(_, _, c)| c.level()).collect();
    let (lo, hi) = (levels.iter().min().unwrap(), levels.iter().max().unwrap());
    if hi - lo > 1 {
        return Some(format!("P3 broken: {outcomes:?}"));
    }
    if ignored_by_all && *hi > 0 {
        return Some(format!("P4 broken: {outcomes:?}"));
    }
    None
}

fn choices(count: usize, domain: u32) -> Vec<Vec<Option<i64>>> {
    let mut out = vec![Vec::new()];
    for _ in 0..count {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..=domain as i64).map(move |v| {
                    let mut p = prefix.clone();
                    p.push((v < domain as i64).then_some(v));
                    p
                })
            })
            .collect();
    }
    out
}

fn subsets(items: &[NodeId]) -> Vec<BTreeSet<NodeId>> {
    (0..1u32 << items.len())
        .map(|mask| {
            items
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, p)| *p)
                .collect()
        })
        .collect()
}

/// Enumerates every strategy of one corrupted node over payloads
/// `0..domain` plus silence, per recipient and per phase, both as the
/// leader and as an echoer of an honest leader, under every choice of
/// which honest nodes ignore it.
pub fn gradecast_exhaustive(n: usize, t: usize, domain: u32) -> Result<GradecastVerdict, OracleError> {
    let params = SystemParams::new(n, t, 1).map_err(|e| OracleError::InvalidParams(e.to_string()))?;
    let z = NodeId(n - 1);
    let honest: Vec<NodeId> = params.nodes().filter(|p| *p != z).collect();
    let options = choices(honest.len(), domain);
    let mut verdict = GradecastVerdict {
        leader_runs: 0,
        echoer_runs: 0,
        violations: 0,
        examples: Vec::new(),
    };
    let note = |verdict: &mut GradecastVerdict, msg: String| {
        verdict.violations += 1;
        if verdict.examples.len() < 10 {
            verdict.examples.push(msg);
        }
    };
    for ignoring in subsets(&honest) {
        let ignored_by_all = ignoring.len() == honest.len();
        let leader_run = GcRun {
            n,
            t,
            leader: z,
            z,
            honest: &honest,
            ignoring: &ignoring,
            leader_input: None,
        };
        for a in &options {
            for b in &options {
                for c in &options {
                    verdict.leader_runs += 1;
                    let out = leader_run.run([a, b, c]);
                    if let Some(msg) = gradecast_property_failure(&out, None, ignored_by_all) {
                        note(&mut verdict, format!("corrupt leader, ignored by {ignoring:?}: {msg}"));
                    }
                }
            }
        }
        for v in 0..domain as i64 {
            let echo_run = GcRun {
                n,
                t,
                leader: honest[0],
                z,
                honest: &honest,
                ignoring: &ignoring,
                leader_input: Some(v),
            };
            let silent = vec![None; honest.len()];
            for b in &options {
                for c in &options {
                    verdict.echoer_runs += 1;
                    let out = echo_run.run([&silent, b, c]);
                    if let Some(msg) = gradecast_property_failure(&out, Some(v), false) {
                        note(&mut verdict, format!("corrupt echoer, input {v}: {msg}"));
                    }
                }
            }
        }
    }
    Ok(verdict)
}
