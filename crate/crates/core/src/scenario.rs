//! Scenario files: parsing, validation and execution.
//!
//! A scenario is a JSON object. Only `n`, `t` and `protocol` are required:
//!
//! ```json
//! {
//!   "name": "lie-rationing-13",
//!   "n": 13, "t": 4, "f": 4,
//!   "protocol": "approx",
//!   "inputs": {"pattern": "spread", "low": 0, "high": 1},
//!   "adversary": {"name": "lie-rationing", "params": {"per_iteration": 1}},
//!   "epsilon": "auto"
//! }
//! ```
//!
//! Corrupted nodes default to the last `f` ids. Inputs are a list with one
//! entry per node (integers or `"num/den"` strings) or a pattern object
//! (`unanimous`, `split`, `spread`, `quorum`) applied to honest nodes in id
//! order. Pattern fields `value` and `low` default to 0, `other` and
//! `high` to 1.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use thiserror::Error;

use crate::adversary::AdversarySpec;
use crate::approx::{aa_run, convergence_report, IterationReport};
use crate::checks::{self, Check};
use crate::consensus::{bc_node, ConsensusVariant};
use crate::driver::Schedule;
use crate::model::{parse_rational, NodeId, SystemParams, Value, ValueKind};
use crate::multi::{mc_run_synchronized, mc_run_unsynchronized, InstanceInputs, InstanceRecord, SequenceConfig};
use crate::simnet::{run_simulation, SimConfig, SimError, Trace};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot parse scenario: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Consensus,
    Approx,
    Multi,
}

/// Raw file contents before validation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: Option<String>,
    pub n: usize,
    pub t: usize,
    #[serde(default)]
    pub f: Option<usize>,
    #[serde(default)]
    pub corrupted: Option<Vec<usize>>,
    pub protocol: Protocol,
    #[serde(default)]
    pub inputs: Option<Json>,
    #[serde(default)]
    pub adversary: Option<Json>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub offsets: Option<Json>,
    #[serde(default)]
    pub delta: Option<u64>,
    #[serde(default)]
    pub epsilon: Option<Json>,
    #[serde(default)]
    pub ell: Option<u32>,
    #[serde(default)]
    pub multi_inputs: Option<Json>,
    #[serde(default)]
    pub max_ticks: Option<u64>,
    #[serde(default)]
    pub record_deliveries: bool,
    #[serde(default)]
    pub variant: Option<ConsensusVariant>,
}

#[derive(Debug, Clone)]
pub enum MultiInputs {
    Chained,
    Table(Vec<BTreeMap<NodeId, Value>>),
}

#[derive(Debug, Clone)]
pub enum EpsilonSpec {
    Auto,
    Fixed(BigRational),
}

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub params: SystemParams,
    pub corrupted: BTreeSet<NodeId>,
    pub protocol: Protocol,
    /// One input per node, corrupted nodes included.
    pub inputs: BTreeMap<NodeId, Value>,
    pub adversary: AdversarySpec,
    pub offsets: BTreeMap<NodeId, u64>,
    pub delta: u64,
    pub epsilon: Option<BigRational>,
    pub epsilon_auto: bool,
    pub ell: u32,
    pub multi_inputs: MultiInputs,
    pub max_ticks: u64,
    pub record_deliveries: bool,
    pub variant: ConsensusVariant,
}

impl Scenario {
    pub fn from_json_str(text: &str) -> Result<Scenario, ScenarioError> {
        let file: ScenarioFile = serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        Scenario::from_file(file)
    }

    pub fn from_json(value: Json) -> Result<Scenario, ScenarioError> {
        let file: ScenarioFile = serde_json::from_value(value).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        Scenario::from_file(file)
    }

    pub fn from_file(file: ScenarioFile) -> Result<Scenario, ScenarioError> {
        let corrupted: BTreeSet<NodeId> = match (&file.corrupted, file.f) {
            (Some(list), f) => {
                let set: BTreeSet<NodeId> = list.iter().map(|&i| NodeId(i)).collect();
                if set.len() != list.len() {
                    return Err(invalid("corrupted list has duplicates"));
                }
                if let Some(f) = f {
                    if f != set.len() {
                        return Err(invalid(format!("f = {f} but {} corrupted nodes listed", set.len())));
                    }
                }
                set
            }
            (None, f) => {
                let f = f.unwrap_or(0);
                if f > file.n {
                    return Err(invalid("f exceeds n"));
                }
                (file.n - f..file.n).map(NodeId).collect()
            }
        };
        let params = SystemParams::new(file.n, file.t, corrupted.len()).map_err(|e| invalid(e.to_string()))?;
        if corrupted.iter().any(|p| p.0 >= file.n) {
            return Err(invalid("corrupted node id out of range"));
        }
        let honest: Vec<NodeId> = params.nodes().filter(|p| !corrupted.contains(p)).collect();
        let kind = match file.protocol {
            Protocol::Approx => ValueKind::Rational,
            _ => ValueKind::Discrete,
        };
        let default_inputs = match file.protocol {
            Protocol::Approx => serde_json::json!({"pattern": "spread", "low": 0, "high": 1}),
            _ => serde_json::json!({"pattern": "unanimous", "value": 0}),
        };
        let inputs = parse_inputs(file.inputs.as_ref().unwrap_or(&default_inputs), kind, &params, &honest)?;

        let adversary = parse_adversary(file.adversary.as_ref(), file.seed)?;
        adversary.validate(&params).map_err(invalid)?;

        let delta = file.delta.unwrap_or(0);
        if file.protocol != Protocol::Multi && (delta != 0 || file.offsets.is_some()) {
            return Err(invalid("delta and offsets only apply to the multi protocol"));
        }
        let offsets = parse_offsets(file.offsets.as_ref(), &params, &honest, delta)?;

        let (epsilon, epsilon_auto) = match file.protocol {
            Protocol::Approx => {
                let spec = match &file.epsilon {
                    None => EpsilonSpec::Auto,
                    Some(Json::String(s)) if s == "auto" => EpsilonSpec::Auto,
                    Some(v) => EpsilonSpec::Fixed(json_rational(v).map_err(|e| invalid(format!("epsilon: {e}")))?),
                };
                match spec {
                    EpsilonSpec::Auto => (Some(auto_epsilon(&inputs, &honest, params.n)), true),
                    EpsilonSpec::Fixed(e) if e > BigRational::zero() => (Some(e), false),
                    EpsilonSpec::Fixed(_) => return Err(invalid("epsilon must be positive")),
                }
            }
            _ if file.epsilon.is_some() => return Err(invalid("epsilon only applies to the approx protocol")),
            _ => (None, false),
        };

        let ell = file.ell.unwrap_or(1);
        if file.protocol == Protocol::Multi && ell == 0 {
            return Err(invalid("ell must be at least 1"));
        }
        let multi_inputs = match &file.multi_inputs {
            None => MultiInputs::Chained,
            Some(Json::String(s)) if s == "chained" => MultiInputs::Chained,
            Some(Json::Array(rows)) => {
                let mut table = Vec::new();
                for row in rows {
                    table.push(parse_inputs(row, ValueKind::Discrete, &params, &honest)?);
                }
                MultiInputs::Table(table)
            }
            Some(other) => return Err(invalid(format!("multi_inputs must be \"chained\" or a list, got {other}"))),
        };
        let variant = file.variant.unwrap_or_default();
        if variant != ConsensusVariant::Correct && file.protocol != Protocol::Consensus {
            return Err(invalid("protocol variants apply to the consensus protocol only"));
        }

        Ok(Scenario {
            name: file.name.clone().unwrap_or_else(|| format!("{:?}-n{}-t{}-f{}", file.protocol, params.n, params.t, params.f).to_lowercase()),
            params,
            corrupted,
            protocol: file.protocol,
            inputs,
            adversary,
            offsets,
            delta,
            epsilon,
            epsilon_auto,
            ell,
            multi_inputs,
            max_ticks: file.max_ticks.unwrap_or(100_000),
            record_deliveries: file.record_deliveries,
            variant,
        })
    }

    pub fn honest(&self) -> Vec<NodeId> {
        self.params.nodes().filter(|p| !self.corrupted.contains(p)).collect()
    }

    pub fn honest_inputs(&self) -> Vec<Value> {
        self.honest().iter().map(|p| self.inputs[p].clone()).collect()
    }
}

/// `(H - L)/n` over honest inputs, or 1 when they are all equal.
pub fn auto_epsilon(inputs: &BTreeMap<NodeId, Value>, honest: &[NodeId], n: usize) -> BigRational {
    let values: Vec<BigRational> = honest.iter().filter_map(|p| inputs[p].as_rational().cloned()).collect();
    let lo = values.iter().min().cloned().unwrap_or_else(BigRational::zero);
    let hi = values.iter().max().cloned().unwrap_or_else(BigRational::zero);
    if hi == lo {
        BigRational::one()
    } else {
        (hi - lo) / BigRational::from_integer(BigInt::from(n))
    }
}

fn json_rational(v: &Json) -> Result<BigRational, String> {
    match v {
        Json::Number(num) => match num.as_i64() {
            Some(i) => Ok(BigRational::from_integer(i.into())),
            None => Err(format!("{num} is not an integer; write fractions as \"num/den\"")),
        },
        Json::String(s) => parse_rational(s).map_err(|e| e.to_string()),
        other => Err(format!("expected a number or \"num/den\", got {other}")),
    }
}

fn json_value(v: &Json, kind: ValueKind) -> Result<Value, String> {
    match kind {
        ValueKind::Rational => json_rational(v).map(Value::Rational),
        ValueKind::Discrete => match v {
            Json::Number(num) => num
                .as_i64()
                .map(Value::Discrete)
                .ok_or_else(|| format!("{num} is not an integer")),
            Json::String(s) => Value::parse_as(kind, s).map_err(|e| e.to_string()),
            other => Err(format!("expected an integer, got {other}")),
        },
    }
}

fn parse_inputs(
    spec: &Json,
    kind: ValueKind,
    params: &SystemParams,
    honest: &[NodeId],
) -> Result<BTreeMap<NodeId, Value>, ScenarioError> {
    let value = |v: &Json| json_value(v, kind).map_err(|e| invalid(format!("input: {e}")));
    let zero = match kind {
        ValueKind::Discrete => Value::Discrete(0),
        ValueKind::Rational => Value::Rational(BigRational::zero()),
    };
    let mut out: BTreeMap<NodeId, Value> = params.nodes().map(|p| (p, zero.clone())).collect();
    match spec {
        Json::Array(items) => {
            if items.len() != params.n {
                return Err(invalid(format!("inputs list has {} entries, expected n = {}", items.len(), params.n)));
            }
            for (i, item) in items.iter().enumerate() {
                out.insert(NodeId(i), value(item)?);
            }
        }
        Json::Object(map) => {
            let pattern = map.get("pattern").and_then(Json::as_str).ok_or_else(|| invalid("input pattern missing"))?;
            // `value` and `low` default to 0, `other` and `high` to 1.
            let (zero_json, one_json) = (Json::from(0), Json::from(1));
            let field = |key: &str| -> Result<&Json, ScenarioError> {
                Ok(map.get(key).unwrap_or(match key {
                    "high" | "other" => &one_json,
                    _ => &zero_json,
                }))
            };
            let h = honest.len();
            match pattern {
                "unanimous" => {
                    let v = value(field("value")?)?;
                    for p in honest {
                        out.insert(*p, v.clone());
                    }
                }
                "split" => {
                    let lo = value(field("low")?)?;
                    let hi = value(field("high")?)?;
                    let high_count = match map.get("high_count") {
                        Some(c) => c.as_u64().ok_or_else(|| invalid("high_count must be an integer"))? as usize,
                        None => h / 2,
                    };
                    if high_count > h {
                        return Err(invalid("high_count exceeds the number of honest nodes"));
                    }
                    for (i, p) in honest.iter().enumerate() {
                        out.insert(*p, if i >= h - high_count { hi.clone() } else { lo.clone() });
                    }
                }
                "quorum" => {
                    let v = value(field("value")?)?;
                    let other = value(field("other")?)?;
                    for (i, p) in honest.iter().enumerate() {
                        out.insert(*p, if i < params.quorum() { v.clone() } else { other.clone() });
                    }
                }
                "spread" => match kind {
                    ValueKind::Rational => {
                        let lo = json_rational(field("low")?).map_err(invalid)?;
                        let hi = json_rational(field("high")?).map_err(invalid)?;
                        for (i, p) in honest.iter().enumerate() {
                            let v = if h == 1 {
                                lo.clone()
                            } else {
                                &lo + (&hi - &lo) * BigRational::new(i.into(), (h - 1).into())
                            };
                            out.insert(*p, Value::Rational(v));
                        }
                    }
                    ValueKind::Discrete => {
                        let lo = value(field("low")?)?.as_discrete().unwrap_or(0);
                        let hi = value(field("high")?)?.as_discrete().unwrap_or(0);
                        if hi < lo {
                            return Err(invalid("spread needs low <= high"));
                        }
                        let width = (hi - lo + 1) as usize;
                        for (i, p) in honest.iter().enumerate() {
                            out.insert(*p, Value::Discrete(lo + (i % width) as i64));
                        }
                    }
                },
                other => return Err(invalid(format!("unknown input pattern {other:?}"))),
            }
        }
        other => return Err(invalid(format!("inputs must be a list or a pattern object, got {other}"))),
    }
    Ok(out)
}

fn parse_adversary(spec: Option<&Json>, seed: Option<u64>) -> Result<AdversarySpec, ScenarioError> {
    let empty = Json::Object(Default::default());
    match spec {
        None => Ok(AdversarySpec::Silent),
        Some(Json::String(name)) => AdversarySpec::from_parts(name, &empty, seed).map_err(invalid),
        Some(Json::Object(map)) => {
            let name = map.get("name").and_then(Json::as_str).ok_or_else(|| invalid("adversary name missing"))?;
            for key in map.keys() {
                if !["name", "params", "seed"].contains(&key.as_str()) {
                    return Err(invalid(format!("unknown adversary field {key:?}")));
                }
            }
            let params = map.get("params").unwrap_or(&empty);
            let seed = match map.get("seed") {
                Some(s) => Some(s.as_u64().ok_or_else(|| invalid("adversary seed must be an integer"))?),
                None => seed,
            };
            AdversarySpec::from_parts(name, params, seed).map_err(invalid)
        }
        Some(other) => Err(invalid(format!("adversary must be a name or an object, got {other}"))),
    }
}

fn parse_offsets(
    spec: Option<&Json>,
    params: &SystemParams,
    honest: &[NodeId],
    delta: u64,
) -> Result<BTreeMap<NodeId, u64>, ScenarioError> {
    let mut out: BTreeMap<NodeId, u64> = params.nodes().map(|p| (p, 0)).collect();
    match spec {
        None => {}
        Some(Json::String(s)) if s == "max-spread" => {
            // Alternate 0 and delta over the honest nodes.
            for (i, p) in honest.iter().enumerate() {
                out.insert(*p, if i % 2 == 1 { delta } else { 0 });
            }
        }
        Some(Json::Array(items)) => {
            if items.len() != params.n {
                return Err(invalid(format!("offsets list has {} entries, expected n = {}", items.len(), params.n)));
            }
            for (i, item) in items.iter().enumerate() {
                let o = item.as_u64().ok_or_else(|| invalid("offsets must be non-negative integers"))?;
                out.insert(NodeId(i), o);
            }
        }
        Some(other) => return Err(invalid(format!("offsets must be a list or \"max-spread\", got {other}"))),
    }
    let spread = honest.iter().map(|p| out[p]).max().unwrap_or(0) - honest.iter().map(|p| out[p]).min().unwrap_or(0);
    if spread > delta {
        return Err(invalid(format!("offset spread {spread} exceeds delta {delta}")));
    }
    Ok(out)
}

/// Headline numbers of one run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub protocol: String,
    pub n: usize,
    pub t: usize,
    pub f: usize,
    pub adversary: String,
    pub seed: Option<u64>,
    /// Decision per honest node (last instance for sequences).
    pub decisions: BTreeMap<String, String>,
    /// Largest number of protocol rounds any honest node used.
    pub rounds: u64,
    /// Largest number of iterations any honest node executed.
    pub iterations: u32,
    pub honest_messages: u64,
    pub adversary_messages: u64,
    pub ticks: u64,
    pub warnings: usize,
    pub epsilon: Option<String>,
    pub iterations_per_instance: Vec<u32>,
    pub total_iterations: Option<u32>,
    pub total_rounds: Option<u64>,
    /// Total ticks divided by `delta * (ell + t)` for unsynchronized runs.
    pub tick_ratio: Option<f64>,
    pub completed: bool,
    pub passed: bool,
}

/// Everything a run produced.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub summary: Summary,
    pub checks: Vec<Check>,
    pub traces: Vec<Trace>,
    pub iterations: Vec<IterationReport>,
    pub records: Vec<InstanceRecord>,
}

impl RunResult {
    pub fn passed(&self) -> bool {
        checks::all_pass(&self.checks)
    }
}

/// Constant used for the unsynchronized tick bound `C * delta * (ell + t)`.
pub const UNSYNC_TICK_CONSTANT: u64 = 22;

fn liveness_check(completed: bool, ticks: u64, limit: u64) -> Check {
    Check::new(
        "L",
        "every honest node terminates within the tick budget",
        format!("{ticks} ticks, completed = {completed}"),
        format!("{limit} ticks"),
        completed,
    )
}

fn base_summary(s: &Scenario) -> Summary {
    Summary {
        name: s.name.clone(),
        protocol: format!("{:?}", s.protocol).to_lowercase(),
        n: s.params.n,
        t: s.params.t,
        f: s.params.f,
        adversary: s.adversary.label(),
        seed: match s.adversary {
            AdversarySpec::RandomSeeded { seed } => Some(seed),
            _ => None,
        },
        epsilon: s.epsilon.as_ref().map(|e| Value::Rational(e.clone()).to_string()),
        ..Summary::default()
    }
}

fn fill_from_trace(summary: &mut Summary, trace: &Trace, width: u64) {
    let runs = checks::collect_runs(trace, 1);
    for (p, r) in &runs {
        {
            if let Some((v, it, _)) = &r.decided {
                summary.decisions.insert(p.to_string(), v.to_string());
                summary.iterations = summary.iterations.max(*it);
            }
            if let Some(rounds) = checks::rounds_used(r, width) {
                summary.rounds = summary.rounds.max(rounds);
            }
        }
    }
    summary.honest_messages = trace.total_honest_messages();
    summary.adversary_messages = trace.ticks.last().map(|t| t.cumulative_adversary).unwrap_or(0);
    summary.ticks = trace.last_tick().map(|t| t + 1 - trace.first_tick).unwrap_or(0);
    summary.warnings = trace.warning_count();
    summary.completed = trace.completed;
}

/// Takes the trace out of a simulation result; a tick-budget overrun still
/// yields the partial trace.
fn trace_of(result: Result<Trace, SimError>) -> Result<Trace, ScenarioError> {
    match result {
        Ok(t) => Ok(t),
        Err(SimError::MaxTicksExceeded { trace, .. }) => Ok(*trace),
        Err(SimError::Config(e)) => Err(invalid(e)),
    }
}

pub fn run_scenario(s: &Scenario) -> Result<RunResult, ScenarioError> {
    match s.protocol {
        Protocol::Consensus => run_consensus(s),
        Protocol::Approx => run_approx(s),
        Protocol::Multi => run_multi(s),
    }
}

fn sim_config(s: &Scenario) -> SimConfig {
    let mut cfg = SimConfig::new(s.params, s.corrupted.clone());
    cfg.max_ticks = s.max_ticks;
    cfg.record_deliveries = s.record_deliveries;
    cfg
}

fn run_consensus(s: &Scenario) -> Result<RunResult, ScenarioError> {
    let mut adversary = s.adversary.build();
    let trace = trace_of(run_simulation(
        &sim_config(s),
        |p| bc_node(p, s.inputs[&p].clone(), s.params, 1, Schedule::stretched(0), BTreeSet::new(), s.variant),
        adversary.as_mut(),
    ))?;
    let mut summary = base_summary(s);
    fill_from_trace(&mut summary, &trace, 1);
    let mut checks = vec![liveness_check(trace.completed, summary.ticks, s.max_ticks)];
    checks.extend(checks::consensus_checks(&trace, 1, 1));
    summary.passed = checks::all_pass(&checks);
    Ok(RunResult {
        summary,
        checks,
        traces: vec![trace],
        iterations: Vec::new(),
        records: Vec::new(),
    })
}

fn run_approx(s: &Scenario) -> Result<RunResult, ScenarioError> {
    let epsilon = s.epsilon.clone().expect("approx scenarios carry epsilon");
    let mut adversary = s.adversary.build();
    let trace = trace_of(run_simulation(
        &sim_config(s),
        |p| {
            let input = s.inputs[&p].as_rational().cloned().unwrap_or_else(BigRational::zero);
            aa_run(p, input, epsilon.clone(), s.params)
        },
        adversary.as_mut(),
    ))?;
    let mut summary = base_summary(s);
    fill_from_trace(&mut summary, &trace, 1);
    let mut checks = vec![liveness_check(trace.completed, summary.ticks, s.max_ticks)];
    checks.extend(checks::approx_checks(&trace, &epsilon));
    if s.epsilon_auto && trace.completed {
        let bound = checks::theorem_iteration_bound(s.params.n);
        checks.push(Check::new(
            "A-iter",
            "with epsilon = (H-L)/n every honest node terminates within 2*ceil(log n/log log n)+2 iterations",
            summary.iterations,
            bound,
            summary.iterations <= bound,
        ));
    }
    summary.passed = checks::all_pass(&checks);
    let iterations = convergence_report(&trace);
    Ok(RunResult {
        summary,
        checks,
        traces: vec![trace],
        iterations,
        records: Vec::new(),
    })
}

fn run_multi(s: &Scenario) -> Result<RunResult, ScenarioError> {
    let first: BTreeMap<NodeId, Value> = s.inputs.clone();
    let inputs = match &s.multi_inputs {
        MultiInputs::Chained => InstanceInputs::chained(first),
        MultiInputs::Table(table) => InstanceInputs::table(table.clone()),
    };
    let config = SequenceConfig {
        ell: s.ell,
        inputs,
        delta: s.delta,
        offsets: s.offsets.clone(),
    };
    let mut adversary = s.adversary.build();
    let synchronized = s.delta == 0;
    let result = if synchronized {
        mc_run_synchronized(s.params, &s.corrupted, &config, adversary.as_mut(), s.max_ticks, s.record_deliveries)
    } else {
        mc_run_unsynchronized(s.params, &s.corrupted, &config, adversary.as_mut(), s.max_ticks, s.record_deliveries)
    };
    let mut summary = base_summary(s);
    let outcome = match result {
        Ok(o) => o,
        Err(SimError::Config(e)) => return Err(invalid(e)),
        Err(SimError::MaxTicksExceeded { ticks, trace, .. }) => {
            fill_from_trace(&mut summary, &trace, s.delta + 1);
            let checks = vec![liveness_check(false, ticks, s.max_ticks)];
            summary.passed = false;
            return Ok(RunResult {
                summary,
                checks,
                traces: vec![*trace],
                iterations: Vec::new(),
                records: Vec::new(),
            });
        }
    };
    let last_instance = s.ell;
    for r in outcome.records.iter().filter(|r| r.instance == last_instance) {
        summary.decisions.insert(r.node.to_string(), r.decision.to_string());
    }
    summary.iterations = outcome.records.iter().map(|r| r.iterations).max().unwrap_or(0);
    summary.honest_messages = outcome.traces.iter().map(Trace::total_honest_messages).sum();
    summary.adversary_messages = outcome
        .traces
        .iter()
        .map(|t| t.ticks.last().map(|x| x.cumulative_adversary).unwrap_or(0))
        .sum();
    summary.ticks = outcome.total_ticks;
    summary.warnings = outcome.traces.iter().map(Trace::warning_count).sum();
    summary.completed = outcome.traces.iter().all(|t| t.completed);
    summary.iterations_per_instance = outcome.iterations_per_instance.clone();
    summary.total_iterations = Some(outcome.total_iterations);
    summary.total_rounds = Some(outcome.total_rounds);
    summary.rounds = outcome.total_rounds;

    let mut checks = vec![liveness_check(summary.completed, summary.ticks, s.max_ticks)];
    checks.extend(checks::multi_checks(&outcome, &s.params, s.ell, synchronized));
    if !synchronized {
        let denom = s.delta * (s.ell as u64 + s.params.t as u64);
        let ratio = outcome.total_ticks as f64 / denom as f64;
        summary.tick_ratio = Some(ratio);
        checks.push(Check::new(
            "M-ticks",
            "unsynchronized total ticks <= C * delta * (ell + t)",
            format!("{} (ratio {ratio:.3})", outcome.total_ticks),
            format!("{} (C = {UNSYNC_TICK_CONSTANT})", UNSYNC_TICK_CONSTANT * denom),
            outcome.total_ticks <= UNSYNC_TICK_CONSTANT * denom,
        ));
    }
    summary.passed = checks::all_pass(&checks);
    Ok(RunResult {
        summary,
        checks,
        traces: outcome.traces,
        iterations: Vec::new(),
        records: outcome.records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_corrupt_the_last_f_nodes() {
        let s = Scenario::from_json_str(r#"{"n": 7, "t": 2, "f": 2, "protocol": "consensus"}"#).unwrap();
        assert_eq!(s.corrupted, [NodeId(5), NodeId(6)].into());
        assert_eq!(s.adversary, AdversarySpec::Silent);
    }

    #[test]
    fn auto_epsilon_is_range_over_n() {
        let s = Scenario::from_json_str(
            r#"{"n": 4, "t": 1, "protocol": "approx", "inputs": [0, "1/2", 1, 1]}"#,
        )
        .unwrap();
        assert_eq!(s.epsilon, Some(BigRational::new(1.into(), 4.into())));
        let s = Scenario::from_json_str(r#"{"n": 4, "t": 1, "protocol": "approx", "inputs": [2, 2, 2, 2]}"#).unwrap();
        assert_eq!(s.epsilon, Some(BigRational::one()));
    }

    #[test]
    fn patterns() {
        let s = Scenario::from_json_str(
            r#"{"n": 7, "t": 2, "f": 1, "protocol": "consensus", "inputs": {"pattern": "split", "low": 0, "high": 1}}"#,
        )
        .unwrap();
        let ones = s.honest_inputs().iter().filter(|v| **v == Value::Discrete(1)).count();
        assert_eq!(ones, 3);
        let s = Scenario::from_json_str(
            r#"{"n": 5, "t": 1, "protocol": "approx", "inputs": {"pattern": "spread", "low": 0, "high": 1}}"#,
        )
        .unwrap();
        assert_eq!(s.inputs[&NodeId(1)], Value::rational(1, 4));
    }

    #[test]
    fn rejects_bad_configs() {
        for bad in [
            r#"{"n": 3, "t": 1, "protocol": "consensus"}"#,
            r#"{"n": 4, "t": 1, "f": 2, "protocol": "consensus"}"#,
            r#"{"n": 4, "t": 1, "protocol": "consensus", "epsilon": "1/2"}"#,
            r#"{"n": 4, "t": 1, "protocol": "consensus", "adversary": "nonsense"}"#,
            r#"{"n": 4, "t": 1, "protocol": "consensus", "inputs": [0, 1]}"#,
            r#"{"n": 4, "t": 1, "protocol": "multi", "delta": 1, "offsets": [0, 2, 0, 0]}"#,
            r#"{"n": 4, "t": 1, "protocol": "consensus", "bogus": 1}"#,
            r#"not json"#,
        ] {
            assert!(Scenario::from_json_str(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn fault_free_consensus_runs_clean() {
        let s = Scenario::from_json_str(r#"{"n": 7, "t": 2, "protocol": "consensus"}"#).unwrap();
        let r = run_scenario(&s).unwrap();
        assert!(r.passed(), "{:#?}", r.checks);
        assert_eq!(r.summary.rounds, 6);
    }
}
