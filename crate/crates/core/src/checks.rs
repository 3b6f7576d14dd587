//! Trace-level invariant checks. Each check reports what it measured next
//! to the bound it compares against.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::approx::convergence_report;
use crate::model::{MultiSet, NodeId, SystemParams, Value};
use crate::multi::SequenceOutcome;
use crate::simnet::{NodeEvent, OutcomeRecord, Trace};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Check {
    pub id: String,
    pub description: String,
    pub measured: String,
    pub bound: String,
    pub pass: bool,
}

impl Check {
    pub fn new(id: &str, description: &str, measured: impl ToString, bound: impl ToString, pass: bool) -> Self {
        Check {
            id: id.into(),
            description: description.into(),
            measured: measured.to_string(),
            bound: bound.to_string(),
            pass,
        }
    }
}

pub fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.pass)
}

/// Everything one honest node did in one instance.
#[derive(Debug, Clone, Default)]
pub struct NodeRun {
    pub input: Option<Value>,
    pub start_tick: Option<u64>,
    pub iterations: BTreeMap<u32, IterEnd>,
    pub decided: Option<(Value, u32, u64)>,
    pub terminated_tick: Option<u64>,
    pub halted: Option<(Value, BTreeSet<NodeId>, u64)>,
    pub done_sent: Option<(bool, u64)>,
}

#[derive(Debug, Clone)]
pub struct IterEnd {
    pub start_value: Value,
    pub value: Value,
    pub bad_start: BTreeSet<NodeId>,
    pub bad: BTreeSet<NodeId>,
    pub broke: bool,
    pub extra: bool,
    pub outcomes: Vec<OutcomeRecord>,
}

impl NodeRun {
    pub fn broke_at(&self) -> Option<u32> {
        self.iterations
            .iter()
            .find(|(_, e)| e.broke && !e.extra)
            .map(|(r, _)| *r)
    }
}

pub fn collect_runs(trace: &Trace, instance: u32) -> BTreeMap<NodeId, NodeRun> {
    let mut runs: BTreeMap<NodeId, NodeRun> = trace.honest().into_iter().map(|p| (p, NodeRun::default())).collect();
    for e in &trace.events {
        let Some(run) = runs.get_mut(&e.node) else { continue };
        match &e.event {
            NodeEvent::InstanceStarted { instance: k, input } if *k == instance => {
                run.input = Some(input.clone());
                run.start_tick = Some(e.tick);
            }
            NodeEvent::IterationEnd {
                instance: k,
                iteration,
                start_value,
                value,
                bad_start,
                bad,
                broke,
                extra,
                outcomes,
            } if *k == instance => {
                run.iterations.insert(
                    *iteration,
                    IterEnd {
                        start_value: start_value.clone(),
                        value: value.clone(),
                        bad_start: bad_start.clone(),
                        bad: bad.clone(),
                        broke: *broke,
                        extra: *extra,
                        outcomes: outcomes.clone(),
                    },
                );
            }
            NodeEvent::Decided {
                instance: k,
                value,
                iterations,
            } if *k == instance => run.decided = Some((value.clone(), *iterations, e.tick)),
            NodeEvent::Terminated { instance: k, .. } if *k == instance => run.terminated_tick = Some(e.tick),
            NodeEvent::Halted {
                instance: k,
                value,
                done_senders,
            } if *k == instance => run.halted = Some((value.clone(), done_senders.clone(), e.tick)),
            NodeEvent::DoneSent { instance: k, relay } if *k == instance => {
                run.done_sent.get_or_insert((*relay, e.tick));
            }
            _ => {}
        }
    }
    runs
}

fn intersection<'a>(sets: impl IntoIterator<Item = &'a BTreeSet<NodeId>>) -> BTreeSet<NodeId> {
    let mut it = sets.into_iter();
    match it.next() {
        None => BTreeSet::new(),
        Some(first) => it.fold(first.clone(), |acc, s| acc.intersection(s).cloned().collect()),
    }
}

/// True if some value appears at least `n - t` times among the honest
/// inputs.
pub fn has_quorum(inputs: &[Value], params: &SystemParams) -> bool {
    let ms: MultiSet = inputs.iter().cloned().collect();
    let found = ms.entries().any(|(_, c)| c >= params.quorum());
    found
}

/// No honest node ever appears in an honest BAD set.
pub fn bad_soundness(trace: &Trace) -> Check {
    let honest: BTreeSet<NodeId> = trace.honest().into_iter().collect();
    let mut offenders = BTreeSet::new();
    for (p, bad) in trace.bad_history() {
        for q in bad.intersection(&honest) {
            offenders.insert((p, *q));
        }
    }
    for e in &trace.events {
        if let NodeEvent::IterationEnd { bad, .. } = &e.event {
            for q in bad.intersection(&honest) {
                offenders.insert((e.node, *q));
            }
        }
    }
    Check::new(
        "I3",
        "no honest node ever enters an honest BAD set",
        format!("{} honest entries", offenders.len()),
        "0",
        offenders.is_empty(),
    )
}

/// BAD sets only grow over the whole trace.
pub fn bad_monotone(trace: &Trace) -> Check {
    let mut last: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
    let mut shrinks = 0;
    for (p, bad) in trace.bad_history() {
        if let Some(prev) = last.get(&p) {
            if !prev.is_subset(bad) {
                shrinks += 1;
            }
        }
        last.insert(p, bad.clone());
    }
    Check::new("BAD-monotone", "BAD sets never shrink", shrinks, 0, shrinks == 0)
}

/// Gradecast properties on every iteration of `instance` in which every
/// honest node took part.
pub fn gradecast_properties(trace: &Trace, instance: u32) -> Check {
    let runs = collect_runs(trace, instance);
    let honest: BTreeSet<NodeId> = runs.keys().copied().collect();
    let max_iter = runs.values().flat_map(|r| r.iterations.keys()).max().copied().unwrap_or(0);
    let mut violations = Vec::new();
    let mut checked = 0;
    for r in 1..=max_iter {
        let ends: Vec<(&NodeId, &IterEnd)> = runs.iter().filter_map(|(p, run)| run.iterations.get(&r).map(|e| (p, e))).collect();
        if ends.len() != honest.len() {
            continue;
        }
        checked += 1;
        let n = trace.params.n;
        for leader in 0..n {
            let leader = NodeId(leader);
            let outs: Vec<&OutcomeRecord> = ends.iter().map(|(_, e)| &e.outcomes[leader.0]).collect();
            if honest.contains(&leader) {
                let v = &runs[&leader].iterations[&r].start_value;
                if outs.iter().any(|o| o.confidence != 2 || &o.value != v) {
                    violations.push(format!("P1 iteration {r} leader {leader}"));
                }
            }
            let positive: BTreeSet<&Value> = outs.iter().filter(|o| o.confidence > 0).map(|o| &o.value).collect();
            if positive.len() > 1 {
                violations.push(format!("P2 iteration {r} leader {leader}"));
            }
            let (lo, hi) = (
                outs.iter().map(|o| o.confidence).min().unwrap_or(0),
                outs.iter().map(|o| o.confidence).max().unwrap_or(0),
            );
            if hi - lo > 1 {
                violations.push(format!("P3 iteration {r} leader {leader}"));
            }
            if ends.iter().all(|(_, e)| e.bad_start.contains(&leader)) && hi > 0 {
                violations.push(format!("P4 iteration {r} leader {leader}"));
            }
        }
    }
    Check::new(
        "P1-P4",
        "gradecast properties on every fully attended iteration",
        format!("{} violations over {checked} iterations", violations.len()),
        "0",
        violations.is_empty(),
    )
}

/// Protocol rounds from the start of `instance` to a node's termination.
pub fn rounds_used(run: &NodeRun, width: u64) -> Option<u64> {
    Some((run.terminated_tick? - run.start_tick?) / width)
}

/// I1-I7 for one consensus instance of `trace`.
pub fn consensus_checks(trace: &Trace, instance: u32, width: u64) -> Vec<Check> {
    let params = trace.params;
    let runs = collect_runs(trace, instance);
    let inputs: Vec<Value> = runs.values().filter_map(|r| r.input.clone()).collect();
    let decisions: Vec<Value> = runs.values().filter_map(|r| r.decided.as_ref().map(|d| d.0.clone())).collect();
    let mut checks = Vec::new();

    let distinct_in: BTreeSet<&Value> = inputs.iter().collect();
    let i1 = distinct_in.len() != 1 || decisions.iter().all(|d| Some(&d) == distinct_in.iter().next());
    checks.push(Check::new(
        "I1",
        "validity: unanimous honest inputs are decided",
        format!("inputs {:?} -> decisions {:?}", display(&distinct_in), display(&decisions.iter().collect())),
        "decision = common input",
        i1,
    ));

    let distinct_out: BTreeSet<&Value> = decisions.iter().collect();
    let all_decided = decisions.len() == runs.len();
    checks.push(Check::new(
        "I2",
        "agreement: every honest node decides the same value",
        format!("{} distinct decisions, {}/{} decided", distinct_out.len(), decisions.len(), runs.len()),
        "1 distinct, all decided",
        distinct_out.len() == 1 && all_decided,
    ));

    checks.push(bad_soundness(trace));

    // I4: differing maj in iteration r grows the intersection of BAD sets.
    let max_iter = runs.values().flat_map(|r| r.iterations.keys()).max().copied().unwrap_or(0);
    let mut i4_bad = 0;
    let mut i4_cases = 0;
    let mut i6_bad = 0;
    for r in 1..=max_iter {
        let main: Vec<&IterEnd> = runs.values().filter_map(|run| run.iterations.get(&r)).filter(|e| !e.extra).collect();
        let maj: BTreeSet<&Value> = main.iter().map(|e| &e.value).collect();
        if maj.len() > 1 {
            i4_cases += 1;
            let before = intersection(main.iter().map(|e| &e.bad_start)).len();
            let after = intersection(main.iter().map(|e| &e.bad)).len();
            if after <= before {
                i4_bad += 1;
            }
        }
        if main.iter().any(|e| e.broke) {
            let ends: BTreeSet<&Value> = runs.values().filter_map(|run| run.iterations.get(&r)).map(|e| &e.value).collect();
            if ends.len() > 1 {
                i6_bad += 1;
            }
        }
    }
    checks.push(Check::new(
        "I4",
        "iterations with differing maj grow the intersection of BAD sets",
        format!("{i4_bad} of {i4_cases} such iterations without growth"),
        "0",
        i4_bad == 0,
    ));

    let f = params.f as u64;
    let t = params.t as u64;
    let quorum = has_quorum(&inputs, &params);
    let slack = if quorum { 2 } else { 3 };
    let bound = 3 * (f + slack).min(t + 1);
    let measured = runs.values().filter_map(|r| rounds_used(r, width)).max().unwrap_or(0);
    let everyone = runs.values().all(|r| r.terminated_tick.is_some());
    checks.push(Check::new(
        "I5",
        if quorum {
            "early stopping: rounds <= 3*min(f+2, t+1)"
        } else {
            "early stopping without an input quorum: rounds <= 3*min(f+3, t+1)"
        },
        measured,
        bound,
        everyone && measured <= bound,
    ));

    checks.push(Check::new(
        "I6",
        "a break in iteration r implies equal honest values at the end of r",
        format!("{i6_bad} iterations with differing values"),
        "0",
        i6_bad == 0,
    ));

    let mut i7_bad = 0;
    for run in runs.values() {
        if let (Some(r), Some((d, _, _))) = (run.broke_at(), &run.decided) {
            if &run.iterations[&r].value != d {
                i7_bad += 1;
            }
        }
    }
    checks.push(Check::new(
        "I7",
        "the extra iteration never changes the returned value",
        format!("{i7_bad} nodes changed"),
        "0",
        i7_bad == 0,
    ));
    checks.push(gradecast_properties(trace, instance));
    checks
}

fn display(vs: &BTreeSet<&Value>) -> Vec<String> {
    vs.iter().map(|v| v.to_string()).collect()
}

fn rational_inputs(runs: &BTreeMap<NodeId, NodeRun>) -> Vec<BigRational> {
    runs.values()
        .filter_map(|r| r.input.as_ref().and_then(|v| v.as_rational().cloned()))
        .collect()
}

/// `(t/(n-2t))^k / k^k`.
pub fn k_iteration_factor(params: &SystemParams, k: u32) -> BigRational {
    let base = BigRational::new(params.t.into(), params.trimmed_len().into());
    let kk = BigRational::from_integer(k.into());
    let mut out = BigRational::one();
    for _ in 0..k {
        out = out * &base / &kk;
    }
    out
}

/// A1-A5 for an approximate agreement trace.
pub fn approx_checks(trace: &Trace, epsilon: &BigRational) -> Vec<Check> {
    let params = trace.params;
    let runs = collect_runs(trace, 1);
    let inputs = rational_inputs(&runs);
    let (lo, hi) = (
        inputs.iter().min().cloned().unwrap_or_else(BigRational::zero),
        inputs.iter().max().cloned().unwrap_or_else(BigRational::zero),
    );
    let outputs: Vec<BigRational> = runs
        .values()
        .filter_map(|r| r.decided.as_ref().and_then(|d| d.0.as_rational().cloned()))
        .collect();
    let show = |q: &BigRational| Value::Rational(q.clone()).to_string();
    let mut checks = Vec::new();

    let out_lo = outputs.iter().min().cloned().unwrap_or_else(BigRational::zero);
    let out_hi = outputs.iter().max().cloned().unwrap_or_else(BigRational::zero);
    checks.push(Check::new(
        "A1",
        "validity: outputs lie in [L, H] of honest inputs",
        format!("[{}, {}]", show(&out_lo), show(&out_hi)),
        format!("[{}, {}]", show(&lo), show(&hi)),
        outputs.len() == runs.len() && outputs.iter().all(|o| o >= &lo && o <= &hi),
    ));
    let spread = &out_hi - &out_lo;
    checks.push(Check::new(
        "A2",
        "agreement: outputs within epsilon",
        show(&spread),
        show(epsilon),
        &spread <= epsilon,
    ));

    let reports = convergence_report(trace);
    let mut a3_bad = Vec::new();
    for r in &reports {
        let ok = r.contraction_holds(&params) && (r.new_r != 0 || r.next_range().is_zero());
        if !ok {
            a3_bad.push(r.iteration);
        }
    }
    checks.push(Check::new(
        "A3",
        "per-iteration contraction range_{r+1} <= range_r * NEW_r/(n-2t), exact",
        format!("{} iterations checked, failing: {:?}", reports.len(), a3_bad),
        "none failing",
        a3_bad.is_empty(),
    ));

    let honest = runs.len();
    let initial = &hi - &lo;
    let mut a4_bad = Vec::new();
    let mut a4_checked = 0;
    for r in &reports {
        // Only while every honest node is still in the main loop.
        if r.updaters != honest {
            break;
        }
        a4_checked += 1;
        let bound = &initial * k_iteration_factor(&params, r.iteration);
        if r.next_range() > bound {
            a4_bad.push(r.iteration);
        }
        if runs.values().any(|run| run.broke_at() == Some(r.iteration)) {
            break;
        }
    }
    checks.push(Check::new(
        "A4",
        "k-iteration bound range <= (H-L)*(t/(n-2t))^k/k^k while nobody has exited",
        format!("{a4_checked} iterations checked, failing: {a4_bad:?}"),
        "none failing",
        a4_bad.is_empty(),
    ));

    let breaks: Vec<u32> = runs.values().filter_map(|r| r.broke_at()).collect();
    let first = breaks.iter().min().copied();
    let last = breaks.iter().max().copied();
    let all_broke = breaks.len() == runs.len();
    let all_terminated = runs.values().all(|r| r.terminated_tick.is_some());
    let coupled = match (first, last) {
        (Some(a), Some(b)) => b <= a + 1,
        _ => false,
    };
    checks.push(Check::new(
        "A5",
        "exit coupling: once one node breaks, all break within one iteration",
        format!("breaks at {first:?}..{last:?}"),
        "last <= first + 1, all terminate",
        coupled && all_broke && all_terminated,
    ));
    checks.push(bad_soundness(trace));
    checks.push(gradecast_properties(trace, 1));
    checks
}

/// Iteration bound for the `log n / log log n` theorem (base 2).
pub fn theorem_iteration_bound(n: usize) -> u32 {
    let l = (n as f64).log2();
    let r = (l / l.log2()).ceil() as u32;
    2 * r + 2
}

/// Number of instances whose honest inputs lack an `n - t` quorum.
pub fn split_instances(outcome: &SequenceOutcome, params: &SystemParams) -> usize {
    let mut inputs: BTreeMap<u32, Vec<Value>> = BTreeMap::new();
    for trace in &outcome.traces {
        for e in &trace.events {
            if let NodeEvent::InstanceStarted { instance, input } = &e.event {
                inputs.entry(*instance).or_default().push(input.clone());
            }
        }
    }
    inputs.values().filter(|v| !has_quorum(v, params)).count()
}

/// M1-M5 plus per-instance agreement/validity for a sequence.
pub fn multi_checks(outcome: &SequenceOutcome, params: &SystemParams, ell: u32, synchronized: bool) -> Vec<Check> {
    let mut checks = Vec::new();
    let t = params.t as u32;

    if !synchronized {
        let mut worst = 0;
        for k in 1..=ell {
            let ticks: Vec<u64> = outcome.records.iter().filter(|r| r.instance == k).map(|r| r.halt_tick).collect();
            if let (Some(a), Some(b)) = (ticks.iter().min(), ticks.iter().max()) {
                worst = worst.max(b - a);
            }
        }
        checks.push(Check::new("M1", "per-instance honest halt ticks span at most 1", worst, 1, worst <= 1));
    }

    let mut m2_bad = Vec::new();
    for k in 1..=ell {
        let recs: Vec<_> = outcome.records.iter().filter(|r| r.instance == k).collect();
        let decisions: BTreeSet<&Value> = recs.iter().map(|r| &r.decision).collect();
        let mut inputs = BTreeSet::new();
        for trace in &outcome.traces {
            for e in &trace.events {
                if let NodeEvent::InstanceStarted { instance, input } = &e.event {
                    if *instance == k && !trace.corrupted.contains(&e.node) {
                        inputs.insert(input.clone());
                    }
                }
            }
        }
        let honest = outcome.traces.first().map(|t| t.honest().len()).unwrap_or(0);
        let agree = decisions.len() == 1 && recs.len() == honest;
        let valid = inputs.len() != 1 || decisions.iter().all(|d| inputs.contains(*d));
        if !(agree && valid) {
            m2_bad.push(k);
        }
    }
    checks.push(Check::new(
        "M2",
        "agreement and validity hold in every instance",
        format!("failing instances: {m2_bad:?}"),
        "none",
        m2_bad.is_empty(),
    ));

    let mut soundness = true;
    let mut shrinks = 0;
    let mut last: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
    for trace in &outcome.traces {
        soundness &= bad_soundness(trace).pass;
        for (p, bad) in trace.bad_history() {
            if let Some(prev) = last.get(&p) {
                if !prev.is_subset(bad) {
                    shrinks += 1;
                }
            }
            last.insert(p, bad.clone());
        }
    }
    checks.push(Check::new(
        "M3",
        "BAD sets never shrink across instances and stay free of honest nodes",
        format!("{shrinks} shrinks, sound = {soundness}"),
        "0 shrinks, sound = true",
        shrinks == 0 && soundness,
    ));

    if synchronized {
        let s = split_instances(outcome, params) as u32;
        let bound = t + 2 * ell + s;
        checks.push(Check::new(
            "M4",
            if s == 0 {
                "synchronized totals: iterations <= t+2l"
            } else {
                "synchronized totals: iterations <= t+2l+s (s instances without an input quorum)"
            },
            outcome.total_iterations,
            bound,
            outcome.total_iterations <= bound,
        ));
        checks.push(Check::new(
            "M4-rounds",
            "synchronized totals: rounds <= 3 * iteration bound",
            outcome.total_rounds,
            3 * bound as u64,
            outcome.total_rounds <= 3 * bound as u64,
        ));
    } else {
        let mut m5_bad = 0;
        for trace in &outcome.traces {
            let honest: BTreeSet<NodeId> = trace.honest().into_iter().collect();
            for k in 1..=ell {
                let runs = collect_runs(trace, k);
                let first_own_done = runs
                    .values()
                    .filter_map(|r| r.done_sent.filter(|(relay, _)| !relay).map(|(_, tick)| tick))
                    .min();
                for run in runs.values() {
                    if let Some((_, senders, tick)) = &run.halted {
                        let honest_senders = senders.intersection(&honest).count();
                        let enough = senders.len() > 2 * params.t && honest_senders > params.t;
                        let after_termination = first_own_done.is_some_and(|d| d < *tick);
                        if !(enough && after_termination) {
                            m5_bad += 1;
                        }
                    }
                }
            }
        }
        checks.push(Check::new(
            "M5",
            "halts need 2t+1 done senders, t+1 of them honest, after an honest termination",
            format!("{m5_bad} bad halts"),
            "0",
            m5_bad == 0,
        ));
    }
    checks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theorem_bounds() {
        assert_eq!(theorem_iteration_bound(13), 6);
        assert_eq!(theorem_iteration_bound(16), 6);
        assert_eq!(theorem_iteration_bound(19), 8);
    }

    #[test]
    fn k_factor_values() {
        let p = SystemParams::new(13, 4, 4).unwrap();
        assert_eq!(k_iteration_factor(&p, 1), BigRational::new(4.into(), 5.into()));
        assert_eq!(k_iteration_factor(&p, 2), BigRational::new(16.into(), 100.into()));
        assert_eq!(k_iteration_factor(&p, 4), BigRational::new(1.into(), 625.into()));
    }

    #[test]
    fn quorum_detection() {
        let p = SystemParams::new(4, 1, 0).unwrap();
        let d = Value::Discrete;
        assert!(has_quorum(&[d(1), d(1), d(1), d(0)], &p));
        assert!(!has_quorum(&[d(1), d(1), d(0), d(0)], &p));
    }
}
