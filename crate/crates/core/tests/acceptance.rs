//! Acceptance run: one pass/fail line per criterion.

use std::process::ExitCode;
use std::time::Instant;

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value as Json};

use gradecast_core::adversary::AdversarySpec;
use gradecast_core::checks::{k_iteration_factor, theorem_iteration_bound, Check};
use gradecast_core::consensus::ConsensusVariant;
use gradecast_core::oracle::{gradecast_exhaustive, oracle_exhaustive, OracleOptions};
use gradecast_core::scenario::{run_scenario, RunResult, Scenario, UNSYNC_TICK_CONSTANT};
use gradecast_core::sweep::{run_sweep, Axis};
use gradecast_core::SystemParams;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Scenario-file form of a built-in strategy: `{"name", "params"}`.
fn adversary_json(spec: &AdversarySpec) -> Json {
    let mut params = serde_json::to_value(spec).expect("spec serializes");
    let name = params
        .as_object_mut()
        .and_then(|m| m.remove("name"))
        .expect("tagged by name");
    json!({"name": name, "params": params})
}

fn run(config: Json) -> RunResult {
    let scenario = Scenario::from_json(config.clone()).unwrap_or_else(|e| panic!("{e}: {config}"));
    run_scenario(&scenario).unwrap_or_else(|e| panic!("{e}: {config}"))
}

fn failing(checks: &[Check]) -> Vec<String> {
    checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| format!("{} ({} vs {})", c.id, c.measured, c.bound))
        .collect()
}

/// Every run of criteria 3 to 9, kept for the BAD soundness sweep.
#[derive(Default)]
struct Ledger {
    runs: Vec<(String, Vec<Check>)>,
}

impl Ledger {
    fn keep(&mut self, label: String, result: &RunResult) {
        self.runs.push((label, result.checks.clone()));
    }
}

fn criterion_1() -> Outcome {
    let v = gradecast_exhaustive(4, 1, 2).expect("valid parameters");
    outcome(
        v.ok() && v.leader_runs > 0 && v.echoer_runs > 0,
        format!(
            "{} corrupted-leader and {} corrupted-echoer runs, {} property violations",
            v.leader_runs, v.echoer_runs, v.violations
        ),
    )
}

fn criterion_2(bad_sound: &mut Vec<String>) -> Outcome {
    let params = SystemParams::new(4, 1, 0).expect("valid");
    let correct = oracle_exhaustive(params, 2, &OracleOptions::default()).expect("fits");
    bad_sound.extend(
        correct
            .violations
            .iter()
            .filter(|v| v.property == "bad-soundness")
            .map(|v| format!("oracle inputs {:?}", v.inputs)),
    );
    let mut mutants = Vec::new();
    for variant in [ConsensusVariant::WeakBreak, ConsensusVariant::NoBadUpdate] {
        let options = OracleOptions {
            variant,
            stop_at_first: true,
            ..OracleOptions::default()
        };
        let v = oracle_exhaustive(params, 2, &options).expect("fits");
        mutants.push((variant, v.violations.len()));
    }

    let mut random_violations = 0;
    let mut random_runs = 0;
    for seed in 0..10_000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = 1 + (seed % 2) as usize;
        let inputs: Vec<i64> = (0..7).map(|_| rng.gen_range(0..2)).collect();
        let result = run(json!({
            "n": 7, "t": 2, "f": f,
            "protocol": "consensus",
            "inputs": inputs,
            "adversary": {"name": "random", "seed": seed},
        }));
        random_runs += 1;
        if !result.passed() {
            random_violations += 1;
            if random_violations <= 3 {
                eprintln!("  seed {seed}: {:?}", failing(&result.checks));
            }
        }
        if result.checks.iter().any(|c| c.id == "I3" && !c.pass) {
            bad_sound.push(format!("random seed {seed}"));
        }
    }
    let mutants_caught = mutants.iter().all(|(_, count)| *count > 0);
    outcome(
        correct.ok() && mutants_caught && random_violations == 0,
        format!(
            "oracle: {} states, {} terminal worlds, {} violations; mutants {:?}; {random_runs} random adversaries at n=7 t=2: {random_violations} violations",
            correct.states,
            correct.terminals,
            correct.violations.len(),
            mutants
                .iter()
                .map(|(v, c)| format!("{v:?}: {c} violation kinds"))
                .collect::<Vec<_>>()
        ),
    )
}

fn criterion_3(ledger: &mut Ledger) -> Outcome {
    let adversaries = [
        AdversarySpec::Silent,
        AdversarySpec::CrashAt { round: 1 },
        AdversarySpec::EquivocateOnce { targets: None },
        AdversarySpec::LieRationing { per_iteration: 1 },
    ];
    let inputs = [
        json!({"pattern": "unanimous", "value": 0}),
        json!({"pattern": "unanimous", "value": 1}),
        json!({"pattern": "quorum", "value": 1, "other": 0}),
    ];
    let (n, t) = (7usize, 2usize);
    let mut worst: Vec<String> = Vec::new();
    let mut ok = true;
    let mut silent_exact = None;
    for adv in &adversaries {
        for f in 0..=t {
            let bound = 3 * (f + 2).min(t + 1) as u64;
            let mut max_rounds = 0;
            for input in &inputs {
                let result = run(json!({
                    "n": n, "t": t, "f": f, "protocol": "consensus",
                    "inputs": input, "adversary": adversary_json(adv),
                }));
                ok &= result.passed();
                max_rounds = max_rounds.max(result.summary.rounds);
                if matches!(adv, AdversarySpec::Silent) && f == 0 {
                    silent_exact = Some(silent_exact.unwrap_or(true) && result.summary.rounds == 6);
                }
                ledger.keep(format!("c3 {} f={f}", adv.label()), &result);
            }
            ok &= max_rounds <= bound;
            worst.push(format!("{} f={f}: {max_rounds}/{bound}", adv.label()));
        }
    }
    let exact = silent_exact == Some(true);
    // Inputs without an (n-t)-quorum may need one more iteration.
    let mut split_worst = Vec::new();
    for f in 0..=t {
        let bound = 3 * (f + 3).min(t + 1) as u64;
        let mut max_rounds = 0;
        for adv in &adversaries {
            let result = run(json!({
                "n": n, "t": t, "f": f, "protocol": "consensus",
                "inputs": {"pattern": "split", "low": 0, "high": 1}, "adversary": adversary_json(adv),
            }));
            ok &= result.passed() && result.summary.rounds <= bound;
            max_rounds = max_rounds.max(result.summary.rounds);
            ledger.keep(format!("c3 split {} f={f}", adv.label()), &result);
        }
        split_worst.push(format!("f={f}: {max_rounds}/{bound}"));
    }
    outcome(
        ok && exact,
        format!(
            "rounds/bound {}; silent f=0 exactly 6: {exact}; split inputs against 3*min(f+3,t+1): {}",
            worst.join(", "),
            split_worst.join(", ")
        ),
    )
}

/// Approx runs shared by criteria 4, 5 and 6.
fn approx_suite(ledger: &mut Ledger) -> Vec<(String, RunResult)> {
    let mut out = Vec::new();
    for (n, t) in [(4usize, 1usize), (7, 2), (13, 4), (16, 5), (19, 6)] {
        for f in 0..=t {
            for (i, adv) in AdversarySpec::builtins(1000 + f as u64).iter().enumerate() {
                if f == 0 && i > 0 {
                    continue;
                }
                for inputs in [
                    json!({"pattern": "spread", "low": 0, "high": 1}),
                    json!({"pattern": "split", "low": "-3/2", "high": 7}),
                ] {
                    let label = format!("approx n={n} t={t} f={f} {} {}", adv.label(), inputs["pattern"]);
                    let result = run(json!({
                        "n": n, "t": t, "f": f, "protocol": "approx",
                        "inputs": inputs, "adversary": adversary_json(adv), "epsilon": "auto",
                    }));
                    ledger.keep(label.clone(), &result);
                    out.push((label, result));
                }
            }
        }
    }
    out
}

fn criterion_4(suite: &[(String, RunResult)]) -> Outcome {
    let mut iterations = 0;
    let mut zero_new = 0;
    let mut bad = Vec::new();
    for (label, result) in suite {
        let params = SystemParams::new(result.summary.n, result.summary.t, result.summary.f).expect("valid");
        for r in &result.iterations {
            iterations += 1;
            let holds = r.contraction_holds(&params);
            let zero_ok = r.new_r != 0 || r.next_range().is_zero();
            if r.new_r == 0 {
                zero_new += 1;
            }
            if !(holds && zero_ok) {
                bad.push(format!("{label} r={}", r.iteration));
            }
        }
    }
    outcome(
        bad.is_empty() && iterations > 0,
        format!(
            "{} runs, {iterations} iterations checked exactly ({zero_new} with NEW_r = 0), failures: {:?}",
            suite.len(),
            bad
        ),
    )
}

fn criterion_5(ledger: &mut Ledger) -> Outcome {
    let params = SystemParams::new(13, 4, 4).expect("valid");
    let mut lines = Vec::new();
    let mut ok = true;
    let mut checked = 0;
    for f in 1..=4usize {
        let result = run(json!({
            "n": 13, "t": 4, "f": f, "protocol": "approx",
            "inputs": {"pattern": "spread", "low": 0, "high": 1},
            "adversary": {"name": "lie-rationing", "params": {"per_iteration": 1}},
            "epsilon": "auto",
        }));
        ledger.keep(format!("c5 f={f}"), &result);
        let honest = 13 - f;
        for r in &result.iterations {
            if r.updaters != honest {
                break;
            }
            let bound = k_iteration_factor(&params, r.iteration);
            let holds = r.next_range() <= bound;
            ok &= holds;
            checked += 1;
            if f == 4 {
                lines.push(format!("k={}: {} <= {}", r.iteration, r.next_range(), bound));
            }
        }
    }
    outcome(ok && checked > 0, format!("{checked} iterations checked; f=4: {}", lines.join(", ")))
}

fn criterion_6(suite: &[(String, RunResult)]) -> Outcome {
    let mut ok = true;
    let mut lines = Vec::new();
    for n in [13usize, 16, 19] {
        let bound = theorem_iteration_bound(n);
        let runs: Vec<&RunResult> = suite.iter().map(|(_, r)| r).filter(|r| r.summary.n == n).collect();
        let worst = runs.iter().map(|r| r.summary.iterations).max().unwrap_or(0);
        ok &= !runs.is_empty() && runs.iter().all(|r| r.summary.completed && r.summary.iterations <= bound);
        lines.push(format!("n={n}: max {worst} <= {bound} over {} runs", runs.len()));
    }
    outcome(ok, lines.join(", "))
}

fn criterion_7() -> Outcome {
    let template = json!({"t": 1, "f": 0, "protocol": "consensus", "inputs": {"pattern": "unanimous", "value": 1}});
    let axes = [Axis::parse("n=4,7,10,13").expect("axis")];
    let rows = run_sweep(&template, &axes);
    let k = 2u64;
    let mut ok = rows.iter().all(|r| r.status == "ok" && r.iterations as u64 == k);
    let mut ratios = Vec::new();
    for r in &rows {
        let n = r.n.unwrap_or(0) as u64;
        ok &= r.honest_messages <= 3 * n.pow(3) * k;
        ratios.push(r.honest_messages as f64 / (n.pow(3) * k) as f64);
    }
    let max = ratios.iter().cloned().fold(0.0, f64::max);
    ok &= max <= 3.0;
    outcome(
        ok,
        format!(
            "k={k}: messages {:?}; count/(k n^3) = {:?} (bounded by 3)",
            rows.iter().map(|r| r.honest_messages).collect::<Vec<_>>(),
            ratios.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>()
        ),
    )
}

fn criterion_8(ledger: &mut Ledger) -> Outcome {
    let (n, t, ell) = (7usize, 2usize, 5u32);
    let mut ok = true;
    let mut worst_iter = 0;
    let mut worst_rounds = 0;
    let mut runs = 0;
    for f in 0..=t {
        for (i, adv) in AdversarySpec::builtins(77 + f as u64).iter().enumerate() {
            if f == 0 && i > 0 {
                continue;
            }
            for first in [json!({"pattern": "unanimous", "value": 1}), json!({"pattern": "quorum", "value": 0, "other": 1})] {
                let result = run(json!({
                    "n": n, "t": t, "f": f, "protocol": "multi", "ell": ell,
                    "inputs": first, "adversary": adversary_json(adv),
                }));
                runs += 1;
                ok &= result.passed();
                let it = result.summary.total_iterations.unwrap_or(u32::MAX);
                let rounds = result.summary.total_rounds.unwrap_or(u64::MAX);
                worst_iter = worst_iter.max(it);
                worst_rounds = worst_rounds.max(rounds);
                ok &= it <= t as u32 + 2 * ell && rounds <= 3 * t as u64 + 6 * ell as u64;
                if f == 0 {
                    ok &= result.summary.iterations_per_instance.iter().all(|&x| x == 2);
                }
                ledger.keep(format!("c8 {} f={f}", adv.label()), &result);
            }
        }
    }
    outcome(
        ok,
        format!("{runs} runs: max total iterations {worst_iter} <= 12, max total rounds {worst_rounds} <= 36; f=0 gives 2 per instance"),
    )
}

fn criterion_9(ledger: &mut Ledger) -> Outcome {
    let (n, t, ell) = (7usize, 2usize, 3u32);
    let mut ok = true;
    let mut lines = Vec::new();
    for delta in [1u64, 2] {
        let mut max_ratio: f64 = 0.0;
        let mut max_span = 0;
        let mut runs = 0;
        for f in 0..=t {
            for (i, adv) in AdversarySpec::builtins(500 + delta + f as u64).iter().enumerate() {
                if f == 0 && i > 0 {
                    continue;
                }
                for first in [json!({"pattern": "unanimous", "value": 1}), json!({"pattern": "split", "low": 0, "high": 1})] {
                    let result = run(json!({
                        "n": n, "t": t, "f": f, "protocol": "multi", "ell": ell,
                        "delta": delta, "offsets": "max-spread",
                        "inputs": first, "adversary": adversary_json(adv),
                    }));
                    runs += 1;
                    ok &= result.passed();
                    max_ratio = max_ratio.max(result.summary.tick_ratio.unwrap_or(f64::INFINITY));
                    for k in 1..=ell {
                        let ticks: Vec<u64> = result.records.iter().filter(|r| r.instance == k).map(|r| r.halt_tick).collect();
                        let span = ticks.iter().max().unwrap_or(&0) - ticks.iter().min().unwrap_or(&0);
                        max_span = max_span.max(span);
                    }
                    ledger.keep(format!("c9 delta={delta} {} f={f}", adv.label()), &result);
                }
            }
        }
        ok &= max_span <= 1 && max_ratio <= UNSYNC_TICK_CONSTANT as f64;
        lines.push(format!(
            "delta={delta}: {runs} runs, max halt span {max_span}, max ticks/(delta(l+t)) {max_ratio:.2}"
        ));
    }
    outcome(ok, format!("{}; C = {UNSYNC_TICK_CONSTANT}", lines.join("; ")))
}

fn criterion_10(ledger: &Ledger, extra: &[String]) -> Outcome {
    let mut offenders: Vec<String> = extra.to_vec();
    let mut checked = 0;
    for (label, checks) in &ledger.runs {
        for c in checks.iter().filter(|c| c.id == "I3" || c.id == "M3") {
            checked += 1;
            if !c.pass {
                offenders.push(label.clone());
            }
        }
    }
    outcome(
        offenders.is_empty() && checked > 0,
        format!(
            "{checked} soundness checks over {} scenario runs plus the oracle and random runs; offenders: {:?}",
            ledger.runs.len(),
            offenders
        ),
    )
}

fn main() -> ExitCode {
    let mut all = true;
    let mut ledger = Ledger::default();
    let mut extra_bad = Vec::new();
    let mut report = |id: u32, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        println!(
            "criterion {id:>2} {name}: {} ({:.1}s) {}",
            if o.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            o.detail
        );
        all &= o.pass;
    };
    report(1, "gradecast properties (exhaustive)", &mut criterion_1);
    report(2, "consensus oracle and random adversaries", &mut || criterion_2(&mut extra_bad));
    report(3, "early stopping", &mut || criterion_3(&mut ledger));
    let suite = approx_suite(&mut ledger);
    report(4, "contraction exactness", &mut || criterion_4(&suite));
    report(5, "k-iteration bound", &mut || criterion_5(&mut ledger));
    report(6, "iteration-count theorem", &mut || criterion_6(&suite));
    report(7, "message complexity", &mut criterion_7);
    report(8, "multi-consensus synchronized", &mut || criterion_8(&mut ledger));
    report(9, "multi-consensus unsynchronized", &mut || criterion_9(&mut ledger));
    report(10, "BAD soundness", &mut || criterion_10(&ledger, &extra_bad));
    if all {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: some criteria FAIL");
        ExitCode::FAILURE
    }
}
