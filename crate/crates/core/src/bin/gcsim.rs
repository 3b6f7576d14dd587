use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use gradecast_core::consensus::ConsensusVariant;
use gradecast_core::oracle::{gradecast_exhaustive, oracle_exhaustive, OracleOptions, OracleVerdict};
use gradecast_core::report::{report_text, write_artifacts, write_atomic};
use gradecast_core::scenario::{run_scenario, Scenario};
use gradecast_core::sweep::{run_sweep, sweep_csv, Axis};
use gradecast_core::SystemParams;

const EXIT_OK: u8 = 0;
const EXIT_VIOLATION: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "gcsim", version, about = "Gradecast consensus simulator and checker")]
struct Cli {
    /// Output directory; each run writes into a subdirectory named after
    /// the scenario.
    #[arg(long, global = true, env = "GCSIM_OUT_DIR", default_value = "gcsim-out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file.
    Run { scenario: PathBuf },
    /// Run the cross product of axis values over a template scenario.
    Sweep {
        template: PathBuf,
        /// `key=v1,v2,...`; repeat for more axes.
        #[arg(long = "axis", required = true)]
        axes: Vec<String>,
    },
    /// Exhaustively explore consensus executions with one corrupted node.
    Oracle {
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        t: usize,
        #[arg(long, default_value_t = 2)]
        domain: u32,
        #[arg(long, value_enum, default_value_t = VariantArg::Correct)]
        variant: VariantArg,
        /// Also check the gradecast properties over every corrupted-leader
        /// and corrupted-echoer strategy.
        #[arg(long)]
        gradecast: bool,
        /// Check that both broken variants are caught and the real
        /// protocol is clean.
        #[arg(long)]
        self_test: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Correct,
    WeakBreak,
    NoBadUpdate,
}

impl From<VariantArg> for ConsensusVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Correct => ConsensusVariant::Correct,
            VariantArg::WeakBreak => ConsensusVariant::WeakBreak,
            VariantArg::NoBadUpdate => ConsensusVariant::NoBadUpdate,
        }
    }
}

fn config_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("config error: {msg}");
    ExitCode::from(EXIT_CONFIG)
}

fn cmd_run(path: &Path, out: &Path) -> ExitCode {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return config_error(format!("{}: {e}", path.display())),
    };
    let scenario = match Scenario::from_json_str(&text) {
        Ok(s) => s,
        Err(e) => return config_error(e),
    };
    let result = match run_scenario(&scenario) {
        Ok(r) => r,
        Err(e) => return config_error(e),
    };
    let dir = out.join(&scenario.name);
    if let Err(e) = write_artifacts(&dir, &result) {
        eprintln!("cannot write artifacts to {}: {e}", dir.display());
        return ExitCode::from(EXIT_CONFIG);
    }
    print!("{}", report_text(&result));
    println!("artifacts  {}", dir.display());
    if result.passed() {
        ExitCode::from(EXIT_OK)
    } else {
        for c in result.checks.iter().filter(|c| !c.pass) {
            eprintln!("violation: {} {} (measured {}, bound {})", c.id, c.description, c.measured, c.bound);
        }
        ExitCode::from(EXIT_VIOLATION)
    }
}

fn cmd_sweep(template: &Path, axes: &[String], out: &Path) -> ExitCode {
    let text = match fs::read_to_string(template) {
        Ok(t) => t,
        Err(e) => return config_error(format!("{}: {e}", template.display())),
    };
    let template: serde_json::Value = match serde_json::from_str(&text) {
        Ok(v) => v,
        Err(e) => return config_error(format!("template: {e}")),
    };
    if !template.is_object() {
        return config_error("template must be a JSON object");
    }
    let axes: Vec<Axis> = match axes.iter().map(|a| Axis::parse(a)).collect() {
        Ok(a) => a,
        Err(e) => return config_error(e),
    };
    let rows = run_sweep(&template, &axes);
    let csv = match sweep_csv(&axes, &rows) {
        Ok(c) => c,
        Err(e) => return config_error(e),
    };
    let path = out.join("sweep.csv");
    if let Err(e) = write_atomic(&path, csv.as_bytes()) {
        eprintln!("cannot write {}: {e}", path.display());
        return ExitCode::from(EXIT_CONFIG);
    }
    let count = |s: &str| rows.iter().filter(|r| r.status == s).count();
    println!(
        "{} runs: {} ok, {} violation, {} error -> {}",
        rows.len(),
        count("ok"),
        count("violation"),
        count("error"),
        path.display()
    );
    for r in rows.iter().filter(|r| r.status == "error") {
        eprintln!("row {}: {}", r.index, r.error);
    }
    if count("violation") > 0 {
        ExitCode::from(EXIT_VIOLATION)
    } else if count("ok") == 0 {
        ExitCode::from(EXIT_CONFIG)
    } else {
        ExitCode::from(EXIT_OK)
    }
}

fn print_verdict(v: &OracleVerdict) {
    println!(
        "oracle n={} t={} domain={} variant={:?}: {} input assignments, {} states, {} terminal worlds, {} violation kinds",
        v.n,
        v.t,
        v.domain,
        v.variant,
        v.runs,
        v.states,
        v.terminals,
        v.violations.len()
    );
    for x in &v.violations {
        println!(
            "  {} with inputs {:?} (corrupted {:?}, {} worlds), e.g. {}",
            x.property, x.inputs, x.corrupted, x.count, x.example
        );
    }
}

fn cmd_oracle(n: usize, t: usize, domain: u32, variant: ConsensusVariant, gradecast: bool, self_test: bool, out: &Path) -> ExitCode {
    let params = match SystemParams::new(n, t, 0) {
        Ok(p) => p,
        Err(e) => return config_error(e),
    };
    let mut report = serde_json::Map::new();
    let mut ok = true;
    if gradecast || self_test {
        match gradecast_exhaustive(n, t, domain) {
            Ok(g) => {
                println!(
                    "gradecast: {} corrupted-leader runs, {} corrupted-echoer runs, {} violations",
                    g.leader_runs, g.echoer_runs, g.violations
                );
                for e in &g.examples {
                    println!("  {e}");
                }
                ok &= g.ok();
                report.insert("gradecast".into(), serde_json::to_value(&g).expect("serializable"));
            }
            Err(e) => return config_error(e),
        }
    }
    let variants: Vec<ConsensusVariant> = if self_test {
        vec![ConsensusVariant::Correct, ConsensusVariant::WeakBreak, ConsensusVariant::NoBadUpdate]
    } else {
        vec![variant]
    };
    let mut verdicts = Vec::new();
    for v in variants {
        let options = OracleOptions {
            variant: v,
            stop_at_first: self_test && v != ConsensusVariant::Correct,
            ..OracleOptions::default()
        };
        let verdict = match oracle_exhaustive(params, domain, &options) {
            Ok(verdict) => verdict,
            Err(e) => return config_error(e),
        };
        print_verdict(&verdict);
        if self_test && v != ConsensusVariant::Correct {
            if verdict.ok() {
                println!("  self-test: broken variant {v:?} was NOT caught");
                ok = false;
            } else {
                println!("  self-test: broken variant {v:?} caught");
            }
        } else {
            ok &= verdict.ok();
        }
        verdicts.push(verdict);
    }
    report.insert("consensus".into(), serde_json::to_value(&verdicts).expect("serializable"));
    let path = out.join("oracle.json");
    let body = serde_json::to_string_pretty(&serde_json::Value::Object(report)).expect("serializable");
    if let Err(e) = write_atomic(&path, body.as_bytes()) {
        eprintln!("cannot write {}: {e}", path.display());
        return ExitCode::from(EXIT_CONFIG);
    }
    ExitCode::from(if ok { EXIT_OK } else { EXIT_VIOLATION })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run { scenario } => cmd_run(scenario, &cli.out),
        Command::Sweep { template, axes } => cmd_sweep(template, axes, &cli.out),
        Command::Oracle {
            n,
            t,
            domain,
            variant,
            gradecast,
            self_test,
        } => cmd_oracle(*n, *t, *domain, (*variant).into(), *gradecast, *self_test, &cli.out),
    }
}
