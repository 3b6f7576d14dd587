//! Cross-product sweeps over a scenario template.

use rayon::prelude::*;
use serde_json::{Map, Value as Json};

use crate::scenario::{run_scenario, Scenario};

/// One swept parameter and its values, parsed from `key=v1,v2,...`.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub key: String,
    pub values: Vec<Json>,
}

impl Axis {
    pub fn parse(spec: &str) -> Result<Axis, String> {
        let (key, values) = spec
            .split_once('=')
            .ok_or_else(|| format!("axis {spec:?} must look like key=v1,v2"))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(format!("axis {spec:?} has an empty key"));
        }
        let values: Vec<Json> = values
            .split(',')
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .map(|v| serde_json::from_str(v).unwrap_or_else(|_| Json::String(v.to_string())))
            .collect();
        if values.is_empty() {
            return Err(format!("axis {key:?} has no values"));
        }
        Ok(Axis {
            key: key.to_string(),
            values,
        })
    }
}

/// Every combination of axis values, first axis varying slowest.
pub fn cross_product(axes: &[Axis]) -> Vec<Vec<(String, Json)>> {
    let mut out: Vec<Vec<(String, Json)>> = vec![Vec::new()];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.values.iter().map(move |v| {
                    let mut row = prefix.clone();
                    row.push((axis.key.clone(), v.clone()));
                    row
                })
            })
            .collect();
    }
    out
}

fn adversary_object(current: Option<&Json>) -> Map<String, Json> {
    match current {
        Some(Json::Object(m)) => m.clone(),
        Some(Json::String(name)) => {
            let mut m = Map::new();
            m.insert("name".into(), Json::String(name.clone()));
            m
        }
        _ => {
            let mut m = Map::new();
            m.insert("name".into(), Json::String("silent".into()));
            m
        }
    }
}

/// Applies one combination of axis values to the template.
pub fn instantiate(template: &Json, assignment: &[(String, Json)]) -> Json {
    let mut obj = template.as_object().cloned().unwrap_or_default();
    for (key, value) in assignment {
        match key.as_str() {
            "adversary" => {
                let mut adv = adversary_object(obj.get("adversary"));
                match value {
                    Json::Object(_) => {
                        obj.insert("adversary".into(), value.clone());
                        continue;
                    }
                    other => {
                        adv.insert("name".into(), other.clone());
                        adv.remove("params");
                    }
                }
                obj.insert("adversary".into(), Json::Object(adv));
            }
            "seed" => {
                let mut adv = adversary_object(obj.get("adversary"));
                adv.insert("seed".into(), value.clone());
                obj.insert("adversary".into(), Json::Object(adv));
            }
            "f" => {
                obj.remove("corrupted");
                obj.insert(key.clone(), value.clone());
            }
            _ => {
                obj.insert(key.clone(), value.clone());
            }
        }
    }
    if assignment.iter().any(|(k, _)| k == "n" || k == "t") && !assignment.iter().any(|(k, _)| k == "name") {
        obj.remove("name");
    }
    Json::Object(obj)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub index: usize,
    pub assignment: Vec<(String, Json)>,
    /// `ok`, `violation` or `error`.
    pub status: String,
    pub n: Option<usize>,
    pub t: Option<usize>,
    pub f: Option<usize>,
    pub protocol: String,
    pub adversary: String,
    pub rounds: u64,
    pub iterations: u32,
    pub total_iterations: Option<u32>,
    pub honest_messages: u64,
    pub adversary_messages: u64,
    pub ticks: u64,
    pub failed_checks: Vec<String>,
    pub error: String,
}

impl SweepRow {
    /// Honest messages divided by `n^3`.
    pub fn messages_per_n3(&self) -> Option<f64> {
        self.n.map(|n| self.honest_messages as f64 / (n as f64).powi(3))
    }
}

fn run_one(index: usize, template: &Json, assignment: Vec<(String, Json)>) -> SweepRow {
    let mut row = SweepRow {
        index,
        assignment,
        status: "error".into(),
        n: None,
        t: None,
        f: None,
        protocol: String::new(),
        adversary: String::new(),
        rounds: 0,
        iterations: 0,
        total_iterations: None,
        honest_messages: 0,
        adversary_messages: 0,
        ticks: 0,
        failed_checks: Vec::new(),
        error: String::new(),
    };
    let config = instantiate(template, &row.assignment);
    let scenario = match Scenario::from_json(config) {
        Ok(s) => s,
        Err(e) => {
            row.error = e.to_string();
            return row;
        }
    };
    row.n = Some(scenario.params.n);
    row.t = Some(scenario.params.t);
    row.f = Some(scenario.params.f);
    row.adversary = scenario.adversary.label();
    match run_scenario(&scenario) {
        Err(e) => row.error = e.to_string(),
        Ok(result) => {
            let s = &result.summary;
            row.protocol = s.protocol.clone();
            row.rounds = s.rounds;
            row.iterations = s.iterations;
            row.total_iterations = s.total_iterations;
            row.honest_messages = s.honest_messages;
            row.adversary_messages = s.adversary_messages;
            row.ticks = s.ticks;
            row.failed_checks = result.checks.iter().filter(|c| !c.pass).map(|c| c.id.clone()).collect();
            row.status = if row.failed_checks.is_empty() { "ok" } else { "violation" }.into();
        }
    }
    row
}

/// Runs every combination in parallel; rows come back in combination
/// order regardless of scheduling.
pub fn run_sweep(template: &Json, axes: &[Axis]) -> Vec<SweepRow> {
    let combos = cross_product(axes);
    combos
        .into_par_iter()
        .enumerate()
        .map(|(i, a)| run_one(i, template, a))
        .collect()
}

pub fn sweep_csv(axes: &[Axis], rows: &[SweepRow]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = vec!["index".into()];
    header.extend(axes.iter().map(|a| format!("axis_{}", a.key)));
    header.extend(
        [
            "status",
            "n",
            "t",
            "f",
            "protocol",
            "adversary",
            "rounds",
            "iterations",
            "total_iterations",
            "honest_messages",
            "messages_per_n3",
            "adversary_messages",
            "ticks",
            "failed_checks",
            "error",
        ]
        .map(String::from),
    );
    w.write_record(&header)?;
    let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        let mut rec: Vec<String> = vec![r.index.to_string()];
        for (_, v) in &r.assignment {
            rec.push(match v {
                Json::String(s) => s.clone(),
                other => other.to_string(),
            });
        }
        rec.extend([
            r.status.clone(),
            opt(r.n),
            opt(r.t),
            opt(r.f),
            r.protocol.clone(),
            r.adversary.clone(),
            r.rounds.to_string(),
            r.iterations.to_string(),
            r.total_iterations.map(|x| x.to_string()).unwrap_or_default(),
            r.honest_messages.to_string(),
            r.messages_per_n3().map(|x| format!("{x:.6}")).unwrap_or_default(),
            r.adversary_messages.to_string(),
            r.ticks.to_string(),
            r.failed_checks.join(" "),
            r.error.clone(),
        ]);
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn axis_parsing() {
        let a = Axis::parse("n=4,7").unwrap();
        assert_eq!(a.values, vec![json!(4), json!(7)]);
        let a = Axis::parse("adversary=silent,lie-rationing").unwrap();
        assert_eq!(a.values[1], json!("lie-rationing"));
        assert!(Axis::parse("n").is_err());
        assert!(Axis::parse("n=").is_err());
    }

    #[test]
    fn two_by_two_gives_four_rows() {
        let axes = [Axis::parse("n=4,7").unwrap(), Axis::parse("f=0,1").unwrap()];
        let rows = run_sweep(&json!({"t": 1, "protocol": "consensus"}), &axes);
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.status == "ok"), "{rows:?}");
    }

    #[test]
    fn bad_rows_are_marked_and_the_sweep_continues() {
        let axes = [Axis::parse("n=3,4").unwrap()];
        let rows = run_sweep(&json!({"t": 1, "protocol": "consensus"}), &axes);
        assert_eq!(rows[0].status, "error");
        assert_eq!(rows[1].status, "ok");
    }

    #[test]
    fn seed_axis_sets_the_adversary_seed() {
        let v = instantiate(&json!({"adversary": "random"}), &[("seed".into(), json!(9))]);
        assert_eq!(v["adversary"], json!({"name": "random", "seed": 9}));
    }
}
