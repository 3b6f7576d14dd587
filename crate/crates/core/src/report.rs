//! Output artifacts of a run: JSON and text reports plus CSV traces.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::approx::report_csv;
use crate::checks::Check;
use crate::multi::records_csv;
use crate::scenario::{RunResult, Summary};
use crate::simnet::Trace;

/// Writes `contents` to `path` through a temporary file in the same
/// directory followed by a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

#[derive(Serialize)]
struct JsonReport<'a> {
    summary: &'a Summary,
    checks: &'a [Check],
}

pub fn report_json(result: &RunResult) -> String {
    serde_json::to_string_pretty(&JsonReport {
        summary: &result.summary,
        checks: &result.checks,
    })
    .expect("report serializes")
}

pub fn report_text(result: &RunResult) -> String {
    let s = &result.summary;
    let mut out = String::new();
    out.push_str(&format!("scenario   {}\n", s.name));
    out.push_str(&format!("protocol   {} (n={}, t={}, f={})\n", s.protocol, s.n, s.t, s.f));
    out.push_str(&format!("adversary  {}\n", s.adversary));
    if let Some(e) = &s.epsilon {
        out.push_str(&format!("epsilon    {e}\n"));
    }
    out.push_str(&format!("rounds     {}\n", s.rounds));
    out.push_str(&format!("iterations {}\n", s.iterations));
    if !s.iterations_per_instance.is_empty() {
        out.push_str(&format!("per instance {:?}\n", s.iterations_per_instance));
    }
    out.push_str(&format!(
        "messages   {} honest, {} adversarial\n",
        s.honest_messages, s.adversary_messages
    ));
    out.push_str(&format!("ticks      {}\n", s.ticks));
    if s.warnings > 0 {
        out.push_str(&format!("warnings   {}\n", s.warnings));
    }
    out.push_str("decisions\n");
    for (p, v) in &s.decisions {
        out.push_str(&format!("  {p} -> {v}\n"));
    }
    if !result.iterations.is_empty() {
        out.push_str("iteration ranges\n");
        for r in &result.iterations {
            out.push_str(&format!(
                "  r={} range {} -> {} NEW_r={} messages={}\n",
                r.iteration,
                crate::model::Value::Rational(r.range()),
                crate::model::Value::Rational(r.next_range()),
                r.new_r,
                r.messages
            ));
        }
    }
    out.push_str("checks\n");
    for c in &result.checks {
        out.push_str(&format!(
            "  [{}] {:<12} {} | measured {} | bound {}\n",
            if c.pass { "pass" } else { "FAIL" },
            c.id,
            c.description,
            c.measured,
            c.bound
        ));
    }
    out.push_str(&format!("result     {}\n", if result.passed() { "pass" } else { "FAIL" }));
    out
}

/// Per-tick CSV of all traces, with an instance column for sequences run
/// as separate simulations.
pub fn traces_csv(traces: &[Trace]) -> Result<String, csv::Error> {
    let mut out = String::new();
    for (i, trace) in traces.iter().enumerate() {
        let body = trace.to_csv()?;
        let mut lines = body.lines();
        let header = lines.next().unwrap_or("");
        if i == 0 {
            out.push_str("trace,");
            out.push_str(header);
            out.push('\n');
        }
        for line in lines {
            out.push_str(&format!("{},{line}\n", i + 1));
        }
    }
    Ok(out)
}

/// Files written for one run.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
}

/// Writes every artifact of `result` into `dir`.
pub fn write_artifacts(dir: &Path, result: &RunResult) -> io::Result<Artifacts> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let mut put = |name: &str, data: &[u8]| -> io::Result<()> {
        let path = dir.join(name);
        write_atomic(&path, data)?;
        files.push(path);
        Ok(())
    };
    let to_io = |e: csv::Error| io::Error::other(e.to_string());
    let trace_json = if result.traces.len() == 1 {
        serde_json::to_vec(&result.traces[0])
    } else {
        serde_json::to_vec(&result.traces)
    }
    .map_err(io::Error::other)?;
    put("trace.json", &trace_json)?;
    put("trace.csv", traces_csv(&result.traces).map_err(to_io)?.as_bytes())?;
    if !result.iterations.is_empty() {
        put("iterations.csv", report_csv(&result.iterations).map_err(to_io)?.as_bytes())?;
    }
    if !result.records.is_empty() {
        put("instances.csv", records_csv(&result.records).map_err(to_io)?.as_bytes())?;
    }
    put("report.json", report_json(result).as_bytes())?;
    put("report.txt", report_text(result).as_bytes())?;
    Ok(Artifacts {
        dir: dir.to_path_buf(),
        files,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.txt");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
