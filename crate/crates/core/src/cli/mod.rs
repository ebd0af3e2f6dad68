//! Scenario-driven batch runner behind the `rshrank` binary.

pub mod ops;
pub mod report;
pub mod scenario;

use std::path::PathBuf;
use std::time::Instant;

use clap::Parser;

use crate::error::{Error, Result};
use report::{Report, Status, TaskReport};
use scenario::Scenario;

#[derive(Debug, Clone, Parser)]
#[command(name = "rshrank", about = "Run rank-realization scenarios and write verification reports")]
pub struct CliArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    pub scenario: PathBuf,
    /// Where to write the JSON report; stdout when omitted.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Directory for rank profile CSV files, one per producing task.
    #[arg(long)]
    pub csv_dir: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// `name=value`; may be repeated.
    #[arg(long = "tolerance")]
    pub tolerances: Vec<String>,
    #[arg(long, short)]
    pub verbose: bool,
}

/// Report plus CSV outputs keyed by task id.
pub struct RunOutput {
    pub report: Report,
    pub csv: Vec<(String, String)>,
}

/// Run every task of a scenario given as text.
pub fn run_scenario(text: &str, seed: Option<u64>, overrides: &[String], verbose: bool) -> Result<RunOutput> {
    let scenario = Scenario::build(Scenario::parse(text)?, seed, overrides)?;
    let mut tasks = Vec::new();
    let mut csv = Vec::new();
    for (i, task) in scenario.tasks.iter().enumerate() {
        let clock = Instant::now();
        let result = ops::run_task(&scenario, task, i);
        let elapsed_ms = clock.elapsed().as_secs_f64() * 1e3;
        let (status, margins, witnesses) = match result {
            Ok(o) => {
                if let Some(c) = o.csv {
                    csv.push((task.id.clone(), c));
                }
                (if o.passed { Status::Pass } else { Status::Fail }, o.margins, o.witnesses)
            }
            Err(e @ Error::Scenario(_)) => return Err(e),
            Err(e) => (Status::Error, Vec::new(), vec![e.to_string()]),
        };
        let observed = status == Status::Pass;
        if verbose {
            eprintln!("[{}] {} {:?} in {:.1} ms", task.id, task.op, status, elapsed_ms);
        }
        tasks.push(TaskReport {
            id: task.id.clone(),
            op: task.op.clone(),
            anchor: ops::anchor(&task.op).to_string(),
            status,
            expected_passed: task.expect.passed,
            met_expectation: observed == task.expect.passed,
            margins,
            witnesses,
            elapsed_ms,
        });
    }
    let report = Report {
        scenario: scenario.name.clone(),
        seed: scenario.seed,
        passed: tasks.iter().all(|t| t.met_expectation),
        tasks,
    };
    Ok(RunOutput { report, csv })
}

/// Exit code: 0 when every expectation holds, 1 on task failures, 2 on
/// unreadable or invalid scenarios.
pub fn main_with(args: &CliArgs) -> i32 {
    let text = match std::fs::read_to_string(&args.scenario) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {}: {e}", args.scenario.display());
            return 2;
        }
    };
    let out = match run_scenario(&text, args.seed, &args.tolerances, args.verbose) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("{}: {e}", args.scenario.display());
            return 2;
        }
    };
    let json = out.report.to_json();
    match &args.report {
        Some(p) => {
            if let Err(e) = std::fs::write(p, &json) {
                eprintln!("cannot write {}: {e}", p.display());
                return 2;
            }
        }
        None => print!("{json}"),
    }
    if let Some(dir) = &args.csv_dir {
        if let Err(e) = std::fs::create_dir_all(dir) {
            eprintln!("cannot create {}: {e}", dir.display());
            return 2;
        }
        for (id, body) in &out.csv {
            let p = dir.join(format!("{id}.csv"));
            if let Err(e) = std::fs::write(&p, body) {
                eprintln!("cannot write {}: {e}", p.display());
                return 2;
            }
        }
    }
    for t in out.report.tasks.iter().filter(|t| !t.met_expectation) {
        eprintln!("task {} ({}) did not meet its expectation: {:?}", t.id, t.op, t.witnesses);
    }
    if out.report.passed {
        0
    } else {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_task_list() {
        let out = run_scenario("", None, &[], false).unwrap();
        assert!(out.report.passed);
        assert!(out.report.tasks.is_empty());
    }

    #[test]
    fn parse_errors_carry_location() {
        let Err(Error::Scenario(msg)) = run_scenario("seed = [", None, &[], false) else {
            panic!("expected a scenario error");
        };
        assert!(msg.contains("line 1"), "{msg}");
    }

    #[test]
    fn dimbound_failure_is_reported() {
        let text = r#"
[spaces.iv]
kind = "interval"
a = 0.0
b = 1.0
segments = 4

[rsh.small]
stages = [{ space = "iv", size = 6 }]

[[tasks]]
id = "bound"
op = "check_dimbound"
args = { rsh = "small", eps = 0.25 }
"#;
        let out = run_scenario(text, None, &[], false).unwrap();
        assert!(!out.report.passed);
        assert_eq!(out.report.tasks[0].margins[0].value, -7.625);
    }
}
