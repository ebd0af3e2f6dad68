use serde::Serialize;

use crate::realize::ProfileRow;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Margin {
    pub name: String,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Error,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TaskReport {
    pub id: String,
    pub op: String,
    pub anchor: String,
    pub status: Status,
    pub expected_passed: bool,
    pub met_expectation: bool,
    pub margins: Vec<Margin>,
    pub witnesses: Vec<String>,
    pub elapsed_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub scenario: String,
    pub seed: u64,
    pub passed: bool,
    pub tasks: Vec<TaskReport>,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// JSON with every `elapsed_ms` zeroed, for reproducibility comparisons.
    pub fn to_json_without_timing(&self) -> String {
        let mut r = self.clone();
        for t in &mut r.tasks {
            t.elapsed_ms = 0.0;
        }
        r.to_json()
    }
}

/// `stage, x0.., n, rank, rank/n, h, margin`.
pub fn profile_csv(rows: &[ProfileRow]) -> String {
    let width = rows.iter().map(|r| r.coords.len()).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["stage".to_string()];
    header.extend((0..width).map(|i| format!("x{i}")));
    header.extend(["n", "rank", "rank/n", "h", "margin"].map(String::from));
    w.write_record(&header).expect("in-memory csv");
    for r in rows {
        let mut rec = vec![r.stage.to_string()];
        rec.extend((0..width).map(|i| r.coords.get(i).map(f64::to_string).unwrap_or_default()));
        rec.extend([r.n.to_string(), r.rank.to_string(), r.ratio.to_string(), r.h.to_string(), r.margin.to_string()]);
        w.write_record(&rec).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
}
