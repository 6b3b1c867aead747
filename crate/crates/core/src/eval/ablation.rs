//! Side-by-side per-task RMSE of two runs, as CSV and a grouped bar chart.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::chart::grouped_bar_svg;
use crate::eval::report::TaskColumn;
use crate::types::TaskLabel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub task: TaskLabel,
    pub a: f64,
    pub b: f64,
    /// `b − a`, mm.
    pub delta: f64,
    /// `100 (b − a) / a`; 0 when both are 0.
    pub delta_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ablation {
    pub label_a: String,
    pub label_b: String,
    pub rows: Vec<AblationRow>,
}

pub fn ablation_compare(a: &[TaskColumn], b: &[TaskColumn], label_a: &str, label_b: &str) -> Result<Ablation> {
    let ta: Vec<TaskLabel> = a.iter().map(|c| c.task).collect();
    let tb: Vec<TaskLabel> = b.iter().map(|c| c.task).collect();
    let only_a: Vec<&str> = ta.iter().filter(|t| !tb.contains(t)).map(|t| t.display_name()).collect();
    let only_b: Vec<&str> = tb.iter().filter(|t| !ta.contains(t)).map(|t| t.display_name()).collect();
    if !only_a.is_empty() || !only_b.is_empty() {
        return Err(Error::Report(format!(
            "task sets differ: only in {label_a}: [{}]; only in {label_b}: [{}]",
            only_a.join(", "),
            only_b.join(", ")
        )));
    }
    let mut rows: Vec<AblationRow> = a
        .iter()
        .map(|ca| {
            let cb = b.iter().find(|c| c.task == ca.task).expect("checked above");
            let (ra, rb) = (ca.stats.rmse, cb.stats.rmse);
            let delta = rb - ra;
            let delta_pct = if delta == 0.0 { 0.0 } else { 100.0 * delta / ra };
            AblationRow {
                task: ca.task,
                a: ra,
                b: rb,
                delta,
                delta_pct,
            }
        })
        .collect();
    rows.sort_by_key(|r| r.task.report_rank());
    Ok(Ablation {
        label_a: label_a.into(),
        label_b: label_b.into(),
        rows,
    })
}

impl Ablation {
    pub fn to_csv(&self) -> String {
        let mut out = format!("Task,{},{},Delta,Delta (%)\n", self.label_a, self.label_b);
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:.1},{:.1},{:.1},{:.1}",
                r.task.display_name(),
                r.a,
                r.b,
                r.delta,
                r.delta_pct
            );
        }
        out
    }

    /// Grouped bars: one group per task, one bar per run, RMSE in mm.
    pub fn to_svg(&self) -> String {
        let cats: Vec<&str> = self.rows.iter().map(|r| r.task.display_name()).collect();
        grouped_bar_svg(
            "RMSE per task (mm)",
            &cats,
            &[
                (self.label_a.as_str(), self.rows.iter().map(|r| r.a).collect()),
                (self.label_b.as_str(), self.rows.iter().map(|r| r.b).collect()),
            ],
        )
    }
}
