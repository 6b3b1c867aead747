//! Per-task and per-body-part error tables.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::chart::grouped_bar_svg;
use crate::eval::metrics::{summarize, ErrorStats, JointErrorMatrix};
use crate::types::{BodyPart, JointId, TaskLabel, JOINT_COUNT};

pub const TASK_TABLE_FILE: &str = "table_tasks.csv";
pub const PART_TABLE_FILE: &str = "table_parts.csv";
pub const REPORT_JSON_FILE: &str = "report.json";
pub const TASK_CHART_FILE: &str = "chart_tasks.svg";
pub const PART_CHART_FILE: &str = "chart_parts.svg";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskColumn {
    pub task: TaskLabel,
    pub stats: ErrorStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartRows {
    pub part: BodyPart,
    pub tasks: Vec<TaskColumn>,
    /// Unweighted means over the task rows.
    pub average_median: f64,
    pub average_std: f64,
    /// Pooled over all this part's frames and joints.
    pub pooled: ErrorStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub overall: ErrorStats,
    /// Mean over joints of each joint's RMSE.
    pub mean_joint_rmse: f64,
    pub per_joint_rmse: Vec<(JointId, f64)>,
    pub tasks: Vec<TaskColumn>,
    pub parts: Vec<PartRows>,
    pub split_policy: String,
}

/// Frame indices per labeled task (Unknown excluded), in report order.
fn task_frames(labels: &[TaskLabel]) -> BTreeMap<(usize, TaskLabel), Vec<usize>> {
    let mut out: BTreeMap<(usize, TaskLabel), Vec<usize>> = BTreeMap::new();
    for (f, &t) in labels.iter().enumerate() {
        if t != TaskLabel::Unknown {
            out.entry((t.report_rank(), t)).or_default().push(f);
        }
    }
    out
}

fn gather(errors: &JointErrorMatrix, frames: &[usize], joints: &[usize]) -> Vec<f64> {
    frames
        .iter()
        .flat_map(|&f| joints.iter().map(move |&j| errors.get(f, j)))
        .collect()
}

fn check_labels(errors: &JointErrorMatrix, labels: &[TaskLabel]) -> Result<()> {
    if labels.len() != errors.frames() {
        return Err(Error::Alignment(format!(
            "{} labels for {} frames",
            labels.len(),
            errors.frames()
        )));
    }
    if labels.iter().all(|t| *t == TaskLabel::Unknown) {
        return Err(Error::Data("no frame carries a task label".into()));
    }
    Ok(())
}

/// RMSE, median and std over all joints for every task present.
pub fn per_task_report(errors: &JointErrorMatrix, labels: &[TaskLabel]) -> Result<Vec<TaskColumn>> {
    check_labels(errors, labels)?;
    let all: Vec<usize> = (0..JOINT_COUNT).collect();
    task_frames(labels)
        .into_iter()
        .map(|((_, task), frames)| {
            Ok(TaskColumn {
                task,
                stats: summarize(&gather(errors, &frames, &all))?,
            })
        })
        .collect()
}

/// Median and std per body part and task, with per-part averages.
pub fn per_part_report(errors: &JointErrorMatrix, labels: &[TaskLabel]) -> Result<Vec<PartRows>> {
    check_labels(errors, labels)?;
    let tasks = task_frames(labels);
    let labeled: Vec<usize> = tasks.values().flatten().copied().collect();
    BodyPart::ALL
        .iter()
        .map(|&part| {
            let joints: Vec<usize> = part.joints().iter().map(|j| j.index()).collect();
            let cols = tasks
                .iter()
                .map(|((_, task), frames)| {
                    Ok(TaskColumn {
                        task: *task,
                        stats: summarize(&gather(errors, frames, &joints))?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let n = cols.len() as f64;
            Ok(PartRows {
                part,
                average_median: cols.iter().map(|c| c.stats.median).sum::<f64>() / n,
                average_std: cols.iter().map(|c| c.stats.std).sum::<f64>() / n,
                pooled: summarize(&gather(errors, &labeled, &joints))?,
                tasks: cols,
            })
        })
        .collect()
}

pub fn build_report(errors: &JointErrorMatrix, labels: &[TaskLabel]) -> Result<ErrorReport> {
    let tasks = per_task_report(errors, labels)?;
    let parts = per_part_report(errors, labels)?;
    let labeled: Vec<usize> = task_frames(labels).into_values().flatten().collect();
    let all: Vec<usize> = (0..JOINT_COUNT).collect();
    let overall = summarize(&gather(errors, &labeled, &all))?;
    let per_joint_rmse = JointId::ALL
        .iter()
        .map(|j| Ok((*j, summarize(&gather(errors, &labeled, &[j.index()]))?.rmse)))
        .collect::<Result<Vec<_>>>()?;
    let mean_joint_rmse = per_joint_rmse.iter().map(|(_, r)| r).sum::<f64>() / JOINT_COUNT as f64;
    Ok(ErrorReport {
        overall,
        mean_joint_rmse,
        per_joint_rmse,
        tasks,
        parts,
        split_policy: "chronological per recording (last 20% of each task segment)".into(),
    })
}

fn mm(v: f64) -> String {
    format!("{v:.1}")
}

/// Task table: one column per task, rows `RMSE`, `Median_error`,
/// `Std. Dev. Error`.
pub fn task_table_csv(tasks: &[TaskColumn]) -> String {
    let mut out = String::from("Task");
    for c in tasks {
        out.push(',');
        out.push_str(c.task.display_name());
    }
    out.push('\n');
    let rows: [(&str, fn(&ErrorStats) -> f64); 3] = [
        ("RMSE", |s| s.rmse),
        ("Median_error", |s| s.median),
        ("Std. Dev. Error", |s| s.std),
    ];
    for (name, get) in rows {
        out.push_str(name);
        for c in tasks {
            out.push(',');
            out.push_str(&mm(get(&c.stats)));
        }
        out.push('\n');
    }
    out
}

/// Part table: `Part,Task,Median Error,Std. Dev. Error`, each part's task
/// rows followed by an `Average` row.
pub fn part_table_csv(parts: &[PartRows]) -> String {
    let mut out = String::from("Part,Task,Median Error,Std. Dev. Error\n");
    for p in parts {
        for c in &p.tasks {
            out.push_str(&format!(
                "{},{},{},{}\n",
                p.part.name(),
                c.task.display_name(),
                mm(c.stats.median),
                mm(c.stats.std)
            ));
        }
        out.push_str(&format!("{},Average,{},{}\n", p.part.name(), mm(p.average_median), mm(p.average_std)));
    }
    out
}

/// RMSE, median and std per task.
pub fn task_chart_svg(tasks: &[TaskColumn]) -> String {
    let cats: Vec<&str> = tasks.iter().map(|c| c.task.display_name()).collect();
    let col = |f: fn(&ErrorStats) -> f64| tasks.iter().map(|c| f(&c.stats)).collect::<Vec<f64>>();
    grouped_bar_svg(
        "Error per task (mm)",
        &cats,
        &[("RMSE", col(|s| s.rmse)), ("Median", col(|s| s.median)), ("Std. Dev.", col(|s| s.std))],
    )
}

/// Median error per body part, one bar per task.
pub fn part_chart_svg(parts: &[PartRows]) -> String {
    let cats: Vec<&str> = parts.iter().map(|p| p.part.name()).collect();
    let tasks: Vec<TaskLabel> = parts.first().map(|p| p.tasks.iter().map(|c| c.task).collect()).unwrap_or_default();
    let series: Vec<(&str, Vec<f64>)> = tasks
        .iter()
        .enumerate()
        .map(|(i, t)| (t.display_name(), parts.iter().map(|p| p.tasks[i].stats.median).collect()))
        .collect();
    grouped_bar_svg("Median error per body part (mm)", &cats, &series)
}

pub fn write_report(dir: impl AsRef<Path>, report: &ErrorReport) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, text: String| {
        let p = dir.join(name);
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
    };
    write(TASK_TABLE_FILE, task_table_csv(&report.tasks))?;
    write(PART_TABLE_FILE, part_table_csv(&report.parts))?;
    write(TASK_CHART_FILE, task_chart_svg(&report.tasks))?;
    write(PART_CHART_FILE, part_chart_svg(&report.parts))?;
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    write(REPORT_JSON_FILE, json)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;

    fn matrix(frames: usize, f: impl FnMut(usize, usize) -> f64) -> JointErrorMatrix {
        let mut f = f;
        let data = (0..frames * JOINT_COUNT).map(|k| f(k / JOINT_COUNT, k % JOINT_COUNT)).collect();
        JointErrorMatrix::new(frames, data).unwrap()
    }

    #[test]
    fn single_task_matches_global() {
        let mut r = RngStream::new(1);
        let e = matrix(30, |_, _| r.uniform(0.0, 80.0));
        let labels = vec![TaskLabel::Bow; 30];
        let t = per_task_report(&e, &labels).unwrap();
        assert_eq!(t.len(), 1);
        let all = crate::eval::metrics::rmse(&e, &crate::eval::Selection::all(&e)).unwrap();
        assert!((t[0].stats.rmse - all).abs() < 1e-12);
    }

    #[test]
    fn scaled_task_and_identical_tasks() {
        let mut r = RngStream::new(2);
        let base: Vec<f64> = (0..20 * JOINT_COUNT).map(|_| r.uniform(1.0, 50.0)).collect();
        let e = matrix(40, |f, j| base[(f % 20) * JOINT_COUNT + j] * if f < 20 { 2.0 } else { 1.0 });
        let labels: Vec<TaskLabel> = (0..40).map(|f| if f < 20 { TaskLabel::Squat } else { TaskLabel::Bow }).collect();
        let t = per_task_report(&e, &labels).unwrap();
        // Report order puts Bow before Squat.
        assert_eq!(t[0].task, TaskLabel::Bow);
        assert!((t[1].stats.rmse / t[0].stats.rmse - 2.0).abs() < 1e-9);

        let same = matrix(40, |f, j| base[(f % 20) * JOINT_COUNT + j]);
        let t = per_task_report(&same, &labels).unwrap();
        assert_eq!(t[0].stats, t[1].stats);
        let parts = per_part_report(&same, &labels).unwrap();
        for p in parts {
            assert!((p.average_median - p.tasks[0].stats.median).abs() < 1e-12);
        }
    }

    #[test]
    fn head_only_errors() {
        let e = matrix(10, |_, j| if [JointId::Neck.index(), JointId::Head.index()].contains(&j) { 7.0 } else { 0.0 });
        let parts = per_part_report(&e, &[TaskLabel::Walk; 10]).unwrap();
        for p in &parts {
            let zero = p.part != BodyPart::Head;
            assert_eq!(p.tasks[0].stats.median == 0.0, zero);
            assert_eq!(p.average_std, 0.0);
        }
    }

    #[test]
    fn parts_recombine_to_overall() {
        let mut r = RngStream::new(3);
        let e = matrix(25, |_, _| r.uniform(0.0, 100.0));
        let labels: Vec<TaskLabel> = (0..25).map(|f| TaskLabel::RECORDED[f % 3]).collect();
        let rep = build_report(&e, &labels).unwrap();
        let pooled: f64 = rep.parts.iter().map(|p| p.pooled.sum_sq).sum::<f64>();
        let count: usize = rep.parts.iter().map(|p| p.pooled.count).sum();
        assert!(((pooled / count as f64).sqrt() - rep.overall.rmse).abs() < 1e-9);
    }

    #[test]
    fn unlabeled_data_is_rejected() {
        let e = matrix(3, |_, _| 1.0);
        assert!(matches!(per_task_report(&e, &[TaskLabel::Unknown; 3]), Err(Error::Data(_))));
    }

    #[test]
    fn csv_shapes() {
        let e = matrix(4, |f, _| f as f64);
        let labels = [TaskLabel::Squat, TaskLabel::Squat, TaskLabel::OneLegStand, TaskLabel::OneLegStand];
        let rep = build_report(&e, &labels).unwrap();
        let t = task_table_csv(&rep.tasks);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], "Task,Stand,Squat");
        assert_eq!(lines[1], "RMSE,2.5,0.7");
        assert!(lines[2].starts_with("Median_error,"));
        assert!(lines[3].starts_with("Std. Dev. Error,"));
        let p = part_table_csv(&rep.parts);
        assert!(p.contains("Head,Average,"));
        assert_eq!(p.lines().count(), 1 + 4 * 3);
    }

    fn close(a: &ErrorStats, b: &ErrorStats) -> bool {
        a.count == b.count
            && [(a.rmse, b.rmse), (a.median, b.median), (a.std, b.std)]
                .iter()
                .all(|(x, y)| (x - y).abs() <= 1e-9 * (1.0 + x.abs()))
    }

    proptest::proptest! {
        #[test]
        fn frame_order_does_not_matter(seed in 0u64..10_000, frames in 2usize..60) {
            let mut r = RngStream::new(seed);
            let e = matrix(frames, |_, _| r.uniform(0.0, 120.0));
            let labels: Vec<TaskLabel> = (0..frames)
                .map(|_| TaskLabel::ALL[(r.uniform(0.0, 10.0) as usize).min(9)])
                .collect();
            proptest::prop_assume!(labels.iter().any(|t| *t != TaskLabel::Unknown));
            let mut order: Vec<usize> = (0..frames).collect();
            for i in (1..frames).rev() {
                let k = (r.uniform(0.0, (i + 1) as f64) as usize).min(i);
                order.swap(i, k);
            }
            let e2 = matrix(frames, |f, j| e.get(order[f], j));
            let l2: Vec<TaskLabel> = order.iter().map(|&f| labels[f]).collect();
            let a = build_report(&e, &labels).unwrap();
            let b = build_report(&e2, &l2).unwrap();
            proptest::prop_assert!(close(&a.overall, &b.overall));
            proptest::prop_assert_eq!(a.tasks.len(), b.tasks.len());
            for (x, y) in a.tasks.iter().zip(&b.tasks) {
                proptest::prop_assert_eq!(x.task, y.task);
                proptest::prop_assert!(close(&x.stats, &y.stats));
            }
            for (x, y) in a.parts.iter().zip(&b.parts) {
                proptest::prop_assert!(close(&x.pooled, &y.pooled));
            }
        }
    }
}
