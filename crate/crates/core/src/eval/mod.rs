//! Joint-error metrics, task and body-part reports, and run comparison.

pub mod ablation;
pub mod chart;
pub mod metrics;
pub mod report;
pub mod validate;

pub use ablation::{ablation_compare, Ablation, AblationRow};
pub use chart::grouped_bar_svg;
pub use metrics::{joint_errors, median_std, rmse, summarize, ErrorStats, JointErrorMatrix, Selection};
pub use report::{
    build_report, part_chart_svg, part_table_csv, per_part_report, per_task_report, task_chart_svg, task_table_csv,
    write_report, ErrorReport, PartRows, TaskColumn,
};
pub use validate::{evaluate_validation, Evaluation};
