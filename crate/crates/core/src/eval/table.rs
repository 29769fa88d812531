use std::fmt::Write;

use super::metrics::{ClassMetrics, DeltaTable, MetricsReport};

const CATEGORIES: [&str; 3] = ["Clar. Needed", "Clar. Not Needed", "Avg"];

fn rows(m: &MetricsReport) -> [ClassMetrics; 3] {
    [m.needed, m.not_needed, m.macro_avg]
}

/// Model / Category / P / R / F1 table, one three-row group per model.
pub fn format_table(models: &[(&str, &MetricsReport)]) -> String {
    let width = models.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(5);
    let mut out = String::new();
    writeln!(out, "{:<width$}  {:<16}  {:>5}  {:>5}  {:>5}", "Model", "Category", "P", "R", "F1").unwrap();
    for (name, report) in models {
        for (i, (category, m)) in CATEGORIES.iter().zip(rows(report)).enumerate() {
            let label = if i == 0 { *name } else { "" };
            writeln!(
                out,
                "{label:<width$}  {category:<16}  {:.3}  {:.3}  {:.3}",
                m.precision, m.recall, m.f1
            )
            .unwrap();
        }
    }
    out
}

pub fn format_delta(delta: &DeltaTable) -> String {
    let mut out = String::new();
    writeln!(out, "{:<16}  {:>6}  {:>6}  {:>6}", "Delta", "P", "R", "F1").unwrap();
    for (category, m) in CATEGORIES.iter().zip([delta.needed, delta.not_needed, delta.macro_avg]) {
        writeln!(
            out,
            "{category:<16}  {:+.3}  {:+.3}  {:+.3}",
            m.precision, m.recall, m.f1
        )
        .unwrap();
    }
    out
}
