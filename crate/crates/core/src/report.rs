//! Report serialization. JSON is canonical (keys sorted, pretty-printed);
//! CSV mirrors the per-state and comparison tables.

use std::fmt::Write;

use serde::Serialize;

use crate::error::Result;
use crate::protocol::{Comparison, RunReport};

/// Pretty JSON with object keys in sorted order at every level.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    // serde_json::Value keeps objects in a BTreeMap, so keys come out sorted
    let v = serde_json::to_value(value)?;
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

/// `state,seen_classes,top1,top5` per state, then an `avg` row.
pub fn report_csv(report: &RunReport) -> String {
    let mut out = String::from("state,seen_classes,top1,top5\n");
    for m in &report.per_state {
        let _ = writeln!(
            out,
            "{},{},{:.4},{:.4}",
            m.state,
            m.seen_classes,
            100.0 * m.top1,
            100.0 * m.top5
        );
    }
    let _ = writeln!(
        out,
        "avg,,{:.4},{:.4}",
        100.0 * report.averages.avg_top1,
        100.0 * report.averages.avg_top5
    );
    out
}

/// One row per method: Top 1 / Top 5 per `T`, then the average change
/// against the baseline. Accuracies in percent, two decimals.
pub fn comparison_csv(cmp: &Comparison) -> String {
    let mut out = String::from("method");
    for t in &cmp.settings {
        let _ = write!(out, ",T{t}_top1,T{t}_top5");
    }
    out.push_str(",change_top1,change_top5\n");
    for row in &cmp.rows {
        out.push_str(&row.method);
        for (_, t1, t5) in &row.per_setting {
            let _ = write!(out, ",{:.2},{:.2}", 100.0 * t1, 100.0 * t5);
        }
        let _ = writeln!(out, ",{:.2},{:.2}", row.change_top1, row.change_top5);
    }
    out
}
