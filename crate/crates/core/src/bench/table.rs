//! CSV and aligned-text tables of [`RunRecord`]s. Missing values print as `-`.

use crate::analysis::Mode;

use super::{metric_columns, RunRecord};

pub fn header(mode: Mode) -> Vec<String> {
    let mut h = vec!["Name".to_string(), "alpha0_A".to_string()];
    h.extend(metric_columns(mode).iter().map(|s| s.to_string()));
    h.extend(["iter", "time_s", "status"].map(String::from));
    h
}

fn cells(r: &RunRecord, num: impl Fn(f64) -> String) -> Vec<String> {
    let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), &num);
    let mut c = vec![r.name.clone(), opt(r.alpha0_a)];
    c.extend(r.metrics.iter().map(|v| opt(*v)));
    c.push(r.iter.map_or_else(|| "-".to_string(), |k| k.to_string()));
    c.push(format!("{:.3}", r.time_s));
    c.push(r.status.as_str().to_string());
    c
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Full-precision values, one row per record.
pub fn render_csv(mode: Mode, rows: &[RunRecord]) -> String {
    let mut out = header(mode).join(",");
    out.push('\n');
    for r in rows {
        let line: Vec<String> = cells(r, |v| format!("{v}")).iter().map(|s| csv_field(s)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Four decimals, the name left-aligned and everything else right-aligned.
pub fn render_text(mode: Mode, rows: &[RunRecord]) -> String {
    let head = header(mode);
    let body: Vec<Vec<String>> = rows.iter().map(|r| cells(r, |v| format!("{v:.4}"))).collect();
    let mut width: Vec<usize> = head.iter().map(|h| h.chars().count()).collect();
    for row in &body {
        for (w, c) in width.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |row: &[String]| {
        let parts: Vec<String> = row
            .iter()
            .zip(&width)
            .enumerate()
            .map(|(j, (c, &w))| if j == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        let mut s = parts.join("  ").trim_end().to_string();
        s.push('\n');
        s
    };
    let mut out = line(&head);
    let rule: Vec<String> = width.iter().map(|&w| "-".repeat(w)).collect();
    out.push_str(&line(&rule));
    for row in &body {
        out.push_str(&line(row));
    }
    out
}
