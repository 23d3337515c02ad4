//! Report rendering: CSV (the primary, diffable format) and aligned
//! markdown, with fixed numeric formats so identical inputs always produce
//! identical bytes.

use std::io::{self, Write};

use crate::incidence::{CellKind, GroupedReport};

/// Format one cell: percent with one decimal, currency with two, rates and
/// indices with four.
pub fn format_cell(kind: CellKind, value: f64) -> String {
    let v = if value == 0.0 { 0.0 } else { value };
    match kind {
        CellKind::Percent => format!("{:.1}", v * 100.0),
        CellKind::Currency => format!("{v:.2}"),
        CellKind::Rate => format!("{v:.4}"),
        CellKind::Index => format!("{v:.4}"),
    }
}

fn column_headers(report: &GroupedReport) -> Vec<String> {
    let mut headers = Vec::with_capacity(report.k + 2);
    headers.push(report.label_header.clone());
    for g in 1..=report.k {
        headers.push(format!("g{g}"));
    }
    headers.push("all".to_string());
    headers
}

pub fn render_grouped_csv(report: &GroupedReport, out: &mut dyn Write) -> io::Result<()> {
    writeln!(out, "{}", column_headers(report).join(","))?;
    for row in &report.rows {
        let cells: Vec<String> = row
            .cells
            .iter()
            .map(|&v| format_cell(row.kind, v))
            .collect();
        writeln!(out, "{},{}", row.label, cells.join(","))?;
    }
    Ok(())
}

pub fn render_grouped_markdown(report: &GroupedReport, out: &mut dyn Write) -> io::Result<()> {
    let headers = column_headers(report);
    let mut table: Vec<Vec<String>> = vec![headers];
    for row in &report.rows {
        let mut cells = vec![row.label.clone()];
        cells.extend(row.cells.iter().map(|&v| format_cell(row.kind, v)));
        table.push(cells);
    }
    let columns = table[0].len();
    let widths: Vec<usize> = (0..columns)
        .map(|c| table.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();

    writeln!(out, "### {}", report.title)?;
    writeln!(out)?;
    for (i, row) in table.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(cell, w)| format!("{cell:>w$}"))
            .collect();
        writeln!(out, "| {} |", line.join(" | "))?;
        if i == 0 {
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            writeln!(out, "| {} |", rule.join(" | "))?;
        }
    }
    Ok(())
}

pub fn render_distribution_markdown(
    report: &crate::distribution::DistributionReport,
    out: &mut dyn Write,
) -> io::Result<()> {
    writeln!(out, "### Poverty and inequality ({})", report.indicator)?;
    writeln!(out)?;
    writeln!(out, "| metric | gross | net | variation_pct |")?;
    writeln!(out, "| ------ | ----- | --- | ------------- |")?;
    let rows = [
        ("p0", report.gross.p0, report.net.p0, report.variation_pct.p0),
        ("p1", report.gross.p1, report.net.p1, report.variation_pct.p1),
        ("p2", report.gross.p2, report.net.p2, report.variation_pct.p2),
        (
            "gini",
            report.gross.gini,
            report.net.gini,
            report.variation_pct.gini,
        ),
    ];
    for (metric, gross, net, var) in rows {
        writeln!(out, "| {metric} | {gross:.4} | {net:.4} | {var:.1} |")?;
    }
    Ok(())
}
