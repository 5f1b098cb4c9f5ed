//! Plain-text renderings of the aggregate tables.

use std::collections::BTreeSet;
use std::fmt::Write;

use super::aggregate::{ErroneousTable, GroupKey, LabelwiseHistogram, RatingTable, TypeCountTable};
use super::{ErrorType, RatingDimension};

fn dataset_rank(d: &str) -> (usize, String) {
    let rank = match d {
        "turk" => 0,
        "asset" => 1,
        "newsela" => 2,
        _ => 3,
    };
    (rank, d.to_string())
}

fn datasets<'a, V: 'a>(cells: impl Iterator<Item = (&'a GroupKey, V)>) -> Vec<String> {
    let set: BTreeSet<(usize, String)> = cells.map(|((d, _), _)| dataset_rank(d)).collect();
    set.into_iter().map(|(_, d)| d).collect()
}

fn grid(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                if c == 0 {
                    format!("{cell:<w$}", w = widths[c])
                } else {
                    format!("{cell:>w$}", w = widths[c])
                }
            })
            .collect();
        writeln!(out, "{}", line.join("  ").trim_end()).unwrap();
        if i == 0 {
            let total: usize = widths.iter().sum::<usize>() + 2 * cols.saturating_sub(1);
            writeln!(out, "{}", "-".repeat(total)).unwrap();
        }
    }
    out
}

/// Erroneous outputs per dataset and system, with a total row.
pub fn render_table6(table: &ErroneousTable, systems: &[&str]) -> String {
    let mut rows = vec![std::iter::once("Test set".to_string())
        .chain(systems.iter().map(|s| s.to_string()))
        .collect::<Vec<_>>()];
    for d in datasets(table.cells.iter()) {
        let n = systems.iter().map(|s| table.get(&d, s).total).max().unwrap_or(0);
        let mut row = vec![format!("{d} ({n} samples)")];
        row.extend(systems.iter().map(|s| table.get(&d, s).erroneous.to_string()));
        rows.push(row);
    }
    let n = systems.iter().map(|s| table.system_total(s).total).max().unwrap_or(0);
    let mut total = vec![format!("Total ({n} samples)")];
    total.extend(systems.iter().map(|s| table.system_total(s).erroneous.to_string()));
    rows.push(total);
    grid(&rows)
}

/// Error-instance counts per type, dataset and system.
pub fn render_table7(table: &TypeCountTable, systems: &[&str]) -> String {
    let ds = datasets(table.cells.iter());
    let mut header = vec!["Error type".to_string()];
    for d in ds.iter().map(String::as_str).chain(["total"]) {
        header.extend(systems.iter().map(|s| format!("{d}/{s}")));
    }
    let mut rows = vec![header];
    for t in ErrorType::ALL {
        let mut row = vec![t.label().to_string()];
        for d in &ds {
            row.extend(systems.iter().map(|s| table.get(d, s, t).to_string()));
        }
        row.extend(systems.iter().map(|s| table.system_type_total(s, t).to_string()));
        rows.push(row);
    }
    let mut total = vec!["Total".to_string()];
    for d in &ds {
        total.extend(
            systems
                .iter()
                .map(|s| ErrorType::ALL.iter().map(|&t| table.get(d, s, t)).sum::<u64>().to_string()),
        );
    }
    total.extend(systems.iter().map(|s| table.system_total(s).to_string()));
    rows.push(total);
    grid(&rows)
}

/// Mean ratings per dimension for every (dataset, system) group present.
pub fn render_table8(table: &RatingTable, systems: &[&str]) -> String {
    let mut columns: Vec<GroupKey> = Vec::new();
    for d in datasets(table.cells.iter()) {
        for s in systems {
            let key = (d.clone(), s.to_string());
            if table.cells.contains_key(&key) {
                columns.push(key);
            }
        }
    }
    let mut rows = vec![std::iter::once("Dimension".to_string())
        .chain(columns.iter().map(|(d, s)| format!("{d}/{s}")))
        .collect::<Vec<_>>()];
    for dim in RatingDimension::ALL {
        let mut row = vec![dim.to_string()];
        row.extend(columns.iter().map(|k| format!("{:.2}", table.cells[k].get(dim))));
        rows.push(row);
    }
    let mut total = vec!["Total".to_string()];
    total.extend(columns.iter().map(|k| format!("{:.2}", table.cells[k].total)));
    rows.push(total);
    grid(&rows)
}

/// Label-wise distribution: outputs containing each type exactly `k` times.
pub fn render_fig3(system: &str, hist: &LabelwiseHistogram) -> String {
    let max_k = hist.values().flat_map(|h| h.keys().copied()).max().unwrap_or(1);
    let mut rows = vec![std::iter::once(format!("{system}: error type"))
        .chain((1..=max_k).map(|k| format!("k={k}")))
        .collect::<Vec<_>>()];
    for t in ErrorType::ALL {
        let mut row = vec![t.label().to_string()];
        row.extend((1..=max_k).map(|k| {
            hist.get(&t).and_then(|h| h.get(&k)).copied().unwrap_or(0).to_string()
        }));
        rows.push(row);
    }
    grid(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::erroranalysis::{count_erroneous, ErrorAnnotation, ErrorRecord, Span};

    #[test]
    fn table6_layout() {
        let rec = |id: &str, ds: &str, err: bool| ErrorRecord {
            item_id: id.into(),
            system_id: "gpt4".into(),
            annotator: "consensus".into(),
            dataset: Some(ds.into()),
            annotations: if err {
                vec![ErrorAnnotation::new(ErrorType::Repetition, vec![Span::new(0, 1).unwrap()])]
            } else {
                vec![]
            },
            notes: None,
        };
        let t = count_erroneous(&[rec("1", "newsela", true), rec("2", "turk", false), rec("3", "turk", true)])
            .unwrap();
        let text = render_table6(&t, &["gpt4"]);
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[2].starts_with("turk (2 samples)"));
        assert!(lines[3].starts_with("newsela (1 samples)"));
        assert!(lines[4].starts_with("Total (3 samples)") && lines[4].ends_with('2'));
    }
}
