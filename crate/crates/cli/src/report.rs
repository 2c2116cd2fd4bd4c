use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{CliError, Result};
use crate::run::{case_label, CaseSummary};
use aggsim_core::sim::Case;

/// Rebuilds the case-comparison table from a previously written
/// `day_results.csv`, so a run's numbers can be re-examined without
/// re-simulating.
pub fn summarize(out_dir: &Path) -> Result<Vec<CaseSummary>> {
    let path = out_dir.join("day_results.csv");
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let mut lines = text.lines().enumerate();
    let header = lines
        .next()
        .map(|(_, h)| h.trim_end())
        .ok_or_else(|| CliError::Validation("day_results.csv: empty file".into()))?;
    let columns: Vec<&str> = header.split(',').collect();
    let col = |name: &str| {
        columns
            .iter()
            .position(|c| *c == name)
            .ok_or_else(|| CliError::Validation(format!("day_results.csv: missing column {name}")))
    };
    let (c_case, c_date) = (col("case")?, col("date")?);
    let parts = [
        col("da_trade")?,
        col("rt_trade")?,
        col("degradation")?,
        col("network")?,
        col("cost_total")?,
        col("solve_ms")?,
    ];

    // per case: cost components, solve time, and the set of dates
    let mut acc: BTreeMap<u8, ([f64; 6], Vec<String>)> = BTreeMap::new();
    for (n, raw) in lines {
        let line = raw.trim_end();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(CliError::Validation(format!(
                "day_results.csv line {}: expected {} fields, got {}",
                n + 1,
                columns.len(),
                fields.len()
            )));
        }
        let case: u8 = fields[c_case].parse().map_err(|_| {
            CliError::Validation(format!(
                "day_results.csv line {}: bad case '{}'",
                n + 1,
                fields[c_case]
            ))
        })?;
        let (sums, dates) = acc.entry(case).or_default();
        for (slot, &idx) in parts.iter().enumerate() {
            let v: f64 = fields[idx].parse().map_err(|_| {
                CliError::Validation(format!(
                    "day_results.csv line {}: bad number '{}'",
                    n + 1,
                    fields[idx]
                ))
            })?;
            sums[slot] += v;
        }
        let date = fields[c_date].to_string();
        if !dates.contains(&date) {
            dates.push(date);
        }
    }
    if acc.is_empty() {
        return Err(CliError::Validation("day_results.csv: no data rows".into()));
    }

    Ok(acc
        .into_iter()
        .map(|(case, (sums, dates))| CaseSummary {
            case,
            label: Case::from_number(case)
                .map(|c| case_label(c).to_string())
                .unwrap_or_else(|| format!("case {case}")),
            da_trade: sums[0],
            rt_trade: sums[1],
            degradation: sums[2],
            network: sums[3],
            total_cost: sums[4],
            solve_ms: sums[5],
            mean_daily_cost: sums[4] / dates.len().max(1) as f64,
        })
        .collect())
}

/// Plain-text rendering of the rebuilt table.
pub fn render(cases: &[CaseSummary]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<4} {:<26} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12}\n",
        "case", "strategy", "da_trade", "rt_trade", "degradation", "network", "total", "cost/day"
    ));
    for c in cases {
        out.push_str(&format!(
            "{:<4} {:<26} {:>12.4} {:>12.4} {:>12.4} {:>12.4} {:>12.4} {:>12.4}\n",
            c.case,
            c.label,
            c.da_trade,
            c.rt_trade,
            c.degradation,
            c.network,
            c.total_cost,
            c.mean_daily_cost
        ));
    }
    out
}
