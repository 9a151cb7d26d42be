//! Plain-text rendering of stored tables: top residuals before an attack,
//! top residuals after one, and residuals by τ.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use anyhow::{bail, Result};

use crate::output::{read_table, table_command, AttackRow, DetectRow, SweepRow};

/// How many rows the ranking layouts show.
pub const TOP_N: usize = 5;

pub fn render(text: &str) -> Result<String> {
    match table_command(text)?.as_str() {
        "detect" => Ok(ranking("TOP 5 LOWEST RESIDUALS", read_table::<DetectRow>(text)?.iter().map(|r| (r.rank, &r.line, r.residual_deg)))),
        "attack" => {
            let rows: Vec<AttackRow> = read_table(text)?;
            let pick = |phase: &'static str| {
                rows.iter()
                    .filter(move |r| r.phase == phase)
                    .map(|r| (r.rank, &r.line, r.residual_deg))
            };
            let mut out = ranking("TOP 5 LOWEST RESIDUALS BEFORE ATTACK", pick("pre"));
            out.push('\n');
            out.push_str(&ranking("TOP 5 LOWEST RESIDUALS AFTER ATTACK", pick("post")));
            Ok(out)
        }
        "sweep-tau" => Ok(tau_table(&read_table::<SweepRow>(text)?)),
        other => bail!("no report layout for '{other}' tables"),
    }
}

fn ranking<'a>(title: &str, rows: impl Iterator<Item = (usize, &'a String, f64)>) -> String {
    let mut out = format!("{title}\n\nrank\tLine\tr_k\n");
    for (rank, line, r) in rows.take(TOP_N) {
        let _ = writeln!(out, "{rank}\t{line}\t{r:.4}");
    }
    out
}

/// One row per line, one column per τ, cells `r_k (rank)`.
fn tau_table(rows: &[SweepRow]) -> String {
    let mut taus: Vec<f64> = rows.iter().map(|r| r.tau).collect();
    taus.sort_by(f64::total_cmp);
    taus.dedup();
    let mut order: Vec<(usize, &str)> = Vec::new();
    let mut cells: BTreeMap<(usize, u64), String> = BTreeMap::new();
    for r in rows {
        if !order.iter().any(|(i, _)| *i == r.index) {
            order.push((r.index, &r.line));
        }
        let cell = match (r.residual_deg, r.rank) {
            (Some(v), Some(k)) => format!("{v:.4} ({k})"),
            _ => "n/a".to_string(),
        };
        cells.insert((r.index, r.tau.to_bits()), cell);
    }
    let mut out = String::from("RESIDUALS OF LINES FOR DIFFERENT τ\n\nLine");
    for t in &taus {
        let _ = write!(out, "\tτ={t}");
    }
    out.push('\n');
    for (index, line) in order {
        out.push_str(line);
        for t in &taus {
            let c = cells.get(&(index, t.to_bits())).map_or("", String::as_str);
            let _ = write!(out, "\t{c}");
        }
        out.push('\n');
    }
    out
}
