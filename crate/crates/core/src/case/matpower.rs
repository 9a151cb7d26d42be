//! Read-only importer for MATPOWER-style `mpc.bus` / `mpc.branch` / `mpc.gen`
//! tables.
//!
//! Only the columns the DC model needs are read: bus id, type and Pd; branch
//! endpoints, reactance and status; generator bus, Pg and status. Everything
//! else is ignored. AC losses leave the file's Pg/Pd unbalanced, so the slack
//! generator is re-dispatched to close the DC balance.

use std::collections::HashMap;

use super::{Bus, BusKind, CaseTables, Generator, GridCase, Line, Load};
use crate::error::{Error, Result};

struct Table {
    rows: Vec<Vec<f64>>,
    // source line of each row, for error reporting
    row_lines: Vec<usize>,
}

fn err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn scan(text: &str) -> Result<(Option<f64>, HashMap<String, Table>)> {
    let mut base = None;
    let mut tables: HashMap<String, Table> = HashMap::new();
    let mut current: Option<(String, Table, Vec<f64>)> = None;

    for (n, raw) in text.lines().enumerate() {
        let lineno = n + 1;
        let content = raw.split('%').next().unwrap_or("");

        let mut rest: &str = content;
        let mut offset = 0usize;
        if current.is_none() {
            let trimmed = content.trim_start();
            let Some(assign) = trimmed.strip_prefix("mpc.") else { continue };
            let Some((name, rhs)) = assign.split_once('=') else { continue };
            let name = name.trim().to_string();
            let rhs_trim = rhs.trim();
            if name == "baseMVA" {
                let v = rhs_trim.trim_end_matches(';').trim();
                let col = content.find(v).unwrap_or(0) + 1;
                base = Some(v.parse().map_err(|_| err(lineno, col, format!("invalid baseMVA '{v}'")))?);
                continue;
            }
            let Some(pos) = rhs.find('[') else { continue };
            let rhs_start = content.len() - rhs.len();
            offset = rhs_start + pos + 1;
            rest = &content[offset..];
            current = Some((
                name,
                Table {
                    rows: Vec::new(),
                    row_lines: Vec::new(),
                },
                Vec::new(),
            ));
        }

        let (_, table, row) = current.as_mut().expect("inside a table");
        let mut closed = false;
        let mut tok_start: Option<usize> = None;
        let bytes: Vec<(usize, char)> = rest.char_indices().collect();
        let flush = |start: usize, end: usize, row: &mut Vec<f64>| -> Result<()> {
            let tok = &rest[start..end];
            let v = tok
                .parse::<f64>()
                .map_err(|_| err(lineno, offset + start + 1, format!("expected number, found '{tok}'")))?;
            row.push(v);
            Ok(())
        };
        for &(i, c) in &bytes {
            let sep = c.is_whitespace() || c == ',' || c == ';' || c == ']';
            if sep {
                if let Some(s) = tok_start.take() {
                    flush(s, i, row)?;
                }
                if (c == ';' || c == ']') && !row.is_empty() {
                    table.rows.push(std::mem::take(row));
                    table.row_lines.push(lineno);
                }
                if c == ']' {
                    closed = true;
                    break;
                }
            } else if tok_start.is_none() {
                tok_start = Some(i);
            }
        }
        if !closed {
            if let Some(s) = tok_start.take() {
                flush(s, rest.len(), row)?;
            }
            if !row.is_empty() {
                table.rows.push(std::mem::take(row));
                table.row_lines.push(lineno);
            }
        } else {
            let (name, table, _) = current.take().expect("table open");
            tables.insert(name, table);
        }
    }
    if let Some((name, table, _)) = current {
        let line = table.row_lines.last().copied().unwrap_or(0);
        return Err(err(line, 1, format!("table mpc.{name} is not closed with ']'")));
    }
    Ok((base, tables))
}

fn col(table: &Table, r: usize, c: usize, name: &str) -> Result<f64> {
    table.rows[r]
        .get(c)
        .copied()
        .ok_or_else(|| err(table.row_lines[r], 1, format!("mpc.{name} row needs at least {} columns", c + 1)))
}

/// Imports a MATPOWER-style case text and validates it.
pub fn parse_matpower(text: &str) -> Result<GridCase> {
    let (base, tables) = scan(text)?;
    let base_mva = base.unwrap_or(100.0);
    let get = |name: &str| {
        tables
            .get(name)
            .ok_or_else(|| Error::Validation(format!("missing table mpc.{name}")))
    };
    let bus_t = get("bus")?;
    let branch_t = get("branch")?;
    let gen_t = get("gen")?;

    let mut gens = Vec::new();
    for r in 0..gen_t.rows.len() {
        let bus = col(gen_t, r, 0, "gen")? as u32;
        let pg = col(gen_t, r, 1, "gen")?;
        let status = gen_t.rows[r].get(7).copied().unwrap_or(1.0);
        if status > 0.0 {
            gens.push(Generator { bus, mw: pg });
        }
    }

    let mut buses = Vec::new();
    let mut loads = Vec::new();
    for r in 0..bus_t.rows.len() {
        let id = col(bus_t, r, 0, "bus")? as u32;
        let ty = col(bus_t, r, 1, "bus")? as i64;
        let pd = col(bus_t, r, 2, "bus")?;
        if pd < 0.0 {
            return Err(Error::Validation(format!("negative load {pd} MW at bus {id}")));
        }
        let has_gen = gens.iter().any(|g| g.bus == id);
        let kind = if ty == 3 {
            BusKind::Slack
        } else if has_gen {
            BusKind::Generator
        } else if pd > 0.0 {
            BusKind::Load
        } else {
            BusKind::Transit
        };
        buses.push(Bus { id, kind });
        if pd > 0.0 {
            loads.push(Load { bus: id, mw: pd });
        }
    }

    let mut lines = Vec::new();
    for r in 0..branch_t.rows.len() {
        let status = branch_t.rows[r].get(10).copied().unwrap_or(1.0);
        lines.push(Line {
            from: col(branch_t, r, 0, "branch")? as u32,
            to: col(branch_t, r, 1, "branch")? as u32,
            reactance: col(branch_t, r, 3, "branch")?,
            in_service: status > 0.0,
        });
    }

    // Re-dispatch the slack so the DC case balances.
    if let Some(slack) = buses.iter().find(|b| b.kind == BusKind::Slack).map(|b| b.id) {
        let total_load: f64 = loads.iter().map(|l| l.mw).sum();
        let total_gen: f64 = gens.iter().map(|g| g.mw).sum();
        let delta = total_load - total_gen;
        match gens.iter_mut().find(|g| g.bus == slack) {
            Some(g) => g.mw += delta,
            None => gens.push(Generator { bus: slack, mw: delta }),
        }
        log::debug!("slack bus {slack} re-dispatched by {delta:.4} MW for DC balance");
    }

    GridCase::new(CaseTables {
        base_mva,
        buses,
        lines,
        loads,
        gens,
    })
}
