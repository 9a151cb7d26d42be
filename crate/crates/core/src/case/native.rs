//! Native case format.
//!
//! ```text
//! # comment
//! [case]
//! base_mva 100
//! [bus]
//! # id  kind            (slack | generator | load | transit)
//! 1     slack
//! 2     load
//! [line]
//! # from  to  x_pu  in_service (1/0)
//! 1       2   0.1   1
//! [load]
//! # bus  p_mw
//! 2      50
//! [gen]
//! # bus  p_mw
//! 1      50
//! ```
//!
//! Columns are whitespace separated. Line order is the canonical line index.

use std::fmt::Write as _;

use super::{Bus, BusKind, CaseTables, Generator, GridCase, Line, Load};
use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Case,
    Bus,
    Line,
    Load,
    Gen,
}

struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn tokens(line: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Token { text: &line[s..i], column: s + 1 });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Token { text: &line[s..], column: s + 1 });
    }
    out
}

fn err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn num<T: std::str::FromStr>(tok: &Token<'_>, line: usize, what: &str) -> Result<T> {
    tok.text
        .parse()
        .map_err(|_| err(line, tok.column, format!("expected {what}, found '{}'", tok.text)))
}

fn expect_cols(toks: &[Token<'_>], n: usize, line: usize, section: &str) -> Result<()> {
    if toks.len() != n {
        let col = toks.get(n).map(|t| t.column).unwrap_or(1);
        return Err(err(line, col, format!("[{section}] rows have {n} columns, found {}", toks.len())));
    }
    Ok(())
}

/// Parses native case text and validates it.
pub fn parse_native(text: &str) -> Result<GridCase> {
    let mut t = CaseTables {
        base_mva: 100.0,
        ..Default::default()
    };
    let mut section = Section::None;

    for (n, raw) in text.lines().enumerate() {
        let lineno = n + 1;
        let content = raw.split('#').next().unwrap_or("");
        let toks = tokens(content);
        let Some(first) = toks.first() else { continue };

        if first.text.starts_with('[') {
            section = match first.text {
                "[case]" => Section::Case,
                "[bus]" => Section::Bus,
                "[line]" => Section::Line,
                "[load]" => Section::Load,
                "[gen]" => Section::Gen,
                other => return Err(err(lineno, first.column, format!("unknown section {other}"))),
            };
            if toks.len() > 1 {
                return Err(err(lineno, toks[1].column, "trailing text after section header"));
            }
            continue;
        }

        match section {
            Section::None => return Err(err(lineno, first.column, "data before any section header")),
            Section::Case => {
                expect_cols(&toks, 2, lineno, "case")?;
                match first.text {
                    "base_mva" => t.base_mva = num(&toks[1], lineno, "number")?,
                    other => return Err(err(lineno, first.column, format!("unknown case key '{other}'"))),
                }
            }
            Section::Bus => {
                expect_cols(&toks, 2, lineno, "bus")?;
                let id = num(&toks[0], lineno, "bus id")?;
                let kind = BusKind::parse(toks[1].text)
                    .ok_or_else(|| err(lineno, toks[1].column, format!("unknown bus kind '{}'", toks[1].text)))?;
                t.buses.push(Bus { id, kind });
            }
            Section::Line => {
                expect_cols(&toks, 4, lineno, "line")?;
                let status: u8 = num(&toks[3], lineno, "status 0 or 1")?;
                if status > 1 {
                    return Err(err(lineno, toks[3].column, "status must be 0 or 1"));
                }
                t.lines.push(Line {
                    from: num(&toks[0], lineno, "bus id")?,
                    to: num(&toks[1], lineno, "bus id")?,
                    reactance: num(&toks[2], lineno, "reactance")?,
                    in_service: status == 1,
                });
            }
            Section::Load => {
                expect_cols(&toks, 2, lineno, "load")?;
                t.loads.push(Load {
                    bus: num(&toks[0], lineno, "bus id")?,
                    mw: num(&toks[1], lineno, "MW value")?,
                });
            }
            Section::Gen => {
                expect_cols(&toks, 2, lineno, "gen")?;
                t.gens.push(Generator {
                    bus: num(&toks[0], lineno, "bus id")?,
                    mw: num(&toks[1], lineno, "MW value")?,
                });
            }
        }
    }
    GridCase::new(t)
}

/// Serializes a case to native text. Floats use shortest round-trip form.
pub fn to_native_string(case: &GridCase) -> String {
    let t = case.tables();
    let mut s = String::new();
    let _ = writeln!(s, "[case]\nbase_mva {}\n", t.base_mva);
    s.push_str("[bus]\n# id kind\n");
    for b in &t.buses {
        let _ = writeln!(s, "{} {}", b.id, b.kind.as_str());
    }
    s.push_str("\n[line]\n# from to x_pu in_service\n");
    for l in &t.lines {
        let _ = writeln!(s, "{} {} {} {}", l.from, l.to, l.reactance, u8::from(l.in_service));
    }
    s.push_str("\n[load]\n# bus p_mw\n");
    for l in &t.loads {
        let _ = writeln!(s, "{} {}", l.bus, l.mw);
    }
    s.push_str("\n[gen]\n# bus p_mw\n");
    for g in &t.gens {
        let _ = writeln!(s, "{} {}", g.bus, g.mw);
    }
    s
}
