//! Table output. CSV and JSON carry the same rows; CSV starts with a
//! `# gridmask schema_version=N command=NAME` header line.

use std::io::Write;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::OutputFormat;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectRow {
    pub rank: usize,
    pub line: String,
    pub index: usize,
    pub residual_deg: f64,
    pub best_fit_flow_mw: f64,
    pub observable: bool,
}

/// One ranking row of an attack run; `phase` is `pre` or `post`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackRow {
    pub phase: String,
    pub rank: usize,
    pub line: String,
    pub index: usize,
    pub residual_deg: f64,
    pub best_fit_flow_mw: f64,
    pub observable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub line: String,
    pub index: usize,
    pub tau: f64,
    /// `ok`, `infeasible` (no admissible attack, detector input unchanged)
    /// or `error`.
    pub status: String,
    pub base_residual_deg: Option<f64>,
    pub residual_deg: Option<f64>,
    pub rank: Option<usize>,
    pub masked: Option<bool>,
    pub objective: Option<f64>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaRow {
    pub line: String,
    pub index: usize,
    pub x_pu: f64,
    pub binv_ii: f64,
    pub binv_jj: f64,
    pub binv_ij: f64,
    pub xth: f64,
    pub gamma: f64,
}

#[derive(Serialize)]
struct EnvelopeOut<'a, R, M> {
    schema_version: u32,
    command: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    meta: Option<M>,
    rows: &'a [R],
}

#[derive(Deserialize)]
struct EnvelopeIn<R> {
    schema_version: u32,
    command: String,
    rows: Vec<R>,
}

/// Writes `rows` for `command`. `meta` goes into the JSON document only.
pub fn write_table<W: Write, R: Serialize, M: Serialize>(
    out: &mut W,
    format: OutputFormat,
    command: &str,
    rows: &[R],
    meta: Option<M>,
) -> Result<()> {
    match format {
        OutputFormat::Json => {
            let doc = EnvelopeOut {
                schema_version: SCHEMA_VERSION,
                command,
                meta,
                rows,
            };
            serde_json::to_writer_pretty(&mut *out, &doc)?;
            writeln!(out)?;
        }
        OutputFormat::Csv => {
            writeln!(out, "# gridmask schema_version={SCHEMA_VERSION} command={command}")?;
            let mut w = csv::Writer::from_writer(&mut *out);
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

/// Command name recorded in a stored table, CSV or JSON.
pub fn table_command(text: &str) -> Result<String> {
    let t = text.trim_start();
    if t.starts_with('{') {
        #[derive(Deserialize)]
        struct Head {
            schema_version: u32,
            command: String,
        }
        let h: Head = serde_json::from_str(t).context("reading JSON table")?;
        check_version(h.schema_version)?;
        return Ok(h.command);
    }
    let first = t.lines().next().unwrap_or_default();
    let mut version = None;
    let mut command = None;
    for field in first.trim_start_matches('#').split_whitespace() {
        if let Some(v) = field.strip_prefix("schema_version=") {
            version = v.parse().ok();
        } else if let Some(c) = field.strip_prefix("command=") {
            command = Some(c.to_string());
        }
    }
    match (version, command) {
        (Some(v), Some(c)) => {
            check_version(v)?;
            Ok(c)
        }
        _ => bail!("not a gridmask table: missing '# gridmask schema_version=.. command=..' header"),
    }
}

fn check_version(v: u32) -> Result<()> {
    if v != SCHEMA_VERSION {
        bail!("table schema version {v} is not supported (expected {SCHEMA_VERSION})");
    }
    Ok(())
}

/// Reads the rows of a stored table, CSV or JSON.
pub fn read_table<R: DeserializeOwned>(text: &str) -> Result<Vec<R>> {
    let t = text.trim_start();
    if t.starts_with('{') {
        let env: EnvelopeIn<R> = serde_json::from_str(t).context("reading JSON table")?;
        check_version(env.schema_version)?;
        let _ = env.command;
        return Ok(env.rows);
    }
    table_command(t)?;
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(t.as_bytes());
    r.deserialize().map(|row| row.context("reading CSV row")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows() -> Vec<SweepRow> {
        vec![
            SweepRow {
                line: "25-26".into(),
                index: 42,
                tau: 0.5,
                status: "ok".into(),
                base_residual_deg: Some(0.1 + 0.2),
                residual_deg: Some(1.0 / 3.0),
                rank: Some(5),
                masked: Some(true),
                objective: Some(1e-7),
                message: String::new(),
            },
            SweepRow {
                line: "16-19".into(),
                index: 27,
                tau: 0.5,
                status: "error".into(),
                base_residual_deg: None,
                residual_deg: None,
                rank: None,
                masked: None,
                objective: None,
                message: "degenerate outage, with a comma".into(),
            },
        ]
    }

    #[test]
    fn csv_and_json_carry_identical_rows() {
        let mut csv_out = Vec::new();
        let mut json_out = Vec::new();
        write_table::<_, _, ()>(&mut csv_out, OutputFormat::Csv, "sweep-tau", &rows(), None).unwrap();
        write_table::<_, _, ()>(&mut json_out, OutputFormat::Json, "sweep-tau", &rows(), None).unwrap();
        let (c, j) = (String::from_utf8(csv_out).unwrap(), String::from_utf8(json_out).unwrap());
        assert_eq!(table_command(&c).unwrap(), "sweep-tau");
        assert_eq!(table_command(&j).unwrap(), "sweep-tau");
        let from_csv: Vec<SweepRow> = read_table(&c).unwrap();
        let from_json: Vec<SweepRow> = read_table(&j).unwrap();
        assert_eq!(from_csv, rows());
        assert_eq!(from_json, rows());
    }

    #[test]
    fn header_is_required() {
        assert!(read_table::<SweepRow>("line,index\n").is_err());
        assert!(table_command("# gridmask schema_version=9 command=detect\n").is_err());
    }
}
