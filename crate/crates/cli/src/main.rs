use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context as _, Result};
use clap::{Args, Parser, Subcommand};
use gridmask_cli::commands::{cmd_attack, cmd_detect, cmd_gamma, cmd_sweep_tau, RunContext};
use gridmask_cli::config::{parse_list, resolve_lines, CandidatePolicy, ExperimentConfig, OutputFormat, Overrides};
use gridmask_cli::output::write_table;
use gridmask_cli::{report, Study, EXIT_PARTIAL};
use gridmask_core::attack::FlowMode;

#[derive(Parser)]
#[command(name = "gridmask", version, about = "Line outage detection and outage-masking attacks on DC grid models")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; flags override its fields
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Case file (native or research table format); bundled 39-bus case by default
    #[arg(long, global = true)]
    case: Option<PathBuf>,
    /// PMU bus ids, comma separated
    #[arg(long, global = true)]
    pmu: Option<String>,
    /// Detector candidates: auto, study, or a comma-separated line list
    #[arg(long, global = true)]
    candidates: Option<String>,
    /// Attack budgets, comma separated, each in (0, 4]
    #[arg(long, global = true)]
    tau: Option<String>,
    /// PMU angle noise standard deviation, degrees
    #[arg(long, global = true)]
    noise_sigma: Option<f64>,
    /// Seed for noise and solver restarts
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Solver random restarts
    #[arg(long, global = true)]
    starts: Option<usize>,
    /// Pre-outage flow in the terminal constraints: best-fit or actual
    #[arg(long, global = true)]
    flow_mode: Option<FlowMode>,
    #[arg(long, global = true)]
    format: Option<OutputFormat>,
    /// Output file; standard output by default
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Rank candidate lines for an observed outage
    Detect {
        /// True outage line to simulate (FROM-TO or 1-based index)
        #[arg(long)]
        line: Option<String>,
        /// Observation fixture: `bus_id delta_deg` rows
        #[arg(long)]
        obs: Option<PathBuf>,
    },
    /// Synthesize and verify an attack masking one outage
    Attack {
        #[arg(long)]
        line: String,
        #[arg(long)]
        obs: Option<PathBuf>,
        /// Also write the attack vector record (JSON) here
        #[arg(long)]
        vector_out: Option<PathBuf>,
    },
    /// Attack each line at every τ, warm-starting in ascending τ
    SweepTau {
        /// Target lines; the candidate policy's lines by default
        #[arg(long)]
        lines: Option<String>,
    },
    /// Thevenin reactance and γ of a line
    Gamma {
        #[arg(long)]
        line: String,
    },
    /// Render a stored detect, attack or sweep table
    Report { file: PathBuf },
}

fn config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    cfg.apply(Overrides {
        case: c.case.clone(),
        pmu: c.pmu.as_deref().map(parse_list).transpose().context("--pmu")?,
        candidates: c.candidates.as_deref().map(str::parse::<CandidatePolicy>).transpose()?,
        tau: c.tau.as_deref().map(parse_list).transpose().context("--tau")?,
        flow_mode: c.flow_mode,
        noise_sigma_deg: c.noise_sigma,
        seed: c.seed,
        starts: c.starts,
        format: c.format,
    });
    Ok(cfg)
}

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(cli: Cli) -> Result<u8> {
    if let Cmd::Report { file } = &cli.cmd {
        let text = std::fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
        let mut w = sink(cli.common.out.as_deref())?;
        w.write_all(report::render(&text)?.as_bytes())?;
        w.flush()?;
        return Ok(0);
    }

    let study = Study::new(config(&cli.common)?)?;
    let ctx = RunContext::new(&study)?;
    let fmt = study.config.format;
    let mut w = sink(cli.common.out.as_deref())?;
    let mut status = 0;
    match &cli.cmd {
        Cmd::Detect { line, obs } => {
            let k = line.as_deref().map(|l| study.line(l)).transpose()?;
            let out = cmd_detect(&ctx, k, obs.as_deref())?;
            log::info!("identified {}", study.case.line_name(out.report.identified));
            write_table(&mut w, fmt, "detect", &out.rows, Some(&out.observation))?;
        }
        Cmd::Attack { line, obs, vector_out } => {
            let [tau] = study.config.tau[..] else {
                bail!("attack takes a single --tau value, got {}", study.config.tau.len());
            };
            let out = cmd_attack(&ctx, study.line(line)?, tau, obs.as_deref())?;
            for w in &out.meta.warnings {
                log::warn!("{w}");
            }
            log::info!(
                "{}: rank {} -> {} ({})",
                out.meta.target,
                out.meta.pre_rank,
                out.meta.post_rank,
                if out.meta.masked { "masked" } else { "not masked" }
            );
            if let Some(p) = vector_out {
                let f = File::create(p).with_context(|| format!("creating {}", p.display()))?;
                serde_json::to_writer_pretty(BufWriter::new(f), &out.meta.attack)?;
            }
            write_table(&mut w, fmt, "attack", &out.rows, Some(&out.meta))?;
        }
        Cmd::SweepTau { lines } => {
            let targets = match lines {
                Some(l) => resolve_lines(&study.case, &parse_list::<String>(l)?)?,
                None => study.policy_lines.clone(),
            };
            let out = cmd_sweep_tau(&ctx, &targets, &study.config.tau)?;
            write_table::<_, _, ()>(&mut w, fmt, "sweep-tau", &out.rows, None)?;
            if out.failures > 0 {
                log::warn!("{} of {} sweep rows failed", out.failures, out.rows.len());
                status = EXIT_PARTIAL;
            }
        }
        Cmd::Gamma { line } => {
            let row = cmd_gamma(&ctx, study.line(line)?)?;
            write_table::<_, _, ()>(&mut w, fmt, "gamma", &[row], None)?;
        }
        Cmd::Report { .. } => unreachable!("handled above"),
    }
    w.flush()?;
    Ok(status)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
