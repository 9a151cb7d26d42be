//! The five harness commands as library functions.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use gridmask_core::attack::{
    assemble_problem, build_residual_model, solve_attack, verify_attack, AttackRecord, AttackVector,
    VerificationReport, VerifyInputs,
};
use gridmask_core::case::{build_incidence, is_islanding_line, IncidenceMatrices};
use gridmask_core::dc::{deg_to_rad, rad_to_deg, Jacobian};
use gridmask_core::detection::{identify_outage, parse_observation, simulate_observation, DetectionReport, PmuObservation};
use gridmask_core::estimation::{estimate, noisy_measurements, MeasurementSet};
use gridmask_core::outage::thevenin;
use gridmask_core::{DcModel, Error, LineId};
use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::Study;
use crate::output::{AttackRow, DetectRow, GammaRow, SweepRow};

/// Number of random base measurement sets an attack is verified against.
pub const VERIFY_BASE_SETS: u64 = 10;

/// Model state shared by all commands of one run.
pub struct RunContext<'a> {
    pub study: &'a Study,
    pub model: DcModel,
    pub inc: IncidenceMatrices,
    pub jac: Jacobian,
    /// Noisy base-case measurement sets, seeds `noise.seed + 1 ..`.
    pub base_sets: Vec<MeasurementSet>,
}

impl<'a> RunContext<'a> {
    pub fn new(study: &'a Study) -> Result<Self> {
        let model = DcModel::build(&study.case)?;
        let inc = build_incidence(&study.case);
        let jac = model.build_jacobian();
        let theta = model.solve_angles(model.base_injection())?;
        let n = &study.config.noise;
        let base_sets = (1..=VERIFY_BASE_SETS)
            .map(|s| noisy_measurements(&jac, &theta, n.measurement_frac, n.seed.wrapping_add(s)))
            .collect();
        Ok(RunContext {
            study,
            model,
            inc,
            jac,
            base_sets,
        })
    }

    fn name(&self, l: LineId) -> String {
        self.study.case.line_name(l)
    }

    /// PMU angle changes: read from `obs_file`, or simulated for a true
    /// outage of `line` with the configured angle noise.
    pub fn observation(&self, line: Option<LineId>, obs_file: Option<&Path>) -> Result<PmuObservation> {
        let s = self.study;
        if let Some(path) = obs_file {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            return parse_observation(&text, &s.pmu).with_context(|| format!("in {}", path.display()));
        }
        let Some(k) = line else {
            bail!("give either a true outage line (--line) or an observation file (--obs)");
        };
        let n = &s.config.noise;
        let noise = (n.sigma_deg > 0.0).then(|| (deg_to_rad(n.sigma_deg), n.seed));
        simulate_observation(&s.case, &self.model, k, &s.pmu, self.model.base_injection(), noise)
            .with_context(|| format!("simulating the outage of {}", self.name(k)))
    }

    /// The attacker's view of the pre-outage flow on `k`: the flow of the
    /// state estimated from the first noisy measurement set.
    pub fn estimated_flow(&self, k: LineId) -> Result<f64> {
        let n = &self.study.config.noise;
        let theta = self.model.solve_angles(self.model.base_injection())?;
        let meas = noisy_measurements(&self.jac, &theta, n.measurement_frac, n.seed);
        let est = estimate(&self.jac, &meas)?;
        Ok(self.model.line_flows(&est)[k.0])
    }

    pub fn detect_rows(&self, rep: &DetectionReport) -> Vec<DetectRow> {
        let base = self.study.case.base_mva();
        rep.ranking
            .iter()
            .map(|r| DetectRow {
                rank: r.rank,
                line: self.name(r.fit.line),
                index: r.fit.line.0 + 1,
                residual_deg: rad_to_deg(r.fit.residual),
                best_fit_flow_mw: r.fit.best_fit_flow * base,
                observable: r.fit.observable,
            })
            .collect()
    }
}

pub struct DetectOutput {
    pub observation: PmuObservation,
    pub report: DetectionReport,
    pub rows: Vec<DetectRow>,
}

pub fn cmd_detect(ctx: &RunContext<'_>, true_line: Option<LineId>, obs_file: Option<&Path>) -> Result<DetectOutput> {
    let obs = ctx.observation(true_line, obs_file)?;
    let report = identify_outage(&ctx.model, &ctx.study.pmu, &obs, &ctx.study.candidates)?;
    let rows = ctx.detect_rows(&report);
    Ok(DetectOutput {
        observation: obs,
        report,
        rows,
    })
}

/// Run-level summary written next to the ranking rows in JSON output.
#[derive(Debug, Clone, Serialize)]
pub struct AttackMeta {
    pub target: String,
    pub tau: f64,
    pub pre_rank: usize,
    pub post_rank: usize,
    pub masked: bool,
    pub attack: AttackRecord,
    pub verification: VerificationReport,
    pub warnings: Vec<String>,
}

pub struct AttackOutput {
    pub vector: AttackVector,
    pub meta: AttackMeta,
    pub rows: Vec<AttackRow>,
}

fn check_target(ctx: &RunContext<'_>, k: LineId) -> Result<()> {
    let s = ctx.study;
    if is_islanding_line(&s.case, k)? {
        bail!("target {} is an islanding line: its outage cannot be simulated or masked", ctx.name(k));
    }
    if s.pmu.covers_line(k) {
        bail!("target {} touches a PMU bus; its flow measurements cannot be altered", ctx.name(k));
    }
    Ok(())
}

/// Solves and verifies one attack. `warm` seeds the solver.
pub fn attack_once(
    ctx: &RunContext<'_>,
    k: LineId,
    tau: f64,
    obs: &PmuObservation,
    warm: Option<&DVector<f64>>,
) -> Result<(AttackVector, VerificationReport, Vec<String>)> {
    let s = ctx.study;
    let rm = build_residual_model(&ctx.model, &ctx.inc, &s.pmu, k, obs)?;
    let f_actual = ctx.estimated_flow(k)?;
    let prob = assemble_problem(&rm, &s.case, &ctx.model, &ctx.inc, &s.pmu, tau, f_actual, s.config.flow_mode)?;
    let warm = warm.filter(|x| prob.polytope.contains(x, gridmask_core::attack::qp::FEAS_TOL));
    let av = solve_attack(&prob, &s.config.solver.options(), warm)?;
    let inputs = VerifyInputs {
        case: &s.case,
        model: &ctx.model,
        pmu: &s.pmu,
        jac: &ctx.jac,
        obs,
        candidates: &s.candidates,
        base_measurements: &ctx.base_sets,
    };
    let rep = verify_attack(&av, &inputs)?;
    if !rep.passed() {
        bail!("attack on {} at tau = {tau} failed verification: {}", ctx.name(k), failed_checks(&rep));
    }
    Ok((av, rep, prob.warnings))
}

fn failed_checks(rep: &VerificationReport) -> String {
    let checks = [
        ("zero_sum", &rep.zero_sum),
        ("load_bounds", &rep.load_bounds),
        ("terminal_bounds", &rep.terminal_bounds),
        ("pmu_injections", &rep.pmu_injections),
        ("pmu_flows", &rep.pmu_flows),
        ("flow_map", &rep.flow_map),
        ("stealth", &rep.stealth),
        ("residual_invariance", &rep.residual_invariance),
        ("detector_agreement", &rep.detector_agreement),
    ];
    let mut out: Vec<String> = checks
        .iter()
        .filter(|(_, c)| !c.ok)
        .map(|(n, c)| format!("{n} (worst {:.3e})", c.worst))
        .collect();
    if let Some(c) = rep.flow_agreement.as_ref().filter(|c| !c.ok) {
        out.push(format!("flow_agreement (worst {:.3e})", c.worst));
    }
    out.join(", ")
}

pub fn cmd_attack(ctx: &RunContext<'_>, target: LineId, tau: f64, obs_file: Option<&Path>) -> Result<AttackOutput> {
    check_target(ctx, target)?;
    let obs = ctx.observation(Some(target), obs_file)?;
    let (av, rep, warnings) = attack_once(ctx, target, tau, &obs, None)?;
    let pre = identify_outage(&ctx.model, &ctx.study.pmu, &obs, &ctx.study.candidates)?;
    fn tag(phase: &'static str, rows: Vec<DetectRow>) -> impl Iterator<Item = AttackRow> {
        rows.into_iter().map(move |r| AttackRow {
            phase: phase.to_string(),
            rank: r.rank,
            line: r.line,
            index: r.index,
            residual_deg: r.residual_deg,
            best_fit_flow_mw: r.best_fit_flow_mw,
            observable: r.observable,
        })
    }
    let rows = tag("pre", ctx.detect_rows(&pre))
        .chain(tag("post", ctx.detect_rows(&rep.post_report)))
        .collect();
    let meta = AttackMeta {
        target: ctx.name(target),
        tau,
        pre_rank: rep.pre_rank,
        post_rank: rep.post_rank,
        masked: rep.masked,
        attack: av.to_record(&ctx.study.case),
        verification: rep,
        warnings,
    };
    Ok(AttackOutput { vector: av, meta, rows })
}

pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub failures: usize,
}

fn sweep_line(ctx: &RunContext<'_>, k: LineId, taus: &[f64]) -> Vec<SweepRow> {
    let row = |tau: f64| SweepRow {
        line: ctx.name(k),
        index: k.0 + 1,
        tau,
        status: "ok".into(),
        base_residual_deg: None,
        residual_deg: None,
        rank: None,
        masked: None,
        objective: None,
        message: String::new(),
    };
    let fail = |tau: f64, e: &anyhow::Error| {
        log::warn!("{} at tau = {tau}: {e:#}", ctx.name(k));
        SweepRow {
            status: "error".into(),
            message: format!("{e:#}"),
            ..row(tau)
        }
    };
    let obs = match check_target(ctx, k).and_then(|_| ctx.observation(Some(k), None)) {
        Ok(o) => o,
        Err(e) => return taus.iter().map(|&t| fail(t, &e)).collect(),
    };
    let pre = match identify_outage(&ctx.model, &ctx.study.pmu, &obs, &ctx.study.candidates) {
        Ok(r) => r,
        Err(e) => {
            let e = anyhow::Error::from(e);
            return taus.iter().map(|&t| fail(t, &e)).collect();
        }
    };
    let mut warm: Option<DVector<f64>> = None;
    let mut rows = Vec::with_capacity(taus.len());
    for &tau in taus {
        match attack_once(ctx, k, tau, &obs, warm.as_ref()) {
            Ok((av, rep, warnings)) => {
                rows.push(SweepRow {
                    base_residual_deg: Some(rad_to_deg(av.base_residual)),
                    residual_deg: Some(rad_to_deg(av.achieved_residual)),
                    rank: Some(rep.post_rank),
                    masked: Some(rep.masked),
                    objective: Some(av.objective),
                    message: warnings.join("; "),
                    ..row(tau)
                });
                warm = Some(av.delta_d);
            }
            // No admissible attack: the detector sees the unaltered data.
            Err(e) if matches!(e.downcast_ref::<Error>(), Some(Error::Infeasible)) => {
                let fit = pre.fit_of(k).map(|f| rad_to_deg(f.residual));
                rows.push(SweepRow {
                    status: "infeasible".into(),
                    base_residual_deg: fit,
                    residual_deg: fit,
                    rank: pre.rank_of(k),
                    masked: pre.rank_of(k).map(|r| r > 1),
                    message: format!("{e:#}"),
                    ..row(tau)
                });
            }
            Err(e) => rows.push(fail(tau, &e)),
        }
    }
    rows
}

/// Attacks every line at every τ. Lines run in parallel; τ ascends per line
/// with each solve warm-started from the previous one.
pub fn cmd_sweep_tau(ctx: &RunContext<'_>, lines: &[LineId], taus: &[f64]) -> Result<SweepOutput> {
    if lines.is_empty() {
        bail!("no lines to sweep");
    }
    let mut taus = taus.to_vec();
    taus.sort_by(f64::total_cmp);
    taus.dedup();
    let per_line: Vec<Vec<SweepRow>> = lines.par_iter().map(|&k| sweep_line(ctx, k, &taus)).collect();
    let rows: Vec<SweepRow> = per_line.into_iter().flatten().collect();
    let failures = rows.iter().filter(|r| r.status == "error").count();
    Ok(SweepOutput { rows, failures })
}

pub fn cmd_gamma(ctx: &RunContext<'_>, k: LineId) -> Result<GammaRow> {
    let t = thevenin(&ctx.model, k).map_err(|e| anyhow!(e)).with_context(|| format!("line {}", ctx.name(k)))?;
    Ok(GammaRow {
        line: ctx.name(k),
        index: k.0 + 1,
        x_pu: t.reactance,
        binv_ii: t.binv_ii,
        binv_jj: t.binv_jj,
        binv_ij: t.binv_ij,
        xth: t.xth,
        gamma: t.gamma,
    })
}
