//! Load-redistribution attacks that hide a line outage from the PMU residual
//! detector.
//!
//! The attacker shifts load measurements by ΔD (per-unit, one entry per load
//! in case order). The detector's residual for the true outaged line then
//! becomes ‖(α − G)ΔD + K‖, a convex quadratic in ΔD, which the attacker
//! maximizes over the polytope of admissible ΔD.

pub mod lp;
pub mod qp;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::case::{GridCase, IncidenceMatrices, LineId, PmuPlacement};
use crate::dc::{rad_to_deg, DcModel, Jacobian};
use crate::detection::{
    attacked_observation, identify_outage, DetectionReport, PmuObservation, OBSERVABILITY_TOL,
};
use crate::error::{Error, Result};
use crate::estimation::{estimate, estimate_residual, residual, MeasurementSet};
use crate::outage::{self, terminal_vector};

pub use lp::{maximize, LpSolution, Polytope};
pub use qp::{maximize_convex_quadratic, Certificate, QuadObjective, QpSolution, SolveOptions, StartKind};

pub const ATTACK_SCHEMA_VERSION: u32 = 1;
pub const MAX_TAU: f64 = 4.0;
/// Rows of the flow map below this magnitude are treated as identically zero.
const ZERO_ROW_TOL: f64 = 1e-12;
const CHECK_TOL: f64 = 1e-9;
const STEALTH_TOL: f64 = 1e-8;

/// Residual algebra for target line `k` under a load attack ΔD.
#[derive(Debug, Clone)]
pub struct ResidualModel {
    pub line: LineId,
    pub gamma: f64,
    pub e_vec: DVector<f64>,
    /// Row k of S·V: change of the target flow per unit ΔD, negated.
    pub s_kv: DVector<f64>,
    /// α = −R·Binv·(γ·e·S_k·V − V)
    pub alpha: DMatrix<f64>,
    /// β₁ = R·Δθ_m^E, the observation itself.
    pub beta1: DVector<f64>,
    /// β₂ = γ·R·Binv·e
    pub beta2: DVector<f64>,
    pub g: DMatrix<f64>,
    pub k: DVector<f64>,
    pub q_mat: DMatrix<f64>,
    pub q_lin: DVector<f64>,
}

pub fn build_residual_model(
    model: &DcModel,
    inc: &IncidenceMatrices,
    pmu: &PmuPlacement,
    k: LineId,
    obs: &PmuObservation,
) -> Result<ResidualModel> {
    if obs.delta_theta.len() != pmu.len() {
        return Err(Error::Dimension {
            expected: pmu.len(),
            got: obs.delta_theta.len(),
        });
    }
    let gamma = outage::gamma(model, k)?;
    let e = terminal_vector(model, k);
    let v = &inc.v;
    let rb = DMatrix::from_fn(pmu.len(), model.n_buses(), |r, c| model.binv_ext()[(pmu.pmu_rows[r], c)]);
    let s_kv: DVector<f64> = (model.shift_factors().row(k.0) * v).transpose();

    let rbe = &rb * &e;
    let beta2 = &rbe * gamma;
    let b22 = beta2.norm_squared();
    if beta2.norm() < OBSERVABILITY_TOL {
        return Err(Error::Unobservable {
            line: k,
            norm: beta2.norm(),
        });
    }
    let alpha = &rb * v - &rbe * s_kv.transpose() * gamma;
    let beta1 = obs.vector();
    let g = &beta2 * (alpha.transpose() * &beta2).transpose() / b22;
    let kv = &beta1 - &beta2 * (beta2.dot(&beta1) / b22);
    let a = &alpha - &g;
    let q_mat = a.transpose() * &a * 2.0;
    let q_lin = a.transpose() * &kv * 2.0;
    Ok(ResidualModel {
        line: k,
        gamma,
        e_vec: e,
        s_kv,
        alpha,
        beta1,
        beta2,
        g,
        k: kv,
        q_mat,
        q_lin,
    })
}

impl ResidualModel {
    pub fn n_loads(&self) -> usize {
        self.alpha.ncols()
    }

    /// f_k⁰ = −β₂ᵀ(αΔD + β₁)/β₂ᵀβ₂
    pub fn optimal_fk0(&self, dd: &DVector<f64>) -> f64 {
        -self.beta2.dot(&(&self.alpha * dd + &self.beta1)) / self.beta2.norm_squared()
    }

    /// ‖αΔD + β₁ + f·β₂‖ at a given flow `f`.
    pub fn residual_with_flow(&self, dd: &DVector<f64>, f: f64) -> f64 {
        (&self.alpha * dd + &self.beta1 + &self.beta2 * f).norm()
    }

    /// ‖(α − G)ΔD + K‖
    pub fn residual_at(&self, dd: &DVector<f64>) -> f64 {
        (&self.alpha * dd - &self.g * dd + &self.k).norm()
    }

    /// ½ΔDᵀQΔD + qᵀΔD
    pub fn objective(&self, dd: &DVector<f64>) -> f64 {
        0.5 * dd.dot(&(&self.q_mat * dd)) + self.q_lin.dot(dd)
    }

    /// Residual from the quadratic form: sqrt(objective + KᵀK).
    pub fn residual_from_objective(&self, dd: &DVector<f64>) -> f64 {
        (self.objective(dd) + self.k.norm_squared()).max(0.0).sqrt()
    }

    /// r_k without any attack.
    pub fn base_residual(&self) -> f64 {
        self.k.norm()
    }

    pub fn quad_objective(&self) -> QuadObjective {
        QuadObjective {
            q_mat: self.q_mat.clone(),
            q_lin: self.q_lin.clone(),
        }
    }
}

/// Which pre-outage flow enters the terminal-bus constraints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowMode {
    /// The detector's best-fit flow, affine in ΔD.
    #[default]
    BestFit,
    /// The actual pre-outage flow, fixed.
    Actual,
}

impl FlowMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FlowMode::BestFit => "best-fit",
            FlowMode::Actual => "actual",
        }
    }
}

impl std::str::FromStr for FlowMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "best-fit" => Ok(FlowMode::BestFit),
            "actual" => Ok(FlowMode::Actual),
            other => Err(Error::Invalid(format!("unknown flow mode '{other}' (best-fit | actual)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AttackProblem {
    pub rm: ResidualModel,
    pub tau: f64,
    pub mode: FlowMode,
    pub f_k0_actual: f64,
    pub polytope: Polytope,
    /// Load position of the from/to terminal, when it carries a load.
    pub terminal_loads: (Option<usize>, Option<usize>),
    /// Terminal loads D_i, D_j (per-unit, 0 without a load).
    pub terminal_demand: (f64, f64),
    /// Δp′(ΔD) = dp_const + dp_linᵀΔD
    pub dp_const: f64,
    pub dp_lin: DVector<f64>,
    /// Flow flow_map·ΔD induced on every line.
    pub flow_map: DMatrix<f64>,
    /// Injection measurement shift inj_map·ΔD.
    pub inj_map: DMatrix<f64>,
    pub infeasible_at_zero: bool,
    pub warnings: Vec<String>,
}

#[allow(clippy::too_many_arguments)]
pub fn assemble_problem(
    rm: &ResidualModel,
    case: &GridCase,
    model: &DcModel,
    inc: &IncidenceMatrices,
    pmu: &PmuPlacement,
    tau: f64,
    f_k0_actual: f64,
    mode: FlowMode,
) -> Result<AttackProblem> {
    if !(tau > 0.0 && tau <= MAX_TAU) {
        return Err(Error::InvalidTau(tau));
    }
    let mut warnings = Vec::new();
    if tau > 1.0 {
        warnings.push(format!("tau = {tau} exceeds 1: load measurements may change sign"));
    }
    let nd = rm.n_loads();
    let loads = case.loads();
    let demand = DVector::from_vec(case.loads_pu());
    let (i, j) = model.terminals(rm.line);
    let load_rows = case.load_bus_indices();
    let li = load_rows.iter().position(|&r| r == i);
    let lj = load_rows.iter().position(|&r| r == j);
    let di = li.map_or(0.0, |d| demand[d]);
    let dj = lj.map_or(0.0, |d| demand[d]);

    let b2 = &rm.beta2;
    let b22 = b2.norm_squared();
    let (c0, c) = match mode {
        FlowMode::BestFit => (-b2.dot(&rm.beta1) / b22, -(rm.alpha.transpose() * b2) / b22),
        FlowMode::Actual => (f_k0_actual, DVector::zeros(nd)),
    };
    let dp_const = -rm.gamma * c0;
    let dp_lin = (&c - &rm.s_kv) * -rm.gamma;

    let unit = |d: Option<usize>| {
        let mut u = DVector::zeros(nd);
        if let Some(d) = d {
            u[d] = 1.0;
        }
        u
    };
    let mut poly = Polytope::new(nd);
    // ΔP_i = ΔD_i − Δp′, ΔP_j = ΔD_j + Δp′, each within ±τD
    let row_i = unit(li) - &dp_lin;
    poly.push_ub(&row_i, tau * di + dp_const);
    poly.push_ub(&(-&row_i), tau * di - dp_const);
    let row_j = unit(lj) + &dp_lin;
    poly.push_ub(&row_j, tau * dj - dp_const);
    poly.push_ub(&(-&row_j), tau * dj + dp_const);
    for d in 0..nd {
        if Some(d) == li || Some(d) == lj {
            continue;
        }
        let u = unit(Some(d));
        poly.push_ub(&u, tau * demand[d]);
        poly.push_ub(&(-u), tau * demand[d]);
    }
    poly.push_eq(&DVector::from_element(nd, 1.0), 0.0);
    for (d, load) in loads.iter().enumerate() {
        if pmu.protects_bus(load.bus) {
            poly.push_eq(&unit(Some(d)), 0.0);
        }
    }
    let inj_map = -&inc.v - &rm.e_vec * rm.s_kv.transpose() * rm.gamma;
    let flow_map = model.shift_factors() * &inj_map;
    for &l in &pmu.protected_lines {
        let row = flow_map.row(l.0).transpose();
        if row.amax() >= ZERO_ROW_TOL {
            poly.push_eq(&row, 0.0);
        }
    }

    let infeasible_at_zero = !poly.contains(&DVector::zeros(nd), CHECK_TOL);
    if infeasible_at_zero {
        warnings.push(format!(
            "no attack leaves the terminal buses within budget: |dp'| = {:.4} pu against tau*D = ({:.4}, {:.4}) pu",
            dp_const.abs(),
            tau * di,
            tau * dj
        ));
    }
    for w in &warnings {
        log::debug!("line {}: {w}", case.line_name(rm.line));
    }
    Ok(AttackProblem {
        rm: rm.clone(),
        tau,
        mode,
        f_k0_actual,
        polytope: poly,
        terminal_loads: (li, lj),
        terminal_demand: (di, dj),
        dp_const,
        dp_lin,
        flow_map,
        inj_map,
        infeasible_at_zero,
        warnings,
    })
}

impl AttackProblem {
    pub fn delta_p_prime(&self, dd: &DVector<f64>) -> f64 {
        self.dp_const + self.dp_lin.dot(dd)
    }

    /// Flow on the target line assumed by the terminal constraints, before
    /// the attack's own flow change.
    pub fn assumed_flow(&self, dd: &DVector<f64>) -> f64 {
        match self.mode {
            FlowMode::BestFit => self.rm.optimal_fk0(dd),
            FlowMode::Actual => self.f_k0_actual,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverTrace {
    pub seed: u64,
    pub starts_requested: usize,
    pub best_start: usize,
    pub starts: Vec<StartKind>,
    pub certificate: Certificate,
}

/// Solved attack, per-unit and radians.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackVector {
    pub line: LineId,
    pub tau: f64,
    pub mode: FlowMode,
    pub delta_d: DVector<f64>,
    pub delta_f: DVector<f64>,
    pub delta_p_prime: f64,
    /// Pre-outage flow used in Δp′ (best-fit or actual, per mode).
    pub flow_used: f64,
    /// f_k⁰ at the solution.
    pub best_fit_flow: f64,
    pub base_residual: f64,
    pub achieved_residual: f64,
    pub objective: f64,
    pub trace: SolverTrace,
}

pub fn solve_attack(prob: &AttackProblem, opts: &SolveOptions, warm: Option<&DVector<f64>>) -> Result<AttackVector> {
    let sol = maximize_convex_quadratic(&prob.rm.quad_objective(), &prob.polytope, opts, warm)?;
    let trace = SolverTrace {
        seed: opts.seed,
        starts_requested: opts.starts,
        best_start: sol.best_start,
        starts: sol.starts,
        certificate: sol.certificate,
    };
    Ok(evaluate_attack(prob, sol.x, trace))
}

/// Attack vector for a given ΔD under `prob`, with the supplied trace.
pub fn evaluate_attack(prob: &AttackProblem, dd: DVector<f64>, trace: SolverTrace) -> AttackVector {
    AttackVector {
        line: prob.rm.line,
        tau: prob.tau,
        mode: prob.mode,
        delta_f: &prob.flow_map * &dd,
        delta_p_prime: prob.delta_p_prime(&dd),
        flow_used: prob.assumed_flow(&dd),
        best_fit_flow: prob.rm.optimal_fk0(&dd),
        base_residual: prob.rm.base_residual(),
        achieved_residual: prob.rm.residual_from_objective(&dd),
        objective: prob.rm.objective(&dd),
        trace,
        delta_d: dd,
    }
}

/// The no-attack vector ΔD = 0 with a certificate evaluated at the origin.
pub fn zero_attack(prob: &AttackProblem) -> Result<AttackVector> {
    let dd = DVector::zeros(prob.rm.n_loads());
    let certificate = qp::certificate(&prob.rm.quad_objective(), &prob.polytope, &dd)?;
    let trace = SolverTrace {
        seed: 0,
        starts_requested: 0,
        best_start: 0,
        starts: Vec::new(),
        certificate,
    };
    Ok(evaluate_attack(prob, dd, trace))
}

impl AttackVector {
    /// Net terminal injection changes (ΔP_i, ΔP_j), per-unit.
    pub fn terminal_net(&self, prob_terminals: (Option<usize>, Option<usize>)) -> (f64, f64) {
        let di = prob_terminals.0.map_or(0.0, |d| self.delta_d[d]);
        let dj = prob_terminals.1.map_or(0.0, |d| self.delta_d[d]);
        outage::terminal_net_injections(di, dj, self.delta_p_prime)
    }

    /// Injection measurement shift −VΔD − γ·e·(S_k·V·ΔD).
    pub fn injection_shift(&self, case: &GridCase, model: &DcModel) -> Result<DVector<f64>> {
        let inc = crate::case::build_incidence(case);
        if self.delta_d.len() != inc.v.ncols() {
            return Err(Error::Dimension {
                expected: inc.v.ncols(),
                got: self.delta_d.len(),
            });
        }
        let gamma = outage::gamma(model, self.line)?;
        let dfk = (model.shift_factors().row(self.line.0) * &inc.v * &self.delta_d)[0];
        Ok(-(&inc.v * &self.delta_d) - terminal_vector(model, self.line) * (gamma * dfk))
    }

    pub fn to_record(&self, case: &GridCase) -> AttackRecord {
        let base = case.base_mva();
        let (i, j) = case.terminals(self.line).expect("attack line belongs to case");
        let rows = case.load_bus_indices();
        let pick = |r: usize| rows.iter().position(|&x| x == r);
        let (ni, nj) = self.terminal_net((pick(i), pick(j)));
        AttackRecord {
            schema_version: ATTACK_SCHEMA_VERSION,
            target_line: case.line_name(self.line),
            target_index: self.line.0 + 1,
            tau: self.tau,
            flow_mode: self.mode,
            delta_d: case
                .loads()
                .iter()
                .zip(self.delta_d.iter())
                .map(|(l, d)| LoadShift { bus: l.bus, mw: d * base })
                .collect(),
            delta_f: (0..case.n_lines())
                .map(|l| LineShift {
                    index: l + 1,
                    name: case.line_name(LineId(l)),
                    mw: self.delta_f[l] * base,
                })
                .collect(),
            terminal: TerminalRecord {
                from_bus: case.buses()[i].id,
                to_bus: case.buses()[j].id,
                delta_p_prime_mw: self.delta_p_prime * base,
                net_from_mw: ni * base,
                net_to_mw: nj * base,
            },
            flow_used_mw: self.flow_used * base,
            best_fit_flow_mw: self.best_fit_flow * base,
            base_residual_deg: rad_to_deg(self.base_residual),
            achieved_residual_deg: rad_to_deg(self.achieved_residual),
            objective: self.objective,
            solver: self.trace.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadShift {
    pub bus: u32,
    pub mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineShift {
    pub index: usize,
    pub name: String,
    pub mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalRecord {
    pub from_bus: u32,
    pub to_bus: u32,
    pub delta_p_prime_mw: f64,
    pub net_from_mw: f64,
    pub net_to_mw: f64,
}

/// Serialized attack vector, MW and degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackRecord {
    pub schema_version: u32,
    pub target_line: String,
    pub target_index: usize,
    pub tau: f64,
    pub flow_mode: FlowMode,
    pub delta_d: Vec<LoadShift>,
    pub delta_f: Vec<LineShift>,
    pub terminal: TerminalRecord,
    pub flow_used_mw: f64,
    pub best_fit_flow_mw: f64,
    pub base_residual_deg: f64,
    pub achieved_residual_deg: f64,
    pub objective: f64,
    pub solver: SolverTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub ok: bool,
    /// Worst observed deviation for this check.
    pub worst: f64,
}

impl Check {
    fn at_most(worst: f64, tol: f64) -> Self {
        Check { ok: worst <= tol, worst }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub zero_sum: Check,
    pub load_bounds: Check,
    pub terminal_bounds: Check,
    pub pmu_injections: Check,
    pub pmu_flows: Check,
    pub flow_map: Check,
    /// Least-squares residual of Δz = HΔθ.
    pub stealth: Check,
    /// Largest change of the estimation residual over the base sets.
    pub residual_invariance: Check,
    /// |detector residual on attacked data − attacker's residual|.
    pub detector_agreement: Check,
    /// |Δp′ − (−γ × detector best-fit flow)|, best-fit mode only.
    pub flow_agreement: Option<Check>,
    pub pre_rank: usize,
    pub post_rank: usize,
    pub masked: bool,
    pub post_report: DetectionReport,
}

impl VerificationReport {
    pub fn invariants_hold(&self) -> bool {
        [
            &self.zero_sum,
            &self.load_bounds,
            &self.terminal_bounds,
            &self.pmu_injections,
            &self.pmu_flows,
            &self.flow_map,
        ]
        .iter()
        .all(|c| c.ok)
    }

    pub fn stealthy(&self) -> bool {
        self.stealth.ok && self.residual_invariance.ok
    }

    pub fn passed(&self) -> bool {
        self.invariants_hold()
            && self.stealthy()
            && self.detector_agreement.ok
            && self.flow_agreement.as_ref().is_none_or(|c| c.ok)
    }
}

pub struct VerifyInputs<'a> {
    pub case: &'a GridCase,
    pub model: &'a DcModel,
    pub pmu: &'a PmuPlacement,
    pub jac: &'a Jacobian,
    /// Observation the attack was built against.
    pub obs: &'a PmuObservation,
    pub candidates: &'a [LineId],
    /// Base measurement sets for the residual-invariance check.
    pub base_measurements: &'a [MeasurementSet],
}

/// Checks an attack against the case directly, independent of the problem
/// it was solved from.
pub fn verify_attack(av: &AttackVector, inp: &VerifyInputs<'_>) -> Result<VerificationReport> {
    let case = inp.case;
    let model = inp.model;
    let nd = case.loads().len();
    if av.delta_d.len() != nd || av.delta_f.len() != case.n_lines() {
        return Err(Error::Dimension {
            expected: nd,
            got: av.delta_d.len(),
        });
    }
    let demand = case.loads_pu();
    let rows = case.load_bus_indices();
    let (i, j) = model.terminals(av.line);
    let tol = |x: f64| CHECK_TOL * (1.0 + x.abs());

    let zero_sum = Check::at_most(av.delta_d.sum().abs(), CHECK_TOL);

    let mut worst_bound = 0.0f64;
    let (mut di, mut dj, mut ddi, mut ddj) = (0.0, 0.0, 0.0, 0.0);
    for d in 0..nd {
        let lim = av.tau * demand[d];
        if rows[d] == i {
            di = demand[d];
            ddi = av.delta_d[d];
        } else if rows[d] == j {
            dj = demand[d];
            ddj = av.delta_d[d];
        } else {
            worst_bound = worst_bound.max(av.delta_d[d].abs() - lim - tol(lim));
        }
    }
    let load_bounds = Check::at_most(worst_bound.max(0.0), 0.0);
    let (ni, nj) = outage::terminal_net_injections(ddi, ddj, av.delta_p_prime);
    let term = (ni.abs() - av.tau * di - tol(av.tau * di)).max(nj.abs() - av.tau * dj - tol(av.tau * dj));
    let terminal_bounds = Check::at_most(term.max(0.0), 0.0);

    let pmu_inj = case
        .loads()
        .iter()
        .zip(av.delta_d.iter())
        .filter(|(l, _)| inp.pmu.protects_bus(l.bus))
        .fold(0.0f64, |m, (_, d)| m.max(d.abs()));
    let pmu_injections = Check::at_most(pmu_inj, CHECK_TOL);
    let pmu_fl = inp
        .pmu
        .protected_lines
        .iter()
        .fold(0.0f64, |m, l| m.max(av.delta_f[l.0].abs()));
    let pmu_flows = Check::at_most(pmu_fl, CHECK_TOL);

    let dz_inj = av.injection_shift(case, model)?;
    let expected_f = model.shift_factors() * &dz_inj;
    let flow_map = Check::at_most((&expected_f - &av.delta_f).amax(), CHECK_TOL);

    // Stealth: Δz must lie in the range of H.
    let dz = inp.jac.stack(&dz_inj, &av.delta_f);
    let dz_set = MeasurementSet::new(dz.as_slice().to_vec(), 1.0);
    let dtheta = estimate(inp.jac, &dz_set)?;
    let stealth = Check::at_most(residual(inp.jac, &dz, &dtheta), STEALTH_TOL);
    let mut inv = 0.0f64;
    for base in inp.base_measurements {
        let r0 = estimate_residual(inp.jac, base)?;
        let r1 = estimate_residual(inp.jac, &base.perturbed(&dz))?;
        inv = inv.max((r1 - r0).abs());
    }
    let residual_invariance = Check::at_most(inv, STEALTH_TOL);

    // Detector rerun: the falsified loads move the computed pre-outage angles.
    let load_shift = -(build_v(case) * &av.delta_d);
    let pre_report = identify_outage(model, inp.pmu, inp.obs, inp.candidates)?;
    let attacked = attacked_observation(model, inp.pmu, inp.obs, &load_shift)?;
    let post_report = identify_outage(model, inp.pmu, &attacked, inp.candidates)?;
    let pre_rank = pre_report.rank_of(av.line).unwrap_or(0);
    let post_rank = post_report.rank_of(av.line).unwrap_or(0);
    let det = crate::detection::candidate_residual(model, inp.pmu, &attacked, av.line)?;
    let detector_agreement = Check::at_most((det.residual - av.achieved_residual).abs(), STEALTH_TOL);
    let flow_agreement = match av.mode {
        FlowMode::BestFit => {
            let g = outage::gamma(model, av.line)?;
            Some(Check::at_most((av.delta_p_prime + g * det.best_fit_flow).abs(), 1e-8 * (1.0 + av.delta_p_prime.abs())))
        }
        FlowMode::Actual => None,
    };

    Ok(VerificationReport {
        zero_sum,
        load_bounds,
        terminal_bounds,
        pmu_injections,
        pmu_flows,
        flow_map,
        stealth,
        residual_invariance,
        detector_agreement,
        flow_agreement,
        pre_rank,
        post_rank,
        masked: post_rank > 1,
        post_report,
    })
}

fn build_v(case: &GridCase) -> DMatrix<f64> {
    crate::case::build_incidence(case).v
}

#[cfg(test)]
mod tests;
