//! Single-line outage simulation, by topology change and by the equivalent
//! terminal injection on the intact network.

use nalgebra::{Cholesky, DVector};
use serde::Serialize;

use crate::case::{is_connected_without, GridCase, LineId};
use crate::dc::{self, DcModel};
use crate::error::{Error, Result};

/// |Xth - x_k| below this marks an islanding outage.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// Thevenin view of a line's terminals through the intact network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thevenin {
    pub line: LineId,
    pub reactance: f64,
    pub binv_ii: f64,
    pub binv_jj: f64,
    pub binv_ij: f64,
    /// Binv_ii + Binv_jj - 2 Binv_ij
    pub xth: f64,
    pub gamma: f64,
}

pub fn thevenin(model: &DcModel, k: LineId) -> Result<Thevenin> {
    if k.0 >= model.n_lines() {
        return Err(Error::UnknownLine(k.to_string()));
    }
    if !model.in_service(k) {
        return Err(Error::LineOutOfService { line: k });
    }
    let (i, j) = model.terminals(k);
    let binv = model.binv_ext();
    let (binv_ii, binv_jj, binv_ij) = (binv[(i, i)], binv[(j, j)], binv[(i, j)]);
    let xth = binv_ii + binv_jj - 2.0 * binv_ij;
    let x = model.reactance(k);
    let gap = xth - x;
    if gap.abs() < DEGENERACY_TOL {
        return Err(Error::DegenerateOutage { line: k, gap: gap.abs() });
    }
    Ok(Thevenin {
        line: k,
        reactance: x,
        binv_ii,
        binv_jj,
        binv_ij,
        xth,
        gamma: x / gap,
    })
}

/// γ = x_k / (Xth − x_k).
pub fn gamma(model: &DcModel, k: LineId) -> Result<f64> {
    thevenin(model, k).map(|t| t.gamma)
}

/// Terminal vector: +1 at the from-bus, -1 at the to-bus.
pub fn terminal_vector(model: &DcModel, k: LineId) -> DVector<f64> {
    let (i, j) = model.terminals(k);
    let mut e = DVector::zeros(model.n_buses());
    e[i] = 1.0;
    e[j] = -1.0;
    e
}

#[derive(Debug, Clone)]
pub struct OutageScenario {
    pub line: LineId,
    pub gamma: f64,
    pub e_vec: DVector<f64>,
    /// Pre-outage flow on the line, per-unit.
    pub f_k0_actual: f64,
    pub p_pre: DVector<f64>,
}

impl OutageScenario {
    pub fn new(model: &DcModel, k: LineId, p_pre: DVector<f64>) -> Result<Self> {
        let gamma = gamma(model, k)?;
        let theta = model.solve_angles(&p_pre)?;
        let f_k0_actual = model.line_flows(&theta)[k.0];
        Ok(OutageScenario {
            line: k,
            gamma,
            e_vec: terminal_vector(model, k),
            f_k0_actual,
            p_pre,
        })
    }

    /// Δp = −γ f.
    pub fn equivalent_injection(&self, f: f64) -> f64 {
        -self.gamma * f
    }

    /// Injection vector that emulates the outage on the intact topology:
    /// `p_pre + e Δp` with Δp taken at the actual pre-outage flow.
    pub fn post_outage_injection(&self) -> DVector<f64> {
        &self.p_pre + &self.e_vec * self.equivalent_injection(self.f_k0_actual)
    }
}

/// Net injection changes at the from/to terminals when load measurements
/// there move by `dd_i`, `dd_j` and the outage is emulated by `dp`:
/// (ΔD_i − Δp, ΔD_j + Δp).
pub fn terminal_net_injections(dd_i: f64, dd_j: f64, dp: f64) -> (f64, f64) {
    (dd_i - dp, dd_j + dp)
}

/// Post-outage angles on the unchanged topology using the equivalent
/// injection.
pub fn post_outage_angles_equiv(model: &DcModel, scenario: &OutageScenario) -> Result<DVector<f64>> {
    model.solve_angles(&scenario.post_outage_injection())
}

/// Post-outage angles from a rebuilt susceptance matrix with line `k`
/// removed.
pub fn post_outage_angles_exact(case: &GridCase, k: LineId, p_pre: &DVector<f64>) -> Result<DVector<f64>> {
    let line = case.line(k)?;
    if !line.in_service {
        return Err(Error::LineOutOfService { line: k });
    }
    let n = case.n_buses();
    if p_pre.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: p_pre.len(),
        });
    }
    let sum = p_pre.sum();
    if sum.abs() > dc::INJECTION_BALANCE_TOL {
        return Err(Error::Unbalanced { sum });
    }
    if !is_connected_without(case, Some(k)) {
        return Err(Error::Topology(format!("removing line {} islands the network", case.line_name(k))));
    }
    let out = case.with_line_out(k)?;
    let (reduced, b_red) = dc::reduce(&dc::susceptance(&out), case.slack_index());
    let chol = Cholesky::new(b_red)
        .ok_or_else(|| Error::Topology(format!("removing line {} islands the network", case.line_name(k))))?;
    let rhs = DVector::from_iterator(reduced.len(), reduced.iter().map(|&i| p_pre[i]));
    let sol = chol.solve(&rhs);
    let mut theta = DVector::zeros(n);
    for (r, &i) in reduced.iter().enumerate() {
        theta[i] = sol[r];
    }
    Ok(theta)
}
