//! PMU residual detector: for each candidate line, fit the outage flow that
//! best explains the observed PMU angle changes and rank candidates by the
//! remaining mismatch.

use std::fmt::Write as _;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::case::{GridCase, LineId, PmuPlacement};
use crate::dc::{deg_to_rad, rad_to_deg, DcModel};
use crate::error::{Error, Result};
use crate::outage::{self, post_outage_angles_exact};

/// ‖β₂‖ below this means the candidate's outage is invisible to the PMUs.
pub const OBSERVABILITY_TOL: f64 = 1e-12;
/// Residuals within this fraction of ‖obs‖ are treated as ties.
pub const TIE_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmuObservation {
    /// Angle changes at the PMU buses, radians, in placement order.
    pub delta_theta: Vec<f64>,
    pub true_line: Option<LineId>,
    pub noise_seed: Option<u64>,
}

impl PmuObservation {
    pub fn new(delta_theta: Vec<f64>) -> Self {
        PmuObservation {
            delta_theta,
            true_line: None,
            noise_seed: None,
        }
    }

    pub fn zeros(pmu: &PmuPlacement) -> Self {
        Self::new(vec![0.0; pmu.len()])
    }

    pub fn vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.delta_theta)
    }

    fn check(&self, pmu: &PmuPlacement) -> Result<()> {
        if self.delta_theta.len() != pmu.len() {
            return Err(Error::Dimension {
                expected: pmu.len(),
                got: self.delta_theta.len(),
            });
        }
        Ok(())
    }
}

/// Observed PMU angle changes for a true outage of `k`, from the exact
/// post-outage topology. `noise` is (σ in radians, seed).
pub fn simulate_observation(
    case: &GridCase,
    model: &DcModel,
    k: LineId,
    pmu: &PmuPlacement,
    p_pre: &DVector<f64>,
    noise: Option<(f64, u64)>,
) -> Result<PmuObservation> {
    let pre = model.solve_angles(p_pre)?;
    let post = post_outage_angles_exact(case, k, p_pre)?;
    let mut delta: Vec<f64> = pmu.pmu_rows.iter().map(|&r| post[r] - pre[r]).collect();
    let mut noise_seed = None;
    if let Some((sigma, seed)) = noise {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::Invalid(format!("noise sigma must be finite and >= 0, got {sigma}")));
        }
        if sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let dist = Normal::new(0.0, sigma).expect("sigma checked");
            for d in &mut delta {
                *d += dist.sample(&mut rng);
            }
        }
        noise_seed = Some(seed);
    }
    Ok(PmuObservation {
        delta_theta: delta,
        true_line: Some(k),
        noise_seed,
    })
}

/// β₂ = γ_l · R · Binv · e_l for candidate `l`.
pub fn candidate_beta2(model: &DcModel, pmu: &PmuPlacement, l: LineId) -> Result<DVector<f64>> {
    let g = outage::gamma(model, l)?;
    let (i, j) = model.terminals(l);
    let binv = model.binv_ext();
    Ok(DVector::from_iterator(
        pmu.len(),
        pmu.pmu_rows.iter().map(|&r| g * (binv[(r, i)] - binv[(r, j)])),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateFit {
    pub line: LineId,
    /// Radians.
    pub residual: f64,
    /// Per-unit.
    pub best_fit_flow: f64,
    pub observable: bool,
}

/// Residual of `beta1` after removing its component along `beta2`.
pub(crate) fn fit_along(line: LineId, beta1: &DVector<f64>, beta2: &DVector<f64>) -> CandidateFit {
    let b22 = beta2.norm_squared();
    if beta2.norm() < OBSERVABILITY_TOL {
        return CandidateFit {
            line,
            residual: beta1.norm(),
            best_fit_flow: 0.0,
            observable: false,
        };
    }
    let f = -beta2.dot(beta1) / b22;
    let resid = beta1 + beta2 * f;
    CandidateFit {
        line,
        residual: resid.norm(),
        best_fit_flow: f,
        observable: true,
    }
}

pub fn candidate_residual(
    model: &DcModel,
    pmu: &PmuPlacement,
    obs: &PmuObservation,
    l: LineId,
) -> Result<CandidateFit> {
    obs.check(pmu)?;
    let beta2 = candidate_beta2(model, pmu, l)?;
    Ok(fit_along(l, &obs.vector(), &beta2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFit {
    pub rank: usize,
    #[serde(flatten)]
    pub fit: CandidateFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    /// Ascending by residual; ties (within the tie tolerance) by line index.
    pub ranking: Vec<RankedFit>,
    pub identified: LineId,
    pub tie_tolerance: f64,
}

impl DetectionReport {
    /// Competition rank of `line`: one plus the number of candidates whose
    /// residual is smaller beyond the tie tolerance.
    pub fn rank_of(&self, line: LineId) -> Option<usize> {
        self.ranking.iter().find(|r| r.fit.line == line).map(|r| r.rank)
    }

    pub fn fit_of(&self, line: LineId) -> Option<&CandidateFit> {
        self.ranking.iter().find(|r| r.fit.line == line).map(|r| &r.fit)
    }

    pub fn top(&self, n: usize) -> &[RankedFit] {
        &self.ranking[..n.min(self.ranking.len())]
    }
}

pub(crate) fn rank_fits(fits: Vec<CandidateFit>, obs_norm: f64) -> Result<DetectionReport> {
    if fits.is_empty() {
        return Err(Error::Invalid("candidate set is empty".into()));
    }
    let tol = TIE_REL_TOL * obs_norm;
    let mut sorted = fits;
    sorted.sort_by(|a, b| a.residual.total_cmp(&b.residual).then(a.line.cmp(&b.line)));

    // Group near-equal residuals, then order each group by line index.
    let mut ordered = Vec::with_capacity(sorted.len());
    let mut start = 0;
    while start < sorted.len() {
        let base = sorted[start].residual;
        let mut end = start + 1;
        while end < sorted.len() && sorted[end].residual - base <= tol {
            end += 1;
        }
        let mut group = sorted[start..end].to_vec();
        group.sort_by_key(|f| f.line);
        ordered.extend(group);
        start = end;
    }

    let ranking: Vec<RankedFit> = ordered
        .iter()
        .map(|f| RankedFit {
            rank: 1 + ordered.iter().filter(|o| o.residual < f.residual - tol).count(),
            fit: *f,
        })
        .collect();
    Ok(DetectionReport {
        identified: ranking[0].fit.line,
        ranking,
        tie_tolerance: tol,
    })
}

pub fn identify_outage(
    model: &DcModel,
    pmu: &PmuPlacement,
    obs: &PmuObservation,
    candidates: &[LineId],
) -> Result<DetectionReport> {
    obs.check(pmu)?;
    let beta1 = obs.vector();
    let fits = candidates
        .iter()
        .map(|&l| Ok(fit_along(l, &beta1, &candidate_beta2(model, pmu, l)?)))
        .collect::<Result<Vec<_>>>()?;
    rank_fits(fits, beta1.norm())
}

/// Observation as seen by the detector after the injection measurements are
/// shifted by `dz_inj` (per-unit, N entries): the computed pre-outage angles
/// move by Binv·dz_inj, which the detector subtracts from the PMU changes.
pub fn attacked_observation(
    model: &DcModel,
    pmu: &PmuPlacement,
    obs: &PmuObservation,
    dz_inj: &DVector<f64>,
) -> Result<PmuObservation> {
    obs.check(pmu)?;
    if dz_inj.len() != model.n_buses() {
        return Err(Error::Dimension {
            expected: model.n_buses(),
            got: dz_inj.len(),
        });
    }
    let shift = model.binv_ext() * dz_inj;
    Ok(PmuObservation {
        delta_theta: obs
            .delta_theta
            .iter()
            .zip(&pmu.pmu_rows)
            .map(|(d, &r)| d - shift[r])
            .collect(),
        true_line: obs.true_line,
        noise_seed: obs.noise_seed,
    })
}

/// Reads an observation fixture: one `bus_id delta_deg` pair per row, `#`
/// comments. Every PMU bus must appear exactly once.
pub fn parse_observation(text: &str, pmu: &PmuPlacement) -> Result<PmuObservation> {
    let mut vals: Vec<Option<f64>> = vec![None; pmu.len()];
    for (n, raw) in text.lines().enumerate() {
        let lineno = n + 1;
        let content = raw.split('#').next().unwrap_or("");
        let cols: Vec<(usize, &str)> = content
            .split_whitespace()
            .map(|t| (t.as_ptr() as usize - content.as_ptr() as usize + 1, t))
            .collect();
        if cols.is_empty() {
            continue;
        }
        let perr = |column: usize, message: String| Error::Parse {
            line: lineno,
            column,
            message,
        };
        if cols.len() != 2 {
            return Err(perr(1, format!("expected 'bus_id delta_deg', found {} columns", cols.len())));
        }
        let (bcol, btok) = cols[0];
        let (dcol, dtok) = cols[1];
        let bus: u32 = btok
            .parse()
            .map_err(|_| perr(bcol, format!("invalid bus id '{btok}'")))?;
        let deg: f64 = dtok
            .parse()
            .map_err(|_| perr(dcol, format!("invalid angle '{dtok}'")))?;
        let pos = pmu
            .pmu_buses
            .iter()
            .position(|&b| b == bus)
            .ok_or_else(|| perr(bcol, format!("bus {bus} has no PMU")))?;
        if vals[pos].replace(deg_to_rad(deg)).is_some() {
            return Err(perr(bcol, format!("bus {bus} listed twice")));
        }
    }
    let mut delta = Vec::with_capacity(pmu.len());
    for (v, b) in vals.into_iter().zip(&pmu.pmu_buses) {
        delta.push(v.ok_or_else(|| Error::Validation(format!("observation has no entry for PMU bus {b}")))?);
    }
    Ok(PmuObservation::new(delta))
}

pub fn write_observation(obs: &PmuObservation, pmu: &PmuPlacement) -> String {
    let mut s = String::from("# bus_id delta_deg\n");
    for (b, d) in pmu.pmu_buses.iter().zip(&obs.delta_theta) {
        let _ = writeln!(s, "{b} {}", rad_to_deg(*d));
    }
    s
}
