//! Maximization of a convex quadratic over a polytope by successive
//! linearization: from a vertex, solve the LP along the current gradient,
//! move to its optimal vertex, repeat until the LP offers no gain. The
//! maximum of a convex function over a polytope sits at a vertex, and every
//! move strictly increases the objective, so each run ends at a vertex that
//! no single linearized step can improve. Several random vertex starts guard
//! against poor local stops.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::lp::{maximize, Polytope};
use crate::error::{Error, Result};

/// Feasibility tolerance for starting points and active-set detection.
pub const FEAS_TOL: f64 = 1e-9;

/// φ(x) = ½ xᵀQx + qᵀx.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadObjective {
    pub q_mat: DMatrix<f64>,
    pub q_lin: DVector<f64>,
}

impl QuadObjective {
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.q_mat * x)) + self.q_lin.dot(x)
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.q_mat * x + &self.q_lin
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub starts: usize,
    pub seed: u64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            starts: 32,
            seed: 0,
            max_iter: 100,
        }
    }
}

/// Why the returned point cannot be improved by a linearized step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// max over the polytope of ∇φ(x)ᵀ(y − x).
    pub lp_gain: f64,
    pub active_constraints: usize,
    pub active_rank: usize,
    pub dim: usize,
    /// Active constraints pin the point (rank equals the dimension).
    pub is_vertex: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartKind {
    pub index: usize,
    pub label: String,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    pub best_start: usize,
    pub starts: Vec<StartKind>,
    pub certificate: Certificate,
}

fn improvement_tol(phi: f64) -> f64 {
    1e-12 * (1.0 + phi.abs())
}

/// Runs the ascent from `x0`; returns the stopping point, its objective and
/// the number of LP steps.
fn ascend(obj: &QuadObjective, poly: &Polytope, x0: DVector<f64>, max_iter: usize) -> Result<(DVector<f64>, f64, usize)> {
    let mut x = x0;
    let mut phi = obj.value(&x);
    for it in 0..max_iter {
        let g = obj.gradient(&x);
        if g.amax() == 0.0 {
            return Ok((x, phi, it));
        }
        let lp = maximize(&g, poly)?;
        let gain = lp.value - g.dot(&x);
        let next_phi = obj.value(&lp.x);
        if gain <= improvement_tol(phi) || next_phi <= phi + improvement_tol(phi) {
            return Ok((x, phi, it));
        }
        x = lp.x;
        phi = next_phi;
    }
    Err(Error::IterationCap {
        cap: max_iter,
        best_objective: phi,
    })
}

pub fn certificate(obj: &QuadObjective, poly: &Polytope, x: &DVector<f64>) -> Result<Certificate> {
    let n = poly.dim();
    let g = obj.gradient(x);
    let lp_gain = if g.amax() == 0.0 {
        0.0
    } else {
        (maximize(&g, poly)?.value - g.dot(x)).max(0.0)
    };
    let mut active: Vec<DVector<f64>> = Vec::new();
    let ub = &poly.a_ub * x - &poly.b_ub;
    for r in 0..poly.a_ub.nrows() {
        let scale = poly.a_ub.row(r).amax().max(1.0);
        if ub[r].abs() <= FEAS_TOL * scale {
            active.push(poly.a_ub.row(r).transpose());
        }
    }
    for r in 0..poly.a_eq.nrows() {
        active.push(poly.a_eq.row(r).transpose());
    }
    let active_rank = if active.is_empty() {
        0
    } else {
        DMatrix::from_columns(&active).rank(1e-9)
    };
    Ok(Certificate {
        lp_gain,
        active_constraints: active.len(),
        active_rank,
        dim: n,
        is_vertex: active_rank == n,
    })
}

/// Maximizes `obj` over `poly`. Starts, in order: the origin when feasible,
/// the warm start when given and feasible, then `opts.starts` random
/// vertices. The best objective wins; ties go to the earliest start.
pub fn maximize_convex_quadratic(
    obj: &QuadObjective,
    poly: &Polytope,
    opts: &SolveOptions,
    warm: Option<&DVector<f64>>,
) -> Result<QpSolution> {
    let n = poly.dim();
    if obj.q_mat.shape() != (n, n) || obj.q_lin.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: obj.q_lin.len(),
        });
    }

    let mut seeds: Vec<(String, DVector<f64>)> = Vec::new();
    let zero = DVector::zeros(n);
    if poly.contains(&zero, FEAS_TOL) {
        seeds.push(("origin".into(), zero));
    }
    if let Some(w) = warm {
        if w.len() == n && poly.contains(w, FEAS_TOL) {
            seeds.push(("warm".into(), w.clone()));
        } else {
            log::warn!("warm start is not feasible for this problem; ignored");
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for s in 0..opts.starts {
        let dir = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let v = maximize(&dir, poly)?;
        seeds.push((format!("random-{s}"), v.x));
    }
    if seeds.is_empty() {
        // no random starts requested and the origin is infeasible
        seeds.push(("feasible".into(), maximize(&DVector::zeros(n), poly)?.x));
    }

    let mut best: Option<(usize, DVector<f64>, f64)> = None;
    let mut starts = Vec::with_capacity(seeds.len());
    for (index, (label, x0)) in seeds.into_iter().enumerate() {
        let (x, phi, iterations) = match ascend(obj, poly, x0, opts.max_iter) {
            Ok(r) => r,
            Err(Error::IterationCap { cap, best_objective }) => {
                let overall = best.as_ref().map_or(best_objective, |b| b.2.max(best_objective));
                return Err(Error::IterationCap {
                    cap,
                    best_objective: overall,
                });
            }
            Err(e) => return Err(e),
        };
        starts.push(StartKind {
            index,
            label,
            objective: phi,
            iterations,
        });
        if best.as_ref().is_none_or(|b| phi > b.2) {
            best = Some((index, x, phi));
        }
    }
    let (best_start, x, objective) = best.expect("at least one start");
    let certificate = certificate(obj, poly, &x)?;
    Ok(QpSolution {
        x,
        objective,
        best_start,
        starts,
        certificate,
    })
}
