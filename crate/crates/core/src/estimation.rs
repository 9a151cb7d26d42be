//! DC state estimation and the bad-data residual test.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dc::Jacobian;
use crate::error::{Error, Result};

/// Relative singular-value cutoff for the rank check.
const RANK_TOL: f64 = 1e-10;
pub const MEASUREMENT_SCHEMA_VERSION: u32 = 1;

/// Measurements ordered (injections, +flows, -flows), per-unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSet {
    pub schema_version: u32,
    pub z: Vec<f64>,
    pub weights: Vec<f64>,
    pub threshold: f64,
}

impl MeasurementSet {
    pub fn new(z: Vec<f64>, threshold: f64) -> Self {
        let weights = vec![1.0; z.len()];
        MeasurementSet {
            schema_version: MEASUREMENT_SCHEMA_VERSION,
            z,
            weights,
            threshold,
        }
    }

    pub fn vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.z)
    }

    /// Same weights and threshold, measurements shifted by `dz`.
    pub fn perturbed(&self, dz: &DVector<f64>) -> Self {
        MeasurementSet {
            z: self.z.iter().zip(dz.iter()).map(|(a, b)| a + b).collect(),
            ..self.clone()
        }
    }

    fn check(&self, jac: &Jacobian) -> Result<()> {
        let m = jac.n_measurements();
        if self.z.len() != m {
            return Err(Error::Dimension { expected: m, got: self.z.len() });
        }
        if self.weights.len() != m {
            return Err(Error::Dimension {
                expected: m,
                got: self.weights.len(),
            });
        }
        if self.weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::Invalid("measurement weights must be positive".into()));
        }
        Ok(())
    }
}

/// Weighted least-squares angle estimate with the slack angle pinned at 0.
pub fn estimate(jac: &Jacobian, meas: &MeasurementSet) -> Result<DVector<f64>> {
    meas.check(jac)?;
    let n = jac.n_buses;
    let cols: Vec<usize> = (0..n).filter(|&c| c != jac.slack).collect();
    let m = jac.n_measurements();
    let sw: Vec<f64> = meas.weights.iter().map(|w| w.sqrt()).collect();
    let a = DMatrix::from_fn(m, cols.len(), |r, c| sw[r] * jac.h[(r, cols[c])]);
    let b = DVector::from_iterator(m, meas.z.iter().zip(&sw).map(|(z, s)| z * s));

    let qr = a.qr();
    let r = qr.r();
    let rmax = r.diagonal().amax();
    let rank = r.diagonal().iter().filter(|d| d.abs() > RANK_TOL * rmax.max(f64::MIN_POSITIVE)).count();
    if rank < cols.len() {
        return Err(Error::RankDeficient { rank, cols: cols.len() });
    }
    let qtb = qr.q().transpose() * b;
    let sol = r
        .solve_upper_triangular(&qtb)
        .ok_or(Error::RankDeficient { rank, cols: cols.len() })?;

    let mut theta = DVector::zeros(n);
    for (k, &c) in cols.iter().enumerate() {
        theta[c] = sol[k];
    }
    Ok(theta)
}

/// ‖z − Hθ̂‖₂ (unweighted).
pub fn residual(jac: &Jacobian, z: &DVector<f64>, theta: &DVector<f64>) -> f64 {
    (z - &jac.h * theta).norm()
}

/// Estimate, then residual.
pub fn estimate_residual(jac: &Jacobian, meas: &MeasurementSet) -> Result<f64> {
    let theta = estimate(jac, meas)?;
    Ok(residual(jac, &meas.vector(), &theta))
}

/// Passes iff `r <= threshold`.
pub fn bad_data_test(r: f64, threshold: f64) -> bool {
    r <= threshold
}

/// Measurements of the state `theta` with independent Gaussian noise of
/// standard deviation `frac·|z_i|` per entry. The threshold is three times
/// the expected noise norm.
pub fn noisy_measurements(jac: &Jacobian, theta: &DVector<f64>, frac: f64, seed: u64) -> MeasurementSet {
    let clean = jac.measure(theta);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigmas: Vec<f64> = clean.iter().map(|z| frac * z.abs()).collect();
    let z: Vec<f64> = clean
        .iter()
        .zip(&sigmas)
        .map(|(z, s)| {
            let n: f64 = StandardNormal.sample(&mut rng);
            z + s * n
        })
        .collect();
    let threshold = default_threshold(&sigmas);
    MeasurementSet::new(z, threshold)
}

/// 3·sqrt(Σσ²), floored so the test stays meaningful with zero noise.
pub fn default_threshold(sigmas: &[f64]) -> f64 {
    (3.0 * sigmas.iter().map(|s| s * s).sum::<f64>().sqrt()).max(1e-9)
}
