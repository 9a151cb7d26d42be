//! Dense DC power-flow model.
//!
//! The slack row and column are removed from the susceptance matrix, the
//! reduced matrix is Cholesky-factorized once, and its inverse is embedded
//! into an N x N "extended inverse" whose slack row and column are zero.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::case::{is_connected_without, GridCase, LineId};
use crate::error::{Error, Result};

/// Injections must sum to zero within this many per-unit.
pub const INJECTION_BALANCE_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct DcModel {
    n: usize,
    slack: usize,
    /// Non-slack bus rows in order; position = reduced index.
    reduced: Vec<usize>,
    b_full: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    binv_ext: DMatrix<f64>,
    shift: DMatrix<f64>,
    /// 1/x for in-service lines, 0 otherwise.
    x_inv: DVector<f64>,
    reactance: Vec<f64>,
    terminals: Vec<(usize, usize)>,
    in_service: Vec<bool>,
    base_injection: DVector<f64>,
}

/// Assembles the full susceptance matrix of the in-service lines.
pub(crate) fn susceptance(case: &GridCase) -> DMatrix<f64> {
    let n = case.n_buses();
    let mut b = DMatrix::zeros(n, n);
    for l in 0..case.n_lines() {
        let line = &case.lines()[l];
        if !line.in_service {
            continue;
        }
        let (i, j) = case.terminals(LineId(l)).expect("line index in range");
        let y = 1.0 / line.reactance;
        b[(i, i)] += y;
        b[(j, j)] += y;
        b[(i, j)] -= y;
        b[(j, i)] -= y;
    }
    b
}

pub(crate) fn reduce(b: &DMatrix<f64>, slack: usize) -> (Vec<usize>, DMatrix<f64>) {
    let reduced: Vec<usize> = (0..b.nrows()).filter(|&i| i != slack).collect();
    let m = reduced.len();
    let b_red = DMatrix::from_fn(m, m, |r, c| b[(reduced[r], reduced[c])]);
    (reduced, b_red)
}

impl DcModel {
    pub fn build(case: &GridCase) -> Result<Self> {
        let n = case.n_buses();
        let slack = case.slack_index();
        if !is_connected_without(case, None) {
            return Err(Error::Topology("in-service network is disconnected".into()));
        }
        let b_full = susceptance(case);
        let (reduced, b_red) = reduce(&b_full, slack);
        let chol = Cholesky::new(b_red).ok_or_else(|| {
            Error::Topology("reduced susceptance matrix is not positive definite (disconnected network?)".into())
        })?;

        let inv_red = chol.inverse();
        let mut binv_ext = DMatrix::zeros(n, n);
        for (r, &i) in reduced.iter().enumerate() {
            for (c, &j) in reduced.iter().enumerate() {
                binv_ext[(i, j)] = inv_red[(r, c)];
            }
        }

        let nl = case.n_lines();
        let mut x_inv = DVector::zeros(nl);
        let mut terminals = Vec::with_capacity(nl);
        let mut in_service = Vec::with_capacity(nl);
        let mut reactance = Vec::with_capacity(nl);
        for l in 0..nl {
            let line = &case.lines()[l];
            terminals.push(case.terminals(LineId(l))?);
            in_service.push(line.in_service);
            reactance.push(line.reactance);
            if line.in_service {
                x_inv[l] = 1.0 / line.reactance;
            }
        }

        let mut shift = DMatrix::zeros(nl, n);
        for l in 0..nl {
            if !in_service[l] {
                continue;
            }
            let (i, j) = terminals[l];
            for c in 0..n {
                shift[(l, c)] = x_inv[l] * (binv_ext[(i, c)] - binv_ext[(j, c)]);
            }
        }

        Ok(DcModel {
            n,
            slack,
            reduced,
            b_full,
            chol,
            binv_ext,
            shift,
            x_inv,
            reactance,
            terminals,
            in_service,
            base_injection: DVector::from_vec(case.injections_pu()),
        })
    }

    pub fn n_buses(&self) -> usize {
        self.n
    }

    pub fn n_lines(&self) -> usize {
        self.terminals.len()
    }

    pub fn slack(&self) -> usize {
        self.slack
    }

    pub fn b_full(&self) -> &DMatrix<f64> {
        &self.b_full
    }

    pub fn binv_ext(&self) -> &DMatrix<f64> {
        &self.binv_ext
    }

    /// Shift-factor (PTDF) matrix S, L x N, zero slack column.
    pub fn shift_factors(&self) -> &DMatrix<f64> {
        &self.shift
    }

    pub fn x_inv(&self) -> &DVector<f64> {
        &self.x_inv
    }

    pub fn reactance(&self, k: LineId) -> f64 {
        self.reactance[k.0]
    }

    pub fn terminals(&self, k: LineId) -> (usize, usize) {
        self.terminals[k.0]
    }

    pub fn in_service(&self, k: LineId) -> bool {
        self.in_service[k.0]
    }

    /// Base-case injection vector of the case the model was built from (pu).
    pub fn base_injection(&self) -> &DVector<f64> {
        &self.base_injection
    }

    /// Reduced-matrix Cholesky pivots (diagonal of L).
    pub fn factor_pivots(&self) -> Vec<f64> {
        let l = self.chol.l();
        (0..l.nrows()).map(|i| l[(i, i)]).collect()
    }

    /// Solves B θ = p with θ[slack] = 0.
    pub fn solve_angles(&self, p: &DVector<f64>) -> Result<DVector<f64>> {
        if p.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                got: p.len(),
            });
        }
        let sum = p.sum();
        if sum.abs() > INJECTION_BALANCE_TOL {
            return Err(Error::Unbalanced { sum });
        }
        let rhs = DVector::from_iterator(self.reduced.len(), self.reduced.iter().map(|&i| p[i]));
        let sol = self.chol.solve(&rhs);
        let mut theta = DVector::zeros(self.n);
        for (r, &i) in self.reduced.iter().enumerate() {
            theta[i] = sol[r];
        }
        Ok(theta)
    }

    /// F = X⁻¹ Wᵀ θ; out-of-service lines carry zero flow.
    pub fn line_flows(&self, theta: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.n_lines(),
            self.terminals
                .iter()
                .zip(self.x_inv.iter())
                .map(|(&(i, j), &y)| y * (theta[i] - theta[j])),
        )
    }

    /// Measurement Jacobian stacking injections, flows and negated flows.
    pub fn build_jacobian(&self) -> Jacobian {
        let (n, nl) = (self.n, self.n_lines());
        let mut h = DMatrix::zeros(n + 2 * nl, n);
        h.view_mut((0, 0), (n, n)).copy_from(&self.b_full);
        for l in 0..nl {
            let (i, j) = self.terminals[l];
            let y = self.x_inv[l];
            h[(n + l, i)] = y;
            h[(n + l, j)] = -y;
            h[(n + nl + l, i)] = -y;
            h[(n + nl + l, j)] = y;
        }
        Jacobian {
            h,
            n_buses: n,
            n_lines: nl,
            slack: self.slack,
        }
    }
}

/// Measurement matrix H with rows (injections, +flows, -flows).
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian {
    pub h: DMatrix<f64>,
    pub n_buses: usize,
    pub n_lines: usize,
    pub slack: usize,
}

impl Jacobian {
    pub fn n_measurements(&self) -> usize {
        self.h.nrows()
    }

    /// z = H θ.
    pub fn measure(&self, theta: &DVector<f64>) -> DVector<f64> {
        &self.h * theta
    }

    /// Assembles a measurement vector from an injection vector and line flows.
    pub fn stack(&self, injections: &DVector<f64>, flows: &DVector<f64>) -> DVector<f64> {
        let mut z = DVector::zeros(self.n_measurements());
        z.rows_mut(0, self.n_buses).copy_from(injections);
        z.rows_mut(self.n_buses, self.n_lines).copy_from(flows);
        z.rows_mut(self.n_buses + self.n_lines, self.n_lines).copy_from(&(-flows));
        z
    }
}

pub fn rad_to_deg(x: f64) -> f64 {
    x.to_degrees()
}

pub fn deg_to_rad(x: f64) -> f64 {
    x.to_radians()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case::{case39, parse_native};
    use approx::assert_abs_diff_eq;

    fn two_bus() -> GridCase {
        parse_native("[bus]\n1 slack\n2 load\n[line]\n1 2 0.1 1\n[load]\n2 100\n[gen]\n1 100\n").unwrap()
    }

    fn triangle() -> GridCase {
        parse_native("[bus]\n1 slack\n2 load\n3 load\n[line]\n1 2 0.1 1\n2 3 0.1 1\n1 3 0.1 1\n[load]\n2 30\n3 20\n[gen]\n1 50\n")
            .unwrap()
    }

    #[test]
    fn two_bus_susceptance() {
        let m = DcModel::build(&two_bus()).unwrap();
        assert_abs_diff_eq!(m.b_full()[(0, 0)], 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.b_full()[(0, 1)], -10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.b_full()[(1, 1)], 10.0, epsilon = 1e-12);
    }

    #[test]
    fn triangle_susceptance() {
        let m = DcModel::build(&triangle()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 20.0 } else { -10.0 };
                assert_abs_diff_eq!(m.b_full()[(i, j)], want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn two_bus_angles_and_flow() {
        let m = DcModel::build(&two_bus()).unwrap();
        let theta = m.solve_angles(&DVector::from_vec(vec![-1.0, 1.0])).unwrap();
        assert_eq!(theta[0], 0.0);
        assert_abs_diff_eq!(theta[1], 0.1, epsilon = 1e-12);

        let f = m.line_flows(&DVector::from_vec(vec![0.0, -0.1]));
        assert_abs_diff_eq!(f[0], 1.0, epsilon = 1e-12);
        assert_eq!(m.line_flows(&DVector::zeros(2))[0], 0.0);
    }

    #[test]
    fn zero_injection_zero_angles() {
        let m = DcModel::build(&case39()).unwrap();
        let theta = m.solve_angles(&DVector::zeros(39)).unwrap();
        assert!(theta.iter().all(|&t| t == 0.0));
    }

    #[test]
    fn unbalanced_injection_rejected() {
        let m = DcModel::build(&two_bus()).unwrap();
        assert!(matches!(
            m.solve_angles(&DVector::from_vec(vec![0.0, 1.0])),
            Err(Error::Unbalanced { .. })
        ));
    }

    #[test]
    fn triangle_flow_split() {
        // unit injection at bus 2 withdrawn at slack bus 1: 2/3 on 1-2, 1/3 via 1-3-2
        let m = DcModel::build(&triangle()).unwrap();
        let p = DVector::from_vec(vec![-1.0, 1.0, 0.0]);
        let f = m.shift_factors() * &p;
        assert_abs_diff_eq!(f[0], -2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f[1], 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f[2], -1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn pivots_positive_39() {
        let m = DcModel::build(&case39()).unwrap();
        assert!(m.factor_pivots().iter().all(|&p| p > 0.0));
        assert!(m.shift_factors().column(m.slack()).iter().all(|&s| s == 0.0));
    }

    #[test]
    fn jacobian_shape_and_nullspace() {
        let m2 = DcModel::build(&two_bus()).unwrap();
        assert_eq!(m2.build_jacobian().h.shape(), (4, 2));
        let m = DcModel::build(&case39()).unwrap();
        let jac = m.build_jacobian();
        assert_eq!(jac.h.shape(), (131, 39));
        let ones = DVector::from_element(39, 1.0);
        assert!((&jac.h * ones).amax() < 1e-9);
    }

    #[test]
    fn disconnected_model_is_topology_error() {
        let case = triangle().with_line_out(LineId(0)).unwrap().with_line_out(LineId(2)).unwrap();
        assert!(matches!(DcModel::build(&case), Err(Error::Topology(_))));
    }
}
