//! Dense two-phase tableau simplex over a polytope in free variables.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-10;
// consecutive degenerate pivots before switching to Bland's rule
const DEGENERATE_LIMIT: usize = 20;

/// { x : A_ub x ≤ b_ub, A_eq x = b_eq }, x free.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    pub a_ub: DMatrix<f64>,
    pub b_ub: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
}

impl Polytope {
    pub fn new(n: usize) -> Self {
        Polytope {
            a_ub: DMatrix::zeros(0, n),
            b_ub: DVector::zeros(0),
            a_eq: DMatrix::zeros(0, n),
            b_eq: DVector::zeros(0),
        }
    }

    pub fn dim(&self) -> usize {
        self.a_ub.ncols()
    }

    pub fn push_ub(&mut self, row: &DVector<f64>, b: f64) {
        push_row(&mut self.a_ub, &mut self.b_ub, row, b);
    }

    pub fn push_eq(&mut self, row: &DVector<f64>, b: f64) {
        push_row(&mut self.a_eq, &mut self.b_eq, row, b);
    }

    /// Largest constraint violation at `x` (0 when feasible).
    pub fn violation(&self, x: &DVector<f64>) -> f64 {
        let ub = (&self.a_ub * x - &self.b_ub).iter().fold(0.0f64, |m, &v| m.max(v));
        let eq = (&self.a_eq * x - &self.b_eq).amax();
        ub.max(eq)
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        self.violation(x) <= tol
    }
}

fn push_row(a: &mut DMatrix<f64>, b: &mut DVector<f64>, row: &DVector<f64>, rhs: f64) {
    let r = a.nrows();
    let n = a.ncols();
    *a = std::mem::replace(a, DMatrix::zeros(0, 0)).insert_row(r, 0.0);
    for c in 0..n {
        a[(r, c)] = row[c];
    }
    *b = std::mem::replace(b, DVector::zeros(0)).insert_row(r, rhs);
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: DVector<f64>,
    pub value: f64,
    pub pivots: usize,
}

struct Tableau {
    m: usize,
    cols: usize,
    // (m + 1) rows of (cols + 1); last row is the objective, last column the rhs
    t: Vec<f64>,
    basis: Vec<usize>,
    blocked: Vec<bool>,
    pivots: usize,
}

enum Step {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.t[r * (self.cols + 1) + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    fn pivot(&mut self, r: usize, e: usize) {
        let w = self.cols + 1;
        let p = self.at(r, e);
        for c in 0..w {
            self.t[r * w + c] /= p;
        }
        for i in 0..=self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * w + e];
            if f == 0.0 {
                continue;
            }
            for c in 0..w {
                self.t[i * w + c] -= f * self.t[r * w + c];
            }
            self.t[i * w + e] = 0.0;
        }
        self.basis[r] = e;
        self.pivots += 1;
    }

    /// Loads `cost` (maximized) into the objective row.
    fn set_objective(&mut self, cost: &[f64]) {
        let w = self.cols + 1;
        let obj = self.m * w;
        for (c, v) in self.t[obj..obj + w].iter_mut().enumerate() {
            *v = if c < self.cols { -cost[c] } else { 0.0 };
        }
        for r in 0..self.m {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                for c in 0..w {
                    self.t[obj + c] += cb * self.t[r * w + c];
                }
            }
        }
    }

    fn run(&mut self, cap: usize) -> Result<Step> {
        let mut degenerate = 0usize;
        let mut bland = false;
        for _ in 0..cap {
            let entering = if bland {
                (0..self.cols).find(|&c| !self.blocked[c] && self.at(self.m, c) < -COST_TOL)
            } else {
                let mut best: Option<(usize, f64)> = None;
                for c in 0..self.cols {
                    let z = self.at(self.m, c);
                    if !self.blocked[c] && z < -COST_TOL && best.is_none_or(|(_, b)| z < b) {
                        best = Some((c, z));
                    }
                }
                best.map(|(c, _)| c)
            };
            let Some(e) = entering else { return Ok(Step::Optimal) };

            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.m {
                let a = self.at(r, e);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(r).max(0.0) / a;
                    let better = match leave {
                        None => true,
                        Some((lr, lv)) => ratio < lv - 1e-12 || (ratio <= lv + 1e-12 && self.basis[r] < self.basis[lr]),
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            let Some((r, ratio)) = leave else { return Ok(Step::Unbounded) };
            if ratio <= 1e-12 {
                degenerate += 1;
                if degenerate > DEGENERATE_LIMIT {
                    bland = true;
                }
            } else {
                degenerate = 0;
            }
            self.pivot(r, e);
        }
        Err(Error::Invalid(format!("simplex did not converge within {cap} pivots")))
    }
}

/// Maximizes cᵀx over the polytope.
pub fn maximize(c: &DVector<f64>, poly: &Polytope) -> Result<LpSolution> {
    let n = poly.dim();
    if c.len() != n {
        return Err(Error::Dimension { expected: n, got: c.len() });
    }

    // Row-scaled constraints; all-zero rows are checked and dropped.
    struct Row {
        a: Vec<f64>,
        b: f64,
        is_eq: bool,
    }
    let mut rows = Vec::new();
    let mut bmax = 0.0f64;
    for (a, b, is_eq) in [(&poly.a_ub, &poly.b_ub, false), (&poly.a_eq, &poly.b_eq, true)] {
        for r in 0..a.nrows() {
            let scale = a.row(r).amax();
            let rhs = b[r];
            if scale == 0.0 {
                let bad = if is_eq { rhs.abs() > 1e-12 } else { rhs < -1e-12 };
                if bad {
                    return Err(Error::Infeasible);
                }
                continue;
            }
            bmax = bmax.max((rhs / scale).abs());
            rows.push(Row {
                a: a.row(r).iter().map(|v| v / scale).collect(),
                b: rhs / scale,
                is_eq,
            });
        }
    }
    let m = rows.len();
    let m_ub = rows.iter().filter(|r| !r.is_eq).count();
    let n_art = rows.iter().filter(|r| r.is_eq || r.b < 0.0).count();
    // columns: u (n), v (n), slacks (m_ub), artificials (n_art)
    let cols = 2 * n + m_ub + n_art;
    let w = cols + 1;
    let mut tab = Tableau {
        m,
        cols,
        t: vec![0.0; (m + 1) * w],
        basis: vec![0; m],
        blocked: vec![false; cols],
        pivots: 0,
    };
    let (mut slack, mut art) = (2 * n, 2 * n + m_ub);
    for (r, row) in rows.iter().enumerate() {
        let sign = if row.b < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            tab.t[r * w + j] = sign * row.a[j];
            tab.t[r * w + n + j] = -sign * row.a[j];
        }
        tab.t[r * w + cols] = sign * row.b;
        if !row.is_eq {
            tab.t[r * w + slack] = sign;
            if sign > 0.0 {
                tab.basis[r] = slack;
            }
            slack += 1;
        }
        if row.is_eq || sign < 0.0 {
            tab.t[r * w + art] = 1.0;
            tab.basis[r] = art;
            art += 1;
        }
    }
    let first_art = 2 * n + m_ub;
    let cap = 10_000 + 50 * (m + cols);

    if n_art > 0 {
        let mut cost = vec![0.0; cols];
        for c in cost.iter_mut().skip(first_art) {
            *c = -1.0;
        }
        tab.set_objective(&cost);
        tab.run(cap)?;
        if -tab.rhs(m) > 1e-9 * (1.0 + bmax) {
            return Err(Error::Infeasible);
        }
        // Drive artificials out of the basis; rows with no usable pivot are redundant.
        let mut r = 0;
        while r < tab.m {
            if tab.basis[r] >= first_art {
                let col = (0..first_art).find(|&c| tab.at(r, c).abs() > PIVOT_TOL);
                match col {
                    Some(c) => tab.pivot(r, c),
                    None => {
                        remove_row(&mut tab, r);
                        continue;
                    }
                }
            }
            r += 1;
        }
        for b in tab.blocked.iter_mut().skip(first_art) {
            *b = true;
        }
    }

    let cmax = c.amax();
    let mut cost = vec![0.0; cols];
    if cmax > 0.0 {
        for j in 0..n {
            cost[j] = c[j] / cmax;
            cost[n + j] = -c[j] / cmax;
        }
    }
    tab.set_objective(&cost);
    if let Step::Unbounded = tab.run(cap)? {
        return Err(Error::Unbounded);
    }

    let mut xs = vec![0.0; cols];
    for r in 0..tab.m {
        xs[tab.basis[r]] = tab.rhs(r);
    }
    let x = DVector::from_fn(n, |j, _| xs[j] - xs[n + j]);
    Ok(LpSolution {
        value: c.dot(&x),
        x,
        pivots: tab.pivots,
    })
}

fn remove_row(tab: &mut Tableau, r: usize) {
    let w = tab.cols + 1;
    tab.t.drain(r * w..(r + 1) * w);
    tab.basis.remove(r);
    tab.m -= 1;
}
