//! Reference oracles for the attack solver: seeded small polytope instances
//! and exhaustive vertex enumeration.

use gridmask_core::attack::{Polytope, QuadObjective};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub poly: Polytope,
    pub obj: QuadObjective,
}

/// Seeded instance shaped like a load-redistribution attack: n in 2..=6
/// variables with box bounds, a zero-sum row and one extra cut for n < 6,
/// and a convex objective. The origin is always feasible.
pub fn instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 2 + (seed % 5) as usize;
    let mut poly = Polytope::new(n);
    for i in 0..n {
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        poly.push_ub(&e, rng.random_range(0.2..1.5));
        poly.push_ub(&(-e), rng.random_range(0.2..1.5));
    }
    if n < 6 {
        poly.push_eq(&DVector::from_element(n, 1.0), 0.0);
        let cut = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        poly.push_ub(&cut, rng.random_range(0.1..0.8));
    }
    let k = rng.random_range(1..=n);
    let m = DMatrix::from_fn(k, n, |_, _| rng.random_range(-1.0..1.0));
    let obj = QuadObjective {
        q_mat: m.transpose() * &m * 2.0,
        q_lin: DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)),
    };
    Instance { poly, obj }
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Best objective over all basic feasible points: every choice of
/// inequality rows that, together with the equalities, pins a unique point.
pub fn enumerate(poly: &Polytope, obj: &QuadObjective) -> f64 {
    let n = poly.dim();
    let m_eq = poly.a_eq.nrows();
    let mut best = f64::NEG_INFINITY;
    for rows in combinations(poly.a_ub.nrows(), n - m_eq) {
        let mut a = DMatrix::zeros(n, n);
        let mut b = DVector::zeros(n);
        for r in 0..m_eq {
            a.row_mut(r).copy_from(&poly.a_eq.row(r));
            b[r] = poly.b_eq[r];
        }
        for (t, &r) in rows.iter().enumerate() {
            a.row_mut(m_eq + t).copy_from(&poly.a_ub.row(r));
            b[m_eq + t] = poly.b_ub[r];
        }
        let lu = a.lu();
        if lu.determinant().abs() < 1e-12 {
            continue;
        }
        let Some(x) = lu.solve(&b) else { continue };
        if poly.contains(&x, 1e-9) {
            best = best.max(obj.value(&x));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use gridmask_core::attack::{maximize_convex_quadratic, SolveOptions};

    #[test]
    fn enumeration_on_a_square() {
        // max x² + y² over [-1, 2] x [-1, 1] is at (2, ±1)
        let mut poly = Polytope::new(2);
        poly.push_ub(&DVector::from_vec(vec![1.0, 0.0]), 2.0);
        poly.push_ub(&DVector::from_vec(vec![-1.0, 0.0]), 1.0);
        poly.push_ub(&DVector::from_vec(vec![0.0, 1.0]), 1.0);
        poly.push_ub(&DVector::from_vec(vec![0.0, -1.0]), 1.0);
        let obj = QuadObjective {
            q_mat: DMatrix::identity(2, 2) * 2.0,
            q_lin: DVector::zeros(2),
        };
        assert_eq!(enumerate(&poly, &obj), 5.0);
    }

    #[test]
    fn ascent_matches_vertex_enumeration() {
        for seed in 0..60 {
            let inst = instance(seed);
            let oracle = enumerate(&inst.poly, &inst.obj);
            let opts = SolveOptions {
                starts: 32,
                seed,
                max_iter: 100,
            };
            let sol = maximize_convex_quadratic(&inst.obj, &inst.poly, &opts, None).unwrap();
            let rel = (sol.objective - oracle).abs() / oracle.abs().max(1e-12);
            assert!(rel <= 1e-6, "seed {seed}: solver {} oracle {oracle}", sol.objective);
            assert!(inst.poly.contains(&sol.x, 1e-9));
            assert!(sol.certificate.lp_gain <= 1e-9 * (1.0 + sol.objective.abs()));
        }
    }

    #[test]
    fn warm_start_never_loses_ground() {
        for seed in 0..20 {
            let inst = instance(seed);
            let opts = SolveOptions {
                starts: 2,
                seed,
                max_iter: 100,
            };
            let first = maximize_convex_quadratic(&inst.obj, &inst.poly, &opts, None).unwrap();
            // widen every inequality, the old optimum stays feasible
            let mut wide = inst.poly.clone();
            wide.b_ub.iter_mut().for_each(|b| *b *= 2.0);
            let second = maximize_convex_quadratic(&inst.obj, &wide, &opts, Some(&first.x)).unwrap();
            assert!(second.objective >= first.objective - 1e-12);
        }
    }
}
