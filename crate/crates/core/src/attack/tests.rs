use nalgebra::{DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::case::{build_incidence, case39, default_candidates, parse_native};
use crate::detection::simulate_observation;

const TRIANGLE: &str =
    "[bus]\n1 slack\n2 load\n3 load\n[line]\n1 2 0.1 1\n2 3 0.15 1\n1 3 0.2 1\n[load]\n2 60\n3 40\n[gen]\n1 100\n";

const FIVE: &str = "\
[bus]
1 slack
2 load
3 load
4 load
5 load
[line]
1 2 0.06 1
2 3 0.1 1
3 4 0.08 1
4 5 0.12 1
5 1 0.09 1
2 4 0.2 1
1 3 0.15 1
[load]
2 80
3 60
4 70
5 50
[gen]
1 260
";

struct Fixture {
    case: GridCase,
    model: DcModel,
    inc: IncidenceMatrices,
    pmu: PmuPlacement,
}

fn fixture(text: &str, pmu: &[u32]) -> Fixture {
    let case = parse_native(text).unwrap();
    let model = DcModel::build(&case).unwrap();
    let inc = build_incidence(&case);
    let pmu = PmuPlacement::new(&case, pmu).unwrap();
    Fixture { case, model, inc, pmu }
}

fn random_zero_sum(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    let mut d = DVector::from_fn(n, |_, _| rng.random_range(-0.5..0.5));
    let mean = d.mean();
    d.add_scalar_mut(-mean);
    d
}

#[test]
fn zero_observation_gives_zero_k() {
    let f = fixture(FIVE, &[3]);
    let obs = PmuObservation::zeros(&f.pmu);
    let rm = build_residual_model(&f.model, &f.inc, &f.pmu, LineId(3), &obs).unwrap();
    assert!(rm.k.iter().all(|&x| x == 0.0));
    assert_eq!(rm.base_residual(), 0.0);
}

#[test]
fn stationarity_and_orthogonality() {
    let f = fixture(FIVE, &[3, 5]);
    let p = f.model.base_injection().clone();
    let k = LineId(1);
    let obs = simulate_observation(&f.case, &f.model, LineId(3), &f.pmu, &p, None).unwrap();
    let rm = build_residual_model(&f.model, &f.inc, &f.pmu, k, &obs).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let dd = random_zero_sum(&mut rng, rm.n_loads());
        let fs = rm.optimal_fk0(&dd);
        let r = &rm.alpha * &dd + &rm.beta1 + &rm.beta2 * fs;
        assert!(rm.beta2.dot(&r).abs() < 1e-12 * (1.0 + r.norm()));
        let proj = (&rm.alpha - &rm.g) * &dd + &rm.k;
        assert!(rm.beta2.dot(&proj).abs() < 1e-12 * (1.0 + proj.norm()));

        // derivative of L(f) = ‖…‖² vanishes at f*
        let h = 1e-6;
        let l = |f: f64| rm.residual_with_flow(&dd, f).powi(2);
        let deriv = (l(fs + h) - l(fs - h)) / (2.0 * h);
        assert!(deriv.abs() < 1e-6, "{deriv}");

        let direct = rm.residual_with_flow(&dd, fs);
        let proj_r = rm.residual_at(&dd);
        let quad = rm.residual_from_objective(&dd);
        assert!((direct - proj_r).abs() < 1e-12);
        assert!((proj_r.powi(2) - quad.powi(2)).abs() <= 1e-10 * proj_r.powi(2).max(1e-300));
    }
}

#[test]
fn orthogonal_observation_has_zero_best_fit() {
    let f = fixture(FIVE, &[3, 5]);
    let obs0 = PmuObservation::zeros(&f.pmu);
    let rm0 = build_residual_model(&f.model, &f.inc, &f.pmu, LineId(1), &obs0).unwrap();
    let b2 = &rm0.beta2;
    // a vector orthogonal to β₂ in the 2-D PMU space
    let obs = PmuObservation::new(vec![-b2[1], b2[0]]);
    let rm = build_residual_model(&f.model, &f.inc, &f.pmu, LineId(1), &obs).unwrap();
    assert!(rm.optimal_fk0(&DVector::zeros(rm.n_loads())).abs() < 1e-15);
}

#[test]
fn q_is_positive_semidefinite() {
    let case = case39();
    let model = DcModel::build(&case).unwrap();
    let inc = build_incidence(&case);
    let pmu = PmuPlacement::new(&case, &[4, 13, 18, 23, 24]).unwrap();
    let p = model.base_injection().clone();
    for k in default_candidates(&case, &pmu) {
        let obs = simulate_observation(&case, &model, k, &pmu, &p, None).unwrap();
        let rm = match build_residual_model(&model, &inc, &pmu, k, &obs) {
            Ok(rm) => rm,
            Err(Error::Unobservable { .. }) => continue,
            Err(e) => panic!("{e}"),
        };
        assert_eq!(rm.q_mat, rm.q_mat.transpose());
        let eig = SymmetricEigen::new(rm.q_mat.clone()).eigenvalues;
        let norm = rm.q_mat.norm();
        assert!(eig.min() >= -1e-10 * norm, "{k}: {}", eig.min());
    }
}

#[test]
fn three_bus_residual_matches_angle_pipeline() {
    let f = fixture(TRIANGLE, &[3]);
    let p = f.model.base_injection().clone();
    let k = LineId(0);
    let obs = simulate_observation(&f.case, &f.model, LineId(1), &f.pmu, &p, None).unwrap();
    let rm = build_residual_model(&f.model, &f.inc, &f.pmu, k, &obs).unwrap();
    let g = outage::gamma(&f.model, k).unwrap();
    let e = terminal_vector(&f.model, k);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let dd = random_zero_sum(&mut rng, 2);
        let fl = rng.random_range(-2.0..2.0);
        // falsified loads, outage emulated at flow fl plus the attack's own flow change
        let d_f = -(f.model.shift_factors() * &f.inc.v * &dd)[k.0];
        let dp = -g * (fl + d_f);
        let p_post = &p - &f.inc.v * &dd + &e * dp;
        let d_theta = f.model.solve_angles(&p_post).unwrap() - f.model.solve_angles(&p).unwrap();
        let r_pipe = (obs.vector() - DVector::from_fn(1, |_, _| d_theta[f.pmu.pmu_rows[0]])).norm();
        assert!((r_pipe - rm.residual_with_flow(&dd, fl)).abs() < 1e-10);
    }
}

#[test]
fn terminal_net_injection_bookkeeping() {
    let (pi, pj) = outage::terminal_net_injections(-214.84, 396.34, -326.84);
    assert!((pi - 112.0).abs() < 1e-9);
    assert!((pj - 69.5).abs() < 1e-9);
}

fn ne39() -> (GridCase, DcModel, IncidenceMatrices, PmuPlacement) {
    let case = case39();
    let model = DcModel::build(&case).unwrap();
    let inc = build_incidence(&case);
    let pmu = PmuPlacement::new(&case, &[4, 13, 18, 23, 24]).unwrap();
    (case, model, inc, pmu)
}

#[test]
fn tau_validation() {
    let (case, model, inc, pmu) = ne39();
    let k = case.find_line("25-26").unwrap();
    let obs = PmuObservation::zeros(&pmu);
    let rm = build_residual_model(&model, &inc, &pmu, k, &obs).unwrap();
    for bad in [0.0, -0.1, 4.5, f64::NAN] {
        assert!(matches!(
            assemble_problem(&rm, &case, &model, &inc, &pmu, bad, 0.0, FlowMode::BestFit),
            Err(Error::InvalidTau(_))
        ));
    }
    let p = assemble_problem(&rm, &case, &model, &inc, &pmu, 1.5, 0.0, FlowMode::BestFit).unwrap();
    assert!(!p.warnings.is_empty());
}

#[test]
fn line_25_26_bounds_and_zero_point() {
    let (case, model, inc, pmu) = ne39();
    let k = case.find_line("25-26").unwrap();
    let p = model.base_injection().clone();
    let obs = simulate_observation(&case, &model, k, &pmu, &p, None).unwrap();
    let rm = build_residual_model(&model, &inc, &pmu, k, &obs).unwrap();
    let sc = outage::OutageScenario::new(&model, k, p).unwrap();
    let prob = assemble_problem(&rm, &case, &model, &inc, &pmu, 0.5, sc.f_k0_actual, FlowMode::BestFit).unwrap();
    let base = case.base_mva();
    assert!((prob.tau * prob.terminal_demand.0 * base - 112.0).abs() < 1e-9);
    assert!((prob.tau * prob.terminal_demand.1 * base - 69.5).abs() < 1e-9);

    // Only the four terminal rows may bind at zero; all others hold with slack.
    let zero = DVector::zeros(rm.n_loads());
    let ub = &prob.polytope.a_ub * &zero - &prob.polytope.b_ub;
    assert!(ub.rows(4, ub.len() - 4).iter().all(|&v| v <= 0.0));
    assert!((&prob.polytope.a_eq * &zero - &prob.polytope.b_eq).amax() == 0.0);
}

#[test]
fn noise_free_best_fit_equals_actual_flow() {
    let (case, model, inc, pmu) = ne39();
    let k = case.find_line("25-26").unwrap();
    let p = model.base_injection().clone();
    let obs = simulate_observation(&case, &model, k, &pmu, &p, None).unwrap();
    let rm = build_residual_model(&model, &inc, &pmu, k, &obs).unwrap();
    let sc = outage::OutageScenario::new(&model, k, p).unwrap();
    let zero = DVector::zeros(rm.n_loads());
    assert!((rm.optimal_fk0(&zero) - sc.f_k0_actual).abs() < 1e-9);
    let best = assemble_problem(&rm, &case, &model, &inc, &pmu, 0.5, sc.f_k0_actual, FlowMode::BestFit).unwrap();
    let actual = assemble_problem(&rm, &case, &model, &inc, &pmu, 0.5, sc.f_k0_actual, FlowMode::Actual).unwrap();
    assert!((best.delta_p_prime(&zero) - actual.delta_p_prime(&zero)).abs() < 1e-9);
}

fn verify_inputs<'a>(
    f: &'a (GridCase, DcModel, IncidenceMatrices, PmuPlacement),
    jac: &'a Jacobian,
    obs: &'a PmuObservation,
    cands: &'a [LineId],
    bases: &'a [MeasurementSet],
) -> VerifyInputs<'a> {
    VerifyInputs {
        case: &f.0,
        model: &f.1,
        pmu: &f.3,
        jac,
        obs,
        candidates: cands,
        base_measurements: bases,
    }
}

#[test]
fn zero_attack_verifies_and_keeps_rank() {
    let f = ne39();
    let (case, model, inc, pmu) = (&f.0, &f.1, &f.2, &f.3);
    let k = case.find_line("25-26").unwrap();
    let obs = PmuObservation::zeros(pmu);
    let rm = build_residual_model(model, inc, pmu, k, &obs).unwrap();
    let prob = assemble_problem(&rm, case, model, inc, pmu, 0.5, 0.0, FlowMode::Actual).unwrap();
    let av = zero_attack(&prob).unwrap();

    let jac = model.build_jacobian();
    let theta = model.solve_angles(model.base_injection()).unwrap();
    let bases = vec![crate::estimation::noisy_measurements(&jac, &theta, 0.01, 1)];
    let cands = default_candidates(case, pmu);
    let rep = verify_attack(&av, &verify_inputs(&f, &jac, &obs, &cands, &bases)).unwrap();
    assert!(rep.passed(), "{rep:?}");
    assert_eq!(rep.pre_rank, rep.post_rank);
}

#[test]
fn unbalanced_perturbation_fails_verification() {
    let f = ne39();
    let (case, model, inc, pmu) = (&f.0, &f.1, &f.2, &f.3);
    let k = case.find_line("25-26").unwrap();
    let p = model.base_injection().clone();
    let obs = simulate_observation(case, model, k, pmu, &p, None).unwrap();
    let rm = build_residual_model(model, inc, pmu, k, &obs).unwrap();
    let sc = outage::OutageScenario::new(model, k, p).unwrap();
    let prob = assemble_problem(&rm, case, model, inc, pmu, 0.5, sc.f_k0_actual, FlowMode::BestFit).unwrap();
    let mut av = solve_attack(&prob, &SolveOptions { starts: 4, ..Default::default() }, None).unwrap();
    let jac = model.build_jacobian();
    let cands = default_candidates(case, pmu);
    let ok = verify_attack(&av, &verify_inputs(&f, &jac, &obs, &cands, &[])).unwrap();
    assert!(ok.passed(), "{ok:?}");

    let d = case.loads().iter().position(|l| l.bus == 15).unwrap();
    av.delta_d[d] += 0.05;
    let bad = verify_attack(&av, &verify_inputs(&f, &jac, &obs, &cands, &[])).unwrap();
    assert!(!bad.zero_sum.ok);
    assert!(!bad.stealth.ok);
    assert!(!bad.passed());
}

#[test]
fn record_round_trip() {
    let f = ne39();
    let (case, model, inc, pmu) = (&f.0, &f.1, &f.2, &f.3);
    let k = case.find_line("25-26").unwrap();
    let p = model.base_injection().clone();
    let obs = simulate_observation(case, model, k, pmu, &p, None).unwrap();
    let rm = build_residual_model(model, inc, pmu, k, &obs).unwrap();
    let prob = assemble_problem(&rm, case, model, inc, pmu, 0.5, 0.0, FlowMode::BestFit).unwrap();
    let av = solve_attack(&prob, &SolveOptions { starts: 2, ..Default::default() }, None).unwrap();
    let rec = av.to_record(case);
    assert_eq!(rec.delta_d.len(), 21);
    assert_eq!(rec.target_line, "25-26");
    let json = serde_json::to_string(&rec).unwrap();
    assert_eq!(serde_json::from_str::<AttackRecord>(&json).unwrap(), rec);
    let sum: f64 = rec.delta_d.iter().map(|l| l.mw).sum();
    assert!(sum.abs() < 1e-6);
}

#[test]
fn unobservable_target_is_reported() {
    // PMU on the slack only: every column of R·Binv is zero
    let f = fixture(FIVE, &[1]);
    let obs = PmuObservation::zeros(&f.pmu);
    assert!(matches!(
        build_residual_model(&f.model, &f.inc, &f.pmu, LineId(2), &obs),
        Err(Error::Unobservable { .. })
    ));
}

#[test]
fn improvement_over_base_residual() {
    let f = fixture(FIVE, &[3]);
    let p = f.model.base_injection().clone();
    for k in 0..f.case.n_lines() {
        let k = LineId(k);
        if f.pmu.covers_line(k) {
            continue;
        }
        let obs = simulate_observation(&f.case, &f.model, k, &f.pmu, &p, Some((1e-4, 9))).unwrap();
        let rm = build_residual_model(&f.model, &f.inc, &f.pmu, k, &obs).unwrap();
        let sc = outage::OutageScenario::new(&f.model, k, p.clone()).unwrap();
        for mode in [FlowMode::BestFit, FlowMode::Actual] {
            let prob = assemble_problem(&rm, &f.case, &f.model, &f.inc, &f.pmu, 0.8, sc.f_k0_actual, mode).unwrap();
            if prob.infeasible_at_zero {
                continue;
            }
            match solve_attack(&prob, &SolveOptions { starts: 8, ..Default::default() }, None) {
                Ok(av) => assert!(av.achieved_residual >= rm.base_residual() - 1e-12),
                Err(e) => panic!("{k}: {e}"),
            }
        }
    }
}

#[test]
fn dimension_checks() {
    let f = fixture(FIVE, &[3]);
    let obs = PmuObservation::new(vec![0.0, 0.0]);
    assert!(matches!(
        build_residual_model(&f.model, &f.inc, &f.pmu, LineId(0), &obs),
        Err(Error::Dimension { .. })
    ));
}
