//! End-to-end runs of the `gridmask` binary.

use std::path::Path;
use std::process::{Command, Output};

use gridmask_cli::output::{read_table, table_command, AttackRow, DetectRow, GammaRow, SweepRow};
use gridmask_core::attack::AttackRecord;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridmask"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn ok(args: &[&str]) -> String {
    let o = run(args);
    assert!(o.status.success(), "{args:?}: {}", stderr(&o));
    stdout(&o)
}

#[test]
fn gamma_of_25_26() {
    let rows: Vec<GammaRow> = read_table(&ok(&["gamma", "--line", "25-26"])).unwrap();
    assert_eq!(rows.len(), 1);
    assert!((rows[0].gamma - -3.1582).abs() <= 0.07);
    assert_eq!(rows[0].x_pu, 0.0323);
    assert!((rows[0].xth - (rows[0].binv_ii + rows[0].binv_jj - 2.0 * rows[0].binv_ij)).abs() < 1e-15);
    // the same line by 1-based index
    let by_index: Vec<GammaRow> = read_table(&ok(&["gamma", "--line", "40"])).unwrap();
    assert_eq!(by_index, rows);
}

#[test]
fn gamma_of_bridge_is_an_error() {
    let o = run(&["gamma", "--line", "16-19"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("degenerate outage"), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
}

#[test]
fn detect_noise_free_25_26_holds_rank_one() {
    let rows: Vec<DetectRow> = read_table(&ok(&["detect", "--line", "25-26"])).unwrap();
    let r = rows.iter().find(|r| r.line == "25-26").unwrap();
    assert_eq!(r.rank, 1);
    assert!(r.residual_deg < 1e-9);
    assert!(rows.windows(2).all(|w| w[0].residual_deg <= w[1].residual_deg + 1e-12));
}

#[test]
fn zero_observation_ranks_by_index() {
    let dir = tempfile::tempdir().unwrap();
    let obs = dir.path().join("zero.txt");
    std::fs::write(&obs, "4 0\n13 0\n18 0\n23 0\n24 0\n").unwrap();
    let rows: Vec<DetectRow> = read_table(&ok(&["detect", "--obs", obs.to_str().unwrap()])).unwrap();
    assert_eq!(rows.len(), 24);
    assert!(rows.iter().all(|r| r.residual_deg == 0.0 && r.rank == 1));
    assert!(rows.windows(2).all(|w| w[0].index < w[1].index));
}

#[test]
fn csv_and_json_agree() {
    let args = ["detect", "--line", "26-27", "--noise-sigma", "0.05", "--seed", "4"];
    let csv: Vec<DetectRow> = read_table(&ok(&[&args[..], &["--format", "csv"]].concat())).unwrap();
    let json_text = ok(&[&args[..], &["--format", "json"]].concat());
    let json: Vec<DetectRow> = read_table(&json_text).unwrap();
    assert_eq!(csv, json);
    assert_eq!(table_command(&json_text).unwrap(), "detect");
}

#[test]
fn attack_masks_25_26() {
    let dir = tempfile::tempdir().unwrap();
    let vec_path = dir.path().join("attack.json");
    let text = ok(&[
        "attack",
        "--line",
        "25-26",
        "--tau",
        "0.5",
        "--format",
        "json",
        "--vector-out",
        vec_path.to_str().unwrap(),
    ]);
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(doc["meta"]["pre_rank"], 1);
    assert!(doc["meta"]["post_rank"].as_u64().unwrap() > 1);
    assert_eq!(doc["meta"]["masked"], true);
    let rows: Vec<AttackRow> = read_table(&text).unwrap();
    assert_eq!(rows.iter().filter(|r| r.phase == "pre").count(), 24);
    assert_eq!(rows.iter().filter(|r| r.phase == "post").count(), 24);

    let rec: AttackRecord = serde_json::from_str(&std::fs::read_to_string(&vec_path).unwrap()).unwrap();
    assert_eq!(rec.target_line, "25-26");
    assert_eq!(rec.tau, 0.5);
    let sum: f64 = rec.delta_d.iter().map(|d| d.mw).sum();
    assert!(sum.abs() < 1e-6);
    assert!(rec.terminal.net_from_mw.abs() <= 112.0 + 1e-6);
    assert!(rec.terminal.net_to_mw.abs() <= 69.5 + 1e-6);
    assert!(rec.achieved_residual_deg >= rec.base_residual_deg);
}

#[test]
fn vanishing_budget() {
    // With the outage's own flow to hide, no budget near zero is admissible.
    let o = run(&["attack", "--line", "25-26", "--tau", "1e-6"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("infeasible"), "{}", stderr(&o));

    // With nothing to hide (zero observation, best-fit flow 0) the attack
    // barely moves the residual.
    let dir = tempfile::tempdir().unwrap();
    let obs = dir.path().join("zero.txt");
    std::fs::write(&obs, "4 0\n13 0\n18 0\n23 0\n24 0\n").unwrap();
    let text = ok(&["attack", "--line", "25-26", "--tau", "1e-6", "--obs", obs.to_str().unwrap(), "--format", "json"]);
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    let a = &doc["meta"]["attack"];
    let (pre, post) = (a["base_residual_deg"].as_f64().unwrap(), a["achieved_residual_deg"].as_f64().unwrap());
    assert!((post - pre).abs() < 1e-4, "pre {pre} post {post}");
}

#[test]
fn attack_rejects_bad_targets() {
    for (line, msg) in [("16-19", "islanding"), ("10-13", "PMU"), ("26-28", "unobservable")] {
        let o = run(&["attack", "--line", line, "--tau", "0.5"]);
        assert_eq!(o.status.code(), Some(1), "{line}");
        assert!(stderr(&o).contains(msg), "{line}: {}", stderr(&o));
    }
    let o = run(&["attack", "--line", "25-26", "--tau", "0.5,1.0"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn invalid_config_values() {
    for args in [
        &["gamma", "--line", "25-26", "--tau", "0"][..],
        &["gamma", "--line", "25-26", "--tau", "4.5"],
        &["gamma", "--line", "25-26", "--pmu", "4,99"],
        &["gamma", "--line", "99-98"],
    ] {
        let o = run(args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(stderr(&o).starts_with("error:"), "{args:?}");
    }
}

#[test]
fn sweep_is_deterministic_and_warm_started() {
    let args = ["sweep-tau", "--lines", "25-26,2-25,1-2", "--tau", "1.0,0.5,1.5", "--starts", "8", "--seed", "3"];
    let a = ok(&args);
    let b = ok(&args);
    assert_eq!(a, b);
    let rows: Vec<SweepRow> = read_table(&a).unwrap();
    assert_eq!(rows.len(), 9);
    for line in rows.chunks(3) {
        assert_eq!(line.iter().map(|r| r.tau).collect::<Vec<_>>(), vec![0.5, 1.0, 1.5]);
        let obj: Vec<f64> = line.iter().filter_map(|r| r.objective).collect();
        assert!(obj.windows(2).all(|w| w[1] >= w[0] - 1e-12), "{obj:?}");
    }
}

#[test]
fn full_study_sweep_emits_72_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.json");
    let o = run(&[
        "sweep-tau",
        "--candidates",
        "study",
        "--tau",
        "0.5,1.0,1.5",
        "--format",
        "json",
        "--out",
        out.to_str().unwrap(),
    ]);
    // 16-19 (bridge), 10-13 (PMU) and the unobservable 26-28, 26-29 fail
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<SweepRow> = read_table(&text).unwrap();
    assert_eq!(rows.len(), 72);
    let errors: Vec<&str> = rows.iter().filter(|r| r.status == "error").map(|r| r.line.as_str()).collect();
    assert_eq!(errors.len(), 12);
    for l in ["16-19", "10-13", "26-28", "26-29"] {
        assert_eq!(errors.iter().filter(|e| **e == l).count(), 3);
    }
    let report = ok(&["report", out.to_str().unwrap()]);
    assert!(report.lines().any(|l| l.starts_with("25-26\t")));
    assert_eq!(report.lines().filter(|l| l.contains('-') && l.contains('\t')).count(), 24);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(&cfg, "tau = [1.0]\nformat = \"json\"\n[solver]\nstarts = 4\n").unwrap();
    let c = cfg.to_str().unwrap();
    let from_file: Vec<SweepRow> = read_table(&ok(&["sweep-tau", "--config", c, "--lines", "25-26"])).unwrap();
    assert_eq!(from_file[0].tau, 1.0);
    let text = ok(&["sweep-tau", "--config", c, "--lines", "25-26", "--tau", "0.5", "--format", "csv"]);
    assert!(text.starts_with("# gridmask schema_version=1 command=sweep-tau"));
    let flagged: Vec<SweepRow> = read_table(&text).unwrap();
    assert_eq!(flagged[0].tau, 0.5);

    std::fs::write(&cfg, "taus = [1.0]\n").unwrap();
    let o = run(&["gamma", "--line", "25-26", "--config", c]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("taus"), "{}", stderr(&o));
}

#[test]
fn native_case_file() {
    let dir = tempfile::tempdir().unwrap();
    let case = dir.path().join("five.case");
    std::fs::write(
        &case,
        "[bus]\n1 slack\n2 load\n3 load\n4 load\n5 load\n[line]\n1 2 0.06 1\n2 3 0.1 1\n3 4 0.08 1\n4 5 0.12 1\n\
         5 1 0.09 1\n2 4 0.2 1\n1 3 0.15 1\n[load]\n2 80\n3 60\n4 70\n5 50\n[gen]\n1 260\n",
    )
    .unwrap();
    let c = case.to_str().unwrap();
    let rows: Vec<DetectRow> = read_table(&ok(&["detect", "--case", c, "--pmu", "2,4", "--line", "1-3"])).unwrap();
    assert_eq!(rows[0].line, "1-3");
    let o = run(&["detect", "--case", Path::new("/nonexistent/x").to_str().unwrap(), "--line", "1-2"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn report_renders_ranking_layouts() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("attack.csv");
    let o = run(&["attack", "--line", "25-26", "--tau", "0.5", "--out", f.to_str().unwrap()]);
    assert!(o.status.success());
    let text = ok(&["report", f.to_str().unwrap()]);
    assert!(text.contains("BEFORE ATTACK"));
    assert!(text.contains("AFTER ATTACK"));
    assert_eq!(text.lines().filter(|l| l.contains('\t') && !l.starts_with("rank")).count(), 10);
}
