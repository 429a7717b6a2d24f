use std::path::Path;
use std::process::{Command, Output};

use groundhold_cli::{SolveDocument, SAMPLES_FILE, SWEEP_FILE};

fn groundhold(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_groundhold"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

/// One flight at slot 1 of 2, C_f = 1, C_h = 2, capacity history {1}.
fn worked_bundle(dir: &Path) {
    std::fs::create_dir_all(dir).unwrap();
    std::fs::write(
        dir.join("params.toml"),
        "schema = \"groundhold-instance/1\"\nhorizon = 2\nairborne_cost = 2.0\n",
    )
    .unwrap();
    std::fs::write(
        dir.join("schedule.csv"),
        "flight_id,airport,scheduled_arrival_slot,ground_cost\nf1,A,1,1\n",
    )
    .unwrap();
    std::fs::write(dir.join("capacity.csv"), "slot,airport,throughput\n1,A,1\n2,A,1\n").unwrap();
}

fn solve_doc(args: &[&str]) -> (i32, SolveDocument) {
    let o = groundhold(args);
    let doc = serde_json::from_slice(&o.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}", String::from_utf8_lossy(&o.stderr));
    });
    (code(&o), doc)
}

#[test]
fn solve_worked_instance() {
    let tmp = tempfile::tempdir().unwrap();
    let inst = tmp.path().join("inst");
    worked_bundle(&inst);
    let inst = inst.to_str().unwrap();

    let (c, doc) = solve_doc(&["solve", inst, "--model", "dr", "--epsilon", "0.4", "--grid", "0..1"]);
    assert_eq!(c, 0);
    assert!((doc.objective.unwrap() - 1.6).abs() < 1e-6);
    assert_eq!(doc.assignments["f1"], 1);
    let duals = &doc.duals["A"];
    assert!((duals.alpha - 4.0).abs() < 1e-6);
    assert!((duals.worst_case_expected_cost - duals.dual_objective).abs() < 1e-6);
    assert!(duals.worst_case_distance <= 0.4 + 1e-9);

    let (c, doc) = solve_doc(&["solve", inst, "--model", "sp"]);
    assert_eq!(c, 0);
    assert!(doc.objective.unwrap().abs() < 1e-9);
    assert!(doc.duals.is_empty());

    let (c, doc) = solve_doc(&["solve", inst, "--model", "det", "--capacity", "0"]);
    assert_eq!(c, 1);
    assert_eq!(doc.objective, None);

    let o = groundhold(&["solve", inst, "--model", "dr"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("--epsilon"));
    assert_eq!(
        code(&groundhold(&["solve", inst, "--model", "sp", "--epsilon", "1"])),
        2
    );
    assert_eq!(code(&groundhold(&["solve", "/nonexistent/bundle", "--model", "sp"])), 2);
    assert_eq!(
        code(&groundhold(&["solve", inst, "--model", "sp", "--optimality-gap", "0"])),
        2
    );
}

#[test]
fn gen_is_seeded() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        let o = groundhold(&["--seed", "9", "gen", "--out", dir.to_str().unwrap()]);
        assert_eq!(code(&o), 0);
    }
    for f in ["schedule.csv", "connections.csv", "capacity.csv", "params.toml"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let inst = groundhold::ingest::load_bundle(&a).unwrap();
    assert!(groundhold::validate_schedule(&inst.schedule).is_empty());

    let o = groundhold(&[
        "gen",
        "--out",
        tmp.path().join("c").to_str().unwrap(),
        "--connection-density",
        "2",
    ]);
    assert_eq!(code(&o), 2);
    assert!(!o.stderr.is_empty());
    assert_eq!(code(&groundhold(&["gen"])), 2);
}

#[test]
fn export_and_evaluate() {
    let tmp = tempfile::tempdir().unwrap();
    let inst = tmp.path().join("inst");
    worked_bundle(&inst);
    let inst = inst.to_str().unwrap();

    let o = groundhold(&[
        "export-mps",
        inst,
        "--model",
        "dr",
        "--epsilon",
        "0.4",
        "--grid",
        "0..1",
    ]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("* rows 7 columns 8"), "{text}");
    assert!(text.ends_with("ENDATA\n"));
    let bad = groundhold(&["export-mps", inst, "--model", "det", "--out", "/nonexistent/dir/m.mps"]);
    assert_eq!(code(&bad), 2);

    let result = tmp.path().join("dr.json");
    let o = groundhold(&[
        "solve",
        inst,
        "--model",
        "dr",
        "--epsilon",
        "1",
        "--grid",
        "0..1",
        "--out",
        result.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let dist = tmp.path().join("eval.csv");
    std::fs::write(&dist, "capacity,probability\n0,0.5\n1,0.5\n").unwrap();
    let o = groundhold(&[
        "--seed",
        "4",
        "evaluate",
        inst,
        "--policy",
        result.to_str().unwrap(),
        "--eval-dist",
        dist.to_str().unwrap(),
        "--samples",
        "200",
    ]);
    assert_eq!(code(&o), 0);
    let doc: groundhold_cli::EvaluateDocument = serde_json::from_slice(&o.stdout).unwrap();
    // held to slot 2: ground 1, plus 2 airborne when capacity is 0
    assert_eq!(doc.expected_cost, 2.0);
    for (k, c) in doc.samples.iter().zip(&doc.per_sample_costs) {
        assert_eq!(*c, if *k == 0 { 3.0 } else { 1.0 });
    }
}

#[test]
fn sweep_writes_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let inst = tmp.path().join("inst");
    let o = groundhold(&["--seed", "2", "gen", "--out", inst.to_str().unwrap(), "--flights", "5"]);
    assert_eq!(code(&o), 0);
    let out = tmp.path().join("sweep");
    let o = groundhold(&[
        "--seed",
        "1",
        "sweep",
        inst.to_str().unwrap(),
        "--omega",
        "0,0.5",
        "--sample-sizes",
        "10,20",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(out.join(SWEEP_FILE)).unwrap();
    let rows: Vec<&str> = table.lines().skip(2).collect();
    // (det + sp + 2 radii) x 2 sample sizes
    assert_eq!(rows.len(), 8);
    let field = |r: &str, i: usize| r.split('\t').nth(i).unwrap().to_string();
    for n in ["10", "20"] {
        let sp = rows.iter().find(|r| r.starts_with("sp\t") && field(r, 2) == n).unwrap();
        let dr0 = rows
            .iter()
            .find(|r| r.starts_with("dr\t0\t") && field(r, 2) == n)
            .unwrap();
        let (a, b): (f64, f64) = (field(sp, 5).parse().unwrap(), field(dr0, 5).parse().unwrap());
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
    let samples = std::fs::read_to_string(out.join(SAMPLES_FILE)).unwrap();
    assert_eq!(samples.lines().count(), 2 + 4 * (10 + 20));
}
