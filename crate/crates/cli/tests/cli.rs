use assert_cmd::Command;
use predicates::prelude::*;
use serde_json::Value;

fn projcone() -> Command {
    Command::cargo_bin("projcone").unwrap()
}

fn parse_stdout(out: &[u8]) -> Value {
    serde_json::from_slice(out).expect("stdout is JSON")
}

#[test]
fn space_build_reports_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("rel.json");
    // e - p1 - p2 - p3 = 0: dim 3.
    std::fs::write(
        &file,
        r#"{"N": 3, "rows": [[1.0, -1.0, -1.0, -1.0]]}"#,
    )
    .unwrap();
    let out = projcone().args(["space", "build"]).arg(&file).assert().success();
    let v = parse_stdout(&out.get_output().stdout);
    assert_eq!(v["schema"], 1);
    assert_eq!(v["dim"], 3);
    assert!(v["manifest"]["input_hashes"][0]["sha256"].is_string());
}

#[test]
fn space_build_ns_relations_dim_nine() {
    // The nonsignalling relation matrix for n = m = 2, written out as a
    // plain relation file, must give dimension 9.
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("ns22.json");
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let idx = |x: usize, y: usize, a: usize, b: usize| ((x * 2 + y) * 2 + a) * 2 + b + 1;
    for x in 0..2 {
        for y in 0..2 {
            let mut row = vec![0.0; 17];
            row[0] = 1.0;
            for a in 0..2 {
                for b in 0..2 {
                    row[idx(x, y, a, b)] = -1.0;
                }
            }
            rows.push(row);
        }
    }
    for a in 0..2 {
        for x in 0..2 {
            let mut row = vec![0.0; 17];
            for b in 0..2 {
                row[idx(x, 0, a, b)] += 1.0;
                row[idx(x, 1, a, b)] -= 1.0;
            }
            rows.push(row);
        }
    }
    for b in 0..2 {
        for y in 0..2 {
            let mut row = vec![0.0; 17];
            for a in 0..2 {
                row[idx(0, y, a, b)] += 1.0;
                row[idx(1, y, a, b)] -= 1.0;
            }
            rows.push(row);
        }
    }
    std::fs::write(
        &file,
        serde_json::json!({"N": 16, "rows": rows}).to_string(),
    )
    .unwrap();
    let out = projcone().args(["space", "build"]).arg(&file).assert().success();
    let v = parse_stdout(&out.get_output().stdout);
    assert_eq!(v["dim"], 9);
}

#[test]
fn missing_file_is_input_error() {
    projcone()
        .args(["space", "build", "/nonexistent/rel.json"])
        .assert()
        .code(2)
        .stderr(predicate::str::contains("\"kind\":\"input\""));
}

#[test]
fn cone_check_accepts_generator_and_rejects_negative_unit() {
    let dir = tempfile::tempdir().unwrap();
    let rel = dir.path().join("rel.json");
    std::fs::write(&rel, r#"{"N": 1, "rows": []}"#).unwrap();
    // Space dim 2, basis {e, p1}; the generator p1 = (0, 1).
    let elem = dir.path().join("p1.json");
    std::fs::write(&elem, r#"{"coords": [0.0, 1.0]}"#).unwrap();
    let out = projcone()
        .args(["cone", "check", "--construction", "base", "--eps", "0"])
        .arg("--space")
        .arg(&rel)
        .arg("--element")
        .arg(&elem)
        .assert()
        .success();
    let v = parse_stdout(&out.get_output().stdout);
    assert_eq!(v["result"]["verdict"], "accept");
    assert_eq!(v["result"]["reverified"], true);

    let neg = dir.path().join("neg.json");
    std::fs::write(&neg, r#"{"coords": [-1.0, 0.0]}"#).unwrap();
    let out = projcone()
        .args(["cone", "check", "--construction", "base", "--eps", "0.5"])
        .arg("--space")
        .arg(&rel)
        .arg("--element")
        .arg(&neg)
        .assert()
        .success();
    let v = parse_stdout(&out.get_output().stdout);
    assert_eq!(v["result"]["verdict"], "reject");
    assert_eq!(v["result"]["reverified"], true);
}

#[test]
fn cone_check_proj_construction() {
    let dir = tempfile::tempdir().unwrap();
    let rel = dir.path().join("rel.json");
    std::fs::write(&rel, r#"{"N": 1, "rows": []}"#).unwrap();
    let elem = dir.path().join("p1.json");
    std::fs::write(&elem, r#"{"coords": [0.0, 1.0]}"#).unwrap();
    let out = projcone()
        .args(["cone", "check", "--construction", "proj:1:1", "--eps", "1e-6"])
        .arg("--space")
        .arg(&rel)
        .arg("--element")
        .arg(&elem)
        .assert()
        .success();
    let v = parse_stdout(&out.get_output().stdout);
    assert_eq!(v["result"]["verdict"], "accept");
}

#[test]
fn box_classify_pr_gallery_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    projcone()
        .args(["box", "gallery", "--out"])
        .arg(dir.path())
        .assert()
        .success();
    let pr = dir.path().join("pr.json");
    assert!(pr.exists());
    let out = projcone()
        .args(["box", "classify"])
        .arg(&pr)
        .args(["--k", "1", "--T", "1"])
        .assert()
        .success();
    let v = parse_stdout(&out.get_output().stdout);
    assert_eq!(v["ns"], true);
    assert_eq!(v["local"], false);
    assert_eq!(v["report"]["dns"], true);
}

#[test]
fn box_classify_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    projcone()
        .args(["box", "gallery", "--out"])
        .arg(dir.path())
        .assert()
        .success();
    let uni = dir.path().join("uniform.json");
    let run = || {
        let out = projcone()
            .args(["box", "classify"])
            .arg(&uni)
            .args(["--k", "1", "--T", "1", "--seed", "7"])
            .assert()
            .success();
        let mut v = parse_stdout(&out.get_output().stdout);
        // Wall clock and timings legitimately differ between runs.
        v["manifest"]["wall_ms"] = 0.into();
        v["report"]["elapsed_ms"] = 0.into();
        v.to_string()
    };
    assert_eq!(run(), run());
}

#[test]
fn hierarchy_run_emits_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("conv.csv");
    let out = projcone()
        .args([
            "hierarchy", "run", "--n", "2", "--m", "2", "--k", "1", "--T", "2", "--boxes", "3",
        ])
        .arg("--csv")
        .arg(&csv)
        .assert()
        .success();
    let v = parse_stdout(&out.get_output().stdout);
    assert_eq!(v["fails"], 0);
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "level,accepted_count,rejected_count,unknown_count");
    let rows: Vec<Vec<i64>> = lines
        .map(|l| l.split(',').map(|t| t.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    // Nesting: accepted_count nondecreasing, zero rejected.
    for w in rows.windows(2) {
        assert!(w[1][1] >= w[0][1]);
    }
    assert!(rows.iter().all(|r| r[2] == 0));
}

#[test]
fn sic_check_and_verify() {
    let out = projcone()
        .args(["sic", "check", "--d", "2", "--level", "1", "--samples", "20"])
        .assert()
        .success();
    let v = parse_stdout(&out.get_output().stdout);
    assert_eq!(v["dim"], 4);
    assert!((v["gram_spectrum"][0].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((v["gram_spectrum"][1].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    assert!(v["cp_verdict"].as_str().unwrap().starts_with("Pass"));

    // Round-trip an explicit tetrahedron SIC through `sic verify`.
    let s3 = 1.0 / 3.0f64.sqrt();
    let dirs = [
        [s3, s3, s3],
        [s3, -s3, -s3],
        [-s3, s3, -s3],
        [-s3, -s3, s3],
    ];
    let mats: Vec<Vec<Vec<[f64; 2]>>> = dirs
        .iter()
        .map(|v| {
            vec![
                vec![[0.5 * (1.0 + v[2]), 0.0], [0.5 * v[0], -0.5 * v[1]]],
                vec![[0.5 * v[0], 0.5 * v[1]], [0.5 * (1.0 - v[2]), 0.0]],
            ]
        })
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("sic2.json");
    std::fs::write(&file, serde_json::to_string(&mats).unwrap()).unwrap();
    let out = projcone().args(["sic", "verify"]).arg(&file).assert().success();
    let v = parse_stdout(&out.get_output().stdout);
    assert_eq!(v["valid"], true);

    // A perturbed family must fail.
    let mut bad = mats;
    bad[0][0][0][0] += 1e-3;
    let file = dir.path().join("bad.json");
    std::fs::write(&file, serde_json::to_string(&bad).unwrap()).unwrap();
    let out = projcone().args(["sic", "verify"]).arg(&file).assert().success();
    let v = parse_stdout(&out.get_output().stdout);
    assert_eq!(v["valid"], false);
}

#[test]
fn sic_witness_and_mub_check() {
    let out = projcone()
        .args(["sic", "witness", "--d", "3"])
        .assert()
        .success();
    let v = parse_stdout(&out.get_output().stdout);
    assert_eq!(v["span_rank"], 9);

    let out = projcone()
        .args(["mub", "check", "--d", "2", "--samples", "15"])
        .assert()
        .success();
    let v = parse_stdout(&out.get_output().stdout);
    assert_eq!(v["dim"], 4);
    assert!(v["cp_verdict"].as_str().unwrap().starts_with("Pass"));
}

#[test]
fn bad_construction_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let rel = dir.path().join("rel.json");
    std::fs::write(&rel, r#"{"N": 1, "rows": []}"#).unwrap();
    let elem = dir.path().join("e.json");
    std::fs::write(&elem, r#"{"coords": [1.0, 0.0]}"#).unwrap();
    projcone()
        .args(["cone", "check", "--construction", "frobnicate"])
        .arg("--space")
        .arg(&rel)
        .arg("--element")
        .arg(&elem)
        .assert()
        .code(2);
}
