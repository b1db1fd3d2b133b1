use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use imgconn::image::is_connected;
use serde_json::Value;

fn imgconn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_imgconn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_ok(args: &[&str]) -> Value {
    let out = imgconn(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn without_timing(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("timing");
    v
}

#[test]
fn gen_connected_writes_image_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let pbm = dir.path().join("s.pbm");
    let p = pbm.to_str().unwrap();
    let out = imgconn(&["gen", "connected", "--family", "serpentine", "--n", "257", "--seed", "4", "--out", p]);
    assert!(out.status.success());
    let img = imgconn::pbm::read(fs::File::open(&pbm).unwrap()).unwrap();
    assert_eq!(img.side(), 257);
    assert!(is_connected(&img));
    let side = read_json(&dir.path().join("s.pbm.json"));
    assert_eq!(side["schemaVersion"], 1);
    assert_eq!(side["seed"], 4);
    assert_eq!(side["family"], "serpentine");
}

#[test]
fn gen_dots_is_certified_far() {
    let dir = tempfile::tempdir().unwrap();
    let pbm = dir.path().join("d.pbm");
    let out = imgconn(&["gen", "dots", "--n", "1025", "--eps", "1/16", "--out", pbm.to_str().unwrap()]);
    assert!(out.status.success());
    let side = read_json(&dir.path().join("d.pbm.json"));
    assert_eq!(side["certifiedFar"], true);
    assert_eq!(side["componentCount"], side["dotCount"]);
}

#[test]
fn gen_hard_records_layout() {
    let dir = tempfile::tempdir().unwrap();
    let pbm = dir.path().join("h.pbm");
    let out = imgconn(&["gen", "hard", "--n", "512", "--eps", "2^-16", "--seed", "7", "--out", pbm.to_str().unwrap()]);
    assert!(out.status.success());
    let side = read_json(&dir.path().join("h.pbm.json"));
    assert_eq!(side["side"], 513);
    assert_eq!(side["blackRegions"], 512);
    assert_eq!(side["farness"]["isEpsFar"], true);
    assert!(side["instance"]["disconnectingPixels"].is_array());
}

#[test]
fn connected_image_is_never_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let pbm = dir.path().join("b.pbm");
    let p = pbm.to_str().unwrap();
    assert!(imgconn(&["gen", "connected", "--family", "blob", "--n", "513", "--out", p]).status.success());
    for variant in ["adaptive", "nonadaptive"] {
        let v = json_ok(&["test", "--image", p, "--eps", "1/16", "--variant", variant, "--trials", "50"]);
        assert_eq!(v["summary"]["rejections"], 0, "{variant}");
    }
}

#[test]
fn far_dots_are_rejected_with_sound_certificates() {
    let v = json_ok(&["test", "--procedural", "dots", "--n", "513", "--eps", "1/16", "--trials", "40"]);
    let s = &v["summary"];
    assert_eq!(s["rejections"], 40);
    assert_eq!(s["certificatesChecked"], 40);
    assert_eq!(s["certificatesSound"], 40);
}

#[test]
fn runs_are_reproducible_and_schedule_independent() {
    let base = ["test", "--procedural", "comb", "--n", "513", "--eps", "1/16", "--trials", "12", "--seed", "5"];
    let a = without_timing(json_ok(&base));
    let b = without_timing(json_ok(&base));
    assert_eq!(a, b);
    let mut seq = base.to_vec();
    seq.push("--sequential");
    assert_eq!(a, without_timing(json_ok(&seq)));
}

#[test]
fn nonadaptive_counts_do_not_depend_on_the_image() {
    let q = |family: &str| {
        let v = json_ok(&["test", "--procedural", family, "--n", "513", "--eps", "1/16", "--variant", "nonadaptive", "--trials", "3"]);
        (v["summary"]["queries"]["min"].clone(), v["summary"]["queries"]["max"].clone())
    };
    let white = q("white");
    assert_eq!(white.0, white.1);
    assert_eq!(white, q("comb"));
}

#[test]
fn invalid_input_exits_with_two() {
    for args in [
        &["test", "--procedural", "white", "--n", "513", "--eps", "0.1"][..],
        &["test", "--procedural", "white", "--n", "513", "--eps", "1/16", "--trials", "0"],
        &["test", "--procedural", "white", "--n", "100", "--eps", "1/16"],
        &["gen", "dots", "--n", "65", "--eps", "1/16", "--out", "/nonexistent/x.pbm"],
        &["lowerbound", "--n", "500", "--eps", "2^-16"],
        &["sweep", "--eps-list", "1/16", "--family", "spiral"],
    ] {
        assert_eq!(imgconn(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn normalize_flag_rounds_down() {
    let v = json_ok(&["test", "--procedural", "white", "--n", "513", "--eps", "0.07", "--normalize", "--trials", "1"]);
    assert_eq!(v["summary"]["eps"], "1/16");
}

#[test]
fn empty_sweep_is_just_a_header() {
    let out = imgconn(&["sweep", "--eps-list", ""]);
    assert!(out.status.success());
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "eps,seed,side,trials,meanQueries,maxQueries,rejectionRate,runtimeMs\n"
    );
}

#[test]
fn nonadaptive_sweep_respects_the_cap() {
    let out = imgconn(&["sweep", "--eps-list", "1/16,1/32", "--variant", "nonadaptive", "--trials", "2"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    for row in rows {
        let inv: f64 = row[0].trim_start_matches("1/").parse().unwrap();
        let max: f64 = row[5].parse().unwrap();
        assert!(max <= 64.0 * inv * inv + 8.0 * inv, "{row:?}");
    }
}

#[test]
fn lowerbound_reports() {
    let empty = json_ok(&["lowerbound", "--q", "0", "--mc-trials", "100"]);
    assert_eq!(empty["prExact"], 0.0);
    assert_eq!(empty["checksPassed"], true);

    let v = json_ok(&["lowerbound", "--strategy", "uniform", "--q", "1024", "--mc-trials", "20000", "--seed", "3"]);
    let exact = v["prExact"].as_f64().unwrap();
    let mc = v["monteCarlo"]["estimate"].as_f64().unwrap();
    let sigma = (exact * (1.0 - exact) / 20000.0).sqrt();
    assert!((mc - exact).abs() <= 3.0 * sigma + 1e-12, "{mc} vs {exact}");
    assert!(v["criticalQ"].as_u64().is_some());

    // one full bridge square per window of every level
    let full = json_ok(&["lowerbound", "--strategy", "bridge-focused", "--q", "272", "--mc-trials", "0"]);
    assert_eq!(full["prExact"], 1.0);
    assert_eq!(full["q"], 272);
}

#[test]
fn lowerbound_accepts_query_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("q.json");
    fs::write(&path, r#"[{"x":4,"y":1},{"x":5,"y":1},{"x":6,"y":1},{"x":7,"y":1}]"#).unwrap();
    let v = json_ok(&["lowerbound", "--queries", path.to_str().unwrap(), "--mc-trials", "0"]);
    assert_eq!(v["strategy"], "file");
    // the level-2 window holding this bridge is picked w.p. 1/3 · 1/16
    assert!((v["prExact"].as_f64().unwrap() - 1.0 / 48.0).abs() < 1e-12);
}

#[test]
fn audit_and_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let pbm = dir.path().join("d.pbm");
    let p = pbm.to_str().unwrap();
    assert!(imgconn(&["gen", "dots", "--n", "129", "--eps", "1/16", "--out", p, "--plain"]).status.success());
    assert!(fs::read_to_string(&pbm).unwrap().starts_with("P1"));
    let v = json_ok(&["audit", "--image", p, "--eps", "1/16"]);
    assert_eq!(v["structural"]["passed"], true);
    assert_eq!(v["farness"]["isEpsFar"], true);

    let tiny = dir.path().join("t.pbm");
    fs::write(&tiny, "P1\n3 3\n1 0 1\n0 0 0\n1 0 1\n").unwrap();
    let o = json_ok(&["oracle", "--image", tiny.to_str().unwrap()]);
    assert_eq!(o["distance"], 3);
    let big = imgconn(&["oracle", "--image", p]);
    assert_eq!(big.status.code(), Some(2));
}
