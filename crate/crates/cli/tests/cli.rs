use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn ratsemi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ratsemi")).args(args).output().expect("binary runs")
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(bytes)))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn verify(report: &Path) -> Value {
    let out = ratsemi(&["verify", s(report)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let v = json(&out.stdout);
    assert_eq!(v["verified"], true);
    v
}

#[test]
fn classify_report_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("classify.json");
    let out = ratsemi(&["classify", "--maps", s(&fixture("rotated_quintic.json")), "--report", s(&report)]);
    assert!(out.status.success());
    let doc = json(&std::fs::read(&report).unwrap());
    assert_eq!(doc["schema"], "ratsemi-report/1");
    assert_eq!(doc["command"], "classify");
    assert!(doc.to_string().contains("POSITIVE"));
    assert!(verify(&report)["checks"].as_u64().unwrap() >= 1);
}

#[test]
fn forged_report_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("rel.json");
    let out = ratsemi(&[
        "relations",
        "--maps",
        s(&fixture("sign_flip.json")),
        "--check",
        "levin",
        "--report",
        s(&report),
    ]);
    assert!(out.status.success());
    verify(&report);

    let mut doc = json(&std::fs::read(&report).unwrap());
    let words = doc["witness"]["words"].as_array_mut().expect("word witnesses");
    let flipped = !words[0]["equal"].as_bool().unwrap();
    words[0]["equal"] = Value::Bool(flipped);
    std::fs::write(&report, serde_json::to_vec(&doc).unwrap()).unwrap();
    let out = ratsemi(&["verify", s(&report)]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out.stdout)["verified"], false);
}

#[test]
fn every_report_kind_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let d = |n: &str| dir.path().join(n);
    let runs: Vec<(PathBuf, Vec<String>)> = vec![
        (d("structure.json"), vec!["structure".into(), "--maps".into(), fixture("rotated_quintic.json").display().to_string()]),
        (
            d("theta.json"),
            ["theta", "--m", "2", "--n", "3", "--phi"].iter().map(|x| x.to_string()).chain([fixture("theta_phi.json").display().to_string()]).collect(),
        ),
        (
            d("dip.json"),
            ["dip", "--maps", s(&fixture("z2_z4.json")), "--z0", "2/1,0/1"].iter().map(|x| x.to_string()).collect(),
        ),
        (
            d("compare.json"),
            ["measure-compare", "--maps", s(&fixture("sign_flip.json")), "--samples", "2000", "--depth", "8"]
                .iter()
                .map(|x| x.to_string())
                .collect(),
        ),
    ];
    for (report, mut args) in runs {
        args.extend(["--report".into(), report.display().to_string()]);
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let out = ratsemi(&args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        verify(&report);
    }
}

#[test]
fn empty_map_list_is_a_config_error() {
    let out = ratsemi(&["classify", "--maps", s(&fixture("empty.json"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = json(&out.stderr);
    assert_eq!(err["exit_code"], 2);
    assert!(err["message"].as_str().unwrap().contains("no maps"));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    let body = serde_json::json!({
        "command": {"name": "classify", "args": {"maps": fixture("rotated_quintic.json"), "bugdet": 10}}
    });
    std::fs::write(&cfg, body.to_string()).unwrap();
    let out = ratsemi(&["--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bugdet"));

    let good = serde_json::json!({
        "command": {"name": "classify", "args": {"maps": fixture("rotated_quintic.json")}}, "seed": 3
    });
    std::fs::write(&cfg, good.to_string()).unwrap();
    assert!(ratsemi(&["--config", s(&cfg)]).status.success());
}

#[test]
fn missing_fixtures_are_named() {
    let dir = tempfile::tempdir().unwrap();
    let out = ratsemi(&["corpus", "--fixtures", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    let err = json(&out.stderr);
    assert_eq!(err["error"], "missing_fixture");
    assert!(err["message"].as_str().unwrap().contains(".json"));
}

#[test]
fn symbolic_filter_runs_only_symbolic_criteria() {
    let out = ratsemi(&["corpus", "--filter", "symbolic"]);
    let csv = String::from_utf8(out.stdout).unwrap();
    let ids: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ids, ["AC1", "AC2", "AC3", "AC4", "AC5", "AC9"]);
    assert!(csv.lines().skip(1).all(|l| l.contains(",symbolic,")));
}

#[test]
fn measure_is_reproducible_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let st = ratsemi(&[
            "measure",
            "--map",
            s(&fixture("chebyshev.json")),
            "--depth",
            "8",
            "--samples",
            "500",
            "--seed",
            seed,
            "--out",
            s(&out),
        ]);
        assert!(st.status.success());
        std::fs::read(out).unwrap()
    };
    let (a, b, c) = (run("a.csv", "7"), run("b.csv", "7"), run("c.csv", "8"));
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(a.starts_with(b"re,im,weight\n"));
}

#[test]
fn ruelle_writes_raster_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let pgm = dir.path().join("grid.pgm");
    let out = ratsemi(&[
        "ruelle",
        "--map",
        s(&fixture("basilica.json")),
        "--mode",
        "cesaro",
        "--res",
        "64",
        "--extent",
        "4",
        "--iters",
        "5",
        "--out",
        s(&pgm),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let img = std::fs::read(&pgm).unwrap();
    assert!(img.starts_with(b"P5\n64 64\n255\n"));
    assert_eq!(img.len(), b"P5\n64 64\n255\n".len() + 64 * 64);
    let sidecar = json(&std::fs::read(pgm.with_extension("json")).unwrap());
    assert_eq!(sidecar["command"], "ruelle");
    assert_eq!(sidecar, json(&out.stdout));
}

#[test]
fn invalid_arguments_exit_with_config_code() {
    let out = ratsemi(&["ruelle", "--map", s(&fixture("lattes.json")), "--res", "8", "--out", "/dev/null"]);
    assert_eq!(out.status.code(), Some(2));
    let out = ratsemi(&["classify"]);
    assert_eq!(out.status.code(), Some(2));
}
