use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use invariance_cli::*;
use serde_json::Value;

fn corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_invariance")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn quiet() -> Options {
    Options { no_timestamp: true, ..Options::default() }
}

fn demo_report(name: &str, opts: &Options) -> Report {
    run_bytes(&format!("{name}.scn"), demo(name).unwrap().as_bytes(), opts)
}

fn leg<'a>(r: &'a Report, row: &str, leg: &str) -> &'a LegOut {
    &r.rows.iter().find(|x| x.id == row).unwrap_or_else(|| panic!("row {row}")).legs[leg]
}

#[test]
fn shipped_corpus_meets_every_expectation() {
    let reports = run_suite(&corpus(), &quiet(), 4).unwrap();
    assert!(reports.len() >= 15);
    for r in &reports {
        assert!(r.expected_met && r.exit_code == 0, "{}", r.render());
        for row in &r.rows {
            let legs: BTreeSet<_> = row.legs.keys().collect();
            let expected: BTreeSet<_> = row.expected.keys().collect();
            assert_eq!(legs, expected, "{}: row {} lacks expectations", r.scenario, row.id);
        }
    }
    let kinds: BTreeSet<_> = reports.iter().filter_map(|r| r.kind.as_deref()).collect();
    for k in
        ["tensor", "objectivity", "relative", "christoffel", "geometric-suite", "mechanics", "ns-symmetry", "decomposed", "closure-screen"]
    {
        assert!(kinds.contains(k), "no {k} scenario");
    }
    let ns_rows: BTreeSet<String> = reports
        .iter()
        .filter(|r| r.kind.as_deref() == Some("ns-symmetry"))
        .flat_map(|r| r.rows.iter().map(|x| x.id.split('#').next().unwrap().to_string()))
        .collect();
    for tag in ["G", "S1", "S2", "S3", "S4", "S5", "S6", "rotation"] {
        assert!(ns_rows.contains(tag), "no {tag} verdict in the corpus");
    }
}

#[test]
fn demos_match_the_corpus() {
    let files = scenario_files(&corpus()).unwrap();
    let stems: Vec<String> = files.iter().map(|f| f.file_stem().unwrap().to_string_lossy().into_owned()).collect();
    let mut names: Vec<String> = DEMOS.iter().map(|(n, _)| n.to_string()).collect();
    names.sort();
    assert_eq!(names, stems);
    for (name, text) in DEMOS {
        assert_eq!(fs::read_to_string(corpus().join(format!("{name}.scn"))).unwrap(), *text);
        assert_eq!(parse_scenario(text).unwrap().name, *name);
    }
}

#[test]
fn strain_rate_is_tensor_and_objective() {
    let r = demo_report("strain_rate", &quiet());
    assert!(leg(&r, "S", "tensor").pass);
    assert!(leg(&r, "S", "objective").pass);
    assert_eq!(r.status, Status::Pass);
    assert_eq!(r.exit_code, EXIT_OK);
}

#[test]
fn vorticity_fails_by_minus_spin_and_is_relatively_objective() {
    let r = demo_report("vorticity", &quiet());
    let t = leg(&r, "W", "tensor");
    assert!(!t.pass && t.min_residual > 1e-3);
    assert!(leg(&r, "W", "defect").residual < 1e-10);
    assert!(leg(&r, "W_Omega", "tensor").pass);
    assert!(leg(&r, "W_Omega", "relative_objective").pass);
    assert_eq!(r.status, Status::Fail);
    assert_eq!(r.exit_code, EXIT_OK);
    let strict = demo_report("vorticity", &Options { strict: true, ..quiet() });
    assert_eq!(strict.exit_code, EXIT_MISMATCH);
    assert_eq!(demo_report("strain_rate", &Options { strict: true, ..quiet() }).exit_code, EXIT_OK);
}

#[test]
fn empty_file_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("empty.scn");
    fs::write(&f, "").unwrap();
    let o = bin(&["check", f.to_str().unwrap(), "--no-timestamp"]);
    assert_eq!(code(&o), EXIT_SCHEMA);
    assert!(String::from_utf8_lossy(&o.stdout).contains("empty scenario file"));
}

#[test]
fn empty_directory_gives_an_empty_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.json");
    let o = bin(&["suite", dir.path().to_str().unwrap(), "--json", out.to_str().unwrap()]);
    assert_eq!(code(&o), EXIT_OK);
    assert_eq!(fs::read_to_string(out).unwrap().trim(), "[]");
}

#[test]
fn broken_file_fails_alone() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["strain_rate", "oscillator", "closure_phi2_viscous"] {
        fs::write(dir.path().join(format!("{name}.scn")), demo(name).unwrap()).unwrap();
    }
    fs::write(dir.path().join("broken.scn"), "{\"schema\": 1, \"name\": ").unwrap();
    let out = dir.path().join("out.json");
    let o = bin(&["suite", dir.path().to_str().unwrap(), "--json", out.to_str().unwrap(), "--no-timestamp", "--jobs", "2"]);
    assert_eq!(code(&o), EXIT_SCHEMA);
    let v: Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    let reports = v.as_array().unwrap();
    assert_eq!(reports.len(), 4);
    for r in reports {
        let want = if r["source"] == "broken.scn" { 2 } else { 0 };
        assert_eq!(r["exit_code"], want, "{r}");
    }
    let names: Vec<_> = reports.iter().map(|r| r["scenario"].as_str().unwrap()).collect();
    assert_eq!(names, ["broken", "closure_phi2_viscous", "oscillator", "strain_rate"]);
}

#[test]
fn suite_json_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, jobs: &str| {
        let out = dir.path().join(name);
        let o = bin(&["suite", corpus().to_str().unwrap(), "--no-timestamp", "--jobs", jobs, "--json", out.to_str().unwrap()]);
        assert_eq!(code(&o), EXIT_OK, "{}", String::from_utf8_lossy(&o.stdout));
        (fs::read(out).unwrap(), o.stdout)
    };
    let (a, sa) = run("a.json", "1");
    let (b, sb) = run("b.json", "4");
    assert_eq!(a, b);
    assert_eq!(sa, sb);
}

#[test]
fn timestamps_appear_only_without_the_flag() {
    let with = demo_report("oscillator", &Options::default());
    assert!(with.runtime_ms.is_some() && with.timestamp.is_some());
    let without = demo_report("oscillator", &quiet());
    let v = serde_json::to_value(&without).unwrap();
    assert!(v.get("runtime_ms").is_none() && v.get("timestamp").is_none());
}

#[test]
fn report_header_fields() {
    let r = demo_report("oscillator", &quiet());
    let v = serde_json::to_value(&r).unwrap();
    assert_eq!(v["tool"], "invariance");
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["report_schema"], 1);
    assert_eq!(v["kind"], "mechanics");
    assert_eq!(v["status"], "pass");
    assert_eq!(v["input_digest"], digest(demo("oscillator").unwrap().as_bytes()));
    assert_eq!(digest(b"abc"), "sha256:ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

#[test]
fn overrides_reach_the_report() {
    let r = demo_report("strain_rate", &Options { tol: Some(1e-6), seed: Some(7), ..quiet() });
    assert_eq!(r.tolerance, Some(1e-6));
    assert_eq!(r.seed, Some(7));
    assert_eq!(leg(&r, "S", "tensor").tolerance, 1e-6);
    let base = demo_report("strain_rate", &quiet());
    assert_eq!(base.seed, Some(invariance_core::sampling::DEFAULT_SEED));
    assert_ne!(leg(&r, "S", "tensor").residual, leg(&base, "S", "tensor").residual);
}

fn scenario(check: &str, expect: &str) -> String {
    format!(r#"{{"schema": 1, "name": "t", "check": {check}, "expect": {expect}}}"#)
}

fn run_text(text: &str) -> Report {
    run_bytes("t.scn", text.as_bytes(), &quiet())
}

#[test]
fn schema_errors_exit_two() {
    let good = r#"{"kind": "ns-symmetry", "solution": "shear", "symmetries": [{"type": "S4"}]}"#;
    assert_eq!(run_text(&scenario(good, "{}")).exit_code, EXIT_OK);
    let cases = [
        r#"{"schema": 2, "name": "t", "check": {"kind": "geometric-suite"}}"#.to_string(),
        r#"{"schema": 1, "name": "t", "check": {"kind": "geometric-suite"}, "colour": 1}"#.to_string(),
        r#"{"schema": 1, "name": "t", "check": {"kind": "fluid"}}"#.to_string(),
        r#"{"schema": 1, "name": "", "check": {"kind": "geometric-suite"}}"#.to_string(),
        r#"{"schema": 1, "name": "t", "tolerance": -1, "check": {"kind": "geometric-suite"}}"#.to_string(),
        scenario(r#"{"kind": "ns-symmetry", "solution": "shear", "symmetries": [{"type": "S3", "axis": 4}]}"#, "{}"),
        scenario(r#"{"kind": "ns-symmetry", "solution": "shear", "symmetries": [{"type": "S2", "f": "vec(t, 0, 0)"}]}"#, "{}"),
        scenario(r#"{"kind": "ns-symmetry", "solution": "shear", "symmetries": [{"type": "S7"}]}"#, "{}"),
        scenario(r#"{"kind": "ns-symmetry", "solution": "shear"}"#, "{}"),
        scenario(
            r#"{"kind": "tensor", "quantities": [{"name": "q", "definition": "norm(x", "rule": "scalar"}], "random_rotations": {"count": 1}}"#,
            "{}",
        ),
        scenario(
            r#"{"kind": "tensor", "quantities": [{"name": "q", "definition": "norm(w)", "rule": "scalar"}], "random_rotations": {"count": 1}}"#,
            "{}",
        ),
        scenario(
            r#"{"kind": "tensor", "quantities": [{"name": "q", "definition": "x", "rule": "scalar"}], "random_rotations": {"count": 1}}"#,
            "{}",
        ),
        scenario(r#"{"kind": "tensor", "quantities": [{"name": "q", "definition": "x", "rule": "contra1"}]}"#, "{}"),
        scenario(
            r#"{"kind": "relative", "quantities": [{"name": "q", "definition": "x", "rule": "contra1"}], "random_rotations": {"count": 1}}"#,
            "{}",
        ),
        scenario(
            r#"{"kind": "closure-screen", "model": {"phi": ["v1", "0", "0", "0", "0"], "nu": 0.1}, "symmetries": [{"type": "S4"}]}"#,
            "{}",
        ),
        scenario(
            r#"{"kind": "mechanics", "problem": {"type": "frame_indifference", "force": {}, "conventions": ["frozen"], "transforms": {"count": 1}}}"#,
            "{}",
        ),
    ];
    for text in &cases {
        let r = run_text(text);
        assert_eq!(r.exit_code, EXIT_SCHEMA, "{text}: {r:?}");
        assert_eq!(r.status, Status::SchemaError);
        assert!(r.error.is_some());
    }
}

#[test]
fn execution_errors_exit_three() {
    let viscous = r#"{"kind": "ns-symmetry", "solution": "beltrami", "nu": 0.1, "symmetries": [{"type": "S5", "a": 0.2}]}"#;
    let r = run_text(&scenario(viscous, "{}"));
    assert_eq!(r.exit_code, EXIT_EXECUTION, "{r:?}");
    assert!(r.error.unwrap().contains("Euler"));
    let planar = r#"{"kind": "ns-symmetry", "solution": "shear", "symmetries": [{"type": "S6", "omega_z": 1}]}"#;
    assert_eq!(run_text(&scenario(planar, "{}")).exit_code, EXIT_EXECUTION);
    let odd = r#"{"kind": "decomposed", "mean": "shear", "size": 3, "symmetries": [{"type": "S4"}]}"#;
    assert_eq!(run_text(&scenario(odd, "{}")).exit_code, EXIT_EXECUTION);
}

#[test]
fn unmet_expectations_exit_one() {
    let check = r#"{"kind": "ns-symmetry", "solution": "shear", "symmetries": [{"type": "S4"}]}"#;
    let ok = run_text(&scenario(check, r#"{"S4": {"residual": true}}"#));
    assert!(ok.expected_met && ok.exit_code == EXIT_OK);
    for expect in [r#"{"S4": {"residual": false}}"#, r#"{"S5": {"residual": true}}"#, r#"{"S4": {"momentum": true}}"#] {
        let r = run_text(&scenario(check, expect));
        assert_eq!(r.exit_code, EXIT_MISMATCH, "{expect}");
        assert_eq!(r.mismatches.len(), 1);
    }
}

#[test]
fn fail_expectations_need_a_clear_failure() {
    let mut l = LegOut::new(5e-4, 1e-9);
    assert!(!l.pass && !l.meets(false) && !l.meets(true));
    l.merge(LegOut::new(1.0, 1e-9));
    assert_eq!((l.residual, l.min_residual, l.samples), (1.0, 5e-4, 2));
    assert!(!l.meets(false));
    assert!(LegOut::new(2e-3, 1e-9).meets(false));
}

#[test]
fn demo_command_lists_and_rejects() {
    let o = bin(&["demo", "list"]);
    assert_eq!(code(&o), 0);
    let listed: Vec<String> = String::from_utf8_lossy(&o.stdout).lines().map(String::from).collect();
    assert_eq!(listed.len(), DEMOS.len());
    assert_eq!(code(&bin(&["demo", "nope"])), EXIT_SCHEMA);
    let o = bin(&["demo", "strain_rate", "--no-timestamp"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("status PASS"));
}

#[test]
fn check_writes_the_json_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let f = corpus().join("z_quantity.scn");
    let o = bin(&["check", f.to_str().unwrap(), "--json", out.to_str().unwrap(), "--no-timestamp"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(v["scenario"], "z_quantity");
    assert_eq!(v["source"], "z_quantity.scn");
    assert_eq!(v["rows"][0]["legs"]["tensor"]["pass"], true);
    assert_eq!(v["rows"][0]["expected"]["objective"], false);
    let missing = bin(&["check", dir.path().join("none.scn").to_str().unwrap()]);
    assert_eq!(code(&missing), EXIT_SCHEMA);
    assert_eq!(code(&bin(&["check", f.to_str().unwrap(), "--tol", "-1"])), EXIT_SCHEMA);
}
