use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nisynth_cli::Scenario;
use serde_json::Value;
use tempfile::TempDir;

fn nisynth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nisynth")).args(args).output().unwrap()
}

fn bundled_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/normal_form_example.toml")
}

fn report(dir: &Path, name: &str) -> Value {
    let text = std::fs::read_to_string(dir.join(format!("{name}.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn write_scenario(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("scenario.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn run_in(dir: &Path, cmd: &str, scenario: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--scenario", scenario.to_str().unwrap(), "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    nisynth(&args)
}

fn failing_checks(r: &Value) -> Vec<String> {
    r["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["passed"] == false)
        .map(|c| c["name"].as_str().unwrap().to_string())
        .collect()
}

#[test]
fn analyze_bundled_is_equivalent() {
    let dir = TempDir::new().unwrap();
    let out = run_in(dir.path(), "analyze", &bundled_path(), &[]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(dir.path(), "analyze");
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["verdict"], "EQUIVALENT");
    assert_eq!(r["hypotheses"][0]["name"], "det A11 != 0");
}

#[test]
fn analyze_rejects_a_jordan_block() {
    let dir = TempDir::new().unwrap();
    let text = std::fs::read_to_string(bundled_path())
        .unwrap()
        .replace("a11 = [[-1.0]]", "a11 = [[0.0, 1.0], [0.0, 0.0]]")
        .replace("p = [\"xi1^2*xi2\"]", "p = [\"xi1^2*xi2\", \"0\"]")
        .replace("x0 = [3.0, 1.0, -1.0, 2.0]", "x0 = [3.0, 0.0, 1.0, -1.0, 2.0]")
        .replace("P = [[1.0]]", "P = \"auto\"");
    let path = write_scenario(dir.path(), &text);
    let out = run_in(dir.path(), "analyze", &path, &[]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(report(dir.path(), "analyze")["verdict"], "NOT_EQUIVALENT");
    let out = run_in(dir.path(), "synthesize", &path, &[]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(dir.path(), "synthesize");
    assert_eq!(r["analysis"]["verdict"], "NOT_EQUIVALENT");
    assert!(r.get("laws").is_none());
}

#[test]
fn usage_and_parse_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    assert_eq!(nisynth(&["analyze"]).status.code(), Some(2));
    assert_eq!(nisynth(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(nisynth(&["verify", "--jobs", "many"]).status.code(), Some(2));
    let path = write_scenario(dir.path(), "[plant]\np1 = 1\n");
    assert_eq!(run_in(dir.path(), "analyze", &path, &[]).status.code(), Some(2));
    let bad = std::fs::read_to_string(bundled_path()).unwrap().replace("xi1^2*xi2", "xi1^2*q");
    let path = write_scenario(dir.path(), &bad);
    assert_eq!(run_in(dir.path(), "analyze", &path, &[]).status.code(), Some(2));
    assert_eq!(run_in(dir.path(), "simulate", &bundled_path(), &["--dt", "-1"]).status.code(), Some(2));
}

#[test]
fn synthesize_prints_and_reports_the_laws() {
    let dir = TempDir::new().unwrap();
    let out = run_in(dir.path(), "synthesize", &bundled_path(), &[]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("u1[1] = v1[1] + "), "{stdout}");
    let r = report(dir.path(), "synthesize");
    assert_eq!(r["laws"]["epsilon"], 1.0);
    assert_eq!(r["laws"]["certificate"]["source"], "scenario");
    assert_eq!(r["reference"]["verdict"], "PASS");
    // the emitted strings parse back to the same laws
    let names: Vec<String> = ["z", "xi1", "xi2", "xi3"].map(String::from).to_vec();
    let u1 = nisynth_core::parse_expr(r["laws"]["u1"][0].as_str().unwrap(), &names).unwrap();
    let x = [0.3, -1.2, 0.7, 1.9];
    let at = nisynth_core::expr::NamedValues { names: &names, values: &x };
    let expect = 4.0 * 0.3 * -1.2 * 0.7 - 4.0 * (-1.2f64).powi(3) * 0.49 - 4.0 / 3.0 * (-1.2f64).cbrt();
    assert!((u1.eval(&at).unwrap() - expect).abs() < 1e-12);
}

#[test]
fn simulate_is_deterministic() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let text = std::fs::read_to_string(bundled_path())
        .unwrap()
        .replace("[uncertainty]", "[ignored]")
        .replace("input = { kind = \"zero\" }", "input = { kind = \"random_band_limited\", amplitude = 0.5, bandwidth = 3.0, components = 8 }");
    let text = strip_block(&text, "[ignored]");
    let path = write_scenario(a.path(), &text);
    for d in [&a, &b] {
        let out = run_in(d.path(), "simulate", &path, &["--seed", "7", "--t-end", "2"]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let ca = std::fs::read(a.path().join("trajectory.csv")).unwrap();
    let cb = std::fs::read(b.path().join("trajectory.csv")).unwrap();
    assert_eq!(ca, cb);
    let r = report(a.path(), "simulate");
    assert_eq!(r["system"], "closed_loop");
    assert_eq!(r["steps"], 2000);
    let c = TempDir::new().unwrap();
    run_in(c.path(), "simulate", &path, &["--seed", "8", "--t-end", "2"]);
    assert_ne!(ca, std::fs::read(c.path().join("trajectory.csv")).unwrap());
}

/// Drop a `[block]` and its keys from a TOML document.
fn strip_block(text: &str, header: &str) -> String {
    let mut out = String::new();
    let mut skipping = false;
    for line in text.lines() {
        if line.starts_with('[') {
            skipping = line.trim() == header;
        }
        if !skipping {
            out.push_str(line);
            out.push('\n');
        }
    }
    out
}

#[test]
fn simulate_interconnection_writes_storage_channels() {
    let dir = TempDir::new().unwrap();
    let out = run_in(dir.path(), "simulate", &bundled_path(), &[]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,z,xi1,xi2,xi3,xs1,xs2,w1,w2,V,W,Vsigma");
    assert_eq!(csv.lines().count(), 10_002);
    let r = report(dir.path(), "simulate");
    assert_eq!(r["system"], "interconnection");
    assert!(r["plant_convergence"]["final_norm"].as_f64().unwrap() < 0.01);
}

#[test]
fn verify_reports_where_the_flipped_law_diverges() {
    let dir = TempDir::new().unwrap();
    let text = std::fs::read_to_string(bundled_path())
        .unwrap()
        .replace("[verification]", "[verification]\nmutation = \"flip_u1_gradient\"");
    let path = write_scenario(dir.path(), &text);
    let out = run_in(dir.path(), "verify", &path, &[]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(dir.path(), "verify");
    let run = &r["closed_loop"][0];
    assert_eq!(run["verdict"], "FAIL");
    assert!(run["divergence"]["step"].as_u64().unwrap() > 0);
    assert_eq!(run["report"]["ni"], "FAIL");
}

#[test]
fn verify_bundled_passes_and_uncertainty_is_osni() {
    let dir = TempDir::new().unwrap();
    let out = run_in(dir.path(), "verify", &bundled_path(), &["--jobs", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let r = report(dir.path(), "verify");
    assert_eq!(r["passed"], true);
    for run in r["uncertainty"].as_array().unwrap() {
        assert_eq!(run["report"]["epsilon"], 1.0);
        assert_eq!(run["report"]["osni"], "PASS");
    }
    assert_eq!(r["w_decrease"]["verdict"], "PASS");
    assert_eq!(r["w_positive_definite"]["result"]["verdict"], "PassedSampling");
}

#[test]
fn verify_is_independent_of_job_count() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    run_in(a.path(), "verify", &bundled_path(), &["--jobs", "1", "--t-end", "3"]);
    run_in(b.path(), "verify", &bundled_path(), &["--jobs", "4", "--t-end", "3"]);
    assert_eq!(
        std::fs::read(a.path().join("verify.json")).unwrap(),
        std::fs::read(b.path().join("verify.json")).unwrap()
    );
}

#[test]
fn verify_catches_the_dropped_damping() {
    let dir = TempDir::new().unwrap();
    let text = std::fs::read_to_string(bundled_path())
        .unwrap()
        .replace("[verification]", "[verification]\nmutation = \"drop_damping\"");
    let path = write_scenario(dir.path(), &text);
    let out = run_in(dir.path(), "verify", &path, &[]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(dir.path(), "verify");
    assert_eq!(r["mutation"], "drop_damping");
    let runs = r["closed_loop"].as_array().unwrap();
    assert!(runs.iter().any(|x| x["report"]["osni"] == "FAIL"));
    assert!(runs.iter().all(|x| x["report"]["ni"] == "PASS"));
}

#[test]
fn scenario_round_trips_through_disk() {
    let dir = TempDir::new().unwrap();
    let s = Scenario::load(&bundled_path()).unwrap();
    let path = dir.path().join("copy.toml");
    s.save(&path).unwrap();
    assert_eq!(Scenario::load(&path).unwrap(), s);
}

#[test]
fn reproduce_example_passes_with_a_longer_horizon() {
    let dir = TempDir::new().unwrap();
    let out = nisynth(&["reproduce-example", "--out", dir.path().to_str().unwrap(), "--t-end", "300", "--jobs", "4"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    for name in ["analyze", "synthesize", "verify", "simulate", "reproduce-example"] {
        assert_eq!(report(dir.path(), name)["schema_version"], 1, "{name}");
    }
    assert!(dir.path().join("trajectory.csv").exists());
    assert!(dir.path().join("scenario.toml").exists());
}

#[test]
fn reproduce_example_default_horizon_fails_only_on_convergence() {
    let dir = TempDir::new().unwrap();
    let out = nisynth(&["reproduce-example", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(dir.path(), "reproduce-example");
    assert_eq!(failing_checks(&r), vec!["convergence"]);
    let norm = r["simulation"]["convergence"]["final_norm"].as_f64().unwrap();
    assert!(norm > 0.05 && norm < 0.08, "{norm}");
}

#[test]
fn reproduce_example_refined_step_keeps_every_dissipation_check() {
    let dir = TempDir::new().unwrap();
    let out = nisynth(&["reproduce-example", "--out", dir.path().to_str().unwrap(), "--dt", "1e-4", "--jobs", "4"]);
    assert_ne!(out.status.code(), Some(2));
    let r = report(dir.path(), "reproduce-example");
    assert_eq!(failing_checks(&r), vec!["convergence"]);
}

#[test]
fn tampered_scenario_fails() {
    let dir = TempDir::new().unwrap();
    let base = std::fs::read_to_string(bundled_path()).unwrap();
    for (from, to, check) in [
        ("lambda = 1.0", "lambda = 0.5", "laws_match_reference"),
        ("[verification]", "[verification]\nmutation = \"drop_damping\"", "closed_loop_dissipation"),
        ("4*z*xi1*xi2", "4.001*z*xi1*xi2", "laws_match_reference"),
        ("- xi3\"]", "+ xi3\"]", "laws_match_reference"),
        ("a11 = [[-1.0]]", "a11 = [[1.0]]", "equivalence"),
        ("-xs2 + us2", "xs2 + us2", "uncertainty_dissipation"),
    ] {
        assert!(base.contains(from), "{from}");
        let path = write_scenario(dir.path(), &base.replace(from, to));
        let out = run_in(dir.path(), "reproduce-example", &path, &[]);
        assert_eq!(out.status.code(), Some(1), "{from} -> {to}");
        let failing = failing_checks(&report(dir.path(), "reproduce-example"));
        assert!(failing.iter().any(|c| c == check), "{from} -> {to}: {failing:?}");
    }
}
