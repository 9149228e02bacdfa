//! Process-level tests of the `mlem` binary: exit codes, manifests,
//! reproducibility of outputs, and the documented environment contract.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

/// Run the binary with `dir` as both working and output directory, so all
/// recorded paths are relative and runs in different directories are
/// comparable byte for byte.
fn mlem_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mlem"))
        .current_dir(dir)
        .arg("--out-dir")
        .arg(".")
        .args(args)
        .env_remove("MLEM_OUT_DIR")
        .output()
        .expect("the binary should run")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("process should not be signalled")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write(dir: &Path, name: &str, content: &str) {
    fs::write(dir.join(name), content).unwrap();
}

fn manifest(dir: &Path) -> serde_json::Value {
    let raw = fs::read_to_string(dir.join("manifest.json")).expect("manifest.json should exist");
    serde_json::from_str(&raw).expect("manifest.json should be valid JSON")
}

fn file_names(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

const TRUTH_CSV: &str = "# pixels=7\n1\n2\n3\n4\n3\n2\n1\n";

#[test]
fn nonpositive_sigma_is_a_usage_error_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = mlem_in(
        dir.path(),
        &[
            "build-matrix",
            "--pixels",
            "5",
            "--detectors",
            "5",
            "--sigma",
            "-1",
        ],
    );
    assert_eq!(code(&out), 2, "stderr: {}", stderr(&out));
    assert!(
        stderr(&out).contains("--sigma"),
        "the message should name the offending flag: {}",
        stderr(&out)
    );
    // The failed run leaves the manifest and nothing else.
    assert_eq!(file_names(dir.path()), vec!["manifest.json"]);
    let m = manifest(dir.path());
    assert!(m["error"].as_str().unwrap().contains("--sigma"));
    assert_eq!(m["command"], "build-matrix");
}

#[test]
fn missing_input_is_a_usage_error_with_recorded_cause() {
    let dir = tempfile::tempdir().unwrap();
    let out = mlem_in(
        dir.path(),
        &[
            "reconstruct",
            "--matrix",
            "no_such.csv",
            "--counts",
            "missing.csv",
        ],
    );
    assert_eq!(code(&out), 2);
    let m = manifest(dir.path());
    assert!(m["error"].as_str().unwrap().contains("no_such.csv"));
}

#[test]
fn degenerate_support_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    // Detector 2 has zero projected mass under every profile but observes
    // counts, so the likelihood is undefined.
    write(dir.path(), "p.csv", "# pixels=2 detectors=2\n1,0\n1,0\n");
    write(dir.path(), "n.csv", "# detectors=2\n3\n4\n");
    let out = mlem_in(
        dir.path(),
        &["reconstruct", "--matrix", "p.csv", "--counts", "n.csv"],
    );
    assert_eq!(code(&out), 3, "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("degenerate support"));
    assert!(stderr(&out).contains("detector 2"));
    let m = manifest(dir.path());
    assert!(m["error"].as_str().unwrap().contains("degenerate support"));
}

#[test]
fn singular_information_exits_4_with_condition_estimate() {
    let dir = tempfile::tempdir().unwrap();
    // Two pixels with identical detection profiles: the information matrix
    // has a zero eigenvalue along their difference.
    write(
        dir.path(),
        "p.csv",
        "# pixels=3 detectors=3\n0.5,0.3,0.2\n0.5,0.3,0.2\n0.1,0.2,0.7\n",
    );
    write(dir.path(), "n.csv", "# detectors=3\n40\n30\n30\n");
    write(dir.path(), "l.csv", "# pixels=3\n1\n1\n1\n");
    let out = mlem_in(
        dir.path(),
        &[
            "uncertainty",
            "--matrix",
            "p.csv",
            "--counts",
            "n.csv",
            "--lambda",
            "l.csv",
        ],
    );
    assert_eq!(code(&out), 4, "stderr: {}", stderr(&out));
    assert!(
        stderr(&out).contains("condition estimate"),
        "stderr should carry the condition estimate: {}",
        stderr(&out)
    );
}

#[test]
fn identical_flags_and_seed_give_identical_bytes() {
    let run = |dir: &Path| {
        write(dir, "truth.csv", TRUTH_CSV);
        for args in [
            vec![
                "build-matrix",
                "--pixels",
                "7",
                "--detectors",
                "7",
                "--sigma",
                "1.0",
            ],
            vec![
                "simulate",
                "--matrix",
                "system_matrix.csv",
                "--lambda",
                "truth.csv",
                "--t",
                "50",
                "--seed",
                "5",
            ],
            vec![
                "reconstruct",
                "--matrix",
                "system_matrix.csv",
                "--counts",
                "counts.csv",
                "--iterations",
                "80",
            ],
            vec![
                "uncertainty",
                "--matrix",
                "system_matrix.csv",
                "--counts",
                "counts.csv",
                "--lambda",
                "lambda_hat.csv",
                "--t",
                "50",
            ],
        ] {
            let out = mlem_in(dir, &args);
            assert_eq!(code(&out), 0, "{args:?} failed: {}", stderr(&out));
        }
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run(a.path());
    run(b.path());

    let names = file_names(a.path());
    assert_eq!(names, file_names(b.path()));
    for name in &names {
        if name == "manifest.json" {
            // Timings are the one documented nondeterminism.
            let strip = |d: &Path| {
                let mut m = manifest(d);
                m.as_object_mut().unwrap().remove("timings");
                m
            };
            assert_eq!(strip(a.path()), strip(b.path()));
            continue;
        }
        let left = fs::read(a.path().join(name)).unwrap();
        let right = fs::read(b.path().join(name)).unwrap();
        assert_eq!(left, right, "{name} differs between identical runs");
    }
}

const SCENARIO_TOML: &str = "pixels = 7\n\
detectors = 7\n\
sigma = 1.0\n\
true_lambda = [1.0, 2.0, 3.0, 4.0, 3.0, 2.0, 1.0]\n\
T = 100.0\n\
iterations = 60\n\
runs = 64\n\
seed = 3\n\
init_mode = \"uniform\"\n";

#[test]
fn monte_carlo_outputs_do_not_depend_on_the_thread_cap() {
    let run = |dir: &Path, threads: &str| {
        write(dir, "scenario.toml", SCENARIO_TOML);
        let out = mlem_in(
            dir,
            &[
                "--threads",
                threads,
                "montecarlo",
                "--scenario",
                "scenario.toml",
            ],
        );
        assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run(a.path(), "1");
    run(b.path(), "4");
    for name in ["mc_summary.json", "comparison.json", "composite_corr.csv"] {
        let left = fs::read(a.path().join(name)).unwrap();
        let right = fs::read(b.path().join(name)).unwrap();
        assert_eq!(left, right, "{name} depends on the thread cap");
    }
}

#[test]
fn out_dir_env_var_sets_the_default_output_directory() {
    let work = tempfile::tempdir().unwrap();
    let out_dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_mlem"))
        .current_dir(work.path())
        .env("MLEM_OUT_DIR", out_dir.path())
        .args([
            "build-matrix",
            "--pixels",
            "5",
            "--detectors",
            "5",
            "--sigma",
            "1.0",
        ])
        .output()
        .expect("the binary should run");
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert!(out_dir.path().join("system_matrix.csv").exists());
    assert!(out_dir.path().join("manifest.json").exists());
    assert_eq!(file_names(work.path()), Vec::<String>::new());
}

#[test]
fn pipeline_round_trip_produces_a_consistent_report() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "truth.csv", TRUTH_CSV);
    for args in [
        vec![
            "build-matrix",
            "--pixels",
            "7",
            "--detectors",
            "7",
            "--sigma",
            "1.0",
        ],
        vec![
            "simulate",
            "--matrix",
            "system_matrix.csv",
            "--lambda",
            "truth.csv",
            "--t",
            "100",
            "--seed",
            "17",
        ],
        vec![
            "reconstruct",
            "--matrix",
            "system_matrix.csv",
            "--counts",
            "counts.csv",
            "--iterations",
            "200",
        ],
        vec![
            "uncertainty",
            "--matrix",
            "system_matrix.csv",
            "--counts",
            "counts.csv",
            "--lambda",
            "lambda_hat.csv",
            "--t",
            "100",
            "--fd-check",
        ],
    ] {
        let out = mlem_in(dir.path(), &args);
        assert_eq!(code(&out), 0, "{args:?} failed: {}", stderr(&out));
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("uncertainty.json")).unwrap())
            .unwrap();
    let se = report["se_full"].as_array().unwrap();
    assert_eq!(se.len(), 7);
    assert!(se.iter().all(|v| v.as_f64().unwrap() > 0.0));
    // Neighbor correlation is strongly negative for this geometry.
    let corr_12 = report["correlation"][0][1].as_f64().unwrap();
    assert!(corr_12 < -0.5, "corr(1,2) = {corr_12}");
    let m = manifest(dir.path());
    assert!(m["error"].is_null());
    assert!(m["timings"].as_array().unwrap().len() >= 2);
}

#[test]
fn tiny_reproduce_completes_with_a_warning() {
    let dir = tempfile::tempdir().unwrap();
    let out = mlem_in(
        dir.path(),
        &["reproduce", "--runs", "2", "--sigma", "1.0", "--seed", "1"],
    );
    // Criteria may fail at this sample size; the command still reports and
    // exits cleanly.
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("10000"), "stderr: {}", stderr(&out));
    let acceptance: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("acceptance.json")).unwrap())
            .unwrap();
    assert!(!acceptance["warnings"].as_array().unwrap().is_empty());
    assert_eq!(acceptance["criteria"].as_array().unwrap().len(), 7);
    let txt = fs::read_to_string(dir.path().join("acceptance_summary.txt")).unwrap();
    assert!(txt.contains("criterion 7"));
    assert!(dir.path().join("sigma1").join("se_comparison.csv").exists());
}
