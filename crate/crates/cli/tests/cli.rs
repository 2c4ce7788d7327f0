//! End-to-end checks of the installed binary: exit codes, output files, and
//! the resume path, driven through std::process.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_optprofiler"));
    cmd.env_remove("OPTPROFILER_OUT");
    cmd
}

fn write_run_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(
        &path,
        r#"
seeds = [0, 1, 2]
eval_every = 10
condition = "step"

[[workloads]]
kind = "quadratic"
id = "quad"
dim = 4
spectrum = { min = 0.5, max = 2.0 }
step_hint = 100

[workloads.budget]
max_steps = 100
sec_per_step = 0.01

[[algorithms]]
kind = "baseline"
name = "adam"

[[algorithms]]
kind = "baseline"
name = "nesterov"
"#,
    )
    .unwrap();
    path
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

#[test]
fn run_then_score_produces_bundle_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_run_config(dir.path());
    let records = dir.path().join("records");

    let first = bin()
        .args(["run", "-c"])
        .arg(&config)
        .arg("--out")
        .arg(&records)
        .output()
        .unwrap();
    assert!(first.status.success(), "{}", stderr(&first));
    assert!(stdout(&first).contains("ran 6 trials"), "{}", stdout(&first));

    let second = bin()
        .args(["run", "-c"])
        .arg(&config)
        .arg("--out")
        .arg(&records)
        .output()
        .unwrap();
    assert!(second.status.success());
    assert!(
        stdout(&second).contains("ran 0 trials, reused 6"),
        "{}",
        stdout(&second)
    );

    let scores = dir.path().join("scores");
    let score = bin()
        .args(["score", "--records"])
        .arg(&records)
        .arg("--out")
        .arg(&scores)
        .output()
        .unwrap();
    assert!(score.status.success(), "{}", stderr(&score));
    let text = stdout(&score);
    assert!(text.contains("condition: step"), "{text}");
    assert!(text.contains("adam"), "{text}");
    for name in [
        "targets.json",
        "quality.csv",
        "timing_train.csv",
        "timing_validation.csv",
        "scores.json",
        "summary.txt",
        "profiles_train.svg",
        "profiles_validation.svg",
    ] {
        assert!(scores.join(name).exists(), "missing {name}");
    }
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    std::fs::write(
        &config,
        r#"
seeds = [0]
condition = "step"

[[workloads]]
kind = "quadratic"
id = "quad"
dim = 4
spectrum = { min = 0.5, max = 2.0 }
step_hint = 100

[workloads.budget]
max_steps = 100

[[algorithms]]
kind = "baseline"
name = "adagrad"
"#,
    )
    .unwrap();
    let output = bin()
        .args(["run", "-c"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("records"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2), "{}", stderr(&output));
    assert!(stderr(&output).contains("error:"), "{}", stderr(&output));
    assert!(!dir.path().join("records").exists());
}

#[test]
fn empty_records_with_config_lists_expected_cells() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_run_config(dir.path());
    let records = dir.path().join("records");
    std::fs::create_dir_all(&records).unwrap();
    let output = bin()
        .args(["score", "--records"])
        .arg(&records)
        .args(["-c"])
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let err = stderr(&output);
    assert!(err.contains("quad/adam/seed0"), "{err}");
    assert!(err.contains("quad/nesterov/seed2"), "{err}");
}

#[test]
fn missing_records_dir_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let output = bin()
        .args(["score", "--records"])
        .arg(dir.path().join("nowhere"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(4), "{}", stderr(&output));
}

#[test]
fn estimation_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    // Curvature at the f64 ceiling overflows the very first loss evaluation,
    // so the pilot completes zero steps and time per step is unmeasurable.
    std::fs::write(
        &config,
        r#"
seeds = [0]
condition = "step"

[[workloads]]
kind = "quadratic"
id = "boom"
dim = 32
spectrum = { min = 1e308, max = 1e308 }
step_hint = 1000

[workloads.budget]
max_steps = 1000
sec_per_step = 0.01

[[algorithms]]
kind = "baseline"
name = "adam"
"#,
    )
    .unwrap();
    let reference = dir.path().join("reference.csv");
    std::fs::write(
        &reference,
        "workload,optimizer,reference_steps,reference_runtime_sec\nboom,adam,1000,250.0\n",
    )
    .unwrap();
    let output = bin()
        .args(["calibrate", "-c"])
        .arg(&config)
        .arg("--reference")
        .arg(&reference)
        .arg("--out")
        .arg(dir.path().join("calib"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3), "{}", stderr(&output));
    assert!(
        stderr(&output).contains("estimation error"),
        "{}",
        stderr(&output)
    );
}

#[test]
fn meta_train_divergence_is_reported_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("meta.toml");
    // A perturbation scale this large drives every inner run non-finite; the
    // run stops early with a diagnostic but still writes its checkpoint.
    std::fs::write(
        &config,
        r#"
inner_steps = 5
meta_steps = 1
sigma = 1e200
n_pairs = 2
tasks_per_step = 2
eval_tasks = 2
layer_sizes = [10, 4, 2]

[task]
kind = "quadratic"
dim = 4
spectrum = { min = 0.5, max = 1.0 }
step_hint = 5
"#,
    )
    .unwrap();
    let out = dir.path().join("meta");
    let output = bin()
        .args(["meta-train", "-c"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", stderr(&output));
    assert!(stderr(&output).contains("warning"), "{}", stderr(&output));
    assert!(out.join("checkpoint.json").exists());
}

#[test]
fn out_env_var_beats_flag() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_run_config(dir.path());
    let env_dir = dir.path().join("from_env");
    let flag_dir = dir.path().join("from_flag");
    let output = bin()
        .env("OPTPROFILER_OUT", &env_dir)
        .args(["run", "-c"])
        .arg(&config)
        .args(["--seeds", "0"])
        .arg("--out")
        .arg(&flag_dir)
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", stderr(&output));
    assert!(env_dir.exists());
    assert!(!flag_dir.exists());
}

#[test]
fn report_rejects_duplicate_names_and_bad_specs() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("t.csv");
    std::fs::write(&table, "algorithm,w\nadam,100\nsgd,200\n").unwrap();
    let spec = format!("a={}", table.display());

    let dup = bin()
        .args(["report", "--timing", &spec, "--timing", &spec])
        .arg("--out")
        .arg(dir.path().join("r1"))
        .output()
        .unwrap();
    assert_eq!(dup.status.code(), Some(2));
    assert!(stderr(&dup).contains("duplicate"), "{}", stderr(&dup));

    let bad = bin()
        .args(["report", "--timing", "no-equals-sign"])
        .arg("--out")
        .arg(dir.path().join("r2"))
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn report_scores_single_table() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("steps.csv");
    std::fs::write(&table, "algorithm,w1,w2\nfast,100,200\nslow,200,400\n").unwrap();
    let spec = format!("train_step={}", table.display());
    let out = dir.path().join("report");
    let output = bin()
        .args(["report", "--timing", &spec])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", stderr(&output));
    let text = stdout(&output);
    assert!(text.contains("fast") && text.contains("1.00"), "{text}");
    assert!(out.join("scores.json").exists());
    assert!(out.join("profiles_train_step.svg").exists());
    assert!(out.join("report.txt").exists());
}
