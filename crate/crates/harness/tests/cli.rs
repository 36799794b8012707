use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use ngn_harness::output::{read_summary, read_trajectory};

fn ngn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ngn")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn bounds_prints_the_constant_step_bound() {
    let o = ngn(&["bounds", "--c", "1", "--L", "1", "--K", "100", "--dist0", "1"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().next(), Some("bound=0.09"));
}

#[test]
fn bounds_rejects_bad_inputs() {
    let o = ngn(&["bounds", "--c", "-1", "--L", "1", "--K", "100", "--dist0", "1"]);
    assert_eq!(o.status.code(), Some(1));
    let o = ngn(&["bounds", "--c", "1", "--L", "1", "--K", "100", "--dist0", "1", "--decaying"]);
    assert!(o.status.success());
}

#[test]
fn run_rosenbrock_sgdm_diverges() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("t.csv");
    let o = ngn(&[
        "run", "--problem", "rosenbrock", "--optimizer", "sgdm", "--c", "1e-2", "--dampening", "0", "--steps", "100000",
        "--out", traj.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_summary(o.stdout.as_slice()).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].status, "diverged");
    let t = read_trajectory(fs::File::open(&traj).unwrap()).unwrap();
    assert!(t.last().unwrap().loss > 1e10 || !t.last().unwrap().loss.is_finite());
}

#[test]
fn run_accepts_negative_x0_and_wd_mode() {
    let o = ngn(&["run", "--problem", "multimodal", "--optimizer", "ngn-m", "--c", "10", "--x0", "-3.5", "--steps", "50"]);
    assert!(o.status.success());
    let rows = read_summary(o.stdout.as_slice()).unwrap();
    assert_eq!(rows[0].x0, vec![-3.5]);

    let base = ["run", "--problem", "least-squares", "--dim", "5", "--n-samples", "20", "--c", "0.1", "--wd", "0.01"];
    for (mode, kind) in [("decoupled", "dec-ngn-md-v1"), ("coupled", "ngn-md-v1w")] {
        let mut args = base.to_vec();
        args.extend(["--optimizer", "ngn-md-v1", "--wd-mode", mode]);
        let o = ngn(&args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(read_summary(o.stdout.as_slice()).unwrap()[0].optimizer, kind);
    }
    let mut args = base.to_vec();
    args.extend(["--optimizer", "adam", "--wd-mode", "coupled"]);
    assert_eq!(ngn(&args).status.code(), Some(1));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(ngn(&["run", "--problem", "rosenbrock"]).status.code(), Some(1));
    assert_eq!(ngn(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(ngn(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_config_is_an_io_error() {
    let o = ngn(&["sweep", "--config", "/nonexistent/sweep.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invalid_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(
        &path,
        "[problem]\nkind = \"rosenbrock\"\n[optimizer]\nkind = \"ngn\"\n[grid]\nc = []\nseeds = [0]\n[budget]\nmax_steps = 10\n",
    )
    .unwrap();
    let o = ngn(&["sweep", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("grid.c"));
}

#[test]
fn sweep_writes_summary_and_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.toml");
    fs::write(
        &path,
        "[problem]\nkind = \"polynomial\"\nx0 = [1.0]\n[optimizer]\nkinds = [\"ngn\", \"ngn-m\"]\n\
         [grid]\nc = [0.1, 1.0]\nseeds = [0, 1]\n[budget]\nmax_steps = 200\n\
         [output]\nsummary = \"grid.csv\"\ntrajectories = true\n",
    )
    .unwrap();
    let out: PathBuf = dir.path().join("out");
    let o = Command::new(env!("CARGO_BIN_EXE_ngn"))
        .args(["sweep", "--serial", "--config", path.to_str().unwrap()])
        .env("NGN_OUT_DIR", &out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_summary(fs::File::open(out.join("grid.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 8);
    let trajectories = fs::read_dir(&out).unwrap().filter(|e| {
        e.as_ref().unwrap().file_name().to_string_lossy().starts_with("trajectory_")
    });
    assert_eq!(trajectories.count(), 8);
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let o = ngn(&[
        "run", "--problem", "rosenbrock", "--optimizer", "ngn", "--c", "0.1", "--steps", "5", "--out",
        blocker.join("t.csv").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn library_rosenbrock_sgdm_run_reports_divergence() {
    use ngn_core::optimizers::{OptimizerKind, OptimizerSpec};
    use ngn_core::problems::{build_problem, ProblemSpec};
    use ngn_core::run::{run_once, RunBudget, RunStatus};
    let p = build_problem(&ProblemSpec::Rosenbrock).unwrap();
    let spec = OptimizerSpec::new(OptimizerKind::Sgdm, 1e-2).with_dampening(0.0);
    let run = run_once(&p, &spec, &RunBudget::new(100_000).with_success(1e-4), 0).unwrap();
    assert!(matches!(run.status, RunStatus::Diverged(_)));
}
