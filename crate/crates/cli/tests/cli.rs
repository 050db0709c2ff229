use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn infmodel(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_infmodel"))
        .args(args)
        .current_dir(dir)
        .env("INFMODEL_WORKERS", "2")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const BASE: &str = r#"
[model]
alpha = 1.0
t_final = 40.0

[model.selection]
kind = "bimodal"

[initial]
kind = "gaussian"
mean = -10.0

[output]
directory = "out/sub/dir"
snapshot_times = [0.0, 5.0]
"#;

#[test]
fn simulate_writes_outputs_and_converges() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), BASE);
    let out = infmodel(&["simulate", &cfg], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("out/sub/dir");
    let traj = fs::read_to_string(dir.join("trajectory.csv")).unwrap();
    assert!(traj.starts_with("t,Z,I,W2_to_gaussian,second_moment,mass_drift\n"));
    let last: Vec<f64> = traj
        .lines()
        .last()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert!((last[1] + 5.0).abs() < 0.5, "terminal Z {}", last[1]);
    assert!(fs::read_to_string(dir.join("macro.csv")).unwrap().starts_with("t,Z,Y_alpha_t,abs_error\n"));
    let snaps: Vec<_> = fs::read_dir(dir.join("snapshots")).unwrap().collect();
    assert_eq!(snaps.len(), 2);
}

#[test]
fn simulate_is_byte_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let body = BASE.replace("t_final = 40.0", "t_final = 5.0");
    let cfg = write_config(tmp.path(), &body);
    assert!(infmodel(&["simulate", &cfg], tmp.path()).status.success());
    let first = fs::read(tmp.path().join("out/sub/dir/trajectory.csv")).unwrap();
    assert!(infmodel(&["simulate", &cfg], tmp.path()).status.success());
    let second = fs::read(tmp.path().join("out/sub/dir/trajectory.csv")).unwrap();
    assert_eq!(first, second);
}

#[test]
fn config_errors_exit_with_2_and_name_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &BASE.replace("t_final = 40.0", ""));
    let out = infmodel(&["simulate", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("t_final"));

    let cfg = write_config(tmp.path(), &BASE.replace("alpha = 1.0", "alpha = 1.0\ndt = 0.5"));
    assert_eq!(infmodel(&["simulate", &cfg], tmp.path()).status.code(), Some(2));
}

#[test]
fn missing_file_exits_with_4() {
    let tmp = tempfile::tempdir().unwrap();
    let out = infmodel(&["simulate", "does-not-exist.toml"], tmp.path());
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn steady_not_converged_exits_with_3() {
    let tmp = tempfile::tempdir().unwrap();
    let body = format!("{}\n[steady]\nz_init = 5.0\nmax_iter = 2\n", BASE.replace("alpha = 1.0", "alpha = 0.1"));
    let cfg = write_config(tmp.path(), &body);
    let out = infmodel(&["steady", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn steady_and_macro_report() {
    let tmp = tempfile::tempdir().unwrap();
    let body = format!(
        "{}\n[steady]\nz_init = 5.0\n",
        BASE.replace("alpha = 1.0", "alpha = 0.1")
            .replace("kind = \"bimodal\"", "kind = \"bimodal\"\ntruncation_radius = 12.0")
    );
    let cfg = write_config(tmp.path(), &body);
    let out = infmodel(&["steady", &cfg], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("iterations = ") && stdout.contains("w2_to_gaussian = "));
    assert!(tmp.path().join("out/sub/dir/steady_density.csv").exists());

    let out = infmodel(&["macro", &cfg], tmp.path());
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.starts_with("3 root(s) of F"), "{stdout}");
    let roots = fs::read_to_string(tmp.path().join("out/sub/dir/roots.csv")).unwrap();
    assert_eq!(roots.lines().count(), 4);
}

#[test]
fn sweep_runs_every_distinct_combination() {
    let tmp = tempfile::tempdir().unwrap();
    let body = BASE.replace("t_final = 40.0", "t_final = 3.0");
    let cfg = write_config(tmp.path(), &body);
    let spec = tmp.path().join("sweep.toml");
    fs::write(&spec, "alpha = [0.2, 0.1, 0.05, 0.1]\nz0 = [-10.0, 0.0, 10.0]\n").unwrap();
    let out = infmodel(&["sweep", &cfg, spec.to_str().unwrap()], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let index = fs::read_to_string(tmp.path().join("out/sub/dir/index.csv")).unwrap();
    assert_eq!(index.lines().count(), 1 + 9);
    assert!(index.lines().skip(1).all(|l| l.contains(",ok,")));
    assert!(tmp.path().join("out/sub/dir/run_008/trajectory.csv").exists());
}

#[test]
fn sweep_marks_failed_runs_and_continues() {
    let tmp = tempfile::tempdir().unwrap();
    let body = BASE.replace("t_final = 40.0", "t_final = 1.0");
    let cfg = write_config(tmp.path(), &body);
    let spec = tmp.path().join("sweep.toml");
    // α = 5 breaks the explicit-Euler positivity bound at dt = 0.05
    fs::write(&spec, "alpha = [0.1, 5.0]\n").unwrap();
    let out = infmodel(&["sweep", &cfg, spec.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(3));
    let index = fs::read_to_string(tmp.path().join("out/sub/dir/index.csv")).unwrap();
    let rows: Vec<&str> = index.lines().skip(1).collect();
    assert!(rows[0].contains(",ok,"));
    assert!(rows[1].contains(",failed,"));
}

#[test]
fn bad_worker_count_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), BASE);
    let spec = tmp.path().join("sweep.toml");
    fs::write(&spec, "alpha = [0.1]\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_infmodel"))
        .args(["sweep", &cfg, spec.to_str().unwrap()])
        .current_dir(tmp.path())
        .env("INFMODEL_WORKERS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_subset_and_report_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let out = infmodel(&["verify", "--only", "1,4,5", "--seed", "3", "--report", "r.csv"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let csv = fs::read_to_string(tmp.path().join("r.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.lines().skip(1).all(|l| l.contains(",pass,") && l.contains(",3,")));

    let out = infmodel(&["verify", "--only", "11a"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&root).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        if name.starts_with("sweep_") {
            infmodel_cli::SweepSpec::load(&path).unwrap();
        } else if name.ends_with(".toml") {
            infmodel_cli::RunConfig::load(&path).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        seen += 1;
    }
    assert!(seen >= 4);
}
