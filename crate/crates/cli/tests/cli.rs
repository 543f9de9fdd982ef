use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_langevin-chaos"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const QUADRATIC: &str = r#"
dim = 1
p = 2.0
j_values = [8, 16, 32]
replicates = 16
seed = 4
potential.kind = "quadratic"
sde.dt = 1e-2
sde.t_final = 0.3
rho0.mean = [1.0]
rho0.cov = [[1.0]]
"#;

#[test]
fn missing_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["rate-chaos"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["rate-chaos", "--config", "/nonexistent/x.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_config_exits_2_and_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", &QUADRATIC.replace("j_values = [8, 16, 32]", "j_values = [16, 8, 32]"));
    let out = run(&["rate-chaos", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("j_values"));

    let out = run(&["rate-chaos", "--config", &cfg, "--sde.typo=1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn rate_chaos_writes_csv_fit_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "q.toml", QUADRATIC);
    let out = run(&["rate-chaos", "--config", &cfg, "--seed", "99"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let csv = fs::read_to_string(dir.path().join("rate_chaos.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("experiment,J,p,estimate,stderr,n_ok,n_failed"));
    let rows: Vec<&str> = csv.lines().filter(|l| l.starts_with("rate_chaos,")).collect();
    assert_eq!(rows.len(), 3);
    assert!(csv.lines().any(|l| l.starts_with("# fit rate_chaos: slope=")));

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("rate_chaos.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 99);
    assert_eq!(manifest["config"]["seed"], 99);
    assert_eq!(manifest["failed_replicates"], 0);
}

#[test]
fn trajectory_dump_is_opt_in() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "q.toml", QUADRATIC);
    let out = run(&["rate-chaos", "--config", &cfg, "--j_values=[4,8,16]", "--replicates=2"], dir.path());
    assert!(out.status.success());
    assert!(!dir.path().join("trajectories_J4.csv").exists());

    let out = run(&["rate-chaos", "--config", &cfg, "--j_values=[4,8,16]", "--replicates=2", "--dump-trajectories"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dump = fs::read_to_string(dir.path().join("trajectories_J4.csv")).unwrap();
    assert!(dump.starts_with("replicate,step,time,particle,system,x0"));
    assert!(dump.lines().any(|l| l.contains(",mf,")));
}

#[test]
fn huge_radius_gives_zero_excursions() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{QUADRATIC}\nexcursion.mode = \"trajectory\"\nexcursion.radius = 1e6\n");
    let cfg = write_config(dir.path(), "e.toml", &body.replace("j_values = [8, 16, 32]", "j_values = [4, 16, 64]"));
    let out = run(&["excursion", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("excursion.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().filter(|l| l.starts_with("excursion_")).collect();
    assert_eq!(rows.len(), 6);
    for row in rows {
        let estimate: f64 = row.split(',').nth(3).unwrap().parse().unwrap();
        assert_eq!(estimate, 0.0);
    }
    assert!(!csv.contains("# fit"));
}

#[test]
fn suites_pass_without_config() {
    let dir = tempfile::tempdir().unwrap();
    for which in ["psd", "stability", "convexity", "class-check"] {
        let out = run(&["suite", which, "--suite.trials=200"], dir.path());
        assert_eq!(out.status.code(), Some(0), "{which}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert!(dir.path().join("suite_psd.json").exists());
}

#[test]
fn cov_rate_replays_from_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        "dim = 1\np = 2.0\nj_values = [16, 32, 64]\nreplicates = 50\nseed = 3\nrho0.mean = [0.0]\nrho0.cov = [[1.0]]\n",
    );
    let first = dir.path().join("first");
    assert!(run(&["cov-rate", "--config", &cfg], &first).status.success());
    let manifest = first.join("cov_rate.manifest.json");
    let second = dir.path().join("second");
    assert!(run(&["cov-rate", "--config", manifest.to_str().unwrap()], &second).status.success());
    assert_eq!(
        fs::read(first.join("cov_rate.csv")).unwrap(),
        fs::read(second.join("cov_rate.csv")).unwrap()
    );
}
