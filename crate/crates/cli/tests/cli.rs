use std::path::Path;
use std::process::{Command, Output};

fn cogarch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cogarch"))
        .args(args)
        .env_remove("COGARCH_THREADS")
        .output()
        .expect("run cogarch")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn simulate(dir: &Path, n: &str) -> String {
    let path = dir.join("returns.csv");
    let out = cogarch(&[
        "simulate", "--n", n, "--burn-in", "50", "--seed", "9", "-o", path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    path.to_str().unwrap().to_string()
}

#[test]
fn simulate_writes_reproducible_csv() {
    let dir = tempfile::tempdir().unwrap();
    let a = std::fs::read_to_string(simulate(dir.path(), "200")).unwrap();
    let b = cogarch(&["simulate", "--n", "200", "--burn-in", "50", "--seed", "9"]);
    assert_eq!(a.as_bytes(), b.stdout.as_slice());
    let mut lines = a.lines();
    assert_eq!(lines.next(), Some("index,G_i"));
    assert_eq!(lines.count(), 200);
}

#[test]
fn simulate_volatility_export() {
    let dir = tempfile::tempdir().unwrap();
    let v = dir.path().join("vol.csv");
    let out = cogarch(&["simulate", "--n", "20", "--burn-in", "5", "--volatility", v.to_str().unwrap()]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(v).unwrap();
    assert!(text.starts_with("t,sigma2\n"));
    assert_eq!(text.lines().count(), 22);
}

#[test]
fn binding_reports_moments() {
    let v = stdout_json(&cogarch(&["binding", "--r", "3"]));
    assert_eq!(v["pi"].as_array().unwrap().len(), 5);
    let mu = v["moments"]["summary"]["mu"].as_f64().unwrap();
    assert!((mu - 0.04 / 0.015).abs() < 1e-12);
    assert!((v["moments"]["summary"]["rho"].as_f64().unwrap() - 0.015).abs() < 1e-12);
}

#[test]
fn grid_summary_and_file() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("grid.json");
    let v = stdout_json(&cogarch(&["grid", "--spacing", "0.01", "-o", g.to_str().unwrap()]));
    let counts: Vec<u64> = v["axis_counts"].as_array().unwrap().iter().map(|c| c.as_u64().unwrap()).collect();
    let total = counts.iter().product::<u64>();
    assert_eq!(v["points"].as_u64().unwrap() + v["filtered"].as_u64().unwrap(), total);
    assert!(g.exists());
}

#[test]
fn estimate_iie_star_json() {
    let dir = tempfile::tempdir().unwrap();
    let input = simulate(dir.path(), "4000");
    let v = stdout_json(&cogarch(&["estimate", "--method", "iie-star", "--input", &input, "--r", "5"]));
    assert_eq!(v["method"], "iie_star");
    assert!(v["objective"].as_f64().unwrap() >= 0.0);
    assert!(v["theta_hat"]["beta"].as_f64().unwrap() > 0.0);
}

#[test]
fn estimate_iie_sim_with_grid_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = simulate(dir.path(), "1000");
    let g = dir.path().join("grid.json");
    let out = cogarch(&["grid", "--spacing", "0.02", "-o", g.to_str().unwrap()]);
    assert!(out.status.success());
    let v = stdout_json(&cogarch(&[
        "estimate", "--method", "iie-sim", "--input", &input, "--r", "3", "--K", "1", "--grid",
        g.to_str().unwrap(), "--threads", "1",
    ]));
    assert_eq!(v["method"], "iie_sim");
    assert!(v["diagnostics"]["grid_index"].is_u64());
}

#[test]
fn study_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("study.toml");
    std::fs::write(
        &cfg,
        "n = 1500\nreps = 2\nr = 4\nK = 1\nburn_in = 50\nsubsteps = 4\nmethods = [\"iie_star\"]\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = cogarch(&[
        "study", "--config", cfg.to_str().unwrap(), "-o", out_dir.to_str().unwrap(), "--threads", "1",
    ]);
    match out.status.code() {
        Some(0) => {
            for f in ["report.json", "estimates.csv", "qq.csv"] {
                assert!(out_dir.join(f).exists(), "{f}");
            }
            let est = std::fs::read_to_string(out_dir.join("estimates.csv")).unwrap();
            assert!(est.starts_with("rep,method,beta,eta,phi,objective,feasible\n"));
            let qq = std::fs::read_to_string(out_dir.join("qq.csv")).unwrap();
            assert!(qq.starts_with("component,theoretical_quantile,sample_quantile\n"));
        }
        Some(3) => {}
        other => panic!("{other:?}: {}", String::from_utf8_lossy(&out.stderr)),
    }
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"reps": 3, "bogus": 1}"#).unwrap();
    let out = cogarch(&["study", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    std::fs::write(&cfg, r#"{"reps": 0}"#).unwrap();
    let out = cogarch(&["study", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn infeasible_inputs_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("flat.csv");
    std::fs::write(&input, "G_i\n".to_string() + &"0.0\n".repeat(100)).unwrap();
    let out = cogarch(&["estimate", "--method", "mm", "--input", input.to_str().unwrap(), "--r", "3"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let out = cogarch(&["binding", "--eta=0.02", "--phi=0.1"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
