use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn hessflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hessflow"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn hopfield_config(j: &str, extra: &str) -> String {
    format!(
        r#"{{
  "dimension": 2,
  "potential": {{ "name": "softplus" }},
  "model": {{
    "kind": "hopfield",
    "J": {j},
    "R": [1.0, 2.0],
    "I_ext": [0.2, -0.1]
  }},
  "initial_conditions": [[1.5, -2.0], [-1.0, 1.0], [0.0, 0.0], [2.5, 2.5]],
  "integrator": {{ "dt": 0.001, "t_max": 2.0, "record_every": 50 }}{extra}
}}"#
    )
}

fn sorted_outputs(dir: &Path) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    files
}

#[test]
fn simulate_writes_one_file_per_initial_condition() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "run.json", &hopfield_config("[0.0, 0.5, 0.5, 0.0]", ""));
    let out = hessflow(&["simulate", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let files = sorted_outputs(&dir.path().join("out"));
    assert_eq!(files.len(), 4);
    for f in &files {
        let text = fs::read_to_string(f).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,U_1,U_2,V_1,V_2,H,dHdt,kappa,field_norm_g");
        let first: Vec<f64> = lines.next().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(first.len(), 9);
        assert_eq!(first[0], 0.0);
    }
}

#[test]
fn output_is_byte_identical_across_runs_and_job_counts() {
    let dir = TempDir::new().unwrap();
    let text = r#"{
  "dimension": 3,
  "potential": { "name": "softplus" },
  "model": { "kind": "hopfield", "J": [0, 0.3, -0.3, 0.3, 0, 0.3, -0.3, 0.3, 0], "R": [1, 2, 4], "I_ext": [0.1, -0.2, 0] },
  "initial_conditions": { "random": { "count": 6, "seed": 5, "box": [-2, 2] } },
  "integrator": { "dt": 0.01, "t_max": 3.0, "record_every": 10 },
  "outputs": { "format": "csv", "path": "a" }
}"#;
    let cfg_a = write_config(dir.path(), "a.json", text);
    let cfg_b = write_config(
        dir.path(),
        "b.json",
        &text.replace("\"path\": \"a\"", "\"path\": \"b\""),
    );
    assert_eq!(
        code(&hessflow(&["--jobs", "1", "simulate", cfg_a.to_str().unwrap()])),
        0
    );
    assert_eq!(
        code(&hessflow(&["--jobs", "4", "simulate", cfg_b.to_str().unwrap()])),
        0
    );
    let a = sorted_outputs(&dir.path().join("a"));
    let b = sorted_outputs(&dir.path().join("b"));
    assert_eq!(a.len(), 6);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
    }
}

#[test]
fn asymmetric_coupling_is_a_config_error_at_the_j_line() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "bad.json", &hopfield_config("[0.0, 0.5, 0.4, 0.0]", ""));
    let out = hessflow(&["simulate", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    let err = stderr(&out);
    assert!(err.contains("not symmetric"), "{err}");
    assert!(err.contains("bad.json:6:5:"), "{err}");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn syntax_errors_report_line_and_column() {
    let dir = TempDir::new().unwrap();
    let text = hopfield_config("[0.0, 0.5, 0.5, 0.0]", "").replace("\"R\": [1.0, 2.0],", "\"R\": [1.0, 2.0]");
    let cfg = write_config(dir.path(), "syntax.json", &text);
    let out = hessflow(&["simulate", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("syntax.json:8:5:"), "{}", stderr(&out));
}

#[test]
fn dimension_mismatch_and_missing_file_are_config_errors() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "dim.json", &hopfield_config("[0.0, 0.5, 0.5]", ""));
    let out = hessflow(&["simulate", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("J must have 4 entries"), "{}", stderr(&out));
    let out = hessflow(&["simulate", dir.path().join("nope.json").to_str().unwrap()]);
    assert_eq!(code(&out), 1);
}

#[test]
fn random_initial_conditions_need_a_seed() {
    let dir = TempDir::new().unwrap();
    let text = r#"{
  "dimension": 1,
  "potential": { "name": "softplus" },
  "model": { "kind": "gradient" },
  "initial_conditions": { "random": { "count": 2, "box": [-1, 1] } },
  "integrator": { "dt": 0.01, "t_max": 0.5 }
}"#;
    let cfg = write_config(dir.path(), "r.json", text);
    let out = hessflow(&["simulate", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("r.json:5:27:"), "{}", stderr(&out));
    assert_eq!(code(&hessflow(&["--seed", "3", "simulate", cfg.to_str().unwrap()])), 0);
}

#[test]
fn coarse_step_on_stiff_network_exits_with_numerical_failure() {
    let dir = TempDir::new().unwrap();
    let text = r#"{
  "dimension": 2,
  "potential": { "name": "softplus" },
  "model": { "kind": "hopfield", "J": [0, 0.5, 0.5, 0], "R": [0.1, 0.1], "I_ext": [1, -1] },
  "initial_conditions": [[2, -2]],
  "integrator": { "dt": 1.0, "t_max": 20.0 }
}"#;
    let cfg = write_config(dir.path(), "stiff.json", text);
    let out = hessflow(&["simulate", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stdout(&out).contains("numerical_failure"));
    // the partial trajectory, including the offending row, is kept
    let text = fs::read_to_string(dir.path().join("out/trajectory_0000.csv")).unwrap();
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn jsonl_output_and_cohen_grossberg_model() {
    let dir = TempDir::new().unwrap();
    let text = r#"{
  "dimension": 2,
  "potential": { "name": "softplus" },
  "model": { "kind": "cohen_grossberg", "C": [0, -0.5, -0.5, 0], "A": [[1, 0, 0.1], [1, 0, 0.1]], "B": [[0.2, -1], [-0.1, -0.5]] },
  "initial_conditions": [[1.5, -2.0]],
  "integrator": { "dt": 0.001, "t_max": 1.0, "record_every": 100 },
  "outputs": { "format": "jsonl", "path": "cg" }
}"#;
    let cfg = write_config(dir.path(), "cg.json", text);
    let out = hessflow(&["simulate", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = fs::read_to_string(dir.path().join("cg/trajectory_0000.jsonl")).unwrap();
    let rows: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 11);
    let h: Vec<f64> = rows.iter().map(|r| r["H"].as_f64().unwrap()).collect();
    assert!(h.windows(2).all(|w| w[1] < w[0]));
}

fn kappa_rows(out: &Output) -> Vec<Vec<String>> {
    stdout(out)
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn kappa_at_origin_is_minus_n_over_four() {
    let dir = TempDir::new().unwrap();
    let text = r#"{
  "dimension": 4,
  "potential": { "name": "softplus" },
  "model": { "kind": "gradient" },
  "initial_conditions": [[0, 0, 0, 0]]
}"#;
    let cfg = write_config(dir.path(), "g.json", text);
    let out = hessflow(&["kappa", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = kappa_rows(&out);
    assert_eq!(rows.len(), 1);
    for col in 4..7 {
        let k: f64 = rows[0][col].parse().unwrap();
        assert!((k + 1.0).abs() < 1e-5, "{k}");
    }
    assert_eq!(rows[0][9], "true");
}

#[test]
fn kappa_at_steady_state_is_minus_sum_of_conductances() {
    let dir = TempDir::new().unwrap();
    let text = r#"{
  "dimension": 2,
  "potential": { "name": "softplus" },
  "model": { "kind": "hopfield", "J": [0, 0.4, 0.4, 0], "R": [1, 2], "I_ext": [0.3, -0.2] },
  "initial_conditions": [[1, 1], [-2, 0.5]],
  "integrator": { "dt": 0.01, "t_max": 500 }
}"#;
    let cfg = write_config(dir.path(), "s.json", text);
    let out = hessflow(&["kappa", cfg.to_str().unwrap(), "--at-steady"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for row in kappa_rows(&out) {
        for col in 2..5 {
            let k: f64 = row[col].parse().unwrap();
            assert!((k + 1.5).abs() < 1e-5, "{k}");
        }
    }
}

#[test]
fn kappa_point_sources() {
    let dir = TempDir::new().unwrap();
    let text = r#"{
  "dimension": 2,
  "potential": { "name": "softplus" },
  "model": { "kind": "hopfield", "J": [0.1, 0.4, 0.4, -0.2], "R": [1, 2], "I_ext": [0.3, -0.2] },
  "initial_conditions": [[0, 0]]
}"#;
    let cfg = write_config(dir.path(), "k.json", text);
    let cfg = cfg.to_str().unwrap();
    let a = hessflow(&["kappa", cfg, "--points", "random:5:3"]);
    let b = hessflow(&["--jobs", "2", "kappa", cfg, "--points", "random:5:3"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(kappa_rows(&a).len(), 5);

    let grid = hessflow(&["kappa", cfg, "--points", "grid:-1:1:3"]);
    assert_eq!(code(&grid), 0);
    let rows = kappa_rows(&grid);
    assert_eq!(rows.len(), 9);
    assert_eq!(rows[5][0].parse::<f64>().unwrap(), 0.0);
    assert_eq!(rows[5][1].parse::<f64>().unwrap(), 1.0);

    let pts = write_config(dir.path(), "pts.txt", "# U_1, U_2\n0.5, -0.5\n1 2\n");
    let file = hessflow(&["kappa", cfg, "--points", &format!("file:{}", pts.display())]);
    assert_eq!(code(&file), 0, "{}", stderr(&file));
    assert_eq!(kappa_rows(&file).len(), 2);

    let bad = write_config(dir.path(), "bad.txt", "1 2 3\n");
    let out = hessflow(&["kappa", cfg, "--points", &format!("file:{}", bad.display())]);
    assert_eq!(code(&out), 1);
    assert_eq!(code(&hessflow(&["kappa", cfg, "--points", "grid:1:0:3"])), 1);
}

#[test]
fn verify_suites() {
    let out = hessflow(&["verify", "legendre"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let table = stdout(&out);
    assert!(table.contains("psi + psi* = x psi'"));
    assert!(table.contains("round trip"));
    assert!(table.contains("integral of inverse activation"));
    assert!(!table.contains("FAIL"));

    let out = hessflow(&["verify", "volume"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(stdout(&out).contains("linear field contracts at -6"));
    assert!(stdout(&out).contains("Hamiltonian field preserves volume"));

    let out = hessflow(&["--seed", "11", "verify", "kappa"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(stdout(&out).contains("kappa(0) = -n/4, n = 16"));
    assert!(stdout(&out).contains("steady-state kappa = -sum 1/R"));

    assert_eq!(code(&hessflow(&["verify", "bogus"])), 1);
}
