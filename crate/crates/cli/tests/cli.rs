use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};
use tempfile::TempDir;

const EX63: &str = r#"{
  "model": {"variant": "SeparableQuadratic", "alpha": 1.0, "potential": "-0.25", "rate": "sin(x)"},
  "grid": {"n": 512},
  "numerics": {"tau": 0.03125, "v_max": 8.0, "tol": 1e-7, "t_max": 200.0, "window": 1.0, "seed": 7}
}"#;

const SPLIT_PHI: &str = "0.25 + 0.25*(sin(x) - abs(sin(x)))";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_contact-kam"))
}

fn repo_configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn solve_backward_from_one_converges() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "ex63.json", EX63);
    let out = tmp.path().join("o");
    let o = run(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--direction",
        "backward",
        "--phi",
        "1.0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("Converged"));
    assert_eq!(stdout(&o).lines().count(), 1);
    let csv = std::fs::read_to_string(out.join("u_minus.csv")).unwrap();
    assert!(csv.starts_with("x,value\n"));
    assert_eq!(csv.lines().count(), 513);
    let summary = std::fs::read_to_string(out.join("u_minus.summary.txt")).unwrap();
    assert!(summary.contains("status=Converged"));
    assert!(summary.contains("residual="));
    assert!(summary.contains("elapsed="));
}

#[test]
fn verify_exits_zero() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "ex63.json", EX63);
    let out = tmp.path().join("v");
    let o = run(&["verify", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = std::fs::read_to_string(out.join("verify.txt")).unwrap();
    assert_eq!(report.lines().count(), 6);
    assert!(report.lines().all(|l| l.starts_with("PASS ")));
}

#[test]
fn connect_with_unordered_solutions_exits_four() {
    let tmp = TempDir::new().unwrap();
    let bad = EX63.replacen("\"grid\"", &format!("\"phi\": \"{SPLIT_PHI}\",\n  \"grid\""), 1);
    let cfg = write_config(tmp.path(), "bad.json", &bad);
    let out = tmp.path().join("c");
    let o = run(&["connect", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 4, "{}", stdout(&o));
    let manifest = std::fs::read_to_string(out.join("connect.manifest.json")).unwrap();
    assert!(manifest.contains("\"exit_code\": 4"));
}

#[test]
fn bundled_configs_behave_as_documented() {
    let tmp = TempDir::new().unwrap();
    let ex = repo_configs().join("ex63.json");
    let bad = repo_configs().join("bad.json");
    let out = tmp.path().join("p");
    let o = run(&["parse-check", "--config", ex.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let o = run(&["connect", "--config", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 4);
}

fn file_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn outputs_are_byte_identical_across_runs_and_thread_counts() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "ex63.json", EX63);
    let cases: [&[&str]; 4] = [
        &["solve", "--direction", "forward", "--phi", "sin(x)"],
        &["orbit", "--phi", "1", "--svg"],
        &["classify", "--x0", "0.3", "--u0", "-2", "--t", "3"],
        &["reproduce-ex63"],
    ];
    for (k, args) in cases.iter().enumerate() {
        let mut dirs = Vec::new();
        for threads in ["1", "4", "4"] {
            let out = tmp.path().join(format!("run{k}_{}", dirs.len()));
            let mut full = args.to_vec();
            full.extend(["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
            let o = bin().args(&full).env("CONTACT_KAM_THREADS", threads).output().unwrap();
            assert!(matches!(code(&o), 0 | 3), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
            dirs.push(out);
        }
        let first = file_bytes(&dirs[0]);
        assert!(first.len() >= 2, "{args:?} wrote {} files", first.len());
        for d in &dirs[1..] {
            assert!(first == file_bytes(d), "{args:?} differs between runs");
        }
    }
}

#[test]
fn manifest_lists_every_file_with_its_hash() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "ex63.json", EX63);
    let out = tmp.path().join("m");
    let o = run(&[
        "evolve",
        "--config",
        cfg.to_str().unwrap(),
        "--phi",
        "sin(x)",
        "--t",
        "1.5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("evolve.manifest.json")).unwrap()).unwrap();
    let cfg_hash = hex::encode(Sha256::digest(std::fs::read(&cfg).unwrap()));
    assert_eq!(m["config"]["sha256"], cfg_hash.as_str());
    assert_eq!(m["inputs"]["phi"], "sin(x)");
    let files = m["files"].as_array().unwrap();
    assert_eq!(files.len(), 3);
    for f in files {
        let name = f["path"].as_str().unwrap();
        let bytes = std::fs::read(out.join(name)).unwrap();
        assert_eq!(f["sha256"], hex::encode(Sha256::digest(&bytes)).as_str());
        assert_eq!(f["bytes"], bytes.len());
    }
}

#[test]
fn field_files_round_trip_as_phi() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "ex63.json", EX63);
    let a = tmp.path().join("a");
    let o = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let seed = format!("@{}", a.join("u_minus.csv").display());
    let b = tmp.path().join("b");
    let o = run(&["solve", "--config", cfg.to_str().unwrap(), "--phi", &seed, "--out", b.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let summary = std::fs::read_to_string(b.join("u_minus.summary.txt")).unwrap();
    // already a fixed point: converges after one window
    assert!(summary.contains("elapsed=1\n"), "{summary}");
}

#[test]
fn usage_errors_exit_one() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "ex63.json", EX63);
    let c = cfg.to_str().unwrap();
    assert_eq!(code(&run(&["frobnicate", "--config", c])), 1);
    assert_eq!(code(&run(&["solve"])), 1);
    assert_eq!(code(&run(&["solve", "--config", c, "--direction", "sideways"])), 1);
    assert_eq!(code(&run(&["solve", "--config", c, "--t", "abc"])), 1);
    let out = tmp.path().join("u");
    assert_eq!(code(&run(&["evolve", "--config", c, "--out", out.to_str().unwrap()])), 1);
    assert_eq!(code(&run(&["classify", "--config", c, "--x0", "1", "--out", out.to_str().unwrap()])), 1);
    assert_eq!(code(&run(&["evolve", "--config", c, "--t", "-1", "--out", out.to_str().unwrap()])), 1);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn config_and_parse_errors_exit_two() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("e");
    let o = out.to_str().unwrap();
    let cases = [
        ("missing.json", None),
        ("garbage.json", Some("{ not json")),
        ("unknown_field.json", Some(r#"{"model": {"variant": "General", "hamiltonian": "p^2"}, "grid": {"n": 64}, "colour": 1}"#)),
        ("neg_tol.json", Some(r#"{"model": {"variant": "General", "hamiltonian": "p^2"}, "grid": {"n": 64}, "numerics": {"tol": -1}}"#)),
        ("zero_class_tol.json", Some(r#"{"model": {"variant": "General", "hamiltonian": "p^2"}, "grid": {"n": 64}, "numerics": {"class_tol": 0}}"#)),
        ("odd_grid.json", Some(r#"{"model": {"variant": "General", "hamiltonian": "p^2"}, "grid": {"n": 63}}"#)),
        ("bad_expr.json", Some(r#"{"model": {"variant": "General", "hamiltonian": "p^2 + sin(x"}, "grid": {"n": 64}}"#)),
        ("bad_alpha.json", Some(r#"{"model": {"variant": "SeparableQuadratic", "alpha": -1, "potential": "0", "rate": "1"}, "grid": {"n": 64}}"#)),
        ("potential_in_u.json", Some(r#"{"model": {"variant": "SeparableQuadratic", "alpha": 1, "potential": "u", "rate": "1"}, "grid": {"n": 64}}"#)),
    ];
    for (name, text) in cases {
        let p = match text {
            Some(t) => write_config(tmp.path(), name, t),
            None => tmp.path().join(name),
        };
        let r = run(&["parse-check", "--config", p.to_str().unwrap(), "--out", o]);
        assert_eq!(code(&r), 2, "{name}: {}", String::from_utf8_lossy(&r.stderr));
    }
    let cfg = write_config(tmp.path(), "ok.json", EX63);
    let c = cfg.to_str().unwrap();
    assert_eq!(code(&run(&["solve", "--config", c, "--phi", "sin(u)", "--out", o])), 2);
    assert_eq!(code(&run(&["solve", "--config", c, "--phi", "log(x)", "--out", o])), 2);
    assert_eq!(code(&run(&["solve", "--config", c, "--phi", "@/no/such/file.csv", "--out", o])), 2);
    let r = bin()
        .args(["solve", "--config", c, "--out", o])
        .env("CONTACT_KAM_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&r), 2);
}

#[test]
fn divergent_solve_exits_three() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "ex63.json", EX63);
    let out = tmp.path().join("d");
    let o = run(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--direction",
        "forward",
        "--phi",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 3);
    assert!(stdout(&o).contains("DivergedPlus"));
    assert!(out.join("v_plus.summary.txt").exists());
}

#[test]
fn tau_is_shrunk_to_the_contraction_bound() {
    let tmp = TempDir::new().unwrap();
    let text = r#"{"model": {"variant": "SeparableQuadratic", "alpha": 1, "potential": "-0.25", "rate": "3*sin(x)"},
                   "grid": {"n": 128}, "numerics": {"tau": 0.25}}"#;
    let cfg = write_config(tmp.path(), "stiff.json", text);
    let out = tmp.path().join("s");
    let o = run(&["parse-check", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("tau shrunk"));
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("parse-check.manifest.json")).unwrap()).unwrap();
    let tau = m["effective"]["tau"].as_f64().unwrap();
    assert_eq!(tau, 0.125);
    assert!(tau * m["effective"]["lambda"].as_f64().unwrap() <= 0.5);
    assert_eq!(m["notices"].as_array().unwrap().len(), 1);
}

#[test]
fn remaining_commands_write_their_files() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "ex63.json", EX63);
    let c = cfg.to_str().unwrap();
    let cases: [(&[&str], &[&str]); 6] = [
        (&["action", "--x0", "-1", "--u0", "0.3", "--horizon", "0.5"], &["action.csv"]),
        (&["orbit", "--phi", "sin(x)", "--x0", "0.5", "--t", "1"], &["orbit.csv", "orbit.summary.txt"]),
        (&["fixed-points"], &["fixed_points.csv"]),
        (&["manifold", "--x0", "-1.5", "--svg"], &["manifold_0_unstable_plus.csv", "manifold.svg"]),
        (&["connect", "--svg"], &["heteroclinic.csv", "heteroclinic.summary.txt", "heteroclinic.svg"]),
        (&["classify", "--x0", "1", "--u0", "0", "--svg"], &["classification.txt", "evidence.csv", "classification.svg"]),
    ];
    for (k, (args, files)) in cases.iter().enumerate() {
        let out = tmp.path().join(format!("r{k}"));
        let mut full = args.to_vec();
        full.extend(["--config", c, "--out", out.to_str().unwrap()]);
        let o = run(&full);
        assert!(matches!(code(&o), 0 | 3), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        for f in *files {
            assert!(out.join(f).exists(), "{args:?} did not write {f}");
        }
    }
    let fp = std::fs::read_to_string(tmp.path().join("r2/fixed_points.csv")).unwrap();
    assert_eq!(fp.lines().count(), 3);
    let orbit = std::fs::read_to_string(tmp.path().join("r1/orbit.csv")).unwrap();
    assert!(orbit.starts_with("t,x,u,p,H\n"));
    let svg = std::fs::read_to_string(tmp.path().join("r3/manifold.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    let kv = std::fs::read_to_string(tmp.path().join("r5/classification.txt")).unwrap();
    assert!(kv.contains("case=3\n"), "{kv}");
}
