use std::path::{Path, PathBuf};
use std::process::Command;

use nmqfi_cli::output::parse_csv_table;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nmqfi"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn run(args: &[&str], config: &Path) -> (i32, String, String) {
    let out = bin().args(args).arg("--config").arg(config).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap(), String::from_utf8(out.stderr).unwrap())
}

#[test]
fn qfi_noiseless_vacuum_is_eight() {
    let (code, out, _) = run(&["qfi", "--format", "json"], &scenario("qfi_noiseless_vacuum.toml"));
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!((v["value"].as_f64().unwrap() - 8.0).abs() < 1e-9);
    assert_eq!(v["form"], "general");
}

#[test]
fn json_keys_are_sorted() {
    let (_, out, _) = run(&["qfi"], &scenario("qfi_noiseless_vacuum.toml"));
    let keys: Vec<&str> = out.lines().filter_map(|l| l.trim().strip_prefix('"')?.split('"').next()).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert!(keys.len() > 5);
    assert_eq!(keys, sorted);
}

#[test]
fn estimate_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let cfg = scenario("cramer_rao.toml");
    for (path, threads) in [(&a, "1"), (&b, "3")] {
        let st = bin()
            .env("NMQFI_THREADS", threads)
            .args(["estimate", "--seed", "11", "--out"])
            .arg(path)
            .arg("--config")
            .arg(&cfg)
            .status()
            .unwrap();
        assert!(st.success());
    }
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    let (_, other, _) = run(&["estimate", "--seed", "12"], &cfg);
    assert_ne!(other.as_bytes(), &ta[..]);
}

#[test]
fn limits_narrow_band_columns_agree() {
    let (code, out, _) = run(&["limits"], &scenario("narrow_band.toml"));
    assert_eq!(code, 0);
    let t = parse_csv_table(&out).unwrap();
    assert_eq!(t.columns, ["tau", "exact", "narrow_band", "markov"]);
    let exact = t.column("exact").unwrap();
    let narrow = t.column("narrow_band").unwrap();
    let gap = exact.iter().zip(&narrow).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(gap < 1e-6, "{gap}");
}

#[test]
fn sweep_total_qfi_grows_as_square_root() {
    let (code, out, _) = run(&["sweep"], &scenario("sequential_sweep.toml"));
    assert_eq!(code, 0);
    let t = parse_csv_table(&out).unwrap();
    let se = t.column("script_e").unwrap();
    let q = t.column("total_qfi").unwrap();
    let slope = (q[2] / q[0]).ln() / (se[2] / se[0]).ln();
    assert!((slope - 0.5).abs() < 0.05, "{slope}");
    let (_, again, _) = run(&["sweep"], &scenario("sequential_sweep.toml"));
    assert_eq!(out, again);
}

#[test]
fn sequential_reports_regime_flags() {
    let (code, out, _) = run(&["sequential"], &scenario("sequential_sweep.toml"));
    assert_eq!(code, 0, "{out}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    for key in ["tau_opt_numeric", "tau_opt_asymptotic", "total_qfi", "markov_bound"] {
        assert!(v[key].is_number(), "{key}");
    }
    assert_eq!(v["regime_flags"]["at_boundary"], serde_json::Value::Null);
    let (_, csv, _) = run(&["sequential", "--format", "csv"], &scenario("sequential_sweep.toml"));
    assert!(csv.starts_with("tau,total_qfi\n"));
}

#[test]
fn correlation_csv_columns() {
    let (code, out, _) = run(&["correlation"], &scenario("correlation.toml"));
    assert_eq!(code, 0);
    let t = parse_csv_table(&out).unwrap();
    assert_eq!(t.columns, ["t_minus_tprime", "re_total", "im_total", "re_born", "im_born", "abs_interaction"]);
    assert_eq!(t.rows.len(), 41);
}

#[test]
fn moments_and_response_run() {
    let (code, out, _) = run(&["moments"], &scenario("solver_order_a.toml"));
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!((v["k_squared"].as_f64().unwrap() - 0.5).abs() < 1e-15);
    let (code, out, _) = run(&["response"], &scenario("solver_order_a.toml"));
    assert_eq!(code, 0);
    assert_eq!(parse_csv_table(&out).unwrap().rows.len(), 257);
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("c.toml");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), "[probe]\nomega0 = 1.0\nomgea = 2.0\n");
    let (code, _, err) = run(&["moments"], &p);
    assert_eq!(code, 2);
    assert!(err.contains("line 3"), "{err}");
    let p = write_config(dir.path(), "[probe]\nomega0 = -1.0\n");
    assert_eq!(run(&["moments"], &p).0, 2);
    let p = write_config(dir.path(), "[probe]\nomega0 = 1.0\n");
    assert_eq!(run(&["qfi"], &p).0, 2);
}

#[test]
fn zero_force_estimate_is_a_numerical_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), "[probe]\nomega0 = 1.0\ninit = { kind = \"vacuum\" }\n[window]\nt = 1.0\n");
    let (code, _, err) = run(&["estimate"], &p);
    assert_eq!(code, 3);
    assert!(err.contains("c.toml"), "{err}");
}

#[test]
fn every_scenario_runs_its_command() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut files = Vec::new();
    for dir in [root.clone(), root.join("invariants")] {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.extension().is_some_and(|x| x == "toml") {
                files.push(p);
            }
        }
    }
    assert!(files.len() >= 30);
    for f in files {
        let sc = nmqfi_cli::load(&f).unwrap();
        if sc.config.command.as_deref() == Some("sweep") {
            continue; // covered above
        }
        let cmd = nmqfi_cli::Command::parse(sc.config.command.as_deref().unwrap()).unwrap();
        nmqfi_cli::execute(cmd, &sc).unwrap_or_else(|e| panic!("{}: {e}", f.display()));
    }
}
