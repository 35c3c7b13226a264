use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use flex_cli::config::FlexConfig;

fn flex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flex"))
        .args(args)
        .env_remove("FLEX_OUT_DIR")
        .output()
        .expect("spawn flex")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small verification budget so the command finishes quickly.
fn quick_config() -> FlexConfig {
    let mut cfg = FlexConfig::default();
    cfg.verify.chunks = 2000;
    cfg.verify.batch_size = 250;
    cfg.verify.rho_grid = vec![-1.0, 0.0];
    cfg.verify.cov_rhos = vec![-0.5];
    cfg.verify.psd_rhos = vec![-0.5];
    cfg.verify.psd_len = 8192;
    cfg.verify.parseval_rhos = vec![-0.5, 0.5];
    cfg.verify.tolerances.energy_rel = 0.1;
    cfg.verify.tolerances.mean_abs = 0.2;
    cfg.verify.tolerances.var_abs = 0.2;
    cfg.verify.tolerances.cov_abs = 0.1;
    cfg.verify.tolerances.psd_rel_l2 = 0.15;
    cfg
}

fn write_config(dir: &Path, cfg: &FlexConfig) -> String {
    let p = dir.join("flex.toml");
    fs::write(&p, cfg.to_toml()).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn default_config_round_trips() {
    let out = flex(&["--print-default-config"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let parsed = FlexConfig::from_toml(&text).unwrap();
    assert_eq!(parsed.to_toml(), text);
}

#[test]
fn rope_analyze_no_op_at_training_length() {
    let tmp = tempfile::tempdir().unwrap();
    let out = flex(&[
        "rope-analyze",
        "--out",
        path_str(tmp.path()),
        "--target-len",
        "21",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(tmp.path().join("rope_flex.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "m,theta,lambda,exposure_r,gate_g,theta_mod,phase_step"
    );
    let rows: Vec<Vec<String>> = lines
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect();
    assert_eq!(rows.len(), 8);
    for row in rows {
        assert_eq!(row[1], row[5], "theta_mod must equal theta");
        assert_eq!(row[1], row[6]);
    }
    assert!(tmp.path().join("manifest.json").exists());
}

#[test]
fn rope_analyze_row_count_follows_dimension() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = FlexConfig::default();
    cfg.rope.d_f = 32;
    let config = write_config(tmp.path(), &cfg);
    let out_dir = tmp.path().join("out");
    let out = flex(&[
        "rope-analyze",
        "--config",
        &config,
        "--out",
        path_str(&out_dir),
        "--mode",
        "pi",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(out_dir.join("rope_pi.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 16);
    assert!(!out_dir.join("rope_flex.csv").exists());
}

#[test]
fn noise_verify_passes_and_fails_on_zero_tolerance() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = quick_config();
    let config = write_config(tmp.path(), &cfg);
    let ok_dir = tmp.path().join("ok");
    let out = flex(&[
        "noise-verify",
        "--config",
        &config,
        "--out",
        path_str(&ok_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout
        .lines()
        .any(|l| l.starts_with("[PASS] energy_rel_err")));
    assert!(!stdout.contains("[FAIL]"));

    cfg.verify.tolerances.energy_rel = 0.0;
    cfg.verify.rho_grid = vec![0.0];
    let config = write_config(tmp.path(), &cfg);
    let bad_dir = tmp.path().join("bad");
    let out = flex(&[
        "noise-verify",
        "--config",
        &config,
        "--out",
        path_str(&bad_dir),
    ]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stdout).contains("[FAIL] energy_rel_err"));
    // outputs are still written on failure
    assert!(bad_dir.join("noise_checks.csv").exists());
}

#[test]
fn noise_verify_rho_override_collapses_grids() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), &quick_config());
    let out = flex(&[
        "noise-verify",
        "--config",
        &config,
        "--out",
        path_str(tmp.path()),
        "--rho",
        "1",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("energy_rel_err rho_1:"));
    assert!(!stdout.contains("psd_rel_l2"));
}

#[test]
fn out_of_range_rho_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    for cmd in ["noise-verify", "simulate"] {
        let out = flex(&[cmd, "--out", path_str(tmp.path()), "--rho", "1.5"]);
        assert_eq!(code(&out), 2, "{cmd}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("rho"));
    }
}

#[test]
fn malformed_config_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "[rope]\nd_f = \"sixteen\"\n").unwrap();
    let out = flex(&[
        "rope-analyze",
        "--config",
        path_str(&bad),
        "--out",
        path_str(tmp.path()),
    ]);
    assert_eq!(code(&out), 2);

    fs::write(&bad, "[rope]\nunknown_key = 1\n").unwrap();
    let out = flex(&[
        "rope-analyze",
        "--config",
        path_str(&bad),
        "--out",
        path_str(tmp.path()),
    ]);
    assert_eq!(code(&out), 2);

    fs::write(&bad, "[rope]\nd_f = 15\n").unwrap();
    let out = flex(&[
        "rope-analyze",
        "--config",
        path_str(&bad),
        "--out",
        path_str(tmp.path()),
    ]);
    assert_eq!(code(&out), 2);

    fs::write(&bad, "[window]\nsize = 4\nsink = 3\n").unwrap();
    let out = flex(&[
        "simulate",
        "--config",
        path_str(&bad),
        "--out",
        path_str(tmp.path()),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn bad_arguments_exit_2() {
    assert_eq!(code(&flex(&["simulate", "--mode", "yarn"])), 2);
    assert_eq!(code(&flex(&["frobnicate"])), 2);
    assert_eq!(code(&flex(&[])), 2);
}

#[test]
fn io_failures_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing.toml");
    let out = flex(&[
        "simulate",
        "--config",
        path_str(&missing),
        "--out",
        path_str(tmp.path()),
    ]);
    assert_eq!(code(&out), 3);

    // output path blocked by a regular file
    let blocker = tmp.path().join("blocker");
    fs::write(&blocker, "x").unwrap();
    let out = flex(&["simulate", "--out", path_str(&blocker.join("sub"))]);
    assert_eq!(code(&out), 3);
}

#[test]
fn out_dir_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_flex"))
        .args(["rope-analyze", "--mode", "flex"])
        .env("FLEX_OUT_DIR", tmp.path())
        .output()
        .unwrap();
    assert_eq!(code(&status), 0);
    assert!(tmp.path().join("rope_flex.csv").exists());
}

#[test]
fn manifest_reproduces_simulation() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    let second = tmp.path().join("second");
    let out = flex(&[
        "simulate",
        "--out",
        path_str(&first),
        "--seed",
        "7",
        "--target-len",
        "42",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(first.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["config"]["noise"]["seed"], 7);
    assert_eq!(manifest["config"]["pipeline"]["target_len"], 42);
    assert!(manifest["build"]["rng_algorithm"].is_string());

    let out = flex(&[
        "simulate",
        "--config",
        path_str(&first.join("manifest.json")),
        "--out",
        path_str(&second),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for mode in ["vanilla", "pi", "flex"] {
        for suffix in ["frames.csv", "metrics.csv", "drift.csv", "contexts.txt"] {
            let name = format!("trace_{mode}_{suffix}");
            assert_eq!(
                fs::read(first.join(&name)).unwrap(),
                fs::read(second.join(&name)).unwrap(),
                "{name}"
            );
        }
    }
    let frames = fs::read_to_string(first.join("trace_flex_frames.csv")).unwrap();
    assert_eq!(frames.lines().count(), 1 + 42);
}

#[test]
fn sink_frames_appear_in_every_later_context() {
    let tmp = tempfile::tempdir().unwrap();
    let out = flex(&["simulate", "--out", path_str(tmp.path()), "--mode", "flex"]);
    assert_eq!(code(&out), 0);
    let text = fs::read_to_string(tmp.path().join("trace_flex_contexts.txt")).unwrap();
    let lines: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(lines.len(), 84 / 3);
    for line in &lines[1..] {
        let (_, ctx) = line.split_once(',').unwrap();
        assert!(ctx.starts_with("\"0,1,2"), "{line}");
    }
}
