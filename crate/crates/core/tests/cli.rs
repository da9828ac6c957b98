//! Drives the `netpanel` binary through simulate, estimate, cluster and report.

use std::path::Path;
use std::process::{Command, Output};

fn netpanel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netpanel"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = netpanel(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let est = dir.path().join("est");
    let pooled = dir.path().join("pooled");
    let cl = dir.path().join("cl");
    let rep = dir.path().join("rep");
    let cfg = dir.path().join("cfg.txt");
    std::fs::write(&cfg, "burn_in = 100\nkeep = 300\nthin = 1\nseed = 5\n").unwrap();

    ok(&["simulate", "--units", "6", "--periods", "30", "--seed", "9", "--out", p(&sim)]);
    ok(&["estimate", "--config", p(&cfg), "--data", p(&sim), "--variant", "C5", "--out", p(&est)]);
    ok(&["estimate", "--config", p(&cfg), "--data", p(&sim), "--variant", "B1", "--skip-paths", "--out", p(&pooled)]);
    ok(&["cluster", "--data", p(&est), "--seed", "1", "--out", p(&cl)]);
    ok(&["report", "--data", p(&pooled), p(&est), "--out", p(&rep)]);

    for f in ["summary.csv", "effect_pairs.csv", "heatmap.csv", "impact_draws.csv", "run_manifest.json"] {
        assert!(est.join(f).exists(), "missing {f}");
    }
    assert!(est.join("draws/theta_tilde.csv").exists());
    assert!(!pooled.join("draws/theta_tilde.csv").exists());
    for f in ["k_distribution.csv", "inclusion.csv", "centers.csv"] {
        assert!(cl.join(f).exists(), "missing {f}");
    }

    // report orders network-free variants first and copies each summary row verbatim
    let table = std::fs::read_to_string(rep.join("table.csv")).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("B1,"));
    assert!(rows[2].starts_with("C5,"));
    let c5 = std::fs::read_to_string(est.join("summary.csv")).unwrap();
    assert_eq!(rows[2], c5.lines().nth(1).unwrap());

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(est.join("run_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "estimate");
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["input_hashes"].as_object().unwrap().len(), 3);
}

#[test]
fn usage_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    ok(&["simulate", "--units", "3", "--periods", "10", "--out", p(&sim)]);

    // refuses to overwrite without --force
    let again = netpanel(&["simulate", "--units", "3", "--periods", "10", "--out", p(&sim)]);
    assert_eq!(again.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&again.stderr).contains("--force"));
    ok(&["simulate", "--units", "3", "--periods", "10", "--force", "--out", p(&sim)]);

    // an aggregate-only variant on a multi-unit panel fails validation
    let bad = netpanel(&["estimate", "--data", p(&sim), "--variant", "A1", "--out", p(&dir.path().join("e"))]);
    assert_eq!(bad.status.code(), Some(2));

    let missing = netpanel(&["estimate", "--data", p(&dir.path().join("nope")), "--out", p(&dir.path().join("f"))]);
    assert_ne!(missing.status.code(), Some(0));
}

#[test]
fn shocks_command_writes_one_row_per_meeting() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("meetings.csv");
    std::fs::write(
        &input,
        "date,ff_pre,ff_post,days_in_month,day_of_meeting\n2001-01-10,5.00,5.05,30,10\n2001-02-28,5.00,5.00,30,10\n",
    )
    .unwrap();
    let out = dir.path().join("s");
    ok(&["shocks", "--data", p(&input), "--out", p(&out)]);
    let text = std::fs::read_to_string(out.join("shocks.csv")).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 3);
    let last: f64 = rows[2].rsplit(',').next().unwrap().parse().unwrap();
    assert_eq!(last, 0.0);
    let first: f64 = rows[1].rsplit(',').next().unwrap().parse().unwrap();
    assert!((first - 0.075).abs() < 1e-12);
}
