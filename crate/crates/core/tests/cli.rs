use std::path::Path;
use std::process::{Command, Output};

use rabi_squeeze::approx::{approx_scan, ApproxRow};
use rabi_squeeze::hilbert::FockConfig;
use rabi_squeeze::lindblad::{run_noisy_protocol, NoiseKind, NoiseModel, DEFAULT_DT};
use rabi_squeeze::metrics::MetricsRecord;
use rabi_squeeze::optimizer::{optimize, Objective};

fn rabi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rabi-squeeze")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, json: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, json).unwrap();
    p.to_string_lossy().into_owned()
}

fn data_lines(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn malformed_config_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.json", "{\"N\": 3,");
    let out = dir.path().join("out.csv");
    let r = rabi(&["optimize", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2));
    assert!(!out.exists());
    assert!(!String::from_utf8_lossy(&r.stderr).is_empty());
}

#[test]
fn precondition_violations_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("optimize", r#"{"N": 0}"#),
        ("optimize", r#"{"N": 3, "cutof": 100}"#),
        ("optimize", r#"{"w": 1.5}"#),
        ("approx-scan", r#"{"d_alpha_grid": []}"#),
        ("approx-scan", r#"{"delta_db_grid": [-3.0]}"#),
        ("fig3", r#"{"gamma_grid": []}"#),
        ("fig3", r#"{"N_range": []}"#),
        ("fisher", r#"{"noise_kinds": []}"#),
        ("fisher", r#"{"noise_kinds": ["loss"]}"#),
        ("fig2", r#"{"N_max": 9}"#),
    ];
    for (i, (cmd, json)) in cases.iter().enumerate() {
        let cfg = write_config(dir.path(), &format!("c{i}.json"), json);
        let r = rabi(&[cmd, "--config", &cfg]);
        assert_eq!(r.status.code(), Some(2), "{cmd} {json}");
        assert!(r.stdout.is_empty());
    }
    assert_eq!(rabi(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(rabi(&["approx-scan", "--jobs", "0"]).status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    // every seed schedule overflows a ten-level oscillator
    let cfg = write_config(dir.path(), "leak.json", r#"{"N": 3, "cutoff": 10, "budget": 2000}"#);
    let r = rabi(&["optimize", "--config", &cfg, "--jobs", "1"]);
    assert_eq!(r.status.code(), Some(3), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(String::from_utf8_lossy(&r.stderr).contains("Fock cutoff"));
}

#[test]
fn reruns_are_byte_identical_and_self_describing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "scan.json", r#"{"d_alpha_grid": [0.5, 1.5], "delta_db_grid": [4.0, 8.0], "cutoff": 120}"#);
    let a = rabi(&["approx-scan", "--config", &cfg]);
    let b = rabi(&["approx-scan", "--config", &cfg, "--jobs", "2"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("# rabi-squeeze approx-scan config: "));
    assert!(header.contains("\"d_alpha_grid\":[0.5,1.5]"));
    let lines = data_lines(&text);
    assert_eq!(lines[0], ApproxRow::CSV_HEADER);
    assert_eq!(lines.len(), 5);
    // target-major order
    assert!(lines[1].starts_with("0.500000000,4.00000000,"));
    assert!(lines[2].starts_with("1.50000000,4.00000000,"));
}

#[test]
fn single_point_scan_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "one.json", r#"{"d_alpha_grid": [1.25], "delta_db_grid": [7.0], "cutoff": 150}"#);
    let out = dir.path().join("scan.csv");
    let r = rabi(&["approx-scan", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    let lib = approx_scan(&[1.25], &[7.0], &FockConfig::with_cutoff(150).unwrap()).unwrap();
    assert_eq!(data_lines(&text), vec![ApproxRow::CSV_HEADER.to_string(), lib[0].csv_row()]);
}

#[test]
fn single_point_fisher_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let json = format!(
        r#"{{"N": 1, "cutoff": 60, "budget": 2000, "seed": 5, "noise_kinds": ["qubit_decay"], "gamma_grid": [0.07], "cache_dir": {:?}}}"#,
        cache.to_str().unwrap()
    );
    let cfg = write_config(dir.path(), "fisher.json", &json);
    let out = dir.path().join("fisher.csv");
    let args = ["fisher", "--config", &cfg, "--out", out.to_str().unwrap()];
    assert_eq!(rabi(&args).status.code(), Some(0));
    let first = std::fs::read_to_string(&out).unwrap();
    assert_eq!(std::fs::read_dir(&cache).unwrap().count(), 1);

    let fock = FockConfig::with_cutoff(60).unwrap();
    let report = optimize(1, &Objective::squeeze_only(false), 5, &fock, 2000).unwrap();
    let noisy = run_noisy_protocol(&report.best, &NoiseModel::new(NoiseKind::QubitDecay, 0.07).unwrap(), &fock, Some(DEFAULT_DT)).unwrap();
    let lib = MetricsRecord::evaluate(&noisy.deterministic, 1, "qubit_decay", 0.07, false, noisy.postselect_prob).unwrap();
    assert_eq!(data_lines(&first), vec![MetricsRecord::CSV_HEADER.to_string(), lib.csv_row()]);

    // a second run reads the cached schedule and reproduces the file
    assert_eq!(rabi(&args).status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(&out).unwrap(), first);
}

#[test]
fn optimize_writes_csv_row_and_json_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "opt.json",
        r#"{"N": 1, "cutoff": 60, "budget": 2000, "noise": {"kind": "boson_loss", "gamma_T": 0.01}}"#,
    );
    let out = dir.path().join("opt.csv");
    let r = rabi(&["optimize", "--config", &cfg, "--seed", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.lines().next().unwrap().contains("\"seed\":3"));
    let lines = data_lines(&csv);
    assert_eq!(lines[0], MetricsRecord::CSV_HEADER);
    assert!(lines[1].starts_with("1,") && lines[1].contains(",boson_loss,"));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.with_extension("json")).unwrap()).unwrap();
    assert_eq!(json["report"]["N"], 1);
    assert_eq!(json["report"]["seed"], 3);
    assert_eq!(json["noisy_metrics"]["noise_type"], "boson_loss");
    let sq = json["report"]["metrics"]["squeeze_db"].as_f64().unwrap();
    assert!((sq - 1.99).abs() < 0.05, "{sq}");
}

#[test]
fn fig2_and_fig3_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "figs.json",
        r#"{"N_max": 2, "N_range": [1, 2], "cutoff": 60, "budget": 2000, "noise_kinds": ["qubit_dephasing"], "gamma_grid": [0.01]}"#,
    );
    let fig2 = rabi(&["fig2", "--config", &cfg]);
    assert_eq!(fig2.status.code(), Some(0));
    let text = String::from_utf8(fig2.stdout).unwrap();
    let rows: Vec<Vec<f64>> = data_lines(&text)[1..]
        .iter()
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 2);
    for r in &rows {
        assert!(r[2] >= r[1], "postselected below deterministic: {r:?}");
    }
    assert!(rows[1][1] > rows[0][1]);

    let fig3 = rabi(&["fig3", "--config", &cfg]);
    assert_eq!(fig3.status.code(), Some(0));
    let text = String::from_utf8(fig3.stdout).unwrap();
    let lines = data_lines(&text);
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("qubit_dephasing,0.0100000000,"));
}
